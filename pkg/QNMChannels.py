"""
QNMChannels — quantum channels in Kraus and/or Choi form.

Choi convention: η_Λ = (Λ ⊗ id)(φ⁺_{AA'}), registers ordered
(out..., in'...), so a TP map has Tr_out η = τ_{A'} and Tr η = 1. The
inverse map is Ξ(X) = |A|·Tr_{A'}[(1 ⊗ Xᵀ) η].

Usage:
    from QNMChannels import QuantumChannel, apply, cj_state, diamond_distance_bounds

    x    = QuantumChannel.unitary(PAULI_X, [("C", 2)])
    rho2 = apply(x, rho, on=["C"])
    lo, hi, _ = diamond_distance_bounds(x, QuantumChannel.identity([("C", 2)]))

Both representations are computed lazily from whichever was supplied.
Hermiticity-preserving maps that are not CP (differences, affine
combinations used by residual checks) are built with validate=False; they
have no Kraus form and are applied through their superoperator.
"""

from __future__ import annotations

import logging
import math
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize

from QNMCore import (
    DensityOperator,
    SystemLayout,
    _labels,
    as_layout,
    hermitian_part,
    make_rng,
    permute_matrix,
    phi_plus_vector,
    ptrace_matrix,
    random_unitary,
    trace_norm,
)
from QNMExceptions import ChannelError, LayoutError
from QNMTypes import REG_ENV, REPRESENTATIONS, ChannelDocument
from qnm_config import ISOMETRY_TOL, KRAUS_CUTOFF, PSD_TOL, SCHEMA, TRACE_TOL

log = logging.getLogger("qnmlab.channels")


PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


# ── Channel type ───────────────────────────────────────────────────────────────

class QuantumChannel:
    """
    Linear map in_layout → out_layout held as Kraus operators, a Choi
    matrix, or both.

    Args:
        in_layout, out_layout: register layouts (SystemLayout or (label, dim) pairs).
        kraus:    array-like of shape (n, d_out, d_in).
        choi:     (d_out·d_in)² matrix in (out, in') order.
        name:     label used in logs and reports.
        validate: reject a non-PSD Choi matrix (default True).
    """

    def __init__(self, in_layout, out_layout, *, kraus=None, choi=None, name: str = "", validate: bool = True):
        self.in_layout  = as_layout(in_layout)
        self.out_layout = as_layout(out_layout)
        self.name       = name
        self._kraus     = None
        self._choi      = None
        self._superop   = None
        self._is_cp     = None
        self._is_tp     = None

        din, dout = self.in_dim, self.out_dim
        if kraus is None and choi is None:
            raise ChannelError("a channel needs Kraus operators or a Choi matrix")
        if kraus is not None:
            k = np.asarray(kraus, dtype=complex)
            if k.ndim == 2:
                k = k[None]
            if k.shape[1:] != (dout, din):
                raise ChannelError(f"Kraus shape {k.shape[1:]} does not match {dout}x{din}")
            self._kraus = k
            self._is_cp = True
        if choi is not None:
            c = np.asarray(choi, dtype=complex)
            if c.shape != (dout * din, dout * din):
                raise ChannelError(f"Choi shape {c.shape} does not match ({dout}·{din})²")
            self._choi = c
            if validate and self._kraus is None and not self.is_cp:
                raise ChannelError(f"Choi matrix of {name or 'channel'} is not PSD")

    # ── Shapes ─────────────────────────────────────────────────────────────────

    @property
    def in_dim(self) -> int:
        return self.in_layout.total_dim

    @property
    def out_dim(self) -> int:
        return self.out_layout.total_dim

    @property
    def choi_layout(self) -> SystemLayout:
        return self.out_layout + self.in_layout.primed()

    # ── Representations ────────────────────────────────────────────────────────

    @property
    def kraus(self) -> np.ndarray:
        if self._kraus is None:
            if not self.is_cp:
                raise ChannelError(f"{self.name or 'map'} is not CP and has no Kraus form")
            w, v = np.linalg.eigh(hermitian_part(self._choi))
            keep = w > KRAUS_CUTOFF
            vecs = v[:, keep] * np.sqrt(w[keep] * self.in_dim)
            k = vecs.T.reshape(-1, self.out_dim, self.in_dim)
            if not len(k):
                k = np.zeros((1, self.out_dim, self.in_dim), dtype=complex)
            self._kraus = k
        return self._kraus

    @property
    def choi(self) -> np.ndarray:
        if self._choi is None:
            vecs = self._kraus.reshape(len(self._kraus), -1) / math.sqrt(self.in_dim)
            self._choi = vecs.T @ vecs.conj()
        return self._choi

    @property
    def superop(self) -> np.ndarray:
        """T[o, o', i, i'] with Λ(X)[o, o'] = Σ T[o, o', i, i'] X[i, i']."""
        if self._superop is None:
            if self._kraus is not None and len(self._kraus) <= self.out_dim * self.in_dim:
                k = self._kraus
                self._superop = np.einsum("kai,kbj->abij", k, k.conj(), optimize=True)
            else:
                dout, din = self.out_dim, self.in_dim
                self._superop = din * self.choi.reshape(dout, din, dout, din).transpose(0, 2, 1, 3)
        return self._superop

    @property
    def n_kraus(self) -> int | None:
        return len(self._kraus) if self._kraus is not None else None

    # ── Properties ─────────────────────────────────────────────────────────────

    @property
    def is_cp(self) -> bool:
        if self._is_cp is None:
            c = self._choi
            asym = float(np.max(np.abs(c - c.conj().T)))
            self._is_cp = asym <= 1e-9 and float(np.linalg.eigvalsh(hermitian_part(c))[0]) >= -PSD_TOL
        return self._is_cp

    @property
    def is_tp(self) -> bool:
        if self._is_tp is None:
            self._is_tp = self.tp_defect() <= TRACE_TOL
        return self._is_tp

    def tp_defect(self) -> float:
        """max-abs deviation of Λ†(1) from 1."""
        if self._kraus is not None:
            k = self._kraus
            m = np.einsum("kai,kaj->ij", k.conj(), k, optimize=True)
        else:
            marg = ptrace_matrix(self._choi, (self.out_dim, self.in_dim), [1]) * self.in_dim
            m = marg.T
        return float(np.max(np.abs(m - np.eye(self.in_dim))))

    def adjoint_unit(self) -> np.ndarray:
        """Λ†(1) as a matrix on the input space."""
        if self._kraus is not None:
            k = self._kraus
            return np.einsum("kai,kaj->ij", k.conj(), k, optimize=True)
        return (ptrace_matrix(self._choi, (self.out_dim, self.in_dim), [1]) * self.in_dim).T

    # ── Constructors ───────────────────────────────────────────────────────────

    @classmethod
    def identity(cls, layout, name: str = "id") -> "QuantumChannel":
        layout = as_layout(layout)
        return cls(layout, layout, kraus=np.eye(layout.total_dim, dtype=complex), name=name)

    @classmethod
    def unitary(cls, u, layout, name: str = "") -> "QuantumChannel":
        layout = as_layout(layout)
        u = np.asarray(u, dtype=complex)
        if not np.allclose(u.conj().T @ u, np.eye(u.shape[1]), atol=ISOMETRY_TOL):
            raise ChannelError(f"{name or 'matrix'} is not unitary")
        return cls(layout, layout, kraus=u, name=name)

    @classmethod
    def constant(cls, state, in_layout, out_layout=None, name: str = "") -> "QuantumChannel":
        """⟨σ⟩: X ↦ Tr(X)·σ. Choi matrix σ ⊗ τ."""
        in_layout = as_layout(in_layout)
        if isinstance(state, DensityOperator):
            sigma = state.matrix
            out_layout = out_layout or state.layout
        else:
            sigma = np.asarray(state, dtype=complex)
        out_layout = as_layout(out_layout)
        din = in_layout.total_dim
        return cls(in_layout, out_layout, choi=np.kron(sigma, np.eye(din) / din), name=name or "const")

    @classmethod
    def from_linear_map(
        cls,
        fn: Callable[[np.ndarray], np.ndarray],
        in_layout,
        out_layout,
        name: str = "",
        validate: bool = True,
    ) -> "QuantumChannel":
        """Choi matrix (1/d)·Σ_ij fn(|i⟩⟨j|) ⊗ |i⟩⟨j|."""
        in_layout, out_layout = as_layout(in_layout), as_layout(out_layout)
        din, dout = in_layout.total_dim, out_layout.total_dim
        eta = np.zeros((dout, din, dout, din), dtype=complex)
        unit = np.zeros((din, din), dtype=complex)
        for i in range(din):
            for j in range(din):
                unit[i, j] = 1.0
                eta[:, i, :, j] = fn(unit)
                unit[i, j] = 0.0
        return cls(in_layout, out_layout, choi=eta.reshape(dout * din, dout * din) / din, name=name, validate=validate)

    def relabeled(self, in_map: dict | None = None, out_map: dict | None = None) -> "QuantumChannel":
        ch = QuantumChannel.__new__(QuantumChannel)
        ch.__dict__.update(self.__dict__)
        ch.in_layout  = self.in_layout.renamed(in_map or {})
        ch.out_layout = self.out_layout.renamed(out_map or {})
        return ch

    def __call__(self, rho: DensityOperator, on=None) -> DensityOperator:
        return apply(self, rho, on)

    def __repr__(self) -> str:
        rep = "kraus" if self._kraus is not None else "choi"
        return f"QuantumChannel({self.name or '?'}: {self.in_layout} → {self.out_layout}, {rep})"


class Isometry:
    """V with V†V = 1, mapping in_layout into out_layout (environment included)."""

    def __init__(self, matrix, in_layout, out_layout, env_label: str | None = None):
        v = np.asarray(matrix, dtype=complex)
        self.in_layout  = as_layout(in_layout)
        self.out_layout = as_layout(out_layout)
        if v.shape != (self.out_layout.total_dim, self.in_layout.total_dim):
            raise ChannelError(f"isometry shape {v.shape} does not match layouts")
        defect = float(np.max(np.abs(v.conj().T @ v - np.eye(v.shape[1])))) if v.size else 0.0
        if defect > ISOMETRY_TOL:
            raise ChannelError(f"matrix is not an isometry (defect {defect:.2e})")
        self.matrix    = v
        self.env_label = env_label

    def as_channel(self, trace_env: bool = False) -> QuantumChannel:
        ch = QuantumChannel(self.in_layout, self.out_layout, kraus=self.matrix, name="isometry")
        if trace_env and self.env_label:
            return compose_channels(partial_trace_channel(self.out_layout, [self.env_label]), ch)
        return ch

    def __repr__(self) -> str:
        return f"Isometry({self.in_layout} → {self.out_layout})"


# ── Application ────────────────────────────────────────────────────────────────

def apply_matrix(
    channel: QuantumChannel,
    matrix: np.ndarray,
    layout: SystemLayout,
    on: Sequence[str] | None = None,
) -> tuple[np.ndarray, SystemLayout]:
    """
    (Λ ⊗ id)(matrix) on raw arrays. Works for any operator, not only states.

    The output registers replace the targets at the position of the first
    target; untouched registers keep their relative order. Output labels
    follow channel.out_layout, with any label shared with channel.in_layout
    renamed to the register it was applied to.
    """
    on = list(channel.in_layout.labels) if on is None else _labels(on)
    idx = [layout.index(l) for l in on]
    if tuple(layout.dim_of(l) for l in on) != channel.in_layout.dims:
        raise LayoutError(
            f"{channel.name or 'channel'} expects {channel.in_layout}, got {layout.subset(on)}",
            field=",".join(on),
        )
    rename = {src: dst for src, dst in zip(channel.in_layout.labels, on)}
    out_layout = channel.out_layout.renamed({l: rename[l] for l in channel.out_layout.labels if l in rename})

    rest  = [i for i in range(len(layout)) if i not in idx]
    dims  = layout.dims
    perm  = idx + rest
    din   = channel.in_dim
    dout  = channel.out_dim
    r     = int(np.prod([dims[i] for i in rest], dtype=np.int64)) if rest else 1
    x4    = permute_matrix(matrix, dims, perm).reshape(din, r, din, r)

    nk = channel.n_kraus
    if nk is not None and nk * (din + dout) < dout * din:
        k   = channel.kraus
        tmp = np.tensordot(k, x4, axes=([2], [0]))            # n, o, r, i', s
        y4  = np.einsum("naris,nbi->arbs", tmp, k.conj(), optimize=True)
    else:
        y4 = np.tensordot(channel.superop, x4, axes=([2, 3], [0, 2])).transpose(0, 2, 1, 3)
    y = y4.reshape(dout * r, dout * r)

    first   = min(idx)
    before  = [i for i in rest if i < first]
    after   = [i for i in rest if i > first]
    m       = len(out_layout)
    cur_dims = out_layout.dims + tuple(dims[i] for i in rest)
    order   = [m + rest.index(i) for i in before] + list(range(m)) + [m + rest.index(i) for i in after]
    y = permute_matrix(y, cur_dims, order)
    new_layout = layout.subset([layout.labels[i] for i in before]) + out_layout + layout.subset(
        [layout.labels[i] for i in after]
    )
    return y, new_layout


def apply(channel: QuantumChannel, rho: DensityOperator, on=None) -> DensityOperator:
    """Λ ⊗ id applied to the registers named in `on` (default: the channel's input labels)."""
    y, layout = apply_matrix(channel, rho.matrix, rho.layout, on)
    normalized = rho.normalized and channel.is_tp
    return DensityOperator(hermitian_part(y), layout, normalized=normalized, check=False)


def choi_action(eta: np.ndarray, x: np.ndarray, in_dim: int, out_dim: int) -> np.ndarray:
    """Ξ(X) = |A|·Tr_{A'}[(1 ⊗ Xᵀ) η]."""
    full = np.kron(np.eye(out_dim), np.asarray(x).T) @ np.asarray(eta)
    return in_dim * ptrace_matrix(full, (out_dim, in_dim), [0])


# ── Choi–Jamiołkowski ──────────────────────────────────────────────────────────

def cj_state(channel: QuantumChannel) -> DensityOperator:
    """η_Λ = (Λ ⊗ id)(φ⁺) on out ⊗ in'."""
    return DensityOperator(
        hermitian_part(channel.choi),
        channel.choi_layout,
        normalized=channel.is_tp,
        check=False,
    )


def cj_inverse(eta, in_layout=None, out_layout=None, name: str = "") -> QuantumChannel:
    """Channel whose Choi matrix is η. Raises ChannelError for a non-PSD η."""
    if isinstance(eta, DensityOperator):
        m = eta.matrix
        if in_layout is None or out_layout is None:
            raise LayoutError("cj_inverse needs explicit in/out layouts")
    else:
        m = np.asarray(eta, dtype=complex)
    return QuantumChannel(in_layout, out_layout, choi=m, name=name or "cj_inverse")


# ── Channel algebra ────────────────────────────────────────────────────────────

def _chain_check(second: QuantumChannel, first: QuantumChannel) -> None:
    if first.out_layout.dims != second.in_layout.dims:
        raise ChannelError(f"cannot compose {first.out_layout} into {second.in_layout}")


def compose_channels(second: QuantumChannel, first: QuantumChannel, name: str = "") -> QuantumChannel:
    """second ∘ first."""
    _chain_check(second, first)
    name = name or f"{second.name}∘{first.name}"
    n1, n2 = first.n_kraus, second.n_kraus
    if n1 is not None and n2 is not None and n1 * n2 <= second.out_dim * first.in_dim:
        k = np.einsum("mab,nbc->mnac", second.kraus, first.kraus, optimize=True)
        return QuantumChannel(first.in_layout, second.out_layout, kraus=k.reshape(-1, *k.shape[2:]), name=name)
    t = np.tensordot(second.superop, first.superop, axes=([2, 3], [0, 1]))
    dout, din = second.out_dim, first.in_dim
    choi = t.transpose(0, 2, 1, 3).reshape(dout * din, dout * din) / din
    cp = first.is_cp and second.is_cp
    return QuantumChannel(first.in_layout, second.out_layout, choi=choi, name=name, validate=cp)


def tensor_channels(first: QuantumChannel, second: QuantumChannel, name: str = "") -> QuantumChannel:
    """first ⊗ second with concatenated layouts."""
    name = name or f"{first.name}⊗{second.name}"
    in_layout  = first.in_layout + second.in_layout
    out_layout = first.out_layout + second.out_layout
    if first.n_kraus is not None and second.n_kraus is not None:
        k = np.einsum("mab,ncd->mnacbd", first.kraus, second.kraus, optimize=True)
        n = k.shape[0] * k.shape[1]
        return QuantumChannel(
            in_layout, out_layout,
            kraus=k.reshape(n, first.out_dim * second.out_dim, first.in_dim * second.in_dim),
            name=name,
        )
    dims = (first.out_dim, first.in_dim, second.out_dim, second.in_dim)
    choi = permute_matrix(np.kron(first.choi, second.choi), dims, [0, 2, 1, 3])
    return QuantumChannel(in_layout, out_layout, choi=choi, name=name, validate=False)


def combine_channels(terms: Iterable[tuple[float, QuantumChannel]], name: str = "") -> QuantumChannel:
    """Σ cᵢ Λᵢ as a Hermiticity-preserving map (CP not assumed)."""
    terms = list(terms)
    if not terms:
        raise ChannelError("combine_channels needs at least one term")
    ref = terms[0][1]
    choi = np.zeros_like(ref.choi)
    for coef, ch in terms:
        if ch.in_layout.dims != ref.in_layout.dims or ch.out_layout.dims != ref.out_layout.dims:
            raise ChannelError(f"cannot combine {ch} with {ref}")
        choi = choi + coef * ch.choi
    return QuantumChannel(ref.in_layout, ref.out_layout, choi=choi, name=name or "combination", validate=False)


def adjoint_channel(channel: QuantumChannel) -> QuantumChannel:
    """Λ†, Kraus operators K†, mapping out → in."""
    k = channel.kraus
    return QuantumChannel(
        channel.out_layout, channel.in_layout,
        kraus=k.conj().transpose(0, 2, 1),
        name=f"{channel.name}†",
    )


def transpose_channel(channel: QuantumChannel) -> QuantumChannel:
    """Λᵀ with Kraus operators Kᵀ in the standard basis, mapping out → in."""
    k = channel.kraus
    return QuantumChannel(
        channel.out_layout, channel.in_layout,
        kraus=k.transpose(0, 2, 1),
        name=f"{channel.name}ᵀ",
    )


def partial_trace_channel(layout, discard) -> QuantumChannel:
    layout  = as_layout(layout)
    discard = _labels(discard)
    kept    = layout.without(discard)
    dk      = layout.dim_of_all(discard)
    order   = [layout.index(l) for l in kept.labels] + [layout.index(l) for l in discard]
    reorder = _reorder_unitary(layout.dims, order)
    dkept   = kept.total_dim
    kraus   = []
    for e in range(dk):
        bra = np.zeros((1, dk))
        bra[0, e] = 1.0
        kraus.append(np.kron(np.eye(dkept), bra) @ reorder)
    return QuantumChannel(layout, kept, kraus=np.array(kraus), name=f"Tr_{''.join(discard)}")


def _reorder_unitary(dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Permutation matrix P with P(⊗ᵢ|xᵢ⟩) = ⊗ⱼ|x_{order[j]}⟩."""
    dims = tuple(dims)
    d    = int(np.prod(dims, dtype=np.int64))
    idx  = np.arange(d).reshape(dims).transpose(list(order)).reshape(-1)
    p    = np.zeros((d, d))
    p[np.arange(d), idx] = 1.0
    return p


def stinespring_dilate(channel: QuantumChannel, env_label: str = REG_ENV) -> Isometry:
    """V = Σₑ Kₑ ⊗ |e⟩_E; Tr_E[V ρ V†] = Λ(ρ)."""
    k = channel.kraus
    n = len(k)
    while env_label in channel.out_layout:
        env_label += "'"
    v = k.transpose(1, 0, 2).reshape(channel.out_dim * n, channel.in_dim)
    return Isometry(v, channel.in_layout, channel.out_layout + SystemLayout([(env_label, n)]), env_label=env_label)


# ── Random channels ────────────────────────────────────────────────────────────

def random_channel(in_layout, out_layout, rng, rank: int | None = None, name: str = "random") -> QuantumChannel:
    """Haar-random Stinespring isometry with `rank` Kraus operators (default min(d_in·d_out, 8))."""
    in_layout, out_layout = as_layout(in_layout), as_layout(out_layout)
    rng  = make_rng(rng)
    din, dout = in_layout.total_dim, out_layout.total_dim
    rank = rank or min(din * dout, 8)
    rank = max(rank, -(-din // dout))
    u = random_unitary(dout * rank, rng)[:, :din]
    k = u.reshape(dout, rank, din).transpose(1, 0, 2)
    return QuantumChannel(in_layout, out_layout, kraus=k, name=name)


def random_isometry(in_layout, out_layout, rng, name: str = "random-isometry") -> QuantumChannel:
    in_layout, out_layout = as_layout(in_layout), as_layout(out_layout)
    u = random_unitary(out_layout.total_dim, make_rng(rng))[:, : in_layout.total_dim]
    return QuantumChannel(in_layout, out_layout, kraus=u, name=name)


# ── Diamond distance ───────────────────────────────────────────────────────────

class DiamondBounds(NamedTuple):
    lower:           float
    upper:           float
    heuristic_exact: float | None = None


def diamond_distance_bounds(
    first: QuantumChannel,
    second: QuantumChannel,
    heuristic: bool = False,
    seed: int = 0,
    restarts: int = 3,
) -> DiamondBounds:
    """
    Two-sided bounds on ‖Λ₁ − Λ₂‖⋄.

    lower = ‖η₁ − η₂‖₁ (φ⁺ is an admissible input), upper = |A|·lower.
    With heuristic=True a seeded local search over purified inputs
    (1 ⊗ M)|φ⁺⟩ refines the lower bound; the result lies in [lower, upper].
    """
    if first.in_layout.dims != second.in_layout.dims or first.out_layout.dims != second.out_layout.dims:
        raise LayoutError(f"diamond distance between {first} and {second}: layouts differ")
    delta = hermitian_part(first.choi - second.choi)
    lower = trace_norm(delta)
    din   = first.in_dim
    upper = din * lower
    if not heuristic:
        return DiamondBounds(lower, upper)
    best = _diamond_search(delta, first.out_dim, din, seed, restarts)
    best = min(max(best, lower), upper)
    log.debug(f"diamond heuristic: lower={lower:.6g} heuristic={best:.6g} upper={upper:.6g}")
    return DiamondBounds(lower, upper, best)


def _diamond_search(delta: np.ndarray, dout: int, din: int, seed: int, restarts: int) -> float:
    def value(params: np.ndarray) -> float:
        m = (params[: din * din] + 1j * params[din * din:]).reshape(din, din)
        fro = float(np.real(np.vdot(m, m)))
        if fro < 1e-14:
            return 0.0
        op = np.kron(np.eye(dout), m)
        return din / fro * trace_norm(op @ delta @ op.conj().T)

    rng = make_rng(seed)
    starts = [np.concatenate([np.eye(din).reshape(-1), np.zeros(din * din)])]
    for _ in range(restarts):
        starts.append(rng.normal(size=2 * din * din))
    best = 0.0
    for x0 in starts:
        res  = minimize(lambda p: -value(p), x0, method="L-BFGS-B", options={"maxiter": 200})
        best = max(best, value(res.x), value(x0))
    return best


# ── Lemma helpers ──────────────────────────────────────────────────────────────

def mirror_residual(x: np.ndarray) -> float:
    """‖(X ⊗ 1)|φ⁺_{AA'}⟩ − √(|B|/|A|)(1 ⊗ Xᵀ)|φ⁺_{BB'}⟩‖₂ for X: A → B."""
    x = np.asarray(x, dtype=complex)
    b, a = x.shape
    lhs = np.kron(x, np.eye(a)) @ phi_plus_vector(a)
    rhs = math.sqrt(b / a) * (np.kron(np.eye(b), x.T) @ phi_plus_vector(b))
    return float(np.linalg.norm(lhs - rhs))


# ── JSON codec ─────────────────────────────────────────────────────────────────

def encode_matrix(m: np.ndarray) -> list:
    """Row-major complex entries as [re, im] pairs."""
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def decode_matrix(rows) -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def channel_to_json(channel: QuantumChannel, representation: str = "auto") -> ChannelDocument:
    if representation == "auto":
        representation = "kraus" if channel.n_kraus is not None else "choi"
    if representation not in REPRESENTATIONS:
        raise ChannelError(f"unknown representation {representation!r}", field="representation")
    doc: ChannelDocument = {
        "schema":         SCHEMA,
        "kind":           "channel",
        "name":           channel.name,
        "in_layout":      [[l, d] for l, d in channel.in_layout],
        "out_layout":     [[l, d] for l, d in channel.out_layout],
        "representation": representation,
    }
    if representation == "kraus":
        doc["kraus"] = [encode_matrix(k) for k in channel.kraus]
    else:
        doc["choi"] = encode_matrix(channel.choi)
    return doc


def channel_from_json(doc: ChannelDocument) -> QuantumChannel:
    if doc.get("kind") != "channel":
        raise ChannelError(f"not a channel document (kind={doc.get('kind')!r})", field="kind")
    in_layout  = SystemLayout([(l, int(d)) for l, d in doc["in_layout"]])
    out_layout = SystemLayout([(l, int(d)) for l, d in doc["out_layout"]])
    if doc.get("representation") == "kraus":
        return QuantumChannel(in_layout, out_layout, kraus=np.array([decode_matrix(k) for k in doc["kraus"]]),
                              name=doc.get("name", ""))
    return QuantumChannel(in_layout, out_layout, choi=decode_matrix(doc["choi"]), name=doc.get("name", ""))
