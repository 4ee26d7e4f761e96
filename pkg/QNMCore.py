"""
QNMCore — register-aware dense linear algebra for finite quantum systems.

Everything else in qnmlab is built on the three types defined here:

    SystemLayout     ordered (label, dim) registers, e.g. A ⊗ B ⊗ R
    DensityOperator  validated Hermitian, unit-trace, PSD matrix + layout
    EntropyLedger    named entropic quantities (bits) with sign checks

Usage:
    from QNMCore import SystemLayout, max_entangled, partial_trace, mutual_information

    phi = max_entangled(2, labels=("A", "R"))
    tau = partial_trace(phi, ["R"])           # τ_A
    mutual_information(phi, ("A", "R"))       # 2.0

Register order is the construction order. Nothing reorders registers
implicitly; use permute() when an operation needs a different order.
Matrices are Kronecker-ordered with the first register most significant.

All entropies are in bits. Eigenvalues below EIG_CLAMP are treated as zero
before taking logarithms.
"""

from __future__ import annotations

import logging
import math
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np
from scipy.stats import unitary_group

from QNMExceptions import LayoutError, StateError
from qnm_config import EIG_CLAMP, ENTROPY_TOL, HERMITIAN_TOL, PSD_TOL, TRACE_TOL

log = logging.getLogger("qnmlab.core")


# ── Layouts ────────────────────────────────────────────────────────────────────

class Block(NamedTuple):
    """A contiguous block of basis indices inside one register (direct sums)."""
    name:   str
    offset: int
    dim:    int


class SystemLayout:
    """
    Ordered list of (label, dim) registers.

    Equality is label-and-dim equality in order. Block annotations (for
    direct-sum registers such as C ⊕ Â or A ⊕ ⊥) ride along but do not take
    part in equality.
    """

    __slots__ = ("_regs", "_blocks")

    def __init__(
        self,
        registers: Iterable[tuple[str, int]],
        blocks: Mapping[str, Sequence[Block]] | None = None,
    ):
        regs = tuple((str(label), int(dim)) for label, dim in registers)
        labels = [label for label, _ in regs]
        if len(set(labels)) != len(labels):
            dup = next(l for l in labels if labels.count(l) > 1)
            raise LayoutError(f"duplicate register label {dup!r}", field=dup)
        for label, dim in regs:
            if dim < 1:
                raise LayoutError(f"register {label!r} has dim {dim}", field=label)
        self._regs = regs
        self._blocks: dict[str, tuple[Block, ...]] = {}
        for label, blist in (blocks or {}).items():
            if label not in labels:
                raise LayoutError(f"block annotation for unknown register {label!r}", field=label)
            blist = tuple(Block(*b) for b in blist)
            if sum(b.dim for b in blist) != self.dim_of(label):
                raise LayoutError(f"blocks of {label!r} do not cover the register", field=label)
            self._blocks[label] = blist

    # ── Accessors ──────────────────────────────────────────────────────────────

    @property
    def registers(self) -> tuple[tuple[str, int], ...]:
        return self._regs

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self._regs)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self._regs)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self._regs else 1

    @property
    def blocks(self) -> dict[str, tuple[Block, ...]]:
        return dict(self._blocks)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LayoutError(f"unknown register {label!r} (layout {self})", field=label) from None

    def dim_of(self, label: str) -> int:
        return self._regs[self.index(label)][1]

    def dim_of_all(self, labels: Iterable[str]) -> int:
        return int(np.prod([self.dim_of(l) for l in labels], dtype=np.int64))

    def __contains__(self, label: str) -> bool:
        return label in self.labels

    def __iter__(self):
        return iter(self._regs)

    def __len__(self) -> int:
        return len(self._regs)

    def __eq__(self, other) -> bool:
        return isinstance(other, SystemLayout) and self._regs == other._regs

    def __hash__(self) -> int:
        return hash(self._regs)

    def __repr__(self) -> str:
        inner = " ⊗ ".join(f"{l}[{d}]" for l, d in self._regs) or "trivial"
        return f"SystemLayout({inner})"

    # ── Derived layouts ────────────────────────────────────────────────────────

    def __add__(self, other: "SystemLayout") -> "SystemLayout":
        return SystemLayout(self._regs + other._regs, {**self._blocks, **other._blocks})

    def subset(self, labels: Iterable[str]) -> "SystemLayout":
        """Registers named in `labels`, in the order given."""
        labels = list(labels)
        return SystemLayout(
            [(l, self.dim_of(l)) for l in labels],
            {l: b for l, b in self._blocks.items() if l in labels},
        )

    def without(self, labels: Iterable[str]) -> "SystemLayout":
        drop = set(labels)
        for l in drop:
            self.index(l)
        return self.subset([l for l in self.labels if l not in drop])

    def renamed(self, mapping: Mapping[str, str]) -> "SystemLayout":
        return SystemLayout(
            [(mapping.get(l, l), d) for l, d in self._regs],
            {mapping.get(l, l): b for l, b in self._blocks.items()},
        )

    def primed(self) -> "SystemLayout":
        """Copy of this layout with every label primed (A → A')."""
        return self.renamed({l: l + "'" for l in self.labels})

    def block_projector(self, label: str, block: str) -> np.ndarray:
        """Projector onto one named block of `label`, as a matrix on that register."""
        for b in self._blocks.get(label, ()):
            if b.name == block:
                proj = np.zeros((self.dim_of(label),) * 2, dtype=complex)
                idx  = np.arange(b.offset, b.offset + b.dim)
                proj[idx, idx] = 1.0
                return proj
        raise LayoutError(f"register {label!r} has no block {block!r}", field=label)


def as_layout(spec) -> SystemLayout:
    if isinstance(spec, SystemLayout):
        return spec
    return SystemLayout(spec)


def _labels(spec) -> list[str]:
    if isinstance(spec, str):
        return [spec]
    return list(spec)


# ── Raw matrix helpers ─────────────────────────────────────────────────────────

def ptrace_matrix(matrix: np.ndarray, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Partial trace of a Kronecker-ordered matrix, keeping register indices `keep`."""
    dims = tuple(int(d) for d in dims)
    keep = sorted(set(keep))
    n    = len(dims)
    t    = np.asarray(matrix).reshape(dims + dims)
    for i in sorted((i for i in range(n) if i not in keep), reverse=True):
        t = np.trace(t, axis1=i, axis2=i + t.ndim // 2)
    d = int(np.prod([dims[i] for i in keep], dtype=np.int64)) if keep else 1
    return t.reshape(d, d)


def permute_matrix(matrix: np.ndarray, dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors: result factor j is input factor order[j]."""
    dims  = tuple(int(d) for d in dims)
    order = list(order)
    if order == list(range(len(dims))):
        return np.asarray(matrix)
    n = len(dims)
    t = np.asarray(matrix).reshape(dims + dims)
    t = t.transpose(order + [o + n for o in order])
    d = int(np.prod(dims, dtype=np.int64))
    return t.reshape(d, d)


def partial_transpose(matrix: np.ndarray, dims: Sequence[int], registers: Iterable[int]) -> np.ndarray:
    dims = tuple(int(d) for d in dims)
    n    = len(dims)
    t    = np.asarray(matrix).reshape(dims + dims)
    axes = list(range(2 * n))
    for i in registers:
        axes[i], axes[i + n] = axes[i + n], axes[i]
    d = int(np.prod(dims, dtype=np.int64))
    return t.transpose(axes).reshape(d, d)


def hermitian_part(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.conj().T)


# ── Density operators ──────────────────────────────────────────────────────────

class DensityOperator:
    """
    Hermitian, PSD, unit-trace matrix on a SystemLayout.

    Construction symmetrizes (M+M†)/2 when the asymmetry is below
    HERMITIAN_TOL and rejects otherwise. Pass normalized=False for
    sub-normalized operators (accept branches of trace-non-increasing maps);
    those skip the trace check and cannot be fed to entropy functions.
    """

    __slots__ = ("matrix", "layout", "normalized")

    def __init__(self, matrix, layout, *, normalized: bool = True, check: bool = True):
        layout = as_layout(layout)
        m = np.asarray(matrix, dtype=complex)
        if m.shape != (layout.total_dim, layout.total_dim):
            raise LayoutError(f"matrix shape {m.shape} does not match {layout}")
        if check:
            asym = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
            if asym > HERMITIAN_TOL:
                raise StateError(f"matrix is not Hermitian (max asymmetry {asym:.2e})")
            m = hermitian_part(m)
            if normalized:
                tr = float(np.real(np.trace(m)))
                if abs(tr - 1.0) > TRACE_TOL:
                    raise StateError(f"trace {tr:.12f} is not 1")
            lo = float(np.linalg.eigvalsh(m)[0]) if m.size else 0.0
            if lo < -PSD_TOL:
                raise StateError(f"negative eigenvalue {lo:.2e}")
        self.matrix     = m
        self.layout     = layout
        self.normalized = normalized

    @classmethod
    def pure(cls, vector, layout) -> "DensityOperator":
        v = np.asarray(vector, dtype=complex).reshape(-1)
        nrm = np.linalg.norm(v)
        if nrm == 0:
            raise StateError("zero vector")
        v = v / nrm
        return cls(np.outer(v, v.conj()), layout)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def is_pure(self, tol: float = 1e-9) -> bool:
        return abs(float(np.real(np.trace(self.matrix @ self.matrix))) - self.trace ** 2) < tol

    def keep(self, labels) -> "DensityOperator":
        """Marginal on `labels`, in the order given."""
        labels = _labels(labels)
        return partial_trace(self, [l for l in self.layout.labels if l not in labels]).permuted(labels)

    def permuted(self, order) -> "DensityOperator":
        return permute(self, order)

    def __repr__(self) -> str:
        return f"DensityOperator({self.layout}, trace={self.trace:.6f})"


def _trusted(matrix: np.ndarray, layout: SystemLayout, normalized: bool = True) -> DensityOperator:
    return DensityOperator(matrix, layout, normalized=normalized, check=False)


def tensor_compose(parts: Sequence[DensityOperator]) -> DensityOperator:
    """Kronecker product with concatenated layout."""
    if not parts:
        raise LayoutError("tensor_compose needs at least one part")
    layout = parts[0].layout
    m      = parts[0].matrix
    normalized = parts[0].normalized
    for p in parts[1:]:
        layout = layout + p.layout
        m      = np.kron(m, p.matrix)
        normalized = normalized and p.normalized
    return _trusted(m, layout, normalized)


def partial_trace(rho: DensityOperator, discard) -> DensityOperator:
    discard = _labels(discard)
    idx     = [rho.layout.index(l) for l in discard]
    keep    = [i for i in range(len(rho.layout)) if i not in idx]
    m = ptrace_matrix(rho.matrix, rho.layout.dims, keep)
    return _trusted(m, rho.layout.without(discard), rho.normalized)


def permute(rho: DensityOperator, order) -> DensityOperator:
    order = _labels(order)
    if sorted(order) != sorted(rho.layout.labels):
        raise LayoutError(f"permutation {order} does not match {rho.layout}")
    perm = [rho.layout.index(l) for l in order]
    m    = permute_matrix(rho.matrix, rho.layout.dims, perm)
    return _trusted(m, rho.layout.subset(order), rho.normalized)


def relabel(rho: DensityOperator, mapping: Mapping[str, str]) -> DensityOperator:
    return _trusted(rho.matrix, rho.layout.renamed(mapping), rho.normalized)


# ── Special states and operators ───────────────────────────────────────────────

def phi_plus_vector(dim: int) -> np.ndarray:
    v = np.zeros(dim * dim, dtype=complex)
    v[:: dim + 1] = 1.0 / math.sqrt(dim)
    return v


def max_entangled(dim: int, labels: tuple[str, str] = ("S", "S'")) -> DensityOperator:
    """φ⁺ on labels[0] ⊗ labels[1], |φ⁺⟩ = d^{-1/2} Σ|ii⟩."""
    if dim < 1:
        raise StateError(f"dim must be positive, got {dim}")
    v = phi_plus_vector(dim)
    return _trusted(np.outer(v, v.conj()), SystemLayout([(labels[0], dim), (labels[1], dim)]))


def pi_minus(dim: int) -> np.ndarray:
    """Π⁻ = 1 − φ⁺ on d² dims."""
    v = phi_plus_vector(dim)
    return np.eye(dim * dim, dtype=complex) - np.outer(v, v.conj())


def tau_minus(dim: int, labels: tuple[str, str] = ("S", "S'")) -> DensityOperator:
    if dim < 2:
        raise StateError("τ⁻ needs dim ≥ 2")
    return _trusted(pi_minus(dim) / (dim * dim - 1), SystemLayout([(labels[0], dim), (labels[1], dim)]))


def maximally_mixed(layout) -> DensityOperator:
    layout = as_layout(layout)
    d = layout.total_dim
    return _trusted(np.eye(d, dtype=complex) / d, layout)


def swap_operator(dim: int) -> np.ndarray:
    """F on C^d ⊗ C^d, F|ij⟩ = |ji⟩."""
    f = np.zeros((dim * dim, dim * dim), dtype=complex)
    for i in range(dim):
        for j in range(dim):
            f[j * dim + i, i * dim + j] = 1.0
    return f


def swap_trick_check(a: np.ndarray, b: np.ndarray) -> tuple[complex, complex]:
    """(Tr[AB], Tr[F·A⊗B])."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape or a.shape[0] != a.shape[1]:
        raise LayoutError(f"swap trick needs equal square matrices, got {a.shape} and {b.shape}")
    d = a.shape[0]
    return complex(np.trace(a @ b)), complex(np.trace(swap_operator(d) @ np.kron(a, b)))


# ── Norms ──────────────────────────────────────────────────────────────────────

def trace_norm(m: np.ndarray) -> float:
    m = np.asarray(m)
    if m.size == 0:
        return 0.0
    if np.allclose(m, m.conj().T, atol=1e-13, rtol=0):
        return float(np.sum(np.abs(np.linalg.eigvalsh(hermitian_part(m)))))
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def operator_norm(m: np.ndarray) -> float:
    m = np.asarray(m)
    if m.size == 0:
        return 0.0
    return float(np.linalg.svd(m, compute_uv=False)[0])


def holder_check(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """(|Tr[XY]|, ‖X‖₁‖Y‖_∞)."""
    return abs(complex(np.trace(np.asarray(x) @ np.asarray(y)))), trace_norm(x) * operator_norm(y)


def norm_1_2_check(psi: np.ndarray, phi: np.ndarray) -> tuple[float, float]:
    """(‖ψψ† − φφ†‖₁, 2‖ψ − φ‖₂) for vectors of norm at most 1."""
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    phi = np.asarray(phi, dtype=complex).reshape(-1)
    lhs = trace_norm(np.outer(psi, psi.conj()) - np.outer(phi, phi.conj()))
    return lhs, 2.0 * float(np.linalg.norm(psi - phi))


# ── Entropy ────────────────────────────────────────────────────────────────────

def binary_entropy(p: float) -> float:
    if p < -1e-12 or p > 1 + 1e-12:
        raise StateError(f"binary entropy needs p in [0, 1], got {p}")
    p = min(max(p, 0.0), 1.0)
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return float(-p * math.log2(p) - (1 - p) * math.log2(1 - p))


def shannon_entropy(probs: Iterable[float]) -> float:
    p = np.asarray(list(probs), dtype=float)
    p = p[p > EIG_CLAMP]
    return float(-np.sum(p * np.log2(p)))


def _entropy_of_matrix(m: np.ndarray) -> float:
    return shannon_entropy(np.linalg.eigvalsh(hermitian_part(m)))


def von_neumann_entropy(rho: DensityOperator) -> float:
    if not rho.normalized or abs(rho.trace - 1.0) > TRACE_TOL:
        raise StateError(f"entropy of a non-normalized operator (trace {rho.trace:.12f})")
    return _entropy_of_matrix(rho.matrix)


def _marginal_entropy(rho: DensityOperator, labels: list[str]) -> float:
    if not labels:
        return 0.0
    keep = [rho.layout.index(l) for l in labels]
    return _entropy_of_matrix(ptrace_matrix(rho.matrix, rho.layout.dims, keep))


def mutual_information(rho: DensityOperator, parts) -> float:
    """I(X:Y) with parts = (labels of X, labels of Y)."""
    if not rho.normalized:
        raise StateError("mutual information of a non-normalized operator")
    x, y = _labels(parts[0]), _labels(parts[1])
    if set(x) & set(y):
        raise LayoutError(f"mutual information parts overlap: {x} / {y}")
    return _marginal_entropy(rho, x) + _marginal_entropy(rho, y) - _marginal_entropy(rho, x + y)


def conditional_mutual_information(rho: DensityOperator, parts, cond) -> float:
    """I(X:Y|Z) = H(XZ) + H(YZ) − H(XYZ) − H(Z)."""
    x, y, z = _labels(parts[0]), _labels(parts[1]), _labels(cond)
    return (
        _marginal_entropy(rho, x + z)
        + _marginal_entropy(rho, y + z)
        - _marginal_entropy(rho, x + y + z)
        - _marginal_entropy(rho, z)
    )


class EntropyLedger:
    """
    Named entropic quantities in bits.

    Names starting with "I(" are mutual informations (conditional ones
    included) and must be ≥ −ENTROPY_TOL; recording a more negative value
    raises StateError because it means a broken state upstream.
    """

    def __init__(self, entries: Mapping[str, float] | None = None):
        self._entries: dict[str, float] = {}
        for k, v in (entries or {}).items():
            self.record(k, v)

    def record(self, name: str, value: float) -> float:
        value = float(value)
        if name.startswith("I(") and value < -ENTROPY_TOL:
            raise StateError(f"{name} = {value:.3e} is negative")
        self._entries[name] = value
        return value

    def __getitem__(self, name: str) -> float:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def items(self):
        return self._entries.items()

    def to_dict(self) -> dict[str, float]:
        return dict(self._entries)

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}={v:.6f}" for k, v in self._entries.items())
        return f"EntropyLedger({inner})"


def pinsker_gap(rho: DensityOperator, parts=None) -> float:
    """I(A:B) − ½‖ρ_AB − ρ_A⊗ρ_B‖₁², default split: first register vs the rest."""
    if parts is None:
        labels = list(rho.layout.labels)
        parts  = (labels[:1], labels[1:])
    a, b = _labels(parts[0]), _labels(parts[1])
    joint = rho.keep(a + b)
    prod  = np.kron(rho.keep(a).matrix, rho.keep(b).matrix)
    dist  = trace_norm(joint.matrix - prod)
    return mutual_information(joint, (a, b)) - 0.5 * dist * dist


FANNES_FLAVORS = ("entropy", "cond-entropy", "mutual-info", "cond-mutual-info")


def fannes_bound(eps: float, dims: Sequence[int], flavor: str) -> float:
    """
    Continuity bound for a trace distance ‖ρ−ρ'‖₁ ≤ eps.

    entropy:           (ε/2)·log(|A|−1) + h(ε/2)
    cond-entropy:      4ε·log|A| + 2h(ε)
    mutual-info:       5ε·log min(|A|,|B|) + 3h(ε)
    cond-mutual-info:  8ε·log min(|A|,|B|) + 4h(ε)

    h is evaluated at min(ε, ½) so the bound stays monotone for ε > ½.
    """
    if flavor not in FANNES_FLAVORS:
        raise StateError(f"unknown Fannes flavor {flavor!r}", field="flavor")
    if eps < 0 or eps > 2 + 1e-12:
        raise StateError(f"eps must lie in [0, 2], got {eps}", field="eps")
    if eps == 0:
        return 0.0
    h = binary_entropy(min(eps, 0.5))
    if flavor == "entropy":
        d = dims[0]
        return (eps / 2) * (math.log2(d - 1) if d > 1 else 0.0) + binary_entropy(min(eps / 2, 0.5))
    if flavor == "cond-entropy":
        return 4 * eps * math.log2(dims[0]) + 2 * h
    m = math.log2(min(dims[0], dims[1]))
    if flavor == "mutual-info":
        return 5 * eps * m + 3 * h
    return 8 * eps * m + 4 * h


# ── Random objects (seeded) ────────────────────────────────────────────────────

def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_unitary(dim: int, rng) -> np.ndarray:
    rng = make_rng(rng)
    if dim == 1:
        return np.exp(2j * np.pi * rng.random()).reshape(1, 1)
    return np.asarray(unitary_group.rvs(dim, random_state=rng), dtype=complex)


def random_pure_vector(dim: int, rng) -> np.ndarray:
    rng = make_rng(rng)
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_pure(layout, rng) -> DensityOperator:
    layout = as_layout(layout)
    v = random_pure_vector(layout.total_dim, rng)
    return _trusted(np.outer(v, v.conj()), layout)


def random_density(layout, rng, rank: int | None = None) -> DensityOperator:
    """Ginibre-distributed mixed state (full rank unless `rank` is given)."""
    layout = as_layout(layout)
    rng = make_rng(rng)
    d = layout.total_dim
    k = rank or d
    g = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    m = g @ g.conj().T
    return _trusted(m / np.trace(m).real, layout)
