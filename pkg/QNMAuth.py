"""
QNMAuth — DNS and GYZ authentication checks for tagged schemes.

Both notions are existential over simulators. The residuals here evaluate
the canonical witnesses (the oblivious simulator Γ_V for GYZ, the Λ′/Λ″
split for DNS), so every reported ε is an upper bound on the true one.

Usage:
    from QNMAuth import gyz_keywise, gyz_residual, dns_residual

    scheme = tagged_scheme(clifford_scheme(2), t=1)
    attack = make_attack("pauli", scheme, pauli="XI")
    report = gyz_keywise(scheme, attack, default_pure(scheme.a))
    print(report.mean_sq_deviation, report.bound)

Decrypt outputs follow the ⊥ convention: rejection lands on the last basis
vector of Ā, and accept-branch quantities are taken on the acc block.
"""

from __future__ import annotations

import logging
import math
from typing import NamedTuple

import numpy as np
from scipy.linalg import expm, sqrtm

from QNMChannels import (
    QuantumChannel,
    apply,
    apply_matrix,
    combine_channels,
    compose_channels,
    stinespring_dilate,
    tensor_channels,
)
from QNMCore import (
    DensityOperator,
    SystemLayout,
    hermitian_part,
    make_rng,
    operator_norm,
    ptrace_matrix,
    trace_norm,
)
from QNMDesigns import UnitaryEnsemble, design_deficiency, pauli_from_label
from QNMExceptions import ChannelError, IncompatibleScenarioError, StateError
from QNMSchemes import EncryptionScheme, accept_embedding, reject_state
from QNMSecurity import (
    AttackScenario,
    attack_components,
    decrypted_mixed,
    effective_channel,
)
from QNMTypes import BLOCK_ACCEPT, REG_CIPHERTEXT, REG_PLAINTEXT, REG_SIDE, REG_SIDE_OUT

log = logging.getLogger("qnmlab.auth")

A, B, C, BT = REG_PLAINTEXT, REG_SIDE, REG_CIPHERTEXT, REG_SIDE_OUT

GYZ_DNS_REGIME = 62.0 ** -2   # ε_GYZ above this is out of the implication's regime


# ── Reports ────────────────────────────────────────────────────────────────────

class KeywiseReport:
    """
    Per-key deviations ‖(1 ⊗ Γ_V − Φ_k)|ρ⟩‖₂ and accept probabilities.

    bound is 1/|T| + 3δ; mean_sq_deviation ≤ bound is the keywise GYZ claim,
    and bad_fraction(α) ≤ 1/α is its Markov consequence.
    """

    def __init__(self, deviations: np.ndarray, accept: np.ndarray, weights: np.ndarray, bound: float):
        self.deviations = np.asarray(deviations, dtype=float)
        self.accept     = np.asarray(accept, dtype=float)
        self.weights    = np.asarray(weights, dtype=float)
        self.bound      = float(bound)

    @property
    def per_key(self) -> list[tuple[int, float, float]]:
        return [(k, float(d), float(p)) for k, (d, p) in enumerate(zip(self.deviations, self.accept))]

    @property
    def mean_sq_deviation(self) -> float:
        return float(self.weights @ self.deviations ** 2)

    @property
    def mean_accept(self) -> float:
        return float(self.weights @ self.accept)

    def bad_fraction(self, alpha: float) -> float:
        """Weight of keys with deviation > √(α · bound)."""
        cut = math.sqrt(alpha * self.bound)
        return float(self.weights[self.deviations > cut].sum())

    def quantiles(self, qs=(0.5, 0.9, 0.99, 1.0)) -> dict[str, float]:
        return {f"q{int(q * 100)}": float(np.quantile(self.deviations, q)) for q in qs}

    def __repr__(self) -> str:
        return f"KeywiseReport(keys={len(self.deviations)}, mean_sq={self.mean_sq_deviation:.6f}, bound={self.bound:.6f})"


class GYZResult(NamedTuple):
    residual: float
    bound:    float       # 4(1/|T| + 3δ)^{1/3}
    delta:    float


class DNSResult(NamedTuple):
    residual:   float
    gamma:      float     # γ = max(γ̂, |C|⁻²), 0 for GYZ-derived witnesses
    eta:        float     # ‖M − 1‖ of the witness sum before correction
    correction: float     # ‖𝓜 − id‖⋄ upper bound


class AcceptStats(NamedTuple):
    accept_prob: float
    reject_prob: float
    fidelity:    float | None    # None when acceptance mass ≤ 1e-12


class ImplicationCase(NamedTuple):
    attack:      str
    epsilon_gyz: float
    epsilon_dns: float
    bound:       float | None    # None when out of regime
    ok:          bool | None


# ── Helpers ────────────────────────────────────────────────────────────────────

def _require_tagged_isometric(scheme: EncryptionScheme) -> None:
    if scheme.tag is None or scheme.isometries is None:
        raise IncompatibleScenarioError(f"{scheme.name} is not a tagged unitary scheme", field="scheme")


def default_pure(a: int, b: int = 1) -> np.ndarray:
    """|φ⁺⟩ between A and the first min(a, b) levels of B, or |0⟩_A|0⟩_B for trivial B."""
    psi = np.zeros((a, b), dtype=complex)
    m = min(a, b)
    psi[np.arange(m), np.arange(m)] = 1.0 / math.sqrt(m)
    return psi.reshape(-1)


def _pure_vector(rho, dim: int) -> np.ndarray:
    if isinstance(rho, DensityOperator):
        if not rho.is_pure():
            raise StateError("keywise GYZ needs a pure input state")
        w, v = np.linalg.eigh(rho.matrix)
        return v[:, -1]
    v = np.asarray(rho, dtype=complex).reshape(-1)
    if v.shape != (dim,):
        raise StateError(f"state vector has length {v.shape[0]}, expected {dim}")
    return v / np.linalg.norm(v)


def attack_isometry(attack: QuantumChannel) -> tuple[np.ndarray, int]:
    """(V, |Bt ⊗ E|) with V: C ⊗ B → C ⊗ (Bt ⊗ E); single-Kraus attacks keep E trivial."""
    if attack.n_kraus == 1:
        v = attack.kraus[0]
        if np.allclose(v.conj().T @ v, np.eye(v.shape[1]), atol=1e-10):
            return v, attack.out_layout.dim_of(BT)
    iso = stinespring_dilate(attack)
    return iso.matrix, attack.out_layout.dim_of(BT) * iso.out_layout.dims[-1]


def oblivious_simulator(v: np.ndarray, c: int, b: int, side: int) -> np.ndarray:
    """Γ_V = (1/|C|)·Tr_C V, an operator B → Bt ⊗ E."""
    return np.einsum("ixiy->xy", v.reshape(c, side, c, b)) / c


def _accept_branch(scheme: EncryptionScheme, v: np.ndarray, side: int, b: int) -> np.ndarray:
    """Φ_k = (V_k† ⊗ 1) V (V_k ⊗ 1) for every key, shape (keys, a·side, a·b)."""
    vk = scheme.isometries
    c, a = scheme.c, scheme.a
    v4 = v.reshape(c, side, c, b)
    inner = np.einsum("ixjy,kja->kxiay", v4, vk, optimize=True)     # (keys, side, c, a, b)
    phi = np.einsum("kic,kxiay->kcxay", vk.conj(), inner, optimize=True)
    return phi.reshape(len(vk), a * side, a * b)


def _scheme_deficiency(scheme: EncryptionScheme) -> float:
    base = scheme.base if scheme.base is not None else scheme
    if base.isometries is None or base.a != base.c:
        raise IncompatibleScenarioError(f"{scheme.name} has no unitary key ensemble", field="scheme")
    ens = UnitaryEnsemble(base.isometries, base.key_weights, provenance=base.descriptor, validate=False)
    return design_deficiency(ens, "t-design", t=2).upper


# ── GYZ ────────────────────────────────────────────────────────────────────────

def gyz_keywise(
    scheme: EncryptionScheme,
    attack: QuantumChannel,
    rho,
    delta: float | None = None,
) -> KeywiseReport:
    """
    Keywise deviations for an isometric attack V on C ⊗ B and a pure ρ_AB.

    Raises ChannelError for attacks with more than one Kraus operator; dilate
    those with stinespring_dilate first.
    """
    _require_tagged_isometric(scheme)
    if attack.n_kraus != 1:
        raise ChannelError(f"{attack.name} is not isometric; dilate it first", field="attack")
    b = attack.in_layout.dim_of(B)
    v, side = attack_isometry(attack)
    psi = _pure_vector(rho, scheme.a * b)
    gamma = oblivious_simulator(v, scheme.c, b, side)
    phi = _accept_branch(scheme, v, side, b)
    out = phi @ psi                                                   # (keys, a·side)
    ideal = np.kron(np.eye(scheme.a), gamma) @ psi
    dev = np.linalg.norm(out - ideal[None, :], axis=1)
    acc = np.einsum("kx,kx->k", out.conj(), out).real
    if delta is None:
        delta = _scheme_deficiency(scheme)
    report = KeywiseReport(dev, acc, scheme.key_weights, 1.0 / scheme.tag.dim + 3 * delta)
    log.debug(f"gyz keywise {attack.name} on {scheme.name}: {report}")
    return report


def gyz_residual(
    scheme: EncryptionScheme,
    attack: QuantumChannel,
    rho: DensityOperator,
    delta: float | None = None,
) -> GYZResult:
    """
    Σ_k w_k ‖Π_acc D_k Λ E_k(ρ) Π_acc − (1 ⊗ Γ_V)ρ(1 ⊗ Γ_V)†‖₁ (E traced out),
    which equals the trace distance against Λ^acc(ρ) ⊗ τ_K with K classical.
    """
    _require_tagged_isometric(scheme)
    b = attack.in_layout.dim_of(B)
    bt = attack.out_layout.dim_of(BT)
    v, side = attack_isometry(attack)
    env = side // bt
    a = scheme.a
    m = rho.keep([A, B]).matrix if isinstance(rho, DensityOperator) else np.asarray(rho, dtype=complex)
    gamma = np.kron(np.eye(a), oblivious_simulator(v, scheme.c, b, side))
    phi = _accept_branch(scheme, v, side, b)
    dims = (a, bt, env)
    target = ptrace_matrix(gamma @ m @ gamma.conj().T, dims, [0, 1])
    total = 0.0
    for w, op in zip(scheme.key_weights, phi):
        x = ptrace_matrix(op @ m @ op.conj().T, dims, [0, 1])
        total += w * trace_norm(hermitian_part(x - target))
    if delta is None:
        delta = _scheme_deficiency(scheme)
    bound = 4 * (1.0 / scheme.tag.dim + 3 * delta) ** (1.0 / 3.0)
    return GYZResult(total, bound, delta)


def pauli_attack_accept_stats(scheme: EncryptionScheme, pauli: str) -> AcceptStats:
    """
    Key-averaged acceptance probability of a fixed Pauli attack on φ⁺_{AR},
    and the entanglement fidelity of the post-selected state.
    """
    if scheme.isometries is None:
        raise IncompatibleScenarioError(f"{scheme.name} has no isometric keys", field="scheme")
    p = pauli_from_label(pauli)
    if p.shape[0] != scheme.c:
        raise IncompatibleScenarioError(f"Pauli {pauli!r} does not act on |C| = {scheme.c}", field="pauli")
    if set(pauli) == {"I"}:
        raise ChannelError("identity Pauli: use the identity attack", field="pauli")
    vk, a = scheme.isometries, scheme.a
    ops = np.einsum("kia,ij,kjb->kab", vk.conj(), p, vk, optimize=True)     # accept Kraus per key
    w = scheme.key_weights
    accept = float(w @ (np.einsum("kab,kab->k", ops.conj(), ops).real / a))
    if scheme.tag is None:
        accept = 1.0
    fid = None
    if accept > 1e-12:
        overlap = np.abs(np.einsum("kaa->k", ops) / a) ** 2
        fid = float(w @ overlap) / accept
    return AcceptStats(accept, 1.0 - accept, fid)


# ── DNS ────────────────────────────────────────────────────────────────────────

def tp_correction(acc: QuantumChannel, rej: QuantumChannel) -> tuple[QuantumChannel, QuantumChannel, float, float]:
    """
    Normalize witnesses with 𝓜(X) = M^{-1/2} X M^{-1/2}, M = Λ_acc†(1) + Λ_rej†(1).

    Returns (acc∘𝓜, rej∘𝓜, η = ‖M − 1‖, ‖𝓜 − id‖⋄ upper bound). Nothing
    changes when M is already within 1e-10 of 1.
    """
    m = hermitian_part(acc.adjoint_unit() + rej.adjoint_unit())
    eye = np.eye(m.shape[0])
    eta = operator_norm(m - eye)
    if eta <= 1e-10:
        return acc, rej, eta, 0.0
    s = np.asarray(sqrtm(np.linalg.pinv(m)), dtype=complex)
    s = hermitian_part(s)
    gap = operator_norm(s - eye)
    fix = QuantumChannel(acc.in_layout, acc.in_layout, kraus=s, name="M^-1/2")
    log.debug(f"tp correction: eta={eta:.3e} magnitude={gap * (operator_norm(s) + 1):.3e}")
    return compose_channels(acc, fix), compose_channels(rej, fix), eta, gap * (operator_norm(s) + 1)


def nm_witnesses(scheme: EncryptionScheme, attack: QuantumChannel) -> tuple[QuantumChannel, QuantumChannel, float]:
    """
    (Λ_acc, Λ_rej, γ) from the Λ′/Λ″ split:
    Λ_acc = Λ′ + (γ|C|²−1)/(|C|²−1)·Λ″, Λ_rej = (1−γ)|C|²/(|C|²−1)·Λ″,
    γ = max(γ̂, |C|⁻²) with γ̂ the accept mass of D_K(τ_C).
    """
    c2 = scheme.c ** 2
    prime, dprime = attack_components(attack)
    gamma_hat = float(np.real(np.trace(decrypted_mixed(scheme)[: scheme.a, : scheme.a])))
    gamma = max(gamma_hat, 1.0 / c2)
    acc = combine_channels([(1.0, prime), ((gamma * c2 - 1) / (c2 - 1), dprime)], name="Λ_acc")
    rej = combine_channels([((1 - gamma) * c2 / (c2 - 1), dprime)], name="Λ_rej")
    return acc, rej, gamma


def gyz_witnesses(scheme: EncryptionScheme, attack: QuantumChannel) -> tuple[QuantumChannel, QuantumChannel]:
    """Λ_acc = Tr_E Γ_V(·)Γ_V†, Λ_rej(X) = ⟨⊥|Λ̃(τ_A ⊗ X)|⊥⟩."""
    b = attack.in_layout.dim_of(B)
    bt = attack.out_layout.dim_of(BT)
    v, side = attack_isometry(attack)
    env = side // bt
    gamma = oblivious_simulator(v, scheme.c, b, side)
    ops = gamma.reshape(bt, env, b).transpose(1, 0, 2)
    b_lay, bt_lay = SystemLayout([(B, b)]), SystemLayout([(BT, bt)])
    acc = QuantumChannel(b_lay, bt_lay, kraus=ops, name="Λ_acc")

    eff = effective_channel(AttackScenario(scheme, attack))
    a = scheme.a
    lay = SystemLayout([(A, a), (B, b)])

    def reject(x: np.ndarray) -> np.ndarray:
        y, l = apply_matrix(eff, np.kron(np.eye(a) / a, x), lay, [A, B])    # [A, Bt]
        return y.reshape(a + 1, bt, a + 1, bt)[a, :, a, :]

    rej = QuantumChannel.from_linear_map(reject, b_lay, bt_lay, name="Λ_rej", validate=False)
    return acc, rej


def dns_residual(
    scheme: EncryptionScheme,
    attack: QuantumChannel,
    battery: list[DensityOperator],
    witness: str = "nm",
) -> DNSResult:
    """
    max_ρ ‖Λ̃(ρ) − (id ⊗ Λ_acc)(ρ) − |⊥⟩⟨⊥| ⊗ Λ_rej(Tr_A ρ)‖₁ over the battery.

    witness selects the construction: "nm" (Λ′/Λ″ split, any scheme) or
    "gyz" (oblivious simulator, tagged unitary schemes).
    """
    if witness == "nm":
        acc, rej, gamma = nm_witnesses(scheme, attack)
    elif witness == "gyz":
        _require_tagged_isometric(scheme)
        acc, rej = gyz_witnesses(scheme, attack)
        gamma = 0.0
    else:
        raise ChannelError(f"unknown witness {witness!r}", field="witness")
    acc, rej, eta, magnitude = tp_correction(acc, rej)

    a_lay = scheme.plaintext_layout
    ident = QuantumChannel(a_lay, scheme.decrypt_layout, kraus=accept_embedding(scheme.a), name="id")
    bot = QuantumChannel.constant(reject_state(scheme.a), a_lay, scheme.decrypt_layout, name="⊥")
    ideal = combine_channels([(1.0, tensor_channels(ident, acc)), (1.0, tensor_channels(bot, rej))], name="dns-ideal")
    eff = effective_channel(AttackScenario(scheme, attack))

    worst = 0.0
    for rho in battery:
        on = [A, B]
        diff = apply_matrix(eff, rho.matrix, rho.layout, on)[0] - apply_matrix(ideal, rho.matrix, rho.layout, on)[0]
        worst = max(worst, trace_norm(hermitian_part(diff)))
    return DNSResult(worst, gamma, eta, magnitude)


def gyz_implies_dns_check(
    scheme: EncryptionScheme,
    attacks: list[QuantumChannel],
    battery: list[DensityOperator],
    delta: float | None = None,
    slack: float = 1e-6,
) -> list[ImplicationCase]:
    """ε_DNS ≤ 4(28√ε_GYZ + 3ε_GYZ) + slack per attack; attacks with ε_GYZ > 62⁻² are reported out of regime."""
    _require_tagged_isometric(scheme)
    if delta is None:
        delta = _scheme_deficiency(scheme)
    cases = []
    for attack in attacks:
        eps_gyz = max(gyz_residual(scheme, attack, rho, delta).residual for rho in battery)
        eps_dns = dns_residual(scheme, attack, battery, witness="gyz").residual
        if eps_gyz > GYZ_DNS_REGIME:
            log.info(f"{attack.name}: ε_GYZ={eps_gyz:.3e} out of regime")
            cases.append(ImplicationCase(attack.name, eps_gyz, eps_dns, None, None))
            continue
        bound = 4 * (28 * math.sqrt(eps_gyz) + 3 * eps_gyz)
        cases.append(ImplicationCase(attack.name, eps_gyz, eps_dns, bound, bool(eps_dns <= bound + slack)))
    return cases


def near_identity_attack(scheme: EncryptionScheme, b: int = 1, theta: float = 0.01, seed: int = 0) -> QuantumChannel:
    """exp(−iθH) on C ⊗ B with H a seeded unit-norm random Hermitian."""
    rng = make_rng(seed)
    d = scheme.c * b
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    h = hermitian_part(g)
    h = h / operator_norm(h)
    lay_in = scheme.ciphertext_layout + SystemLayout([(B, b)])
    lay_out = scheme.ciphertext_layout + SystemLayout([(BT, b)])
    return QuantumChannel(lay_in, lay_out, kraus=expm(-1j * theta * h), name=f"near_id:{theta:g}:{seed}")


def accept_probability(scheme: EncryptionScheme, attack: QuantumChannel, rho: DensityOperator) -> tuple[float, float]:
    """(accept, reject) mass of Λ̃(ρ), read off the acc block and ⊥ of Ā."""
    out = apply(effective_channel(AttackScenario(scheme, attack)), rho, on=[A, B])
    dims = out.layout.dims
    marg = ptrace_matrix(out.matrix, dims, [out.layout.index(A)])
    proj = out.layout.subset([A]).block_projector(A, BLOCK_ACCEPT)
    acc = float(np.real(np.trace(proj @ marg)))
    return acc, float(np.real(np.trace(marg))) - acc
