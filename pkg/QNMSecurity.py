"""
QNMSecurity — effective attacks, p₌, non-malleability gain and secrecy checks.

An attack scenario is a scheme, an adversary channel Λ on C ⊗ B → C ⊗ Bt and
an initial state ρ on A ⊗ B ⊗ R. Its effective channel

    Λ̃ = Σ_k w_k  D_k ∘ Λ ∘ E_k        (A ⊗ B → Ā ⊗ Bt)

is computed exactly by pushing φ⁺_{AB,A'B'} through every key. The NM gain

    I(AR:Bt)_{Λ̃(ρ)} − I(AR:B)_ρ − h(p₌)

is ≤ 0 on every scenario for a non-malleable scheme.

Usage:
    from QNMSecurity import AttackScenario, make_attack, evaluate

    scheme = clifford_scheme(1)
    attack = make_attack("coin_mixture", scheme, b=1)
    report = evaluate(AttackScenario(scheme, attack))
    print(report.nm_gain, report.p_eq, report.ledger)

Register labels follow QNMTypes: A, B, R on the input, C and Bt on the
attack output, the decrypt output keeps the label A with dimension |A|+1.
"""

from __future__ import annotations

import hashlib
import logging
import math
from typing import Callable, NamedTuple

import numpy as np

from QNMCache import default_cache
from QNMChannels import (
    DiamondBounds,
    QuantumChannel,
    apply,
    apply_matrix,
    combine_channels,
    compose_channels,
    diamond_distance_bounds,
    random_channel,
    random_isometry,
    tensor_channels,
    transpose_channel,
)
from QNMCore import (
    DensityOperator,
    EntropyLedger,
    SystemLayout,
    binary_entropy,
    hermitian_part,
    make_rng,
    max_entangled,
    mutual_information,
    permute_matrix,
    phi_plus_vector,
    pi_minus,
    ptrace_matrix,
    random_pure,
    relabel,
    trace_norm,
    von_neumann_entropy,
)
from QNMDesigns import cnot, pauli_from_label
from QNMExceptions import ConfigError, IncompatibleScenarioError
from QNMSchemes import EncryptionScheme, accept_embedding, tag_channels
from QNMTypes import (
    BLOCK_INJECTED,
    REG_CIPHERTEXT,
    REG_PLAINTEXT,
    REG_REFERENCE,
    REG_SIDE,
    REG_SIDE_OUT,
)
from qnm_config import LIBRARY_VERSION

log = logging.getLogger("qnmlab.security")

A, B, C, R, BT = REG_PLAINTEXT, REG_SIDE, REG_CIPHERTEXT, REG_REFERENCE, REG_SIDE_OUT

EFFECTIVE_BLOCK = 1 << 22     # complex entries per vectorized block of keys


# ── Scenario types ─────────────────────────────────────────────────────────────

class AttackScenario:
    """
    (scheme, Λ_{CB→CBt}, ρ_ABR). The initial state defaults to φ⁺_{AR} ⊗ |0⟩⟨0|_B.

    Raises IncompatibleScenarioError when the attack does not act on the
    scheme's ciphertext or the state does not live on A ⊗ B ⊗ R.
    """

    def __init__(
        self,
        scheme: EncryptionScheme,
        attack: QuantumChannel,
        initial: DensityOperator | None = None,
        name: str = "",
        notes: dict | None = None,
    ):
        in_lay, out_lay = attack.in_layout, attack.out_layout
        if in_lay.labels != (C, B) or out_lay.labels != (C, BT):
            raise IncompatibleScenarioError(
                f"attack must map C ⊗ B → C ⊗ Bt, got {in_lay} → {out_lay}", field="attack",
            )
        if in_lay.dim_of(C) != scheme.c or out_lay.dim_of(C) != scheme.c:
            raise IncompatibleScenarioError(
                f"attack acts on |C| = {in_lay.dim_of(C)}, scheme has |C| = {scheme.c}", field="attack",
            )
        b = in_lay.dim_of(B)
        if initial is None:
            initial = default_state(scheme.a, b)
        if initial.layout.labels != (A, B, R) or initial.layout.dim_of(A) != scheme.a or initial.layout.dim_of(B) != b:
            raise IncompatibleScenarioError(
                f"initial state must live on A[{scheme.a}] ⊗ B[{b}] ⊗ R, got {initial.layout}", field="state",
            )
        self.scheme  = scheme
        self.attack  = attack
        self.initial = initial
        self.name    = name or attack.name
        self.notes   = dict(notes or {})

    @property
    def b(self) -> int:
        return self.attack.in_layout.dim_of(B)

    @property
    def bt(self) -> int:
        return self.attack.out_layout.dim_of(BT)

    def __repr__(self) -> str:
        return f"AttackScenario({self.name} on {self.scheme.name}, |B|={self.b}, |Bt|={self.bt})"


class EffectiveAttack(NamedTuple):
    effective: QuantumChannel
    p_eq:      float
    ledger:    EntropyLedger
    nm_gain:   float
    output:    DensityOperator


class ABWResidual(NamedTuple):
    distance: float     # Choi 1-norm to the least-squares projection
    upper:    float     # |A| · distance
    clipping: float     # 1-norm moved when clipping the projection to the CP cone


# ── States ─────────────────────────────────────────────────────────────────────

def default_state(a: int, b: int = 1) -> DensityOperator:
    """φ⁺_{AR} ⊗ |0⟩⟨0|_B on A ⊗ B ⊗ R."""
    zero = np.zeros((b, b), dtype=complex)
    zero[0, 0] = 1.0
    m = np.kron(max_entangled(a, (A, R)).matrix, zero)
    m = permute_matrix(m, (a, a, b), [0, 2, 1])
    return DensityOperator(m, [(A, a), (B, b), (R, a)], check=False)


def state_battery(a: int, b: int = 1, r: int | None = None, count: int = 10, seed: int = 0) -> list[DensityOperator]:
    """default_state first (when |R| = |A|), then seeded Haar-random pure states on A ⊗ B ⊗ R."""
    r = r or a
    if r > a * a:
        raise ConfigError(f"|R| = {r} exceeds |A|² = {a * a}", field="states")
    rng = make_rng(seed)
    layout = SystemLayout([(A, a), (B, b), (R, r)])
    out = [default_state(a, b)] if r == a else []
    while len(out) < count:
        out.append(random_pure(layout, rng))
    return out[:count]


def ghz(layout) -> DensityOperator:
    """(|0…0⟩ + |1…1⟩)/√2 on the given qubit registers."""
    layout = layout if isinstance(layout, SystemLayout) else SystemLayout(layout)
    v = np.zeros(layout.total_dim, dtype=complex)
    v[0] = v[-1] = 1.0 / math.sqrt(2)
    return DensityOperator.pure(v, layout)


# ── Attack library ─────────────────────────────────────────────────────────────

def _attack_layouts(scheme: EncryptionScheme, b: int, bt: int) -> tuple[SystemLayout, SystemLayout]:
    c_lay = scheme.ciphertext_layout
    return c_lay + SystemLayout([(B, b)]), c_lay + SystemLayout([(BT, bt)])


def _n_qubits(c: int) -> int:
    n = int(round(math.log2(c)))
    if 2 ** n != c:
        raise IncompatibleScenarioError(f"|C| = {c} is not a qubit register", field="attack")
    return n


def identity_attack(scheme, b: int = 1, **_) -> QuantumChannel:
    i, o = _attack_layouts(scheme, b, b)
    return QuantumChannel(i, o, kraus=np.eye(scheme.c * b, dtype=complex), name="identity")


def pauli_attack(scheme, b: int = 1, pauli: str | None = None, **_) -> QuantumChannel:
    """Fixed Pauli string on C (default X on the first ciphertext qubit)."""
    n = _n_qubits(scheme.c)
    pauli = pauli or "X" + "I" * (n - 1)
    if len(pauli) != n:
        raise IncompatibleScenarioError(f"Pauli {pauli!r} does not fit {n} ciphertext qubits", field="pauli")
    i, o = _attack_layouts(scheme, b, b)
    return QuantumChannel(i, o, kraus=np.kron(pauli_from_label(pauli), np.eye(b)), name=f"pauli:{pauli}")


def _replace_kraus(c: int, sigma: np.ndarray) -> np.ndarray:
    """Kraus operators of X ↦ Tr(X)·σ on C."""
    w, v = np.linalg.eigh(hermitian_part(sigma))
    ops = []
    for lam, vec in zip(w, v.T):
        if lam > 1e-14:
            for j in range(c):
                bra = np.zeros(c)
                bra[j] = 1.0
                ops.append(math.sqrt(lam) * np.outer(vec, bra))
    return np.array(ops)


def replace_attack(scheme, b: int = 1, state=None, **_) -> QuantumChannel:
    """C replaced by σ (default |0⟩⟨0|); B untouched."""
    c = scheme.c
    sigma = np.zeros((c, c), dtype=complex)
    sigma[0, 0] = 1.0
    if state is not None:
        sigma = np.asarray(state.matrix if isinstance(state, DensityOperator) else state, dtype=complex)
    i, o = _attack_layouts(scheme, b, b)
    kraus = np.array([np.kron(k, np.eye(b)) for k in _replace_kraus(c, sigma)])
    return QuantumChannel(i, o, kraus=kraus, name="replace")


def _coin_attack(scheme, b: int, heads: np.ndarray, tails: np.ndarray, name: str) -> QuantumChannel:
    """½ heads ⊗ |0⟩⟨0|_coin + ½ tails ⊗ |1⟩⟨1|_coin; Bt = B ⊗ coin."""
    i, o = _attack_layouts(scheme, b, 2 * b)
    ops  = []
    for branch, kraus in ((0, heads), (1, tails)):
        coin = np.zeros((2, 1))
        coin[branch, 0] = 1.0
        for k in kraus:
            op = np.kron(np.kron(k, np.eye(b)), coin) / math.sqrt(2)    # (C B coin) ← (C B)
            ops.append(op)
    return QuantumChannel(i, o, kraus=np.array(ops), name=name)


def coin_mixture_attack(scheme, b: int = 1, **_) -> QuantumChannel:
    """Fair coin into Bt: heads X on the first ciphertext qubit, tails C replaced by τ."""
    n = _n_qubits(scheme.c)
    x = pauli_from_label("X" + "I" * (n - 1))
    return _coin_attack(scheme, b, x[None], _replace_kraus(scheme.c, np.eye(scheme.c) / scheme.c), "coin_mixture")


def pauli_coin_attack(scheme, b: int = 1, **_) -> QuantumChannel:
    """Fair coin into Bt: heads X, tails Z on the first ciphertext qubit (p₌ = 0)."""
    n = _n_qubits(scheme.c)
    x = pauli_from_label("X" + "I" * (n - 1))
    z = pauli_from_label("Z" + "I" * (n - 1))
    return _coin_attack(scheme, b, x[None], z[None], "pauli_coin")


def coin_flip_attack(scheme, b: int = 1, **_) -> QuantumChannel:
    """Fair coin into Bt: heads leave C alone, tails replace C by |0⟩⟨0|."""
    zero = np.zeros((scheme.c, scheme.c), dtype=complex)
    zero[0, 0] = 1.0
    return _coin_attack(scheme, b, np.eye(scheme.c, dtype=complex)[None], _replace_kraus(scheme.c, zero), "coin_flip")


def cnot_copy_attack(scheme, b: int = 2, **_) -> QuantumChannel:
    """CNOT from the first ciphertext qubit onto a qubit B."""
    n = _n_qubits(scheme.c)
    if b != 2:
        raise IncompatibleScenarioError(f"cnot_copy needs a qubit B, got |B| = {b}", field="attack")
    i, o = _attack_layouts(scheme, b, b)
    return QuantumChannel(i, o, kraus=cnot(0, n, n + 1), name="cnot_copy")


def injection_attack(scheme, b: int = 1, **_) -> QuantumChannel:
    """X ↦ Tr(X)·(0_C ⊕ φ⁺_{ÂBt}); needs a ciphertext with an injected block."""
    blocks = dict((blk.name, blk) for blk in scheme.ciphertext_layout.blocks.get(C, ()))
    if BLOCK_INJECTED not in blocks:
        raise IncompatibleScenarioError("injection attack needs a C ⊕ Â ciphertext", field="attack")
    hat = blocks[BLOCK_INJECTED]
    emb = np.zeros((scheme.c, hat.dim), dtype=complex)
    emb[hat.offset: hat.offset + hat.dim, :] = np.eye(hat.dim)
    phi = max_entangled(hat.dim).matrix
    big = np.kron(emb, np.eye(hat.dim))
    sigma = big @ phi @ big.conj().T
    i, o = _attack_layouts(scheme, b, hat.dim)
    return QuantumChannel.constant(sigma, i, o, name="injection")


def ciphertext_extraction_attack(scheme, b: int = 1, **_) -> QuantumChannel:
    """
    Choi matrix (d²/(d²−1)) Π⁻_{CC'} (τ_C ⊗ φ⁺_{Bt C'}) Π⁻_{CC'} with d = |C|.

    p₌ = 0, and the Bt marginal is (d²−2)/(d²−1)·X + Tr(X)·τ/(d²−1).
    Built from its d Kraus operators √(d/(d²−1))·(S_i − T_i/d), where
    S_i|x⟩ = |i⟩_C|x⟩_Bt and T_i|x⟩ = |x⟩_C|i⟩_Bt.
    """
    if b != 1:
        raise IncompatibleScenarioError(f"ciphertext extraction needs trivial B, got |B| = {b}", field="attack")
    d = scheme.c
    if d < 2:
        raise IncompatibleScenarioError("ciphertext extraction needs |C| ≥ 2", field="attack")
    eye  = np.eye(d, dtype=complex)
    keep = np.einsum("ic,bx->icbx", eye, eye)                                 # S_i[c, bt, x]
    move = np.einsum("cx,ib->icbx", eye, eye)                                 # T_i[c, bt, x]
    kraus = math.sqrt(d / (d * d - 1)) * (keep - move / d)
    i, o = _attack_layouts(scheme, 1, d)
    return QuantumChannel(i, o, kraus=kraus.reshape(d, d * d, d), name="ciphertext_extraction")


def random_isometry_attack(scheme, b: int = 1, seed: int = 0, **_) -> QuantumChannel:
    i, o = _attack_layouts(scheme, b, b)
    return random_isometry(i, o, make_rng(seed), name=f"random_isometry:{seed}")


def random_channel_attack(scheme, b: int = 1, seed: int = 0, rank: int = 4, **_) -> QuantumChannel:
    i, o = _attack_layouts(scheme, b, b)
    return random_channel(i, o, make_rng(seed), rank=min(rank, 4), name=f"random_channel:{seed}")


_LIBRARY: dict[str, Callable[..., QuantumChannel]] = {
    "identity":              identity_attack,
    "pauli":                 pauli_attack,
    "replace":               replace_attack,
    "coin_mixture":          coin_mixture_attack,
    "pauli_coin":            pauli_coin_attack,
    "coin_flip":             coin_flip_attack,
    "cnot_copy":             cnot_copy_attack,
    "injection":             injection_attack,
    "ciphertext_extraction": ciphertext_extraction_attack,
    "random_isometry":       random_isometry_attack,
    "random_channel":        random_channel_attack,
}


def attack_library() -> dict[str, Callable[..., QuantumChannel]]:
    """Named attack constructors, library version LIBRARY_VERSION."""
    return dict(_LIBRARY)


def make_attack(name: str, scheme: EncryptionScheme, b: int = 1, **params) -> QuantumChannel:
    try:
        build = _LIBRARY[name]
    except KeyError:
        raise ConfigError(f"unknown attack {name!r} (library v{LIBRARY_VERSION})", field="attacks") from None
    return build(scheme, b=b, **params)


def library_attacks(scheme: EncryptionScheme, b: int = 1, random_count: int = 2, seed: int = 0) -> list[QuantumChannel]:
    """Every library attack compatible with (scheme, |B|), random ones seeded seed, seed+1, …"""
    out = []
    for name, build in _LIBRARY.items():
        seeds = [seed + i for i in range(random_count)] if name.startswith("random_") else [None]
        for s in seeds:
            try:
                out.append(build(scheme, b=b) if s is None else build(scheme, b=b, seed=s))
            except IncompatibleScenarioError as e:
                log.debug(f"skipping {name} on {scheme.name}: {e.message}")
                break
    return out


# ── Effective channel ──────────────────────────────────────────────────────────

def channel_digest(channel: QuantumChannel) -> str:
    """Cache key over the layouts and whichever representation the channel was built from."""
    h = hashlib.sha256(repr((channel.in_layout.registers, channel.out_layout.registers)).encode())
    if channel.n_kraus is not None:
        h.update(b"kraus")
        h.update(np.ascontiguousarray(np.round(channel.kraus, 12) + (0.0 + 0.0j)).tobytes())
    else:
        h.update(np.ascontiguousarray(np.round(channel.choi, 12) + (0.0 + 0.0j)).tobytes())
    return h.hexdigest()


def effective_channel(scenario: AttackScenario) -> QuantumChannel:
    """Σ_k w_k D_k ∘ Λ ∘ E_k on A ⊗ B → Ā ⊗ Bt, cached per (scheme, attack)."""
    return _effective_cached(scenario.scheme, scenario.attack)


def _effective_cached(scheme: EncryptionScheme, attack: QuantumChannel) -> QuantumChannel:
    key = (scheme.ident, channel_digest(attack))
    return default_cache.get_or_compute("effective", key, lambda: _effective(scheme, attack))


def _effective(scheme: EncryptionScheme, attack: QuantumChannel) -> QuantumChannel:
    keyed = _keyed_unitaries(scheme) if attack.is_cp else None
    if keyed is not None:
        return _effective_keyed(scheme, attack, *keyed)
    if scheme.tag is not None and scheme.base is not None:
        return _effective_tagged(scheme, attack)
    if scheme.unitary:
        return _effective_unitary(scheme, attack)
    a, b = scheme.a, attack.in_layout.dim_of(B)
    lay  = SystemLayout([(A, a), (B, b), (A + "'", a), (B + "'", b)])
    v    = phi_plus_vector(a * b)
    phi  = np.outer(v, v.conj())
    acc, out_lay = None, None
    for k, w in enumerate(scheme.key_weights):
        m, l = apply_matrix(scheme.encrypt(k), phi, lay, [A])
        m, l = apply_matrix(attack, m, l, [C, B])
        m, l = apply_matrix(scheme.decrypt(k), m, l, [C])
        acc = w * m if acc is None else acc + w * m
        out_lay = l
    in_layout  = SystemLayout([(A, a), (B, b)])
    out_layout = out_lay.subset([A, BT])
    log.debug(f"effective channel of {attack.name} on {scheme.name} over {scheme.keys} keys")
    return QuantumChannel(in_layout, out_layout, choi=hermitian_part(acc), name=f"eff({attack.name})", validate=False)


def _keyed_unitaries(scheme: EncryptionScheme) -> tuple[np.ndarray, np.ndarray, QuantumChannel] | None:
    """
    (V_k, U_k†, post) when E_k = V_k(·)V_k† and D_k = post ∘ U_k†(·)U_k: unitary
    schemes, and tags over a unitary base, where post also runs the tag check.
    """
    if scheme.unitary:
        u    = scheme.isometries
        post = QuantumChannel(scheme.plaintext_layout, scheme.decrypt_layout, kraus=accept_embedding(scheme.a), name="J")
        return u, u.conj().transpose(0, 2, 1), post
    base = scheme.base
    if scheme.tag is None or base is None or not base.unitary or scheme.isometries is None:
        return None
    _, check = tag_channels(scheme)
    embed = QuantumChannel(base.plaintext_layout, base.decrypt_layout, kraus=accept_embedding(base.a), name="J")
    return scheme.isometries, base.isometries.conj().transpose(0, 2, 1), compose_channels(check, embed)


def _effective_keyed(
    scheme: EncryptionScheme,
    attack: QuantumChannel,
    iso: np.ndarray,
    dec: np.ndarray,
    post: QuantumChannel,
) -> QuantumChannel:
    """
    Same sum from the Kraus operators √w_k (U_k† ⊗ 1) K_n (V_k ⊗ 1), accumulated
    into the Choi matrix over blocks of keys; post is applied once at the end.
    """
    a, b  = scheme.a, attack.in_layout.dim_of(B)
    bt    = attack.out_layout.dim_of(BT)
    c     = scheme.c
    a_dec = dec.shape[1]
    kr    = attack.kraus
    nk    = len(kr)
    kr    = kr.reshape(nk, c, bt, c, b)
    d_out, d_in = a_dec * bt, a * b
    step  = max(1, EFFECTIVE_BLOCK // (nk * max(c, a_dec) * bt * d_in))
    acc   = np.zeros((d_out * d_in, d_out * d_in), dtype=complex)
    w     = scheme.key_weights
    for lo in range(0, scheme.keys, step):
        half = np.einsum("niyjz,kjq->kniyqz", kr, iso[lo:lo + step], optimize=True)
        m    = np.einsum("kpi,kniyqz->knpyqz", dec[lo:lo + step], half, optimize=True)
        m    = m * np.sqrt(w[lo:lo + step] / d_in)[:, None, None, None, None, None]
        vecs = m.reshape(-1, d_out * d_in)
        acc += vecs.T @ vecs.conj()
    in_layout = SystemLayout([(A, a), (B, b)])
    inner     = SystemLayout([(A, a_dec), (BT, bt)]) + in_layout.primed()
    choi, _   = apply_matrix(post, acc, inner, [A])
    out_layout = scheme.decrypt_layout + attack.out_layout.subset([BT])
    log.debug(f"effective channel of {attack.name} on {scheme.name} over {scheme.keys} keys ({nk} Kraus, step {step})")
    return QuantumChannel(in_layout, out_layout, choi=hermitian_part(choi), name=f"eff({attack.name})", validate=False)


def _effective_unitary(scheme: EncryptionScheme, attack: QuantumChannel) -> QuantumChannel:
    """Same sum for maps without a Kraus form, vectorized over blocks of keys through the superoperator."""
    a, b = scheme.a, attack.in_layout.dim_of(B)
    bt   = attack.out_layout.dim_of(BT)
    ab   = a * b
    v    = phi_plus_vector(ab)
    x    = np.outer(v, v.conj()).reshape(a, b * ab, a, b * ab)
    step = max(1, EFFECTIVE_BLOCK // max(ab * ab, a * bt * ab) ** 2)
    acc  = np.zeros((a, bt, ab, a, bt, ab), dtype=complex)
    u, w = scheme.isometries, scheme.key_weights
    for lo in range(0, scheme.keys, step):
        uk = u[lo:lo + step]
        y  = np.einsum("kij,jrls,kml->kirms", uk, x, uk.conj(), optimize=True)
        y  = y.reshape(len(uk), ab, ab, ab, ab)
        z  = np.einsum("opij,kixjy->koxpy", attack.superop, y, optimize=True)
        z  = z.reshape(len(uk), a, bt, ab, a, bt, ab)
        acc += np.einsum("k,kji,kjsxlty,klm->isxmty", w[lo:lo + step], uk.conj(), z, uk, optimize=True)
    full = np.zeros((a + 1, bt, ab, a + 1, bt, ab), dtype=complex)
    full[:a, :, :, :a, :, :] = acc
    dim  = (a + 1) * bt * ab
    in_layout  = SystemLayout([(A, a), (B, b)])
    out_layout = scheme.decrypt_layout + attack.out_layout.subset([BT])
    log.debug(f"effective channel of {attack.name} on {scheme.name} over {scheme.keys} keys (superoperator)")
    return QuantumChannel(
        in_layout, out_layout, choi=hermitian_part(full.reshape(dim, dim)),
        name=f"eff({attack.name})", validate=False,
    )


def _effective_tagged(scheme: EncryptionScheme, attack: QuantumChannel) -> QuantumChannel:
    """Append and tag check are key-independent, so they wrap the base scheme's effective channel."""
    base  = scheme.base
    b     = attack.in_layout.dim_of(B)
    bt    = attack.out_layout.dim_of(BT)
    base_eff = _effective_cached(base, attack)
    append, check = tag_channels(scheme)
    pre   = tensor_channels(append, QuantumChannel.identity([(B, b)]))
    post  = tensor_channels(check, QuantumChannel.identity([(BT, bt)]))
    inner = compose_channels(post, compose_channels(base_eff, pre))
    return QuantumChannel(
        inner.in_layout, inner.out_layout, choi=hermitian_part(inner.choi),
        name=f"eff({attack.name})", validate=False,
    )


def p_equals(scenario: AttackScenario) -> float:
    """Tr[(φ⁺_{CC'} ⊗ 1) Λ(φ⁺_{CC'} ⊗ ρ_B)]."""
    c   = scenario.scheme.c
    rho_b = scenario.initial.keep([B]).matrix
    lay = SystemLayout([(C, c), (C + "'", c), (B, scenario.b)])
    phi = max_entangled(c).matrix
    y, l = apply_matrix(scenario.attack, np.kron(phi, rho_b), lay, [C, B])        # [C, Bt, C']
    marg = ptrace_matrix(y, l.dims, [0, 2])
    return float(np.real(np.trace(phi @ marg)))


def evaluate(scenario: AttackScenario) -> EffectiveAttack:
    """Effective channel, p₌, entropy ledger and NM gain of one scenario."""
    eff    = effective_channel(scenario)
    p_eq   = min(max(p_equals(scenario), 0.0), 1.0)
    out    = apply(eff, scenario.initial, on=[A, B])                               # [A, Bt, R]
    ledger = EntropyLedger()
    before = ledger.record("I(AR:B)", mutual_information(scenario.initial, ([A, R], [B])))
    after  = ledger.record("I(AR:Bt)", mutual_information(out, ([A, R], [BT])))
    h_eq   = ledger.record("h(p_eq)", binary_entropy(p_eq))
    gain   = after - before - h_eq
    log.debug(f"{scenario}: p_eq={p_eq:.6f} gain={gain:.3e}")
    return EffectiveAttack(eff, p_eq, ledger, gain, out)


def nm_gain(scenario: AttackScenario) -> float:
    return evaluate(scenario).nm_gain


# ── Characterization ───────────────────────────────────────────────────────────

def attack_components(attack: QuantumChannel) -> tuple[QuantumChannel, QuantumChannel]:
    """
    Λ′(X) = Tr_{CC'}[φ⁺ Λ(φ⁺ ⊗ X)] and Λ″(X) = Tr_{CC'}[Π⁻ Λ(φ⁺ ⊗ X)], both B → Bt.

    Cached per attack digest.
    """
    return default_cache.get_or_compute("components", channel_digest(attack), lambda: _attack_components(attack))


def _attack_components(attack: QuantumChannel) -> tuple[QuantumChannel, QuantumChannel]:
    c  = attack.in_layout.dim_of(C)
    b  = attack.in_layout.dim_of(B)
    bt = attack.out_layout.dim_of(BT)
    lay = SystemLayout([(C, c), (C + "'", c), (B, b)])
    phi = max_entangled(c).matrix
    pim = pi_minus(c)

    lifted: dict[bytes, np.ndarray] = {}

    def lift(x: np.ndarray) -> np.ndarray:
        key = x.tobytes()
        if key not in lifted:
            y, l = apply_matrix(attack, np.kron(phi, x), lay, [C, B])          # [C, Bt, C']
            lifted[key] = permute_matrix(y, l.dims, [0, 2, 1]).reshape(c * c, bt, c * c, bt)
        return lifted[key]

    def part(proj: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
        return lambda x: np.einsum("ij,jxiy->xy", proj, lift(x))

    b_lay, bt_lay = [(B, b)], [(BT, bt)]
    prime  = QuantumChannel.from_linear_map(part(phi), b_lay, bt_lay, name="Λ'", validate=False)
    dprime = QuantumChannel.from_linear_map(part(pim), b_lay, bt_lay, name="Λ''", validate=False)
    return prime, dprime


def decrypted_mixed(scheme: EncryptionScheme) -> np.ndarray:
    """D_K(τ_C) as a matrix on Ā."""
    y, _ = apply_matrix(scheme.avg_decrypt(), np.eye(scheme.c) / scheme.c, scheme.ciphertext_layout)
    return y


def characterization_ideal(scenario: AttackScenario) -> QuantumChannel:
    """id ⊗ Λ′ + (|C|²⟨D_K(τ)⟩ − id) ⊗ Λ″ / (|C|²−1), with id the embedding A → Ā."""
    scheme = scenario.scheme
    c2     = scheme.c ** 2
    prime, dprime = attack_components(scenario.attack)
    ident  = QuantumChannel(scheme.plaintext_layout, scheme.decrypt_layout, kraus=accept_embedding(scheme.a), name="id")
    const  = QuantumChannel.constant(decrypted_mixed(scheme), scheme.plaintext_layout, scheme.decrypt_layout,
                                     name="<D_K(τ)>")
    return combine_channels(
        [
            (1.0, tensor_channels(ident, prime)),
            (c2 / (c2 - 1), tensor_channels(const, dprime)),
            (-1.0 / (c2 - 1), tensor_channels(ident, dprime)),
        ],
        name=f"ideal({scenario.attack.name})",
    )


def characterization_residual(scenario: AttackScenario, heuristic: bool = False) -> DiamondBounds:
    return diamond_distance_bounds(effective_channel(scenario), characterization_ideal(scenario), heuristic=heuristic)


def design_gap(scenario: AttackScenario, battery: list[DensityOperator]) -> float:
    """
    max over the battery of ‖Λ̃(ρ) − Λ_ideal(ρ)‖₁: how far the scheme's keys
    sit from an exact 2-design on this attack. Zero for exact designs.
    """
    eff, ideal = effective_channel(scenario), characterization_ideal(scenario)
    worst = 0.0
    for rho in battery:
        diff = apply_matrix(eff, rho.matrix, rho.layout, [A, B])[0] - apply_matrix(ideal, rho.matrix, rho.layout, [A, B])[0]
        worst = max(worst, trace_norm(hermitian_part(diff)))
    return worst


def forward_tolerance(eps: float, a: int, c: int) -> float:
    """2√(2ε)|A|⁴|C|(4√|A|+1): distance to the ideal form of an ε-NM scheme."""
    return 2 * math.sqrt(2 * eps) * a ** 4 * c * (4 * math.sqrt(a) + 1)


def converse_tolerance(eps: float, a: int, r: float) -> float:
    """5ε(log|A| + r) + 3h(ε): NM gain allowed when the residual is ε and log|R| ≤ r."""
    return 5 * eps * (math.log2(a) + r) + 3 * binary_entropy(min(eps, 0.5))


# ── ABW non-malleability ───────────────────────────────────────────────────────

def abw_residual(scenario: AttackScenario) -> ABWResidual:
    """
    Distance from the effective map (Bt traced out) to the affine family
    α·id + Σ β_m ⟨s_m⟩ with α + Σ β_m Tr s_m = 1 and s_m spanning D_K(L(C)).
    """
    if scenario.b != 1:
        raise IncompatibleScenarioError(f"ABW residual needs trivial B, got |B| = {scenario.b}", field="state")
    scheme = scenario.scheme
    a, ab  = scheme.a, scheme.a + 1
    eff    = effective_channel(scenario)
    eta    = ptrace_matrix(eff.choi, (ab, scenario.bt, a, 1), [0, 2, 3])

    j      = accept_embedding(a)
    phi    = max_entangled(a).matrix
    emb    = np.kron(j, np.eye(a))
    basis  = [emb @ phi @ emb.conj().T]
    traces = [1.0]
    for s in _decrypt_image_basis(scheme):
        basis.append(np.kron(s, np.eye(a) / a))
        traces.append(float(np.real(np.trace(s))))

    vecs = np.array([np.concatenate([m.real.ravel(), m.imag.ravel()]) for m in basis])
    target = np.concatenate([eta.real.ravel(), eta.imag.ravel()])
    gram = vecs @ vecs.T
    n    = len(basis)
    kkt  = np.zeros((n + 1, n + 1))
    kkt[:n, :n] = gram
    kkt[:n, n]  = traces
    kkt[n, :n]  = traces
    rhs  = np.concatenate([vecs @ target, [1.0]])
    sol  = np.linalg.lstsq(kkt, rhs, rcond=None)[0][:n]
    proj = sum(x * m for x, m in zip(sol, basis))
    dist = trace_norm(hermitian_part(eta - proj))
    w, v = np.linalg.eigh(hermitian_part(proj))
    clipped = (v * np.clip(w, 0.0, None)) @ v.conj().T
    clip = trace_norm(hermitian_part(proj - clipped))
    return ABWResidual(dist, a * dist, clip)


def _decrypt_image_basis(scheme: EncryptionScheme) -> list[np.ndarray]:
    """Orthonormal Hermitian basis of span_ℝ{D_K(X): X Hermitian on C}."""
    c, dk = scheme.c, scheme.avg_decrypt()
    images = []
    for i in range(c):
        for k in range(c):
            x = np.zeros((c, c), dtype=complex)
            if i == k:
                x[i, i] = 1.0
            elif i < k:
                x[i, k] = x[k, i] = 1.0
            else:
                x[i, k], x[k, i] = 1j, -1j
            images.append(apply_matrix(dk, x, scheme.ciphertext_layout)[0])
    ab   = scheme.a + 1
    real = np.array([np.concatenate([m.real.ravel(), m.imag.ravel()]) for m in images])
    u, s, vt = np.linalg.svd(real, full_matrices=False)
    rank = int(np.sum(s > 1e-10 * max(s[0], 1.0)))
    out  = []
    for row in vt[:rank]:
        half = ab * ab
        m = row[:half].reshape(ab, ab) + 1j * row[half:].reshape(ab, ab)
        out.append(hermitian_part(m))
    return out


# ── Secrecy ────────────────────────────────────────────────────────────────────

def its_check(scheme: EncryptionScheme, rho_ab: DensityOperator) -> float:
    """I(C:B) of (E_K ⊗ id)(ρ_AB), any side register labels after A."""
    out = apply(scheme.avg_encrypt(), rho_ab, on=[A])
    rest = [l for l in out.layout.labels if l != C]
    return mutual_information(out, ([C], rest))


def ind_distance(scheme: EncryptionScheme, rho: DensityOperator, rho_prime: DensityOperator) -> float:
    """‖E_K(ρ) − E_K(ρ')‖₁ for states on A."""
    e = scheme.avg_encrypt()
    return trace_norm(apply(e, rho).matrix - apply(e, rho_prime).matrix)


class ITSINDPair(NamedTuple):
    ind:   float     # ‖E_K(ρ₀) − E_K(ρ₁)‖₁
    its:   float     # I(C:Bit) of the equal-prior classical-quantum state
    bound: float     # 4√(2·its)


class ITSINDReport(NamedTuple):
    pairs:     list
    ind_bound: float   # certified sup over pairs, 2|A|·‖η_{E_K} − E_K(τ) ⊗ τ‖₁
    its:       float   # I(C:B) on φ⁺_{AB}
    its_bound: float   # 4h(δ) + 6δ·log|A| at δ = ind_bound


def its_ind_relation(scheme: EncryptionScheme, pairs: list[tuple[DensityOperator, DensityOperator]]) -> ITSINDReport:
    """Both directions of the quantitative ITS ⟺ IND equivalence, measured."""
    e = scheme.avg_encrypt()
    results = []
    for rho0, rho1 in pairs:
        s0, s1 = apply(e, rho0).matrix, apply(e, rho1).matrix
        cq = np.kron(np.diag([0.5, 0.0]), s0) + np.kron(np.diag([0.0, 0.5]), s1)
        state = DensityOperator(cq, [("Bit", 2), (C, scheme.c)], check=False)
        its = max(mutual_information(state, (["Bit"], [C])), 0.0)
        results.append(ITSINDPair(trace_norm(s0 - s1), its, 4 * math.sqrt(2 * its)))

    tau_out = apply_matrix(e, np.eye(scheme.a) / scheme.a, scheme.plaintext_layout)[0]
    delta   = 2 * scheme.a * trace_norm(hermitian_part(e.choi - np.kron(tau_out, np.eye(scheme.a) / scheme.a)))
    phi     = max_entangled(scheme.a, (A, B))
    its     = its_check(scheme, phi)
    d       = min(delta, 0.5)
    bound   = 4 * binary_entropy(d) + 6 * delta * math.log2(scheme.a)
    return ITSINDReport(results, delta, its, bound)


def secrecy_attack_from_nm(scheme: EncryptionScheme, initial: DensityOperator | None = None) -> AttackScenario:
    """
    Ciphertext-extraction scenario. notes carries p_eq (should be 0) and the
    residual against the predicted Bt ⊗ R marginal
    (|C|²−2)/(|C|²−1)·γ + τ ⊗ ρ_R/(|C|²−1), γ = (E_K ⊗ id)(ρ_AR).
    """
    attack = ciphertext_extraction_attack(scheme, b=1)
    scen   = AttackScenario(scheme, attack, initial, name="ciphertext_extraction")
    d2     = scheme.c ** 2
    report = evaluate(scen)
    gamma  = relabel(apply(scheme.avg_encrypt(), scen.initial.keep([A, R]), on=[A]), {C: BT})
    rho_r  = scen.initial.keep([R]).matrix
    tau    = np.eye(scheme.c) / scheme.c
    target = (d2 - 2) / (d2 - 1) * gamma.matrix + np.kron(tau, rho_r) / (d2 - 1)
    marg   = report.output.keep([BT, R]).matrix
    resid  = trace_norm(hermitian_part(marg - target))
    scen.notes.update({"p_eq": report.p_eq, "marginal_residual": resid, "cptp": bool(attack.is_cp and attack.is_tp)})
    if report.p_eq > 1e-12 or resid > 1e-9:
        log.warning(f"ciphertext extraction on {scheme.name}: p_eq={report.p_eq:.2e} residual={resid:.2e}")
    return scen


# ── Lemma checks ───────────────────────────────────────────────────────────────

def offdiagonal_lemma_residual(scheme: EncryptionScheme, probes: int = 5, seed: int = 0) -> float:
    """
    With 𝓔 = Σ_k w_k D_k ⊗ E_kᵀ on C ⊗ C', the largest deviation from
    𝓔(φ⁺) = (|A|/|C|)φ⁺_{AA'} and 𝓔(φ⁺(X ⊗ 1)) = (|A|/|C|)φ⁺(E_K†(X) ⊗ 1), φ⁺ embedded in Ā.
    """
    a, c = scheme.a, scheme.c
    rng  = make_rng(seed)
    lay  = SystemLayout([(C, c), (C + "'", c)])
    phi_c = max_entangled(c).matrix
    emb   = np.kron(accept_embedding(a), np.eye(a))
    phi_a = max_entangled(a).matrix
    xs = [np.eye(c, dtype=complex)] + [rng.normal(size=(c, c)) + 1j * rng.normal(size=(c, c)) for _ in range(probes)]
    adj = [sum(w * _adjoint_apply(scheme.encrypt(k), x) for k, w in enumerate(scheme.key_weights)) for x in xs]
    worst = 0.0
    for x, ex in zip(xs, adj):
        acc = np.zeros(((a + 1) * a,) * 2, dtype=complex)
        for k, w in enumerate(scheme.key_weights):
            et = transpose_channel(scheme.encrypt(k)).relabeled({C: C + "'"}, {A: A + "'"})
            m, l = apply_matrix(scheme.decrypt(k), phi_c @ np.kron(x, np.eye(c)), lay, [C])
            m, l = apply_matrix(et, m, l, [C + "'"])
            acc = acc + w * m
        ideal = (a / c) * emb @ (phi_a @ np.kron(ex, np.eye(a))) @ emb.conj().T
        worst = max(worst, float(np.max(np.abs(acc - ideal))))
    return worst


def _adjoint_apply(channel: QuantumChannel, x: np.ndarray) -> np.ndarray:
    k = channel.kraus
    return np.einsum("kai,ab,kbj->ij", k.conj(), x, k, optimize=True)


def dp_tensor_check(rho: DensityOperator, channel: QuantumChannel, side: str = B) -> tuple[float, float]:
    """
    (I(rest:B̃) after Λ: B → B̃ ⊗ X, I(rest:B) before + H(X)). X is the last
    output register of the channel; lhs ≤ rhs must hold.
    """
    out_labels = channel.out_layout.labels
    kept, extra = list(out_labels[:-1]), out_labels[-1]
    rest = [l for l in rho.layout.labels if l != side]
    out  = apply(channel, rho, on=[side])
    lhs  = mutual_information(out, (rest, kept))
    rhs  = mutual_information(rho, (rest, [side])) + von_neumann_entropy(out.keep([extra]))
    return lhs, rhs


def evaluate_many(scenarios: list[AttackScenario], parallel: int = 1) -> list[EffectiveAttack]:
    """evaluate() over a battery, results in scenario order."""
    if parallel <= 1:
        return [evaluate(s) for s in scenarios]
    from QNMBatch import QNMBatch
    batch = QNMBatch(parallel=parallel)
    for i, s in enumerate(scenarios):
        batch.scenario(f"s{i:06d}", s)
    result = batch.run_sync()
    result.raise_first()
    return result.values()
