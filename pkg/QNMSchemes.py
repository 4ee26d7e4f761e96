"""
QNMSchemes — symmetric-key quantum encryption schemes as key-indexed channels.

Usage:
    from QNMSchemes import clifford_scheme, tagged_scheme, check_correctness

    s   = clifford_scheme(1)                 # 24 keys, A = C = qubit
    ts  = tagged_scheme(clifford_scheme(2), t=1)
    check_correctness(ts)                    # < 1e-10
    e_k = s.encrypt(3)                       # QuantumChannel A → C

Every decrypt map lands on Ā = A ⊕ span{⊥}: the register keeps the label
"A" with dimension |A|+1 and carries two blocks, "acc" (the plaintext) and
"rej" (the reject symbol ⊥, last basis index).

Per-key channels are built on first use and memoized in the scheme's own
QNMCache. Schemes whose encryptions are single isometries V_k keep them in
`isometries` (shape (keys, |C|, |A|)) so averages can be vectorized.
"""

from __future__ import annotations

import json
import logging
import math
import uuid
from typing import Callable, NamedTuple

import numpy as np
from scipy.linalg import null_space

from QNMCache import QNMCache, default_cache
from QNMChannels import (
    Isometry,
    QuantumChannel,
    compose_channels,
    decode_matrix,
    encode_matrix,
)
from QNMCore import Block, DensityOperator, SystemLayout, hermitian_part, trace_norm
from QNMDesigns import UnitaryEnsemble, clifford_group, pauli_group, random_clifford
from QNMExceptions import DecompositionError, SchemeError
from QNMTypes import (
    BLOCK_ACCEPT,
    BLOCK_CIPHER,
    BLOCK_INJECTED,
    BLOCK_REJECT,
    REG_CIPHERTEXT,
    REG_PLAINTEXT,
    SCHEME_KINDS,
    SchemeDocument,
)
from qnm_config import ISOMETRY_TOL, SCHEMA

log = logging.getLogger("qnmlab.schemes")


# ── Layouts ────────────────────────────────────────────────────────────────────

def plaintext_layout(a: int) -> SystemLayout:
    return SystemLayout([(REG_PLAINTEXT, a)])


def decrypt_layout(a: int) -> SystemLayout:
    """Ā = A ⊕ ⊥, blocks acc (first |A| indices) and rej (last index)."""
    return SystemLayout(
        [(REG_PLAINTEXT, a + 1)],
        {REG_PLAINTEXT: [Block(BLOCK_ACCEPT, 0, a), Block(BLOCK_REJECT, a, 1)]},
    )


def ciphertext_layout(c: int, injected: int = 0) -> SystemLayout:
    if not injected:
        return SystemLayout([(REG_CIPHERTEXT, c)])
    return SystemLayout(
        [(REG_CIPHERTEXT, c + injected)],
        {REG_CIPHERTEXT: [Block(BLOCK_CIPHER, 0, c), Block(BLOCK_INJECTED, c, injected)]},
    )


def accept_embedding(a: int) -> np.ndarray:
    """J: A → Ā, the isometry onto the accept block."""
    return np.eye(a + 1, a, dtype=complex)


def reject_state(a: int) -> np.ndarray:
    """|⊥⟩⟨⊥| on Ā."""
    m = np.zeros((a + 1, a + 1), dtype=complex)
    m[a, a] = 1.0
    return m


# ── Scheme type ────────────────────────────────────────────────────────────────

class TagInfo(NamedTuple):
    dim:   int           # |T| = 2^t
    state: np.ndarray    # unit vector |ψ⟩_T


class EncryptionScheme:
    """
    Key distribution plus per-key encrypt (A → C) and decrypt (C → Ā) channels.

    Args:
        plaintext_dim, ciphertext_dim: |A| and |C|.
        key_weights:  probability vector over keys.
        encrypt_fn:   key index → QuantumChannel A → C.
        decrypt_fn:   key index → QuantumChannel C → Ā.
        isometries:   optional (keys, |C|, |A|) stack with E_k = V_k(·)V_k†.
        descriptor:   dict that rebuilds the scheme via scheme_from_descriptor.
        ciphertext:   layout override for direct-sum ciphertexts.
        tag, base:    tag info and untagged base for schemes from tagged_scheme.
    """

    def __init__(
        self,
        plaintext_dim: int,
        ciphertext_dim: int,
        key_weights,
        encrypt_fn: Callable[[int], QuantumChannel],
        decrypt_fn: Callable[[int], QuantumChannel],
        *,
        isometries: np.ndarray | None = None,
        descriptor: dict | None = None,
        ciphertext: SystemLayout | None = None,
        tag: TagInfo | None = None,
        base: "EncryptionScheme | None" = None,
        name: str = "",
    ):
        w = np.asarray(key_weights, dtype=float)
        if w.ndim != 1 or not len(w) or np.any(w < 0) or abs(float(w.sum()) - 1.0) > 1e-12:
            raise SchemeError("key weights must be a probability vector", field="key_weights")
        if isometries is not None and isometries.shape != (len(w), ciphertext_dim, plaintext_dim):
            raise SchemeError(f"isometry stack shape {isometries.shape} does not match the scheme")
        self.a           = int(plaintext_dim)
        self.c           = int(ciphertext_dim)
        self.key_weights = w
        self.isometries  = isometries
        self.descriptor  = dict(descriptor or {"kind": "custom"})
        self.tag         = tag
        self.base        = base
        self.name        = name or self.descriptor.get("kind", "scheme")
        self.ident       = uuid.uuid4().hex
        self._encrypt_fn = encrypt_fn
        self._decrypt_fn = decrypt_fn
        self._cache      = QNMCache()
        self.plaintext_layout  = plaintext_layout(self.a)
        self.ciphertext_layout = ciphertext or ciphertext_layout(self.c)
        self.decrypt_layout    = decrypt_layout(self.a)

    # ── Keys ───────────────────────────────────────────────────────────────────

    @property
    def keys(self) -> int:
        return len(self.key_weights)

    @property
    def unitary(self) -> bool:
        return self.isometries is not None and self.a == self.c

    @property
    def uniform(self) -> bool:
        return bool(np.allclose(self.key_weights, 1.0 / self.keys, atol=1e-15))

    def encrypt(self, key: int) -> QuantumChannel:
        return self._cache.get_or_compute("enc", key, lambda: self._encrypt_fn(key))

    def decrypt(self, key: int) -> QuantumChannel:
        return self._cache.get_or_compute("dec", key, lambda: self._decrypt_fn(key))

    # ── Averages ───────────────────────────────────────────────────────────────

    def avg_encrypt(self) -> QuantumChannel:
        """E_K = Σ_k w_k E_k."""
        return self._cache.get_or_compute("avg", "enc", self._avg_encrypt)

    def avg_decrypt(self) -> QuantumChannel:
        """D_K = Σ_k w_k D_k."""
        return self._cache.get_or_compute("avg", "dec", self._avg_decrypt)

    def _avg_encrypt(self) -> QuantumChannel:
        if self.isometries is not None:
            choi = _stack_choi(self.isometries, self.key_weights)
        else:
            choi = sum(w * self.encrypt(k).choi for k, w in enumerate(self.key_weights))
        return QuantumChannel(self.plaintext_layout, self.ciphertext_layout, choi=choi, name="E_K", validate=False)

    def _avg_decrypt(self) -> QuantumChannel:
        if self.isometries is not None and self.tag is None and self.unitary:
            j    = accept_embedding(self.a)
            ops  = np.einsum("ab,kcb->kac", j, self.isometries.conj())
            choi = _stack_choi(ops, self.key_weights)
        else:
            choi = sum(w * self.decrypt(k).choi for k, w in enumerate(self.key_weights))
        return QuantumChannel(self.ciphertext_layout, self.decrypt_layout, choi=choi, name="D_K", validate=False)

    def __repr__(self) -> str:
        return f"EncryptionScheme({self.name}: |A|={self.a}, |C|={self.c}, keys={self.keys})"


def _stack_choi(ops: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Σ_k w_k |O_k⟩⟩⟨⟨O_k| / d_in for single-Kraus maps X ↦ O_k X O_k†."""
    d_in = ops.shape[2]
    v    = ops.reshape(len(ops), -1)
    return ((v.T * weights) @ v.conj()) / d_in


# ── Constructors ───────────────────────────────────────────────────────────────

def unitary_scheme_from(
    ensemble: UnitaryEnsemble,
    descriptor: dict | None = None,
    name: str = "",
) -> EncryptionScheme:
    """E_k = U_k(·)U_k†, D_k = J U_k†(·)U_k J†."""
    u = ensemble.elements
    d = ensemble.dim
    eye = np.eye(d)
    defect = np.max(np.abs(np.einsum("kji,kjl->kil", u.conj(), u) - eye))
    if defect > ISOMETRY_TOL:
        raise SchemeError(f"ensemble element is not unitary (defect {defect:.2e})")
    a_lay = plaintext_layout(d)
    c_lay = ciphertext_layout(d)
    d_lay = decrypt_layout(d)
    j     = accept_embedding(d)
    return EncryptionScheme(
        d, d, ensemble.weights,
        lambda k: QuantumChannel(a_lay, c_lay, kraus=u[k], name=f"E_{k}"),
        lambda k: QuantumChannel(c_lay, d_lay, kraus=j @ u[k].conj().T, name=f"D_{k}"),
        isometries=u,
        descriptor=descriptor or {"kind": "custom", "ensemble": dict(ensemble.provenance)},
        name=name,
    )


def qotp_scheme(n: int) -> EncryptionScheme:
    """Quantum one-time pad on n qubits (4ⁿ Pauli keys)."""
    return unitary_scheme_from(pauli_group(n), {"kind": "qotp", "n": n}, name=f"qotp{n}")


def clifford_scheme(n: int) -> EncryptionScheme:
    if n not in (1, 2):
        raise SchemeError(f"clifford_scheme supports n ≤ 2, got {n}; use sampled_clifford_scheme", field="n")
    return unitary_scheme_from(clifford_group(n), {"kind": "clifford", "n": n}, name=f"clifford{n}")


def sampled_clifford_scheme(n: int, keys: int, seed: int) -> EncryptionScheme:
    return unitary_scheme_from(
        random_clifford(n, keys, seed),
        {"kind": "sampled_clifford", "n": n, "keys": keys, "seed": seed},
        name=f"clifford{n}[{keys}]",
    )


def identity_scheme(dim: int) -> EncryptionScheme:
    """One key, E = id. Correct and completely insecure."""
    return unitary_scheme_from(
        UnitaryEnsemble(np.eye(dim, dtype=complex)[None], provenance={"kind": "explicit"}),
        {"kind": "identity", "dim": dim},
        name="identity",
    )


def tagged_scheme(scheme: EncryptionScheme, t: int, tag_state=None) -> EncryptionScheme:
    """
    Plaintext A' with A = A' ⊗ T, |T| = 2^t.

    Encryption appends |ψ⟩_T (default |0…0⟩) before E_k. Decryption runs D_k,
    then keeps the accept block projected onto ⟨ψ|_T and routes everything
    else (wrong tag or an inner ⊥) to the new ⊥.
    """
    if t == 0:
        return scheme
    if t < 0:
        raise SchemeError(f"tag count must be non-negative, got {t}", field="t")
    dim_t = 2 ** t
    if scheme.a % dim_t:
        raise SchemeError(f"tag dim {dim_t} does not divide |A| = {scheme.a}", field="t")
    inner = scheme.a // dim_t
    psi   = np.zeros(dim_t, dtype=complex)
    psi[0] = 1.0
    if tag_state is not None:
        psi = np.asarray(tag_state, dtype=complex).reshape(-1)
        if psi.shape != (dim_t,) or np.linalg.norm(psi) < 1e-12:
            raise SchemeError(f"tag state must be a nonzero vector of length {dim_t}", field="tag_state")
        psi = psi / np.linalg.norm(psi)

    append  = np.kron(np.eye(inner), psi[:, None])                 # A' → A'⊗T
    project = _tag_check_kraus(inner, psi)
    a_lay   = plaintext_layout(inner)
    inner_d = decrypt_layout(inner)
    check   = QuantumChannel(scheme.decrypt_layout, inner_d, kraus=project, name="tag-check")

    def encrypt(k: int) -> QuantumChannel:
        e = scheme.encrypt(k)
        return QuantumChannel(a_lay, scheme.ciphertext_layout, kraus=e.kraus @ append, name=f"E'_{k}")

    def decrypt(k: int) -> QuantumChannel:
        return compose_channels(check, scheme.decrypt(k), name=f"D'_{k}")

    isos = None if scheme.isometries is None else scheme.isometries @ append
    desc = {"kind": "tagged", "base": scheme.descriptor, "t": t}
    if tag_state is not None:
        desc["tag_state"] = encode_matrix(psi[None])[0]
    return EncryptionScheme(
        inner, scheme.c, scheme.key_weights, encrypt, decrypt,
        isometries=isos, descriptor=desc, ciphertext=scheme.ciphertext_layout,
        tag=TagInfo(dim_t, psi), base=scheme, name=f"{scheme.name}+tag{t}",
    )


def tag_channels(scheme: EncryptionScheme) -> tuple[QuantumChannel, QuantumChannel]:
    """(append |ψ⟩_T: A' → A, tag check: Ā → Ā') of a tagged scheme."""
    if scheme.tag is None or scheme.base is None:
        raise SchemeError(f"{scheme.name} carries no tag", field="t")
    base, psi = scheme.base, scheme.tag.state
    inner  = scheme.a
    append = QuantumChannel(
        scheme.plaintext_layout, base.plaintext_layout,
        kraus=np.kron(np.eye(inner), psi[:, None]), name="tag-append",
    )
    check = QuantumChannel(base.decrypt_layout, scheme.decrypt_layout, kraus=_tag_check_kraus(inner, psi), name="tag-check")
    return append, check


def _tag_check_kraus(inner: int, psi: np.ndarray) -> np.ndarray:
    """Kraus set Ā → Ā' of the tag check; Σ Q†Q = 1."""
    dim_t = len(psi)
    a     = inner * dim_t
    ops   = []
    acc   = np.zeros((inner + 1, a + 1), dtype=complex)
    acc[:inner, :a] = np.kron(np.eye(inner), psi.conj()[None, :])
    ops.append(acc)
    perp = null_space(psi.conj()[None, :])                       # columns span ψ^⊥
    for x in range(inner):
        for j in range(perp.shape[1]):
            op = np.zeros((inner + 1, a + 1), dtype=complex)
            op[inner, :a] = np.kron(np.eye(inner)[x], perp[:, j].conj())
            ops.append(op)
    bot = np.zeros((inner + 1, a + 1), dtype=complex)
    bot[inner, a] = 1.0
    ops.append(bot)
    return np.array(ops)


def injection_scheme(base: EncryptionScheme) -> EncryptionScheme:
    """
    Ciphertext C ⊕ Â with Â ≅ A. Encryption never populates Â; decryption
    decrypts the C block and passes the Â block through verbatim.
    """
    a, c   = base.a, base.c
    c_lay  = ciphertext_layout(c, injected=a)
    embed  = np.eye(c + a, c, dtype=complex)                    # C → C ⊕ Â
    p_c    = embed.conj().T
    p_hat  = np.zeros((a, c + a), dtype=complex)
    p_hat[:, c:] = np.eye(a)
    pass_through = accept_embedding(a) @ p_hat

    def encrypt(k: int) -> QuantumChannel:
        return QuantumChannel(base.plaintext_layout, c_lay, kraus=embed @ base.encrypt(k).kraus, name=f"E'_{k}")

    def decrypt(k: int) -> QuantumChannel:
        ops = np.concatenate([base.decrypt(k).kraus @ p_c, pass_through[None]])
        return QuantumChannel(c_lay, base.decrypt_layout, kraus=ops, name=f"D'_{k}")

    isos = None if base.isometries is None else embed @ base.isometries
    return EncryptionScheme(
        a, c + a, base.key_weights, encrypt, decrypt,
        isometries=isos, descriptor={"kind": "injection", "base": base.descriptor},
        ciphertext=c_lay, name=f"inject({base.name})",
    )


def werner_holevo_unitary(d: int) -> np.ndarray:
    """Antidiagonal V with V_{j,d−j+1} = i·sign(d−2j+1) (1-indexed)."""
    if d % 2:
        raise SchemeError(f"Werner-Holevo needs even d, got {d}", field="d")
    v = np.zeros((d, d), dtype=complex)
    for j in range(d):
        v[j, d - 1 - j] = 1j * np.sign(d - 2 * j - 1)
    return v


def werner_holevo_scheme(base_design: UnitaryEnsemble, d: int) -> EncryptionScheme:
    """Keys Û V Ûᵀ; E_K(X) = (d·τ·Tr X − Xᵀ)/(d−1) when the base is a 2-design."""
    v = werner_holevo_unitary(d)
    if base_design.dim != d:
        raise SchemeError(f"base design has dim {base_design.dim}, expected {d}", field="d")
    u    = base_design.elements
    keys = np.einsum("kab,bc,kdc->kad", u, v, u)
    ens  = UnitaryEnsemble(keys, base_design.weights, {"kind": "werner_holevo", "d": d}, validate=False)
    return unitary_scheme_from(ens, {"kind": "werner_holevo", "d": d}, name=f"werner-holevo{d}")


def werner_holevo_map(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    d = x.shape[0]
    return (np.trace(x) * np.eye(d) - x.T) / (d - 1)


# ── Structure and correctness ──────────────────────────────────────────────────

def tomographic_states(a: int) -> list[np.ndarray]:
    """a² pure states spanning the operators on C^a: |i⟩, (|i⟩+|j⟩)/√2, (|i⟩+i|j⟩)/√2."""
    states = []
    eye = np.eye(a, dtype=complex)
    for i in range(a):
        states.append(np.outer(eye[i], eye[i]))
    for i in range(a):
        for j in range(i + 1, a):
            for phase in (1.0, 1j):
                v = (eye[i] + phase * eye[j]) / math.sqrt(2)
                states.append(np.outer(v, v.conj()))
    return states


def check_correctness(scheme: EncryptionScheme) -> float:
    """max_k max_ρ ‖D_k(E_k(ρ)) − ρ ⊕ 0‖₁ over a tomographically complete set. Never raises."""
    probes = np.array(tomographic_states(scheme.a))
    j      = accept_embedding(scheme.a)
    ideal  = np.einsum("ab,sbc,dc->sad", j, probes, j)
    worst  = 0.0
    for k in range(scheme.keys):
        try:
            t   = compose_channels(scheme.decrypt(k), scheme.encrypt(k)).superop
            out = np.einsum("abij,sij->sab", t, probes, optimize=True)
        except Exception as exc:   # report, never raise
            log.warning(f"correctness check of key {k} failed: {exc!r}")
            return float("inf")
        worst = max(worst, max(trace_norm(hermitian_part(o - i)) for o, i in zip(out, ideal)))
    log.debug(f"correctness residual of {scheme}: {worst:.3e}")
    return worst


def decompose_encryption_map(channel: QuantumChannel) -> tuple[Isometry, DensityOperator]:
    """
    (V, σ) with E(X) = V (X ⊗ σ) V†, read off the spectral decomposition of η_E.

    Raises DecompositionError when the recovered V is not an isometry or the
    reconstruction misses η_E.
    """
    a, c = channel.in_dim, channel.out_dim
    eta  = hermitian_part(channel.choi)
    w, vecs = np.linalg.eigh(eta)
    keep = w > 1e-12
    lam  = w[keep][::-1]
    vecs = vecs[:, keep][:, ::-1]
    r    = len(lam)
    if not r:
        raise DecompositionError("encryption map has a zero Choi matrix", residual=0.0)
    kraus = math.sqrt(a) * vecs.T.reshape(r, c, a)
    v = kraus.transpose(1, 2, 0).reshape(c, a * r)              # column x·r + i
    defect = float(np.max(np.abs(v.conj().T @ v - np.eye(a * r))))
    if defect > 1e-9:
        raise DecompositionError(f"recovered map is not an isometry (defect {defect:.2e})", residual=defect)
    sigma = np.diag(lam).astype(complex)
    rebuilt = QuantumChannel.from_linear_map(
        lambda x: v @ np.kron(x, sigma) @ v.conj().T, channel.in_layout, channel.out_layout, validate=False,
    )
    residual = float(np.max(np.abs(rebuilt.choi - channel.choi)))
    if residual > 1e-9:
        raise DecompositionError(f"reconstruction residual {residual:.2e}", residual=residual)
    anc = SystemLayout([("Anc", r)])
    iso = Isometry(v, channel.in_layout + anc, channel.out_layout)
    return iso, DensityOperator(sigma / np.trace(sigma).real, anc, check=False)


# ── Descriptors ────────────────────────────────────────────────────────────────

def scheme_from_descriptor(desc: dict) -> EncryptionScheme:
    """
    Build (or fetch the memoized) scheme for a descriptor:

        {"kind": "qotp", "n": 1}
        {"kind": "clifford", "n": 2}
        {"kind": "sampled_clifford", "n": 3, "keys": 2000, "seed": 7}
        {"kind": "tagged", "base": {...}, "t": 1}
        {"kind": "injection", "base": {...}}
        {"kind": "werner_holevo", "d": 2}
        {"kind": "identity", "dim": 2}
    """
    if not isinstance(desc, dict) or desc.get("kind") not in SCHEME_KINDS:
        kind = desc.get("kind") if isinstance(desc, dict) else desc
        raise SchemeError(f"unknown scheme kind {kind!r}", field="kind")
    key = json.dumps(desc, sort_keys=True)
    return default_cache.get_or_compute("scheme", key, lambda: _build(desc))


def _build(desc: dict) -> EncryptionScheme:
    kind = desc["kind"]
    try:
        if kind == "qotp":
            return qotp_scheme(int(desc.get("n", 1)))
        if kind == "clifford":
            return clifford_scheme(int(desc.get("n", 1)))
        if kind == "sampled_clifford":
            return sampled_clifford_scheme(int(desc["n"]), int(desc["keys"]), int(desc["seed"]))
        if kind == "identity":
            return identity_scheme(int(desc.get("dim", 2)))
        if kind == "tagged":
            state = desc.get("tag_state")
            state = decode_matrix([state])[0] if state is not None else None
            return tagged_scheme(scheme_from_descriptor(desc["base"]), int(desc["t"]), state)
        if kind == "injection":
            return injection_scheme(scheme_from_descriptor(desc["base"]))
        d = int(desc.get("d", 2))
        n = int(round(math.log2(d)))
        if 2 ** n != d or n not in (1, 2):
            raise SchemeError(f"Werner-Holevo base design needs d ∈ {{2, 4}}, got {d}", field="d")
        return werner_holevo_scheme(clifford_group(n), d)
    except KeyError as e:
        raise SchemeError(f"scheme descriptor {kind!r} is missing {e.args[0]!r}", field=e.args[0]) from None


def scheme_to_json(scheme: EncryptionScheme) -> SchemeDocument:
    doc: SchemeDocument = {
        "schema":         SCHEMA,
        "kind":           "scheme",
        "descriptor":     scheme.descriptor,
        "plaintext_dim":  scheme.a,
        "ciphertext_dim": scheme.c,
        "keys":           scheme.keys,
        "unitary":        scheme.unitary,
    }
    if not scheme.uniform:
        doc["key_weights"] = [float(w) for w in scheme.key_weights]
    return doc
