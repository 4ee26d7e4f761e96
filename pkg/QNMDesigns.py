"""
QNMDesigns — Pauli/Clifford ensembles, twirls and design deficiencies.

Usage:
    from QNMDesigns import clifford_group, t_twirl, haar_2twirl, design_deficiency

    c1 = clifford_group(1)                       # 24 elements, BFS order
    y  = t_twirl(c1, x, t=2)                     # equals haar_2twirl(x, 2)
    lo, hi, *_ = design_deficiency(c1, "t-design", t=2)

Haar averages are never sampled. The 2-twirl uses the Schur closed form
    𝒯(M) = 1 ⊗ R¹ + F ⊗ R^F
    R¹   = (d·Tr_{A²}M − Tr_{A²}FM) / (d(d²−1))
    R^F  = (d·Tr_{A²}FM − Tr_{A²}M) / (d(d²−1))
and the U-Ū twirl is the projection onto span{φ⁺, 1}.

Clifford groups are enumerated by breadth-first closure of {H, P, CNOT}
from the identity, generators tried in a fixed order, with unitaries
deduplicated up to global phase. The enumeration is identical across runs.
"""

from __future__ import annotations

import hashlib
import logging
import math
from collections import deque
from typing import Iterator, NamedTuple

import numpy as np

from QNMCache import default_cache
from QNMChannels import (
    PAULI_I,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    QuantumChannel,
    decode_matrix,
    diamond_distance_bounds,
    encode_matrix,
    random_channel,
)
from QNMCore import make_rng, phi_plus_vector, pi_minus, swap_operator
from QNMExceptions import DesignError
from QNMTypes import DeficiencyReport, EnsembleDocument
from qnm_config import ISOMETRY_TOL, SCHEMA

log = logging.getLogger("qnmlab.designs")

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
PHASE    = np.array([[1, 0], [0, 1j]], dtype=complex)
T_GATE   = np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]], dtype=complex)

NOTIONS = ("t-design", "uubar", "channel-twirl")

# Probe battery for the channel-twirl notion: every n-qubit Pauli plus this
# many Haar-Stinespring random channels drawn from PROBE_SEED.
PROBE_RANDOM_CHANNELS = 20
PROBE_SEED            = 0

_TWIRL_CHUNK = 256


# ── Ensemble type ──────────────────────────────────────────────────────────────

class UnitaryEnsemble:
    """
    Finite weighted set of unitaries on one register.

    Args:
        elements:   array of shape (m, d, d).
        weights:    probability vector of length m (uniform when None).
        provenance: {"kind": "enumerated"|"sampled"|"circuit", ...} descriptor.
        validate:   check unitarity of every element and the weight sum.
    """

    def __init__(self, elements, weights=None, provenance: dict | None = None, validate: bool = True):
        u = np.asarray(elements, dtype=complex)
        if u.ndim != 3 or u.shape[1] != u.shape[2]:
            raise DesignError(f"ensemble elements must be square matrices, got shape {u.shape}")
        m = len(u)
        w = np.full(m, 1.0 / m) if weights is None else np.asarray(weights, dtype=float)
        if validate:
            if w.shape != (m,) or np.any(w < 0) or abs(float(w.sum()) - 1.0) > 1e-12:
                raise DesignError("ensemble weights must be a probability vector", field="weights")
            eye    = np.eye(u.shape[1])
            defect = np.max(np.abs(np.einsum("kji,kjl->kil", u.conj(), u) - eye), axis=(1, 2))
            bad    = np.flatnonzero(defect > ISOMETRY_TOL)
            if len(bad):
                raise DesignError(f"element {int(bad[0])} is not unitary (defect {defect[bad[0]]:.2e})")
        self.elements   = u
        self.weights    = w
        self.provenance = dict(provenance or {"kind": "explicit"})
        self._digest: str | None = None

    @property
    def dim(self) -> int:
        return self.elements.shape[1]

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self) -> Iterator[tuple[np.ndarray, float]]:
        return zip(self.elements, self.weights)

    def digest(self) -> str:
        """sha256 over rounded elements and weights; stable cache identity."""
        if self._digest is None:
            h = hashlib.sha256()
            h.update(np.ascontiguousarray(np.round(self.elements, 10) + (0.0 + 0.0j)).tobytes())
            h.update(np.ascontiguousarray(np.round(self.weights, 14) + 0.0).tobytes())
            self._digest = h.hexdigest()
        return self._digest

    def adjoint(self) -> "UnitaryEnsemble":
        return UnitaryEnsemble(
            self.elements.conj().transpose(0, 2, 1), self.weights,
            {**self.provenance, "adjoint": True}, validate=False,
        )

    def __repr__(self) -> str:
        return f"UnitaryEnsemble(dim={self.dim}, size={len(self)}, kind={self.provenance.get('kind')!r})"


# ── Phase canonicalization ─────────────────────────────────────────────────────

def canonical_phase(u: np.ndarray) -> np.ndarray:
    """Multiply by the global phase that makes the first nonzero entry real-positive."""
    flat = u.reshape(-1)
    idx  = int(np.flatnonzero(np.abs(flat) > 1e-9)[0])
    z    = flat[idx]
    return u * (abs(z) / z)


def _phase_key(u: np.ndarray) -> bytes:
    return (np.round(canonical_phase(u), 8) + (0.0 + 0.0j)).tobytes()


# ── Gates ──────────────────────────────────────────────────────────────────────

def embed_gate(gate: np.ndarray, qubit: int, n: int) -> np.ndarray:
    """Single-qubit gate on `qubit` (0 = most significant) of n qubits."""
    out = np.eye(1, dtype=complex)
    for q in range(n):
        out = np.kron(out, gate if q == qubit else PAULI_I)
    return out


def cnot(control: int, target: int, n: int) -> np.ndarray:
    d    = 2 ** n
    perm = np.zeros((d, d), dtype=complex)
    for x in range(d):
        bits = [(x >> (n - 1 - q)) & 1 for q in range(n)]
        if bits[control]:
            bits[target] ^= 1
        y = sum(b << (n - 1 - q) for q, b in enumerate(bits))
        perm[y, x] = 1.0
    return perm


def clifford_generators(n: int) -> list[np.ndarray]:
    """H on each qubit, then P on each qubit, then CNOT for every ordered pair."""
    gens  = [embed_gate(HADAMARD, q, n) for q in range(n)]
    gens += [embed_gate(PHASE, q, n) for q in range(n)]
    gens += [cnot(c, t, n) for c in range(n) for t in range(n) if c != t]
    return gens


def pauli_matrices(n: int) -> tuple[list[str], np.ndarray]:
    """All 4ⁿ Pauli strings in lexicographic I < X < Y < Z order."""
    singles = {"I": PAULI_I, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}
    labels  = [""]
    mats    = [np.eye(1, dtype=complex)]
    for _ in range(n):
        labels = [l + s for l in labels for s in singles]
        mats   = [np.kron(m, singles[s]) for m in mats for s in singles]
    return labels, np.array(mats)


def pauli_from_label(label: str) -> np.ndarray:
    singles = {"I": PAULI_I, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}
    out = np.eye(1, dtype=complex)
    for s in label.upper():
        if s not in singles:
            raise DesignError(f"bad Pauli label {label!r}", field="pauli")
        out = np.kron(out, singles[s])
    return out


def is_pauli_normalizer(u: np.ndarray, tol: float = 1e-9) -> bool:
    """True iff U P U† is ± a Pauli string for every single-qubit X and Z generator."""
    d = u.shape[0]
    n = int(round(math.log2(d)))
    _, paulis = pauli_matrices(n)
    for q in range(n):
        for g in (PAULI_X, PAULI_Z):
            img = u @ embed_gate(g, q, n) @ u.conj().T
            ovl = np.abs(np.einsum("kij,ji->k", paulis.conj().transpose(0, 2, 1), img)) / d
            if abs(ovl.max() - 1.0) > tol:
                return False
    return True


# ── Ensembles ──────────────────────────────────────────────────────────────────

def pauli_group(n: int) -> UnitaryEnsemble:
    if n not in (1, 2, 3, 4):
        raise DesignError(f"pauli_group supports 1 to 4 qubits, got {n}", field="n")
    _, mats = pauli_matrices(n)
    return UnitaryEnsemble(mats, provenance={"kind": "enumerated", "family": "pauli", "n": n})


def clifford_group(n: int) -> UnitaryEnsemble:
    """Exhaustive n-qubit Clifford group modulo phase (24 for n=1, 11520 for n=2)."""
    if n not in (1, 2):
        raise DesignError(f"Clifford enumeration supports n ≤ 2, got {n}; use random_clifford", field="n")
    return default_cache.get_or_compute("clifford", n, lambda: _enumerate_clifford(n))


def _enumerate_clifford(n: int) -> UnitaryEnsemble:
    gens  = clifford_generators(n)
    start = np.eye(2 ** n, dtype=complex)
    seen  = {_phase_key(start)}
    found = [start]
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for g in gens:
            v   = canonical_phase(g @ u)
            key = _phase_key(v)
            if key not in seen:
                seen.add(key)
                found.append(v)
                queue.append(v)
    log.info(f"enumerated {len(found)} {n}-qubit Cliffords")
    return UnitaryEnsemble(
        np.array(found), provenance={"kind": "enumerated", "family": "clifford", "n": n}, validate=False,
    )


def random_clifford(n: int, count: int, seed: int) -> UnitaryEnsemble:
    """
    `count` Cliffords drawn from `seed`.

    n ≤ 2: uniform draws from the enumerated group. n ∈ {3, 4}: layered words
    (a random single-qubit Clifford on every qubit followed by a random CNOT,
    20n layers) finished by a uniformly random Pauli.
    """
    if n not in (1, 2, 3, 4):
        raise DesignError(f"random_clifford supports 1 to 4 qubits, got {n}", field="n")
    if count < 1:
        raise DesignError("count must be positive", field="count")
    rng  = make_rng(seed)
    prov = {"kind": "sampled", "family": "clifford", "n": n, "seed": seed, "count": count}
    if n <= 2:
        group = clifford_group(n)
        idx   = rng.integers(len(group), size=count)
        return UnitaryEnsemble(group.elements[idx], provenance=prov, validate=False)

    singles = clifford_group(1).elements
    _, paulis = pauli_matrices(n)
    pairs = [(c, t) for c in range(n) for t in range(n) if c != t]
    cnots = [cnot(c, t, n) for c, t in pairs]
    depth = 20 * n
    out = np.empty((count, 2 ** n, 2 ** n), dtype=complex)
    for k in range(count):
        u = np.eye(2 ** n, dtype=complex)
        for _ in range(depth):
            layer = np.eye(1, dtype=complex)
            for q in rng.integers(len(singles), size=n):
                layer = np.kron(layer, singles[q])
            u = cnots[int(rng.integers(len(cnots)))] @ layer @ u
        out[k] = canonical_phase(paulis[int(rng.integers(len(paulis)))] @ u)
    return UnitaryEnsemble(out, provenance=prov, validate=False)


def random_circuit_ensemble(n: int, depth: int, count: int, seed: int) -> UnitaryEnsemble:
    """Circuits of `depth` gates drawn uniformly from {H_q, T_q, CNOT_{c,t}}."""
    if n not in (1, 2, 3, 4):
        raise DesignError(f"random_circuit_ensemble supports 1 to 4 qubits, got {n}", field="n")
    rng   = make_rng(seed)
    gates = [embed_gate(HADAMARD, q, n) for q in range(n)] + [embed_gate(T_GATE, q, n) for q in range(n)]
    gates += [cnot(c, t, n) for c in range(n) for t in range(n) if c != t]
    out = np.empty((count, 2 ** n, 2 ** n), dtype=complex)
    for k in range(count):
        u = np.eye(2 ** n, dtype=complex)
        for g in rng.integers(len(gates), size=depth):
            u = gates[g] @ u
        out[k] = u
    return UnitaryEnsemble(
        out, provenance={"kind": "circuit", "n": n, "depth": depth, "seed": seed, "count": count}, validate=False,
    )


# ── Twirls ─────────────────────────────────────────────────────────────────────

def _tensor_power(u: np.ndarray, t: int) -> np.ndarray:
    """U^{⊗t} for a stack of unitaries of shape (m, d, d)."""
    out = u
    for _ in range(t - 1):
        m, a, _ = out.shape
        d = u.shape[1]
        out = np.einsum("kab,kcd->kacbd", out, u).reshape(m, a * d, a * d)
    return out


def _conjugation_average(ops: np.ndarray, weights: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Σ w_k O_k X O_k†, summed chunk by chunk in element order."""
    acc = np.zeros_like(x, dtype=complex)
    for lo in range(0, len(ops), _TWIRL_CHUNK):
        o = ops[lo: lo + _TWIRL_CHUNK]
        w = weights[lo: lo + _TWIRL_CHUNK]
        acc = acc + np.einsum("k,kab,bc,kdc->ad", w, o, x, o.conj(), optimize=True)
    return acc


def t_twirl(ensemble: UnitaryEnsemble, x: np.ndarray, t: int) -> np.ndarray:
    """Σ_U w_U U^{⊗t} X U^{†⊗t}."""
    x = np.asarray(x, dtype=complex)
    if x.shape != (ensemble.dim ** t,) * 2:
        raise DesignError(f"t_twirl: X has shape {x.shape}, expected dim {ensemble.dim ** t}", field="x")
    acc = np.zeros_like(x)
    for lo in range(0, len(ensemble), _TWIRL_CHUNK):
        ops = _tensor_power(ensemble.elements[lo: lo + _TWIRL_CHUNK], t)
        acc = acc + _conjugation_average(ops, ensemble.weights[lo: lo + _TWIRL_CHUNK], x)
    return acc


def haar_2twirl(m: np.ndarray, d: int) -> np.ndarray:
    """Haar 2-twirl on the leading d² factor of M (any trailing auxiliary factor)."""
    if d < 2:
        raise DesignError(f"haar_2twirl needs d ≥ 2, got {d}", field="d")
    m = np.asarray(m, dtype=complex)
    aux = m.shape[0] // (d * d)
    if aux * d * d != m.shape[0]:
        raise DesignError(f"matrix of dim {m.shape[0]} does not factor as {d}²·aux", field="m")
    m6    = m.reshape(d, d, aux, d, d, aux)
    tr_m  = np.einsum("ijxijy->xy", m6)
    tr_fm = np.einsum("ijxjiy->xy", m6)
    den   = d * (d * d - 1)
    r1    = (d * tr_m - tr_fm) / den
    rf    = (d * tr_fm - tr_m) / den
    return np.kron(np.eye(d * d), r1) + np.kron(swap_operator(d), rf)


def uubar_twirl(ensemble: UnitaryEnsemble, x: np.ndarray) -> np.ndarray:
    """Σ_U w_U (U⊗Ū) X (U⊗Ū)†."""
    x = np.asarray(x, dtype=complex)
    d = ensemble.dim
    if x.shape != (d * d, d * d):
        raise DesignError(f"uubar_twirl: X has shape {x.shape}, expected dim {d * d}", field="x")
    acc = np.zeros_like(x)
    for lo in range(0, len(ensemble), _TWIRL_CHUNK):
        u   = ensemble.elements[lo: lo + _TWIRL_CHUNK]
        ops = np.einsum("kab,kcd->kacbd", u, u.conj()).reshape(len(u), d * d, d * d)
        acc = acc + _conjugation_average(ops, ensemble.weights[lo: lo + _TWIRL_CHUNK], x)
    return acc


def uubar_twirl_haar(x: np.ndarray, d: int | None = None) -> np.ndarray:
    """φ⁺·Tr[φ⁺X] + Π⁻·Tr[Π⁻X]/(d²−1)."""
    x = np.asarray(x, dtype=complex)
    d = d or int(round(math.sqrt(x.shape[0])))
    if d < 2 or x.shape != (d * d, d * d):
        raise DesignError(f"uubar_twirl_haar: bad shape {x.shape} for d={d}", field="x")
    v    = phi_plus_vector(d)
    phi  = np.outer(v, v.conj())
    pim  = pi_minus(d)
    return phi * np.trace(phi @ x) + pim * np.trace(pim @ x) / (d * d - 1)


def channel_twirl(ensemble: UnitaryEnsemble | None, channel: QuantumChannel) -> QuantumChannel:
    """Channel whose Choi matrix is the U-Ū twirl of η_Λ (Haar twirl when ensemble is None)."""
    d = channel.in_dim
    if channel.out_dim != d or (ensemble is not None and ensemble.dim != d):
        raise DesignError(f"channel_twirl needs a channel on the design dimension, got {channel}")
    if not channel.is_cp:
        raise DesignError(f"channel_twirl input {channel.name or channel} is not CP")
    eta  = channel.choi
    choi = uubar_twirl_haar(eta, d) if ensemble is None else uubar_twirl(ensemble, eta)
    name = f"twirl[{'haar' if ensemble is None else 'D'}]({channel.name})"
    return QuantumChannel(channel.in_layout, channel.out_layout, choi=choi, name=name, validate=False)


# ── Twirl channels ─────────────────────────────────────────────────────────────

def _twirl_layout(d: int, label: str = "S"):
    return [(label, d)]


def _weighted_choi(ops: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Σ w |O⟩⟩⟨⟨O| / D, the Choi matrix of X ↦ Σ w O X O†."""
    dim  = ops.shape[2]
    acc  = None
    for lo in range(0, len(ops), _TWIRL_CHUNK):
        blk = ops[lo: lo + _TWIRL_CHUNK]
        v   = blk.reshape(len(blk), -1)
        w   = weights[lo: lo + _TWIRL_CHUNK]
        part = (v.T * w) @ v.conj()
        acc = part if acc is None else acc + part
    return acc / dim


def haar_twirl_choi(d: int, t: int) -> np.ndarray:
    if t == 1:
        return np.eye(d * d, dtype=complex) / (d * d)
    if t == 2:
        v = phi_plus_vector(d * d)
        return haar_2twirl(np.outer(v, v.conj()), d)
    raise DesignError(f"Haar twirls are implemented for t ≤ 2, got t={t}", field="t")


def haar_uubar_choi(d: int) -> np.ndarray:
    """Choi matrix of X ↦ φ⁺Tr[φ⁺X] + Π⁻Tr[Π⁻X]/(d²−1), i.e. (φ⁺⊗φ̄⁺ + Π⁻⊗Π̄⁻/(d²−1))/d²."""
    v   = phi_plus_vector(d)
    phi = np.outer(v, v.conj())
    pim = pi_minus(d)
    return (np.kron(phi, phi.conj()) + np.kron(pim, pim.conj()) / (d * d - 1)) / (d * d)


# ── Deficiency ─────────────────────────────────────────────────────────────────

class DeficiencyBounds(NamedTuple):
    lower:  float
    upper:  float
    notion: str
    probes: int = 0


def design_deficiency(ensemble: UnitaryEnsemble, notion: str = "t-design", t: int = 2) -> DeficiencyBounds:
    """
    Two-sided bounds on the ensemble's δ for one design notion.

    t-design:      diamond bounds between empirical and Haar t-twirl channels (t ≤ 2).
    uubar:         same for the U-Ū twirl channel on d² dims.
    channel-twirl: lower bound maximized over the probe battery (all Paulis
                   plus PROBE_RANDOM_CHANNELS seeded random channels); upper
                   bound d times the U-Ū upper bound.
    """
    if notion not in NOTIONS:
        raise DesignError(f"unknown design notion {notion!r}", field="notion")
    if notion == "t-design" and t not in (1, 2):
        raise DesignError(f"deficiency is implemented for t ≤ 2, got t={t}", field="t")
    key = (ensemble.digest(), notion, t if notion == "t-design" else 0)
    return default_cache.get_or_compute("deficiency", key, lambda: _deficiency(ensemble, notion, t))


def _deficiency(ensemble: UnitaryEnsemble, notion: str, t: int) -> DeficiencyBounds:
    d = ensemble.dim
    if notion == "t-design":
        dt   = d ** t
        emp  = _weighted_choi(_tensor_power(ensemble.elements, t), ensemble.weights)
        lay  = _twirl_layout(dt)
        a    = QuantumChannel(lay, lay, choi=emp, name=f"twirl{t}[D]", validate=False)
        b    = QuantumChannel(lay, lay, choi=haar_twirl_choi(d, t), name=f"twirl{t}[haar]", validate=False)
        lo, hi, _ = diamond_distance_bounds(a, b)
        log.info(f"deficiency t={t} of {ensemble}: [{lo:.3e}, {hi:.3e}]")
        return DeficiencyBounds(lo, hi, f"t-design({t})")

    uubar = _uubar_bounds(ensemble)
    if notion == "uubar":
        return DeficiencyBounds(uubar[0], uubar[1], "uubar")

    lower, probes = 0.0, 0
    for probe in probe_battery(d):
        emp = channel_twirl(ensemble, probe)
        ref = channel_twirl(None, probe)
        lower = max(lower, diamond_distance_bounds(emp, ref).lower)
        probes += 1
    log.info(f"channel-twirl deficiency of {ensemble}: lower {lower:.3e} over {probes} probes")
    return DeficiencyBounds(lower, d * uubar[1], "channel-twirl", probes)


def _uubar_bounds(ensemble: UnitaryEnsemble) -> tuple[float, float]:
    d   = ensemble.dim
    u   = ensemble.elements
    ops = np.einsum("kab,kcd->kacbd", u, u.conj()).reshape(len(u), d * d, d * d)
    lay = _twirl_layout(d * d)
    a   = QuantumChannel(lay, lay, choi=_weighted_choi(ops, ensemble.weights), name="uubar[D]", validate=False)
    b   = QuantumChannel(lay, lay, choi=haar_uubar_choi(d), name="uubar[haar]", validate=False)
    lo, hi, _ = diamond_distance_bounds(a, b)
    return lo, hi


def probe_battery(d: int) -> list[QuantumChannel]:
    """Unitary Pauli channels (when d is a power of two) then seeded random channels."""
    layout = [("S", d)]
    probes: list[QuantumChannel] = []
    n = int(round(math.log2(d)))
    if 2 ** n == d:
        labels, mats = pauli_matrices(n)
        probes += [QuantumChannel(layout, layout, kraus=p, name=f"pauli:{l}") for l, p in zip(labels, mats)]
    rng = make_rng(PROBE_SEED)
    probes += [random_channel(layout, layout, rng, name=f"random:{i}") for i in range(PROBE_RANDOM_CHANNELS)]
    return probes


# ── JSON codec ─────────────────────────────────────────────────────────────────

def ensemble_to_json(ensemble: UnitaryEnsemble) -> EnsembleDocument:
    return {
        "schema":     SCHEMA,
        "kind":       "ensemble",
        "dim":        ensemble.dim,
        "provenance": dict(ensemble.provenance),
        "weights":    [float(w) for w in ensemble.weights],
        "elements":   [encode_matrix(u) for u in ensemble.elements],
    }


def ensemble_from_json(doc: EnsembleDocument) -> UnitaryEnsemble:
    if doc.get("kind") != "ensemble":
        raise DesignError(f"not an ensemble document (kind={doc.get('kind')!r})", field="kind")
    elements = np.array([decode_matrix(u) for u in doc["elements"]])
    return UnitaryEnsemble(elements, doc.get("weights"), doc.get("provenance"))


def deficiency_report(ensemble: UnitaryEnsemble, notion: str, t: int = 2) -> DeficiencyReport:
    b = design_deficiency(ensemble, notion, t)
    return {"notion": b.notion, "lower": b.lower, "upper": b.upper, "probes": b.probes}
