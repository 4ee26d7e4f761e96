"""
QNMTypes — TypedDicts for every JSON document qnmlab reads or writes.

Provides IDE autocompletion and type checking for serialized channels,
ensembles, schemes, deficiency reports and CLI verdicts.

Usage:
    from QNMTypes import VerdictRecord, CheckRecord, REG_CIPHERTEXT

    record: VerdictRecord = run_experiment(cfg)
    print(record["pass"], record["checks"][0]["measured"])

Complex matrices are stored row-major as nested lists of [re, im] pairs.
Every top-level document carries "schema": "qnmlab/1".

Optional fields are marked with NotRequired. runtime_ms only appears when
the experiment config sets record_timing = true, so default verdict files
are byte-identical across runs.
"""

from typing import NotRequired, TypedDict


# ── Register labels ────────────────────────────────────────────────────────────
#
# Scenario layouts always use these names. Decrypt outputs live on REG_PLAINTEXT
# with one extra basis direction (the reject symbol ⊥) appended, split into the
# blocks BLOCK_ACCEPT and BLOCK_REJECT.

REG_PLAINTEXT   = "A"
REG_CIPHERTEXT  = "C"
REG_SIDE        = "B"
REG_SIDE_OUT    = "Bt"    # B̃, the adversary's side information after the attack
REG_REFERENCE   = "R"
REG_ENV         = "E"

BLOCK_ACCEPT    = "acc"
BLOCK_REJECT    = "rej"
BLOCK_CIPHER    = "cipher"   # C block of an injection ciphertext C ⊕ Â
BLOCK_INJECTED  = "injected" # Â block

# ── Enumerations ───────────────────────────────────────────────────────────────

REPRESENTATIONS = ("kraus", "choi")
SCHEME_KINDS    = ("qotp", "clifford", "sampled_clifford", "tagged", "injection", "werner_holevo", "identity")
RELATIONS       = ("<=", ">=")


# ── Channels & ensembles ───────────────────────────────────────────────────────

class ChannelDocument(TypedDict):
    """Serialized QuantumChannel. Exactly one of kraus / choi is present."""
    schema:         str
    kind:           str                 # always "channel"
    name:           str
    in_layout:      list[list]          # [[label, dim], ...]
    out_layout:     list[list]
    representation: str                 # "kraus" | "choi"
    kraus:          NotRequired[list]   # list of matrices
    choi:           NotRequired[list]   # one matrix in (out, in') order


class EnsembleDocument(TypedDict):
    schema:     str
    kind:       str                     # always "ensemble"
    dim:        int
    provenance: dict                    # {"kind": "enumerated"|"sampled"|"circuit", ...}
    weights:    list[float]
    elements:   list


class DeficiencyReport(TypedDict):
    notion: str                         # "t-design(2)", "uubar", "channel-twirl"
    lower:  float
    upper:  float
    probes: int                         # channel-twirl battery size, 0 otherwise


# ── Schemes ────────────────────────────────────────────────────────────────────

class SchemeDocument(TypedDict):
    """
    Compact scheme reference. Large schemes are rebuilt from the descriptor
    (e.g. {"kind": "clifford", "n": 2}) instead of storing 11520 channels.
    """
    schema:         str
    kind:           str                 # always "scheme"
    descriptor:     dict                # see SCHEME_KINDS
    plaintext_dim:  int
    ciphertext_dim: int
    keys:           int
    unitary:        bool
    key_weights:    NotRequired[list[float]]   # only for non-uniform schemes


# ── CLI verdicts ───────────────────────────────────────────────────────────────

# One measured-vs-bound comparison inside a verdict. "pass" is a Python keyword,
# so records carrying it use the functional form.
CheckRecord = TypedDict("CheckRecord", {
    "name":     str,
    "measured": float,
    "bound":    float,
    "relation": str,                    # "<=" or ">="
    "slack":    float,
    "pass":     bool,
})


# One JSON line of `qnmlab run` output. pass is true iff every check passes:
# measured ≤ bound + slack for "<=" checks, measured ≥ bound − slack for ">=".
VerdictRecord = TypedDict("VerdictRecord", {
    "schema":        str,
    "experiment":    str,
    "inputs_digest": str,               # sha256 of the canonical resolved config
    "checks":        list[CheckRecord],
    "measured":      dict[str, float],
    "bounds":        dict[str, float],
    "slack":         float,
    "pass":          bool,
    "notes":         NotRequired[dict],
    "runtime_ms":    NotRequired[float],
})
