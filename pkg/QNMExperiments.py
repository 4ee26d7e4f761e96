"""
QNMExperiments — the named experiments behind `qnmlab run`.

Each experiment reproduces one security claim at fixed small dimensions and
emits a VerdictRecord: a list of measured-vs-bound checks, each with a
relation ("<=" or ">=") and a slack, plus free-form notes.

Usage:
    from QNMExperiments import load_configs, run_all, write_verdicts

    configs = load_configs("experiments.json")
    records = run_all(configs, parallel=2)
    write_verdicts(records, sys.stdout)

Config documents are JSON (or TOML when the file ends in .toml):

    {"experiment": "nm-2design", "seed": 7, "states": {"count": 10, "b": 2}}
    {"experiments": [{...}, {...}], "seed": 7}     # shared keys apply to all

Unknown keys raise ConfigError naming the key. QNMLAB_SEED overrides every
config's seed. Output is byte-identical for the same config and seed unless
record_timing is set.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import time
import tomllib
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import IO, Any, Callable, NamedTuple

import numpy as np

from QNMAuth import (
    default_pure,
    dns_residual,
    gyz_implies_dns_check,
    gyz_keywise,
    gyz_residual,
    near_identity_attack,
)
from QNMBatch import QNMBatch
from QNMChannels import (
    apply_matrix,
    combine_channels,
    diamond_distance_bounds,
    mirror_residual,
    random_channel,
)
from QNMCore import (
    DensityOperator,
    binary_entropy,
    fannes_bound,
    holder_check,
    make_rng,
    max_entangled,
    mutual_information,
    norm_1_2_check,
    pinsker_gap,
    random_density,
    random_pure,
    random_pure_vector,
    shannon_entropy,
    swap_trick_check,
    trace_norm,
    von_neumann_entropy,
)
from QNMDesigns import (
    UnitaryEnsemble,
    clifford_group,
    design_deficiency,
    haar_2twirl,
    pauli_group,
    t_twirl,
)
from QNMExceptions import (
    ConfigError,
    IncompatibleScenarioError,
    SchemeError,
    UnknownExperimentError,
)
from QNMSchemes import EncryptionScheme, identity_scheme, scheme_from_descriptor, werner_holevo_map
from QNMSecurity import (
    AttackScenario,
    abw_residual,
    attack_components,
    characterization_residual,
    converse_tolerance,
    design_gap,
    dp_tensor_check,
    evaluate,
    its_check,
    its_ind_relation,
    ind_distance,
    injection_attack,
    library_attacks,
    make_attack,
    offdiagonal_lemma_residual,
    pauli_attack,
    pauli_coin_attack,
    coin_flip_attack,
    coin_mixture_attack,
    random_channel_attack,
    random_isometry_attack,
    secrecy_attack_from_nm,
    state_battery,
)
from QNMTypes import REG_PLAINTEXT, REG_SIDE, RELATIONS, CheckRecord, VerdictRecord
from qnm_config import LIBRARY_VERSION, SCHEMA, seed_override

log = logging.getLogger("qnmlab.experiments")

A, B = REG_PLAINTEXT, REG_SIDE

SEED_LIMIT   = 2 ** 64
STATE_KEYS   = ("count", "b", "r")
SIG_DIGITS   = 12


# ── Config ─────────────────────────────────────────────────────────────────────

@dataclass
class ExperimentConfig:
    """
    One experiment request as read from a config file.

    Args:
        experiment:    registered experiment name (see `qnmlab list`).
        seed:          64-bit seed; required by experiments that sample.
        scheme:        scheme descriptor overriding the experiment's default.
        attacks:       attack names or {"name": ..., "params": {...}} entries;
                       None means the full library for the scheme.
        states:        {"count": int, "b": int, "r": int} for the state battery.
        tolerances:    slack overrides keyed by the experiment's tolerance names.
        params:        experiment parameters (see `qnmlab describe`).
        output:        JSON-lines output path (stdout when None).
        record_timing: add runtime_ms to the verdict (breaks byte-identity).
    """

    experiment:    str
    seed:          int | None = None
    scheme:        dict | None = None
    attacks:       list | None = None
    states:        dict = field(default_factory=dict)
    tolerances:    dict = field(default_factory=dict)
    params:        dict = field(default_factory=dict)
    output:        str | None = None
    record_timing: bool = False

    @classmethod
    def from_dict(cls, doc: Any) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError(f"experiment config must be an object, got {type(doc).__name__}", field="experiment")
        known = {f.name for f in fields(cls)}
        for key in doc:
            if key not in known:
                raise ConfigError(f"unknown config field {key!r}", field=key)
        if "experiment" not in doc:
            raise ConfigError("config is missing 'experiment'", field="experiment")
        cfg = cls(**doc)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not isinstance(self.experiment, str) or not self.experiment:
            raise ConfigError("experiment must be a non-empty string", field="experiment")
        if self.seed is not None:
            if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < SEED_LIMIT:
                raise ConfigError(f"seed must be an integer in [0, 2^64), got {self.seed!r}", field="seed")
        if self.scheme is not None and not isinstance(self.scheme, dict):
            raise ConfigError("scheme must be a descriptor object", field="scheme")
        if self.attacks is not None:
            if not isinstance(self.attacks, list):
                raise ConfigError("attacks must be a list", field="attacks")
            for entry in self.attacks:
                name = entry.get("name") if isinstance(entry, dict) else entry
                if not isinstance(name, str):
                    raise ConfigError(f"bad attack entry {entry!r}", field="attacks")
                if isinstance(entry, dict) and not isinstance(entry.get("params", {}), dict):
                    raise ConfigError(f"attack {name!r} params must be an object", field="attacks")
        if not isinstance(self.states, dict):
            raise ConfigError("states must be an object", field="states")
        for key, value in self.states.items():
            if key not in STATE_KEYS:
                raise ConfigError(f"unknown states field {key!r}", field=f"states.{key}")
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ConfigError(f"states.{key} must be a positive integer", field=f"states.{key}")
        if not isinstance(self.tolerances, dict):
            raise ConfigError("tolerances must be an object", field="tolerances")
        for key, value in self.tolerances.items():
            if isinstance(value, bool) or not isinstance(value, (int, float)) or value < 0:
                raise ConfigError(f"tolerance {key!r} must be a non-negative number", field=f"tolerances.{key}")
        if not isinstance(self.params, dict):
            raise ConfigError("params must be an object", field="params")
        if self.output is not None and not isinstance(self.output, str):
            raise ConfigError("output must be a path string", field="output")
        if not isinstance(self.record_timing, bool):
            raise ConfigError("record_timing must be true or false", field="record_timing")

    def to_dict(self) -> dict:
        return asdict(self)


def parse_configs(doc: Any) -> list[ExperimentConfig]:
    """A single config object, a list of them, or {"experiments": [...], <shared keys>}."""
    if isinstance(doc, list):
        return [ExperimentConfig.from_dict(item) for item in doc]
    if isinstance(doc, dict) and "experiments" in doc:
        items  = doc["experiments"]
        shared = {k: v for k, v in doc.items() if k != "experiments"}
        if not isinstance(items, list) or not items:
            raise ConfigError("experiments must be a non-empty list", field="experiments")
        if "experiment" in shared:
            raise ConfigError("'experiment' cannot be shared across experiments", field="experiment")
        return [ExperimentConfig.from_dict({**shared, **item}) if isinstance(item, dict)
                else ExperimentConfig.from_dict(item) for item in items]
    return [ExperimentConfig.from_dict(doc)]


def load_configs(path) -> list[ExperimentConfig]:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {p}: {e.strerror}", field="config") from None
    try:
        doc = tomllib.loads(text) if p.suffix == ".toml" else json.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"{p} does not parse: {e}", field="config") from None
    configs = parse_configs(doc)
    log.info(f"loaded {len(configs)} experiment config(s) from {p}")
    return configs


# ── Registry ───────────────────────────────────────────────────────────────────

class Experiment(NamedTuple):
    name:       str
    claim:      str
    run:        Callable[["Verdict"], None]
    scheme:     dict | None
    states:     dict
    params:     dict
    tolerances: dict
    sampled:    bool


EXPERIMENTS: dict[str, Experiment] = {}


def experiment(
    name: str,
    claim: str,
    *,
    scheme: dict | None = None,
    states: dict | None = None,
    params: dict | None = None,
    tolerances: dict | None = None,
    sampled: bool = True,
):
    """Register the decorated function as experiment `name`."""
    def register(fn: Callable[["Verdict"], None]) -> Callable[["Verdict"], None]:
        EXPERIMENTS[name] = Experiment(
            name, claim, fn, scheme, dict(states or {}), dict(params or {}),
            {"slack": 1e-9, **(tolerances or {})}, sampled,
        )
        return fn
    return register


def get_experiment(name: str) -> Experiment:
    try:
        return EXPERIMENTS[name]
    except KeyError:
        raise UnknownExperimentError(
            f"unknown experiment {name!r}; known: {', '.join(sorted(EXPERIMENTS))}", field="experiment",
        ) from None


def describe(name: str) -> dict:
    exp = get_experiment(name)
    return {
        "experiment": exp.name,
        "claim":      exp.claim,
        "scheme":     exp.scheme,
        "states":     exp.states,
        "params":     exp.params,
        "tolerances": exp.tolerances,
        "seeded":     exp.sampled,
    }


# ── Resolution ─────────────────────────────────────────────────────────────────

class ResolvedExperiment(NamedTuple):
    experiment:    Experiment
    seed:          int | None
    scheme:        dict | None
    attacks:       list | None
    states:        dict
    tolerances:    dict
    params:        dict
    output:        str | None
    record_timing: bool
    digest:        str


def _merge(defaults: dict, given: dict, section: str) -> dict:
    merged = dict(defaults)
    for key, value in given.items():
        if key not in defaults:
            raise ConfigError(f"unknown {section} key {key!r}", field=f"{section}.{key}")
        ref = defaults[key]
        if isinstance(ref, bool) and not isinstance(value, bool):
            raise ConfigError(f"{section}.{key} must be true or false", field=f"{section}.{key}")
        if isinstance(ref, (int, float)) and not isinstance(ref, bool):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{section}.{key} must be a number", field=f"{section}.{key}")
            if isinstance(ref, int) and not isinstance(value, int):
                raise ConfigError(f"{section}.{key} must be an integer", field=f"{section}.{key}")
        if isinstance(ref, list):
            kind = type(ref[0]) if ref else object
            if not isinstance(value, list) or not all(isinstance(v, kind) for v in value):
                raise ConfigError(f"{section}.{key} must be a list like {ref!r}", field=f"{section}.{key}")
        merged[key] = value
    return merged


def canonical_digest(doc: dict) -> str:
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(text.encode()).hexdigest()


def resolve(cfg: ExperimentConfig) -> ResolvedExperiment:
    """Defaults merged, seed override applied, inputs digest computed."""
    exp  = get_experiment(cfg.experiment)
    seed = cfg.seed
    override = seed_override()
    if override is not None:
        if not 0 <= override < SEED_LIMIT:
            raise ConfigError(f"QNMLAB_SEED out of range: {override}", field="QNMLAB_SEED")
        seed = override
    if seed is None and exp.sampled:
        raise ConfigError(f"experiment {exp.name!r} samples random objects and needs a seed", field="seed")

    states     = {**exp.states, **cfg.states}
    tolerances = _merge(exp.tolerances, cfg.tolerances, "tolerances")
    params     = _merge(exp.params, cfg.params, "params")
    scheme     = cfg.scheme if cfg.scheme is not None else exp.scheme
    canonical  = {
        "schema":     SCHEMA,
        "library":    LIBRARY_VERSION,
        "experiment": exp.name,
        "seed":       seed,
        "scheme":     scheme,
        "attacks":    cfg.attacks,
        "states":     states,
        "tolerances": tolerances,
        "params":     params,
    }
    return ResolvedExperiment(
        exp, seed, scheme, cfg.attacks, states, tolerances, params,
        cfg.output, cfg.record_timing, canonical_digest(canonical),
    )


# ── Verdict builder ────────────────────────────────────────────────────────────

def _num(x) -> float | None:
    """Round to SIG_DIGITS significant digits; non-finite values become null."""
    x = float(np.real(x))
    if not math.isfinite(x):
        return None
    return float(f"{x:.{SIG_DIGITS}g}")


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating, complex, np.complexfloating)):
        return _num(value)
    return value


class Verdict:
    """
    Check accumulator handed to every experiment function.

    Experiments read their inputs from here (seed, params, states, scheme,
    attacks) and record checks and notes; to_record() assembles the
    VerdictRecord.
    """

    def __init__(self, resolved: ResolvedExperiment):
        self.resolved = resolved
        self.seed     = resolved.seed if resolved.seed is not None else 0
        self.params   = resolved.params
        self.states   = resolved.states
        self.checks:  list[CheckRecord] = []
        self.notes:   dict[str, Any] = {}

    # ── Inputs ─────────────────────────────────────────────────────────────────

    def tol(self, name: str = "slack") -> float:
        return float(self.resolved.tolerances[name])

    def rng(self, stream: int = 0) -> np.random.Generator:
        """Independent seeded stream per use site."""
        return make_rng([self.seed, stream])

    def scheme(self) -> EncryptionScheme:
        desc = self.resolved.scheme
        if desc is None:
            raise ConfigError(f"experiment {self.resolved.experiment.name!r} needs a scheme", field="scheme")
        return build_scheme(desc)

    def attacks(self, scheme: EncryptionScheme, b: int = 1, exclude=(), random_count: int = 2):
        """Configured attacks, or the library's compatible attacks when none are configured."""
        entries = self.resolved.attacks
        if entries is None:
            found = library_attacks(scheme, b, random_count=random_count, seed=self.seed)
            return [atk for atk in found if atk.name.split(":")[0] not in exclude]
        out = []
        for entry in entries:
            name, params = (entry["name"], entry.get("params", {})) if isinstance(entry, dict) else (entry, {})
            params = {"seed": self.seed, **params} if name.startswith("random_") else params
            out.append(make_attack(name, scheme, b=b, **params))
        return out

    def battery(self, a: int, b: int | None = None) -> list[DensityOperator]:
        b = b or self.states.get("b", 1)
        return state_battery(a, b, self.states.get("r"), count=self.states.get("count", 10), seed=self.seed)

    # ── Recording ──────────────────────────────────────────────────────────────

    def check(self, name: str, measured: float, bound: float, relation: str = "<=", slack: float | None = None) -> bool:
        if relation not in RELATIONS:
            raise ValueError(f"unknown relation {relation!r}")
        slack = self.tol() if slack is None else float(slack)
        m, b = float(np.real(measured)), float(np.real(bound))
        ok = m <= b + slack if relation == "<=" else m >= b - slack
        ok = bool(ok) and math.isfinite(m)
        self.checks.append({
            "name":     name,
            "measured": _num(m),
            "bound":    _num(b),
            "relation": relation,
            "slack":    _num(slack),
            "pass":     ok,
        })
        if not ok:
            log.warning(f"{self.resolved.experiment.name}: check {name!r} failed ({m:.6g} {relation} {b:.6g} ± {slack:g})")
        return ok

    def note(self, key: str, value: Any) -> None:
        self.notes[key] = value

    def to_record(self, runtime_ms: float | None = None) -> VerdictRecord:
        record: VerdictRecord = {
            "schema":        SCHEMA,
            "experiment":    self.resolved.experiment.name,
            "inputs_digest": self.resolved.digest,
            "checks":        self.checks,
            "measured":      {c["name"]: c["measured"] for c in self.checks},
            "bounds":        {c["name"]: c["bound"] for c in self.checks},
            "slack":         _num(self.tol()),
            "pass":          bool(self.checks) and all(c["pass"] for c in self.checks),
        }
        if self.notes:
            record["notes"] = _jsonable(self.notes)
        if runtime_ms is not None:
            record["runtime_ms"] = round(runtime_ms, 3)
        return record


def build_scheme(desc: dict) -> EncryptionScheme:
    """scheme_from_descriptor with descriptor problems reported as config errors."""
    try:
        return scheme_from_descriptor(desc)
    except SchemeError as e:
        field_name = f"scheme.{e.field}" if e.field else "scheme"
        raise ConfigError(f"bad scheme descriptor: {e.message}", field=field_name) from None


def _ensemble(scheme: EncryptionScheme) -> UnitaryEnsemble:
    if not scheme.unitary:
        raise IncompatibleScenarioError(f"{scheme.name} is not a unitary scheme", field="scheme")
    return UnitaryEnsemble(scheme.isometries, scheme.key_weights, provenance=scheme.descriptor, validate=False)


def _require_qubits(scheme: EncryptionScheme, what: str) -> None:
    n = int(round(math.log2(scheme.a)))
    if 2 ** n != scheme.a:
        raise IncompatibleScenarioError(f"{what} needs a qubit plaintext, got |A| = {scheme.a}", field="scheme")


# ── Running ────────────────────────────────────────────────────────────────────

def run_experiment(cfg: ExperimentConfig | ResolvedExperiment) -> VerdictRecord:
    resolved = cfg if isinstance(cfg, ResolvedExperiment) else resolve(cfg)
    exp      = resolved.experiment
    verdict  = Verdict(resolved)
    log.info(f"running {exp.name} (seed={resolved.seed}, digest={resolved.digest[:12]})")
    start = time.perf_counter()
    exp.run(verdict)
    elapsed = (time.perf_counter() - start) * 1000.0
    record = verdict.to_record(elapsed if resolved.record_timing else None)
    log.info(f"{exp.name}: {'pass' if record['pass'] else 'FAIL'} ({len(record['checks'])} checks, {elapsed:.0f} ms)")
    return record


def run_all(configs: list[ExperimentConfig], parallel: int = 1) -> list[VerdictRecord]:
    """
    Resolve every config first (so config errors surface before any work),
    run them with at most `parallel` at once, and return the records ordered
    by experiment name, then config order.
    """
    resolved = [resolve(cfg) for cfg in configs]
    if parallel <= 1 or len(resolved) == 1:
        records = [run_experiment(r) for r in resolved]
    else:
        batch = QNMBatch(parallel=parallel)
        for i, r in enumerate(resolved):
            batch.experiment(f"{i:04d}:{r.experiment.name}", r)
        result = batch.run_sync()
        result.raise_first()
        records = result.values()
    order = sorted(range(len(records)), key=lambda i: (records[i]["experiment"], i))
    return [records[i] for i in order]


def write_verdicts(records: list[VerdictRecord], stream: IO[str]) -> None:
    for record in records:
        stream.write(json.dumps(record, sort_keys=True, ensure_ascii=False, allow_nan=False) + "\n")


# ── Secrecy ────────────────────────────────────────────────────────────────────

@experiment(
    "secrecy-1design",
    "A unitary scheme hides the plaintext (I(C:B) = 0 on every input) iff its keys form a 1-design; "
    "a single-key scheme leaks 2·log|A| bits on φ⁺.",
    scheme={"kind": "qotp", "n": 1},
    states={"count": 10},
    tolerances={"slack": 1e-10, "single_key": 1e-9},
)
def _secrecy_1design(v: Verdict) -> None:
    scheme = v.scheme()
    a      = scheme.a
    rng    = v.rng(1)
    inputs = [max_entangled(a, (A, B))]
    inputs += [random_pure([(A, a), (B, a)], rng) for _ in range(v.states["count"] - 1)]
    leaks  = [its_check(scheme, rho) for rho in inputs]
    v.check("max I(C:B)", max(leaks), 0.0)
    if scheme.unitary:
        v.check("1-design deficiency", design_deficiency(_ensemble(scheme), "t-design", 1).upper, 0.0)

    single = its_check(identity_scheme(a), inputs[0])
    v.check("single-key I(C:B) on φ⁺ (upper)", single, 2 * math.log2(a), "<=", v.tol("single_key"))
    v.check("single-key I(C:B) on φ⁺ (lower)", single, 2 * math.log2(a), ">=", v.tol("single_key"))
    v.note("inputs", len(inputs))


@experiment(
    "its-iff-ind",
    "ε-ITS implies 4√(2ε)-IND on every pair, and ε-IND implies (4h(ε)+6ε·log|A|)-ITS.",
    scheme={"kind": "qotp", "n": 1},
    params={"pairs": 20},
    tolerances={"slack": 1e-9},
)
def _its_iff_ind(v: Verdict) -> None:
    scheme = v.scheme()
    rng    = v.rng(1)
    for label, sch in (("scheme", scheme), ("single-key", identity_scheme(scheme.a))):
        pairs = [(random_pure([(A, sch.a)], rng), random_pure([(A, sch.a)], rng)) for _ in range(v.params["pairs"])]
        rep   = its_ind_relation(sch, pairs)
        v.check(f"{label}: max IND − 4√(2·ITS)", max(p.ind - p.bound for p in rep.pairs), 0.0)
        v.check(f"{label}: ITS on φ⁺ within IND-derived bound", rep.its, rep.its_bound)
        v.note(f"{label}_ind_bound", rep.ind_bound)
        v.note(f"{label}_max_ind", max(p.ind for p in rep.pairs))


@experiment(
    "nm-implies-its",
    "Non-malleability implies secrecy: the ciphertext-extraction attack has p₌ = 0 and turns any "
    "leak into an NM gain.",
    scheme={"kind": "clifford", "n": 1},
    params={"random_attacks": 2},
    tolerances={"slack": 1e-9, "p_eq": 1e-12, "marginal": 1e-9},
    sampled=False,
)
def _nm_implies_its(v: Verdict) -> None:
    scheme = v.scheme()
    scen   = secrecy_attack_from_nm(scheme)
    v.check("extraction p_eq", scen.notes["p_eq"], 0.0, slack=v.tol("p_eq"))
    v.check("extraction marginal residual", scen.notes["marginal_residual"], 0.0, slack=v.tol("marginal"))
    v.check("extraction is CPTP", float(scen.notes["cptp"]), 1.0, ">=", 0.0)

    gains = {atk.name: evaluate(AttackScenario(scheme, atk)).nm_gain
             for atk in v.attacks(scheme, 1, random_count=v.params["random_attacks"])}
    leak  = its_check(scheme, max_entangled(scheme.a, (A, B)))
    v.check("I(C:B) within 2·max NM gain", leak, 2 * max(max(gains.values()), 0.0))
    v.note("nm_gains", gains)


# ── Non-malleability ───────────────────────────────────────────────────────────

@experiment(
    "nm-2design",
    "A unitary scheme is non-malleable iff its keys form a unitary 2-design: every attack in the library "
    "has NM gain ≤ 0 and the effective channel matches the characterization.",
    scheme={"kind": "clifford", "n": 1},
    states={"count": 10, "b": 2},
    params={"random_attacks": 2},
    tolerances={"slack": 1e-9, "tp": 1e-10},
)
def _nm_2design(v: Verdict) -> None:
    scheme = v.scheme()
    b      = v.states["b"]
    states = v.battery(scheme.a, b)
    r      = states[-1].layout.dim_of("R")
    attacks = v.attacks(scheme, b, random_count=v.params["random_attacks"])
    if not attacks:
        raise IncompatibleScenarioError(f"no library attack fits {scheme.name} with |B| = {b}", field="attacks")

    worst_gain, worst_upper, worst_tp, worst_converse = -math.inf, 0.0, 0.0, -math.inf
    p_lo, p_hi = 1.0, 0.0
    per_attack = {}
    for attack in attacks:
        upper = characterization_residual(AttackScenario(scheme, attack, states[0])).upper
        prime, dprime = attack_components(attack)
        split_tp = combine_channels([(1.0, prime), (1.0, dprime)]).tp_defect()
        gains = []
        for rho in states:
            report = evaluate(AttackScenario(scheme, attack, rho))
            gains.append(report.nm_gain)
            p_lo, p_hi = min(p_lo, report.p_eq), max(p_hi, report.p_eq)
            worst_tp = max(worst_tp, report.effective.tp_defect(), split_tp)
            allowed = converse_tolerance(upper, scheme.a, math.log2(rho.layout.dim_of("R")))
            worst_converse = max(worst_converse, report.nm_gain - allowed)
        worst_gain  = max(worst_gain, max(gains))
        worst_upper = max(worst_upper, upper)
        per_attack[attack.name] = {"max_gain": max(gains), "residual_upper": upper}

    v.check("max NM gain", worst_gain, 0.0)
    v.check("max characterization residual (upper)", worst_upper, 0.0)
    v.check("max NM gain − converse tolerance", worst_converse, 0.0)
    v.check("max TP defect", worst_tp, 0.0, slack=v.tol("tp"))
    v.check("min p_eq", p_lo, 0.0, ">=", v.tol("tp"))
    v.check("max p_eq", p_hi, 1.0, "<=", v.tol("tp"))
    v.note("attacks", per_attack)
    v.note("states", len(states))
    v.note("reference_dim", r)


@experiment(
    "characterization",
    "For a 2-design scheme the effective channel of any attack equals "
    "id⊗Λ′ + (|C|²⟨D_K(τ)⟩ − id)⊗Λ″/(|C|²−1); non-2-design schemes violate it.",
    scheme={"kind": "clifford", "n": 1},
    params={"random_attacks": 30, "contrast": True},
    tolerances={"slack": 1e-9, "tp": 1e-10, "qotp_gap": 1.0, "injection_gap": 0.5},
)
def _characterization(v: Verdict) -> None:
    scheme = v.scheme()
    count  = v.params["random_attacks"]
    if v.resolved.attacks is not None:
        attacks = v.attacks(scheme, 1)
    else:
        attacks = [
            (random_isometry_attack if i % 2 else random_channel_attack)(scheme, 1, seed=v.seed + i)
            for i in range(count)
        ]
    uppers, tp = [], 0.0
    for attack in attacks:
        uppers.append(characterization_residual(AttackScenario(scheme, attack)).upper)
        prime, dprime = attack_components(attack)
        tp = max(tp, combine_channels([(1.0, prime), (1.0, dprime)]).tp_defect())
    v.check("max characterization residual (upper)", max(uppers), 0.0)
    v.check("Λ′ + Λ″ TP defect", tp, 0.0, slack=v.tol("tp"))
    v.note("attacks", len(attacks))

    if not v.params["contrast"]:
        return
    qotp = build_scheme({"kind": "qotp", "n": 1})
    gap  = characterization_residual(AttackScenario(qotp, pauli_attack(qotp, 1))).lower
    v.check("QOTP with X: characterization violated (lower)", gap, v.tol("qotp_gap"), ">=", 0.0)
    inj  = build_scheme({"kind": "injection", "base": {"kind": "clifford", "n": 1}})
    gap  = characterization_residual(AttackScenario(inj, injection_attack(inj, 1))).lower
    v.check("injection scheme: characterization violated (lower)", gap, v.tol("injection_gap"), ">=", 0.0)


@experiment(
    "nm-implies-abw",
    "Every NM scheme is ABW-NM: the key-averaged effective map (side information traced out) lies in the "
    "span of the identity and replacement channels.",
    scheme={"kind": "clifford", "n": 1},
    params={"random_attacks": 2, "contrast": True},
    tolerances={"slack": 1e-8, "qotp_gap": 0.5},
)
def _nm_implies_abw(v: Verdict) -> None:
    scheme  = v.scheme()
    dist, excess, clip = 0.0, -math.inf, 0.0
    residuals = {}
    for attack in v.attacks(scheme, 1, random_count=v.params["random_attacks"]):
        scen = AttackScenario(scheme, attack)
        abw  = abw_residual(scen)
        up   = characterization_residual(scen).upper
        dist, clip = max(dist, abw.distance), max(clip, abw.clipping)
        excess = max(excess, abw.distance - up)
        residuals[attack.name] = abw.distance
    v.check("max ABW residual", dist, 0.0)
    v.check("max ABW residual − characterization residual", excess, 0.0)
    v.note("abw_residuals", residuals)
    v.note("max_clipping", clip)

    if v.params["contrast"]:
        qotp = build_scheme({"kind": "qotp", "n": 1})
        gap  = abw_residual(AttackScenario(qotp, pauli_attack(qotp, 1))).distance
        v.check("QOTP with X: ABW residual", gap, v.tol("qotp_gap"), ">=", 0.0)


@experiment(
    "injection-separation",
    "ABW-NM is strictly weaker than NM: on the injection scheme the injection attack gains "
    "2·log|A| − h(1/|C′|²) bits while the ABW residual vanishes.",
    scheme={"kind": "injection", "base": {"kind": "clifford", "n": 1}},
    tolerances={"slack": 1e-6, "gain_floor": 1e-3},
    sampled=False,
)
def _injection_separation(v: Verdict) -> None:
    scheme = v.scheme()
    scen   = AttackScenario(scheme, injection_attack(scheme, 1))
    report = evaluate(scen)
    expect = 2 * math.log2(scheme.a) - binary_entropy(1.0 / scheme.c ** 2)
    v.check("|NM gain − (2·log|A| − h(1/|C′|²))|", abs(report.nm_gain - expect), 0.0)
    v.check("NM gain (not non-malleable)", report.nm_gain, v.tol("gain_floor"), ">=", 0.0)
    v.check("ABW residual (ABW-NM holds)", abw_residual(scen).distance, 0.0)
    v.note("nm_gain", report.nm_gain)
    v.note("p_eq", report.p_eq)
    v.note("ledger", report.ledger.to_dict())


@experiment(
    "qotp-malleable",
    "The one-time pad is malleable: a coin-mixture attack gains information beyond h(p₌), and a Pauli coin "
    "gains a full bit; the Clifford scheme resists the same attack.",
    scheme={"kind": "qotp", "n": 1},
    tolerances={"slack": 1e-9, "oracle": 1e-3, "p_eq": 1e-10, "gain_floor": 5e-3},
    sampled=False,
)
def _qotp_malleable(v: Verdict) -> None:
    scheme = v.scheme()
    _require_qubits(scheme, "qotp-malleable")
    a2     = scheme.a ** 2
    report = evaluate(AttackScenario(scheme, coin_mixture_attack(scheme, 1)))
    oracle = shannon_entropy([0.5 + 0.5 / a2] + [0.5 / a2] * (a2 - 1)) - math.log2(scheme.a)
    after  = report.ledger.to_dict()["I(AR:Bt)"]
    v.check("coin mixture: |I(AR:Bt) − eigenvalue oracle|", abs(after - oracle), 0.0, slack=v.tol("oracle"))
    v.check("coin mixture: |p_eq − 1/(2|C|²)|", abs(report.p_eq - 0.5 / scheme.c ** 2), 0.0, slack=v.tol("p_eq"))
    v.check("coin mixture: NM gain", report.nm_gain, v.tol("gain_floor"), ">=", 0.0)

    coin = evaluate(AttackScenario(scheme, pauli_coin_attack(scheme, 1)))
    v.check("Pauli coin: NM gain", coin.nm_gain, 1.0, ">=")
    v.check("Pauli coin: p_eq", coin.p_eq, 0.0, slack=v.tol("p_eq"))

    flip = evaluate(AttackScenario(scheme, coin_flip_attack(scheme, 1)))
    v.check("coin flip: NM gain", flip.nm_gain, 0.0)

    cliff = build_scheme({"kind": "clifford", "n": int(round(math.log2(scheme.a)))})
    v.check("Clifford coin mixture: NM gain", evaluate(AttackScenario(cliff, coin_mixture_attack(cliff, 1))).nm_gain, 0.0)
    v.check("Clifford coin flip: NM gain", evaluate(AttackScenario(cliff, coin_flip_attack(cliff, 1))).nm_gain, 0.0)
    v.note("coin_mixture_ledger", report.ledger.to_dict())
    v.note("coin_mixture_p_eq", report.p_eq)
    v.note("coin_flip_gain", flip.nm_gain)


@experiment(
    "werner-holevo-sideinfo",
    "The Werner-Holevo channel is IND for product inputs (‖E(ρ−ρ′)‖₁ ≤ 2/(d−1)) yet leaks on entangled "
    "inputs (‖E⊗id(φ⁺) − τ⊗τ‖₁ ≥ 1); a coin-flip attack gains nothing beyond h(p₌).",
    scheme={"kind": "werner_holevo", "d": 2},
    params={"pairs": 200, "map_probes": 5},
    tolerances={"slack": 1e-9, "map": 1e-10},
)
def _werner_holevo(v: Verdict) -> None:
    scheme = v.scheme()
    d      = scheme.a
    rng    = v.rng(1)
    dist   = max(
        ind_distance(scheme, random_pure([(A, d)], rng), random_pure([(A, d)], rng))
        for _ in range(v.params["pairs"])
    )
    v.check("max ‖E_K(ρ − ρ′)‖₁ over product pairs", dist, 2.0 / (d - 1))

    e = scheme.avg_encrypt()
    worst = 0.0
    for _ in range(v.params["map_probes"]):
        x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        y = apply_matrix(e, x, scheme.plaintext_layout)[0]
        worst = max(worst, float(np.max(np.abs(y - werner_holevo_map(x)))))
    v.check("E_K vs (d·τ·Tr X − Xᵀ)/(d−1)", worst, 0.0, slack=v.tol("map"))

    phi = max_entangled(d, (A, B))
    out = apply_matrix(e, phi.matrix, phi.layout, [A])[0]
    tau = np.eye(d * d) / (d * d)
    v.check("‖E⊗id(φ⁺) − τ⊗τ‖₁", trace_norm(out - tau), 1.0, ">=")
    v.check("coin flip: NM gain", evaluate(AttackScenario(scheme, coin_flip_attack(scheme, 1))).nm_gain, 0.0)
    v.note("max_product_distance", dist)


# ── Authentication ─────────────────────────────────────────────────────────────

def _expected_pauli_accept(data_qubits: int, tag_qubits: int) -> float:
    """Fraction of non-identity Paulis a 2-design maps into data ⊗ {I,Z}^t."""
    return (4 ** data_qubits * 2 ** tag_qubits - 1) / (4 ** (data_qubits + tag_qubits) - 1)


@experiment(
    "gyz-2design",
    "Tagged 2-design schemes are GYZ-authenticating: mean-square keywise deviation ≤ 1/|T| + 3δ, "
    "the Markov bad-key fraction ≤ 1/α, and the total residual ≤ 4(1/|T| + 3δ)^{1/3}.",
    scheme={"kind": "tagged", "t": 1, "base": {"kind": "clifford", "n": 2}},
    params={
        "paulis":         ["XI", "IZ", "YY", "ZX"],
        "alphas":         [1.5, 2.0, 3.0, 5.0, 10.0],
        "sampled":        True,
        "sampled_n":      3,
        "sampled_t":      2,
        "sampled_keys":   2000,
        "random_attacks": 2,
    },
    tolerances={"slack": 1e-9, "exact": 1e-10},
)
def _gyz_2design(v: Verdict) -> None:
    scheme = v.scheme()
    if scheme.tag is None:
        raise IncompatibleScenarioError("gyz-2design needs a tagged scheme", field="scheme")
    t      = int(round(math.log2(scheme.tag.dim)))
    data   = int(round(math.log2(scheme.a)))
    expect = _expected_pauli_accept(data, t)
    psi    = default_pure(scheme.a)
    worst_gap, worst_mean = 0.0, 0.0
    for label in v.params["paulis"]:
        report = gyz_keywise(scheme, pauli_attack(scheme, 1, pauli=label), psi)
        mean   = report.mean_sq_deviation
        worst_gap  = max(worst_gap, abs(mean - expect))
        worst_mean = max(worst_mean, mean - report.bound)
        for alpha in v.params["alphas"]:
            v.check(f"{label}: Markov fraction at α={alpha:g}", report.bad_fraction(alpha), 1.0 / alpha)
        v.note(f"{label}_quantiles", report.quantiles())
    v.check("|mean-square deviation − Pauli acceptance|", worst_gap, 0.0, slack=v.tol("exact"))
    v.check("mean-square deviation − (1/|T| + 3δ)", worst_mean, 0.0)
    v.note("pauli_acceptance", expect)

    if not v.params["sampled"]:
        return
    sampled = build_scheme({
        "kind": "tagged",
        "t":    v.params["sampled_t"],
        "base": {"kind": "sampled_clifford", "n": v.params["sampled_n"], "keys": v.params["sampled_keys"],
                 "seed": v.seed},
    })
    rho     = state_battery(sampled.a, 1, count=1)[0]
    excess, residuals, delta = -math.inf, {}, None
    for attack in v.attacks(sampled, 1, random_count=v.params["random_attacks"]):
        res = gyz_residual(sampled, attack, rho, delta)
        delta = res.delta
        excess = max(excess, res.residual - res.bound)
        residuals[attack.name] = res.residual
    v.check("sampled: max GYZ residual − 4(1/|T| + 3δ̂)^{1/3}", excess, 0.0)
    v.note("sampled_delta_hat", delta)
    v.note("sampled_residuals", residuals)


@experiment(
    "gyz-implies-dns",
    "GYZ authentication implies DNS authentication: ε_DNS ≤ 4(28√ε_GYZ + 3ε_GYZ) whenever ε_GYZ ≤ 62⁻².",
    scheme={"kind": "tagged", "t": 1, "base": {"kind": "clifford", "n": 2}},
    states={"count": 3},
    params={"cases": 10, "theta": 5e-5},
    tolerances={"slack": 1e-6},
)
def _gyz_implies_dns(v: Verdict) -> None:
    scheme  = v.scheme()
    cases   = v.params["cases"]
    attacks = [
        near_identity_attack(scheme, 1, theta=v.params["theta"] * (i + 1) / cases, seed=v.seed + i)
        for i in range(cases)
    ]
    battery = state_battery(scheme.a, 1, count=v.states["count"], seed=v.seed)
    results = gyz_implies_dns_check(scheme, attacks, battery, slack=v.tol())
    regime  = [c for c in results if c.ok is not None]
    v.check("cases in regime", len(regime), 1.0, ">=", 0.0)
    v.check("max ε_DNS − 4(28√ε_GYZ + 3ε_GYZ)", max((c.epsilon_dns - c.bound for c in regime), default=math.inf), 0.0)
    v.note("cases", [c._asdict() for c in results])


@experiment(
    "dns-from-nm",
    "Tagging a non-malleable scheme with t qubits gives DNS authentication with residual ≤ 4/|T|.",
    scheme={"kind": "tagged", "t": 3, "base": {"kind": "sampled_clifford", "n": 4, "keys": 2000, "seed": 0}},
    states={"count": 3},
    params={"random_attacks": 2, "exclude": []},
    tolerances={"slack": 1e-6, "correction": 1e-9},
)
def _dns_from_nm(v: Verdict) -> None:
    scheme = v.scheme()
    if scheme.tag is None:
        raise IncompatibleScenarioError("dns-from-nm needs a tagged scheme", field="scheme")
    battery = state_battery(scheme.a, 1, count=v.states["count"], seed=v.seed)
    attacks = v.attacks(scheme, 1, exclude=tuple(v.params["exclude"]), random_count=v.params["random_attacks"])
    worst, excess, delta, per_attack = 0.0, -math.inf, 0.0, {}
    for attack in attacks:
        res = dns_residual(scheme, attack, battery, witness="nm")
        worst  = max(worst, res.residual)
        excess = max(excess, res.correction - 2 * res.eta)
        gap    = design_gap(AttackScenario(scheme, attack), battery)
        delta  = max(delta, gap)
        per_attack[attack.name] = {"residual": res.residual, "gamma": res.gamma, "eta": res.eta, "design_gap": gap}
    v.check("max DNS residual", worst, 4.0 / scheme.tag.dim)
    v.check("max TP correction − 2η", excess, 0.0, slack=v.tol("correction"))
    v.note("design_gap", delta)
    v.note("attacks", per_attack)


# ── Lemma battery ──────────────────────────────────────────────────────────────

@experiment(
    "twirl-lemmas",
    "Supporting lemmas: swap trick, mirror lemma, Choi-to-diamond sandwich, Pinsker, Fannes-type continuity, "
    "channel-twirl vs U-Ū factor d, the off-diagonal decryption identity, 1-norm/2-norm, Hölder and the "
    "data-processing tensor bound.",
    scheme={"kind": "clifford", "n": 1},
    params={"probes": 20, "channel_pairs": 5, "fannes_pairs": 500, "dim": 3},
    tolerances={"slack": 1e-9, "exact": 1e-10},
)
def _twirl_lemmas(v: Verdict) -> None:
    rng = v.rng(1)
    d   = v.params["dim"]
    n   = v.params["probes"]

    def mat(rows: int, cols: int) -> np.ndarray:
        return rng.normal(size=(rows, cols)) + 1j * rng.normal(size=(rows, cols))

    swap = max(abs(x - y) for x, y in (swap_trick_check(mat(d, d), mat(d, d)) for _ in range(n)))
    v.check("swap trick |Tr[AB] − Tr[F·A⊗B]|", swap, 0.0, slack=v.tol("exact"))
    mirror = max(mirror_residual(mat(rows, cols)) for rows, cols in [(2, 3), (3, 2), (d, d)] * n)
    v.check("mirror lemma residual", mirror, 0.0, slack=v.tol("exact"))

    lo_gap, hi_gap = -math.inf, -math.inf
    lay = [("S", 2)]
    for i in range(v.params["channel_pairs"]):
        first, second = random_channel(lay, lay, rng), random_channel(lay, lay, rng)
        bounds = diamond_distance_bounds(first, second, heuristic=True, seed=v.seed + i)
        lo_gap = max(lo_gap, bounds.lower - bounds.heuristic_exact)
        hi_gap = max(hi_gap, bounds.heuristic_exact - bounds.upper)
    v.check("diamond sandwich: lower − heuristic", lo_gap, 0.0)
    v.check("diamond sandwich: heuristic − upper", hi_gap, 0.0)

    pinsker = min(pinsker_gap(random_density([(A, 2), (B, 3)], rng)) for _ in range(n))
    v.check("Pinsker gap", pinsker, 0.0, ">=")

    worst = {"entropy": -math.inf, "cond-entropy": -math.inf, "mutual-info": -math.inf}
    parts = ([A], [B])
    for _ in range(v.params["fannes_pairs"]):
        rho   = random_density([(A, 2), (B, 2)], rng)
        lam   = 0.3 * rng.random()
        sigma = DensityOperator((1 - lam) * rho.matrix + lam * random_density(rho.layout, rng).matrix, rho.layout)
        eps   = trace_norm(rho.matrix - sigma.matrix)
        s_r, s_s = von_neumann_entropy(rho), von_neumann_entropy(sigma)
        c_r = s_r - von_neumann_entropy(rho.keep([B]))
        c_s = s_s - von_neumann_entropy(sigma.keep([B]))
        i_r, i_s = mutual_information(rho, parts), mutual_information(sigma, parts)
        worst["entropy"]      = max(worst["entropy"], abs(s_r - s_s) - fannes_bound(eps, [4], "entropy"))
        worst["cond-entropy"] = max(worst["cond-entropy"], abs(c_r - c_s) - fannes_bound(eps, [2, 2], "cond-entropy"))
        worst["mutual-info"]  = max(worst["mutual-info"], abs(i_r - i_s) - fannes_bound(eps, [2, 2], "mutual-info"))
    for flavor, gap in worst.items():
        v.check(f"Fannes ({flavor}): |Δ| − bound", gap, 0.0)

    pauli = pauli_group(1)
    ct, uu = design_deficiency(pauli, "channel-twirl"), design_deficiency(pauli, "uubar")
    v.check("channel twirl: lower ≤ upper", ct.lower, ct.upper)
    v.check("channel twirl upper − d·U-Ū upper", abs(ct.upper - pauli.dim * uu.upper), 0.0, slack=v.tol("exact"))
    cliff = clifford_group(1)
    v.check("Clifford channel-twirl deficiency", design_deficiency(cliff, "channel-twirl").upper, 0.0,
            slack=v.tol("exact"))
    v.note("pauli_channel_twirl", {"lower": ct.lower, "upper": ct.upper, "uubar_upper": uu.upper})

    v.check("off-diagonal decryption identity", offdiagonal_lemma_residual(v.scheme(), seed=v.seed), 0.0,
            slack=v.tol("exact"))

    gap = -math.inf
    for _ in range(n):
        psi = random_pure_vector(d, rng) * math.sqrt(rng.random())
        phi = random_pure_vector(d, rng) * math.sqrt(rng.random())
        lhs, rhs = norm_1_2_check(psi, phi)
        gap = max(gap, lhs - rhs)
    v.check("‖ψψ† − φφ†‖₁ − 2‖ψ − φ‖₂", gap, 0.0)
    gap = max(l - r for l, r in (holder_check(mat(d, d), mat(d, d)) for _ in range(n)))
    v.check("Hölder |Tr XY| − ‖X‖₁‖Y‖∞", gap, 0.0)

    gap = -math.inf
    for _ in range(n):
        rho = random_density([(A, 2), (B, 2)], rng)
        channel = random_channel([(B, 2)], [(B, 2), ("X", 2)], rng)
        lhs, rhs = dp_tensor_check(rho, channel)
        gap = max(gap, lhs - rhs)
    v.check("I(A:B̃) − I(A:B) − H(X)", gap, 0.0)


@experiment(
    "design-exactness",
    "The enumerated Clifford groups (24 and 11520 elements up to phase) are exact 2-designs: their 2-twirl "
    "matches the Haar closed form.",
    params={"n": [1, 2], "probes": 50},
    tolerances={"slack": 1e-10},
)
def _design_exactness(v: Verdict) -> None:
    sizes = {1: 24, 2: 11520}
    rng   = v.rng(1)
    for n in v.params["n"]:
        if n not in sizes:
            raise ConfigError(f"design-exactness enumerates n ∈ {{1, 2}}, got {n}", field="params.n")
        group = clifford_group(n)
        d     = group.dim
        v.check(f"Clifford{n} size", len(group), sizes[n], ">=", 0.0)
        v.check(f"Clifford{n} size (upper)", len(group), sizes[n], "<=", 0.0)
        worst = 0.0
        for _ in range(v.params["probes"]):
            x = rng.normal(size=(d * d, d * d)) + 1j * rng.normal(size=(d * d, d * d))
            worst = max(worst, float(np.max(np.abs(t_twirl(group, x, 2) - haar_2twirl(x, d)))))
        v.check(f"Clifford{n} 2-twirl vs Haar closed form", worst, 0.0)
