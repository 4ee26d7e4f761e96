"""QNMExperiments: config parsing, resolution, verdicts and the experiment registry."""

import io
import json
import math

import pytest

from QNMExceptions import ConfigError, IncompatibleScenarioError, UnknownExperimentError
from QNMExperiments import (
    EXPERIMENTS,
    ExperimentConfig,
    Verdict,
    describe,
    get_experiment,
    load_configs,
    parse_configs,
    resolve,
    run_all,
    run_experiment,
    write_verdicts,
)
from qnm_config import SCHEMA

NAMES = [
    "secrecy-1design", "its-iff-ind", "nm-implies-its", "nm-2design", "characterization",
    "nm-implies-abw", "injection-separation", "qotp-malleable", "werner-holevo-sideinfo",
    "gyz-2design", "gyz-implies-dns", "dns-from-nm", "twirl-lemmas", "design-exactness",
]


def cfg(**doc) -> ExperimentConfig:
    return ExperimentConfig.from_dict(doc)


# ── Config parsing ─────────────────────────────────────────────────────────────

class TestConfig:

    def test_unknown_field_named(self):
        with pytest.raises(ConfigError) as e:
            cfg(experiment="qotp-malleable", sede=3)
        assert e.value.field == "sede"
        assert e.value.exit_code == 2

    def test_missing_experiment(self):
        with pytest.raises(ConfigError) as e:
            ExperimentConfig.from_dict({"seed": 1})
        assert e.value.field == "experiment"

    @pytest.mark.parametrize("seed", [-1, 2 ** 64, True, "7", 1.5])
    def test_bad_seed(self, seed):
        with pytest.raises(ConfigError) as e:
            cfg(experiment="nm-2design", seed=seed)
        assert e.value.field == "seed"

    def test_largest_seed_accepted(self):
        assert cfg(experiment="nm-2design", seed=2 ** 64 - 1).seed == 2 ** 64 - 1

    @pytest.mark.parametrize("states,field", [({"count": 0}, "states.count"), ({"n": 2}, "states.n"),
                                              ({"b": True}, "states.b")])
    def test_bad_states(self, states, field):
        with pytest.raises(ConfigError) as e:
            cfg(experiment="nm-2design", seed=1, states=states)
        assert e.value.field == field

    def test_bad_attack_entries(self):
        with pytest.raises(ConfigError):
            cfg(experiment="nm-2design", seed=1, attacks="pauli")
        with pytest.raises(ConfigError):
            cfg(experiment="nm-2design", seed=1, attacks=[{"params": {}}])

    def test_negative_tolerance(self):
        with pytest.raises(ConfigError) as e:
            cfg(experiment="nm-2design", seed=1, tolerances={"slack": -1})
        assert e.value.field == "tolerances.slack"

    def test_shared_keys(self):
        configs = parse_configs({
            "seed": 7,
            "experiments": [{"experiment": "qotp-malleable"}, {"experiment": "nm-2design", "seed": 3}],
        })
        assert [c.seed for c in configs] == [7, 3]

    def test_experiment_cannot_be_shared(self):
        with pytest.raises(ConfigError):
            parse_configs({"experiment": "nm-2design", "experiments": [{"seed": 1}]})

    def test_list_document(self):
        configs = parse_configs([{"experiment": "qotp-malleable"}, {"experiment": "twirl-lemmas", "seed": 1}])
        assert [c.experiment for c in configs] == ["qotp-malleable", "twirl-lemmas"]

    def test_toml(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text(
            'seed = 5\n\n'
            '[[experiments]]\nexperiment = "qotp-malleable"\n\n'
            '[[experiments]]\nexperiment = "twirl-lemmas"\n\n'
            '[experiments.states]\ncount = 3\n',
            encoding="utf-8",
        )
        configs = load_configs(path)
        assert [c.seed for c in configs] == [5, 5]
        assert configs[1].states == {"count": 3}

    def test_unreadable_and_unparsable(self, tmp_path):
        with pytest.raises(ConfigError) as e:
            load_configs(tmp_path / "missing.json")
        assert e.value.field == "config"
        bad = tmp_path / "bad.json"
        bad.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigError) as e:
            load_configs(bad)
        assert e.value.field == "config"


# ── Resolution ─────────────────────────────────────────────────────────────────

class TestResolve:

    def test_unknown_experiment(self):
        with pytest.raises(UnknownExperimentError) as e:
            resolve(cfg(experiment="nm-3design", seed=1))
        assert e.value.exit_code == 3
        assert e.value.field == "experiment"

    def test_sampled_experiment_needs_seed(self):
        with pytest.raises(ConfigError) as e:
            resolve(cfg(experiment="nm-2design"))
        assert e.value.field == "seed"

    @pytest.mark.parametrize("name", ["qotp-malleable", "injection-separation", "nm-implies-its"])
    def test_deterministic_experiments_run_unseeded(self, name):
        assert resolve(cfg(experiment=name)).seed is None

    def test_seed_override(self, monkeypatch):
        monkeypatch.setenv("QNMLAB_SEED", "42")
        assert resolve(cfg(experiment="nm-2design", seed=1)).seed == 42
        assert resolve(cfg(experiment="nm-2design")).seed == 42

    def test_bad_seed_override(self, monkeypatch):
        monkeypatch.setenv("QNMLAB_SEED", "forty-two")
        with pytest.raises(ConfigError) as e:
            resolve(cfg(experiment="nm-2design", seed=1))
        assert e.value.field == "QNMLAB_SEED"

    def test_unknown_tolerance_and_param(self):
        with pytest.raises(ConfigError) as e:
            resolve(cfg(experiment="qotp-malleable", tolerances={"bogus": 1.0}))
        assert e.value.field == "tolerances.bogus"
        with pytest.raises(ConfigError) as e:
            resolve(cfg(experiment="nm-implies-its", params={"random_attacks": 1.5}))
        assert e.value.field == "params.random_attacks"

    def test_list_params_validated(self):
        with pytest.raises(ConfigError) as e:
            resolve(cfg(experiment="dns-from-nm", seed=1, params={"exclude": "ciphertext_extraction"}))
        assert e.value.field == "params.exclude"
        with pytest.raises(ConfigError) as e:
            resolve(cfg(experiment="design-exactness", seed=1, params={"n": ["1"]}))
        assert e.value.field == "params.n"
        assert resolve(cfg(experiment="dns-from-nm", seed=1, params={"exclude": ["cnot_copy"]})).params["exclude"] == [
            "cnot_copy"
        ]

    def test_dns_from_nm_runs_the_whole_library(self):
        assert describe("dns-from-nm")["params"]["exclude"] == []

    def test_digest(self):
        a = resolve(cfg(experiment="nm-2design", seed=1)).digest
        assert a == resolve(cfg(experiment="nm-2design", seed=1, output="x.jsonl")).digest
        assert a != resolve(cfg(experiment="nm-2design", seed=2)).digest
        assert len(a) == 64

    def test_describe(self):
        doc = describe("qotp-malleable")
        assert doc["seeded"] is False
        assert doc["scheme"] == {"kind": "qotp", "n": 1}
        assert "gain_floor" in doc["tolerances"]

    def test_registry(self):
        assert sorted(EXPERIMENTS) == sorted(NAMES)
        assert get_experiment("nm-2design").sampled


# ── Verdicts ───────────────────────────────────────────────────────────────────

class TestVerdict:

    def test_check_relations(self):
        v = Verdict(resolve(cfg(experiment="qotp-malleable")))
        assert v.check("le", 1.0, 1.0)
        assert v.check("ge", 2.0, 1.0, ">=")
        assert not v.check("over", 1.1, 1.0, slack=0.05)
        assert not v.check("nan", math.nan, 0.0)
        record = v.to_record()
        assert record["pass"] is False
        assert record["measured"]["nan"] is None
        assert record["schema"] == SCHEMA
        with pytest.raises(ValueError):
            v.check("bad", 0.0, 0.0, "==")

    def test_empty_verdict_fails(self):
        assert Verdict(resolve(cfg(experiment="qotp-malleable"))).to_record()["pass"] is False

    def test_qotp_malleable_passes(self):
        record = run_experiment(cfg(experiment="qotp-malleable"))
        assert record["pass"], record["checks"]
        assert record["notes"]["coin_mixture_p_eq"] == pytest.approx(1 / 8)
        assert record["notes"]["coin_flip_gain"] < 0.0
        assert {"coin flip: NM gain", "Clifford coin flip: NM gain"} <= {c["name"] for c in record["checks"]}
        assert "runtime_ms" not in record

    @pytest.mark.parametrize("name", ["injection-separation", "nm-implies-its"])
    def test_deterministic_experiments_pass(self, name):
        record = run_experiment(cfg(experiment=name))
        assert record["pass"], record["checks"]

    def test_werner_holevo_checks_coin_flip(self):
        record = run_experiment(cfg(experiment="werner-holevo-sideinfo", seed=3, params={"pairs": 20}))
        assert record["pass"], record["checks"]
        assert "coin flip: NM gain" in {c["name"] for c in record["checks"]}

    def test_output_is_byte_identical(self):
        runs = []
        for _ in range(2):
            buf = io.StringIO()
            write_verdicts(run_all([cfg(experiment="qotp-malleable")]), buf)
            runs.append(buf.getvalue())
        assert runs[0] == runs[1]
        assert json.loads(runs[0])["experiment"] == "qotp-malleable"

    def test_record_timing(self):
        record = run_experiment(cfg(experiment="qotp-malleable", record_timing=True))
        assert record["runtime_ms"] >= 0

    def test_run_all_sorted_by_name(self):
        records = run_all([cfg(experiment="qotp-malleable"), cfg(experiment="injection-separation")], parallel=2)
        assert [r["experiment"] for r in records] == ["injection-separation", "qotp-malleable"]

    def test_bad_scheme_is_config_error(self):
        with pytest.raises(ConfigError) as e:
            run_experiment(cfg(experiment="qotp-malleable", scheme={"kind": "rot13"}))
        assert e.value.field == "scheme.kind"

    def test_incompatible_scheme(self):
        with pytest.raises(IncompatibleScenarioError) as e:
            run_experiment(cfg(experiment="qotp-malleable", scheme={"kind": "identity", "dim": 3}))
        assert e.value.exit_code == 4


@pytest.mark.slow
@pytest.mark.parametrize("name", NAMES)
def test_every_experiment_passes(name):
    record = run_experiment(cfg(experiment=name, seed=7))
    assert record["pass"], [c for c in record["checks"] if not c["pass"]]


@pytest.mark.slow
def test_dns_from_nm_reports_extraction_and_design_gap():
    record = run_experiment(cfg(experiment="dns-from-nm", seed=7))
    assert record["pass"], [c for c in record["checks"] if not c["pass"]]
    assert "ciphertext_extraction" in record["notes"]["attacks"]
    assert record["notes"]["design_gap"] >= 0.0
