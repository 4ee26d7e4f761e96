"""QNMAuth: keywise GYZ deviations, Pauli acceptance, DNS witnesses and TP correction."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from QNMAuth import (
    GYZ_DNS_REGIME,
    accept_probability,
    default_pure,
    dns_residual,
    gyz_implies_dns_check,
    gyz_keywise,
    gyz_residual,
    near_identity_attack,
    nm_witnesses,
    pauli_attack_accept_stats,
    tp_correction,
)
from QNMChannels import QuantumChannel, combine_channels
from QNMExceptions import ChannelError, IncompatibleScenarioError
from QNMSchemes import clifford_scheme, qotp_scheme, tagged_scheme
from QNMSecurity import default_state, make_attack, state_battery


@pytest.fixture
def tagged():
    return tagged_scheme(qotp_scheme(2), 1)


# ── Keywise GYZ ────────────────────────────────────────────────────────────────

class TestKeywise:

    def test_identity_attack_has_no_deviation(self, tagged):
        report = gyz_keywise(tagged, make_attack("identity", tagged), default_pure(2), delta=0.0)
        assert np.max(report.deviations) < 1e-12
        assert report.mean_accept == pytest.approx(1.0)
        assert report.bound == pytest.approx(0.5)
        assert [k for k, _, _ in report.per_key] == list(range(len(tagged.key_weights)))
        assert all(p == pytest.approx(1.0) for _, _, p in report.per_key)

    def test_near_identity_within_bound(self, tagged):
        report = gyz_keywise(tagged, near_identity_attack(tagged, theta=0.01, seed=3), default_pure(2), delta=0.0)
        assert report.mean_sq_deviation <= report.bound
        assert report.bad_fraction(2.0) <= 0.5
        q = report.quantiles()
        assert q["q50"] <= q["q100"]

    def test_mixed_attack_rejected(self, tagged):
        with pytest.raises(ChannelError) as e:
            gyz_keywise(tagged, make_attack("coin_mixture", tagged), default_pure(2), delta=0.0)
        assert e.value.field == "attack"

    def test_untagged_scheme_rejected(self):
        s = qotp_scheme(1)
        with pytest.raises(IncompatibleScenarioError):
            gyz_keywise(s, make_attack("identity", s), default_pure(2), delta=0.0)

    def test_residual_of_identity(self, tagged):
        res = gyz_residual(tagged, make_attack("identity", tagged), default_state(2, 1), delta=0.0)
        assert res.residual == pytest.approx(0.0, abs=1e-12)
        assert res.bound == pytest.approx(4 * 0.5 ** (1 / 3))


# ── Pauli acceptance ───────────────────────────────────────────────────────────

class TestPauliAccept:

    def test_tag_flip_always_rejected(self, tagged):
        stats = pauli_attack_accept_stats(tagged, "XX")
        assert stats.accept_prob == pytest.approx(0.0, abs=1e-12)
        assert stats.reject_prob == pytest.approx(1.0)
        assert stats.fidelity is None

    def test_phase_attack_passes_the_tag(self, tagged):
        stats = pauli_attack_accept_stats(tagged, "ZZ")
        assert stats.accept_prob == pytest.approx(1.0)
        assert stats.fidelity == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.slow
    def test_clifford_spreads_every_pauli(self):
        # 7 of the 15 non-identity Paulis leave |0⟩ on the tag; only IZ is trivial on data
        s = tagged_scheme(clifford_scheme(2), 1)
        for label in ("XI", "IZ", "YY"):
            stats = pauli_attack_accept_stats(s, label)
            assert stats.accept_prob == pytest.approx(7 / 15)
            assert stats.fidelity == pytest.approx(1 / 7)

    def test_untagged_always_accepts(self):
        assert pauli_attack_accept_stats(qotp_scheme(1), "X").accept_prob == 1.0

    def test_bad_labels(self, tagged):
        with pytest.raises(IncompatibleScenarioError):
            pauli_attack_accept_stats(tagged, "X")
        with pytest.raises(ChannelError):
            pauli_attack_accept_stats(tagged, "II")


# ── DNS ────────────────────────────────────────────────────────────────────────

class TestDNS:

    def test_tp_correction_noop_on_nm_witnesses(self):
        s = clifford_scheme(1)
        acc, rej, _ = nm_witnesses(s, make_attack("random_channel", s, b=2, seed=9))
        acc2, rej2, eta, magnitude = tp_correction(acc, rej)
        assert eta < 1e-9
        assert magnitude == 0.0
        assert acc2 is acc and rej2 is rej

    def test_tp_correction_rescales(self):
        ident = QuantumChannel.identity([("B", 2)])
        acc = combine_channels([(0.5, ident)])
        rej = combine_channels([(0.25, ident)])
        acc2, rej2, eta, magnitude = tp_correction(acc, rej)
        assert eta == pytest.approx(0.25)
        assert magnitude > 0
        assert combine_channels([(1.0, acc2), (1.0, rej2)]).tp_defect() < 1e-10

    def test_identity_attack_nm_witness(self):
        s = clifford_scheme(1)
        battery = state_battery(2, 1, count=3, seed=1)
        res = dns_residual(s, make_attack("identity", s), battery, witness="nm")
        assert res.residual < 1e-9
        assert res.gamma == pytest.approx(1.0)

    def test_identity_attack_gyz_witness(self, tagged):
        battery = state_battery(2, 1, count=3, seed=1)
        res = dns_residual(tagged, make_attack("identity", tagged), battery, witness="gyz")
        assert res.residual < 1e-9
        assert res.gamma == 0.0

    def test_unknown_witness(self):
        s = qotp_scheme(1)
        with pytest.raises(ChannelError) as e:
            dns_residual(s, make_attack("identity", s), [default_state(2, 1)], witness="oracle")
        assert e.value.field == "witness"

    def test_implication_cases(self, tagged):
        battery = state_battery(2, 1, count=2, seed=0)
        attacks = [make_attack("identity", tagged), near_identity_attack(tagged, theta=1e-3, seed=1)]
        cases = gyz_implies_dns_check(tagged, attacks, battery, delta=0.0)
        assert cases[0].ok is True
        assert cases[0].epsilon_gyz < GYZ_DNS_REGIME
        assert cases[1].attack.startswith("near_id")
        assert cases[1].epsilon_gyz > 0.0
        assert cases[1].ok is None or isinstance(cases[1].ok, bool)


class TestAttacks:

    def test_near_identity_is_unitary(self, tagged):
        k = near_identity_attack(tagged, b=2, theta=0.2, seed=5).kraus[0]
        assert_allclose(k.conj().T @ k, np.eye(8), atol=1e-12)

    def test_accept_probability(self, tagged):
        rho = default_state(2, 1)
        assert accept_probability(tagged, make_attack("identity", tagged), rho) == pytest.approx((1.0, 0.0), abs=1e-12)
        acc, rej = accept_probability(tagged, make_attack("coin_mixture", tagged), rho)
        assert acc + rej == pytest.approx(1.0)
        assert 0.0 < acc < 1.0
