"""QNMDesigns: group enumeration, sampled Cliffords, twirls and deficiencies."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from QNMChannels import QuantumChannel, diamond_distance_bounds, random_channel
from QNMCore import random_density
from QNMDesigns import (
    UnitaryEnsemble,
    channel_twirl,
    clifford_group,
    deficiency_report,
    design_deficiency,
    ensemble_from_json,
    ensemble_to_json,
    haar_2twirl,
    is_pauli_normalizer,
    pauli_from_label,
    pauli_group,
    random_circuit_ensemble,
    random_clifford,
    t_twirl,
    uubar_twirl,
    uubar_twirl_haar,
)
from QNMExceptions import DesignError


# ── Groups ─────────────────────────────────────────────────────────────────────

class TestGroups:

    def test_single_qubit_clifford_size(self):
        group = clifford_group(1)
        assert len(group) == 24
        assert all(is_pauli_normalizer(u) for u in group.elements)

    @pytest.mark.slow
    def test_two_qubit_clifford_size(self):
        assert len(clifford_group(2)) == 11520

    def test_enumeration_is_cached(self):
        assert clifford_group(1) is clifford_group(1)

    def test_enumeration_limit(self):
        with pytest.raises(DesignError) as e:
            clifford_group(3)
        assert e.value.field == "n"

    def test_pauli_group(self):
        assert len(pauli_group(2)) == 16
        assert_allclose(pauli_from_label("XZ"), np.kron([[0, 1], [1, 0]], [[1, 0], [0, -1]]))
        with pytest.raises(DesignError):
            pauli_from_label("XQ")

    def test_non_unitary_element_rejected(self):
        with pytest.raises(DesignError):
            UnitaryEnsemble(np.array([np.diag([1.0, 2.0])]))


class TestSampling:

    def test_random_clifford_is_deterministic(self):
        a = random_clifford(3, 4, seed=11)
        b = random_clifford(3, 4, seed=11)
        assert_allclose(a.elements, b.elements)
        assert a.digest() == b.digest()

    def test_random_clifford_elements_are_cliffords(self):
        ens = random_clifford(3, 4, seed=5)
        assert ens.dim == 8
        assert all(is_pauli_normalizer(u) for u in ens.elements)

    def test_small_n_draws_from_group(self):
        ens = random_clifford(1, 50, seed=2)
        assert ens.provenance["kind"] == "sampled"
        assert all(is_pauli_normalizer(u) for u in ens.elements)

    def test_circuit_ensemble(self):
        ens = random_circuit_ensemble(2, depth=10, count=3, seed=0)
        assert len(ens) == 3 and ens.dim == 4

    def test_json(self):
        ens = random_clifford(1, 3, seed=4)
        back = ensemble_from_json(ensemble_to_json(ens))
        assert back.digest() == ens.digest()


# ── Twirls ─────────────────────────────────────────────────────────────────────

class TestTwirls:

    def test_clifford_2twirl_matches_haar(self, rng):
        group = clifford_group(1)
        for _ in range(5):
            x = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
            assert_allclose(t_twirl(group, x, 2), haar_2twirl(x, 2), atol=1e-10)

    def test_pauli_2twirl_differs_from_haar(self, rng):
        x = random_density([("S", 4)], rng).matrix
        assert np.max(np.abs(t_twirl(pauli_group(1), x, 2) - haar_2twirl(x, 2))) > 1e-3

    def test_uubar_clifford_matches_haar(self, rng):
        x = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        assert_allclose(uubar_twirl(clifford_group(1), x), uubar_twirl_haar(x), atol=1e-10)

    def test_haar_2twirl_shape_check(self):
        with pytest.raises(DesignError):
            haar_2twirl(np.eye(5), 2)

    def test_channel_twirl(self, rng):
        target = random_channel([("S", 2)], [("S", 2)], rng)
        exact = channel_twirl(None, target)
        lo, _, _ = diamond_distance_bounds(channel_twirl(clifford_group(1), target), exact)
        assert lo < 1e-10
        lo, _, _ = diamond_distance_bounds(channel_twirl(pauli_group(1), target), exact)
        assert lo > 1e-3

    def test_channel_twirl_needs_matching_dim(self, rng):
        target = random_channel([("S", 3)], [("S", 3)], rng)
        with pytest.raises(DesignError):
            channel_twirl(clifford_group(1), target)


# ── Deficiency ─────────────────────────────────────────────────────────────────

class TestDeficiency:

    def test_pauli_is_1design_not_2design(self):
        assert design_deficiency(pauli_group(1), "t-design", 1).upper < 1e-10
        assert design_deficiency(pauli_group(1), "t-design", 2).lower > 0.1

    def test_clifford_is_exact_2design(self):
        for notion in ("t-design", "uubar", "channel-twirl"):
            b = design_deficiency(clifford_group(1), notion, 2)
            assert b.lower <= b.upper + 1e-12
            assert b.upper < 1e-9

    def test_channel_twirl_probes_counted(self):
        b = design_deficiency(pauli_group(1), "channel-twirl")
        assert b.probes == 4 + 20
        assert b.lower > 0

    def test_report_document(self):
        doc = deficiency_report(pauli_group(1), "t-design", 1)
        assert set(doc) == {"notion", "lower", "upper", "probes"}
        assert doc["notion"] == "t-design(1)"
        assert doc["upper"] < 1e-10

    def test_unsupported_requests(self):
        with pytest.raises(DesignError):
            design_deficiency(pauli_group(1), "t-design", 3)
        with pytest.raises(DesignError):
            design_deficiency(pauli_group(1), "approximate")

    def test_identity_ensemble(self):
        ident = UnitaryEnsemble(np.eye(2, dtype=complex)[None])
        assert design_deficiency(ident, "t-design", 1).lower > 1.0
        unit = QuantumChannel.identity([("S", 2)])
        assert channel_twirl(ident, unit).is_tp
