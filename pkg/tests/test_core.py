"""QNMCore: layouts, density operators, norms and entropies."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from QNMCore import (
    Block,
    DensityOperator,
    EntropyLedger,
    SystemLayout,
    binary_entropy,
    fannes_bound,
    holder_check,
    max_entangled,
    maximally_mixed,
    mutual_information,
    conditional_mutual_information,
    norm_1_2_check,
    partial_transpose,
    partial_trace,
    permute,
    pinsker_gap,
    random_density,
    random_pure_vector,
    random_unitary,
    shannon_entropy,
    swap_trick_check,
    tau_minus,
    tensor_compose,
    trace_norm,
    von_neumann_entropy,
)
from QNMExceptions import LayoutError, StateError


# ── Layouts ────────────────────────────────────────────────────────────────────

class TestSystemLayout:

    def test_dims_and_order(self):
        lay = SystemLayout([("A", 2), ("B", 3), ("R", 2)])
        assert lay.labels == ("A", "B", "R")
        assert lay.total_dim == 12
        assert lay.index("R") == 2

    def test_duplicate_label_rejected(self):
        with pytest.raises(LayoutError) as e:
            SystemLayout([("A", 2), ("A", 2)])
        assert e.value.field == "A"

    def test_unknown_label(self):
        with pytest.raises(LayoutError):
            SystemLayout([("A", 2)]).dim_of("B")

    def test_blocks_must_cover_register(self):
        with pytest.raises(LayoutError):
            SystemLayout([("A", 3)], {"A": [Block("acc", 0, 2)]})

    def test_block_projector(self):
        lay = SystemLayout([("A", 3)], {"A": [Block("acc", 0, 2), Block("rej", 2, 1)]})
        assert_allclose(lay.block_projector("A", "rej"), np.diag([0, 0, 1]))

    def test_primed_and_without(self):
        lay = SystemLayout([("A", 2), ("B", 3)])
        assert lay.primed().labels == ("A'", "B'")
        assert lay.without(["A"]) == SystemLayout([("B", 3)])


# ── Density operators ──────────────────────────────────────────────────────────

class TestDensityOperator:

    def test_rejects_bad_trace(self):
        with pytest.raises(StateError):
            DensityOperator(np.eye(2), [("A", 2)])

    def test_rejects_non_hermitian(self):
        with pytest.raises(StateError):
            DensityOperator(np.array([[0.5, 1.0], [0.0, 0.5]]), [("A", 2)])

    def test_rejects_negative_eigenvalue(self):
        with pytest.raises(StateError):
            DensityOperator(np.diag([1.5, -0.5]), [("A", 2)])

    def test_shape_mismatch(self):
        with pytest.raises(LayoutError):
            DensityOperator(np.eye(3) / 3, [("A", 2)])

    def test_partial_trace_of_phi_plus(self):
        phi = max_entangled(3, ("A", "R"))
        assert_allclose(partial_trace(phi, ["R"]).matrix, np.eye(3) / 3, atol=1e-14)

    def test_permute_roundtrip(self, rng):
        rho = random_density([("A", 2), ("B", 3)], rng)
        back = permute(permute(rho, ["B", "A"]), ["A", "B"])
        assert_allclose(back.matrix, rho.matrix, atol=1e-14)

    def test_keep_orders_marginal(self, rng):
        a = random_density([("A", 2)], rng)
        b = random_density([("B", 3)], rng)
        joint = tensor_compose([a, b])
        assert_allclose(joint.keep(["B", "A"]).matrix, np.kron(b.matrix, a.matrix), atol=1e-14)

    def test_pure(self):
        rho = DensityOperator.pure([1, 1j], [("A", 2)])
        assert rho.is_pure()
        assert rho.trace == pytest.approx(1.0)


# ── Norms and identities ───────────────────────────────────────────────────────

class TestNorms:

    def test_trace_norm_of_difference(self):
        assert trace_norm(np.diag([1.0, 0.0]) - np.diag([0.0, 1.0])) == pytest.approx(2.0)

    def test_swap_trick(self, rng):
        for d in (2, 3, 4):
            x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
            y = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
            lhs, rhs = swap_trick_check(x, y)
            assert abs(lhs - rhs) < 1e-10

    def test_holder(self, rng):
        for _ in range(20):
            x = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
            y = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
            lhs, rhs = holder_check(x, y)
            assert lhs <= rhs + 1e-10

    def test_norm_1_2(self, rng):
        for _ in range(20):
            psi = random_pure_vector(4, rng)
            phi = random_pure_vector(4, rng)
            lhs, rhs = norm_1_2_check(psi, phi)
            assert lhs <= rhs + 1e-10

    @pytest.mark.parametrize("d", [2, 3])
    def test_partial_transpose_of_phi_plus(self, d):
        pt = partial_transpose(max_entangled(d).matrix, (d, d), [1])
        eig = np.linalg.eigvalsh(pt)
        assert eig[0] == pytest.approx(-1 / d)
        assert eig[-1] == pytest.approx(1 / d)
        assert_allclose(partial_transpose(pt, (d, d), [1]), max_entangled(d).matrix, atol=1e-12)

    def test_random_unitary_is_unitary(self, rng):
        u = random_unitary(5, rng)
        assert_allclose(u.conj().T @ u, np.eye(5), atol=1e-12)


# ── Entropy ────────────────────────────────────────────────────────────────────

class TestEntropy:

    def test_binary_entropy(self):
        assert binary_entropy(0.5) == pytest.approx(1.0)
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0
        with pytest.raises(StateError):
            binary_entropy(1.5)

    def test_shannon(self):
        assert shannon_entropy([0.25] * 4) == pytest.approx(2.0)

    def test_phi_plus_mutual_information(self):
        for d in (2, 3, 4):
            phi = max_entangled(d, ("A", "R"))
            assert mutual_information(phi, (["A"], ["R"])) == pytest.approx(2 * math.log2(d))

    def test_maximally_mixed_entropy(self):
        assert von_neumann_entropy(maximally_mixed([("A", 8)])) == pytest.approx(3.0)

    def test_tau_minus_trace(self):
        assert tau_minus(3).trace == pytest.approx(1.0)

    def test_conditional_mutual_information_nonnegative(self, rng):
        for _ in range(5):
            rho = random_density([("A", 2), ("B", 2), ("C", 2)], rng)
            assert conditional_mutual_information(rho, (["A"], ["B"]), ["C"]) >= -1e-10

    def test_pinsker(self, rng):
        for _ in range(20):
            rho = random_density([("A", 2), ("B", 3)], rng)
            assert pinsker_gap(rho) >= -1e-10

    def test_ledger_rejects_negative_information(self):
        ledger = EntropyLedger()
        ledger.record("H(A)", -0.1)
        with pytest.raises(StateError):
            ledger.record("I(A:B)", -0.1)
        assert ledger.to_dict() == {"H(A)": -0.1}

    def test_fannes_zero_and_monotone(self):
        assert fannes_bound(0.0, [4], "entropy") == 0.0
        vals = [fannes_bound(eps, [4, 4], "mutual-info") for eps in (0.01, 0.1, 0.3, 0.6)]
        assert vals == sorted(vals)

    def test_fannes_holds_on_close_pairs(self, rng):
        for _ in range(30):
            rho = random_density([("A", 3)], rng)
            sig = random_density([("A", 3)], rng)
            mix = DensityOperator(0.9 * rho.matrix + 0.1 * sig.matrix, [("A", 3)])
            eps = trace_norm(rho.matrix - mix.matrix)
            gap = abs(von_neumann_entropy(rho) - von_neumann_entropy(mix))
            assert gap <= fannes_bound(eps, [3], "entropy") + 1e-10

    def test_fannes_unknown_flavor(self):
        with pytest.raises(StateError) as e:
            fannes_bound(0.1, [2], "renyi")
        assert e.value.field == "flavor"
