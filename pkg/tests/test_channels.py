"""QNMChannels: representations, algebra, Choi-Jamiołkowski and diamond bounds."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from QNMChannels import (
    PAULI_X,
    PAULI_Z,
    QuantumChannel,
    adjoint_channel,
    apply,
    apply_matrix,
    channel_from_json,
    channel_to_json,
    choi_action,
    cj_inverse,
    cj_state,
    combine_channels,
    compose_channels,
    diamond_distance_bounds,
    mirror_residual,
    partial_trace_channel,
    random_channel,
    stinespring_dilate,
    tensor_channels,
)
from QNMCore import SystemLayout, max_entangled, random_density
from QNMExceptions import ChannelError, LayoutError

Q = [("C", 2)]


def dephasing(p: float) -> QuantumChannel:
    return QuantumChannel(Q, Q, kraus=[np.sqrt(1 - p) * np.eye(2), np.sqrt(p) * PAULI_Z], name="dephase")


# ── Representations ────────────────────────────────────────────────────────────

class TestRepresentations:

    def test_kraus_choi_kraus(self, rng):
        ch = random_channel([("C", 2)], [("D", 3)], rng, rank=3)
        back = QuantumChannel(ch.in_layout, ch.out_layout, choi=ch.choi)
        assert_allclose(back.choi, ch.choi, atol=1e-12)
        x = random_density([("C", 2)], rng)
        assert_allclose(apply(back, x).matrix, apply(ch, x).matrix, atol=1e-10)

    def test_choi_is_normalized(self, rng):
        ch = random_channel(Q, Q, rng)
        assert np.trace(ch.choi).real == pytest.approx(1.0)
        assert ch.is_tp and ch.is_cp

    def test_non_psd_choi_rejected(self):
        with pytest.raises(ChannelError):
            QuantumChannel(Q, Q, choi=np.diag([1.0, -0.5, 0.25, 0.25]))

    def test_kraus_shape_checked(self):
        with pytest.raises(ChannelError):
            QuantumChannel(Q, [("C", 3)], kraus=np.eye(2))

    def test_constant_channel(self, rng):
        sigma = random_density([("C", 2)], rng)
        const = QuantumChannel.constant(sigma, [("X", 3)])
        out = apply(const, random_density([("X", 3)], rng))
        assert_allclose(out.matrix, sigma.matrix, atol=1e-12)

    def test_unitary_rejects_non_unitary(self):
        with pytest.raises(ChannelError):
            QuantumChannel.unitary(np.diag([1.0, 2.0]), Q)


# ── Application ────────────────────────────────────────────────────────────────

class TestApply:

    def test_apply_on_middle_register(self, rng):
        rho = random_density([("A", 2), ("C", 2), ("R", 3)], rng)
        x = QuantumChannel.unitary(PAULI_X, Q, name="X")
        out = apply(x, rho, on=["C"])
        big = np.kron(np.kron(np.eye(2), PAULI_X), np.eye(3))
        assert out.layout == rho.layout
        assert_allclose(out.matrix, big @ rho.matrix @ big.conj().T, atol=1e-12)

    def test_output_lands_at_first_target(self, rng):
        rho = random_density([("A", 2), ("C", 2)], rng)
        grow = QuantumChannel([("C", 2)], [("C", 2), ("T", 3)], kraus=np.kron(np.eye(2), np.eye(3)[:, :1]))
        _, lay = apply_matrix(grow, rho.matrix, rho.layout, ["C"])
        assert lay.labels == ("A", "C", "T")

    def test_dim_mismatch(self, rng):
        rho = random_density([("A", 3)], rng)
        with pytest.raises(LayoutError):
            apply(QuantumChannel.identity(Q), rho, on=["A"])

    def test_choi_action_matches_apply(self, rng):
        ch = random_channel(Q, [("D", 3)], rng)
        x = random_density(Q, rng)
        assert_allclose(choi_action(ch.choi, x.matrix, 2, 3), apply(ch, x).matrix, atol=1e-10)

    def test_cj_state_and_inverse(self, rng):
        ch = random_channel(Q, Q, rng)
        eta = cj_state(ch)
        assert eta.normalized
        back = cj_inverse(eta, ch.in_layout, ch.out_layout)
        assert_allclose(back.superop, ch.superop, atol=1e-10)


# ── Algebra ────────────────────────────────────────────────────────────────────

class TestAlgebra:

    def test_compose(self, rng):
        a = random_channel(Q, Q, rng)
        b = random_channel(Q, Q, rng)
        x = random_density(Q, rng)
        assert_allclose(apply(compose_channels(b, a), x).matrix, apply(b, apply(a, x)).matrix, atol=1e-10)

    def test_adjoint_is_hilbert_schmidt_dual(self, rng):
        ch  = random_channel([("C", 2)], [("D", 3)], rng, rank=2)
        adj = adjoint_channel(ch)
        assert adj.in_layout == ch.out_layout and adj.out_layout == ch.in_layout
        x = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        y = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        lx, _ = apply_matrix(ch, x, ch.in_layout)
        ay, _ = apply_matrix(adj, y, adj.in_layout)
        assert np.trace(y.conj().T @ lx) == pytest.approx(np.trace(ay.conj().T @ x))
        unit, _ = apply_matrix(adj, np.eye(3), adj.in_layout)
        assert_allclose(unit, np.eye(2), atol=1e-10)

    def test_compose_rejects_bad_chain(self):
        with pytest.raises(ChannelError):
            compose_channels(QuantumChannel.identity([("X", 3)]), QuantumChannel.identity(Q))

    def test_tensor(self, rng):
        a = random_channel([("A", 2)], [("A", 2)], rng)
        b = random_channel([("B", 3)], [("B", 3)], rng)
        ab = tensor_channels(a, b)
        x = random_density([("A", 2), ("B", 3)], rng)
        step = apply(b, apply(a, x, on=["A"]), on=["B"])
        assert_allclose(apply(ab, x).matrix, step.matrix, atol=1e-10)

    def test_combination_is_not_cp(self):
        diff = combine_channels([(1.0, QuantumChannel.identity(Q)), (-1.0, dephasing(0.5))])
        assert not diff.is_cp
        with pytest.raises(ChannelError):
            diff.kraus

    def test_partial_trace_channel(self, rng):
        rho = random_density([("A", 2), ("B", 3)], rng)
        tr = partial_trace_channel(rho.layout, ["A"])
        assert_allclose(apply(tr, rho).matrix, rho.keep(["B"]).matrix, atol=1e-12)

    def test_stinespring(self, rng):
        ch = random_channel(Q, Q, rng, rank=3)
        iso = stinespring_dilate(ch)
        back = iso.as_channel(trace_env=True)
        assert_allclose(back.choi, ch.choi, atol=1e-10)

    def test_json(self, rng):
        ch = random_channel(Q, [("D", 3)], rng)
        for rep in ("kraus", "choi"):
            back = channel_from_json(channel_to_json(ch, rep))
            assert_allclose(back.choi, ch.choi, atol=1e-12)


# ── Diamond bounds ─────────────────────────────────────────────────────────────

class TestDiamond:

    def test_identical_channels(self, rng):
        ch = random_channel(Q, Q, rng)
        lo, hi, _ = diamond_distance_bounds(ch, ch)
        assert lo == pytest.approx(0.0, abs=1e-12)
        assert hi == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal_unitaries_reach_two(self):
        ident = QuantumChannel.identity(Q)
        x = QuantumChannel.unitary(PAULI_X, Q)
        lo, hi, heur = diamond_distance_bounds(ident, x, heuristic=True)
        assert lo == pytest.approx(2.0)
        assert lo <= heur <= hi

    def test_dephasing_heuristic_in_bracket(self):
        lo, hi, heur = diamond_distance_bounds(QuantumChannel.identity(Q), dephasing(0.3), heuristic=True, seed=3)
        assert lo - 1e-12 <= heur <= hi + 1e-12
        # exact value is 2p for dephasing, reached at φ⁺
        assert lo == pytest.approx(0.6)

    def test_layouts_must_match(self):
        with pytest.raises(LayoutError):
            diamond_distance_bounds(QuantumChannel.identity(Q), QuantumChannel.identity([("C", 3)]))


class TestLemmas:

    def test_mirror(self, rng):
        for shape in ((2, 2), (3, 2), (2, 4)):
            x = rng.normal(size=shape) + 1j * rng.normal(size=shape)
            assert mirror_residual(x) < 1e-10

    def test_max_entangled_layout(self):
        phi = max_entangled(2, ("C", "C'"))
        assert phi.layout == SystemLayout([("C", 2), ("C'", 2)])
