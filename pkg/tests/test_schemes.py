"""QNMSchemes: constructors, correctness, tags, injection, Werner-Holevo and descriptors."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from QNMChannels import QuantumChannel, apply_matrix
from QNMCore import random_density
from QNMDesigns import clifford_group
from QNMExceptions import DecompositionError, SchemeError
from QNMSchemes import (
    EncryptionScheme,
    accept_embedding,
    check_correctness,
    clifford_scheme,
    decompose_encryption_map,
    identity_scheme,
    injection_scheme,
    qotp_scheme,
    reject_state,
    scheme_from_descriptor,
    scheme_to_json,
    tag_channels,
    tagged_scheme,
    werner_holevo_map,
    werner_holevo_scheme,
    werner_holevo_unitary,
)


# ── Constructors ───────────────────────────────────────────────────────────────

class TestConstructors:

    def test_key_counts(self):
        assert qotp_scheme(1).keys == 4
        assert qotp_scheme(2).keys == 16
        assert clifford_scheme(1).keys == 24

    def test_layouts(self):
        s = qotp_scheme(1)
        assert s.plaintext_layout.labels == ("A",)
        assert s.ciphertext_layout.labels == ("C",)
        assert s.decrypt_layout.dims == (3,)
        assert [b.name for b in s.decrypt_layout.blocks["A"]] == ["acc", "rej"]

    def test_clifford_limit(self):
        with pytest.raises(SchemeError):
            clifford_scheme(3)

    def test_bad_key_weights(self):
        u = np.eye(2, dtype=complex)
        with pytest.raises(SchemeError):
            EncryptionScheme(2, 2, [0.7, 0.7], lambda k: None, lambda k: None, isometries=np.array([u, u]))

    def test_qotp_average_is_fully_mixing(self, rng):
        s = qotp_scheme(1)
        x = random_density([("A", 2)], rng).matrix
        y, _ = apply_matrix(s.avg_encrypt(), x, s.plaintext_layout)
        assert_allclose(y, np.eye(2) / 2, atol=1e-12)

    def test_reject_state(self):
        assert reject_state(2)[2, 2] == 1.0
        assert_allclose(accept_embedding(2).conj().T @ accept_embedding(2), np.eye(2))


# ── Correctness ────────────────────────────────────────────────────────────────

class TestCorrectness:

    @pytest.mark.parametrize("build", [
        lambda: qotp_scheme(1),
        lambda: clifford_scheme(1),
        lambda: identity_scheme(3),
        lambda: tagged_scheme(qotp_scheme(2), 1),
        lambda: injection_scheme(qotp_scheme(1)),
        lambda: werner_holevo_scheme(clifford_group(1), 2),
    ])
    def test_decrypt_inverts_encrypt(self, build):
        assert check_correctness(build()) < 1e-10

    def test_broken_scheme_detected(self):
        s = qotp_scheme(1)
        broken = type(s)(
            2, 2, s.key_weights, s.encrypt,
            lambda k: QuantumChannel(s.ciphertext_layout, s.decrypt_layout, kraus=accept_embedding(2)),
        )
        assert check_correctness(broken) > 0.5


# ── Tags ───────────────────────────────────────────────────────────────────────

class TestTagged:

    def test_dimensions(self):
        s = tagged_scheme(qotp_scheme(2), 1)
        assert (s.a, s.c, s.tag.dim) == (2, 4, 2)
        assert s.base.a == 4

    def test_zero_tags_is_identity(self):
        base = qotp_scheme(1)
        assert tagged_scheme(base, 0) is base

    def test_tag_must_divide(self):
        with pytest.raises(SchemeError) as e:
            tagged_scheme(qotp_scheme(1), 2)
        assert e.value.field == "t"

    def test_wrong_tag_rejects(self):
        s = tagged_scheme(identity_scheme(4), 1)
        flip = np.kron(np.eye(2), [[0, 1], [1, 0]])             # flips the tag qubit
        c = s.encrypt(0)
        x = np.diag([1.0, 0.0]).astype(complex)
        y, _ = apply_matrix(c, x, s.plaintext_layout)
        y = flip @ y @ flip.conj().T
        out, _ = apply_matrix(s.decrypt(0), y, s.ciphertext_layout)
        assert_allclose(out, reject_state(2), atol=1e-12)

    def test_tag_channels(self):
        s = tagged_scheme(qotp_scheme(2), 1)
        append, check = tag_channels(s)
        assert append.is_tp and check.is_tp
        assert check.in_layout.dims == (5,) and check.out_layout.dims == (3,)
        with pytest.raises(SchemeError):
            tag_channels(qotp_scheme(1))

    def test_custom_tag_state(self):
        psi = np.array([1, 1j]) / np.sqrt(2)
        s = tagged_scheme(qotp_scheme(2), 1, tag_state=psi)
        assert check_correctness(s) < 1e-10
        assert "tag_state" in s.descriptor


# ── Injection and Werner-Holevo ────────────────────────────────────────────────

class TestInjectionAndWernerHolevo:

    def test_injection_layout(self):
        s = injection_scheme(qotp_scheme(1))
        assert s.c == 4
        assert [b.name for b in s.ciphertext_layout.blocks["C"]] == ["cipher", "injected"]

    def test_werner_holevo_unitary(self):
        v = werner_holevo_unitary(4)
        assert_allclose(v.conj().T @ v, np.eye(4), atol=1e-14)
        assert_allclose(v.T, -v, atol=1e-14)
        with pytest.raises(SchemeError):
            werner_holevo_unitary(3)

    def test_average_is_werner_holevo_map(self, rng):
        s = werner_holevo_scheme(clifford_group(1), 2)
        x = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        y, _ = apply_matrix(s.avg_encrypt(), x, s.plaintext_layout)
        assert_allclose(y, werner_holevo_map(x), atol=1e-10)


# ── Structure ──────────────────────────────────────────────────────────────────

class TestDecomposition:

    def test_unitary_encryption(self):
        iso, sigma = decompose_encryption_map(clifford_scheme(1).encrypt(5))
        assert sigma.dim == 1
        assert_allclose(iso.matrix.conj().T @ iso.matrix, np.eye(2), atol=1e-10)

    def test_tagged_encryption_is_isometric(self):
        s = tagged_scheme(qotp_scheme(2), 1)
        iso, sigma = decompose_encryption_map(s.encrypt(3))
        assert iso.in_layout.total_dim == 2 * sigma.dim

    def test_non_injective_map_rejected(self):
        with pytest.raises(DecompositionError):
            decompose_encryption_map(QuantumChannel.constant(np.eye(2) / 2, [("A", 2)], [("C", 2)]))


# ── Descriptors ────────────────────────────────────────────────────────────────

class TestDescriptors:

    def test_memoized(self):
        d = {"kind": "tagged", "t": 1, "base": {"kind": "qotp", "n": 2}}
        assert scheme_from_descriptor(d) is scheme_from_descriptor(dict(d))

    def test_unknown_kind(self):
        with pytest.raises(SchemeError) as e:
            scheme_from_descriptor({"kind": "rot13"})
        assert e.value.field == "kind"

    def test_missing_field(self):
        with pytest.raises(SchemeError) as e:
            scheme_from_descriptor({"kind": "sampled_clifford", "n": 3})
        assert e.value.field == "keys"

    def test_to_json(self):
        doc = scheme_to_json(scheme_from_descriptor({"kind": "qotp", "n": 1}))
        assert doc["keys"] == 4 and doc["unitary"] is True
        assert "key_weights" not in doc
