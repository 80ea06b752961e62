import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nakano_lab import linalg
from nakano_lab.linalg import Verdict


def random_hermitian(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (a + a.conj().T) / 2


def random_unitary(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


class TestHermitize:
    def test_identity(self):
        h, asym = linalg.hermitize(np.eye(3))
        np.testing.assert_array_equal(h, np.eye(3))
        assert asym == 0.0

    def test_nilpotent(self):
        h, asym = linalg.hermitize([[0, 1], [0, 0]])
        np.testing.assert_allclose(h, [[0, 0.5], [0.5, 0]])
        assert asym == 0.5

    def test_entrywise_oracle(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        h, _ = linalg.hermitize(a)
        for i in range(2):
            for j in range(2):
                assert h[i, j] == pytest.approx((a[i, j] + np.conj(a[j, i])) / 2, abs=1e-15)

    def test_non_square(self):
        with pytest.raises(linalg.DimensionError):
            linalg.hermitize(np.zeros((2, 3)))


class TestEigvalsh:
    def test_identity(self):
        rep = linalg.eigvalsh(np.eye(4))
        np.testing.assert_allclose(rep.eigenvalues, 1.0)
        assert rep.min == rep.eigenvalues[0]

    def test_diagonal(self):
        np.testing.assert_allclose(linalg.eigvalsh(np.diag([-2.0, 1.0])).eigenvalues, [-2, 1])

    @pytest.mark.parametrize("a,b,d", [(1.0, 0.3 + 0.4j, -2.0), (5.0, 2j, 5.0), (0.0, 1.0, 0.0)])
    def test_quadratic_formula(self, a, b, d):
        h = np.array([[a, b], [np.conj(b), d]])
        disc = np.sqrt((a - d) ** 2 + 4 * abs(b) ** 2)
        expected = [(a + d - disc) / 2, (a + d + disc) / 2]
        np.testing.assert_allclose(linalg.eigvalsh(h).eigenvalues, expected, atol=1e-12)

    def test_rejects_non_hermitian(self):
        with pytest.raises(linalg.ContractError):
            linalg.eigvalsh([[1, 2], [0, 1]])

    def test_residual_reported(self):
        rng = np.random.default_rng(0)
        rep = linalg.eigvalsh(random_hermitian(rng, 20))
        assert rep.residual <= 1e-10

    def test_agrees_with_lapack(self):
        rng = np.random.default_rng(11)
        h = random_hermitian(rng, 30)
        np.testing.assert_allclose(linalg.eigvalsh(h).eigenvalues, np.linalg.eigvalsh(h), atol=1e-11)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 6), seed=st.integers(0, 2**32 - 1))
def test_trace_and_unitary_invariance(n, seed):
    rng = np.random.default_rng(seed)
    h = random_hermitian(rng, n)
    w = linalg.eigvalsh(h).eigenvalues
    assert w.sum() == pytest.approx(np.trace(h).real, rel=1e-10, abs=1e-10)
    u = random_unitary(rng, n)
    w2 = linalg.eigvalsh(u.conj().T @ h @ u).eigenvalues
    np.testing.assert_allclose(w2, w, atol=1e-9)


def _leading_minors(h):
    return [np.linalg.det(h[:k, :k]).real for k in range(1, h.shape[0] + 1)]


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 4), seed=st.integers(0, 2**32 - 1), shift=st.floats(-2, 4))
def test_pd_implies_positive_minors(n, seed, shift):
    rng = np.random.default_rng(seed)
    h = random_hermitian(rng, n) + shift * np.eye(n)
    if linalg.pd_verdict(h, 1e-6) is Verdict.POSITIVE_DEFINITE:
        assert all(m > 0 for m in _leading_minors(h))


class TestVerdict:
    def test_identity(self):
        assert linalg.pd_verdict(np.eye(3), 1e-6) is Verdict.POSITIVE_DEFINITE

    def test_zero(self):
        assert linalg.pd_verdict(np.zeros((2, 2)), 1e-6) is Verdict.SEMIDEFINITE_WITHIN_MARGIN

    def test_indefinite(self):
        assert linalg.pd_verdict(np.diag([1.0, -1.0]), 1e-6) is Verdict.INDEFINITE

    def test_negative_margin(self):
        with pytest.raises(ValueError):
            linalg.pd_verdict(np.eye(2), -1.0)


class TestInvSqrt:
    def test_identity(self):
        np.testing.assert_allclose(linalg.inv_sqrt(np.eye(3)), np.eye(3), atol=1e-15)

    def test_diagonal(self):
        np.testing.assert_allclose(linalg.inv_sqrt(np.diag([4.0, 9.0])), np.diag([0.5, 1 / 3]), atol=1e-14)

    @pytest.mark.parametrize("seed", range(5))
    def test_random_spd(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        h = a @ a.conj().T + 0.1 * np.eye(3)
        s = linalg.inv_sqrt(h)
        np.testing.assert_allclose(s @ h @ s, np.eye(3), atol=1e-10)
        np.testing.assert_allclose(s, s.conj().T, atol=1e-14)
        assert linalg.eigvalsh(s).min > 0

    def test_not_pd(self):
        with pytest.raises(linalg.DomainError):
            linalg.inv_sqrt(np.diag([1.0, -1.0]))
