import numpy as np
import pytest

from tdnh.linalg import (
    IDENTITY_2,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    DefectiveMatrixError,
    commutator,
    eig_biorthogonal,
    hermiticity_residual,
    max_abs,
    metric_normalized,
    operator_time_derivative,
    positivity_check,
)


def quadratic_eigenvalues(m):
    """Independent 2x2 oracle: roots of z^2 - tr z + det."""
    tr = m[0, 0] + m[1, 1]
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    root = np.sqrt(complex(tr * tr - 4.0 * det))
    return 0.5 * (tr + root), 0.5 * (tr - root)


def paired_difference(computed, expected):
    a = sorted(computed, key=lambda z: (z.real, z.imag))
    b = sorted(expected, key=lambda z: (z.real, z.imag))
    return max(abs(x - y) for x, y in zip(a, b))


class TestEigBiorthogonal:
    def test_diagonal(self):
        es = eig_biorthogonal(np.diag([1.0, 2.0]))
        assert np.allclose(es.values, [1.0, 2.0])
        assert np.allclose(np.abs(es.right), np.eye(2))
        assert np.allclose(np.abs(es.left), np.eye(2))

    def test_pauli_x(self):
        es = eig_biorthogonal(PAULI_X)
        assert np.allclose(es.values, [-1.0, 1.0])
        plus = es.right[:, 1]
        assert abs(abs(plus[0]) - 1 / np.sqrt(2)) < 1e-12
        assert abs(plus[0] - plus[1]) < 1e-12  # equal components for the +1 level

    def test_random_2x2_against_quadratic_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            m = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            es = eig_biorthogonal(m)
            assert paired_difference(es.values, quadratic_eigenvalues(m)) < 1e-10
            assert es.biorthonormality_residual() < 1e-10
            assert es.completeness_residual() < 1e-10
            assert es.reconstruction_residual(m) < 1e-9

    def test_hermitian_input(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            h = a + a.conj().T
            es = eig_biorthogonal(h)
            assert max_abs(es.values.imag) < 1e-12
            # left equals right within a phase per level
            for n in range(2):
                overlap = abs(es.left[:, n].conj() @ es.right[:, n])
                norms = np.linalg.norm(es.left[:, n]) * np.linalg.norm(es.right[:, n])
                assert overlap == pytest.approx(norms, rel=1e-10)

    def test_larger_dimension(self):
        rng = np.random.default_rng(11)
        m = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
        es = eig_biorthogonal(m)
        assert es.biorthonormality_residual() < 1e-10
        assert es.reconstruction_residual(m) < 1e-9

    def test_defective_matrix_raises(self):
        with pytest.raises(DefectiveMatrixError):
            eig_biorthogonal(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_near_exceptional_raises(self):
        # a Jordan block perturbed by epsilon has eigenvector condition ~ 1/sqrt(eps)
        m = np.array([[0.0, 1.0], [1e-18, 0.0]])
        with pytest.raises(DefectiveMatrixError):
            eig_biorthogonal(m)

    def test_ordering_descending(self):
        es = eig_biorthogonal(np.diag([1.0, 2.0]), ordering="real_desc")
        assert np.allclose(es.values, [2.0, 1.0])


class TestCommutator:
    def test_pauli_algebra(self):
        assert max_abs(commutator(PAULI_X, PAULI_Y) - 2j * PAULI_Z) == 0.0

    def test_self_commutes(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        assert max_abs(commutator(a, a)) == 0.0

    def test_diagonal_with_pauli_x(self):
        out = commutator(np.diag([1.0, 2.0]), PAULI_X)
        assert np.allclose(out, [[0.0, -1.0], [1.0, 0.0]])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            commutator(np.eye(2), np.eye(3))


class TestHermiticityAndPositivity:
    def test_pauli_z(self):
        assert hermiticity_residual(PAULI_Z) == 0.0
        positive, eigs = positivity_check(PAULI_Z)
        assert not positive
        assert np.allclose(eigs, [-1.0, 1.0])

    def test_positive_diagonal(self):
        positive, eigs = positivity_check(np.diag([2.0, 3.0]))
        assert positive
        assert np.allclose(eigs, [2.0, 3.0])

    def test_metric_example(self):
        # diagonal metric with entries (c1+c2)^2, (c1-c2)^2 at c1=2, c2=1
        rho = np.diag([9.0, 1.0]).astype(complex)
        positive, eigs = positivity_check(rho)
        assert positive
        assert np.allclose(sorted(eigs), [1.0, 9.0])
        assert np.linalg.det(rho).real == pytest.approx((2.0**2 - 1.0**2) ** 2)

    def test_dyson_products_are_positive(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            eta = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            if abs(np.linalg.det(eta)) < 1e-3:
                continue
            positive, _ = positivity_check(eta.conj().T @ eta)
            assert positive

    def test_non_hermitian_reports_instead_of_raising(self):
        m = np.array([[1.0, 1.0], [0.0, 1.0]])
        assert hermiticity_residual(m) == 1.0
        positive, _ = positivity_check(m)  # verdict for the Hermitian part
        assert isinstance(positive, bool)


class TestOperatorTimeDerivative:
    def test_linear_in_t(self):
        d = operator_time_derivative(lambda t: t * PAULI_X, 0.7)
        assert max_abs(d - PAULI_X) < 1e-11

    def test_exponential(self):
        d = operator_time_derivative(lambda t: np.exp(t) * IDENTITY_2, 0.0)
        assert max_abs(d - IDENTITY_2) < 1e-9

    def test_metric_derivative_against_analytic(self):
        # diagonal metric of the hermitian-map family with a constant z drive
        c1, c2, rate = 2.0, 1.0, 1.0

        def rho(t):
            return np.diag([(c1 + c2) ** 2 * np.exp(rate * t),
                            (c1 - c2) ** 2 * np.exp(-rate * t)]).astype(complex)

        t = 0.3
        analytic = rate * np.diag([(c1 + c2) ** 2 * np.exp(rate * t),
                                   -((c1 - c2) ** 2) * np.exp(-rate * t)])
        assert max_abs(operator_time_derivative(rho, t, 1e-4) - analytic) < 1e-6


class TestMetricNormalized:
    def test_left_equals_metric_times_right(self):
        rng = np.random.default_rng(5)
        eta = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        rho = eta.conj().T @ eta
        # an operator quasi-Hermitian wrt rho: eta^-1 h eta with Hermitian h
        h = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        h = h + h.conj().T
        op = np.linalg.inv(eta) @ h @ eta
        es = metric_normalized(eig_biorthogonal(op), rho)
        for n in range(2):
            psi = es.right[:, n]
            assert float(np.real(psi.conj() @ rho @ psi)) == pytest.approx(1.0, abs=1e-12)
            assert np.linalg.norm(es.left[:, n] - rho @ psi) < 1e-10
        assert es.biorthonormality_residual() < 1e-12
