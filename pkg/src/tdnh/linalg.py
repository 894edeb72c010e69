"""Dense complex linear algebra for small operator matrices.

Everything here works on plain ``numpy`` arrays of shape (n, n) with
n <= 8 in practice; n = 2 is the main case.  The one non-trivial piece
is the biorthogonal eigendecomposition: left eigenvectors are defined
through the inverse of the right-eigenvector matrix, so the pairing
<left_n | right_m> = delta_nm holds by construction up to round-off,
with no separate adjoint eigensolve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PAULI_X",
    "PAULI_Y",
    "PAULI_Z",
    "IDENTITY_2",
    "DefectiveMatrixError",
    "Eigensystem",
    "eig_biorthogonal",
    "metric_normalized",
    "commutator",
    "hermiticity_residual",
    "positivity_check",
    "operator_time_derivative",
    "max_abs",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a

PAULI_X = _frozen(np.array([[0, 1], [1, 0]], dtype=complex))
PAULI_Y = _frozen(np.array([[0, -1j], [1j, 0]], dtype=complex))
PAULI_Z = _frozen(np.array([[1, 0], [0, -1]], dtype=complex))
IDENTITY_2 = _frozen(np.eye(2, dtype=complex))


class DefectiveMatrixError(ValueError):
    """Eigenvector matrix is numerically singular (eigenvalue coalescence)."""


def max_abs(a: np.ndarray) -> float:
    """Largest entry magnitude; the residual norm used throughout."""
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def _square(a, name: str = "matrix") -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValueError(f"{name} must be square with dimension >= 1, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def commutator(a, b) -> np.ndarray:
    """[a, b] = ab - ba."""
    a = _square(a, "a")
    b = _square(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a @ b - b @ a


def hermiticity_residual(a) -> float:
    """max |a - a^dag| entry; zero iff a is Hermitian."""
    a = _square(a)
    return max_abs(a - a.conj().T)


def positivity_check(a) -> tuple[bool, np.ndarray]:
    """Eigenvalues of the Hermitian part of ``a`` and a strict-positivity verdict.

    Never raises; callers asking about non-Hermitian input get the verdict
    for (a + a^dag)/2.
    """
    a = _square(a)
    eigs = np.linalg.eigvalsh(0.5 * (a + a.conj().T))
    return bool(np.all(eigs > 0.0)), eigs


def operator_time_derivative(fun, t: float, step: float | None = None) -> np.ndarray:
    """Central difference (fun(t+h) - fun(t-h)) / 2h of a matrix-valued function.

    The default step 1e-5 * max(1, |t|) balances truncation against
    round-off at double precision.
    """
    if step is None:
        step = 1e-5 * max(1.0, abs(t))
    hi = np.asarray(fun(t + step), dtype=complex)
    lo = np.asarray(fun(t - step), dtype=complex)
    return (hi - lo) / (2.0 * step)


@dataclass(frozen=True)
class Eigensystem:
    """Eigenvalues with paired right/left eigenvectors.

    ``right[:, n]`` and ``left[:, n]`` satisfy <left_n | right_m> = delta_nm,
    i.e. ``left.conj().T @ right == I`` up to round-off.
    """

    values: np.ndarray   # (n,)
    right: np.ndarray    # (n, n), column n is the right vector of values[n]
    left: np.ndarray     # (n, n), column n is the paired left vector
    ordering: str = "real_asc"

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def biorthonormality_residual(self) -> float:
        n = self.dim
        return max_abs(self.left.conj().T @ self.right - np.eye(n))

    def completeness_residual(self) -> float:
        n = self.dim
        return max_abs(self.right @ self.left.conj().T - np.eye(n))

    def reconstruction_residual(self, m) -> float:
        return max_abs((self.right * self.values) @ self.left.conj().T - np.asarray(m))


_ORDERINGS = ("real_asc", "real_desc", "none")


def eig_biorthogonal(m, *, cond_limit: float = 1e8, ordering: str = "real_asc") -> Eigensystem:
    """Biorthogonal eigendecomposition of a diagonalizable complex matrix.

    Raises :class:`DefectiveMatrixError` when the right-eigenvector matrix
    has condition number above ``cond_limit``, which signals proximity to
    an exceptional point (eigenvector coalescence), not just degeneracy.
    """
    if ordering not in _ORDERINGS:
        raise ValueError(f"ordering must be one of {_ORDERINGS}")
    a = _square(m)
    values, right = np.linalg.eig(a)
    cond = np.linalg.cond(right)
    if not np.isfinite(cond) or cond > cond_limit:
        raise DefectiveMatrixError(
            f"eigenvector matrix condition {cond:.3e} exceeds {cond_limit:.1e}; "
            "matrix is numerically defective (possible exceptional point)"
        )
    if ordering == "real_asc":
        idx = np.lexsort((values.imag, values.real))
    elif ordering == "real_desc":
        idx = np.lexsort((-values.imag, -values.real))
    else:
        idx = np.arange(values.shape[0])
    values = values[idx]
    right = right[:, idx]
    left = np.linalg.inv(right).conj().T
    return Eigensystem(_frozen(values), _frozen(right), _frozen(left), ordering)


def metric_normalized(es: Eigensystem, metric) -> Eigensystem:
    """Rescale an eigensystem so every right vector has unit metric norm.

    Each right vector is divided by sqrt(<psi|metric|psi>) and the paired
    left vector multiplied by it, which preserves biorthonormality.  For a
    positive-definite metric and a metric-quasi-Hermitian operator the
    rescaled left vectors coincide with metric @ right up to round-off.
    """
    rho = _square(metric, "metric")
    right = np.array(es.right)
    left = np.array(es.left)
    for n in range(es.dim):
        norm_sq = float(np.real(right[:, n].conj() @ rho @ right[:, n]))
        if norm_sq <= 0.0:
            raise ValueError("metric norm is not positive; metric must be positive definite")
        scale = np.sqrt(norm_sq)
        right[:, n] /= scale
        left[:, n] *= scale
    return Eigensystem(es.values, _frozen(right), _frozen(left), es.ordering)
