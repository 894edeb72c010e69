"""Driven two-level model with complex Pauli coefficients.

The Hamiltonian is

    H(t) = -1/2 [ omega*I + x(t)*sigma_x + y(t)*sigma_y + z(t)*sigma_z ]

with x = x_re + i*x_im and likewise for y, z; omega is a real constant
and all coefficients carry energy units with hbar = 1.  The module
classifies the static symmetry regimes of this family, builds the static
parity intertwiner, and constructs the two closed-form time-dependent
Dyson-map scenarios:

* ``hermitian`` map: a diagonal, Hermitian eta(t) driven by the
  integrated sigma_z drive, with metric rho = eta^2;
* ``nonhermitian`` map: a non-Hermitian eta(t) built from the ratio
  y_im/x_re, with a shifted-constraint coefficient set.

Scenario construction derives the dependent coefficients, then certifies
the result by substituting into the time-dependent Dyson equation
h = eta H eta^-1 + i eta_dot eta^-1 with a finite-difference eta_dot;
residuals above tolerance are hard errors, since every downstream
reality statement is meaningless off the constraint surface.
"""

from __future__ import annotations

import bisect
import cmath
import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from tdnh import expr
from tdnh.linalg import (
    IDENTITY_2,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    max_abs,
    operator_time_derivative,
)

__all__ = [
    "Coefficient",
    "ConstraintError",
    "ScenarioValidationError",
    "ParameterPath",
    "PathValues",
    "ScenarioConstants",
    "ScenarioSolution",
    "as_coefficient",
    "coefficient_value",
    "coefficient_dual",
    "hamiltonian",
    "static_constraint_residual",
    "discriminant_value",
    "discriminant",
    "static_energies",
    "static_parity",
    "build_hermitian_map_scenario",
    "build_nonhermitian_map_scenario",
    "dyson_residual",
    "adaptive_simpson",
    "REGIMES",
]

REGIMES = ("symmetric", "exceptional", "broken")

Coefficient = Union[expr.ExprAst, float, int, Callable[[float], float]]


class ConstraintError(ValueError):
    """A coefficient set violates the constraints the operation requires."""


class ScenarioValidationError(ConstraintError):
    """Scenario failed its substitution check against the Dyson equation."""


def as_coefficient(c: Coefficient | str) -> Coefficient:
    """Normalize user input: expression text is parsed, numbers kept as floats."""
    if isinstance(c, str):
        return expr.parse(c)
    if isinstance(c, (int, float)):
        return float(c)
    return c


def coefficient_value(c: Coefficient, t: float) -> float:
    if isinstance(c, (int, float)):
        return float(c)
    if callable(c):
        return float(c(t))
    return expr.evaluate(c, t)


def coefficient_dual(c: Coefficient, t: float) -> tuple[float, float]:
    """(value, d/dt).  Exact for expressions and constants, central
    difference for opaque callables."""
    if isinstance(c, (int, float)):
        return float(c), 0.0
    if callable(c):
        h = 1e-6 * max(1.0, abs(t))
        return float(c(t)), (float(c(t + h)) - float(c(t - h))) / (2.0 * h)
    d = expr.evaluate_dual(c, t)
    return d.value, d.derivative


@dataclass(frozen=True)
class PathValues:
    """Coefficient values at one instant."""

    x_re: float
    x_im: float
    y_re: float
    y_im: float
    z_re: float
    z_im: float

    @property
    def x(self) -> complex:
        return complex(self.x_re, self.x_im)

    @property
    def y(self) -> complex:
        return complex(self.y_re, self.y_im)

    @property
    def z(self) -> complex:
        return complex(self.z_re, self.z_im)


_COEFF_NAMES = ("x_re", "x_im", "y_re", "y_im", "z_re", "z_im")


@dataclass(frozen=True)
class ParameterPath:
    """Time-dependent coefficient set of the two-level Hamiltonian.

    Each coefficient is expression text, a parsed expression, a constant,
    or an opaque callable (used for scenario-derived components).
    """

    omega: float = 0.0
    x_re: Coefficient | str = 0.0
    x_im: Coefficient | str = 0.0
    y_re: Coefficient | str = 0.0
    y_im: Coefficient | str = 0.0
    z_re: Coefficient | str = 0.0
    z_im: Coefficient | str = 0.0

    def __post_init__(self):
        for name in _COEFF_NAMES:
            object.__setattr__(self, name, as_coefficient(getattr(self, name)))

    def coefficients(self, t: float) -> PathValues:
        return PathValues(*(coefficient_value(getattr(self, name), t) for name in _COEFF_NAMES))

    def coefficient_names(self) -> tuple[str, ...]:
        return _COEFF_NAMES


def hamiltonian(path: ParameterPath, t: float) -> np.ndarray:
    """H(t) = -1/2 [omega*I + x*sigma_x + y*sigma_y + z*sigma_z]."""
    c = path.coefficients(t)
    return -0.5 * (path.omega * IDENTITY_2 + c.x * PAULI_X + c.y * PAULI_Y + c.z * PAULI_Z)


def static_constraint_residual(path: ParameterPath, t: float) -> float:
    """How far the coefficients sit from the static-symmetry surface
    x_re*x_im = -y_re*y_im, z_re = 0."""
    c = path.coefficients(t)
    return max(abs(c.x_re * c.x_im + c.y_re * c.y_im), abs(c.z_re))


def discriminant_value(path: ParameterPath, t: float) -> float:
    """The static spectral discriminant, evaluated without precondition checks."""
    c = path.coefficients(t)
    return (c.x_re**2 + c.y_re**2) * (c.x_re**2 - c.y_im**2) - c.x_re**2 * c.z_im**2


def discriminant(
    path: ParameterPath,
    t: float,
    *,
    exceptional_band: float = 1e-12,
    constraint_tol: float = 1e-10,
) -> tuple[float, str]:
    """Classify the static regime at time t by the sign of the discriminant.

    Requires the static-symmetry constraints to hold and x_re(t) != 0
    (the closed-form energies divide by it).
    """
    resid = static_constraint_residual(path, t)
    if resid > constraint_tol:
        raise ConstraintError(
            f"static constraints violated at t={t}: residual {resid:.3e} > {constraint_tol:.1e}"
        )
    c = path.coefficients(t)
    if c.x_re == 0.0:
        raise ConstraintError(f"x_re vanishes at t={t}; static energies are undefined")
    value = discriminant_value(path, t)
    if abs(value) <= exceptional_band:
        regime = "exceptional"
    elif value > 0.0:
        regime = "symmetric"
    else:
        regime = "broken"
    return value, regime


def static_energies(path: ParameterPath, t: float, **kwargs) -> tuple[complex, complex]:
    """Closed-form static eigenvalues (-omega +- sqrt(disc)/x_re)/2.

    Real and distinct in the symmetric regime, a complex-conjugate pair in
    the broken regime.
    """
    value, _ = discriminant(path, t, **kwargs)
    c = path.coefficients(t)
    root = cmath.sqrt(value) / c.x_re
    return 0.5 * (-path.omega + root), 0.5 * (-path.omega - root)


def static_parity(path: ParameterPath, t: float, *, constraint_tol: float = 1e-10) -> np.ndarray:
    """Anti-diagonal parity solving P H = H^dag P with P^2 = I on the
    constraint surface."""
    resid = static_constraint_residual(path, t)
    if resid > constraint_tol:
        raise ConstraintError(
            f"static constraints violated at t={t}: residual {resid:.3e} > {constraint_tol:.1e}"
        )
    c = path.coefficients(t)
    scale = math.hypot(c.x_re, c.y_re)
    if scale == 0.0:
        raise ConstraintError(f"x_re and y_re both vanish at t={t}; parity is undefined")
    off = (c.x_re - 1j * c.y_re) / scale
    return np.array([[0.0, off], [np.conj(off), 0.0]])


# --------------------------------------------------------------------------
# Quadrature for the integrated sigma_z drive
# --------------------------------------------------------------------------


def adaptive_simpson(f: Callable[[float], float], a: float, b: float, tol: float = 1e-10) -> float:
    """Adaptive Simpson integral of a smooth scalar function."""
    if a == b:
        return 0.0

    def _simpson(lo, fl, hi, fh, fm):
        return (hi - lo) / 6.0 * (fl + 4.0 * fm + fh)

    def _recurse(lo, fl, hi, fh, fm, whole, eps, depth):
        mid = 0.5 * (lo + hi)
        lm = 0.5 * (lo + mid)
        rm = 0.5 * (mid + hi)
        flm = f(lm)
        frm = f(rm)
        left = _simpson(lo, fl, mid, fm, flm)
        right = _simpson(mid, fm, hi, fh, frm)
        if depth <= 0:
            raise ConstraintError(
                f"quadrature failed to converge on [{lo}, {hi}] (tolerance {eps:.1e})"
            )
        if abs(left + right - whole) <= 15.0 * eps:
            return left + right + (left + right - whole) / 15.0
        return (
            _recurse(lo, fl, mid, fm, flm, left, eps / 2.0, depth - 1)
            + _recurse(mid, fm, hi, fh, frm, right, eps / 2.0, depth - 1)
        )

    fa, fb = f(a), f(b)
    fm = f(0.5 * (a + b))
    whole = _simpson(a, fa, b, fb, fm)
    return _recurse(a, fa, b, fb, fm, whole, tol, 48)


class _RunningIntegral:
    """Integral from 0 to t of a scalar coefficient, with anchor caching.

    Repeated queries along a sweep only integrate the increment from the
    nearest cached anchor (bisected from a sorted anchor list), so grid
    evaluation stays cheap.  Constant integrands short-circuit to c*t.
    """

    def __init__(self, coefficient: Coefficient, tol: float = 1e-10):
        self._fun = lambda s: coefficient_value(coefficient, s)
        self._tol = tol
        self._const = None
        if isinstance(coefficient, (int, float)):
            self._const = float(coefficient)
        elif not callable(coefficient):
            self._const = expr.constant_value(coefficient)
        self._values: dict[float, float] = {0.0: 0.0}
        self._keys: list[float] = [0.0]

    def __call__(self, t: float) -> float:
        t = float(t)
        if self._const is not None:
            return self._const * t
        cached = self._values.get(t)
        if cached is not None:
            return cached
        pos = bisect.bisect_left(self._keys, t)
        candidates = self._keys[max(0, pos - 1):pos + 1]
        nearest = min(candidates, key=lambda a: abs(a - t))
        value = self._values[nearest] + adaptive_simpson(self._fun, nearest, t, self._tol)
        self._values[t] = value
        bisect.insort(self._keys, t)
        return value


# --------------------------------------------------------------------------
# Scenarios
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioConstants:
    """Integration constants of the closed-form Dyson maps."""

    c1: float
    c2: float = 0.0
    omega: float = 0.0


@dataclass(frozen=True)
class ScenarioSolution:
    """A closed-form Dyson-map scenario.

    ``eta``, ``eta_dot``, ``rho`` and ``hermitian_hamiltonian`` are pure
    time-indexed matrix functions; ``path`` is the completed coefficient
    set with all dependent components filled in.  ``metric_exponent`` is
    the integrated sigma_z drive of the hermitian map; ``y_coupling`` is
    the sigma_y coefficient of the mapped Hermitian Hamiltonian in the
    nonhermitian map.  Instances are immutable; evaluations are pure.
    """

    kind: str  # "hermitian" | "nonhermitian"
    constants: ScenarioConstants
    path: ParameterPath
    eta: Callable[[float], np.ndarray]
    eta_dot: Callable[[float], np.ndarray]
    rho: Callable[[float], np.ndarray]
    hermitian_hamiltonian: Callable[[float], np.ndarray]
    metric_exponent: Callable[[float], float] | None = None
    y_coupling: Callable[[float], float] | None = None

    def hamiltonian(self, t: float) -> np.ndarray:
        return hamiltonian(self.path, t)


DEFAULT_VALIDATION_TIMES = (0.0, 0.25, 0.5, 0.75, 1.0)


def dyson_residual(scenario: ScenarioSolution, t: float, *, step: float | None = None) -> float:
    """max |eta H eta^-1 + i eta_dot eta^-1 - h| with finite-difference eta_dot.

    This is the substitution certificate for a scenario: it is computed
    from the completed path and the closed-form matrices only, with the
    time derivative taken numerically, so it is independent of how the
    scenario was constructed.
    """
    eta = scenario.eta(t)
    eta_inv = np.linalg.inv(eta)
    eta_dot = operator_time_derivative(scenario.eta, t, step)
    h = scenario.hermitian_hamiltonian(t)
    return max_abs(eta @ scenario.hamiltonian(t) @ eta_inv + 1j * eta_dot @ eta_inv - h)


def _validate(scenario: ScenarioSolution, times: Sequence[float], tol: float) -> None:
    for t in times:
        resid = dyson_residual(scenario, t)
        if not (resid <= tol):
            raise ScenarioValidationError(
                f"{scenario.kind} scenario fails the Dyson-equation substitution check "
                f"at t={t}: residual {resid:.3e} > {tol:.1e}"
            )


def build_hermitian_map_scenario(
    x_re: Coefficient | str,
    y_re: Coefficient | str,
    z_im: Coefficient | str,
    constants: ScenarioConstants,
    *,
    validate_at: Sequence[float] | None = DEFAULT_VALIDATION_TIMES,
    residual_tol: float = 1e-8,
    quadrature_tol: float = 1e-10,
) -> ScenarioSolution:
    """Diagonal Hermitian Dyson map driven by the integrated sigma_z drive.

    Free functions: x_re, y_re, z_im.  Derived: with
    g = (a^2 - b^2) / (2 (a^2 + b^2)) built from the map entries
    a = (c1+c2) exp(d/2), b = (c1-c2) exp(-d/2), d(t) = integral of z_im,

        y_im = -2 x_re g,   x_im = +2 y_re g,   z_re = 0,

    so the static-symmetry constraints hold along the whole path, also
    where x_re crosses zero.  The metric is rho = diag(a^2, b^2) with
    det rho = (c1^2 - c2^2)^2 constant in time.
    """
    c1, c2 = constants.c1, constants.c2
    if abs(c1 * c1 - c2 * c2) <= 1e-12 * (c1 * c1 + c2 * c2 + 1.0):
        raise ConstraintError("constants need c1^2 != c2^2, else the metric is singular")
    x_re = as_coefficient(x_re)
    y_re = as_coefficient(y_re)
    z_im = as_coefficient(z_im)
    exponent = _RunningIntegral(z_im, quadrature_tol)

    def entries(t: float) -> tuple[float, float]:
        d = exponent(t)
        return (c1 + c2) * math.exp(0.5 * d), (c1 - c2) * math.exp(-0.5 * d)

    def eta(t: float) -> np.ndarray:
        a, b = entries(t)
        return np.array([[a, 0.0], [0.0, b]], dtype=complex)

    def eta_dot(t: float) -> np.ndarray:
        a, b = entries(t)
        rate = 0.5 * coefficient_value(z_im, t)
        return np.array([[a * rate, 0.0], [0.0, -b * rate]], dtype=complex)

    def rho(t: float) -> np.ndarray:
        a, b = entries(t)
        return np.array([[a * a, 0.0], [0.0, b * b]], dtype=complex)

    def shear(t: float) -> float:
        a, b = entries(t)
        return (a * a - b * b) / (2.0 * (a * a + b * b))

    path = ParameterPath(
        omega=constants.omega,
        x_re=x_re,
        x_im=lambda t: 2.0 * coefficient_value(y_re, t) * shear(t),
        y_re=y_re,
        y_im=lambda t: -2.0 * coefficient_value(x_re, t) * shear(t),
        z_re=0.0,
        z_im=z_im,
    )

    def h_mapped(t: float) -> np.ndarray:
        d = exponent(t)
        denom = (c1 * c1 + c2 * c2) * math.cosh(d) + 2.0 * c1 * c2 * math.sinh(d)
        off = (
            -(c1 * c1 - c2 * c2)
            * complex(coefficient_value(x_re, t), -coefficient_value(y_re, t))
            / (2.0 * denom)
        )
        half = -0.5 * constants.omega
        return np.array([[half, off], [np.conj(off), half]])

    scenario = ScenarioSolution(
        kind="hermitian",
        constants=constants,
        path=path,
        eta=eta,
        eta_dot=eta_dot,
        rho=rho,
        hermitian_hamiltonian=h_mapped,
        metric_exponent=exponent,
    )
    if validate_at:
        _validate(scenario, validate_at, residual_tol)
    return scenario


def build_nonhermitian_map_scenario(
    x_re: Coefficient | str,
    y_im: Coefficient | str,
    z_im: Coefficient | str,
    constants: ScenarioConstants,
    *,
    validate_at: Sequence[float] | None = DEFAULT_VALIDATION_TIMES,
    residual_tol: float = 1e-8,
) -> ScenarioSolution:
    """Non-Hermitian Dyson map built from the ratio y_im/x_re.

    Free functions: x_re, y_im, z_im, all required nonzero where sampled
    (the constraint scalar divides by y_im, the map by x_re).  With exact
    first derivatives of the free functions,

        A = z_im x_re^2 / y_im^2 - x_re' / y_im + x_re y_im' / y_im^2

    and the derived components are y_re = -z_im - 2A, x_im = 2 (y_im/x_re) A,
    z_re = y_im.  The map carries the time dependence only through the
    ratio y_im/x_re and an overall constant c1.
    """
    c1 = constants.c1
    if c1 == 0.0:
        raise ConstraintError("constant c1 must be nonzero")
    x_re = as_coefficient(x_re)
    y_im = as_coefficient(y_im)
    z_im = as_coefficient(z_im)

    def coupling(t: float) -> float:
        xr, dxr = coefficient_dual(x_re, t)
        yi, dyi = coefficient_dual(y_im, t)
        if yi == 0.0:
            raise ConstraintError(f"y_im vanishes at t={t}; the constraint scalar divides by it")
        zi = coefficient_value(z_im, t)
        return zi * xr * xr / (yi * yi) - dxr / yi + xr * dyi / (yi * yi)

    def ratio_dual(t: float) -> tuple[float, float]:
        xr, dxr = coefficient_dual(x_re, t)
        yi, dyi = coefficient_dual(y_im, t)
        if xr == 0.0:
            raise ConstraintError(f"x_re vanishes at t={t}; the map divides by it")
        k = yi / xr
        return k, (dyi * xr - yi * dxr) / (xr * xr)

    def eta(t: float) -> np.ndarray:
        k, _ = ratio_dual(t)
        return c1 * np.array([[k - 2.0, k], [-k, -k - 2.0]], dtype=complex)

    def eta_dot(t: float) -> np.ndarray:
        _, dk = ratio_dual(t)
        return c1 * dk * np.array([[1.0, 1.0], [-1.0, -1.0]], dtype=complex)

    def rho(t: float) -> np.ndarray:
        xr = coefficient_value(x_re, t)
        yi = coefficient_value(y_im, t)
        if xr == 0.0:
            raise ConstraintError(f"x_re vanishes at t={t}; the metric divides by it")
        f = 2.0 * c1 * c1 / (xr * xr)
        return f * np.array(
            [
                [yi * yi - 2.0 * yi * xr + 2.0 * xr * xr, yi * yi],
                [yi * yi, yi * yi + 2.0 * yi * xr + 2.0 * xr * xr],
            ],
            dtype=complex,
        )

    def x_im_fun(t: float) -> float:
        xr = coefficient_value(x_re, t)
        if xr == 0.0:
            raise ConstraintError(f"x_re vanishes at t={t}")
        return 2.0 * (coefficient_value(y_im, t) / xr) * coupling(t)

    path = ParameterPath(
        omega=constants.omega,
        x_re=x_re,
        x_im=x_im_fun,
        y_re=lambda t: -coefficient_value(z_im, t) - 2.0 * coupling(t),
        y_im=y_im,
        z_re=lambda t: coefficient_value(y_im, t),
        z_im=z_im,
    )

    def h_mapped(t: float) -> np.ndarray:
        a = coupling(t)
        xr = coefficient_value(x_re, t)
        half = -0.5 * constants.omega
        return np.array(
            [[half, -0.5 * xr - 1j * a], [-0.5 * xr + 1j * a, half]]
        )

    scenario = ScenarioSolution(
        kind="nonhermitian",
        constants=constants,
        path=path,
        eta=eta,
        eta_dot=eta_dot,
        rho=rho,
        hermitian_hamiltonian=h_mapped,
        y_coupling=coupling,
    )
    if validate_at:
        _validate(scenario, validate_at, residual_tol)
    return scenario
