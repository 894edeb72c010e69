"""Time evolution, smooth eigen-trajectories, and phase accumulation.

The observable expansion basis is the instantaneous eigensystem of the
energy operator, not of the Hamiltonian; expanded in that basis the
accumulated geometric phase is real, also where the static spectrum is
complex.  The geometric-phase rate for level n is

    rate_n = i <psi_n| rho (d/dt + eta^-1 eta_dot) |psi_n>,

with the state metric-normalized.  Equivalently, rate_n = i <chi_n|d/dt
chi_n> for chi_n = eta psi_n, which is the mapped-Hermitian-frame form
used as a cross check.

Gauge handling: trajectories are phase-aligned by maximal overlap between
consecutive points (discrete parallel transport), so the rate integrand
carries no gauge spike and the phase of a closed loop lives almost
entirely in the endpoint holonomy <psi_n(0)|rho|psi_n(T)>.  Loop totals
add that closing term and are compared modulo 2 pi; they are invariant
under smooth periodic rephasings of the trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from tdnh.linalg import eig_biorthogonal, metric_normalized
from tdnh.model import ParameterPath, ScenarioSolution, coefficient_value

__all__ = [
    "TimeGrid",
    "NormDriftError",
    "LevelCrossingError",
    "GaugeAlignmentError",
    "OpenPathError",
    "NonRealEnergyError",
    "EigenTrajectory",
    "BerryLoopResult",
    "AdiabaticDecomposition",
    "tdse_integrate",
    "eigen_trajectory",
    "scenario_eigen_trajectory",
    "dynamical_phase",
    "berry_rate",
    "berry_rates",
    "hermitian_frame_rates",
    "geometric_phase",
    "berry_phase_loop",
    "path_closure_residual",
    "closed_form_berry_hermitian_map",
    "closed_form_berry_nonhermitian_map",
    "adiabatic_decompose",
    "wrap_angle",
]


class NormDriftError(RuntimeError):
    """Metric norm drifted: the step size is too coarse for this drive."""


class LevelCrossingError(RuntimeError):
    """Level matching between consecutive grid points is ambiguous."""


class GaugeAlignmentError(RuntimeError):
    """Consecutive eigenvector overlap too small for a trusted gauge."""


class OpenPathError(ValueError):
    """The parameter path does not close over the grid."""


class NonRealEnergyError(ValueError):
    """Instantaneous energies carry an imaginary part above tolerance."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid with ``steps`` intervals (``steps + 1`` points)."""

    start: float
    stop: float
    steps: int

    def __post_init__(self):
        if not self.stop > self.start:
            raise ValueError("grid needs stop > start")
        if int(self.steps) != self.steps or self.steps < 2:
            raise ValueError("grid needs an integer steps >= 2")

    @property
    def dt(self) -> float:
        return (self.stop - self.start) / self.steps

    @property
    def n_points(self) -> int:
        return self.steps + 1

    def times(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps + 1)


def tdse_integrate(
    h_fun: Callable[[float], np.ndarray],
    psi0,
    grid: TimeGrid,
    *,
    metric: Callable[[float], np.ndarray] | None = None,
    drift_limit: float = 1e-3,
) -> np.ndarray:
    """RK4 solution of i d/dt psi = H(t) psi on the grid.

    When a metric function is supplied, <psi|rho|psi> is monitored along
    the trajectory; drift beyond ``drift_limit`` (relative) aborts with
    :class:`NormDriftError`, which is the step-size guard.
    Returns the (n_points, dim) state trajectory.
    """
    psi = np.asarray(psi0, dtype=complex).reshape(-1)
    if not np.any(psi):
        raise ValueError("initial state must be nonzero")
    times = grid.times()
    dt = grid.dt
    out = np.empty((times.shape[0], psi.shape[0]), dtype=complex)
    out[0] = psi

    def rhs(t: float, state: np.ndarray) -> np.ndarray:
        return -1j * (np.asarray(h_fun(t), dtype=complex) @ state)

    norm0 = None
    if metric is not None:
        norm0 = float(np.real(psi.conj() @ np.asarray(metric(times[0])) @ psi))

    for k in range(times.shape[0] - 1):
        t = times[k]
        k1 = rhs(t, psi)
        k2 = rhs(t + 0.5 * dt, psi + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, psi + 0.5 * dt * k2)
        k4 = rhs(t + dt, psi + dt * k3)
        psi = psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = psi
        if norm0 is not None:
            norm = float(np.real(psi.conj() @ np.asarray(metric(times[k + 1])) @ psi))
            if abs(norm - norm0) > drift_limit * (1.0 + abs(norm0)):
                raise NormDriftError(
                    f"metric norm drifted by {abs(norm - norm0):.3e} at t={times[k + 1]:.6g}; "
                    "use a finer grid"
                )
    return out


@dataclass(frozen=True)
class EigenTrajectory:
    """Instantaneous eigensystem of a time-indexed operator, tracked smoothly.

    ``right[k, :, n]`` is the metric-normalized right vector of level n at
    ``grid.times()[k]``; levels are matched between consecutive points by
    maximal left/right overlap and phase-aligned so those overlaps have
    positive real part.  ``overlaps[k, n]`` is |<phi_n(t_k)|psi_n(t_k+1)>|.
    """

    grid: TimeGrid
    energies: np.ndarray   # (n_points, dim) complex
    right: np.ndarray      # (n_points, dim, dim)
    left: np.ndarray       # (n_points, dim, dim)
    overlaps: np.ndarray   # (n_points - 1, dim) float

    @property
    def dim(self) -> int:
        return self.energies.shape[1]

    @property
    def min_overlap(self) -> float:
        return float(np.min(self.overlaps)) if self.overlaps.size else 1.0

    def rephased(self, phases: np.ndarray) -> "EigenTrajectory":
        """Apply per-level phase functions exp(i*phases[k, n]) to the states.

        Both vectors of a pair rotate together, preserving
        biorthonormality.  Used to probe gauge invariance.
        """
        factor = np.exp(1j * np.asarray(phases))
        right = self.right * factor[:, None, :]
        left = self.left * factor[:, None, :]
        return EigenTrajectory(self.grid, self.energies, right, left, self.overlaps)


def eigen_trajectory(
    op_fun: Callable[[float], np.ndarray],
    metric_fun: Callable[[float], np.ndarray],
    grid: TimeGrid,
    *,
    cond_limit: float = 1e8,
    tie_tol: float = 1e-6,
) -> EigenTrajectory:
    times = grid.times()
    first = metric_normalized(
        eig_biorthogonal(op_fun(times[0]), cond_limit=cond_limit, ordering="real_desc"),
        metric_fun(times[0]),
    )
    dim = first.dim
    energies = np.empty((times.shape[0], dim), dtype=complex)
    right = np.empty((times.shape[0], dim, dim), dtype=complex)
    left = np.empty((times.shape[0], dim, dim), dtype=complex)
    overlaps = np.empty((times.shape[0] - 1, dim))
    energies[0] = first.values
    right[0] = first.right
    left[0] = first.left

    for k in range(1, times.shape[0]):
        es = metric_normalized(
            eig_biorthogonal(op_fun(times[k]), cond_limit=cond_limit, ordering="none"),
            metric_fun(times[k]),
        )
        # match levels to the previous point by maximal left/right overlap
        overlap = np.abs(left[k - 1].conj().T @ es.right)  # [prev level, new index]
        order = np.empty(dim, dtype=int)
        taken = np.zeros(dim, dtype=bool)
        for n in range(dim):
            row = np.where(taken, -np.inf, overlap[n])
            best = int(np.argmax(row))
            runner_up = np.max(np.where(np.arange(dim) == best, -np.inf, row))
            if runner_up > -np.inf and abs(row[best] - runner_up) <= tie_tol:
                raise LevelCrossingError(
                    f"level matching ambiguous at t={times[k]:.6g}: overlaps "
                    f"{row[best]:.6f} vs {runner_up:.6f}"
                )
            order[n] = best
            taken[best] = True
        vals = es.values[order]
        r = es.right[:, order].copy()
        l = es.left[:, order].copy()
        for n in range(dim):
            z = left[k - 1][:, n].conj() @ r[:, n]
            mag = abs(z)
            if mag > 0.0:
                phase = z / mag
                r[:, n] /= phase
                l[:, n] /= phase
            overlaps[k - 1, n] = mag
        energies[k] = vals
        right[k] = r
        left[k] = l
    return EigenTrajectory(grid, energies, right, left, overlaps)


def scenario_eigen_trajectory(scenario: ScenarioSolution, grid: TimeGrid, **kwargs) -> EigenTrajectory:
    """Eigen-trajectory of a scenario's energy operator."""
    from tdnh.operators import scenario_energy_operator

    return eigen_trajectory(
        lambda t: scenario_energy_operator(scenario, t), scenario.rho, grid, **kwargs
    )


def dynamical_phase(traj: EigenTrajectory, *, imag_tol: float = 1e-8) -> np.ndarray:
    """Cumulative dynamical phases  -integral of E_n  (trapezoid), per level.

    The energies must be real within ``imag_tol``; a larger imaginary part
    means the expansion basis is wrong and raises.
    """
    worst = float(np.max(np.abs(traj.energies.imag)))
    if worst > imag_tol:
        raise NonRealEnergyError(f"instantaneous energies have |Im| up to {worst:.3e}")
    times = traj.grid.times()
    rates = -traj.energies.real
    return _cumtrapz(rates, times)


def _cumtrapz(values: np.ndarray, times: np.ndarray) -> np.ndarray:
    out = np.zeros_like(values)
    dt = np.diff(times)[:, None]
    out[1:] = np.cumsum(0.5 * dt * (values[1:] + values[:-1]), axis=0)
    return out


def berry_rate(psi, metric, dyson, dyson_dot, dpsi) -> complex:
    """i <psi| rho (dpsi + eta^-1 eta_dot psi)> for one metric-normalized state.

    Returned complex: the real part is the geometric-phase rate, the
    imaginary part is a residual that must vanish for consistent frames.
    """
    psi = np.asarray(psi, dtype=complex)
    connection = np.asarray(dpsi, dtype=complex) + np.linalg.solve(
        np.asarray(dyson, dtype=complex), np.asarray(dyson_dot, dtype=complex) @ psi
    )
    return complex(1j * (psi.conj() @ np.asarray(metric, dtype=complex) @ connection))


def _time_derivatives(states: np.ndarray, dt: float, closure: np.ndarray | None) -> np.ndarray:
    """Central differences along axis 0; endpoints use second-order
    one-sided stencils, or periodic wrap-around when closure phases are
    given (closed loops)."""
    n = states.shape[0]
    d = np.empty_like(states)
    d[1:-1] = (states[2:] - states[:-2]) / (2.0 * dt)
    if closure is None:
        d[0] = (-3.0 * states[0] + 4.0 * states[1] - states[2]) / (2.0 * dt)
        d[-1] = (3.0 * states[-1] - 4.0 * states[-2] + states[-3]) / (2.0 * dt)
    else:
        # states[n-1] is one step before states[0] up to the loop holonomy
        before = states[n - 2] * np.conj(closure)[None, :] if states.ndim == 3 else states[n - 2] * np.conj(closure)
        after = states[1] * closure[None, :] if states.ndim == 3 else states[1] * closure
        d[0] = (states[1] - before) / (2.0 * dt)
        d[-1] = (after - states[n - 2]) / (2.0 * dt)
    return d


def _loop_closure_phases(traj: EigenTrajectory, metric0: np.ndarray) -> np.ndarray:
    """exp(i phi_n) with phi_n = arg <psi_n(0)| rho(0) |psi_n(T)>."""
    phases = np.empty(traj.dim, dtype=complex)
    for n in range(traj.dim):
        z = traj.right[0][:, n].conj() @ metric0 @ traj.right[-1][:, n]
        phases[n] = z / abs(z)
    return phases


def berry_rates(
    traj: EigenTrajectory,
    rho_fun: Callable[[float], np.ndarray],
    eta_fun: Callable[[float], np.ndarray],
    eta_dot_fun: Callable[[float], np.ndarray],
    *,
    periodic: bool = False,
) -> np.ndarray:
    """Geometric-phase rate per grid point and level, complex (n_points, dim).

    With ``periodic=True`` the endpoint stencils wrap around the loop,
    rotated by the per-level closure phases.
    """
    times = traj.grid.times()
    dt = traj.grid.dt
    closure = _loop_closure_phases(traj, np.asarray(rho_fun(times[0]))) if periodic else None
    dstates = _time_derivatives(traj.right, dt, closure)
    rates = np.empty((times.shape[0], traj.dim), dtype=complex)
    for k, t in enumerate(times):
        rho = np.asarray(rho_fun(t), dtype=complex)
        eta = np.asarray(eta_fun(t), dtype=complex)
        eta_dot = np.asarray(eta_dot_fun(t), dtype=complex)
        shift = np.linalg.solve(eta, eta_dot)
        for n in range(traj.dim):
            psi = traj.right[k][:, n]
            connection = dstates[k][:, n] + shift @ psi
            rates[k, n] = 1j * (psi.conj() @ rho @ connection)
    return rates


def hermitian_frame_rates(
    traj: EigenTrajectory,
    eta_fun: Callable[[float], np.ndarray],
    *,
    periodic: bool = False,
    rho_fun: Callable[[float], np.ndarray] | None = None,
) -> np.ndarray:
    """i <chi|d chi/dt> with chi = eta psi, same stencils as berry_rates.

    This is the mapped-Hermitian-frame route to the same rate; agreement
    with :func:`berry_rates` is a consistency check between the metric
    and the map.
    """
    times = traj.grid.times()
    dt = traj.grid.dt
    chi = np.empty_like(traj.right)
    for k, t in enumerate(times):
        chi[k] = np.asarray(eta_fun(t), dtype=complex) @ traj.right[k]
    closure = None
    if periodic:
        if rho_fun is None:
            raise ValueError("periodic hermitian-frame rates need rho_fun for closure phases")
        closure = _loop_closure_phases(traj, np.asarray(rho_fun(times[0])))
    dchi = _time_derivatives(chi, dt, closure)
    rates = np.empty((times.shape[0], traj.dim), dtype=complex)
    for k in range(times.shape[0]):
        for n in range(traj.dim):
            rates[k, n] = 1j * (chi[k][:, n].conj() @ dchi[k][:, n])
    return rates


def geometric_phase(rates: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """Cumulative geometric phases from the real part of the rates."""
    return _cumtrapz(rates.real, grid.times())


def path_closure_residual(path: ParameterPath, grid: TimeGrid) -> float:
    """max coefficient mismatch between the two grid endpoints."""
    t0, t1 = grid.start, grid.stop
    return max(
        abs(coefficient_value(getattr(path, name), t0) - coefficient_value(getattr(path, name), t1))
        for name in path.coefficient_names()
    )


@dataclass(frozen=True)
class BerryLoopResult:
    phases: np.ndarray       # (dim,) real, defined modulo 2 pi
    max_imag_rate: float
    rates: np.ndarray        # (n_points, dim) complex


def berry_phase_loop(
    traj: EigenTrajectory,
    path: ParameterPath,
    rho_fun: Callable[[float], np.ndarray],
    eta_fun: Callable[[float], np.ndarray],
    eta_dot_fun: Callable[[float], np.ndarray],
    *,
    closure_tol: float = 1e-10,
    min_overlap: float = 0.9,
) -> BerryLoopResult:
    """Geometric phases for one closed traversal of the parameter path.

    Trapezoidal integral of the rate plus the endpoint holonomy
    arg <psi_n(0)|rho(0)|psi_n(T)>, which closes the transported gauge.
    The result is defined modulo 2 pi and invariant under smooth periodic
    rephasings of the trajectory.
    """
    resid = path_closure_residual(path, traj.grid)
    if resid > closure_tol:
        raise OpenPathError(
            f"parameter path endpoints differ by {resid:.3e} (> {closure_tol:.1e}); "
            "the loop phase needs a closed path"
        )
    if traj.min_overlap < min_overlap:
        raise GaugeAlignmentError(
            f"minimum consecutive overlap {traj.min_overlap:.3f} below {min_overlap}; "
            "refine the grid"
        )
    rates = berry_rates(traj, rho_fun, eta_fun, eta_dot_fun, periodic=True)
    totals = geometric_phase(rates, traj.grid)[-1]
    closure = _loop_closure_phases(traj, np.asarray(rho_fun(traj.grid.times()[0])))
    phases = totals + np.angle(closure)
    return BerryLoopResult(phases, float(np.max(np.abs(rates.imag))), rates)


def wrap_angle(angle: float) -> float:
    """Map an angle difference into (-pi, pi]."""
    wrapped = math.fmod(angle + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


def _unwrapped_angle_sweep(xs: np.ndarray, ys: np.ndarray) -> float:
    if np.min(np.hypot(xs, ys)) == 0.0:
        raise ValueError("path passes through the origin; the angle is undefined")
    theta = np.unwrap(np.arctan2(ys, xs))
    return float(theta[-1] - theta[0])


def closed_form_berry_hermitian_map(path: ParameterPath, grid: TimeGrid) -> float:
    """Half the continuous angle swept by (x_re, y_re) over the grid.

    Equals the rate quadrature for the hermitian-map scenario; always real.
    The angle is accumulated atan2-style along the samples, so winding
    paths are handled; the branch at the endpoints is the continuous one.
    """
    times = grid.times()
    xs = np.array([coefficient_value(path.x_re, t) for t in times])
    ys = np.array([coefficient_value(path.y_re, t) for t in times])
    return 0.5 * _unwrapped_angle_sweep(xs, ys)


def closed_form_berry_nonhermitian_map(scenario: ScenarioSolution, grid: TimeGrid) -> float:
    """Minus half the continuous angle swept by (x_re, 2A) over the grid."""
    if scenario.y_coupling is None:
        raise ValueError("scenario does not define the mapped sigma_y coupling")
    times = grid.times()
    xs = np.array([coefficient_value(scenario.path.x_re, t) for t in times])
    ys = np.array([2.0 * scenario.y_coupling(t) for t in times])
    return -0.5 * _unwrapped_angle_sweep(xs, ys)


@dataclass(frozen=True)
class AdiabaticDecomposition:
    """Expansion coefficients of a state trajectory in the tracked basis.

    ``coefficients[k, n] = <phi_n(t_k)|psi(t_k)> exp(-i(geom + dyn))``;
    under adiabatic driving they stay at their initial values, and
    ``deviations`` records the worst excursion per level.
    """

    coefficients: np.ndarray  # (n_points, dim) complex
    deviations: np.ndarray    # (dim,) float

    @property
    def max_deviation(self) -> float:
        return float(np.max(self.deviations))


def adiabatic_decompose(
    states: np.ndarray,
    traj: EigenTrajectory,
    dynamical: np.ndarray,
    geometric: np.ndarray,
) -> AdiabaticDecomposition:
    n_points, dim = traj.energies.shape
    coeff = np.empty((n_points, dim), dtype=complex)
    for k in range(n_points):
        raw = traj.left[k].conj().T @ states[k]
        coeff[k] = raw * np.exp(-1j * (geometric[k] + dynamical[k]))
    deviations = np.max(np.abs(coeff - coeff[0]), axis=0)
    return AdiabaticDecomposition(coeff, deviations)
