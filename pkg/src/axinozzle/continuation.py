"""Parameter continuation: shield shrinking, domain extension, flux sweeps.

The solves in this package carry two regularizations besides the grid: the
axis shield delta > 0 that keeps the 1/(r + delta) weights bounded, and the
finite truncation length L of the nozzle. Physical answers are limits
delta -> 0 and L -> infinity, reached here by warm-started continuation
with explicit Cauchy certificates instead of extrapolation.

The mass flux enters as the three-dimensional flux m0 = 2 pi m. Increasing
m0 raises the speed everywhere; past a critical value the subsonic branch
ceases to exist and the solver reports the momentum cutoff engaging. The
critical flux is bracketed by bisection on that signal, and the approach to
the sonic state is studied on a geometric sequence of fluxes below it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .gas import GasModel
from .nozzle import MappedGrid, NozzleProfile, build_grid
from .solver import StreamSolution, newton_solve
from .fields import (
    FlowField,
    default_compact,
    entropy_pair_residual,
    far_field_error,
    flux_drift,
    velocity_from_stream,
    wall_speed_max,
    TWO_PI,
)


class DeltaStep(NamedTuple):
    delta: float
    diff: float        # sup |psi - psi at previous delta|
    iterations: int


@dataclass
class ShrinkResult:
    """Outcome of driving the axis shield to zero at fixed grid."""

    solution: StreamSolution
    steps: list[DeltaStep]
    converged: bool
    tol: float

    @property
    def delta(self) -> float:
        return self.solution.grid.delta


def shrink_delta(grid: MappedGrid, gas: GasModel, m: float,
                 delta0: float | None = None, factor: float = 0.5,
                 tol: float | None = None, max_steps: int = 60,
                 bc=None) -> ShrinkResult:
    """Solve along a geometric shield schedule until the iterates settle.

    Starts at delta0 (default b/10) and multiplies by factor each step,
    warm starting from the previous solution; the nodes do not move when
    delta changes, so states transfer directly.  Stops once the sup
    difference between consecutive solutions drops below tol (default
    1e-8 * max(1, m)); the differences themselves shrink like delta, so
    the schedule certifies its own limit.
    """
    if not 0.0 < factor < 1.0:
        raise ValueError("shrink_delta: factor must lie in (0, 1)")
    if delta0 is None:
        delta0 = 0.1 * grid.profile.b
    if tol is None:
        tol = 1e-8 * max(1.0, m)
    delta = float(delta0)
    steps: list[DeltaStep] = []
    prev_psi = None
    solution = None
    for _ in range(max_steps):
        work = grid.with_delta(delta)
        solution = newton_solve(work, gas, m, init=prev_psi, bc=bc)
        if not solution.converged:
            return ShrinkResult(solution, steps, False, tol)
        diff = float("nan") if prev_psi is None else float(np.abs(solution.psi - prev_psi).max())
        steps.append(DeltaStep(delta, diff, solution.iterations))
        if prev_psi is not None and diff <= tol:
            return ShrinkResult(solution, steps, True, tol)
        prev_psi = solution.psi
        delta *= factor
    return ShrinkResult(solution, steps, False, tol)


@dataclass
class ExtensionResult:
    """Outcome of doubling the truncation length until solutions agree."""

    solution: StreamSolution
    lengths: list[float]
    diffs: list[float]   # sup over the previous domain's nodes
    certified: bool
    tol: float


def extend_domain(profile: NozzleProfile, gas: GasModel, m: float,
                  length: float, nx: int, nr: int, delta: float,
                  tol: float | None = None, max_doublings: int = 6) -> ExtensionResult:
    """Double the truncation length until the solution stops moving.

    Doubling length and nx together keeps the axial spacing fixed, so the
    nodes of each domain are a subset of the next; the sup difference on
    the common nodes measures the truncation error directly.  Certified
    once that difference falls below tol (default 1e-6 * max(1, m)).
    """
    if tol is None:
        tol = 1e-6 * max(1.0, m)
    grid = build_grid(profile, length=length, nx=nx, nr=nr, delta=delta)
    solution = newton_solve(grid, gas, m)
    lengths = [float(length)]
    diffs: list[float] = []
    for _ in range(max_doublings):
        if not solution.converged:
            return ExtensionResult(solution, lengths, diffs, False, tol)
        new_length = 2.0 * lengths[-1]
        new_nx = 2 * solution.grid.nx
        big = build_grid(profile, length=new_length, nx=new_nx, nr=nr, delta=delta)
        # warm start: copy the old interior, keep the datum elsewhere
        offset = (new_nx - solution.grid.nx) // 2
        init = m * grid.sigma[None, :] ** 2 * np.ones((new_nx + 1, 1))
        init[offset:offset + solution.grid.nx + 1, :] = solution.psi
        new_solution = newton_solve(big, gas, m, init=init)
        sub = new_solution.psi[offset:offset + solution.grid.nx + 1, :]
        diff = float(np.abs(sub - solution.psi).max())
        lengths.append(new_length)
        diffs.append(diff)
        solution = new_solution
        if new_solution.converged and diff <= tol:
            return ExtensionResult(solution, lengths, diffs, True, tol)
    return ExtensionResult(solution, lengths, diffs, False, tol)


@dataclass
class SweepPoint:
    """One converged (or failed) solve of a mass flux sweep."""

    m0: float
    converged: bool
    cutoff_active: bool
    mach_max: float
    speed_min: float
    wall_speed: float
    flux_drift: float
    far_field: tuple[float, float]
    iterations: int


@dataclass
class SweepResult:
    points: list[SweepPoint]
    grid: MappedGrid

    def mach_values(self) -> np.ndarray:
        return np.array([p.mach_max for p in self.points])


def _survey(solution: StreamSolution, gas: GasModel) -> tuple[FlowField, SweepPoint]:
    flow = velocity_from_stream(solution, gas)
    point = SweepPoint(
        m0=TWO_PI * solution.m,
        converged=solution.converged,
        cutoff_active=solution.cutoff_active,
        mach_max=float(flow.mach.max()),
        speed_min=float(flow.q.min()),
        wall_speed=wall_speed_max(flow),
        flux_drift=flux_drift(flow),
        far_field=far_field_error(flow, gas),
        iterations=solution.iterations,
    )
    return flow, point


def mass_flux_sweep(grid: MappedGrid, gas: GasModel, m0_values,
                    warm: bool = True) -> SweepResult:
    """Solve a sequence of mass fluxes on one grid, warm starting in order.

    Each start state is the previous solution rescaled by the flux ratio,
    which is exact for the linear small-flux regime and close elsewhere.
    Failures are recorded, not raised.
    """
    points: list[SweepPoint] = []
    prev: StreamSolution | None = None
    for m0 in np.asarray(m0_values, dtype=float):
        if m0 < 0.0:
            raise ValueError("mass_flux_sweep: fluxes must be >= 0")
        m = m0 / TWO_PI
        init = None
        if warm and prev is not None and prev.converged and prev.m > 0.0:
            init = prev.psi * (m / prev.m)
        solution = newton_solve(grid, gas, m, init=init)
        _, point = _survey(solution, gas)
        points.append(point)
        prev = solution
    return SweepResult(points, grid)


@dataclass
class CriticalFluxEstimate:
    """Bisection bracket [lo, hi] for the critical three-dimensional flux."""

    lo: float
    hi: float
    iterations: int
    open_upper_bound: bool
    solution_lo: StreamSolution | None = None

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)


def _critical_signal(solution: StreamSolution, gas: GasModel) -> bool:
    """True once the subsonic continuation past this flux is barred."""
    if not solution.converged:
        return True
    if solution.cutoff_active:
        return True
    flow = velocity_from_stream(solution, gas)
    return bool(flow.mach.max() >= gas.m_tilde)


def find_critical_flux(grid: MappedGrid, gas: GasModel,
                       tol: float | None = None,
                       lo: float | None = None, hi: float | None = None,
                       hi_cap: float | None = None,
                       max_bisect: int = 60) -> CriticalFluxEstimate:
    """Bracket the largest flux carrying a strictly subsonic solve.

    The supercritical signal is the momentum cutoff engaging anywhere (or
    the Mach number reaching the truncation onset, or a failed solve).  A
    throat of radius b passes at most pi b^2 in these units, so the
    upward search is capped near that bound; if even the cap shows no
    signal the bracket is reported open.
    """
    area = np.pi * grid.profile.b ** 2
    if tol is None:
        tol = 1e-4 * area * gas.m_tilde
    if lo is None:
        lo = 0.1 * area * gas.m_tilde
    if hi is None:
        hi = area
    if hi_cap is None:
        hi_cap = 4.0 * area
    if not 0.0 <= lo < hi:
        raise ValueError("find_critical_flux: need 0 <= lo < hi")

    def probe(m0: float, init=None) -> tuple[bool, StreamSolution]:
        solution = newton_solve(grid, gas, m0 / TWO_PI, init=init)
        return _critical_signal(solution, gas), solution

    iterations = 0
    best_sub: StreamSolution | None = None

    # push lo down until it is genuinely subcritical
    while lo > 0.0:
        bad, sol = probe(lo)
        iterations += 1
        if not bad:
            best_sub = sol
            break
        hi = lo
        lo *= 0.5
        if iterations > 60:
            raise RuntimeError("find_critical_flux: no subcritical flux found")

    # push hi up until the signal fires, within the physical cap
    while True:
        bad, sol = probe(hi, init=_scaled(best_sub, hi))
        iterations += 1
        if bad:
            break
        best_sub = sol
        lo = hi
        if hi >= hi_cap:
            return CriticalFluxEstimate(lo, hi, iterations, True, best_sub)
        hi = min(2.0 * hi, hi_cap)

    while hi - lo > tol and iterations < max_bisect + 10:
        mid = 0.5 * (lo + hi)
        bad, sol = probe(mid, init=_scaled(best_sub, mid))
        iterations += 1
        if bad:
            hi = mid
        else:
            lo = mid
            best_sub = sol
    return CriticalFluxEstimate(lo, hi, iterations, False, best_sub)


def _scaled(solution: StreamSolution | None, m0: float):
    if solution is None or not solution.converged or solution.m <= 0.0:
        return None
    return solution.psi * (m0 / (TWO_PI * solution.m))


@dataclass
class SonicLimitStudy:
    """Cauchy record of solves approaching the critical flux from below."""

    m0_values: list[float]
    mach_values: list[float]
    velocity_diffs: list[float]   # rms on the window, consecutive pairs
    momentum_diffs: list[float]
    entropy_plus: list[float]
    entropy_minus: list[float]
    window: tuple[float, float, float, float]
    gap_bound: float              # certified bound on 1 - max Mach
    certified: bool
    reasons: dict = field(default_factory=dict)


def sonic_limit_study(grid: MappedGrid, gas: GasModel,
                      m0_anchor: float | None = None,
                      n_terms: int = 6, ratio: float = 0.5,
                      window: tuple[float, float, float, float] | None = None,
                      gap_factor: float = 10.0) -> SonicLimitStudy:
    """Drive the flux toward its critical value and certify the approach.

    Solves at m0_anchor * (1 - 0.5 * ratio**k); the anchor defaults to the
    certified subcritical end of a fresh critical-flux bracket.  On a
    compact window away from the axis and the wall the consecutive
    velocity and momentum differences are recorded in rms, together with
    the entropy pair residuals.  Certification requires the max Mach
    numbers to be nondecreasing, the window differences to shrink, and
    the final sonic gap 1 - M to be within gap_factor times the
    truncation gap 1 - m_tilde.
    """
    if n_terms < 2:
        raise ValueError("sonic_limit_study: need at least two terms")
    if not 0.0 < ratio < 1.0:
        raise ValueError("sonic_limit_study: ratio must lie in (0, 1)")
    if m0_anchor is None:
        bracket = find_critical_flux(grid, gas)
        if bracket.open_upper_bound:
            raise RuntimeError("sonic_limit_study: no critical flux below the cap")
        m0_anchor = bracket.lo
    if window is None:
        window = default_compact(grid)
    x_lo, x_hi, r_lo, r_hi = window
    mask = ((grid.x_nodes >= x_lo) & (grid.x_nodes <= x_hi)
            & (grid.r_nodes >= r_lo) & (grid.r_nodes <= r_hi))
    if not mask.any():
        raise ValueError("sonic_limit_study: window contains no grid nodes")

    m0s = [m0_anchor * (1.0 - 0.5 * ratio**k) for k in range(n_terms)]
    machs: list[float] = []
    vel_diffs: list[float] = []
    mom_diffs: list[float] = []
    ent_plus: list[float] = []
    ent_minus: list[float] = []
    prev_flow: FlowField | None = None
    prev_solution: StreamSolution | None = None
    for m0 in m0s:
        solution = newton_solve(grid, gas, m0 / TWO_PI, init=_scaled(prev_solution, m0))
        if not solution.converged:
            return SonicLimitStudy(m0s, machs, vel_diffs, mom_diffs, ent_plus,
                                   ent_minus, window, float("nan"), False,
                                   {"non_convergence_at": m0})
        flow = velocity_from_stream(solution, gas)
        machs.append(float(flow.mach.max()))
        ent = entropy_pair_residual(flow, gas, rect=window)
        ent_plus.append(ent.plus)
        ent_minus.append(ent.minus)
        if prev_flow is not None:
            dv = np.sqrt(np.mean((flow.U - prev_flow.U)[mask] ** 2
                                 + (flow.V - prev_flow.V)[mask] ** 2))
            dm = np.sqrt(np.mean((flow.rho * flow.U - prev_flow.rho * prev_flow.U)[mask] ** 2
                                 + (flow.rho * flow.V - prev_flow.rho * prev_flow.V)[mask] ** 2))
            vel_diffs.append(float(dv))
            mom_diffs.append(float(dm))
        prev_flow = flow
        prev_solution = solution

    gap = 1.0 - machs[-1]
    reasons = {}
    if any(machs[k + 1] < machs[k] - 1e-9 for k in range(len(machs) - 1)):
        reasons["mach_not_monotone"] = machs
    if vel_diffs and not vel_diffs[-1] < vel_diffs[0]:
        reasons["velocity_diffs_not_shrinking"] = vel_diffs
    if mom_diffs and not mom_diffs[-1] < mom_diffs[0]:
        reasons["momentum_diffs_not_shrinking"] = mom_diffs
    if not gap <= gap_factor * (1.0 - gas.m_tilde):
        reasons["sonic_gap_too_wide"] = gap
    return SonicLimitStudy(m0s, machs, vel_diffs, mom_diffs, ent_plus,
                           ent_minus, window, gap, not reasons, reasons)
