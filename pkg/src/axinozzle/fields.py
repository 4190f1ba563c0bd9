"""Velocity fields and physical diagnostics of a stream-function solution.

The stream function determines the meridian velocity through

    rho U = psi_r / (r + delta),      rho V = -psi_x / (r + delta)

with the density recovered from the subsonic density-momentum relation at
squared momentum |grad psi / (r + delta)|^2.  On the axis the direct
formulas degenerate as delta shrinks, so axial values are filled by even
quadratic extrapolation in r and the radial velocity vanishes there.

The diagnostics mirror the qualitative theory for these flows: maximum
principle and barrier bounds for psi, positive axial velocity, flow angle
pinched by the wall slope range, station-wise mass flux conservation,
uniform far fields on both flat ends, approximate irrotationality, and
compactly supported weak residuals of the two momentum entropy pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .gas import GasModel
from .nozzle import MappedGrid
from .solver import StreamSolution, nodal_gradients, ResidualNorms

TWO_PI = 2.0 * np.pi


class FlowAngleError(ValueError):
    """Raised when the flow angle is requested with a nonpositive axial speed."""


class AngleCheck(NamedTuple):
    omega: np.ndarray
    measured: tuple[float, float]  # (min, max) over the nodes
    bounds: tuple[float, float]    # exact wall-slope angle bounds


class PositivityCheck(NamedTuple):
    min_u: float
    location: tuple[float, float]


class EntropyResiduals(NamedTuple):
    plus: float
    minus: float


@dataclass
class FlowField:
    """Nodal velocity, density, and derived quantities on the mapped grid."""

    grid: MappedGrid
    m: float
    U: np.ndarray
    V: np.ndarray
    rho: np.ndarray
    q: np.ndarray
    mach: np.ndarray
    omega: np.ndarray
    psi: np.ndarray

    @property
    def m0(self) -> float:
        """Three-dimensional mass flux carried by the stream value m."""
        return TWO_PI * self.m

    @property
    def delta(self) -> float:
        return self.grid.delta


def velocity_from_stream(solution: StreamSolution, gas: GasModel) -> FlowField:
    """Reconstruct the meridian velocity field from a stream solution.

    Raises if the squared momentum exceeds 1 while the solution is not
    flagged cutoff_active; for flagged near-sonic solutions the momentum
    is clamped to the sonic value (such fields are diagnostic only).
    """
    grid = solution.grid
    psi_x, psi_r = nodal_gradients(solution.psi, grid)
    r_shield = grid.r_nodes + grid.delta
    # with a zero shield the raw axis row divides by zero; it is discarded
    # and rebuilt by extrapolation below, so silence the intermediate
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (psi_x**2 + psi_r**2) / r_shield**2
    # the axis row is rebuilt by extrapolation below; its raw momentum is
    # dominated by the 1/(r + delta) factor and must not trip the check
    overshoot = float(s[:, 1:].max()) - 1.0
    if overshoot > 1e-10 and not solution.cutoff_active:
        raise ValueError(
            "velocity_from_stream: momentum exceeds the sonic value "
            f"by {overshoot:.3e} on a solve without the truncation flag"
        )
    # use the same truncated relation the solve minimized, so flagged
    # near-sonic fields stay interpretable instead of erroring out
    rho = gas.truncated_density_from_momentum(s.ravel()).reshape(s.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        U = psi_r / (r_shield * rho)
        V = -psi_x / (r_shield * rho)

    # axis values by even quadratic extrapolation from the first two rows
    U[:, 0] = (4.0 * U[:, 1] - U[:, 2]) / 3.0
    V[:, 0] = 0.0
    rho[:, 0] = np.clip((4.0 * rho[:, 1] - rho[:, 2]) / 3.0, 1.0, gas.rho_stag)

    q = np.hypot(U, V)
    mach = q / np.sqrt(gas.sound_speed_sq(rho.ravel()).reshape(rho.shape))
    omega = np.arctan2(V, U)  # 0 where the field vanishes identically
    return FlowField(grid=grid, m=solution.m, U=U, V=V, rho=rho, q=q,
                     mach=mach, omega=omega, psi=solution.psi)


def flow_angle(flow: FlowField) -> AngleCheck:
    """Flow angle with its exact wall-slope bounds.

    The angle of a flow with positive axial velocity stays between
    min(inf arctan f', 0) and max(sup arctan f', 0).  Raises
    FlowAngleError if U <= 0 anywhere for a transporting flow (m > 0).
    """
    if flow.m > 0.0 and np.any(flow.U <= 0.0):
        i, j = np.unravel_index(int(np.argmin(flow.U)), flow.U.shape)
        raise FlowAngleError(
            f"flow angle undefined: U = {flow.U[i, j]:.3e} at "
            f"(x, r) = ({flow.grid.x_nodes[i, j]:.4f}, {flow.grid.r_nodes[i, j]:.4f})"
        )
    lo, hi = flow.grid.profile.slope_bounds
    bounds = (min(np.arctan(lo), 0.0), max(np.arctan(hi), 0.0))
    return AngleCheck(flow.omega, (float(flow.omega.min()), float(flow.omega.max())), bounds)


def station_fluxes(flow: FlowField) -> np.ndarray:
    """Mass flux 2 pi * integral rho U r dr at every grid station."""
    integrand = flow.rho * flow.U * flow.grid.r_nodes
    return TWO_PI * np.trapezoid(integrand, x=flow.grid.r_nodes, axis=1)


def mass_flux_at_station(flow: FlowField, x: float) -> float:
    """Mass flux through the grid station nearest to x."""
    grid = flow.grid
    if not -grid.length <= x <= grid.length:
        raise ValueError(f"mass_flux_at_station: x = {x} outside [-L, L]")
    i = int(np.argmin(np.abs(grid.xi - x)))
    integrand = flow.rho[i] * flow.U[i] * grid.r_nodes[i]
    return float(TWO_PI * np.trapezoid(integrand, x=grid.r_nodes[i]))


def flux_drift(flow: FlowField) -> float:
    """Largest relative deviation of the station fluxes from m0."""
    fluxes = station_fluxes(flow)
    scale = flow.m0 if flow.m0 > 0.0 else 1.0
    return float(np.abs(fluxes - flow.m0).max() / scale)


def far_field_reference(gas: GasModel, m0: float, radius: float) -> float:
    """Axial speed of the uniform subsonic flow with flux m0 in a pipe."""
    momentum_sq = (m0 / (np.pi * radius**2)) ** 2
    return float(np.sqrt(gas.speed_from_momentum(min(momentum_sq, 1.0))))


def far_field_error(flow: FlowField, gas: GasModel, margin: float = 2.0):
    """Max deviation from the uniform asymptotic states near the two ends.

    Compares (U, V) with (sqrt(Ginv((m0 / (pi r_mp^2))^2)), 0) at the
    stations nearest x = -(L - margin) and x = +(L - margin), where r_mp
    is the asymptotic wall radius on that side.
    """
    grid = flow.grid
    prof = grid.profile
    out = []
    for sign, radius in ((-1.0, prof.r_minus), (1.0, prof.r_plus)):
        x = sign * (grid.length - margin)
        i = int(np.argmin(np.abs(grid.xi - x)))
        u_ref = far_field_reference(gas, flow.m0, radius)
        dev = np.hypot(flow.U[i] - u_ref, flow.V[i])
        out.append(float(dev.max()))
    return out[0], out[1]


def positivity_check(flow: FlowField) -> PositivityCheck:
    """Minimum axial velocity and where it occurs."""
    i, j = np.unravel_index(int(np.argmin(flow.U)), flow.U.shape)
    return PositivityCheck(float(flow.U[i, j]),
                           (float(flow.grid.x_nodes[i, j]), float(flow.grid.r_nodes[i, j])))


def wall_speed_max(flow: FlowField) -> float:
    """Largest flow speed along the wall row (monotone in the mass flux)."""
    return float(flow.q[:, -1].max())


def _bump(t):
    """C^3 compactly supported polynomial bump (1 - t^2)^4 on |t| < 1."""
    inside = np.abs(t) < 1.0
    return np.where(inside, (1.0 - t**2) ** 4, 0.0)


def _bump_prime(t):
    inside = np.abs(t) < 1.0
    return np.where(inside, -8.0 * t * (1.0 - t**2) ** 3, 0.0)


_PLACEMENTS = (  # (center offset x, center offset r, half-width factor)
    (0.0, 0.0, 1.0),
    (-0.25, -0.25, 0.5),
    (0.25, -0.25, 0.5),
    (-0.25, 0.25, 0.5),
    (0.25, 0.25, 0.5),
)


def default_compact(grid: MappedGrid) -> tuple[float, float, float, float]:
    """Central compact rectangle [-L/2, L/2] x [0.2 b, 0.8 b]."""
    b = grid.profile.b
    return (-grid.length / 2.0, grid.length / 2.0, 0.2 * b, 0.8 * b)


def entropy_pair_residual(flow: FlowField, gas: GasModel,
                          rect: tuple[float, float, float, float] | None = None
                          ) -> EntropyResiduals:
    """Weak residuals of the two momentum entropy pairs on a compact rectangle.

    The pairs are (rho U^2 + p, rho U V) and (rho U V, rho V^2 + p); their
    divergence balances the geometric sources -rho U V / r and
    -rho V^2 / r.  The residual tested against a compactly supported bump
    chi is |integral eta chi_x + lam chi_r + source chi| after integrating
    the divergence by parts.  Returns the worst value over five bump
    placements for each pair.
    """
    grid = flow.grid
    if rect is None:
        rect = default_compact(grid)
    x_lo, x_hi, r_lo, r_hi = rect
    if not (x_lo < x_hi and 0.0 <= r_lo < r_hi):
        raise ValueError("entropy_pair_residual: empty rectangle")
    if x_lo < -grid.length or x_hi > grid.length or r_hi > grid.profile.b:
        raise ValueError("entropy_pair_residual: rectangle not inside the nozzle")

    x = grid.x_nodes
    r = grid.r_nodes
    r_safe = np.where(r > 1e-12, r, 1.0)
    p = gas.pressure(flow.rho.ravel()).reshape(flow.rho.shape)
    eta_plus = flow.rho * flow.U**2 + p
    lam_plus = flow.rho * flow.U * flow.V
    eta_minus = lam_plus
    lam_minus = flow.rho * flow.V**2 + p
    source_plus = -flow.rho * flow.U * flow.V / r_safe
    source_minus = -flow.rho * flow.V**2 / r_safe

    cx0 = 0.5 * (x_lo + x_hi)
    cr0 = 0.5 * (r_lo + r_hi)
    wx0 = 0.5 * (x_hi - x_lo)
    wr0 = 0.5 * (r_hi - r_lo)
    worst_plus = 0.0
    worst_minus = 0.0
    for ox, orr, scale in _PLACEMENTS:
        cx = cx0 + ox * 2.0 * wx0
        cr = cr0 + orr * 2.0 * wr0
        wx = scale * wx0
        wr = scale * wr0
        tx = (x - cx) / wx
        tr = (r - cr) / wr
        chi = _bump(tx) * _bump(tr)
        chi_x = _bump_prime(tx) * _bump(tr) / wx
        chi_r = _bump(tx) * _bump_prime(tr) / wr
        for eta, lam, src, which in (
            (eta_plus, lam_plus, source_plus, "plus"),
            (eta_minus, lam_minus, source_minus, "minus"),
        ):
            integrand = eta * chi_x + lam * chi_r + src * chi
            per_station = np.trapezoid(integrand, x=r, axis=1)
            value = abs(float(np.trapezoid(per_station, x=grid.xi)))
            if which == "plus":
                worst_plus = max(worst_plus, value)
            else:
                worst_minus = max(worst_minus, value)
    return EntropyResiduals(worst_plus, worst_minus)


def irrotationality_residual(flow: FlowField) -> ResidualNorms:
    """Norms of U_r - V_x over interior nodes (vanishes for these flows)."""
    grid = flow.grid
    if grid.nx < 5 or grid.nr < 5:
        raise ValueError("irrotationality_residual: grid too coarse")
    f = grid.f_nodes[:, None]
    fp = grid.fp_nodes[:, None]
    sg = grid.sigma[None, :]
    _, du_dsg = np.gradient(flow.U, grid.xi, grid.sigma, edge_order=2)
    dv_dxi, dv_dsg = np.gradient(flow.V, grid.xi, grid.sigma, edge_order=2)
    u_r = du_dsg / f
    v_x = dv_dxi - sg * fp / f * dv_dsg
    curl = (u_r - v_x)[2:-2, 2:-2]
    return ResidualNorms(float(np.abs(curl).max()), float(np.sqrt(np.mean(curl**2))))


def to_3d_sample(flow: FlowField, x: float, y: float, z: float):
    """Sample the axially symmetric 3-D velocity (rho, u, v, w) at a point.

    The meridian field maps to u = U, v = V y/r, w = V z/r with
    r = sqrt(y^2 + z^2); on the axis the transverse components vanish.
    Raises for points outside the truncated nozzle.
    """
    grid = flow.grid
    r = float(np.hypot(y, z))
    if not -grid.length <= x <= grid.length:
        raise ValueError(f"to_3d_sample: x = {x} outside [-L, L]")
    f_here = float(grid.profile.wall(x))
    if r > f_here * (1.0 + 1e-12):
        raise ValueError(f"to_3d_sample: point at r = {r:.6g} outside the wall {f_here:.6g}")
    sigma = min(r / f_here, 1.0)

    ix = min(max(int(np.searchsorted(grid.xi, x) - 1), 0), grid.nx - 1)
    js = min(max(int(np.searchsorted(grid.sigma, sigma) - 1), 0), grid.nr - 1)
    tx = (x - grid.xi[ix]) / grid.dxi
    ts = (sigma - grid.sigma[js]) / grid.dsigma

    def interp(a):
        return float(
            a[ix, js] * (1 - tx) * (1 - ts)
            + a[ix + 1, js] * tx * (1 - ts)
            + a[ix, js + 1] * (1 - tx) * ts
            + a[ix + 1, js + 1] * tx * ts
        )

    rho = interp(flow.rho)
    u = interp(flow.U)
    v_meridian = interp(flow.V)
    if r < 1e-300:
        return rho, u, 0.0, 0.0
    return rho, u, v_meridian * y / r, v_meridian * z / r


_DEFAULT_THRESHOLDS = {
    "max_principle": 1e-10,
    "barrier_slack": 10.0,   # multiplies h_max**2
    "angle": 1e-3,
    "flux_drift": 1e-3,
    "far_field": 1e-3,
    "entropy": None,         # reported, not gated, unless configured
    "irrotationality": None,
}


@dataclass
class DiagnosticsReport:
    """Physical diagnostics of one solve with pass/fail per threshold."""

    m0: float
    delta: float
    converged: bool
    cutoff_active: bool
    max_principle_violation: float
    barrier_violation: float
    min_axial_velocity: float
    min_velocity_location: tuple[float, float]
    angle_measured: tuple[float, float]
    angle_bounds: tuple[float, float]
    flux_drift: float
    far_field: tuple[float, float]
    entropy_residuals: tuple[float, float]
    irrotationality: float
    thresholds: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def items(self):
        """Flat (key, value) pairs in a fixed order for serialization."""
        pairs = [
            ("m0", self.m0),
            ("delta", self.delta),
            ("converged", self.converged),
            ("cutoff_active", self.cutoff_active),
            ("max_principle_violation", self.max_principle_violation),
            ("barrier_violation", self.barrier_violation),
            ("min_axial_velocity", self.min_axial_velocity),
            ("min_velocity_x", self.min_velocity_location[0]),
            ("min_velocity_r", self.min_velocity_location[1]),
            ("angle_min", self.angle_measured[0]),
            ("angle_max", self.angle_measured[1]),
            ("angle_bound_lo", self.angle_bounds[0]),
            ("angle_bound_hi", self.angle_bounds[1]),
            ("flux_drift", self.flux_drift),
            ("far_field_left", self.far_field[0]),
            ("far_field_right", self.far_field[1]),
            ("entropy_residual_plus", self.entropy_residuals[0]),
            ("entropy_residual_minus", self.entropy_residuals[1]),
            ("irrotationality_residual", self.irrotationality),
        ]
        for name, value in sorted(self.thresholds.items()):
            if value is not None:  # None thresholds are report-only
                pairs.append((f"threshold_{name}", value))
        for name, ok in sorted(self.checks.items()):
            pairs.append((f"check_{name}", ok))
        pairs.append(("passed", self.passed))
        return pairs


def diagnostics_report(solution: StreamSolution, gas: GasModel,
                       flow: FlowField | None = None,
                       thresholds: dict | None = None) -> DiagnosticsReport:
    """Run the full diagnostic suite on a converged solve."""
    grid = solution.grid
    cfg = dict(_DEFAULT_THRESHOLDS)
    if thresholds:
        unknown = thresholds.keys() - cfg.keys()
        if unknown:
            raise ValueError(f"diagnostics_report: unknown thresholds {sorted(unknown)}")
        cfg.update(thresholds)
    if flow is None:
        flow = velocity_from_stream(solution, gas)
    m0 = flow.m0

    psi = solution.psi
    max_principle = max(0.0, float(-psi.min()), float(psi.max() - solution.m))
    barrier = solution.m * (grid.r_nodes + grid.delta) ** 2 / grid.profile.b**2
    barrier_violation = max(0.0, float((psi - barrier).max()))

    pos = positivity_check(flow)
    if solution.m > 0.0 and pos.min_u > 0.0:
        angle = flow_angle(flow)
    else:  # vanishing or nonpositive flow: report raw angle range, bounds only
        lo, hi = grid.profile.slope_bounds
        angle = AngleCheck(flow.omega,
                           (float(flow.omega.min()), float(flow.omega.max())),
                           (min(np.arctan(lo), 0.0), max(np.arctan(hi), 0.0)))

    drift = flux_drift(flow)
    far = far_field_error(flow, gas)
    entropy = entropy_pair_residual(flow, gas)
    irrot = irrotationality_residual(flow)

    scale = max(1.0, solution.m)
    checks = {
        "converged": solution.converged,
        "max_principle": max_principle <= cfg["max_principle"] * scale,
        "barrier": barrier_violation <= cfg["barrier_slack"] * grid.h_max**2,
        "positivity": (pos.min_u > 0.0) if solution.m > 0.0 else True,
        "angle": (angle.measured[0] >= angle.bounds[0] - cfg["angle"]
                  and angle.measured[1] <= angle.bounds[1] + cfg["angle"]),
        "flux_drift": drift <= cfg["flux_drift"],
        "far_field": max(far) <= cfg["far_field"],
    }
    if cfg["entropy"] is not None:
        checks["entropy"] = max(entropy) <= cfg["entropy"]
    if cfg["irrotationality"] is not None:
        checks["irrotationality"] = irrot.max <= cfg["irrotationality"]

    return DiagnosticsReport(
        m0=m0,
        delta=grid.delta,
        converged=solution.converged,
        cutoff_active=solution.cutoff_active,
        max_principle_violation=max_principle,
        barrier_violation=barrier_violation,
        min_axial_velocity=pos.min_u,
        min_velocity_location=pos.location,
        angle_measured=angle.measured,
        angle_bounds=angle.bounds,
        flux_drift=drift,
        far_field=far,
        entropy_residuals=(entropy.plus, entropy.minus),
        irrotationality=irrot.max,
        thresholds={k: v for k, v in cfg.items()},
        checks=checks,
    )
