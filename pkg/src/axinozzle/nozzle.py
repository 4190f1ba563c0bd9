"""Nozzle wall profiles and the body-fitted computational grid.

A nozzle is the axially symmetric region 0 <= r < f(x) around the x-axis.
The wall radius f is smooth, positive, and flattens to constant radii far
upstream and downstream.  Three families cover the verification studies:

    cylinder(a)        f(x) = a
    tanh_step(a, ell)  f(x) = (1+a)/2 + (a-1)/2 * tanh(x/ell)
    bump(a0, h, w)     f(x) = a0 + h * exp(-(x/w)**2)

The solver works on the rectangle (xi, sigma) in [-L, L] x [0, 1] mapped
to the physical nozzle by x = xi, r = sigma * f(xi).  The map has Jacobian
determinant f(xi) > 0, so cell measures and derivative transforms are
available in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
import math

import numpy as np

_FAMILIES = ("cylinder", "tanh_step", "bump")


@dataclass(frozen=True)
class NozzleProfile:
    """Wall radius profile of one of the supported families.

    Use make_profile to construct; it validates the per-family parameters.
    holder_alpha is optional recorded metadata (wall regularity exponent)
    and plays no role in any computation.
    """

    kind: str
    a: float | None = None
    ell: float | None = None
    a0: float | None = None
    h: float | None = None
    w: float | None = None
    holder_alpha: float | None = None

    def wall(self, x):
        """Wall radius f(x)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "cylinder":
            out = np.full_like(x, self.a)
        elif self.kind == "tanh_step":
            out = 0.5 * (1.0 + self.a) + 0.5 * (self.a - 1.0) * np.tanh(x / self.ell)
        else:
            out = self.a0 + self.h * np.exp(-((x / self.w) ** 2))
        return float(out) if out.ndim == 0 else out

    def wall_slope(self, x):
        """Wall slope f'(x)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "cylinder":
            out = np.zeros_like(x)
        elif self.kind == "tanh_step":
            out = 0.5 * (self.a - 1.0) / self.ell / np.cosh(x / self.ell) ** 2
        else:
            out = -2.0 * self.h * x / self.w**2 * np.exp(-((x / self.w) ** 2))
        return float(out) if out.ndim == 0 else out

    @cached_property
    def b(self) -> float:
        """Infimum of the wall radius over the whole axis."""
        if self.kind == "cylinder":
            return self.a
        if self.kind == "tanh_step":
            return min(1.0, self.a)
        return min(self.a0, self.a0 + self.h)

    @cached_property
    def r_minus(self) -> float:
        """Upstream asymptotic radius."""
        return self.a if self.kind == "cylinder" else (1.0 if self.kind == "tanh_step" else self.a0)

    @cached_property
    def r_plus(self) -> float:
        """Downstream asymptotic radius."""
        return self.a0 if self.kind == "bump" else self.a

    @cached_property
    def slope_bounds(self) -> tuple[float, float]:
        """Exact (inf, sup) of the wall slope over the whole axis."""
        if self.kind == "cylinder":
            return 0.0, 0.0
        if self.kind == "tanh_step":
            extremum = 0.5 * (self.a - 1.0) / self.ell  # attained at x = 0
            return min(extremum, 0.0), max(extremum, 0.0)
        peak = math.sqrt(2.0) * abs(self.h) * math.exp(-0.5) / self.w
        return (-peak, peak) if self.h else (0.0, 0.0)


def make_profile(kind: str, **params) -> NozzleProfile:
    """Build a validated NozzleProfile of the given family."""
    if kind not in _FAMILIES:
        raise ValueError(f"make_profile: unknown profile family {kind!r}")
    holder_alpha = params.pop("holder_alpha", None)
    required = {"cylinder": {"a"}, "tanh_step": {"a", "ell"}, "bump": {"a0", "h", "w"}}[kind]
    missing = required - params.keys()
    extra = params.keys() - required
    if missing or extra:
        raise ValueError(
            f"make_profile: family {kind!r} takes parameters {sorted(required)}; "
            f"missing {sorted(missing)}, unexpected {sorted(extra)}"
        )
    vals = {k: float(v) for k, v in params.items()}
    profile = NozzleProfile(kind=kind, holder_alpha=holder_alpha, **vals)
    if kind == "cylinder" and profile.a <= 0.0:
        raise ValueError("make_profile: cylinder radius must be positive")
    if kind == "tanh_step":
        if profile.a <= 0.0:
            raise ValueError("make_profile: tanh_step end radius must be positive")
        if profile.ell <= 0.0:
            raise ValueError("make_profile: tanh_step length scale must be positive")
    if kind == "bump":
        if profile.w <= 0.0:
            raise ValueError("make_profile: bump width must be positive")
        if profile.a0 <= 0.0 or profile.b <= 0.0:
            raise ValueError("make_profile: bump wall must stay positive")
    return profile


def pick_domain_length(profile: NozzleProfile, tol_flat: float = 1e-6,
                       l_min: float = 4.0, l_max: float = 512.0) -> float:
    """Smallest length on a doubling schedule where the wall looks flat.

    Doubles L starting from l_min until both |f(-L) - r_minus| and
    |f(L) - r_plus| drop below tol_flat.
    """
    if tol_flat <= 0.0:
        raise ValueError("pick_domain_length: tol_flat must be positive")
    length = float(l_min)
    while length <= l_max:
        flat_left = abs(float(profile.wall(-length)) - profile.r_minus) < tol_flat
        flat_right = abs(float(profile.wall(length)) - profile.r_plus) < tol_flat
        if flat_left and flat_right:
            return length
        length *= 2.0
    raise ValueError(
        f"pick_domain_length: wall not flat to {tol_flat:g} within L <= {l_max:g}"
    )


class MappedGrid:
    """Uniform tensor grid in (xi, sigma) with its body-fitted geometry.

    nx and nr count cells; nodes are (nx+1) x (nr+1).  One midpoint
    quadrature point sits at each cell center.  delta >= 0 is the axis
    shield added to r in the energy density.
    """

    def __init__(self, profile: NozzleProfile, length: float, nx: int, nr: int,
                 delta: float = 0.0):
        if length <= 0.0:
            raise ValueError("MappedGrid: length must be positive")
        if nx < 2 or nr < 2:
            raise ValueError("MappedGrid: need at least 2 cells in each direction")
        if not 0.0 <= delta <= profile.b:
            raise ValueError(
                f"MappedGrid: delta must lie in [0, b] = [0, {profile.b}], got {delta}"
            )
        self.profile = profile
        self.length = float(length)
        self.nx = int(nx)
        self.nr = int(nr)
        self.delta = float(delta)

        self.dxi = 2.0 * self.length / self.nx
        self.dsigma = 1.0 / self.nr
        self.xi = -self.length + np.arange(self.nx + 1) * self.dxi
        self.sigma = np.arange(self.nr + 1) * self.dsigma

        self.f_nodes = np.asarray(profile.wall(self.xi))
        self.fp_nodes = np.asarray(profile.wall_slope(self.xi))
        self.x_nodes = np.broadcast_to(self.xi[:, None], (self.nx + 1, self.nr + 1)).copy()
        self.r_nodes = self.f_nodes[:, None] * self.sigma[None, :]

        # cell-center geometry for the midpoint quadrature rule
        xc = 0.5 * (self.xi[:-1] + self.xi[1:])
        sc = 0.5 * (self.sigma[:-1] + self.sigma[1:])
        self.xc = xc
        self.sc = sc
        self.fc = np.asarray(profile.wall(xc))
        self.fpc = np.asarray(profile.wall_slope(xc))
        self.rc = self.fc[:, None] * sc[None, :]
        self.measure = self.dxi * self.dsigma * np.broadcast_to(
            self.fc[:, None], (self.nx, self.nr)
        ).copy()
        self.r_shield = self.rc + self.delta

    @property
    def shape(self) -> tuple[int, int]:
        """Node array shape."""
        return self.nx + 1, self.nr + 1

    @property
    def h_max(self) -> float:
        """Largest physical grid spacing (axial or radial)."""
        return max(self.dxi, self.dsigma * float(self.f_nodes.max()))

    def refined(self) -> "MappedGrid":
        """Grid with both cell counts doubled (nodes nest exactly)."""
        return MappedGrid(self.profile, self.length, 2 * self.nx, 2 * self.nr, self.delta)

    def with_delta(self, delta: float) -> "MappedGrid":
        """Same grid with a different axis shield."""
        return MappedGrid(self.profile, self.length, self.nx, self.nr, delta)


def build_grid(profile: NozzleProfile, length: float, nx: int, nr: int,
               delta: float = 0.0) -> MappedGrid:
    """Construct the body-fitted grid for a profile."""
    return MappedGrid(profile, length, nx, nr, delta)
