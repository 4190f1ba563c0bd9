"""Isentropic polytropic gas relations in critical-state units.

Speeds are measured in units of the critical speed and densities in units
of the critical density, so the sonic state is (q, rho) = (1, 1) and the
pressure law is p = rho**gamma / gamma.  On the subsonic branch the
Bernoulli relation ties density to speed,

    rho = ((gamma + 1 - (gamma - 1) * q**2) / 2) ** (1 / (gamma - 1))

and the momentum density rho*q runs monotonically from 0 at rest to 1 at
the sonic state.  Near the sonic state the density-momentum relation
degenerates (its slope blows up), so the solver works with a truncated
relation that follows the exact one up to momentum m_tilde, blends to a
constant over [m_tilde**2, ((m_tilde+1)/2)**2] in the squared-momentum
variable, and stays constant beyond.  The blend keeps the relation C^2,
decreasing, and uniformly elliptic, which makes the stream-function
energy strictly convex.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

_BISECT_STEPS = 64  # interval shrinks below double precision resolution


class SpeedDensity(NamedTuple):
    """Density and ellipticity data of the truncated speed relation."""

    rho: np.ndarray | float
    coefficient: np.ndarray | float  # g + 2 q^2 dg/d(q^2), stays in [nu, lam]
    nu: float
    lam: float


class CoenergyBundle(NamedTuple):
    """Coenergy with its first two derivatives at the same points."""

    value: np.ndarray
    prime: np.ndarray
    second: np.ndarray


@dataclass(frozen=True)
class GasModel:
    """Polytropic gas with a near-sonic truncation of the density relation.

    Parameters
    ----------
    gamma : adiabatic exponent, > 1.
    m_tilde : momentum threshold in (0, 1) where the truncation starts.
    blend : name of the C^2 blend used on the transition interval.  The
        default "quintic" matches value, slope and curvature of the exact
        relation at the lower knot and flattens to the constant value with
        zero slope and curvature at the upper knot.
    """

    gamma: float = 1.4
    m_tilde: float = 0.98
    blend: str = "quintic"

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError(f"GasModel: gamma must exceed 1, got {self.gamma}")
        if not 0.0 < self.m_tilde < 1.0:
            raise ValueError(f"GasModel: m_tilde must lie in (0, 1), got {self.m_tilde}")
        if self.blend not in ("quintic",):
            raise ValueError(f"GasModel: unknown blend {self.blend!r}")

    # ------------------------------------------------------------------
    # derived constants
    # ------------------------------------------------------------------

    @cached_property
    def rho_stag(self) -> float:
        """Stagnation density ((gamma+1)/2)**(1/(gamma-1))."""
        return ((self.gamma + 1.0) / 2.0) ** (1.0 / (self.gamma - 1.0))

    @cached_property
    def s_lo(self) -> float:
        """Squared momentum where the truncation blend starts."""
        return self.m_tilde**2

    @cached_property
    def s_hi(self) -> float:
        """Squared momentum where the truncated relation goes constant."""
        return ((self.m_tilde + 1.0) / 2.0) ** 2

    @cached_property
    def rho_hi(self) -> float:
        """Constant density value beyond the upper blend knot."""
        return float(self.density_from_momentum(self.s_hi))

    # ------------------------------------------------------------------
    # exact subsonic relations
    # ------------------------------------------------------------------

    def density_from_speed(self, q_sq):
        """Subsonic density at squared speed q_sq in [0, 1]."""
        q_sq = np.asarray(q_sq, dtype=float)
        if np.any(q_sq < 0.0) or np.any(q_sq > 1.0):
            raise ValueError("density_from_speed: q_sq must lie in [0, 1]")
        g = self.gamma
        out = ((g + 1.0 - (g - 1.0) * q_sq) / 2.0) ** (1.0 / (g - 1.0))
        return float(out) if out.ndim == 0 else out

    def momentum_from_speed(self, q_sq):
        """Squared momentum (rho*q)**2 at squared speed q_sq in [0, 1].

        Close to the sonic point the value is computed through log1p and
        expm1 in the variable 1 - q_sq; the direct product loses a few
        ulps there, which matters because the map flattens at its sonic
        maximum and inversions divide by the slope.
        """
        q_sq = np.asarray(q_sq, dtype=float)
        rho = self.density_from_speed(q_sq)
        out = np.asarray(np.asarray(rho) ** 2 * q_sq)
        g = self.gamma
        w = 1.0 - q_sq
        near = np.asarray((w < 0.25) & (w > 0.0))
        if np.any(near):
            wn = np.atleast_1d(np.asarray(w))[np.atleast_1d(near)]
            expo = (2.0 / (g - 1.0)) * np.log1p(0.5 * (g - 1.0) * wn) + np.log1p(-wn)
            if out.ndim == 0:
                out = np.asarray(float(np.exp(expo[0])))
            else:
                out[near] = np.exp(expo)
        return float(out) if out.ndim == 0 else out

    def speed_from_momentum(self, s):
        """Inverse of momentum_from_speed on [0, 1] (squared speed)."""
        s = np.asarray(s, dtype=float)
        if np.any(s < 0.0) or np.any(s > 1.0):
            raise ValueError("speed_from_momentum: s must lie in [0, 1]")
        scalar = s.ndim == 0
        s = np.atleast_1d(s)
        lo = np.zeros_like(s)
        hi = np.ones_like(s)
        for _ in range(_BISECT_STEPS):
            mid = 0.5 * (lo + hi)
            below = np.asarray(self.momentum_from_speed(mid)) < s
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        out = 0.5 * (lo + hi)
        out[s == 0.0] = 0.0
        out[s == 1.0] = 1.0
        return float(out[0]) if scalar else out

    # ------------------------------------------------------------------
    # density-momentum relation H and its truncation
    # ------------------------------------------------------------------

    def _momentum_sq_of_rho(self, rho):
        """Squared momentum along the subsonic branch, as a function of rho."""
        g = self.gamma
        return rho**2 * (g + 1.0 - 2.0 * rho ** (g - 1.0)) / (g - 1.0)

    def _dmomentum_sq_drho(self, rho):
        g = self.gamma
        return 2.0 * (g + 1.0) * rho * (1.0 - rho ** (g - 1.0)) / (g - 1.0)

    def _d2momentum_sq_drho2(self, rho):
        g = self.gamma
        return 2.0 * (g + 1.0) * (1.0 - g * rho ** (g - 1.0)) / (g - 1.0)

    def _density_root(self, s):
        """Bisect the subsonic branch rho in [1, rho_stag] at squared momentum s."""
        lo = np.full_like(s, 1.0)
        hi = np.full_like(s, self.rho_stag)
        # momentum decreases in rho on the subsonic branch
        for _ in range(_BISECT_STEPS):
            mid = 0.5 * (lo + hi)
            above = self._momentum_sq_of_rho(mid) > s
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
        out = 0.5 * (lo + hi)
        out = np.where(s == 0.0, self.rho_stag, out)
        return np.where(s == 1.0, 1.0, out)

    def _density_fold(self, u):
        """Subsonic density at squared momentum 1 - u for small u > 0.

        Newton in e = rho - 1 on the residual written with expm1/log1p so
        that no term cancels; with it the density keeps close to full
        precision right up to the sonic fold, where the plain bisection
        loses half the digits to the vanishing slope of the momentum map.
        """
        g = self.gamma
        gp1 = g + 1.0
        e = np.sqrt(2.0 * u / gp1)
        for _ in range(4):
            resid = (gp1 * (2.0 + e) * e
                     - 2.0 * np.expm1(gp1 * np.log1p(e))) / (g - 1.0) + u
            slope = 2.0 * gp1 / (g - 1.0) * (e - np.expm1(g * np.log1p(e)))
            e = np.maximum(e - resid / slope, 0.0)
        return 1.0 + e

    def density_from_momentum(self, s):
        """Subsonic-branch density at squared momentum s in [0, 1]."""
        s = np.asarray(s, dtype=float)
        if np.any(s < 0.0) or np.any(s > 1.0):
            raise ValueError("density_from_momentum: s must lie in [0, 1]")
        scalar = s.ndim == 0
        arr = np.atleast_1d(s)
        out = self._density_root(arr)
        near = (arr > 1.0 - 1e-4) & (arr < 1.0)
        if np.any(near):
            out[near] = self._density_fold(1.0 - arr[near])
        return float(out[0]) if scalar else out

    def _density_slope(self, s, rho=None):
        """d(density)/d(squared momentum) on the exact subsonic branch, s < 1."""
        if rho is None:
            rho = self._density_root(np.atleast_1d(np.asarray(s, dtype=float)))
        return 1.0 / self._dmomentum_sq_drho(rho)

    def _density_curvature(self, s, rho=None):
        if rho is None:
            rho = self._density_root(np.atleast_1d(np.asarray(s, dtype=float)))
        d = self._dmomentum_sq_drho(rho)
        return -self._d2momentum_sq_drho2(rho) / d**3

    @cached_property
    def _blend_coeffs(self) -> np.ndarray:
        """Quintic coefficients of the blend in t = (s - s_lo)/(s_hi - s_lo).

        The quintic matches value, slope and curvature of the exact relation
        at t = 0 and (rho_hi, 0, 0) at t = 1.  Monotonicity is verified on a
        dense sample; the endpoint data keep it decreasing for physically
        admissible (gamma, m_tilde).
        """
        h = self.s_hi - self.s_lo
        rho1 = float(self.density_from_momentum(self.s_lo))
        d1 = float(self._density_slope(self.s_lo)[0]) * h
        c1 = float(self._density_curvature(self.s_lo)[0]) * h * h
        lhs = np.array([[1.0, 1.0, 1.0], [3.0, 4.0, 5.0], [6.0, 12.0, 20.0]])
        rhs = np.array(
            [self.rho_hi - (rho1 + d1 + c1 / 2.0), -(d1 + c1), -c1]
        )
        a3, a4, a5 = np.linalg.solve(lhs, rhs)
        coeffs = np.array([rho1, d1, c1 / 2.0, a3, a4, a5])
        t = np.linspace(0.0, 1.0, 4097)
        slope = self._blend_poly(t, coeffs, order=1)
        if np.any(slope > 1e-12 * abs(d1)):
            raise ValueError(
                "GasModel: truncation blend lost monotonicity; "
                f"gamma={self.gamma}, m_tilde={self.m_tilde}"
            )
        return coeffs

    @staticmethod
    def _blend_poly(t, coeffs, order=0):
        """Evaluate the blend quintic or one of its t-derivatives (Horner)."""
        c = coeffs
        if order == 1:
            c = coeffs[1:] * np.arange(1, 6)
        elif order == 2:
            c = coeffs[2:] * np.arange(2, 6) * np.arange(1, 5)
        out = np.zeros_like(t)
        for ck in c[::-1]:
            out = out * t + ck
        return out

    def truncated_density_from_momentum(self, s):
        """Truncated density relation, defined for every squared momentum >= 0."""
        s = np.asarray(s, dtype=float)
        if np.any(s < 0.0):
            raise ValueError("truncated_density_from_momentum: s must be >= 0")
        scalar = s.ndim == 0
        s = np.atleast_1d(s)
        out = np.full_like(s, self.rho_hi)
        below = s < self.s_lo
        if np.any(below):
            out[below] = self._density_root(s[below])
        mid = ~below & (s < self.s_hi)
        if np.any(mid):
            t = (s[mid] - self.s_lo) / (self.s_hi - self.s_lo)
            out[mid] = self._blend_poly(t, self._blend_coeffs)
        return float(out[0]) if scalar else out

    def truncated_density_slope(self, s):
        """Derivative of the truncated relation with respect to squared momentum."""
        s = np.asarray(s, dtype=float)
        if np.any(s < 0.0):
            raise ValueError("truncated_density_slope: s must be >= 0")
        scalar = s.ndim == 0
        s = np.atleast_1d(s)
        out = np.zeros_like(s)
        below = s < self.s_lo
        if np.any(below):
            out[below] = self._density_slope(s[below])
        mid = ~below & (s < self.s_hi)
        if np.any(mid):
            h = self.s_hi - self.s_lo
            t = (s[mid] - self.s_lo) / h
            out[mid] = self._blend_poly(t, self._blend_coeffs, order=1) / h
        return float(out[0]) if scalar else out

    def truncated_density_curvature(self, s):
        """Second derivative of the truncated relation (used for C^2 checks)."""
        s = np.asarray(s, dtype=float)
        scalar = s.ndim == 0
        s = np.atleast_1d(s)
        out = np.zeros_like(s)
        below = s < self.s_lo
        if np.any(below):
            out[below] = self._density_curvature(s[below])
        mid = ~below & (s < self.s_hi)
        if np.any(mid):
            h = self.s_hi - self.s_lo
            t = (s[mid] - self.s_lo) / h
            out[mid] = self._blend_poly(t, self._blend_coeffs, order=2) / h**2
        return float(out[0]) if scalar else out

    # ------------------------------------------------------------------
    # coenergy F(s) = integral_0^s dt / Htilde(t)
    # ------------------------------------------------------------------

    @cached_property
    def _gauss_nodes(self):
        # 24-point Gauss-Legendre handles the short blend interval to roundoff
        nodes, weights = np.polynomial.legendre.leggauss(24)
        return nodes, weights

    def _coenergy_exact(self, s):
        """Closed-form coenergy below the truncation.

        Substituting the branch parametrization turns 1/H into the exact
        antiderivative 2(gamma+1)/(gamma-1) * (rho - rho**gamma/gamma).
        """
        g = self.gamma
        c0 = 2.0 * (g + 1.0) / (g - 1.0)
        rho = self._density_root(s)
        anti = rho - rho**g / g
        anti0 = self.rho_stag - self.rho_stag**g / g
        return c0 * (anti - anti0)

    def _coenergy_blend_tail(self, s):
        """Quadrature of 1/Htilde from s_lo to s, for s inside the blend."""
        nodes, weights = self._gauss_nodes
        half = 0.5 * (s - self.s_lo)
        mid = 0.5 * (s + self.s_lo)
        pts = mid[:, None] + half[:, None] * nodes[None, :]
        t = (pts - self.s_lo) / (self.s_hi - self.s_lo)
        vals = 1.0 / self._blend_poly(t, self._blend_coeffs)
        return half * (vals * weights[None, :]).sum(axis=1)

    @cached_property
    def _coenergy_knots(self) -> tuple[float, float]:
        f_lo = float(self._coenergy_exact(np.array([self.s_lo]))[0])
        f_hi = f_lo + float(self._coenergy_blend_tail(np.array([self.s_hi]))[0])
        return f_lo, f_hi

    def coenergy(self, s):
        """Convex increasing energy density F with F' = 1/Htilde, F(0) = 0."""
        s = np.asarray(s, dtype=float)
        if np.any(s < 0.0):
            raise ValueError("coenergy: s must be >= 0")
        scalar = s.ndim == 0
        s = np.atleast_1d(s)
        f_lo, f_hi = self._coenergy_knots
        out = f_hi + (s - self.s_hi) / self.rho_hi
        below = s < self.s_lo
        if np.any(below):
            out[below] = self._coenergy_exact(s[below])
        mid = ~below & (s < self.s_hi)
        if np.any(mid):
            out[mid] = f_lo + self._coenergy_blend_tail(s[mid])
        return float(out[0]) if scalar else out

    def coenergy_prime(self, s):
        """Derivative of the coenergy, 1 / Htilde(s)."""
        rho = self.truncated_density_from_momentum(s)
        return 1.0 / rho

    def coenergy_second(self, s):
        """Second derivative of the coenergy, -Htilde'/Htilde**2 >= 0."""
        rho = np.asarray(self.truncated_density_from_momentum(s))
        slope = np.asarray(self.truncated_density_slope(s))
        out = -slope / rho**2
        return float(out) if out.ndim == 0 else out

    def coenergy_bundle(self, s) -> CoenergyBundle:
        """Coenergy value and derivatives with one shared branch inversion.

        Equivalent to (coenergy, coenergy_prime, coenergy_second) but the
        subsonic-branch root solve below the truncation happens once, which
        matters inside assembly loops.
        """
        s = np.asarray(s, dtype=float)
        if np.any(s < 0.0):
            raise ValueError("coenergy_bundle: s must be >= 0")
        s = np.atleast_1d(s)
        f_lo, f_hi = self._coenergy_knots
        g = self.gamma
        c0 = 2.0 * (g + 1.0) / (g - 1.0)
        anti0 = self.rho_stag - self.rho_stag**g / g

        rho = np.full_like(s, self.rho_hi)
        slope = np.zeros_like(s)
        value = f_hi + (s - self.s_hi) / self.rho_hi
        below = s < self.s_lo
        if np.any(below):
            rb = self._density_root(s[below])
            rho[below] = rb
            slope[below] = 1.0 / self._dmomentum_sq_drho(rb)
            value[below] = c0 * ((rb - rb**g / g) - anti0)
        mid = ~below & (s < self.s_hi)
        if np.any(mid):
            h = self.s_hi - self.s_lo
            t = (s[mid] - self.s_lo) / h
            rho[mid] = self._blend_poly(t, self._blend_coeffs)
            slope[mid] = self._blend_poly(t, self._blend_coeffs, order=1) / h
            value[mid] = f_lo + self._coenergy_blend_tail(s[mid])
        return CoenergyBundle(value, 1.0 / rho, -slope / rho**2)

    # ------------------------------------------------------------------
    # truncated speed relation and ellipticity
    # ------------------------------------------------------------------

    def momentum_from_speed_truncated(self, q_sq):
        """Invert q^2 = s / Htilde(s)^2 for squared momentum s >= 0.

        Newton iteration safeguarded by a bisection bracket; beyond the
        upper knot the relation is linear and solved in closed form.
        """
        q_sq = np.asarray(q_sq, dtype=float)
        if np.any(q_sq < 0.0):
            raise ValueError("momentum_from_speed_truncated: q_sq must be >= 0")
        scalar = q_sq.ndim == 0
        q_sq = np.atleast_1d(q_sq)
        out = self.rho_hi**2 * q_sq  # exact once Htilde is constant
        qsq_hi = self.s_hi / self.rho_hi**2
        inner = q_sq < qsq_hi
        if np.any(inner):
            target = q_sq[inner]
            lo = np.zeros_like(target)
            hi = np.full_like(target, self.s_hi)
            for _ in range(40):
                mid = 0.5 * (lo + hi)
                rho = np.asarray(self.truncated_density_from_momentum(mid))
                below = mid / rho**2 < target
                lo = np.where(below, mid, lo)
                hi = np.where(below, hi, mid)
            s = 0.5 * (lo + hi)
            for _ in range(3):  # Newton polish, clamped to the bracket
                rho = np.asarray(self.truncated_density_from_momentum(s))
                slope = np.asarray(self.truncated_density_slope(s))
                val = s / rho**2 - target
                dval = (rho - 2.0 * slope * s) / rho**3
                s = np.clip(s - val / dval, lo, hi)
            out[inner] = s
        return float(out[0]) if scalar else out

    def truncated_density_from_speed(self, q_sq) -> SpeedDensity:
        """Density and ellipticity coefficient of the truncated speed relation.

        The coefficient g + 2 q^2 dg/d(q^2) equals
        Htilde(s)^2 / (Htilde(s) - 2 Htilde'(s) s) at s inverted from q^2;
        it is pinched between the returned positive bounds (nu, lam).
        """
        s = np.asarray(self.momentum_from_speed_truncated(q_sq))
        rho = np.asarray(self.truncated_density_from_momentum(s))
        slope = np.asarray(self.truncated_density_slope(s))
        coeff = rho**2 / (rho - 2.0 * slope * s)
        nu, lam = self.ellipticity_bounds
        if np.ndim(q_sq) == 0:
            return SpeedDensity(float(rho), float(coeff), nu, lam)
        return SpeedDensity(rho, coeff, nu, lam)

    @cached_property
    def ellipticity_bounds(self) -> tuple[float, float]:
        """Bounds (nu, lam) for the ellipticity coefficient, 0 < nu <= lam.

        Computed from a dense sample of the coefficient over the momentum
        range [0, s_hi] plus its constant tail value, widened by a small
        relative margin to cover points between samples.
        """
        s = np.linspace(0.0, self.s_hi, 20001)
        rho = np.asarray(self.truncated_density_from_momentum(s))
        slope = np.asarray(self.truncated_density_slope(s))
        coeff = rho**2 / (rho - 2.0 * slope * s)
        lo = min(coeff.min(), self.rho_hi)
        hi = max(coeff.max(), self.rho_hi)
        return 0.999 * lo, 1.001 * hi

    # ------------------------------------------------------------------
    # thermodynamic state
    # ------------------------------------------------------------------

    def pressure(self, rho):
        """Polytropic pressure rho**gamma / gamma."""
        rho = np.asarray(rho, dtype=float)
        if np.any(rho <= 0.0):
            raise ValueError("pressure: rho must be positive")
        out = rho**self.gamma / self.gamma
        return float(out) if out.ndim == 0 else out

    def sound_speed_sq(self, rho):
        """Squared sound speed rho**(gamma - 1)."""
        rho = np.asarray(rho, dtype=float)
        if np.any(rho <= 0.0):
            raise ValueError("sound_speed_sq: rho must be positive")
        out = rho ** (self.gamma - 1.0)
        return float(out) if out.ndim == 0 else out
