"""Gas model tests against independently computed reference values.

The frozen constants below were produced by a separate mpmath script at
40 decimal digits: the density-speed and density-momentum relations were
solved there by bisection on the exact algebraic forms, and the coenergy
integral by adaptive quadrature.  Everything else is checked through
identities and dense deterministic sampling.
"""

import numpy as np
import pytest

from axinozzle import GasModel


GAS = GasModel()  # gamma = 1.4, m_tilde = 0.98, quintic blend


def test_validation():
    with pytest.raises(ValueError):
        GasModel(gamma=1.0)
    with pytest.raises(ValueError):
        GasModel(m_tilde=1.0)
    with pytest.raises(ValueError):
        GasModel(m_tilde=0.0)
    with pytest.raises(ValueError):
        GasModel(blend="cubic")


def test_stagnation_density():
    # ((gamma + 1) / 2) ** (1 / (gamma - 1)), mpmath 40 digits
    assert GAS.rho_stag == pytest.approx(1.5774409656148784, rel=1e-15)
    # gamma = 1.2 gives the exact value 1.1 ** 5
    assert GasModel(gamma=1.2).rho_stag == pytest.approx(1.1**5, rel=1e-15)
    assert GasModel(gamma=5.0 / 3.0).rho_stag == pytest.approx(
        1.5396007178390020, rel=1e-14)


def test_truncation_knots():
    assert GAS.s_lo == pytest.approx(0.98**2, rel=1e-15)
    assert GAS.s_hi == pytest.approx(0.99**2, rel=1e-15)
    assert 1.0 < GAS.rho_hi < GAS.rho_stag


def test_density_from_speed_reference():
    # mpmath: ((gamma + 1 - (gamma - 1) q^2) / 2) ** (1 / (gamma - 1)) at q^2 = 1/4
    assert GAS.density_from_speed(0.25) == pytest.approx(1.4182232502324872, rel=1e-15)
    assert GAS.density_from_speed(0.0) == pytest.approx(GAS.rho_stag, rel=1e-15)
    assert GAS.density_from_speed(1.0) == pytest.approx(1.0, rel=1e-15)


def test_momentum_from_speed_reference():
    # exact rationals for gamma = 1.4: 1.15**5 / 4 and 1.1**5 / 2
    assert GAS.momentum_from_speed(0.25) == pytest.approx(0.502839296875, rel=1e-15)
    assert GAS.momentum_from_speed(0.5) == pytest.approx(0.805255, rel=1e-15)
    assert GAS.momentum_from_speed(1.0) == pytest.approx(1.0, rel=1e-14)
    assert GAS.momentum_from_speed(0.0) == 0.0


def test_speed_from_momentum_reference():
    # mpmath bisection on the subsonic branch
    assert GAS.speed_from_momentum(0.25) == pytest.approx(0.11022959257491243, rel=1e-13)
    assert GAS.speed_from_momentum(0.5) == pytest.approx(0.24819953835270634, rel=1e-13)
    assert GAS.speed_from_momentum(0.0) == 0.0


def test_speed_momentum_round_trip():
    q_sq = np.linspace(0.0, 1.0, 2001)
    back = GAS.speed_from_momentum(GAS.momentum_from_speed(q_sq))
    assert np.abs(back - q_sq).max() < 5e-11


def test_momentum_of_speed_monotone():
    q_sq = np.linspace(0.0, 1.0, 4001)
    values = GAS.momentum_from_speed(q_sq)
    assert np.all(np.diff(values) > 0.0)
    assert values[-1] == pytest.approx(1.0, abs=1e-13)


def test_density_from_momentum_reference():
    # mpmath: subsonic root of s = rho^2 (gamma + 1 - 2 rho^(gamma-1)) / (gamma - 1)
    assert GAS.density_from_momentum(0.5) == pytest.approx(1.4193337094766558, rel=1e-13)
    assert GAS.density_from_momentum(0.0) == pytest.approx(GAS.rho_stag, rel=1e-13)
    assert GAS.density_from_momentum(1.0) == pytest.approx(1.0, abs=1e-10)


def test_density_momentum_consistency():
    # H(G(q^2)) must equal g(q^2) on the subsonic branch
    q_sq = np.linspace(0.0, 1.0, 1501)
    lhs = GAS.density_from_momentum(GAS.momentum_from_speed(q_sq))
    rhs = GAS.density_from_speed(q_sq)
    assert np.abs(lhs - rhs).max() < 1e-12


def test_density_relation_decreasing():
    s = np.linspace(0.0, 1.0, 3001)
    rho = GAS.density_from_momentum(s)
    assert np.all(np.diff(rho) < 0.0)


def test_truncated_matches_exact_below_onset():
    s = np.linspace(0.0, GAS.s_lo, 1201)
    exact = GAS.density_from_momentum(s)
    trunc = GAS.truncated_density_from_momentum(s)
    assert np.abs(exact - trunc).max() < 1e-14


def test_truncated_constant_above_upper_knot():
    s = np.linspace(GAS.s_hi, 4.0, 500)
    trunc = GAS.truncated_density_from_momentum(s)
    assert np.abs(trunc - GAS.rho_hi).max() == 0.0
    assert np.abs(GAS.truncated_density_slope(s)).max() == 0.0
    assert np.abs(GAS.truncated_density_curvature(s)).max() == 0.0


def test_truncated_relation_monotone_everywhere():
    s = np.linspace(0.0, 1.5, 6001)
    rho = GAS.truncated_density_from_momentum(s)
    assert np.all(np.diff(rho) <= 0.0)
    assert np.all(rho >= GAS.rho_hi - 1e-15)
    assert np.all(rho <= GAS.rho_stag + 1e-15)


def test_blend_is_twice_differentiable_at_knots():
    # value, slope, curvature from mpmath at the lower knot
    assert GAS.truncated_density_from_momentum(GAS.s_lo) == pytest.approx(
        1.1249262083661680, rel=1e-13)
    assert GAS.truncated_density_slope(GAS.s_lo) == pytest.approx(
        -1.5364873451402236, rel=1e-11)
    assert GAS.truncated_density_curvature(GAS.s_lo) == pytest.approx(
        -20.349248698341846, rel=1e-9)
    # one-sided limits agree across both knots; the allowance per probe is
    # eps times the next derivative's magnitude, large for the curvature
    eps = 1e-9
    for knot in (GAS.s_lo, GAS.s_hi):
        for probe, allow in ((GAS.truncated_density_from_momentum, 1e-8),
                             (GAS.truncated_density_slope, 1e-6),
                             (GAS.truncated_density_curvature, 2e-3)):
            left = probe(knot - eps)
            right = probe(knot + eps)
            assert abs(left - right) < allow


def test_blend_monotone_for_parameter_grid():
    for gamma in (1.2, 1.4, 5.0 / 3.0):
        for m_tilde in (0.9, 0.95, 0.98, 0.99):
            gas = GasModel(gamma=gamma, m_tilde=m_tilde)
            t = np.linspace(gas.s_lo, gas.s_hi, 2001)
            rho = gas.truncated_density_from_momentum(t)
            assert np.all(np.diff(rho) <= 1e-13), (gamma, m_tilde)


def test_coenergy_reference_value():
    # mpmath adaptive quadrature of the inverse truncated relation
    assert GAS.coenergy(0.3) == pytest.approx(0.19545988821658587, rel=1e-13)
    assert GAS.coenergy(0.0) == 0.0


def test_coenergy_derivative_consistency():
    s = np.linspace(1e-4, 1.3, 800)
    eps = 1e-6
    fd = (GAS.coenergy(s + eps) - GAS.coenergy(s - eps)) / (2.0 * eps)
    prime = GAS.coenergy_prime(s)
    assert np.abs(fd - prime).max() < 1e-8
    # and the stored derivative is the reciprocal of the density relation
    assert np.abs(prime - 1.0 / GAS.truncated_density_from_momentum(s)).max() < 1e-14


def test_coenergy_convex():
    s = np.linspace(0.0, 1.5, 3001)
    assert np.all(GAS.coenergy_second(s) >= 0.0)
    values = GAS.coenergy(s)
    # second differences of a convex function are nonnegative
    assert np.all(np.diff(values, 2) >= -1e-15)


def test_coenergy_small_momentum_expansion():
    # F(s) = s / rho_stag + O(s^2) near rest
    s = np.array([1e-6, 1e-5, 1e-4])
    err = np.abs(GAS.coenergy(s) - s / GAS.rho_stag)
    assert np.all(err < 5.0 * s**2)


def test_coenergy_bundle_matches_parts():
    s = np.linspace(0.0, 1.4, 700)
    bundle = GAS.coenergy_bundle(s)
    assert np.abs(bundle.value - GAS.coenergy(s)).max() == 0.0
    assert np.abs(bundle.prime - GAS.coenergy_prime(s)).max() == 0.0
    assert np.abs(bundle.second - GAS.coenergy_second(s)).max() == 0.0


def test_truncated_speed_inversion():
    # q^2 -> s -> q^2 round trip through the truncated relation
    q_sq = np.linspace(0.0, 0.9, 901)
    s = GAS.momentum_from_speed_truncated(q_sq)
    rho = GAS.truncated_density_from_momentum(s)
    assert np.abs(s - rho**2 * q_sq).max() < 1e-12


def test_truncated_density_from_speed_reference():
    # ellipticity coefficient at q^2 = Ginv(0.5), mpmath value
    state = GAS.truncated_density_from_speed(0.24819953835270634)
    assert state.coefficient == pytest.approx(1.1131009274030152, rel=1e-10)
    assert state.rho == pytest.approx(GAS.density_from_momentum(0.5), rel=1e-12)


def test_ellipticity_bounds_bracket_coefficient():
    nu, lam = GAS.ellipticity_bounds
    assert 0.0 < nu < lam
    # the coefficient at rest equals the stagnation density
    at_rest = GAS.truncated_density_from_speed(0.0)
    assert at_rest.coefficient == pytest.approx(GAS.rho_stag, rel=1e-12)
    assert nu <= GAS.rho_stag <= lam
    q_sq = np.linspace(0.0, 2.0, 2501)
    coeff = GAS.truncated_density_from_speed(q_sq).coefficient
    assert np.all(coeff >= nu)
    assert np.all(coeff <= lam)


def test_bernoulli_residual():
    # c^2/(gamma-1) + q^2/2 is constant along the subsonic branch
    q_sq = np.linspace(0.0, 1.0, 1001)
    rho = GAS.density_from_speed(q_sq)
    invariant = GAS.sound_speed_sq(rho) / (GAS.gamma - 1.0) + q_sq / 2.0
    assert np.abs(invariant - invariant[0]).max() < 1e-13


def test_pressure_and_sound_speed():
    assert GAS.pressure(1.0) == pytest.approx(1.0 / 1.4, rel=1e-15)
    assert GAS.sound_speed_sq(1.0) == 1.0
    rho = np.linspace(0.5, 1.6, 300)
    assert np.all(np.diff(GAS.pressure(rho)) > 0.0)
    with pytest.raises(ValueError):
        GAS.pressure(-1.0)


def test_other_gammas_sane():
    for gamma in (1.2, 5.0 / 3.0):
        gas = GasModel(gamma=gamma)
        q_sq = np.linspace(0.0, 1.0, 501)
        back = gas.speed_from_momentum(gas.momentum_from_speed(q_sq))
        assert np.abs(back - q_sq).max() < 5e-11
        s = np.linspace(0.0, 1.2, 1201)
        assert np.all(np.diff(gas.truncated_density_from_momentum(s)) <= 0.0)
        assert np.all(gas.coenergy_second(s) >= 0.0)


def test_scalar_and_array_forms_agree():
    assert isinstance(GAS.density_from_momentum(0.5), float)
    arr = GAS.density_from_momentum(np.array([0.5]))
    assert arr.shape == (1,)
    assert arr[0] == GAS.density_from_momentum(0.5)
