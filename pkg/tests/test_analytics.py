import math

import numpy as np
import pytest
from scipy import integrate

from condhaar.analytics import (beta_mellin, conditional_density_unitary,
                                conditional_normalization, expected_sq_modulus_zp,
                                fst_cross_moment, fst_moment, gamma_ratio,
                                jacobi_density, jacobi_edge_constant,
                                jacobi_edge_constant_quadrature, jacobi_expectation,
                                mf_cospower, mf_one_plus_sphere_coord, mf_theorem_a1_target,
                                mf_tilted_one_minus, periodic_expectation, so_usp_density,
                                weyl_density_unitary, weyl_expectation)
from condhaar.charpoly import alpha_schedule_general
from condhaar.distributions import (TiltedLaw, sample_beta, sample_cospower_angle,
                                    sample_fst, sample_tilted_coord)
from condhaar.errors import DomainError
from condhaar.stats import mc_moment

GRID = [(1, 1), (2, 0), (2, 2), (4, 0)]


def _mf(x, t, s):
    return np.abs(x) ** t * np.exp(1j * s * np.angle(x))


def test_gamma_ratio():
    assert gamma_ratio([5], [3]) == pytest.approx(12)
    assert isinstance(gamma_ratio([2.5, 1.5], [3.0, 1.0]), float)
    with pytest.raises(DomainError):
        gamma_ratio([0], [1])
    with pytest.raises(DomainError):
        gamma_ratio([1], [-2])


def test_beta_mellin_examples():
    assert beta_mellin(2.0, 3.0, 0) == 1
    assert beta_mellin(1, 1, 2) == pytest.approx(1 / 3)
    for lam in (0.5, 1, 4):
        assert beta_mellin(1, lam, 1) == pytest.approx(1 / (lam + 1))
    assert beta_mellin(1.5, 0, 3) == 1
    with pytest.raises(DomainError):
        beta_mellin(1, 1, -1)
    with pytest.raises(DomainError):
        beta_mellin(0, 1, 1)


def test_fst_moments():
    s, t = 1.0, 3.0
    assert fst_moment(s, t, 1) == pytest.approx(1 - (t - s) / (t + s))
    assert fst_moment(s, t, 1, sign=1) == pytest.approx(1 + (t - s) / (t + s))
    second = ((t - s) ** 2 + (t + s)) / ((t + s) * (t + s + 1))
    assert second == pytest.approx(0.4)
    # E[(1 - X)^2] = 1 - 2 E X + E X^2
    assert fst_moment(s, t, 2) == pytest.approx(1 - 2 * 0.5 + 0.4)
    assert fst_cross_moment(s, t) == pytest.approx(1 - 0.4)
    x = sample_fst(s, t, 0, size=100000)
    assert mc_moment(x).within(0.5)
    assert mc_moment(x ** 2).within(0.4)


def test_transforms_normalized():
    assert mf_one_plus_sphere_coord(2.0, 0, 0) == 1
    assert mf_cospower(0.3 + 0.2j, 0, 0) == pytest.approx(1, abs=1e-15)
    assert mf_tilted_one_minus(1.0, 0.5 + 0.5j, 0, 0) == pytest.approx(1, abs=1e-15)
    assert mf_theorem_a1_target(3.0, 1.0, 0, 0) == pytest.approx(1, abs=1e-15)


def test_one_plus_examples():
    assert mf_one_plus_sphere_coord(1, 2, 0) == pytest.approx(1.5)
    assert mf_one_plus_sphere_coord(1, 2, 2) == pytest.approx(1)
    vals = [mf_one_plus_sphere_coord(2.5, t, 0) for t in np.linspace(0, 6, 13)]
    assert np.all(np.diff(vals) > 0)
    with pytest.raises(DomainError):
        mf_one_plus_sphere_coord(0, 1, 0)


def test_cospower_examples():
    assert mf_cospower(0, 2, 0) == pytest.approx(2)
    assert mf_cospower(1, 0, 2) == pytest.approx(0.5)
    with pytest.raises(DomainError):
        mf_cospower(-0.5, 1, 0)


@pytest.mark.parametrize("lam", [1, 3])
@pytest.mark.parametrize("t,s", GRID)
def test_one_plus_monte_carlo(lam, t, s):
    rng = np.random.default_rng(lam * 100 + t * 10 + s)
    x = 1 + np.exp(1j * rng.uniform(-np.pi, np.pi, 100000)) * np.sqrt(sample_beta(1, lam, rng, 100000))
    assert mc_moment(_mf(x, t, s)).within(mf_one_plus_sphere_coord(lam, t, s))


@pytest.mark.parametrize("z", [0, 1, 0.5 + 0.5j])
@pytest.mark.parametrize("t,s", GRID)
def test_cospower_monte_carlo(z, t, s):
    z = complex(z)
    phi = sample_cospower_angle(z.real, z.imag, 3, size=100000)
    x = 2 * np.cos(phi) * np.exp(1j * phi)
    assert mc_moment(_mf(x, t, s)).within(mf_cospower(z, t, s))


@pytest.mark.parametrize("lam", [1, 3])
@pytest.mark.parametrize("delta", [0, 1, 0.5 + 0.5j])
@pytest.mark.parametrize("t,s", GRID)
def test_tilted_monte_carlo(lam, delta, t, s):
    y = sample_tilted_coord(TiltedLaw(lam, delta), 4, size=100000)
    assert mc_moment(_mf(1 - y, t, s)).within(mf_tilted_one_minus(lam, delta, t, s))


def test_tilted_example_lambda1_delta1():
    # E|1 - Y|^2 = E|1 - x|^4 / E|1 - x|^2 = (10/3) / (3/2)
    assert mf_tilted_one_minus(1, 1, 2, 0) == pytest.approx(20 / 9)
    y = sample_tilted_coord(TiltedLaw(1, 1), 5, size=100000)
    assert mc_moment(np.abs(1 - y) ** 2).within(20 / 9)


def test_tilted_circle_example():
    y = sample_tilted_coord(TiltedLaw(0, 1), 6, size=100000)
    assert np.allclose(np.abs(y), 1)
    assert mc_moment(np.cos(np.angle(y))).within(-0.5)


def test_theorem_target_shift():
    for lam, delta, t, s in [(3, 0, 2, 0), (2.5, 0.5 + 0.5j, 1, 1), (4, 1, 4, 0)]:
        assert mf_theorem_a1_target(lam, delta, t, s) == pytest.approx(
            mf_tilted_one_minus(lam - 1, complex(delta) + 1, t, s))
    # delta = 0: tilt by |1 - x|^2 of the plain coordinate
    for t, s in GRID:
        expect = mf_one_plus_sphere_coord(2, t + 2, s) / mf_one_plus_sphere_coord(2, 2, 0)
        assert mf_theorem_a1_target(3, 0, t, s) == pytest.approx(expect)
    with pytest.raises(DomainError):
        mf_theorem_a1_target(1, 0, 1, 0)


def test_weyl_density():
    assert weyl_density_unitary(np.array([0.3])) == 1
    assert weyl_density_unitary(np.array([0, np.pi])) == pytest.approx(2)
    assert weyl_density_unitary(np.array([0.4, 0.4])) == 0
    th = np.array([0.1, 1.2, -2.0])
    assert weyl_density_unitary(th) == pytest.approx(weyl_density_unitary(th[::-1]))
    tr2 = lambda th: np.abs(np.exp(1j * th).sum(-1)) ** 2
    assert weyl_expectation(tr2, 2) == pytest.approx(1, abs=1e-6)
    assert weyl_expectation(tr2, 3) == pytest.approx(1, abs=1e-6)
    assert weyl_expectation(lambda th: np.ones(th.shape[:-1]), 3) == pytest.approx(1, abs=1e-12)


def test_conditional_density():
    th = np.array([0.3, -1.1])
    ratio = conditional_density_unitary(th, 0) / weyl_density_unitary(th)
    assert ratio == pytest.approx(2)
    assert conditional_density_unitary(np.array([np.pi]), 1) == pytest.approx(4)
    assert conditional_normalization(2, 1) == pytest.approx(2)
    for n, p in [(2, 0), (3, 1), (4, 2), (3, 2)]:
        z = conditional_normalization(n, p)
        one = periodic_expectation(lambda t: conditional_density_unitary(t, p) / z, n - p)
        assert one == pytest.approx(1, abs=1e-12)
    with pytest.raises(DomainError):
        conditional_normalization(5, 1)


def test_jacobi_density_and_quadrature():
    assert jacobi_density(np.array([0.5]), 2, 1.5, 0.5) == pytest.approx(1.5**1.5 * 2.5**0.5)
    assert jacobi_density(np.array([0.2, 0.2]), 2, 0.5, 0.5) == 0
    sched = alpha_schedule_general(2, 0.5, 0.5, 2)
    expect = 2 * np.prod([fst_moment(s, t, 1) for s, t in sched.pairs])
    got = jacobi_expectation(lambda x: np.prod(2 - x), 2, 2, 0.5, 0.5)
    assert got == pytest.approx(expect, abs=1e-4)
    with pytest.raises(DomainError):
        jacobi_expectation(lambda x: 1.0, 3, 2, 0, 0)


def test_so_usp_density():
    assert so_usp_density(np.array([1.0]), "so") == 1
    assert so_usp_density(np.array([np.pi / 2]), "usp") == pytest.approx(1)
    with pytest.raises(DomainError):
        so_usp_density(np.array([1.0]), "u")


@pytest.mark.parametrize("group,shift", [("so", -0.5), ("usp", 0.5)])
def test_change_of_variables(group, shift):
    # dx = 2 sin(theta) d theta and (2 - x)(2 + x) = 4 sin^2(theta)
    f = lambda x: (2 - x) ** 2
    lhs = integrate.quad(lambda th: f(2 * np.cos(th)) * so_usp_density(np.array([th]), group),
                         0, np.pi)[0]
    lhs /= integrate.quad(lambda th: so_usp_density(np.array([th]), group), 0, np.pi)[0]
    rhs = jacobi_expectation(f, 1, 2, shift, shift)
    assert lhs == pytest.approx(rhs, rel=1e-8)


def test_expected_sq_modulus():
    for n in range(1, 8):
        assert expected_sq_modulus_zp(n, 0) == pytest.approx(n + 1)
    assert expected_sq_modulus_zp(1, 0) == pytest.approx(2)
    # n=2, p=1 leaves one factor 1 - e^{i theta} tilted by |1 - e^{i theta}|^2:
    # E|1 - e|^4 / E|1 - e|^2 = 6 / 2
    assert expected_sq_modulus_zp(2, 1) == pytest.approx(3)
    direct = periodic_expectation(lambda t: np.abs(1 - np.exp(1j * t[..., 0])) ** 4, 1)
    direct /= periodic_expectation(lambda t: np.abs(1 - np.exp(1j * t[..., 0])) ** 2, 1)
    assert direct == pytest.approx(3)
    with pytest.raises(DomainError):
        expected_sq_modulus_zp(2, 2)


@pytest.mark.parametrize("beta,a,b", [(2, 0.5, 0.5), (2, 1.5, -0.5), (1, 0, 1)])
def test_edge_constant_routes_agree(beta, a, b):
    assert jacobi_edge_constant(beta, a, b, 2) == pytest.approx(
        jacobi_edge_constant_quadrature(beta, a, b), rel=1e-6)


def test_edge_constant_n1():
    # density of 2 - x near 0 is (eps^a) 4^b / (4^(a+b+1) B(a+1, b+1))
    a, b = 1.5, 0.5
    expect = 4.0**b / (4.0 ** (a + b + 1) * math.exp(
        math.lgamma(a + 1) + math.lgamma(b + 1) - math.lgamma(a + b + 2)))
    assert jacobi_edge_constant(2, a, b, 1) == pytest.approx(expect)
