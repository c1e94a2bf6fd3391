import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from condhaar.distributions import (RngStream, TiltedLaw, as_generator, beta_pdf,
                                    cospower_pdf, fst_pdf, sample_beta, sample_complex_sphere,
                                    sample_cospower_angle, sample_fst, sample_real_sphere,
                                    sample_tilted_coord, sample_tilted_log_one_minus,
                                    tilted_coord_pdf)
from condhaar.errors import DomainError
from condhaar.stats import ks_two_sample, mc_moment


def test_stream_reproducible():
    a = sample_complex_sphere(4, RngStream(3, 1), size=5)
    b = sample_complex_sphere(4, RngStream(3, 1), size=5)
    c = sample_complex_sphere(4, RngStream(3, 2), size=5)
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)


def test_as_generator_accepts_seed_and_generator():
    g = np.random.default_rng(1)
    assert as_generator(g) is g
    assert isinstance(as_generator(5), np.random.Generator)


@given(dim=st.integers(1, 12), seed=st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_spheres_have_unit_norm(dim, seed):
    z = sample_complex_sphere(dim, seed, size=7)
    x = sample_real_sphere(dim, seed, size=7)
    assert np.allclose(np.linalg.norm(z, axis=-1), 1, atol=1e-12)
    assert np.allclose(np.linalg.norm(x, axis=-1), 1, atol=1e-12)


def test_sphere_dim_one_is_unit_circle():
    z = sample_complex_sphere(1, 0, size=20000)
    assert np.allclose(np.abs(z), 1)
    assert stats.kstest(np.angle(z), stats.uniform(-np.pi, 2 * np.pi).cdf).pvalue > 1e-3


def test_sphere_rejects_bad_dim():
    with pytest.raises(DomainError):
        sample_complex_sphere(0, 0)


def test_first_coordinate_modulus_is_beta():
    # |c_1|^2 ~ B_{1, n-1} on the complex sphere of C^n
    z = sample_complex_sphere(5, 11, size=20000)[:, 0]
    assert stats.kstest(np.abs(z) ** 2, stats.beta(1, 4).cdf).pvalue > 1e-3


def test_beta_moments_and_degenerate_b():
    x = sample_beta(2.0, 3.0, 1, size=100000)
    assert mc_moment(x).within(0.4)
    assert np.all(sample_beta(1.5, 0.0, 1, size=10) == 1.0)
    assert 0 < sample_beta(0.3, 0.3, 2) <= 1
    with pytest.raises(DomainError):
        sample_beta(0.0, 1.0, 0)


def test_fst_matches_density():
    s, t = 2.5, 0.5
    x = sample_fst(s, t, 3, size=20000)
    assert np.all(np.abs(x) < 1)
    cdf = lambda v: integrate.quad(fst_pdf, -1, v, args=(s, t))[0]
    grid = np.sort(x)[::400]
    emp = (np.arange(len(x))[::400] + 0.5) / len(x)
    assert np.max(np.abs(np.array([cdf(v) for v in grid]) - emp)) < 0.02
    assert integrate.quad(fst_pdf, -1, 1, args=(s, t))[0] == pytest.approx(1, abs=1e-6)


def test_beta_pdf_normalized():
    assert integrate.quad(beta_pdf, 0, 1, args=(2.5, 0.7))[0] == pytest.approx(1, abs=1e-6)


@pytest.mark.parametrize("m,d", [(0.0, 0.0), (1.0, 0.0), (0.5, 0.5), (2.0, -1.0)])
def test_cospower_angle_density(m, d):
    phi = sample_cospower_angle(m, d, 5, size=20000)
    assert np.all(np.abs(phi) < np.pi / 2)
    assert integrate.quad(cospower_pdf, -np.pi / 2, np.pi / 2, args=(m, d))[0] == pytest.approx(1, abs=1e-6)
    cdf = np.vectorize(lambda v: integrate.quad(cospower_pdf, -np.pi / 2, v, args=(m, d))[0])
    assert stats.kstest(phi[:3000], cdf).pvalue > 1e-3


def test_cospower_rejects_bad_exponent():
    with pytest.raises(DomainError):
        sample_cospower_angle(-0.5, 0.0, 0)


def test_tilted_law_validation():
    with pytest.raises(DomainError):
        TiltedLaw(1.0, -0.5)
    with pytest.raises(DomainError):
        TiltedLaw(-1.0, 0.0)
    TiltedLaw(0.0, -0.49)


def test_tilted_zero_delta_is_base_coordinate():
    y = sample_tilted_coord(TiltedLaw(3.0, 0.0), 4, size=20000)
    assert stats.kstest(np.abs(y) ** 2, stats.beta(1, 3).cdf).pvalue > 1e-3


@pytest.mark.parametrize("lam,delta", [(0.0, 1.0), (2.0, 0.5 + 0.5j), (3.0, 1.0)])
def test_tilted_routes_agree(lam, delta):
    law = TiltedLaw(lam, delta)
    a = sample_tilted_coord(law, 1, size=5000, method="rejection")
    b = sample_tilted_coord(law, 2, size=5000, method="representation")
    assert ks_two_sample(np.abs(1 - a), np.abs(1 - b))[1] > 1e-3
    assert ks_two_sample(np.angle(1 - a), np.angle(1 - b))[1] > 1e-3


def test_tilted_log_matches_coordinate():
    law = TiltedLaw(2.0, 1.0)
    lg = sample_tilted_log_one_minus(law, 1, size=5000)
    y = sample_tilted_coord(law, 2, size=5000)
    assert ks_two_sample(lg.real, np.log(np.abs(1 - y)))[1] > 1e-3


def test_tilted_pdf_normalized():
    law = TiltedLaw(2.0, 0.5 + 0.5j)
    f = lambda r, th: tilted_coord_pdf(r * np.exp(1j * th), law) * r
    total = integrate.dblquad(f, -np.pi, np.pi, 0, 1)[0]
    assert total == pytest.approx(1, abs=1e-6)


def test_tilted_rejection_needs_nonnegative_real_part():
    with pytest.raises(DomainError):
        sample_tilted_coord(TiltedLaw(1.0, -0.25), 0, size=3, method="rejection")
