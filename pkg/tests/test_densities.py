import math

import numpy as np
import pytest
from scipy import integrate, special, stats

from jdsn.densities import FAMILIES, SupportKind, density_pdf, get_family
from jdsn.errors import ConfigError, ParameterDomainError

from conftest import FAMILY_KEYS, random_alpha


def test_normal_mode():
    assert density_pdf(get_family("normal"), [0.0, 1.0], 0.0) == pytest.approx(0.3989422804, abs=1e-10)


def test_gamma_zero_at_origin():
    assert density_pdf(get_family("gamma"), [1.0, 2.0], 0.0) == 0.0


def test_gamma_at_one():
    assert density_pdf(get_family("gamma"), [1.0, 2.0], 1.0) == pytest.approx(math.exp(-1.0), abs=1e-10)


# scipy parametrizations used as independent references
SCIPY = {
    "normal": lambda a: stats.norm(loc=a[0], scale=a[1]),
    "gamma": lambda a: stats.gamma(a[1], scale=a[0]),
    "ig": lambda a: stats.invgauss(a[0] / a[1], scale=a[1]),
    "weibull": lambda a: stats.weibull_min(a[1], scale=a[0]),
    "lognormal": lambda a: stats.lognorm(a[1], scale=math.exp(a[0])),
}


@pytest.mark.parametrize("key", FAMILY_KEYS)
def test_logpdf_matches_scipy(key, rng):
    fam = get_family(key)
    for _ in range(5):
        a = random_alpha(fam, rng)
        ref = SCIPY[key](a)
        z = ref.rvs(size=50, random_state=rng)
        np.testing.assert_allclose(fam.logpdf(z, a), ref.logpdf(z), rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("key", FAMILY_KEYS)
def test_normalization(key, rng):
    fam = get_family(key)
    lo = -np.inf if fam.support is SupportKind.WHOLE_LINE else 0.0
    for _ in range(5):
        a = random_alpha(fam, rng)
        med = float(np.median(fam.sample(rng, a, 2001)))
        pdf = lambda z: float(fam.pdf(z, a))  # noqa: E731
        total = integrate.quad(pdf, lo, med, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
        total += integrate.quad(pdf, med, np.inf, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
        assert abs(total - 1.0) <= 1e-8


@pytest.mark.parametrize("key", FAMILY_KEYS)
def test_sampler_matches_distribution(key, rng):
    fam = get_family(key)
    a = random_alpha(fam, rng)
    draws = fam.sample(rng, a, 20000)
    assert stats.kstest(draws, SCIPY[key](a).cdf).pvalue > 1e-3


@pytest.mark.parametrize("key", ["gamma", "ig", "weibull", "lognormal"])
def test_half_line_support(key):
    fam = get_family(key)
    a = random_alpha(fam, np.random.default_rng(1))
    z = np.array([-1.0, 0.0])
    assert np.all(fam.logpdf(z, a) == -np.inf)
    assert np.all(fam.pdf(z, a) == 0.0)
    assert not np.any(fam.in_support(z))


def test_gamma_shape_must_exceed_one():
    fam = get_family("gamma")
    assert not fam.admissible([1.0, 1.0])
    with pytest.raises(ParameterDomainError):
        fam.logpdf(1.0, [1.0, 0.9])


def test_unknown_family():
    with pytest.raises(ConfigError):
        get_family("cauchy")


def _fd_check(f, df, x0, h):
    """Central difference of ``f`` along each coordinate of ``x0``."""
    x0 = np.asarray(x0, dtype=float)
    cols = []
    for j in range(x0.size):
        e = np.zeros_like(x0)
        e[j] = h * max(1.0, abs(x0[j]))
        cols.append((f(x0 + e) - f(x0 - e)) / (2 * e[j]))
    return np.stack(cols, axis=-1), df(x0)


@pytest.mark.parametrize("key", FAMILY_KEYS)
def test_density_gradients_by_finite_differences(key, rng):
    fam = get_family(key)
    for _ in range(20):
        a = random_alpha(fam, rng)
        z = float(fam.sample(rng, a, 1)[0])
        fd, an = _fd_check(lambda al: fam.logpdf(z, al), lambda al: fam.dlog_dalpha(z, al), a, 1e-6)
        np.testing.assert_allclose(an, fd, rtol=1e-6, atol=1e-6)
        fd, an = _fd_check(lambda al: fam.dlog_dalpha(z, al), lambda al: fam.d2log_dalpha2(z, al), a, 1e-6)
        np.testing.assert_allclose(an, fd.reshape(an.shape), rtol=1e-5, atol=1e-5)
        hz = 1e-6 * max(1.0, abs(z))
        fd = (fam.dlog_dalpha(z + hz, a) - fam.dlog_dalpha(z - hz, a)) / (2 * hz)
        np.testing.assert_allclose(fam.d2log_dz_dalpha(z, a), fd, rtol=1e-5, atol=1e-5)


def test_gamma_alpha_scores_closed_form():
    fam = get_family("gamma")
    a1, a2, z = 1.5, 2.5, 0.7
    expect = [-a2 / a1 + z / a1**2, math.log(z) - math.log(a1) - special.digamma(a2)]
    np.testing.assert_allclose(fam.dlog_dalpha(z, [a1, a2]), expect, rtol=1e-13)


def test_registry_covers_five_families():
    assert set(FAMILIES) == set(FAMILY_KEYS)
