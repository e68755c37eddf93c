import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special, stats

from stable_spde import StableLaw, TailUndefinedError, absolute_moment
from stable_spde import rng as rngs

ALPHAS = [0.5, 0.8, 1.0, 1.2, 1.5, 1.9]


def fourier_pdf(alpha, x):
    """High-precision oracle for p(x) at large x.

    alpha < 1: the convergent power series summed in 30-digit arithmetic;
    alpha > 1: the oscillatory Fourier integral by mpmath's quadosc.
    """
    with mp.workdps(30):
        if alpha < 1:
            a = mp.mpf(alpha)
            val = mp.nsum(lambda k: (-1) ** (k + 1) * mp.gamma(a * k + 1) / mp.factorial(k) * mp.sin(k * mp.pi * a / 2) * mp.mpf(x) ** (-(a * k + 1)), [1, mp.inf])
        else:
            val = mp.quadosc(lambda s: mp.cos(x * s) * mp.exp(-(s**alpha)), [0, mp.inf], omega=x)
        return float(val / mp.pi)


def test_alpha_validated():
    for bad in (0.0, -1.0, 2.5, float("nan")):
        with pytest.raises(ValueError):
            StableLaw(bad)


def test_cauchy_closed_form():
    x = np.linspace(-20, 20, 2001)
    law = StableLaw(1.0)
    assert np.max(np.abs(law.density(x) - 1 / (math.pi * (1 + x**2)))) < 1e-8
    assert np.max(np.abs(law.cdf(x) - (0.5 + np.arctan(x) / math.pi))) < 1e-8
    assert np.max(np.abs(law.density_derivative(x) + 2 * x / (math.pi * (1 + x**2) ** 2))) < 1e-8


def test_gaussian_closed_form():
    x = np.linspace(-20, 20, 2001)
    law = StableLaw(2.0)
    ref = stats.norm(scale=math.sqrt(2.0))
    assert np.max(np.abs(law.density(x) - ref.pdf(x))) < 1e-12
    assert np.max(np.abs(law.cdf(x) - ref.cdf(x))) < 1e-12
    assert np.allclose(law.score(x), -x / 2)


@pytest.mark.parametrize("alpha", [0.5, 0.8, 1.2, 1.5, 1.9])
def test_density_matches_independent_implementation(alpha):
    x = np.array([0.0, 0.3, 1.0, 2.5, 7.0, 30.0])
    law = StableLaw(alpha)
    ref = stats.levy_stable.pdf(x, alpha, 0.0)
    assert np.max(np.abs(law.density(x) / ref - 1)) < 1e-7
    assert np.max(np.abs(law.cdf(x) - stats.levy_stable.cdf(x, alpha, 0.0))) < 1e-8


@pytest.mark.parametrize("alpha", ALPHAS)
def test_density_at_zero(alpha):
    assert StableLaw(alpha).density(0.0) == pytest.approx(math.gamma(1 + 1 / alpha) / math.pi, rel=1e-10)


@pytest.mark.parametrize("alpha", [0.5, 1.5])
def test_tail_region_matches_fourier_oracle(alpha):
    law = StableLaw(alpha)
    for x in (law.tail_switch * 1.5, 50.0, 200.0):
        assert law.density(x) == pytest.approx(fourier_pdf(alpha, x), rel=1e-7)


@pytest.mark.parametrize("alpha", ALPHAS)
def test_seam_continuity(alpha):
    law = StableLaw(alpha)
    xs = law.tail_switch
    lo, hi = np.nextafter(xs, 0), np.nextafter(xs, np.inf)
    assert law.density(hi) == pytest.approx(law.density(lo), rel=1e-8)
    assert law.score(hi) == pytest.approx(law.score(lo), rel=1e-6)
    assert law.cdf(hi) == pytest.approx(law.cdf(lo), abs=1e-12)


@pytest.mark.parametrize("alpha", ALPHAS)
def test_normalization_by_quadrature(alpha):
    law = StableLaw(alpha)
    X = law.tail_switch
    core = integrate.quad(law.density, 0.0, X, limit=200, epsabs=1e-14)[0]
    tail = integrate.quad(law.density, X, np.inf, limit=200, epsabs=1e-14)[0]
    assert 2 * (core + tail) == pytest.approx(1.0, abs=1e-8)


def test_score_zero_at_mode():
    for a in ALPHAS + [2.0]:
        assert StableLaw(a).score(0.0) == 0.0


def test_tail_constant_closed_form():
    assert StableLaw(1.0).tail_constant() == pytest.approx(1 / math.pi)
    with pytest.raises(TailUndefinedError):
        StableLaw(2.0).tail_constant()


@pytest.mark.parametrize("alpha", [0.5, 1.5])
def test_tail_constant_matches_fourier_asymptote(alpha):
    # x^(1+alpha) p(x) from the oracle at two large x, one Richardson step on the 1/x^alpha correction
    x1, x2 = 1000.0, 2000.0
    f1 = x1 ** (alpha + 1) * fourier_pdf(alpha, x1)
    f2 = x2 ** (alpha + 1) * fourier_pdf(alpha, x2)
    r = 2.0**alpha
    extrapolated = (r * f2 - f1) / (r - 1)
    assert StableLaw(alpha).tail_constant() == pytest.approx(extrapolated, rel=1e-3)


def test_fisher_constant_analytic_cases():
    assert StableLaw(1.0).fisher_constant() == pytest.approx(1 / 16, rel=1e-8)
    assert StableLaw(2.0).fisher_constant() == 1 / 16


def test_fisher_constant_independent_route():
    # oracle: Fisher information from the levy_stable density with central differences
    alpha = 1.5
    h = 1e-4

    def integrand(z):
        p = stats.levy_stable.pdf(z, alpha, 0.0)
        dp = (stats.levy_stable.pdf(z + h, alpha, 0.0) - stats.levy_stable.pdf(z - h, alpha, 0.0)) / (2 * h)
        return dp * dp / p

    z = np.linspace(0, 60, 6001)
    core = integrate.simpson(integrand(z), x=z)
    # beyond 60 use the first-order tail, p ~ C z^-(a+1), p'^2/p ~ C (a+1)^2 z^-(a+3)
    C = math.gamma(alpha + 1) * math.sin(math.pi * alpha / 2) / math.pi
    tail = C * (alpha + 1) ** 2 * 60.0 ** (-(alpha + 2)) / (alpha + 2)
    assert StableLaw(alpha).fisher_constant() == pytest.approx(2 * (core + tail) / 8, rel=1e-5)


@pytest.mark.parametrize("alpha", [0.7, 1.0, 1.5, 2.0])
def test_hellinger_two_routes_agree(alpha):
    law = StableLaw(alpha)
    for x in (0.05, 0.5, 3.0):
        assert law.hellinger_gap(x) == pytest.approx(1 - law.overlap(x), abs=1e-9)


def test_hellinger_gaussian_closed_form():
    # N(0,2) shifted by x: overlap exp(-x^2/16)
    law = StableLaw(2.0)
    for x in (0.01, 0.7, 4.0):
        assert law.hellinger_gap(x) == pytest.approx(-math.expm1(-x * x / 16), rel=1e-7)


def test_hellinger_cauchy_closed_form():
    # Bhattacharyya coefficient of two unit Cauchy laws at distance x: (2/pi) K(-x^2/4)... via elliptic K
    law = StableLaw(1.0)
    for x in (0.1, 1.0, 5.0):
        oracle = integrate.quad(lambda z: 1 / (math.pi * math.sqrt((1 + z * z) * (1 + (z - x) ** 2))), -np.inf, np.inf)[0]
        assert law.hellinger_gap(x) == pytest.approx(1 - oracle, rel=1e-7)


@pytest.mark.parametrize("alpha,p", [(1.5, 1.0), (1.5, 0.5), (0.8, 0.3), (1.0, 0.5), (2.0, 2.0), (2.0, 1.0)])
def test_absolute_moment_against_quadrature(alpha, p):
    law = StableLaw(alpha)
    if alpha == 2.0:
        oracle = 2 * integrate.quad(lambda z: z**p * law.density(z), 0, np.inf)[0]
    else:
        X = law.tail_switch
        oracle = 2 * (
            integrate.quad(lambda z: z**p * law.density(z), 0, X, limit=200)[0]
            + integrate.quad(lambda z: z**p * law.density(z), X, np.inf, limit=200)[0]
        )
    assert absolute_moment(alpha, p) == pytest.approx(oracle, rel=1e-6)


def test_absolute_moment_divergence_rejected():
    with pytest.raises(ValueError):
        absolute_moment(1.5, 1.5)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5, 1.9])
def test_sampler_ks(alpha):
    law = StableLaw(alpha)
    x = law.sample(rngs.stream(2024, rngs.SAMPLER, int(alpha * 10)), 20000)
    assert stats.kstest(x, law.cdf).pvalue > 1e-3


def test_sampler_reproducible():
    law = StableLaw(1.3)
    a = law.sample(rngs.stream(5, 0), 100)
    b = law.sample(rngs.stream(5, 0), 100)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, law.sample(rngs.stream(6, 0), 100))


# --- properties ---------------------------------------------------------------

alpha_st = st.sampled_from([0.5, 0.8, 1.0, 1.2, 1.5, 1.9, 2.0])
x_st = st.floats(min_value=-1e4, max_value=1e4, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(alpha_st, x_st)
def test_symmetry(alpha, x):
    law = StableLaw(alpha)
    assert law.density(x) == law.density(-x)
    assert law.score(x) == -law.score(-x)
    assert law.cdf(x) + law.cdf(-x) == pytest.approx(1.0, abs=1e-14)


@settings(max_examples=200, deadline=None)
@given(alpha_st, x_st, st.floats(min_value=1e-3, max_value=10))
def test_cdf_monotone_and_density_positive(alpha, x, dx):
    law = StableLaw(alpha)
    assert law.cdf(x + dx) >= law.cdf(x)
    if abs(x) < 30:
        assert law.density(x) > 0


@settings(max_examples=100, deadline=None)
@given(st.sampled_from([0.5, 0.8, 1.2, 1.5, 1.9]), st.floats(min_value=-200, max_value=200))
def test_score_is_log_derivative(alpha, x):
    law = StableLaw(alpha)
    h = 1e-5 * max(1.0, abs(x))
    fd = (law.logpdf(x + h) - law.logpdf(x - h)) / (2 * h)
    assert law.score(x) == pytest.approx(fd, rel=1e-4, abs=1e-7)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([0.8, 1.5]), st.floats(min_value=0.01, max_value=20), st.floats(min_value=1.05, max_value=3))
def test_hellinger_gap_bounded_and_increasing(alpha, x, factor):
    law = StableLaw(alpha)
    g1, g2 = law.hellinger_gap(x), law.hellinger_gap(x * factor)
    assert 0 <= g1 <= g2 <= 1


def test_gap_quadratic_limit():
    for a in (1.0, 1.5, 2.0):
        law = StableLaw(a)
        assert law.hellinger_gap(1e-2) / 1e-4 == pytest.approx(law.fisher_constant(), rel=1e-2)


def test_erfc_branch_consistency():
    law = StableLaw(2.0)
    assert law.sf(3.0) == pytest.approx(0.5 * special.erfc(1.5), rel=1e-14)
