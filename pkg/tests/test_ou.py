import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from stable_spde import PowerLaw, StableLaw, Verdict, absolute_moment
from stable_spde import heat, ou, product
from stable_spde import rng as rngs


def power_model(alpha, N, g=(1.0, 2.0), b=(1.0, 0.0)):
    return ou.SpectralModel.power(StableLaw(alpha), N, PowerLaw(*g), PowerLaw(*b))


def ecf(samples, s):
    return np.mean(np.cos(s * samples))


# --- model and hypotheses ----------------------------------------------------


def test_model_validation():
    law = StableLaw(1.5)
    with pytest.raises(ValueError):
        ou.SpectralModel(law, [1.0, 2.0], [1.0, 0.0])
    with pytest.raises(ValueError):
        ou.SpectralModel(law, [2.0, 1.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        ou.SpectralModel(law, [1.0], [1.0, 1.0])


def test_hypothesis_basic_examples():
    assert ou.hypothesis_basic_check(power_model(1.0, 20)).verdict is Verdict.HOLDS
    assert ou.hypothesis_basic_check(power_model(1.0, 20, g=(1.0, 1.0))).verdict is Verdict.FAILS
    m = heat.build_heat_model(heat.HeatModelConfig(1, 100), StableLaw(1.5))
    dec = ou.hypothesis_basic_check(m)
    assert dec.holds
    assert dec.partial_sum == pytest.approx(sum(1.0 / n**2 for n in range(1, 101)), rel=1e-14)


def test_mode_scale_examples():
    m = ou.SpectralModel(StableLaw(1.5), [2.0], [3.0])
    assert ou.mode_scale(m, 1, 0.0) == 0.0
    assert ou.mode_scale(m, 1, 0.5) == pytest.approx(3 * ((1 - math.exp(-1.5)) / 3) ** (2 / 3), rel=1e-14)
    m1 = ou.SpectralModel(StableLaw(1.0), [1.0], [1.0])
    assert ou.mode_scale(m1, 1, 50.0) == pytest.approx(1.0, rel=1e-15)
    with pytest.raises(ValueError):
        ou.mode_scale(m, 1, -1.0)


@settings(max_examples=100, deadline=None)
@given(
    st.floats(0.3, 2.0),
    st.floats(0.01, 100),
    st.floats(0.01, 10),
    st.floats(1e-6, 10),
    st.floats(1e-6, 10),
)
def test_mode_scale_increasing_and_bounded(alpha, gamma, beta, t1, dt):
    m = ou.SpectralModel(StableLaw(alpha), [gamma], [beta])
    c1, c2 = ou.mode_scale(m, 1, t1), ou.mode_scale(m, 1, t1 + dt)
    limit = beta * (alpha * gamma) ** (-1 / alpha)
    assert 0 < c1 <= c2 <= limit * (1 + 1e-12)


# --- exact steps and simulation ---------------------------------------------


def test_exact_step_forgets_initial_condition():
    m = ou.SpectralModel(StableLaw(1.5), [50.0], [1.0])
    a = ou.ou_exact_step(m, np.array([100.0]), 1.0, rngs.stream(1, 0))
    b = ou.ou_exact_step(m, np.array([0.0]), 1.0, rngs.stream(1, 0))
    assert abs(a[0] - b[0]) <= 100 * math.exp(-50) * 2


def test_exact_step_characteristic_function():
    M = 200_000
    m = ou.SpectralModel(StableLaw(1.3), [2.0], [0.7])
    x = ou.ou_exact_step(m, np.zeros((M, 1)), 0.4, rngs.stream(3, 0))[:, 0]
    c = ou.mode_scale(m, 1, 0.4)
    for s in (0.5, 1.0, 2.0):
        assert abs(ecf(x, s) - math.exp(-abs(c * s) ** 1.3)) < 4 / math.sqrt(M)


def test_two_half_steps_match_one_step_in_law():
    M = 200_000
    m = ou.SpectralModel(StableLaw(0.9), [1.5], [1.0])
    x0 = np.full((M, 1), 0.8)
    one = ou.ou_exact_step(m, x0, 0.6, rngs.stream(5, 0))[:, 0]
    two = ou.ou_exact_step(m, ou.ou_exact_step(m, x0, 0.3, rngs.stream(5, 1)), 0.3, rngs.stream(5, 2))[:, 0]
    shift = math.exp(-1.5 * 0.6) * 0.8
    for s in (0.5, 1.0, 2.0):
        assert abs(ecf(one - shift, s) - ecf(two - shift, s)) < 2 * 4 / math.sqrt(M)


def test_simulate_zero_noise_is_flow():
    m = power_model(1.5, 6)
    x0 = np.linspace(1, 2, 6)
    t = np.linspace(0, 2, 21)
    rec = ou.simulate(m, x0, t, seed=0, zero_noise=True)
    assert np.array_equal(rec.coeffs, np.exp(-np.outer(t, m.gamma)) * x0)


def test_simulate_reproducible_and_seed_sensitive():
    m = power_model(1.2, 5)
    t = np.linspace(0, 1, 11)
    a = ou.simulate(m, np.ones(5), t, 17)
    assert np.array_equal(a.coeffs, ou.simulate(m, np.ones(5), t, 17).coeffs)
    assert not np.array_equal(a.coeffs, ou.simulate(m, np.ones(5), t, 18).coeffs)
    assert np.array_equal(a.coeffs[0], np.ones(5))


def test_simulate_linearity():
    m = power_model(1.5, 8)
    t = np.linspace(0, 1, 51)
    x = np.linspace(-3, 3, 8)
    zero = ou.simulate(m, np.zeros(8), t, 2).coeffs
    rec = ou.simulate(m, x, t, 2).coeffs
    flow = m.flow(x, t)
    assert np.array_equal(rec, flow + zero)
    ulp = np.spacing(np.maximum(np.abs(flow), np.abs(zero)))
    assert np.all(np.abs((rec - zero) - flow) <= ulp)


def test_simulate_rejects_bad_grid_and_failed_hypothesis():
    m = power_model(1.5, 3)
    for grid in ([], [0.0, 0.0, 1.0], [0.1, 0.5]):
        with pytest.raises(ValueError):
            ou.simulate(m, np.zeros(3), grid, 0)
    with pytest.raises(ValueError):
        ou.simulate(power_model(1.0, 3, g=(1.0, 1.0)), np.zeros(3), [0.0, 1.0], 0)


def test_threads_do_not_change_results(monkeypatch):
    m = power_model(1.5, 12)
    t = np.linspace(0, 1, 6)
    monkeypatch.setenv(ou.THREADS_ENV, "1")
    a = ou.simulate(m, np.ones(12), t, 8).coeffs
    monkeypatch.setenv(ou.THREADS_ENV, "4")
    assert np.array_equal(a, ou.simulate(m, np.ones(12), t, 8).coeffs)


def test_grid_invariance_in_law():
    M = 100_000
    m = power_model(1.5, 2)
    coarse = ou.stochastic_convolution(m, [0.0, 1.0], 1, M)[-1]
    fine = ou.stochastic_convolution(m, np.linspace(0, 1, 9), 2, M)[-1]
    c = ou.mode_scales(m, 1.0)
    for n in range(2):
        for s in (0.5, 1.0, 2.0):
            exact = math.exp(-abs(c[n] * s) ** 1.5)
            assert abs(ecf(coarse[:, n], s) - exact) < 4 / math.sqrt(M)
            assert abs(ecf(fine[:, n], s) - exact) < 4 / math.sqrt(M)


def test_galerkin_shares_noise_streams():
    m = power_model(1.5, 10)
    t = np.linspace(0, 1, 5)
    full = ou.stochastic_convolution(m, t, 3)
    part = ou.stochastic_convolution(m.truncate(4), t, 3)
    assert np.array_equal(full[:, :4], part)


def test_trajectory_csv_and_manifest_round_trip(tmp_path):
    m = power_model(1.5, 3)
    rec = ou.simulate(m, [1.0, 2.0, 3.0], np.linspace(0, 1, 4), 5)
    rec.to_csv(tmp_path / "t.csv")
    rec.to_json(tmp_path / "t.json")
    rows = (tmp_path / "t.csv").read_text().splitlines()
    assert rows[0] == "t,coeff_1,coeff_2,coeff_3"
    back = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    assert np.array_equal(back[:, 0], rec.times) and np.array_equal(back[:, 1:], rec.coeffs)
    meta = json.loads((tmp_path / "t.json").read_text())
    assert meta["seed"] == 5 and meta["model"]["gamma"] == [1.0, 4.0, 9.0]


# --- moments -----------------------------------------------------------------


def enumerated_khintchine_ok(c, p):
    # exact E|sum r_n c_n|^p over all sign patterns
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=len(c))))
    moment = np.mean(np.abs(signs @ c) ** p)
    return np.linalg.norm(c) <= ou.khintchine_constant(p) * moment ** (1 / p) * (1 + 1e-12)


def test_khintchine_constant_anchor_and_tightness():
    assert ou.khintchine_constant(1.0) == pytest.approx(math.sqrt(2))
    # two equal coefficients attain the constant for p <= p0
    for p in (0.5, 1.0, 1.5):
        c = np.array([1.0, 1.0])
        moment = np.mean(np.abs(np.array([2.0, 0.0, 0.0, -2.0])) ** p)
        assert math.sqrt(2) == pytest.approx(ou.khintchine_constant(p) * moment ** (1 / p))


@settings(max_examples=200, deadline=None)
@given(st.floats(0.2, 1.99), st.lists(st.floats(0.01, 10), min_size=1, max_size=10))
def test_khintchine_inequality_by_enumeration(p, c):
    assert enumerated_khintchine_ok(np.array(c), p)


def test_moment_single_mode_closed_form():
    m = ou.SpectralModel(StableLaw(1.5), [1.0], [1.0])
    p, t, M = 0.5, 1.0, 200_000
    probe = ou.moment_bound_probe(m, t, p, M, 4)
    exact = ou.mode_scale(m, 1, t) ** p * absolute_moment(1.5, p)
    assert abs(probe.empirical - exact) < 4 * probe.stderr
    assert probe.holds


def test_moment_probe_zero_time_and_rejection():
    m = power_model(1.5, 4)
    probe = ou.moment_bound_probe(m, 0.0, 1.0, 100, 0)
    assert probe.empirical == 0.0 and probe.bound == 0.0
    with pytest.raises(ValueError):
        ou.moment_bound_probe(m, 1.0, 1.5, 100, 0)


def test_moment_bound_heat_model():
    m = heat.build_heat_model(heat.HeatModelConfig(1, 64), StableLaw(1.5))
    probe = ou.moment_bound_probe(m, 1.0, 1.0, 100_000, 11)
    assert probe.holds


# --- continuity --------------------------------------------------------------


def test_continuity_zero_step_and_trend():
    m = power_model(1.5, 8)
    h = [0.32, 0.16, 0.08, 0.04, 0.02, 0.0]
    table = ou.stochastic_continuity_probe(m, 0.5, h, [0.1, 1.0], 50_000, 3)
    assert np.all(table[-1] == 0.0)
    sup = table.max(axis=1)
    se = np.sqrt(sup * (1 - sup) / 50_000)
    assert np.all(np.diff(sup) <= 2 * (se[:-1] + se[1:]))
    assert sup[4] < sup[0]


def test_continuity_gaussian_reference():
    m = ou.SpectralModel(StableLaw(2.0), [1.0], [1.0])
    eps, M = 0.3, 200_000
    hs, ts = [0.05, 0.2], [0.5, 2.0]
    table = ou.stochastic_continuity_probe(m, eps, hs, ts, M, 6)
    for i, h in enumerate(hs):
        for j, t in enumerate(ts):
            var = 2 * ((math.exp(-h) - 1) ** 2 * ou.mode_scale(m, 1, t) ** 2 + ou.mode_scale(m, 1, h) ** 2)
            exact = special.erfc(eps / math.sqrt(2 * var))
            assert abs(table[i, j] - exact) < 4 * math.sqrt(exact * (1 - exact) / M)


# --- smoothing constant ------------------------------------------------------


def test_smoothing_constant_examples():
    m = power_model(1.0, 10, g=(1.0, 1.0), b=(1.0, 0.0))
    sv = ou.smoothing_constant(m, 1.0, details=True)
    assert sv.value == pytest.approx(math.exp(-1)) and sv.argmax == 1
    assert ou.smoothing_constant(m, 200.0) < 1e-80
    with pytest.raises(ValueError):
        ou.smoothing_constant(m, 0.0)


def test_smoothing_constant_tail_extension_finds_peak():
    # gamma_n = n^2, alpha = 1.5, t = 1e-3: peak near gamma = 1/(alpha t) ~ 667, n ~ 26 > N
    m = power_model(1.5, 5)
    sv = ou.smoothing_constant(m, 1e-3, details=True)
    n = np.arange(1, 10_000)
    brute = np.max(np.exp(-(n**2) * 1e-3) * (n**2.0) ** (1 / 1.5))
    assert sv.value == pytest.approx(brute, rel=1e-14) and sv.decided_by == "tail_rule"


def test_smoothing_constant_heat_d2():
    alpha, t = 1.2, 0.1
    m = heat.build_heat_model(heat.HeatModelConfig(2, 10), StableLaw(alpha))
    # brute force over a much larger cube; the envelope peaks at gamma = 1/(alpha t) < 10
    g = np.array([a * a + b * b for a in range(1, 80) for b in range(1, 80)], dtype=float)
    brute = np.max(np.exp(-g * t) * g ** (1 / alpha))
    assert ou.smoothing_constant(m, t) == pytest.approx(brute, rel=1e-14)


# --- densities and gradients -------------------------------------------------


def test_transition_density_ratio_identities():
    m = power_model(1.5, 3)
    z = np.array([[0.1, -0.2, 0.3]])
    x = np.array([0.5, 0.1, -0.4])
    assert ou.transition_density_ratio(m, x, x, 0.5, z)[0] == 1.0
    t = 0.7
    r = ou.transition_density_ratio(m, x, np.zeros(3), t, z[:, :1], K=1)
    spec = product.ProductMeasureSpec(m.law, [ou.mode_scale(m, 1, t)])
    direct = product.density_ratio(z[:, :1], spec, product.ShiftPair([math.exp(-t) * x[0]], [0.0]))
    assert r[0] == pytest.approx(direct[0], abs=1e-12)


def test_transition_density_ratio_martingale():
    m = power_model(1.5, 3)
    t, M = 0.5, 100_000
    x, y = np.array([0.3, -0.2, 0.1]), np.zeros(3)
    z = ou.sample_marginal(m, y, t, M, 12)
    r = ou.transition_density_ratio(m, x, y, t, z)
    assert abs(r.mean() - 1) <= 3 * r.std(ddof=1) / math.sqrt(M)


def test_gradient_of_constant_is_zero():
    m = power_model(1.5, 3)
    est = ou.gradient_estimator(m, lambda z: np.ones(z.shape[0]), np.zeros(3), np.array([1.0, 0, 0]), 0.5, 100_000, 1)
    assert abs(est.estimate) <= 3 * est.stderr


def test_gradient_gaussian_closed_form():
    gamma, t, x = 1.0, 0.5, 0.7
    m = ou.SpectralModel(StableLaw(2.0), [gamma], [1.0])
    est = ou.gradient_estimator(m, lambda z: np.sin(z[:, 0]), [x], [1.0], t, 400_000, 2)
    c = ou.mode_scale(m, 1, t)
    # R_t sin(x) = sin(e^{-t} x) E cos(c L) with L ~ N(0, 2)
    exact = math.exp(-gamma * t) * math.cos(math.exp(-gamma * t) * x) * math.exp(-(c**2))
    assert abs(est.estimate - exact) <= 3 * est.stderr


@pytest.mark.parametrize("alpha", [0.8, 1.5])
def test_gradient_finite_difference(alpha):
    m = power_model(alpha, 3)
    f = lambda z: np.tanh(z[..., 0] + 0.5 * z[..., 1])
    h = np.array([0.6, 0.8, 0.0])
    cmp = ou.finite_difference_gradient(m, f, np.array([0.2, -0.1, 0.0]), h, 0.5, 200_000, 5)
    assert abs(cmp.difference) <= max(3 * cmp.joint_stderr, 1e-3)


def test_gradient_baseline_preserves_mean():
    m = power_model(1.5, 3)
    f = lambda z: 1.0 + np.tanh(z[..., 0])
    h = np.array([1.0, 0, 0])
    x = np.array([1.5, 0.0, 0.0])
    a = ou.gradient_estimator(m, f, x, h, 0.5, 200_000, 5)
    b = ou.gradient_estimator(m, f, x, h, 0.5, 200_000, 5, baseline=True)
    assert abs(a.estimate - b.estimate) <= 3 * math.hypot(a.stderr, b.stderr)
    assert b.stderr < a.stderr


@pytest.mark.parametrize("alpha", [0.8, 1.0, 1.5, 2.0])
def test_gradient_within_cauchy_schwarz_bound(alpha):
    m = power_model(alpha, 3)
    h = np.array([0.6, 0.0, 0.8])
    est = ou.gradient_estimator(m, lambda z: np.tanh(3 * z[..., 0] - z[..., 2]), np.zeros(3), h, 0.5, 100_000, 3)
    assert est.within_l2_bound


# --- support ----------------------------------------------------------------


def test_support_coverage():
    m = power_model(0.8, 3)
    x = np.array([1.0, 0.0, 0.0])
    t = 0.5
    centers = np.array([m.flow(x, t), [30.0, 0.0, 0.0]])
    probe = ou.support_coverage_probe(m, x, t, centers, 50.0, 20_000, 1)
    assert probe.frequency[0] > 0.95 and probe.hits[1] > 0
    far = ou.support_coverage_probe(m, x, t, centers[1:], 2.0, 100_000, 1)
    assert far.hits[0] > 0
    g = ou.support_coverage_probe(power_model(2.0, 3), x, t, [[30.0, 0.0, 0.0]], 0.01, 1000, 1)
    assert g.hits[0] == 0 and g.M == 1000
