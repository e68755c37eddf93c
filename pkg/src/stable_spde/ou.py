"""Spectral simulation of the stable Ornstein-Uhlenbeck process.

With ``A e_n = -gamma_n e_n`` and noise ``Z = sum beta_n Z^n e_n`` the modes
decouple into scalar equations ``dX^n = -gamma_n X^n dt + beta_n dZ^n``.
Each mode's stochastic convolution at time t is distributed as
``c_n(t) L_n`` with

    c_n(t) = beta_n ((1 - exp(-alpha gamma_n t)) / (alpha gamma_n))**(1/alpha)

so one step of length h is simulated exactly in law by
``X_{t+h} = exp(-gamma_n h) X_t + c_n(h) L``.  The module also carries the
hypothesis checks on ``(gamma_n, beta_n)``, Monte Carlo probes (moments,
stochastic continuity, support) and the score-function formula for the
derivative of the transition semigroup.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize, special

from . import product
from . import rng as rngs
from .stable import StableLaw, absolute_moment
from .tails import Decision, PowerLaw, Verdict, power_series_decision

__all__ = [
    "SpectralModel",
    "TrajectoryRecord",
    "hypothesis_basic_check",
    "mode_scale",
    "mode_scales",
    "ou_exact_step",
    "simulate",
    "stochastic_convolution",
    "sample_marginal",
    "khintchine_constant",
    "moment_bound_probe",
    "stochastic_continuity_probe",
    "smoothing_constant",
    "transition_density_ratio",
    "gradient_estimator",
    "finite_difference_gradient",
    "support_coverage_probe",
]

THREADS_ENV = "STABLE_SPDE_THREADS"


@dataclass(frozen=True, eq=False)
class SpectralModel:
    """Eigenvalues ``gamma_n`` of ``-A`` and noise scales ``beta_n`` for n = 1..N.

    ``gamma_tail``/``beta_tail`` optionally describe the sequences beyond N;
    ``indices`` can carry labels of the modes (multi-indices for the heat
    equation).
    """

    law: StableLaw
    gamma: np.ndarray
    beta: np.ndarray
    gamma_tail: PowerLaw | None = None
    beta_tail: PowerLaw | None = None
    indices: np.ndarray | None = None

    def __post_init__(self):
        g = np.array(self.gamma, dtype=float).reshape(-1)
        b = np.array(self.beta, dtype=float).reshape(-1)
        if g.size == 0 or g.shape != b.shape:
            raise ValueError("gamma and beta must be non-empty and of equal length")
        if np.any(~(g > 0)) or np.any(~(b > 0)) or not (np.all(np.isfinite(g)) and np.all(np.isfinite(b))):
            raise ValueError("gamma_n and beta_n must be finite and strictly positive")
        if np.any(np.diff(g) < 0):
            raise ValueError("gamma must be sorted non-decreasingly")
        for rule in (self.gamma_tail, self.beta_tail):
            if rule is not None and rule.coef <= 0:
                raise ValueError("tail rules of a spectral model need a positive constant")
        if self.gamma_tail is not None and self.gamma_tail.exponent <= 0:
            raise ValueError("gamma_n must grow to infinity (positive tail exponent)")
        g.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "beta", b)

    @property
    def N(self) -> int:
        return self.gamma.size

    @property
    def alpha(self) -> float:
        return self.law.alpha

    @classmethod
    def power(cls, law: StableLaw, N: int, gamma: PowerLaw, beta: PowerLaw) -> "SpectralModel":
        """``gamma_n = gamma(n)`` and ``beta_n = beta(n)`` for every n, rules kept as tails."""
        n = np.arange(1, N + 1)
        return cls(law, gamma(n), beta(n), gamma, beta)

    def truncate(self, n: int) -> "SpectralModel":
        """The first ``n`` modes (tail rules are dropped: the tail is now explicit data)."""
        if not 1 <= n <= self.N:
            raise ValueError(f"n must lie in [1, {self.N}]")
        idx = None if self.indices is None else self.indices[:n]
        return SpectralModel(self.law, self.gamma[:n], self.beta[:n], None, None, idx)

    def flow(self, x, t):
        """Deterministic part ``exp(-gamma_n t) x_n``; ``t`` may be an array of times."""
        t = np.asarray(t, dtype=float)
        decay = np.exp(-np.multiply.outer(t, self.gamma))
        x = np.asarray(x, dtype=float)
        if t.ndim == 0:
            return decay * x
        # broadcast (M+1, N) against (..., N) keeping time first
        return decay.reshape(decay.shape[:1] + (1,) * (x.ndim - 1) + decay.shape[1:]) * x

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "gamma": self.gamma.tolist(),
            "beta": self.beta.tolist(),
            "gamma_tail": None if self.gamma_tail is None else self.gamma_tail.to_dict(),
            "beta_tail": None if self.beta_tail is None else self.beta_tail.to_dict(),
        }


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """Mode coefficients of one simulated path on a time grid."""

    times: np.ndarray
    coeffs: np.ndarray
    seed: int
    model: SpectralModel
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size == 0 or np.any(np.diff(t) <= 0):
            raise ValueError("time grid must be one-dimensional and strictly increasing")
        if self.coeffs.shape[0] != t.size:
            raise ValueError("coefficient rows must match the time grid")

    def to_csv(self, path) -> None:
        """One row per grid time: ``t, coeff_1..coeff_N`` in shortest round-trip notation."""
        n = self.coeffs.shape[-1]
        lines = [",".join(["t"] + [f"coeff_{k}" for k in range(1, n + 1)])]
        for t, row in zip(self.times, self.coeffs):
            lines.append(",".join(repr(float(v)) for v in (t, *row)))
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")

    def manifest(self) -> dict:
        return {"seed": self.seed, "times": [float(t) for t in self.times], "model": self.model.to_dict(), **self.meta}

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.manifest(), fh, indent=2, sort_keys=True)
            fh.write("\n")


# ---------------------------------------------------------------------------
# hypotheses and scales


def hypothesis_basic_check(model: SpectralModel) -> Decision:
    """``sum beta_n**alpha / gamma_n < inf``: the process lives in H."""
    a = model.alpha
    terms = model.beta**a / model.gamma
    exponent = None
    if model.gamma_tail is not None and model.beta_tail is not None:
        exponent = a * model.beta_tail.exponent - model.gamma_tail.exponent
    return power_series_decision(terms, exponent)


def _scales(alpha: float, gamma, beta, t):
    t = np.asarray(t, dtype=float)
    z = alpha * np.multiply.outer(t, gamma)
    return beta * (-np.expm1(-z) / (alpha * gamma)) ** (1.0 / alpha)


def mode_scales(model: SpectralModel, t):
    """``c_n(t)`` for all modes; shape ``t.shape + (N,)``."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be non-negative")
    return _scales(model.alpha, model.gamma, model.beta, t)


def mode_scale(model: SpectralModel, n: int, t: float) -> float:
    """``c_n(t)`` for the 1-based mode index ``n``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    return float(_scales(model.alpha, model.gamma[n - 1], model.beta[n - 1], t))


def ou_exact_step(model: SpectralModel, state, h: float, rng: np.random.Generator):
    """One exact-in-law transition of length ``h`` for every mode of ``state`` (shape ``(..., N)``)."""
    if h <= 0:
        raise ValueError("step must be positive")
    state = np.asarray(state, dtype=float)
    noise = model.law.sample(rng, state.shape)
    return np.exp(-model.gamma * h) * state + mode_scales(model, h) * noise


# ---------------------------------------------------------------------------
# path simulation


def _n_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _mode_noise(law: StableLaw, seed: int, n_modes: int, shape: tuple, key: tuple = (rngs.NOISE,)) -> np.ndarray:
    """Standard stable variates, one independent stream per mode; result shape ``shape + (n_modes,)``."""

    def draw(k):
        return law.sample(rngs.stream(seed, *key, k), shape)

    threads = _n_threads()
    if threads > 1 and n_modes > 1:
        with ThreadPoolExecutor(threads) as ex:
            cols = list(ex.map(draw, range(n_modes)))
    else:
        cols = [draw(k) for k in range(n_modes)]
    return np.stack(cols, axis=-1)


def _check_grid(times) -> np.ndarray:
    times = np.asarray(times, dtype=float).reshape(-1)
    if times.size == 0:
        raise ValueError("empty time grid")
    if times[0] != 0.0 or np.any(np.diff(times) <= 0):
        raise ValueError("time grid must start at 0 and be strictly increasing")
    return times


def stochastic_convolution(
    model: SpectralModel, times, seed: int, n_paths: int | None = None, key: tuple = (rngs.NOISE,)
) -> np.ndarray:
    """Exact samples of ``Z_A`` on the grid: shape ``(M+1, N)`` or ``(M+1, n_paths, N)``.

    The noise of mode n comes from stream ``(seed, *key, n)`` alone, so any
    subset of leading modes reproduces the same values (shared-noise Galerkin
    runs).  Monte Carlo batches pass distinct ``key`` paths.
    """
    times = _check_grid(times)
    steps = np.diff(times)
    shape = (steps.size,) if n_paths is None else (steps.size, n_paths)
    noise = _mode_noise(model.law, seed, model.N, shape, key)
    scale = mode_scales(model, steps)
    decay = np.exp(-np.multiply.outer(steps, model.gamma))
    out = np.zeros((times.size,) + shape[1:] + (model.N,))
    if n_paths is not None:
        scale = scale[:, None, :]
        decay = decay[:, None, :]
    for j in range(steps.size):
        out[j + 1] = decay[j] * out[j] + scale[j] * noise[j]
    return out


def simulate(model: SpectralModel, x0, times, seed: int, zero_noise: bool = False) -> TrajectoryRecord:
    """Exact-in-law path ``X_t = exp(tA) x0 + Z_A(t)`` on the grid.

    Computed as ``flow(x0, t) + Z_A(t)`` so that paths from different initial
    conditions under one seed differ by exactly the deterministic flow.
    ``zero_noise`` replaces every variate by 0 (the deterministic skeleton).
    """
    times = _check_grid(times)
    hyp = hypothesis_basic_check(model)
    if hyp.fails:
        raise ValueError(f"hypothesis on sum beta_n^alpha/gamma_n fails: {hyp.note}")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != model.N:
        raise ValueError("initial condition length must equal N")
    conv = np.zeros((times.size, model.N)) if zero_noise else stochastic_convolution(model, times, seed)
    coeffs = model.flow(x0, times) + conv
    return TrajectoryRecord(times, coeffs, seed, model, {"x0": x0.tolist()})


def sample_marginal(model: SpectralModel, x, t: float, size: int, seed: int, tag: int = rngs.MONTE_CARLO):
    """``size`` exact draws of ``X_t^x`` (shape ``(size, N)``) with per-mode streams."""
    noise = _mode_noise_tagged(model.law, seed, model.N, size, tag)
    return model.flow(np.asarray(x, dtype=float), t) + mode_scales(model, t) * noise


def _mode_noise_tagged(law: StableLaw, seed: int, n_modes: int, size: int, tag: int) -> np.ndarray:
    return np.stack([law.sample(rngs.mode_stream(seed, k, tag), size) for k in range(n_modes)], axis=-1)


# ---------------------------------------------------------------------------
# moment bound


_KHINTCHINE_P0 = optimize.brentq(lambda p: special.gamma((p + 1.0) / 2.0) - math.sqrt(math.pi) / 2.0, 1.5, 1.99)


def khintchine_constant(p: float) -> float:
    """Smallest ``c_p`` with ``|c|_2 <= c_p (E|sum r_n c_n|^p)^(1/p)`` for Rademacher ``r_n``.

    Haagerup's optimal lower Khintchine constant, inverted; ``c_1 = sqrt(2)``.
    """
    if p <= 0:
        raise ValueError("p must be positive")
    if p >= 2.0:
        return 1.0
    if p <= _KHINTCHINE_P0:
        lower = 2.0 ** (0.5 - 1.0 / p)
    else:
        lower = math.sqrt(2.0) * (special.gamma((p + 1.0) / 2.0) / math.sqrt(math.pi)) ** (1.0 / p)
    return 1.0 / lower


@dataclass(frozen=True)
class MomentProbe:
    empirical: float
    stderr: float
    bound: float
    constant: float

    @property
    def ratio(self) -> float:
        return self.empirical / self.bound if self.bound > 0 else 0.0

    @property
    def holds(self) -> bool:
        return self.empirical <= self.bound

    def to_dict(self) -> dict:
        return {"empirical": self.empirical, "stderr": self.stderr, "bound": self.bound, "constant": self.constant, "ratio": self.ratio, "pass": self.holds}


def moment_constant(alpha: float, p: float) -> float:
    """``c_p**p E|L|**p``, the constant in ``E|Z_A(t)|^p <= const (sum c_n(t)^alpha)^(p/alpha)``."""
    return khintchine_constant(p) ** p * absolute_moment(alpha, p)


def moment_bound_probe(model: SpectralModel, t: float, p: float, M: int, seed: int) -> MomentProbe:
    """Monte Carlo ``E|Z_A(t)|^p`` against its Khintchine-type upper bound."""
    a = model.alpha
    if not 0 < p < a:
        raise ValueError(f"need 0 < p < alpha, got p={p}, alpha={a}")
    c = mode_scales(model, t)
    const = moment_constant(a, p)
    bound = const * float(np.sum(c**a)) ** (p / a)
    if t == 0:
        return MomentProbe(0.0, 0.0, bound, const)
    y = c * _mode_noise_tagged(model.law, seed, model.N, M, rngs.MONTE_CARLO)
    vals = np.linalg.norm(y, axis=-1) ** p
    return MomentProbe(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(M)), bound, const)


# ---------------------------------------------------------------------------
# stochastic continuity


def stochastic_continuity_probe(model: SpectralModel, eps: float, h_grid, t_grid, M: int, seed: int) -> np.ndarray:
    """Table ``P(|Y_{t+h} - Y_t| > eps)`` with rows over ``h_grid`` and columns over ``t_grid``.

    ``Y = Z_A``.  Uses ``Y_{t+h} - Y_t = (exp(-gamma h) - 1) Y_t + c(h) L'`` with
    the same two noise arrays for every table cell.
    """
    h_grid = np.asarray(h_grid, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    first = _mode_noise_tagged(model.law, seed, model.N, M, rngs.MONTE_CARLO)
    second = _mode_noise_tagged(model.law, seed, model.N, M, rngs.AUX)
    table = np.zeros((h_grid.size, t_grid.size))
    for j, t in enumerate(t_grid):
        yt = mode_scales(model, t) * first
        for i, h in enumerate(h_grid):
            if h == 0:
                continue
            inc = np.expm1(-model.gamma * h) * yt + mode_scales(model, h) * second
            table[i, j] = np.mean(np.linalg.norm(inc, axis=-1) > eps)
    return table


# ---------------------------------------------------------------------------
# smoothing constant


@dataclass(frozen=True)
class SupValue:
    value: float
    argmax: int  # 1-based mode index
    decided_by: str


def smoothing_constant(model: SpectralModel, t: float, details: bool = False):
    """``C_t = sup_n exp(-gamma_n t) gamma_n**(1/alpha) / beta_n``.

    With tail rules, terms beyond N are generated from the rules up to the
    point where the continuous envelope is decreasing, which makes the sup
    exact; otherwise the prefix maximum is returned.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    a = model.alpha

    def terms(g, b):
        return np.exp(-g * t + np.log(g) / a - np.log(b))

    vals = terms(model.gamma, model.beta)
    k = int(np.argmax(vals))
    best, arg, by = float(vals[k]), k + 1, "prefix"
    if model.gamma_tail is not None and model.beta_tail is not None:
        by = "tail_rule"
        ge, gc = model.gamma_tail.exponent, model.gamma_tail.coef
        be = model.beta_tail.exponent
        # d/dn log term < 0 once gamma_n t > 1/alpha - be/ge
        level = max(1.0 / a - be / ge, 0.0)
        n_peak = (level / (gc * t)) ** (1.0 / ge) if level > 0 else 0.0
        stop = max(model.N + 1, int(math.ceil(n_peak)) + 1)
        if stop > 50_000_000:
            raise ValueError("tail envelope peaks too far out to scan")
        n = np.arange(model.N + 1, stop + 1, dtype=float)
        tv = terms(model.gamma_tail(n), model.beta_tail(n))
        j = int(np.argmax(tv))
        if tv[j] > best:
            best, arg = float(tv[j]), int(n[j])
    if details:
        return SupValue(best, arg, by)
    return best


# ---------------------------------------------------------------------------
# transition densities and gradients


def transition_density_ratio(model: SpectralModel, x, y, t: float, z, K: int | None = None):
    """Truncated density ``d mu_t^x / d mu_t^y`` at ``z`` (shape ``(..., K)``)."""
    if t <= 0:
        raise ValueError("t must be positive")
    K = model.N if K is None else int(K)
    spec = product.ProductMeasureSpec(model.law, mode_scales(model, t))
    decay = np.exp(-model.gamma * t)
    shifts = product.ShiftPair(decay * np.asarray(x, dtype=float), decay * np.asarray(y, dtype=float))
    return product.density_ratio(z, spec, shifts, K)


@dataclass(frozen=True)
class GradientEstimate:
    estimate: float
    stderr: float
    bound: float  # 8 c_alpha C_t ||f||_0 |h|
    l2_bound: float  # ||f||_0 (8 c_alpha sum_k (exp(-gamma_k t) h_k / c_k(t))^2)^(1/2)

    @property
    def within_bound(self) -> bool:
        return abs(self.estimate) <= self.bound + 3.0 * self.stderr

    @property
    def within_l2_bound(self) -> bool:
        return abs(self.estimate) <= self.l2_bound + 3.0 * self.stderr

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "stderr": self.stderr,
            "bound": self.bound,
            "l2_bound": self.l2_bound,
            "within_bound": self.within_bound,
            "within_l2_bound": self.within_l2_bound,
        }


def _gradient_terms(model, f, x, h, t, M, seed):
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    c = mode_scales(model, t)
    noise = _mode_noise_tagged(model.law, seed, model.N, M, rngs.MONTE_CARLO)
    mean = model.flow(x, t)
    weights = np.exp(-model.gamma * t) * h / c
    # y_k / c_k(t) is the standard variate itself
    score = model.law.score(noise) @ weights
    return mean, c * noise, score


def gradient_estimator(
    model: SpectralModel,
    f: Callable[[np.ndarray], np.ndarray],
    x,
    h,
    t: float,
    M: int,
    seed: int,
    f_sup: float = 1.0,
    baseline: bool = False,
) -> GradientEstimate:
    """Monte Carlo value of the directional derivative of ``R_t f(x) = E f(X_t^x)`` along ``h``.

    Uses the score representation

        <D R_t f(x), h> = -E[ f(exp(tA) x + Y) sum_k (p'/p)(Y_k/c_k(t)) exp(-gamma_k t) h_k / c_k(t) ]

    with ``Y`` distributed as ``Z_A(t)`` (sampled exactly, mode by mode).  With
    ``baseline=True`` the constant ``f(exp(tA) x)`` is subtracted first, which
    leaves the mean unchanged (the score has mean zero) and reduces variance.
    ``f`` maps an ``(M, N)`` array to ``(M,)``; ``f_sup`` is its declared sup norm.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    mean, y, score = _gradient_terms(model, f, x, h, t, M, seed)
    fx = np.asarray(f(mean + y), dtype=float)
    if baseline:
        fx = fx - float(np.asarray(f(mean[None, :]), dtype=float)[0])
    vals = -fx * score
    c8 = 8.0 * model.law.fisher_constant()
    hn = float(np.linalg.norm(h))
    bound = c8 * smoothing_constant(model, t) * f_sup * hn
    w = np.exp(-model.gamma * t) * np.asarray(h, dtype=float) / mode_scales(model, t)
    l2 = f_sup * math.sqrt(c8 * float(np.sum(w**2)))
    return GradientEstimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(M)), bound, l2)


@dataclass(frozen=True)
class GradientComparison:
    estimator: float
    finite_difference: float
    joint_stderr: float
    fd_stderr: float

    @property
    def difference(self) -> float:
        return self.estimator - self.finite_difference


def finite_difference_gradient(
    model: SpectralModel,
    f: Callable[[np.ndarray], np.ndarray],
    x,
    h,
    t: float,
    M: int,
    seed: int,
    eps: float = 1e-3,
    baseline: bool = False,
) -> GradientComparison:
    """Central difference ``(R_t f(x + eps h) - R_t f(x - eps h)) / 2 eps`` with common random numbers.

    The same variates drive the score estimator, so the reported joint
    standard error is that of the per-sample difference of the two.
    """
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    mean, y, score = _gradient_terms(model, f, x, h, t, M, seed)
    shift = model.flow(eps * h, t)
    fd = (np.asarray(f(mean + shift + y)) - np.asarray(f(mean - shift + y))) / (2.0 * eps)
    fx = np.asarray(f(mean + y), dtype=float)
    if baseline:
        fx = fx - float(np.asarray(f(mean[None, :]), dtype=float)[0])
    est = -fx * score
    diff = est - fd
    return GradientComparison(
        float(est.mean()),
        float(fd.mean()),
        float(diff.std(ddof=1) / math.sqrt(M)),
        float(fd.std(ddof=1) / math.sqrt(M)),
    )


# ---------------------------------------------------------------------------
# support


@dataclass(frozen=True)
class CoverageProbe:
    hits: np.ndarray
    M: int

    @property
    def frequency(self) -> np.ndarray:
        return self.hits / self.M

    def to_dict(self) -> dict:
        return {"hits": self.hits.tolist(), "M": self.M, "frequency": self.frequency.tolist()}


def support_coverage_probe(model: SpectralModel, x, t: float, centers, radius: float, M: int, seed: int) -> CoverageProbe:
    """Count draws of ``X_t^x`` falling in each open ball ``B(center, radius)``."""
    if t <= 0:
        raise ValueError("t must be positive")
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    samples = sample_marginal(model, x, t, M, seed)
    hits = np.array([int(np.count_nonzero(np.linalg.norm(samples - c, axis=-1) < radius)) for c in centers])
    return CoverageProbe(hits, M)
