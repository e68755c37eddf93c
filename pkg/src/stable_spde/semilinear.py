"""Semilinear equation ``dX = (AX + F(X)) dt + dZ`` by noise/drift splitting.

The mild solution is written as ``X = Y + Z_A`` where ``Z_A`` is the exact
stochastic convolution and ``Y`` solves, path by path,

    y(t) = exp(tA) x + int_0^t exp((t - s)A) F(y(s) + f(s)) ds,   f = Z_A.

The integral equation is solved on the time grid by a global Picard
iteration, contracting in the weighted norm ``sup_t exp(-lam t)|h(t)|``.  The
semigroup is diagonal and applied exactly; the drift is interpolated in time
(piecewise linear by default, piecewise constant with ``scheme="euler"``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from . import ou
from . import rng as rngs
from .ou import SpectralModel, TrajectoryRecord

__all__ = [
    "DriftSpec",
    "SemilinearProblem",
    "SolverError",
    "MildSolution",
    "zero_drift",
    "constant_drift",
    "coordinatewise_drift",
    "nemytskii_drift",
    "deterministic_mild_solve",
    "stability_probe",
    "semilinear_simulate",
    "galerkin_simulate",
    "galerkin_convergence_check",
    "strong_feller_probe",
    "irreducibility_probe",
    "hypothesis_basic3_check",
]

# paths per Monte Carlo batch; fixed so that batching never changes results
BATCH = 4096


class SolverError(RuntimeError):
    """Picard iteration did not reach the requested tolerance."""

    def __init__(self, message: str, last_increment: float):
        super().__init__(message)
        self.last_increment = last_increment


# ---------------------------------------------------------------------------
# drifts


@dataclass(frozen=True, eq=False)
class DriftSpec:
    """Drift ``F`` acting on coefficient arrays of shape ``(..., N)``.

    ``sup_bound`` and ``lip_const`` are declared, not proved; :meth:`spot_check`
    samples pairs to catch wrong declarations.
    """

    func: Callable[[np.ndarray], np.ndarray]
    sup_bound: float
    lip_const: float
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.sup_bound < 0 or self.lip_const < 0:
            raise ValueError("declared drift constants must be non-negative")

    def __call__(self, z):
        return self.func(z)

    def spot_check(self, N: int, n_pairs: int = 64, scale: float = 3.0, seed: int = 0) -> None:
        """Raise ``ValueError`` if a sampled point or pair violates the declared constants."""
        g = rngs.stream(seed, rngs.AUX, 0)
        x = scale * g.standard_cauchy((n_pairs, N))
        y = x + g.standard_normal((n_pairs, N)) * scale * 10.0 ** g.uniform(-3, 0, (n_pairs, 1))
        fx, fy = np.asarray(self.func(x)), np.asarray(self.func(y))
        if fx.shape != x.shape:
            raise ValueError(f"drift must map (..., {N}) arrays to the same shape")
        slack = 1e-12
        if np.any(np.linalg.norm(fx, axis=-1) > self.sup_bound * (1 + slack) + slack):
            raise ValueError(f"drift {self.name}: |F(x)| exceeds declared sup bound {self.sup_bound}")
        lhs = np.linalg.norm(fx - fy, axis=-1)
        rhs = self.lip_const * np.linalg.norm(x - y, axis=-1)
        if np.any(lhs > rhs * (1 + 1e-9) + slack):
            raise ValueError(f"drift {self.name}: Lipschitz constant {self.lip_const} violated")

    def projected(self, n: int, N: int) -> "DriftSpec":
        """``F_n = pi_n F pi_n`` on the first ``n`` of ``N`` coordinates."""
        if not 1 <= n <= N:
            raise ValueError("projection size must lie in [1, N]")
        if n == N:
            return self
        func = self.func

        def proj(z):
            z = np.asarray(z, dtype=float)
            pad = np.zeros(z.shape[:-1] + (N,))
            pad[..., :n] = z
            return func(pad)[..., :n]

        return DriftSpec(proj, self.sup_bound, self.lip_const, f"{self.name}|{n}", self.params)


def zero_drift() -> DriftSpec:
    return DriftSpec(lambda z: np.zeros_like(np.asarray(z, dtype=float)), 0.0, 0.0, "zero")


def constant_drift(c) -> DriftSpec:
    c = np.array(c, dtype=float).reshape(-1)
    c.setflags(write=False)
    return DriftSpec(
        lambda z: np.broadcast_to(c, np.shape(z)).copy(), float(np.linalg.norm(c)), 0.0, "constant", {"c": c.tolist()}
    )


_SHAPES = {
    # name: (function, sup |phi|, Lip phi)
    "tanh": (np.tanh, 1.0, 1.0),
    "sigmoid": (lambda u: 0.5 * (1.0 + np.tanh(0.5 * u)), 1.0, 0.25),
    "sin": (np.sin, 1.0, 1.0),
}


def coordinatewise_drift(kind: str, weights, amplitude: float = 1.0) -> DriftSpec:
    """``F(z)_k = amplitude * w_k * phi(z_k)`` with ``phi`` in {tanh, sigmoid, sin}."""
    if kind not in _SHAPES:
        raise ValueError(f"unknown drift shape {kind!r}; choose from {sorted(_SHAPES)}")
    phi, sup, lip = _SHAPES[kind]
    w = amplitude * np.array(weights, dtype=float).reshape(-1)
    w.setflags(write=False)
    return DriftSpec(
        lambda z: w * phi(np.asarray(z, dtype=float)),
        sup * float(np.linalg.norm(w)),
        lip * float(np.max(np.abs(w))),
        kind,
        {"weights": w.tolist(), "amplitude": amplitude},
    )


def nemytskii_drift(kind: str, N: int, amplitude: float = 1.0, grid: int | None = None) -> DriftSpec:
    """Truncated superposition operator ``u -> amplitude * phi(u)`` for the d=1 sine basis.

    The field ``u = sum z_k sqrt(2/pi) sin(k xi)`` is evaluated on a midpoint
    grid of ``G >= N + 1`` points where the discrete sine transform is exactly
    orthogonal, ``phi`` is applied pointwise and the result is projected back.
    By discrete Bessel and Parseval, ``|F| <= amplitude sup|phi| sqrt(pi)`` and
    ``Lip F <= amplitude Lip(phi)``.
    """
    if kind not in _SHAPES:
        raise ValueError(f"unknown drift shape {kind!r}; choose from {sorted(_SHAPES)}")
    phi, sup, lip = _SHAPES[kind]
    G = max(N + 1, 2 * N) if grid is None else int(grid)
    if G < N + 1:
        raise ValueError("grid must have at least N + 1 points")
    xi = (np.arange(G) + 0.5) * math.pi / G
    basis = math.sqrt(2.0 / math.pi) * np.sin(np.outer(np.arange(1, N + 1), xi))  # (N, G)
    w = math.pi / G

    def func(z):
        u = np.asarray(z, dtype=float) @ basis
        return amplitude * (phi(u) @ basis.T) * w

    return DriftSpec(
        func,
        amplitude * sup * math.sqrt(math.pi),
        amplitude * lip,
        f"nemytskii-{kind}",
        {"amplitude": amplitude, "grid": G},
    )


# ---------------------------------------------------------------------------
# problem


@dataclass(frozen=True, eq=False)
class SemilinearProblem:
    """Linear part, drift and optional smoothing data ``(gamma, c_hat, T0)`` with ``C_t <= c_hat / t**gamma``."""

    model: SpectralModel
    drift: DriftSpec
    smoothing: tuple[float, float, float] | None = None

    def __post_init__(self):
        if self.smoothing is not None:
            g, c, T0 = self.smoothing
            if not 0 < g < 1:
                raise ValueError("smoothing exponent must lie in (0, 1)")
            if c <= 0 or T0 <= 0:
                raise ValueError("smoothing constants must be positive")

    def galerkin(self, n: int) -> "SemilinearProblem":
        return SemilinearProblem(self.model.truncate(n), self.drift.projected(n, self.model.N), self.smoothing)


# ---------------------------------------------------------------------------
# deterministic solver


def _phi1(z):
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-4
    zs = np.where(small, 1.0, z)
    return np.where(small, 1.0 - z / 2.0 + z * z / 6.0 - z**3 / 24.0, -np.expm1(-zs) / zs)


def _psi(z):
    """``int_0^1 v exp(-z v) dv``."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-3
    zs = np.where(small, 1.0, z)
    big = (1.0 - np.exp(-zs) * (1.0 + zs)) / (zs * zs)
    series = 0.5 - z / 3.0 + z * z / 8.0 - z**3 / 30.0 + z**4 / 144.0
    return np.where(small, series, big)


def _weights(gamma, steps, scheme: str):
    """Per-step propagator and drift weights, each of shape ``(M, N)``."""
    z = np.multiply.outer(steps, gamma)
    decay = np.exp(-z)
    h = steps[:, None]
    if scheme == "euler":
        return decay, h * _phi1(z), np.zeros_like(z)
    if scheme == "trapezoid":
        psi = _psi(z)
        return decay, h * psi, h * (_phi1(z) - psi)
    raise ValueError(f"unknown scheme {scheme!r}")


def _contraction_factor(lip, gamma_min, steps, lam, scheme):
    decay, left, right = _weights(np.array([gamma_min]), steps, scheme)
    damp = np.exp(-lam * steps)
    s, worst = 0.0, 0.0
    for j in range(steps.size):
        s = decay[j, 0] * damp[j] * s + left[j, 0] * damp[j] + right[j, 0]
        worst = max(worst, s)
    return lip * worst


@dataclass(frozen=True, eq=False)
class MildSolution:
    """Grid solution of the deterministic mild equation plus iteration diagnostics."""

    y: np.ndarray
    increments: tuple
    lam: float
    contraction: float

    @property
    def iterations(self) -> int:
        return len(self.increments)


def deterministic_mild_solve(
    model: SpectralModel,
    drift: DriftSpec,
    x0,
    times,
    forcing=None,
    fp_tol: float = 1e-12,
    max_iter: int = 200,
    scheme: str = "trapezoid",
    lam: float | None = None,
) -> MildSolution:
    """Solve ``y = exp(tA)x0 + int exp((t-s)A) F(y + f) ds`` on ``times``.

    ``x0`` has shape ``(..., N)`` and ``forcing`` (default 0) shape
    ``(M+1, ..., N)``; leading dimensions are independent paths.  The weight
    ``lam`` defaults to ``2 Lip(F) + 1`` and is doubled until the discrete
    iteration map contracts with factor at most 1/2.  Iteration stops when the
    weighted sup of the increment (max over paths) drops below ``fp_tol``.
    """
    times = ou._check_grid(times)
    steps = np.diff(times)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape[-1] != model.N:
        raise ValueError("initial condition length must equal N")
    base = model.flow(x0, times)
    f = np.zeros_like(base) if forcing is None else np.broadcast_to(np.asarray(forcing, dtype=float), base.shape)
    lip = drift.lip_const
    lam = 2.0 * lip + 1.0 if lam is None else float(lam)
    kappa = _contraction_factor(lip, model.gamma[0], steps, lam, scheme) if steps.size else 0.0
    while kappa > 0.5:
        lam *= 2.0
        kappa = _contraction_factor(lip, model.gamma[0], steps, lam, scheme)
        if lam > 1e8:
            raise SolverError("cannot make the discrete map contractive; refine the grid", math.inf)
    decay, left, right = _weights(model.gamma, steps, scheme)
    extra = (1,) * (x0.ndim - 1)
    decay = decay.reshape(decay.shape[:1] + extra + decay.shape[1:])
    left = left.reshape(decay.shape)
    right = right.reshape(decay.shape)
    damp = np.exp(-lam * times).reshape((-1,) + (1,) * x0.ndim)

    y = base.copy()
    incs = []
    for _ in range(max_iter):
        drift_vals = np.asarray(drift(y + f), dtype=float)
        integral = np.zeros_like(base)
        for j in range(steps.size):
            integral[j + 1] = decay[j] * integral[j] + left[j] * drift_vals[j] + right[j] * drift_vals[j + 1]
        new = base + integral
        inc = float(np.max(np.linalg.norm(new - y, axis=-1) * damp[..., 0])) if new.size else 0.0
        y = new
        incs.append(inc)
        if inc < fp_tol:
            return MildSolution(y, tuple(incs), lam, kappa)
    raise SolverError(f"Picard iteration stalled after {max_iter} sweeps (last increment {incs[-1]:.3e})", incs[-1])


@dataclass(frozen=True)
class StabilityProbe:
    distance: float
    forcing_gap: float
    constant: float
    p: float

    @property
    def bound(self) -> float:
        return self.constant * self.forcing_gap

    @property
    def holds(self) -> bool:
        return self.distance <= self.bound

    def to_dict(self) -> dict:
        return {"distance": self.distance, "forcing_gap": self.forcing_gap, "constant": self.constant, "p": self.p, "bound": self.bound, "pass": self.holds}


def _riemann(times, values):
    return float(integrate.trapezoid(values, times))


def stability_probe(problem: SemilinearProblem, x0, times, f, g, p: float, **solver) -> StabilityProbe:
    """``sup_t |y - z|`` for forcings ``f`` and ``g`` against the Gronwall bound.

    With ``L = Lip F``, ``T`` the horizon and ``D = int |f - g|^p``:
    p >= 1 gives ``C = L exp(LT) T^(1 - 1/p)`` against ``D^(1/p)``;
    p in (0, 1) gives ``C = exp(LT) (2 |F|_0)^(1-p) L^p`` against ``D``.
    """
    if p <= 0:
        raise ValueError("p must be positive")
    times = ou._check_grid(times)
    model, drift = problem.model, problem.drift
    y = deterministic_mild_solve(model, drift, x0, times, f, **solver).y
    z = deterministic_mild_solve(model, drift, x0, times, g, **solver).y
    dist = float(np.max(np.linalg.norm(y - z, axis=-1)))
    gap = np.linalg.norm(np.asarray(f, dtype=float) - np.asarray(g, dtype=float), axis=-1) ** p
    D = _riemann(times, gap)
    L, T = drift.lip_const, times[-1]
    if p >= 1:
        return StabilityProbe(dist, D ** (1.0 / p), L * math.exp(L * T) * T ** (1.0 - 1.0 / p), p)
    return StabilityProbe(dist, D, math.exp(L * T) * (2.0 * drift.sup_bound) ** (1.0 - p) * L**p, p)


# ---------------------------------------------------------------------------
# stochastic runs


def _checked(problem: SemilinearProblem) -> None:
    hyp = ou.hypothesis_basic_check(problem.model)
    if hyp.fails:
        raise ValueError(f"hypothesis on sum beta_n^alpha/gamma_n fails: {hyp.note}")
    problem.drift.spot_check(problem.model.N)


def semilinear_simulate(problem: SemilinearProblem, x0, times, seed: int, **solver) -> TrajectoryRecord:
    """One path of the mild solution: exact ``Z_A`` then the pathwise solve with forcing ``Z_A``."""
    _checked(problem)
    times = ou._check_grid(times)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    zero = ou.simulate(problem.model, np.zeros(problem.model.N), times, seed).coeffs
    sol = deterministic_mild_solve(problem.model, problem.drift, x0, times, zero, **solver)
    meta = {"x0": x0.tolist(), "drift": problem.drift.name, "picard_iterations": sol.iterations}
    return TrajectoryRecord(times, sol.y + zero, seed, problem.model, meta)


def galerkin_simulate(problem: SemilinearProblem, n: int, x0, times, seed: int, **solver) -> TrajectoryRecord:
    """Same pipeline on the first ``n`` modes with ``F_n``; modes share noise streams with the full run."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    return semilinear_simulate(problem.galerkin(n), x0[:n], times, seed, **solver)


def galerkin_convergence_check(problem: SemilinearProblem, x0, times, ns, seed: int, **solver) -> dict:
    """``e_n = sup_grid |Y^n - X|`` (``Y^n`` padded with zeros) for each ``n``, plus a monotonicity verdict."""
    ref = semilinear_simulate(problem, x0, times, seed, **solver).coeffs
    N = problem.model.N
    errors = {}
    for n in ns:
        if n == N:
            errors[n] = float(np.max(np.linalg.norm(ref - semilinear_simulate(problem, x0, times, seed, **solver).coeffs, axis=-1)))
            continue
        yn = galerkin_simulate(problem, n, x0, times, seed, **solver).coeffs
        diff = ref.copy()
        diff[:, :n] -= yn
        errors[n] = float(np.max(np.linalg.norm(diff, axis=-1)))
    values = [errors[n] for n in ns]
    monotone = all(b <= a * 1.1 for a, b in zip(values, values[1:]))
    return {"errors": errors, "non_increasing": monotone}


def _terminal(problem: SemilinearProblem, x0, t: float, dt: float, seed: int, M: int, **solver):
    """Yield ``X_t`` for batches of ``M`` paths; batch b uses streams ``(seed, MONTE_CARLO, b, mode)``."""
    steps = max(1, int(math.ceil(t / dt - 1e-9)))
    times = np.linspace(0.0, t, steps + 1)
    for b, start in enumerate(range(0, M, BATCH)):
        size = min(BATCH, M - start)
        conv = ou.stochastic_convolution(problem.model, times, seed, size, key=(rngs.MONTE_CARLO, b))
        yield conv, times, [
            deterministic_mild_solve(problem.model, problem.drift, np.broadcast_to(x, (size, problem.model.N)), times, conv, **solver).y[-1]
            + conv[-1]
            for x in x0
        ]


@dataclass(frozen=True)
class FellerProbe:
    difference: float
    stderr: float
    ratio: float  # difference * min(t**gamma, 1) / |x - y|
    bound: float | None

    @property
    def holds(self) -> bool | None:
        return None if self.bound is None else self.difference <= self.bound + 3.0 * self.stderr

    def to_dict(self) -> dict:
        return {"difference": self.difference, "stderr": self.stderr, "ratio": self.ratio, "bound": self.bound, "pass": self.holds}


def strong_feller_probe(
    problem: SemilinearProblem,
    f: Callable[[np.ndarray], np.ndarray],
    x,
    y,
    t: float,
    M: int,
    seed: int,
    dt: float = 0.025,
    f_sup: float = 1.0,
    c_tilde: float | None = None,
    **solver,
) -> FellerProbe:
    """Common-random-number estimate of ``|P_t f(x) - P_t f(y)|``.

    ``ratio`` rescales it by ``min(t^gamma, 1)/|x - y|``; if ``c_tilde`` is
    given the bound ``c_tilde |f|_0 |x - y| / min(t^gamma, 1)`` is reported.
    """
    if problem.smoothing is None:
        raise ValueError("strong Feller probe needs smoothing parameters")
    if t <= 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dist = float(np.linalg.norm(x - y))
    scale = min(t ** problem.smoothing[0], 1.0)
    if dist == 0.0:
        return FellerProbe(0.0, 0.0, 0.0, None if c_tilde is None else 0.0)
    diffs = []
    for _, _, (xt, yt) in _terminal(problem, (x, y), t, dt, seed, M, **solver):
        diffs.append(np.asarray(f(xt), dtype=float) - np.asarray(f(yt), dtype=float))
    d = np.concatenate(diffs)
    est = float(abs(d.mean()))
    se = float(d.std(ddof=1) / math.sqrt(M)) if M > 1 else math.inf
    bound = None if c_tilde is None else c_tilde * f_sup * dist / scale
    return FellerProbe(est, se, est * scale / dist, bound)


def irreducibility_probe(problem: SemilinearProblem, x, T: float, targets, radius: float, M: int, seed: int, dt: float = 0.025, **solver) -> ou.CoverageProbe:
    """Count paths with ``|X_T - a| < radius`` for each target ``a``."""
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    hits = np.zeros(targets.shape[0], dtype=int)
    for _, _, (xt,) in _terminal(problem, (np.asarray(x, dtype=float),), T, dt, seed, M, **solver):
        for i, a in enumerate(targets):
            hits[i] += int(np.count_nonzero(np.linalg.norm(xt - a, axis=-1) < radius))
    return ou.CoverageProbe(hits, M)


@dataclass(frozen=True)
class SmoothingFit:
    gamma_hat: float
    c_hat: float
    values: np.ndarray
    dominated: bool | None
    decided_by: str

    def to_dict(self) -> dict:
        return {
            "gamma_hat": self.gamma_hat,
            "c_hat": self.c_hat,
            "C_t": self.values.tolist(),
            "declared_dominates": self.dominated,
            "decided_by": self.decided_by,
        }


def hypothesis_basic3_check(problem: SemilinearProblem, t_grid) -> SmoothingFit:
    """Fit ``log C_t = log c - gamma log t`` over ``t_grid`` and compare with the declared pair."""
    t = np.asarray(t_grid, dtype=float)
    if t.size < 2 or np.any(t <= 0):
        raise ValueError("need at least two positive times")
    if problem.smoothing is not None and np.any(t >= problem.smoothing[2]):
        raise ValueError("t grid must lie inside (0, T0)")
    sups = [ou.smoothing_constant(problem.model, float(s), details=True) for s in t]
    vals = np.array([s.value for s in sups])
    slope, intercept = np.polyfit(np.log(t), np.log(vals), 1)
    dominated = None
    if problem.smoothing is not None:
        g, c, _ = problem.smoothing
        dominated = bool(np.all(vals <= c / t**g * (1 + 1e-12)))
    by = "tail_rule" if all(s.decided_by == "tail_rule" for s in sups) else "prefix"
    return SmoothingFit(float(-slope), float(math.exp(intercept)), vals, dominated, by)
