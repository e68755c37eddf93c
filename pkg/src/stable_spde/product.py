"""Shifted infinite products of one-dimensional stable laws.

The random sequence ``xi = (q_1 L_1, q_2 L_2, ...)`` with independent standard
stable ``L_k`` lies in l^2 exactly when ``sum q_k**alpha < inf``.  Two shifts
``xi + u`` and ``xi + v`` have equivalent laws when
``sum (u_k - v_k)**2 / q_k**2 < inf``; the Hellinger integral of the pair is
the product of the one-dimensional overlaps ``1 - g((v_k - u_k)/q_k)`` and the
Radon-Nikodym derivative is the limit of the finite products of density
ratios.  Everything here works on truncated data with optional power-law
tails (see :mod:`stable_spde.tails`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng as rngs
from .stable import StableLaw
from .tails import ZERO, Decision, PowerLaw, power_series_decision

__all__ = [
    "ProductMeasureSpec",
    "ShiftPair",
    "membership_check",
    "equivalence_check",
    "zinn_check",
    "hellinger_factors",
    "hellinger_integral",
    "log_hellinger_integral",
    "density_ratio",
    "sample",
]


@dataclass(frozen=True, eq=False)
class ProductMeasureSpec:
    """Scales ``q_1..q_N`` of the product law, with an optional decay rule beyond N."""

    law: StableLaw
    q: np.ndarray
    tail: PowerLaw | None = None

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(-1)
        if q.size == 0 or np.any(~(q > 0)) or not np.all(np.isfinite(q)):
            raise ValueError("scales q_n must be finite and strictly positive")
        if self.tail is not None and (self.tail.coef <= 0):
            raise ValueError("a tail rule for q must have a positive constant")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @property
    def N(self) -> int:
        return self.q.size

    @classmethod
    def power(cls, law: StableLaw, coef: float, exponent: float, N: int) -> "ProductMeasureSpec":
        """``q_n = coef * n**exponent`` for every n, with the same rule as tail."""
        n = np.arange(1, N + 1, dtype=float)
        return cls(law, coef * n**exponent, PowerLaw(coef, exponent))


@dataclass(frozen=True, eq=False)
class ShiftPair:
    """Shift vectors ``u`` and ``v`` with an optional rule for ``|u_k - v_k|`` beyond N."""

    u: np.ndarray
    v: np.ndarray
    tail: PowerLaw | None = None

    def __post_init__(self):
        u = np.array(self.u, dtype=float).reshape(-1)
        v = np.array(self.v, dtype=float).reshape(-1)
        if u.shape != v.shape:
            raise ValueError("u and v must have the same length")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise ValueError("shift vectors must be finite")
        u.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @classmethod
    def finite(cls, u, v) -> "ShiftPair":
        """Shifts supported on the given coordinates only (zero beyond them)."""
        return cls(u, v, ZERO)

    def swapped(self) -> "ShiftPair":
        return ShiftPair(self.v, self.u, self.tail)


def _check_len(spec: ProductMeasureSpec, shifts: ShiftPair, K: int | None = None) -> int:
    if shifts.u.size != spec.N:
        raise ValueError(f"shift length {shifts.u.size} does not match N={spec.N}")
    K = spec.N if K is None else int(K)
    if not 0 <= K <= spec.N:
        raise ValueError(f"K must lie in [0, {spec.N}], got {K}")
    return K


def membership_check(spec: ProductMeasureSpec) -> Decision:
    """Does ``(q_n L_n)`` lie in l^2 almost surely?  Criterion: ``sum q_n**alpha < inf``."""
    alpha = spec.law.alpha
    exponent = None if spec.tail is None else alpha * spec.tail.exponent
    return power_series_decision(spec.q**alpha, exponent)


def _ratio_decision(spec: ProductMeasureSpec, diff: np.ndarray, diff_tail: PowerLaw | None) -> Decision:
    terms = diff**2 / spec.q**2
    if diff_tail is not None and diff_tail.vanishes:
        return power_series_decision(terms, None, vanishing=True)
    if diff_tail is None or spec.tail is None:
        return power_series_decision(terms, None)
    return power_series_decision(terms, 2.0 * (diff_tail.exponent - spec.tail.exponent))


def equivalence_check(spec: ProductMeasureSpec, shifts: ShiftPair) -> Decision:
    """Equivalence of the laws of ``xi + u`` and ``xi + v``: ``sum (u_k - v_k)**2/q_k**2 < inf``."""
    _check_len(spec, shifts)
    return _ratio_decision(spec, shifts.u - shifts.v, shifts.tail)


def zinn_check(spec: ProductMeasureSpec, u, tail: PowerLaw | None = None) -> Decision:
    """Absolute continuity of ``law(xi + u)`` w.r.t. ``law(xi)``: ``sum u_k**2/q_k**2 < inf``."""
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.size != spec.N:
        raise ValueError(f"shift length {u.size} does not match N={spec.N}")
    return _ratio_decision(spec, u, tail)


def hellinger_factors(spec: ProductMeasureSpec, shifts: ShiftPair, K: int | None = None) -> np.ndarray:
    """Per-mode overlaps ``a_k = 1 - g((v_k - u_k)/q_k)``, k = 1..K."""
    K = _check_len(spec, shifts, K)
    delta = (shifts.v[:K] - shifts.u[:K]) / spec.q[:K]
    gap = {}
    out = np.empty(K)
    for k, d in enumerate(np.abs(delta)):
        if d not in gap:
            gap[d] = spec.law.hellinger_gap(d)
        out[k] = 1.0 - gap[d]
    return out


def log_hellinger_integral(spec: ProductMeasureSpec, shifts: ShiftPair, K: int | None = None) -> float:
    """``sum_k log a_k``; accumulated in log space so long products never underflow."""
    a = hellinger_factors(spec, shifts, K)
    with np.errstate(divide="ignore"):
        return float(np.sum(np.log(a)))


def hellinger_integral(spec: ProductMeasureSpec, shifts: ShiftPair, K: int | None = None) -> float:
    """Truncated Hellinger integral ``prod_{k<=K} a_k`` in [0, 1]."""
    return float(np.exp(log_hellinger_integral(spec, shifts, K)))


def density_ratio(z, spec: ProductMeasureSpec, shifts: ShiftPair, K: int | None = None):
    """``prod_{k<=K} p((z_k - u_k)/q_k) / p((z_k - v_k)/q_k)``.

    ``z`` has shape ``(..., K)``; the ratio is returned with shape ``(...)``.
    """
    K = _check_len(spec, shifts, K)
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != K:
        raise ValueError(f"sample points must have last dimension K={K}")
    q = spec.q[:K]
    law = spec.law
    logr = law.logpdf((z - shifts.u[:K]) / q) - law.logpdf((z - shifts.v[:K]) / q)
    return np.exp(np.sum(logr, axis=-1))


def sample(spec: ProductMeasureSpec, center, size: int, seed: int, K: int | None = None) -> np.ndarray:
    """Draw ``size`` points of ``center + (q_k L_k)_{k<=K}``; mode k uses its own stream."""
    K = spec.N if K is None else int(K)
    center = np.asarray(center, dtype=float).reshape(-1)[:K]
    out = np.empty((size, K))
    for k in range(K):
        out[:, k] = center[k] + spec.q[k] * spec.law.sample(rngs.mode_stream(seed, k, rngs.MONTE_CARLO), size)
    return out
