"""Stochastic heat equation on ``[0, pi]^d`` with Dirichlet boundary conditions.

Eigenfunctions of the Laplacian are ``e_j = (2/pi)^(d/2) prod_i sin(n_i xi_i)``
with ``-Laplacian e_j = |j|^2 e_j`` for multi-indices ``j = (n_1..n_d)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .ou import SpectralModel, TrajectoryRecord
from .stable import StableLaw
from .tails import PowerLaw

__all__ = [
    "HeatModelConfig",
    "build_heat_model",
    "noise_space_exponent",
    "eigenfunctions",
    "field_evaluate",
    "write_field_csv",
]


@dataclass(frozen=True)
class HeatModelConfig:
    """``beta_rule`` is ``None`` for ``beta_j = 1`` or a float ``delta`` for ``beta_j = gamma_j**delta``."""

    d: int
    mode_cutoff: int
    beta_rule: float | None = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be at least 1")
        if self.mode_cutoff < 1:
            raise ValueError("mode cutoff must be at least 1")

    def to_dict(self) -> dict:
        return {"d": self.d, "mode_cutoff": self.mode_cutoff, "beta_rule": self.beta_rule}


def _multi_indices(d: int, cutoff: int) -> np.ndarray:
    idx = np.array(list(itertools.product(range(1, cutoff + 1), repeat=d)), dtype=int)
    gamma = np.sum(idx**2, axis=1)
    # lexsort: last key is primary
    order = np.lexsort(tuple(idx[:, i] for i in reversed(range(d))) + (gamma,))
    return idx[order]


def _weyl_coef(d: int) -> float:
    # #{j : |j|^2 <= L} ~ omega_d L^(d/2) / 2^d, omega_d the unit-ball volume
    omega = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    return (2.0**d / omega) ** (2.0 / d)


def build_heat_model(config: HeatModelConfig, law: StableLaw) -> SpectralModel:
    """Modes sorted by eigenvalue, ties broken lexicographically on the multi-index."""
    idx = _multi_indices(config.d, config.mode_cutoff)
    gamma = np.sum(idx**2, axis=1).astype(float)
    gtail = PowerLaw(_weyl_coef(config.d), 2.0 / config.d)
    if config.beta_rule is None:
        beta, btail = np.ones_like(gamma), PowerLaw(1.0, 0.0)
    else:
        delta = float(config.beta_rule)
        beta = gamma**delta
        btail = PowerLaw(gtail.coef**delta, gtail.exponent * delta)
    return SpectralModel(law, gamma, beta, gtail, btail, idx)


def noise_space_exponent(config: HeatModelConfig, alpha: float, cutoffs=(10, 20, 40), offset: float = 0.1) -> dict:
    """Critical Sobolev exponent ``d/alpha`` with a truncated-sum diagnostic.

    The diagnostic reports ``S(p) = sum_j gamma_j^(-alpha p / 2)`` over the
    cube ``n_i <= cutoff`` for ``p = d/alpha -+ offset`` and each cutoff.  Below
    the critical value the sums keep growing with the cutoff; above it they
    settle, which shows as the ratio of successive increments dropping below 1.
    """
    if config.beta_rule is not None:
        raise ValueError("the critical exponent is only available for beta_j = 1")
    if not 0 < alpha <= 2:
        raise ValueError("alpha must lie in (0, 2]")
    d = config.d
    crit = d / alpha
    sums = {}
    for label, p in (("below", crit - offset), ("above", crit + offset)):
        row = []
        for c in cutoffs:
            g = np.sum(_multi_indices(d, c) ** 2, axis=1).astype(float)
            row.append(float(np.sum(g ** (-alpha * p / 2.0))))
        sums[label] = {"p": p, "cutoffs": list(cutoffs), "sums": row}
    # growth over the last doubling relative to the one before
    def growth(row):
        a, b, c = row[-3:]
        return (c - b) / (b - a) if b > a else 0.0

    below = growth(sums["below"]["sums"])
    above = growth(sums["above"]["sums"])
    return {
        "critical_p": crit,
        "below": {**sums["below"], "growth_ratio": below},
        "above": {**sums["above"], "growth_ratio": above},
        # increments over successive doublings shrink geometrically only for a convergent sum
        "consistent": bool(below >= 1.0 > above),
    }


def eigenfunctions(indices: np.ndarray, points) -> np.ndarray:
    """``e_j(xi)`` for rows of ``indices`` (shape ``(N, d)``) at ``points`` (shape ``(P, d)``); result ``(P, N)``.

    Points with any coordinate equal to 0 or pi evaluate to exactly 0.
    """
    indices = np.atleast_2d(indices)
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    d = indices.shape[1]
    if pts.shape[1] != d:
        raise ValueError(f"points must have {d} coordinates")
    vals = np.full((pts.shape[0], indices.shape[0]), (2.0 / math.pi) ** (d / 2.0))
    for i in range(d):
        vals *= np.sin(np.outer(pts[:, i], indices[:, i]))
    edge = np.any((pts == 0.0) | (pts == math.pi), axis=1)
    vals[edge] = 0.0
    return vals


def field_evaluate(record: TrajectoryRecord, config: HeatModelConfig, t_index: int, points) -> np.ndarray:
    """``X(t, xi) = sum_j coeff_j(t) e_j(xi)`` at ``points``."""
    idx = record.model.indices
    if idx is None or idx.shape[1] != config.d:
        raise ValueError("trajectory was not produced by a heat model of this dimension")
    expected = _multi_indices(config.d, config.mode_cutoff)
    if idx.shape[0] > expected.shape[0] or not np.array_equal(idx, expected[: idx.shape[0]]):
        raise ValueError("trajectory modes do not match the heat configuration")
    coeffs = record.coeffs[t_index]
    return eigenfunctions(idx, points) @ coeffs


def write_field_csv(path, points, values) -> None:
    """Columns ``xi_1..xi_d, value`` in shortest round-trip notation."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    header = ",".join([f"xi_{i + 1}" for i in range(pts.shape[1])] + ["value"])
    rows = [",".join(repr(float(v)) for v in (*p, val)) for p, val in zip(pts, values)]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join([header] + rows) + "\n")
