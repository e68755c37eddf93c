"""Finite prefixes of infinite sequences and three-valued series decisions.

An infinite sequence is stored as an explicit prefix plus an optional
:class:`PowerLaw` describing the terms beyond it.  Convergence questions about
such sequences are answered with a :class:`Decision`: the rule decides when
present, otherwise the verdict is ``INCONCLUSIVE`` and only the partial sum is
reported.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class Verdict(str, enum.Enum):
    HOLDS = "holds"
    FAILS = "fails"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class PowerLaw:
    """Asymptotic description ``a_n ~ coef * n**exponent`` of the omitted terms.

    ``coef == 0`` encodes a sequence that vanishes beyond the prefix.
    """

    coef: float
    exponent: float

    def __post_init__(self):
        if self.coef < 0 or not np.isfinite(self.coef) or not np.isfinite(self.exponent):
            raise ValueError(f"invalid power law {self}")

    @property
    def vanishes(self) -> bool:
        return self.coef == 0.0

    def __call__(self, n):
        return self.coef * np.asarray(n, dtype=float) ** self.exponent

    def to_dict(self) -> dict:
        return {"coef": self.coef, "exponent": self.exponent}


ZERO = PowerLaw(0.0, 0.0)


@dataclass(frozen=True)
class Decision:
    """Outcome of a convergence criterion on truncated data."""

    verdict: Verdict
    partial_sum: float
    n_terms: int
    decided_by: str  # "tail_rule" or "prefix"
    note: str = ""

    @property
    def holds(self) -> bool:
        return self.verdict is Verdict.HOLDS

    @property
    def fails(self) -> bool:
        return self.verdict is Verdict.FAILS

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "partial_sum": self.partial_sum,
            "n_terms": self.n_terms,
            "decided_by": self.decided_by,
            "note": self.note,
        }


def power_series_decision(terms: np.ndarray, tail_exponent: float | None, *, vanishing: bool = False, note: str = "") -> Decision:
    """Decide ``sum terms`` given the prefix and the exponent of the tail terms.

    ``tail_exponent`` is ``e`` in ``term_n ~ const * n**e``; the series
    converges iff ``e < -1``.  ``vanishing`` marks a tail that is identically
    zero.
    """
    terms = np.asarray(terms, dtype=float)
    total = float(np.sum(terms))
    n = terms.size
    if not np.isfinite(total):
        return Decision(Verdict.FAILS, total, n, "prefix", note or "non-finite partial sum")
    if vanishing:
        return Decision(Verdict.HOLDS, total, n, "tail_rule", note or "terms vanish beyond the prefix")
    if tail_exponent is None:
        return Decision(Verdict.INCONCLUSIVE, total, n, "prefix", note or "no tail rule supplied")
    verdict = Verdict.HOLDS if tail_exponent < -1.0 else Verdict.FAILS
    return Decision(verdict, total, n, "tail_rule", note or f"tail terms ~ n^{tail_exponent:g}")
