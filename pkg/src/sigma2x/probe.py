"""Rational times power-of-pi multiplier search.

Given a computed value ``c`` and an expected value ``e``, the probe looks for
the candidate multiplier ``m`` with ``c * m == e`` within a relative
tolerance.  The candidate grid is coarse (factors of two and pi**2), so two
candidates can only both match when the tolerance is very loose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

_DEFAULT_RATIONALS = tuple(Fraction(1, 2**k) for k in (4, 3, 2, 1)) + tuple(
    Fraction(2**k) for k in range(5)
)
_DEFAULT_PI_POWERS = (-2, 0, 2)


@dataclass(frozen=True, order=True)
class Factor:
    """A multiplier ``rational * pi**pi_power``."""

    rational: Fraction
    pi_power: int = 0

    @property
    def value(self) -> float:
        return float(self.rational) * math.pi**self.pi_power

    @property
    def is_one(self) -> bool:
        return self.rational == 1 and self.pi_power == 0

    @property
    def label(self) -> str:
        r = str(self.rational)
        if self.pi_power == 0:
            return r
        pi = "pi^2" if self.pi_power == 2 else f"pi^{self.pi_power}"
        return pi if self.rational == 1 else f"{r}*{pi}"

    @classmethod
    def parse(cls, text: str) -> "Factor":
        text = text.strip()
        rational, pi_power = Fraction(1), 0
        for part in text.split("*"):
            if part.startswith("pi"):
                pi_power = int(part[3:]) if part.startswith("pi^") else 1
            else:
                rational = Fraction(part)
        return cls(rational, pi_power)


ONE = Factor(Fraction(1), 0)


@dataclass(frozen=True)
class ProbeMatch:
    factor: Factor
    relative_deviation: float
    ambiguous: bool
    matches: tuple = ()


@dataclass(frozen=True)
class FactorProbe:
    """Finite candidate set of multipliers; always contains 1."""

    candidates: tuple = field(
        default_factory=lambda: tuple(
            Factor(r, k) for k in _DEFAULT_PI_POWERS for r in _DEFAULT_RATIONALS
        )
    )

    def __post_init__(self):
        cands = tuple(self.candidates)
        if ONE not in cands:
            cands = (ONE,) + cands
        object.__setattr__(self, "candidates", cands)

    @property
    def labels(self) -> list[str]:
        return [c.label for c in self.candidates]

    def deviation(self, computed: float, expected: float, factor: Factor) -> float:
        scaled = computed * factor.value
        if expected == 0.0:
            return abs(scaled)
        return abs(scaled - expected) / abs(expected)

    def match(self, computed: float, expected: float, tol: float) -> ProbeMatch:
        """Return the best candidate; ties are resolved in favour of 1.

        ``ambiguous`` is set when more than one candidate lies within ``tol``.
        """
        devs = [(self.deviation(computed, expected, c), c) for c in self.candidates]
        within = tuple(c for d, c in devs if d <= tol)
        # 1 first, then by deviation, then by candidate order for determinism
        best_dev, best = min(
            devs, key=lambda dc: (dc[0], not dc[1].is_one, self.candidates.index(dc[1]))
        )
        return ProbeMatch(best, best_dev, len(within) > 1, within)
