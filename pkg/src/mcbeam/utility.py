"""SINR utility families.

All logarithms are natural. A base-2 utility such as ``log2(1 + SINR)`` is
obtained with ``weight = 1 / ln 2``.
"""

from dataclasses import dataclass
import math

import numpy as np

PROP_FAIR = "prop_fair"
ALPHA_FAIR = "alpha_fair"
RATE = "rate"
KINDS = (PROP_FAIR, ALPHA_FAIR, RATE)


class UtilityDomainError(ValueError):
    pass


@dataclass(frozen=True)
class Utility:
    """A per-user utility ``U(sinr)``.

    ``prop_fair``:  weight * ln(sinr)
    ``alpha_fair``: weight * sinr**(1 - alpha) / (1 - alpha), alpha >= 0, alpha != 1
    ``rate``:       weight * ln(1 + theta * sinr), 0 < theta <= 1
    """

    kind: str = RATE
    weight: float = 1.0
    alpha: float = 2.0
    theta: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown utility kind {self.kind!r}")
        if not (self.weight > 0 and math.isfinite(self.weight)):
            raise ValueError("weight must be positive and finite")
        if self.kind == ALPHA_FAIR:
            if self.alpha < 0:
                raise ValueError("alpha must be >= 0")
            if self.alpha == 1:
                raise ValueError("alpha = 1 is excluded; use prop_fair")
        if self.kind == RATE and not (0 < self.theta <= 1):
            raise ValueError("theta must lie in (0, 1]")

    @classmethod
    def prop_fair(cls, weight=1.0):
        return cls(PROP_FAIR, weight)

    @classmethod
    def alpha_fair(cls, alpha, weight=1.0):
        return cls(ALPHA_FAIR, weight, alpha=alpha)

    @classmethod
    def rate(cls, theta=1.0, weight=1.0):
        return cls(RATE, weight, theta=theta)

    @property
    def needs_positive_sinr(self):
        """True when U(0) is undefined (log or a negative power of sinr)."""
        return self.kind == PROP_FAIR or (self.kind == ALPHA_FAIR and self.alpha >= 1)

    def _check(self, sinr):
        sinr = np.asarray(sinr, dtype=float)
        if self.needs_positive_sinr:
            if np.any(~(sinr > 0)):
                raise UtilityDomainError(f"{self.kind} requires sinr > 0")
        elif np.any(~(sinr >= 0)):
            raise UtilityDomainError(f"{self.kind} requires sinr >= 0")
        return sinr

    def value(self, sinr):
        g = self._check(sinr)
        if self.kind == PROP_FAIR:
            return self.weight * np.log(g)
        if self.kind == RATE:
            return self.weight * np.log1p(self.theta * g)
        return self.weight * g ** (1.0 - self.alpha) / (1.0 - self.alpha)

    def derivative(self, sinr):
        g = self._check(sinr)
        if self.kind == PROP_FAIR:
            return self.weight / g
        if self.kind == RATE:
            return self.weight * self.theta / (1.0 + self.theta * g)
        return self.weight * g ** (-self.alpha)

    def second_derivative(self, sinr):
        g = self._check(sinr)
        if self.kind == PROP_FAIR:
            return -self.weight / g**2
        if self.kind == RATE:
            return -self.weight * self.theta**2 / (1.0 + self.theta * g) ** 2
        return -self.alpha * self.weight * g ** (-self.alpha - 1.0)

    def inverse_derivative(self, y):
        """Solve ``derivative(sinr) = y`` for sinr >= 0.

        For ``rate`` there is no non-negative root once ``y > weight*theta``;
        0 is returned then (the beam is switched off).
        """
        y = np.asarray(y, dtype=float)
        if np.any(~(y > 0)):
            raise UtilityDomainError("inverse_derivative requires y > 0")
        if self.kind == PROP_FAIR:
            return self.weight / y
        if self.kind == RATE:
            return np.maximum(0.0, (self.weight * self.theta / y - 1.0) / self.theta)
        if self.alpha == 0:
            # linear utility: U' is constant, no unique root
            raise UtilityDomainError("alpha = 0 has a constant derivative")
        return (self.weight / y) ** (1.0 / self.alpha)

    def risk_aversion(self, sinr):
        """Coefficient of relative risk aversion ``-sinr * U'' / U'``."""
        g = np.asarray(sinr, dtype=float)
        if np.any(~(g > 0)):
            raise UtilityDomainError("risk_aversion requires sinr > 0")
        if self.kind == PROP_FAIR:
            return np.ones_like(g)
        if self.kind == ALPHA_FAIR:
            return np.full_like(g, float(self.alpha))
        return self.theta * g / (1.0 + self.theta * g)

    def describe(self):
        d = {"kind": self.kind, "weight": self.weight}
        if self.kind == ALPHA_FAIR:
            d["alpha"] = self.alpha
        if self.kind == RATE:
            d["theta"] = self.theta
        return d


def default_utility(kind, n_subchannels, n_cells, alpha=2.0, theta=1.0):
    """The evaluation utilities: 1/(NM) log2(.) for the log families and
    1/(NM) sinr^(1-alpha)/(1-alpha) for alpha-fairness."""
    w = 1.0 / (n_subchannels * n_cells)
    if kind == PROP_FAIR:
        return Utility.prop_fair(w / math.log(2))
    if kind == RATE:
        return Utility.rate(theta, w / math.log(2))
    if kind == ALPHA_FAIR:
        return Utility.alpha_fair(alpha, w)
    raise ValueError(f"unknown utility kind {kind!r}")
