"""Simulated Stern-Gerlach apparatus behind a single query interface.

The oracle answers one question: what is the probability of the maximal
outcome when the apparatus points along a given direction?  Reconstruction
code is only allowed to call ``query`` and ``query_count``; the underlying
state stays hidden by convention.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import binom

from .core import Direction, PureState, direction_to_point, husimi

__all__ = ["MeasurementOracle", "probability_s"]

_CLAMP_TOL = 1e-12


def probability_s(state: PureState, d: Direction) -> float:
    """Probability of the maximal projection outcome along direction d.

    Identical to the Husimi value at the stereographic image of d.
    """
    return husimi(state, direction_to_point(d))


class MeasurementOracle:
    """Answers outcome probabilities either exactly or from binomial counts.

    In sampled mode each query draws a single uniform variate from the seeded
    stream and inverts the binomial distribution function, so the result is a
    deterministic function of (seed, query index, direction).  An instance is
    single-writer: the query log and the sampling stream are ordered.
    """

    def __init__(self, state: PureState, *, shots: int | None = None,
                 seed: int | None = None):
        if shots is not None:
            if shots <= 0:
                raise ValueError(f"shots must be positive, got {shots}")
            if shots > 10**7:
                raise ValueError(f"shots above 1e7 not supported, got {shots}")
            if seed is None:
                raise ValueError("sampled mode requires a seed for reproducibility")
        self._state = state
        self.shots = shots
        self.seed = seed
        self._rng = None if shots is None else np.random.default_rng(seed)
        self._log: list[tuple[Direction, float]] = []

    @property
    def spin(self):
        return self._state.spin

    @property
    def exact(self) -> bool:
        return self.shots is None

    def query(self, d: Direction) -> float:
        """Measured probability of the maximal outcome along d (logged)."""
        p = probability_s(self._state, d)
        if p < 0.0 or p > 1.0:
            if p < -_CLAMP_TOL or p > 1.0 + _CLAMP_TOL:
                raise ValueError(f"probability {p!r} outside [0, 1] beyond tolerance")
            p = min(max(p, 0.0), 1.0)
        if self.exact:
            value = p
        else:
            u = self._rng.random()
            m = binom.ppf(u, self.shots, p)
            m = min(max(float(m), 0.0), float(self.shots))
            value = m / self.shots
        self._log.append((d, value))
        return value

    @property
    def query_count(self) -> int:
        return len(self._log)

    @property
    def query_log(self) -> tuple[tuple[Direction, float], ...]:
        return tuple(self._log)
