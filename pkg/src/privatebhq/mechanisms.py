"""Laplace noise, Report Noisy Min, peeling, and privacy accounting.

All samplers take an explicit ``numpy.random.Generator``; there is no global
random state. Passing ``NOISE_OFF`` in place of a privacy parameter or noise
scale turns the noise off. That mode is for testing the deterministic skeleton
only and provides no privacy.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyCandidatesError, ParameterError

logger = logging.getLogger(__name__)

NOISE_OFF = "off"


def _noise_off(value) -> bool:
    if isinstance(value, str):
        if value != NOISE_OFF:
            raise ParameterError(f"unrecognised noise setting {value!r}")
        return True
    return False


def _warn_non_private() -> None:
    logger.warning("noise is OFF: output is NOT differentially private")


def laplace_inverse_cdf(u, scale: float = 1.0):
    """Map uniforms in ``(0, 1)`` to ``Lap(scale)`` draws."""
    if not scale > 0:
        raise ParameterError("Laplace scale must be positive")
    u = np.asarray(u, dtype=float)
    c = u - 0.5
    out = -scale * np.sign(c) * np.log1p(-2.0 * np.abs(c))
    return float(out) if out.ndim == 0 else out


def _open_uniforms(rng: np.random.Generator, size=None):
    u = rng.random(size)
    # rng.random is on [0, 1); zero maps to -inf under the inverse CDF.
    if size is None:
        while u == 0.0:
            u = rng.random()
        return u
    zero = u == 0.0
    while zero.any():
        u[zero] = rng.random(int(zero.sum()))
        zero = u == 0.0
    return u


def laplace_sample(scale: float, rng: np.random.Generator, size=None):
    """Draw from the Laplace law with density ``exp(-|x|/scale) / (2 scale)``."""
    if not scale > 0:
        raise ParameterError("Laplace scale must be positive")
    return laplace_inverse_cdf(_open_uniforms(rng, size), scale)


@dataclass(frozen=True)
class NoisyCandidate:
    index: int
    noisy_value: float


def _noisy_min(values: np.ndarray, scale, rng, removed: np.ndarray | None) -> NoisyCandidate:
    live = np.flatnonzero(~removed) if removed is not None else np.arange(values.size)
    if live.size == 0:
        raise EmptyCandidatesError("every value has been removed")
    if _noise_off(scale):
        j = int(live[np.argmin(values[live])])
        return NoisyCandidate(j, float(values[j]))
    noisy = values[live] + laplace_sample(scale, rng, live.size)
    # argmin returns the first minimiser, i.e. the smallest index on ties.
    j = int(live[np.argmin(noisy)])
    return NoisyCandidate(j, float(values[j] + laplace_sample(scale, rng)))


def private_min(values, sensitivity: float, epsilon, rng: np.random.Generator | None = None,
                removed=None) -> NoisyCandidate:
    """Report Noisy Min.

    Adds independent ``Lap(2 * sensitivity / epsilon)`` noise to every value not
    flagged in ``removed``, and returns the index of the smallest noisy value
    together with that entry's true value plus a fresh draw of the same noise.
    The release is ``(epsilon, 0)``-differentially private when each value
    changes by at most ``sensitivity`` between adjacent databases.

    ``epsilon=NOISE_OFF`` returns the exact argmin (ties to the smallest index).
    """
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise EmptyCandidatesError("no values supplied")
    mask = None if removed is None else np.asarray(removed, dtype=bool)
    if mask is not None and mask.shape != values.shape:
        raise ParameterError("removed mask must match values")
    if _noise_off(epsilon):
        _warn_non_private()
        return _noisy_min(values, NOISE_OFF, rng, mask)
    if not sensitivity >= 0:
        raise ParameterError("sensitivity must be nonnegative")
    if not epsilon > 0:
        raise ParameterError("epsilon must be positive")
    if rng is None:
        raise ParameterError("a random generator is required when noise is on")
    if sensitivity == 0:
        return _noisy_min(values, NOISE_OFF, rng, mask)
    return _noisy_min(values, 2.0 * sensitivity / epsilon, rng, mask)


def peel(values, m_prime: int, scale, rng: np.random.Generator | None = None) -> list[NoisyCandidate]:
    """Run Report Noisy Min ``m_prime`` times, removing each winner.

    ``scale`` is the Laplace scale used for every draw (``NOISE_OFF`` to
    disable noise). Returned candidates are in selection order and their
    indices are distinct.
    """
    values = np.asarray(values, dtype=float).ravel()
    m = values.size
    if not 1 <= m_prime <= m:
        raise ParameterError(f"m_prime must lie in [1, m={m}], got {m_prime}")
    off = _noise_off(scale)
    if off:
        _warn_non_private()
    elif not scale > 0:
        raise ParameterError("Laplace scale must be positive")
    elif rng is None:
        raise ParameterError("a random generator is required when noise is on")
    removed = np.zeros(m, dtype=bool)
    out = []
    for _ in range(m_prime):
        cand = _noisy_min(values, scale, rng, removed)
        removed[cand.index] = True
        out.append(cand)
    return out


@dataclass(frozen=True)
class PrivacyBudget:
    """Privacy parameters and the Laplace scale they calibrate.

    ``in_theorem_regime`` is False when the inputs fall outside
    ``epsilon <= 0.5, delta <= 0.1, m_prime >= 10``; the scale is still the
    same formula but no ``(epsilon, delta)`` guarantee is claimed for it.
    """

    epsilon: float
    delta: float
    m_prime: int
    eta: float
    lam: float
    in_theorem_regime: bool = True

    @property
    def tag(self) -> str:
        return "theorem-regime" if self.in_theorem_regime else "outside-theorem-regime"

    def required_scale(self) -> float:
        return self.eta * math.sqrt(10 * self.m_prime * math.log(1 / self.delta)) / self.epsilon

    def check(self) -> None:
        """Raise unless the scale is at least the calibrated minimum."""
        if not (self.epsilon > 0 and 0 < self.delta < 1 and self.m_prime >= 1 and self.eta >= 0):
            raise ParameterError("invalid privacy parameters")
        if self.lam < self.required_scale() * (1 - 1e-12):
            raise ParameterError(f"Laplace scale {self.lam} is below the calibrated {self.required_scale()}")


def calibrate(epsilon: float, delta: float, m_prime: int, eta: float) -> PrivacyBudget:
    """Laplace scale ``eta * sqrt(10 m' log(1/delta)) / epsilon`` for peeling.

    With ``epsilon <= 0.5``, ``delta <= 0.1`` and ``m' >= 10`` this scale makes
    ``m'`` rounds of Report Noisy Min on ``(eta, nu)``-sensitive log p-values
    ``(epsilon, delta)``-differentially private.
    """
    if delta == 0:
        raise ParameterError("delta = 0 is unsupported: the calibration needs delta > 0")
    if not 0 < delta < 1:
        raise ParameterError("delta must lie in (0, 1)")
    if not epsilon > 0:
        raise ParameterError("epsilon must be positive")
    if int(m_prime) != m_prime or m_prime < 1:
        raise ParameterError("m_prime must be a positive integer")
    if not 0 < eta < math.inf:
        raise ParameterError("eta must be positive and finite")
    lam = eta * math.sqrt(10 * m_prime * math.log(1 / delta)) / epsilon
    regime = epsilon <= 0.5 and delta <= 0.1 and m_prime >= 10
    return PrivacyBudget(float(epsilon), float(delta), int(m_prime), float(eta), lam, regime)


def advanced_composition(epsilon_each: float, delta_each: float, l: int, delta_prime: float) -> tuple[float, float]:
    """Privacy of ``l`` adaptive ``(epsilon_each, delta_each)`` mechanisms."""
    if epsilon_each < 0 or delta_each < 0:
        raise ParameterError("per-mechanism epsilon and delta must be nonnegative")
    if not delta_prime > 0:
        raise ParameterError("delta_prime must be positive")
    if l < 1:
        raise ParameterError("l must be at least 1")
    eps = epsilon_each * math.sqrt(2 * l * math.log(1 / delta_prime)) + l * epsilon_each * math.expm1(epsilon_each)
    return eps, l * delta_each + delta_prime


def basic_composition(epsilon_each: float, delta_each: float, l: int) -> tuple[float, float]:
    return l * epsilon_each, l * delta_each


def laplace_concentration_bound(n: int, lam: float, alpha: float) -> tuple[float, float]:
    """Uniform bounds for ``n`` i.i.d. ``Lap(lam)`` draws.

    Each bound holds with probability at least ``1 - alpha``: all draws exceed
    the first value, and all absolute values are below the second.
    """
    if not 0 < alpha < 1:
        raise ParameterError("alpha must lie in (0, 1)")
    if n < 1:
        raise ParameterError("n must be positive")
    return -lam * math.log(n / (2 * alpha)), lam * math.log(n / alpha)
