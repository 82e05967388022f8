"""Benjamini-Hochberg step-up and step-down, compliance, and PrivateBHq.

Hypothesis indices are 0-based throughout the library.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CalibrationError, ParameterError
from .mechanisms import NOISE_OFF, PrivacyBudget, peel
from .pvalues import Dataset, SensitivityProfile, log_truncate, pvalues_for


@dataclass(frozen=True)
class RejectionSet:
    """Rejected hypotheses of one run.

    ``V`` is filled in only when truth labels were supplied. For PrivateBHq,
    ``threshold`` is the cutoff actually applied (``-inf`` for no rejections)
    and ``selected`` lists the peeled indices in selection order.
    """

    rejected: np.ndarray
    m: int
    V: int | None = None
    threshold: float | None = None
    selected: np.ndarray | None = None

    def __post_init__(self):
        rej = np.asarray(self.rejected, dtype=int).ravel()
        # Large sets often arrive already increasing; skip the sort then.
        if not np.all(rej[1:] > rej[:-1]):
            rej = np.sort(rej)
            if np.any(rej[1:] == rej[:-1]):
                raise ParameterError("rejected indices must be distinct")
        if rej.size and (rej[0] < 0 or rej[-1] >= self.m):
            raise ParameterError("rejected indices out of range")
        object.__setattr__(self, "rejected", rej)
        if self.V is not None and not 0 <= self.V <= rej.size:
            raise ParameterError("V must lie in [0, R]")

    @property
    def R(self) -> int:
        return int(self.rejected.size)

    def with_truth(self, is_null) -> RejectionSet:
        """Attach ``V`` from a boolean mask of true nulls."""
        is_null = np.asarray(is_null, dtype=bool)
        if is_null.shape != (self.m,):
            raise ParameterError("truth labels must have one entry per hypothesis")
        return RejectionSet(self.rejected, self.m, int(is_null[self.rejected].sum()), self.threshold, self.selected)


def _check_pvalues(pvalues) -> np.ndarray:
    p = np.asarray(pvalues, dtype=float).ravel()
    if np.any(~(p >= 0) | ~(p <= 1)):
        raise ParameterError("p-values must lie in [0, 1]")
    return p


def _check_level(q: float) -> None:
    if not 0 < q < 1:
        raise ParameterError(f"q must lie in (0, 1), got {q}")


def bhq_cutoffs(q: float, m: int) -> np.ndarray:
    """BHq critical values ``q j / m`` for ``j = 1..m``."""
    return q * np.arange(1, m + 1) / m


def _rank_order(p: np.ndarray) -> np.ndarray:
    # Stable sort: tied p-values are ranked by index.
    return np.argsort(p, kind="stable")


def bhq_step_up(pvalues, q: float, is_null=None) -> RejectionSet:
    """Reject the ``j*`` smallest p-values, ``j* = max{j : p_(j) <= q j / m}``."""
    _check_level(q)
    p = _check_pvalues(pvalues)
    m = p.size
    if m == 0:
        return RejectionSet(np.empty(0, int), 0)
    order = _rank_order(p)
    passed = np.flatnonzero(p[order] <= bhq_cutoffs(q, m))
    j_star = int(passed[-1]) + 1 if passed.size else 0
    out = RejectionSet(order[:j_star], m)
    return out if is_null is None else out.with_truth(is_null)


def bhq_step_down(pvalues, q: float, is_null=None) -> RejectionSet:
    """Reject ``p_(1), p_(2), ...`` until the first ``p_(j) > q j / m``."""
    _check_level(q)
    p = _check_pvalues(pvalues)
    m = p.size
    if m == 0:
        return RejectionSet(np.empty(0, int), 0)
    order = _rank_order(p)
    failed = np.flatnonzero(p[order] > bhq_cutoffs(q, m))
    j_star = int(failed[0]) if failed.size else m
    out = RejectionSet(order[:j_star], m)
    return out if is_null is None else out.with_truth(is_null)


def is_compliant(rejections: RejectionSet, pvalues, cutoffs) -> bool:
    """True iff every rejected p-value is at most ``cutoffs[R - 1]``.

    An empty rejection set is compliant by convention.
    """
    cutoffs = np.asarray(cutoffs, dtype=float)
    if np.any(np.diff(cutoffs) < 0):
        raise ParameterError("cutoffs must be non-decreasing")
    R = rejections.R
    if R == 0:
        return True
    if R > cutoffs.size:
        raise ParameterError("more rejections than cutoffs")
    p = np.asarray(pvalues, dtype=float).ravel()
    return bool(p[rejections.rejected].max() <= cutoffs[R - 1])


def gamma_cutoffs(q: float, m: int, budget: PrivacyBudget) -> np.ndarray:
    """Log-scale cutoffs for PrivateBHq.

    ``gamma_j = log(q j / m) - lam * log(6 m' / q)`` for ``j = 1..m'``, where
    ``lam`` is the budget's Laplace scale. With the calibrated scale the
    procedure is compliant with ``q j / m`` with probability at least
    ``1 - 0.1 q``.

    ``q`` may exceed 1 here so that an inflated level (see ``inflated_level``)
    can be plugged in.
    """
    if not q > 0:
        raise ParameterError("q must be positive")
    if budget.m_prime > m:
        raise ParameterError(f"m_prime={budget.m_prime} exceeds m={m}")
    j = np.arange(1, budget.m_prime + 1)
    return np.log(q * j / m) - budget.lam * math.log(6 * budget.m_prime / q)


def inflated_level(q: float, budget: PrivacyBudget, m: int) -> float:
    """Level ``q exp(24 eta sqrt(m' log(1/delta)) log(m) / epsilon)``.

    Running PrivateBHq at this level makes it reject at least
    ``min(R_step_down(q), m')`` hypotheses with probability tending to one
    as ``m`` grows, provided ``nu <= q / m`` (and, in the analysis behind the
    constant 24, ``q >= 6 m**-1.5``). The result can be far above 1.
    """
    expo = 24 * budget.eta * math.sqrt(budget.m_prime * math.log(1 / budget.delta)) * math.log(m) / budget.epsilon
    return q * math.exp(expo)


def step_up_threshold(noisy, gammas) -> float:
    """``max{gamma_j : noisy_(j) <= gamma_j}``, or ``-inf`` if no rank qualifies."""
    s = np.sort(np.asarray(noisy, dtype=float))
    gammas = np.asarray(gammas, dtype=float)
    ok = s <= gammas[: s.size]
    return float(gammas[: s.size][ok].max()) if ok.any() else -math.inf


def private_bhq_pvalues(pvalues, q: float, budget: PrivacyBudget, nu: float, rng=None, *,
                        is_null=None, cutoffs=None, noise=None) -> RejectionSet:
    """PrivateBHq on precomputed p-values.

    The p-values are truncated at ``nu`` and logged, ``m'`` of them are
    selected by peeling with the budget's Laplace scale, and every selected
    hypothesis whose noisy log p-value is at most the step-up threshold on the
    ``gamma`` cutoffs is rejected. ``noise=NOISE_OFF`` disables the noise.
    """
    p = _check_pvalues(pvalues)
    m = p.size
    if budget.m_prime > m:
        raise ParameterError(f"m_prime={budget.m_prime} exceeds m={m}")
    budget.check()
    gammas = gamma_cutoffs(q, m, budget) if cutoffs is None else np.asarray(cutoffs, dtype=float)
    if gammas.size != budget.m_prime or np.any(np.diff(gammas) <= 0):
        raise ParameterError("need m' strictly increasing cutoffs")
    pi = log_truncate(p, nu)
    cands = peel(pi, budget.m_prime, budget.lam if noise is None else noise, rng)
    idx = np.array([c.index for c in cands])
    noisy = np.array([c.noisy_value for c in cands])
    T = step_up_threshold(noisy, gammas)
    out = RejectionSet(idx[noisy <= T], m, threshold=T, selected=idx)
    return out if is_null is None else out.with_truth(is_null)


def private_bhq(dataset: Dataset, test: str, q: float, budget: PrivacyBudget, nu: float, rng=None, *,
                profile: SensitivityProfile | None = None, **kwargs) -> RejectionSet:
    """PrivateBHq with p-values from the ``test`` family applied to each column.

    When ``profile`` is given, the budget must have been calibrated for at
    least its ``eta`` and the truncation floor must be at least its ``nu``.
    """
    if profile is not None:
        if budget.eta < profile.eta * (1 - 1e-12):
            raise CalibrationError(f"budget calibrated for eta={budget.eta} but the family needs eta={profile.eta}")
        if nu < profile.nu:
            raise CalibrationError(f"nu={nu} is below the profile's floor {profile.nu}")
    return private_bhq_pvalues(pvalues_for(dataset, test), q, budget, nu, rng, **kwargs)


__all__ = [
    "NOISE_OFF",
    "RejectionSet",
    "bhq_cutoffs",
    "bhq_step_down",
    "bhq_step_up",
    "gamma_cutoffs",
    "inflated_level",
    "is_compliant",
    "private_bhq",
    "private_bhq_pvalues",
    "step_up_threshold",
]
