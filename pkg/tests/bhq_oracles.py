"""Brute-force BHq oracles shared by the unit and acceptance tests."""

import numpy as np

from privatebhq.procedures import bhq_cutoffs


# Definitional oracles that never sort. With c(j) = #{i : p_i <= q j / m},
# step-up rejects {p <= q J / m} for J = max{j : c(j) >= j}, and step-down
# rejects {p <= q J / m} for the largest J with c(l) >= l for every l <= J.
# In both cases the set has exactly J members.


def _counts(p, q):
    m = len(p)
    cut = bhq_cutoffs(q, m)
    return [int(np.sum(p <= cut[j - 1])) for j in range(1, m + 1)], cut


def oracle_step_up(p, q):
    p = np.asarray(p, dtype=float)
    if p.size == 0:
        return set()
    c, cut = _counts(p, q)
    J = max([j for j in range(1, p.size + 1) if c[j - 1] >= j], default=0)
    return set(np.flatnonzero(p <= cut[J - 1]).tolist()) if J else set()


def oracle_step_down(p, q):
    p = np.asarray(p, dtype=float)
    if p.size == 0:
        return set()
    c, cut = _counts(p, q)
    J = 0
    while J < p.size and c[J] >= J + 1:
        J += 1
    return set(np.flatnonzero(p <= cut[J - 1]).tolist()) if J else set()


def oracle_masks(P, q):
    """Row-wise rejection masks of both oracles, vectorized over ``P``."""
    N, m = P.shape
    cut = bhq_cutoffs(q, m)
    c = (P[:, :, None] <= cut[None, None, :]).sum(axis=1)
    ok = c >= np.arange(1, m + 1)
    J_up = np.where(ok.any(axis=1), m - np.argmax(ok[:, ::-1], axis=1), 0)
    J_down = np.where(ok.all(axis=1), m, np.argmin(ok, axis=1))

    def mask(J):
        lim = np.where(J > 0, cut[np.maximum(J, 1) - 1], -1.0)
        return P <= lim[:, None]

    return mask(J_up), mask(J_down)
