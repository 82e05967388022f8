"""False discovery proportions, the constants C_k, and FDR_k bounds.

``C_k = E[max_{j >= k} j / T_j]`` where ``T_j`` is a sum of ``j`` unit
exponentials. Any procedure whose rejected p-values are all at most
``q R / m`` has ``FDR_k <= C_k pi0 q`` when the true-null statistics are
jointly independent. ``C_k`` has no closed form and is estimated by Monte
Carlo; ``C_k^(n)`` is the finite-``n`` version built from ``n`` uniform order
statistics, non-decreasing in ``n`` with limit ``C_k``.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np
from scipy import special

from ._random import as_seed_sequence
from .errors import ParameterError

Z99 = float(special.ndtri(0.995))


@dataclass(frozen=True)
class FdpRecord:
    V: int
    R: int

    def __post_init__(self):
        if not 0 <= self.V <= self.R:
            raise ParameterError(f"need 0 <= V <= R, got V={self.V}, R={self.R}")

    @property
    def fdp(self) -> float:
        return self.V / max(self.R, 1)

    def fdp_k(self, k: int) -> float:
        """``V/R`` counted only when ``V >= k``."""
        return self.fdp if self.V >= k else 0.0

    def fdp_upper_k(self, k: int) -> float:
        """``V/R`` counted only when ``R >= k``."""
        return self.fdp if self.R >= k else 0.0


def fdp(rejections, k: int) -> tuple[float, float]:
    """``(FDP_k, FDP^k)`` of a rejection set that carries ``V``."""
    if getattr(rejections, "V", None) is None:
        raise ParameterError("rejection set has no truth labels (V is unknown)")
    rec = FdpRecord(rejections.V, rejections.R)
    return rec.fdp_k(k), rec.fdp_upper_k(k)


def fdp_k_array(V, R, k: int) -> np.ndarray:
    """Vectorized ``FDP_k`` over replicate arrays of ``V`` and ``R``."""
    V = np.asarray(V)
    R = np.asarray(R)
    return np.where(V >= k, V / np.maximum(R, 1), 0.0)


@dataclass(frozen=True)
class CkEstimate:
    k: int
    mean: float
    std_error: float
    reps: int
    j_max: int

    @property
    def ci99(self) -> tuple[float, float]:
        half = Z99 * self.std_error
        return self.mean - half, self.mean + half


def _summarize(k, samples, j_max) -> CkEstimate:
    samples = np.asarray(samples, dtype=float)
    reps = samples.size
    se = float(samples.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    return CkEstimate(int(k), float(samples.mean()), se, reps, int(j_max))


def _ck_block(ks: np.ndarray, rows: int, j_max: int, seed_seq, chunk: int) -> np.ndarray:
    """Per-replicate ``max_{k <= j <= j_max} j / T_j`` for each ``k`` in ``ks``.

    The first ``K = max(ks)`` ratios are kept so every ``k`` can be served by a
    reverse running max; beyond ``K`` only a running max is carried.
    """
    rng = np.random.default_rng(seed_seq)
    K = int(ks.max())
    head = np.empty((rows, K))
    tail_max = np.full(rows, -np.inf)
    carry = np.zeros(rows)
    start = 0
    while start < j_max:
        width = min(chunk, j_max - start)
        T = np.cumsum(rng.standard_exponential((rows, width)), axis=1)
        T += carry[:, None]
        carry = T[:, -1].copy()
        j = np.arange(start + 1, start + width + 1, dtype=float)
        ratio = j / T
        if start < K:
            take = min(K - start, width)
            head[:, start:start + take] = ratio[:, :take]
            if take < width:
                np.maximum(tail_max, ratio[:, take:].max(axis=1), out=tail_max)
        else:
            np.maximum(tail_max, ratio.max(axis=1), out=tail_max)
        start += width
    suffix = np.maximum.accumulate(head[:, ::-1], axis=1)[:, ::-1]
    suffix = np.maximum(suffix, tail_max[:, None])
    return suffix[:, ks - 1]


def estimate_ck_many(ks, reps: int = 10_000, j_max: int = 100_000, seed=0, *,
                     threads: int = 1, block: int = 200, chunk: int = 2048) -> list[CkEstimate]:
    """Estimate ``C_k`` for several ``k`` from one shared set of paths.

    Replicates are grouped in blocks of ``block`` paths, each with its own
    child seed, so the result depends only on ``seed`` and ``block`` and not on
    ``threads``.
    """
    ks = np.atleast_1d(np.asarray(ks, dtype=int))
    if ks.size == 0:
        raise ParameterError("need at least one k")
    if np.any(ks < 2):
        raise ParameterError("k must be at least 2 (C_1 is infinite)")
    if j_max < ks.max():
        raise ParameterError("j_max must be at least every k")
    if reps < 1:
        raise ParameterError("reps must be positive")
    sizes = [block] * (reps // block) + ([reps % block] if reps % block else [])
    seeds = as_seed_sequence(seed).spawn(len(sizes))
    jobs = [(ks, rows, j_max, s, chunk) for rows, s in zip(sizes, seeds)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda a: _ck_block(*a), jobs))
    else:
        parts = [_ck_block(*a) for a in jobs]
    samples = np.concatenate(parts, axis=0)
    return [_summarize(k, samples[:, i], j_max) for i, k in enumerate(ks)]


def estimate_ck(k: int, reps: int = 10_000, j_max: int = 100_000, seed=0, **kwargs) -> CkEstimate:
    """Monte Carlo estimate of ``C_k`` truncated at ``j_max``."""
    return estimate_ck_many([k], reps, j_max, seed, **kwargs)[0]


def ck_finite_samples(k: int, n: int, reps: int, rng) -> np.ndarray:
    """Draws of ``max_{k <= j <= n} j / (n U_(j))`` for ``n`` uniforms."""
    rng = np.random.default_rng(as_seed_sequence(rng)) if not isinstance(rng, np.random.Generator) else rng
    out = np.empty(reps)
    rows = max(1, min(reps, 4_000_000 // (n + 1)))
    j = np.arange(k, n + 1, dtype=float)
    for lo in range(0, reps, rows):
        hi = min(reps, lo + rows)
        T = np.cumsum(rng.standard_exponential((hi - lo, n + 1)), axis=1)
        # U_(j) = T_j / T_{n+1} in law.
        u = T[:, k - 1:n] / T[:, n:n + 1]
        out[lo:hi] = (j / (n * u)).max(axis=1)
    return out


def estimate_ck_finite(k: int, n: int, reps: int = 100_000, seed=0) -> CkEstimate:
    """Monte Carlo estimate of ``C_k^(n) = E[max_{k <= j <= n} j / (n U_(j))]``."""
    if k < 2:
        raise ParameterError("k must be at least 2 (C_1 is infinite)")
    if n < k:
        raise ParameterError("need n >= k")
    return _summarize(k, ck_finite_samples(k, n, reps, seed), n)


@lru_cache(maxsize=1)
def ck_table() -> dict[int, CkEstimate]:
    """Precomputed ``C_k`` estimates shipped with the package (k = 2..50)."""
    text = resources.files("privatebhq").joinpath("data/ck_table.csv").read_text()
    table = {}
    for row in csv.DictReader(text.splitlines()):
        k = int(row["k"])
        table[k] = CkEstimate(k, float(row["mean"]), float(row["stderr"]), int(row["reps"]), int(row["jmax"]))
    return table


def ck_value(k: int) -> float:
    table = ck_table()
    if k in table:
        return table[k].mean
    if k < 2:
        raise ParameterError("C_k is infinite for k < 2")
    return estimate_ck(k).mean


def bound_fdr_k(k: int, pi0: float, q: float, ck: float | None = None) -> float:
    """Upper bound ``C_k pi0 q`` on ``FDR_k`` for compliant procedures."""
    if not 0 <= pi0 <= 1:
        raise ParameterError("pi0 must lie in [0, 1]")
    if pi0 == 0:
        return 0.0
    return (ck_value(k) if ck is None else ck) * pi0 * q


def bound_fdr_upper_k(k: int, q: float) -> float:
    """Upper bound ``(1 + 2 / sqrt(q k)) q`` on ``FDR^k``; valid for ``k >= 1``."""
    if k < 1:
        raise ParameterError("k must be at least 1")
    return (1 + 2 / math.sqrt(q * k)) * q


def write_ck_csv(estimates, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["k", "mean", "stderr", "reps", "jmax"])
    for e in estimates:
        writer.writerow([e.k, f"{e.mean:.12g}", f"{e.std_error:.12g}", e.reps, e.j_max])
