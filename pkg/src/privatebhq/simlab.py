"""Simulation studies of BHq under negative dependence.

Three generators with jointly independent true nulls but arbitrary
null/non-null dependence:

* ``normal``: ``X ~ N(mu, Sigma)`` with ``Sigma = I`` except
  ``Sigma_ij = -1/sqrt(m0 m1)`` between a null and a non-null coordinate.
* ``student``: one-sample t statistics from ``n`` such vectors.
* ``block``: independent pairs ``(X_i, X~_i)`` with correlation ``rho``,
  where ``X_i`` is null and ``X~_i`` has mean ``mu_tilde``.

Plus the adversarial compliant procedure whose ``FDR_k`` approaches
``C_k pi0 q``, and ``run_experiment`` which estimates ``FDR_k`` over a grid.
The statistical generators put non-null coordinates first.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from ._random import as_seed_sequence
from .errors import ParameterError
from .fdr import FdpRecord, bound_fdr_k, bound_fdr_upper_k, fdp_k_array
from .procedures import RejectionSet, bhq_step_up, is_compliant

logger = logging.getLogger(__name__)

EXAMPLES = ("normal", "student", "block", "adversarial")
ALTERNATIVES = ("one-sided", "two-sided")


def _labels(m: int, m1: int) -> np.ndarray:
    is_null = np.ones(m, dtype=bool)
    is_null[:m1] = False
    return is_null


def _projectors(m: int, m1: int):
    m0 = m - m1
    a = np.zeros(m)
    b = np.zeros(m)
    a[m1:] = 1 / math.sqrt(m0)
    b[:m1] = 1 / math.sqrt(m1)
    return (a + b) / math.sqrt(2), (a - b) / math.sqrt(2)


def normal_example_covariance(m: int, m1: int) -> np.ndarray:
    """Dense ``Sigma`` (for checks; the sampler never builds it)."""
    _check_split(m, m1)
    cov = np.eye(m)
    c = -1 / math.sqrt((m - m1) * m1)
    cov[:m1, m1:] = c
    cov[m1:, :m1] = c
    return cov


def normal_example_sqrt(m: int, m1: int) -> np.ndarray:
    """Dense symmetric square root ``I - P+ + (sqrt(2) - 1) P-``."""
    _check_split(m, m1)
    e_plus, e_minus = _projectors(m, m1)
    return np.eye(m) - np.outer(e_plus, e_plus) + (math.sqrt(2) - 1) * np.outer(e_minus, e_minus)


def _check_split(m: int, m1: int) -> None:
    if not 1 <= m1 <= m - 1:
        raise ParameterError(f"need 1 <= m1 <= m - 1 for a non-degenerate covariance, got m={m}, m1={m1}")


def gen_normal_example(m: int, m1: int, mu: float, rng: np.random.Generator, size: int | None = None):
    """Draw ``X ~ N(mu 1_{non-null}, Sigma)``; returns ``(X, is_null)``.

    ``Sigma`` has eigenvalue 0 along ``e+`` and 2 along ``e-`` (unit vectors
    built from the null and non-null indicators), so its square root acts on
    ``Z`` in O(m) per draw. ``size`` stacks independent draws along axis 0.
    """
    _check_split(m, m1)
    e_plus, e_minus = _projectors(m, m1)
    z = rng.standard_normal((1 if size is None else size, m))
    x = z - np.outer(z @ e_plus, e_plus) + (math.sqrt(2) - 1) * np.outer(z @ e_minus, e_minus)
    x[:, :m1] += mu
    return (x[0] if size is None else x), _labels(m, m1)


def t_statistics(obs) -> np.ndarray:
    """One-sample t statistics column by column; ``obs`` is ``(n, m)``."""
    obs = np.asarray(obs, dtype=float)
    n = obs.shape[0]
    if n < 2:
        raise ParameterError("need at least two observations per coordinate")
    sd = obs.std(axis=0, ddof=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return math.sqrt(n) * obs.mean(axis=0) / sd


def gen_student_example(m: int, m1: int, mu: float, n: int, rng: np.random.Generator):
    """t statistics from ``n`` i.i.d. draws of the normal example."""
    if n < 2:
        raise ParameterError("n must be at least 2")
    obs, is_null = gen_normal_example(m, m1, mu, rng, size=n)
    return t_statistics(obs), is_null


def gen_block_example(m_pairs: int, mu_tilde: float, rho: float, rng: np.random.Generator):
    """Statistics ``[X~_1..X~_m, X_1..X_m]`` and labels (the ``X`` are null)."""
    if abs(rho) > 1:
        raise ParameterError("|rho| must be at most 1")
    z = rng.standard_normal(m_pairs)
    z2 = rng.standard_normal(m_pairs)
    x_alt = mu_tilde + rho * z + math.sqrt(1 - rho * rho) * z2
    return np.concatenate([x_alt, z]), _labels(2 * m_pairs, m_pairs)


def _check_alternative(alternative: str) -> str:
    alias = {"one": "one-sided", "two": "two-sided"}
    alternative = alias.get(alternative, alternative)
    if alternative not in ALTERNATIVES:
        raise ParameterError(f"alternative must be one of {ALTERNATIVES}")
    return alternative


def z_pvalues(statistics, alternative: str = "one-sided") -> np.ndarray:
    """Normal p-values: ``Phi(-x)`` one-sided, ``2 Phi(-|x|)`` two-sided."""
    x = np.asarray(statistics, dtype=float)
    if _check_alternative(alternative) == "one-sided":
        return 0.5 * special.erfc(x / math.sqrt(2))
    return special.erfc(np.abs(x) / math.sqrt(2))


def t_pvalues(statistics, df: int, alternative: str = "one-sided", nu: float | None = None):
    """Student-t p-values with ``df`` degrees of freedom.

    Undefined statistics (zero sample variance) get p-value ``nu``; the second
    return value counts them.
    """
    t = np.asarray(statistics, dtype=float)
    bad = ~np.isfinite(t)
    tt = np.where(bad, 0.0, t)
    if _check_alternative(alternative) == "one-sided":
        p = special.stdtr(df, -tt)
    else:
        p = 2 * special.stdtr(df, -np.abs(tt))
    if bad.any():
        p = np.where(bad, 0.0 if nu is None else nu, p)
    return np.clip(p, 0.0, 1.0), int(bad.sum())


# -- adversarial compliant procedure -------------------------------------------


@dataclass(frozen=True)
class AdversarialDraw:
    record: FdpRecord | None
    j_star: int
    u_star: float

    @property
    def feasible(self) -> bool:
        return self.record is not None


def adversarial_compliant(m: int, m0: int, k: int, q: float, rng: np.random.Generator) -> AdversarialDraw:
    """One replicate of the compliant procedure that nearly attains ``C_k pi0 q``.

    True-null p-values are ``m0`` uniforms (indices ``0..m0-1``) and the
    ``m - m0`` false nulls are 0. With ``j*`` maximising ``j / U_(j)`` over
    ``k <= j <= m0``, the procedure rejects the ``j*`` smallest nulls plus
    ``ceil(m U_(j*) / q) - j*`` zeros. If that needs more zeros than exist the
    draw is infeasible and ``record`` is ``None``.
    """
    if not 1 <= m0 < m:
        raise ParameterError("need 1 <= m0 < m")
    if k < 2 or k > m0:
        raise ParameterError("need 2 <= k <= m0")
    if not 0 < q < 1:
        raise ParameterError("q must lie in (0, 1)")
    u = rng.random(m0)
    order = np.argsort(u)
    us = u[order]
    j = np.arange(k, m0 + 1)
    j_star = int(j[np.argmax(j / us[k - 1:])])
    u_star = float(us[j_star - 1])
    zeros = max(math.ceil(m * u_star / q) - j_star, 0)
    if zeros > m - m0:
        return AdversarialDraw(None, j_star, u_star)
    rs = RejectionSet(np.concatenate([np.sort(order[:j_star]), m0 + np.arange(zeros)]), m, V=j_star)
    # Only the first m0 + zeros p-values and the first R cutoffs can matter.
    pvalues = np.concatenate([u, np.zeros(zeros)])
    if not is_compliant(rs, pvalues, q * np.arange(1, rs.R + 1) / m):
        raise AssertionError("adversarial construction produced a non-compliant rejection set")
    return AdversarialDraw(FdpRecord(j_star, rs.R), j_star, u_star)


# -- experiment runner ------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """One simulation study.

    ``m`` is the number of hypotheses for ``normal``, ``student`` and
    ``adversarial``, and the number of pairs for ``block``. ``m1_values`` is
    the grid of non-null counts (for ``adversarial``: ``m - m0``) and
    ``rhos`` the grid of correlations for ``block``.
    """

    example: str
    m: int = 1000
    m1_values: tuple = (50, 150, 250, 350, 500)
    rhos: tuple = (-1.0, -0.7, -0.4, -0.1)
    q: float = 0.1
    reps: int = 100
    alternatives: tuple = ALTERNATIVES
    mu: float = 2.0
    mu_tilde: float = 1.5
    n: int = 10
    ks: tuple = (1, 2, 5)
    seed: int = 0

    def __post_init__(self):
        if self.example not in EXAMPLES:
            raise ParameterError(f"example must be one of {EXAMPLES}")
        if not 0 < self.q < 1:
            raise ParameterError("q must lie in (0, 1)")
        if self.reps < 1:
            raise ParameterError("reps must be at least 1")
        self.alternatives = tuple(_check_alternative(a) for a in self.alternatives)
        if self.example == "block":
            if any(not -1 <= r <= 1 for r in self.rhos):
                raise ParameterError("rho must lie in [-1, 1]")
        else:
            if any(not 1 <= m1 <= self.m - 1 for m1 in self.m1_values):
                raise ParameterError(f"every m1 must lie in [1, m - 1] with m={self.m}")
        if self.example == "student" and self.n < 2:
            raise ParameterError("n must be at least 2")
        if self.example == "adversarial" and min(self.ks) < 2:
            raise ParameterError("the adversarial study needs k >= 2")

    def grid(self) -> list[float]:
        return list(self.rhos) if self.example == "block" else list(self.m1_values)


@dataclass(frozen=True)
class ExperimentRow:
    example: str
    m: int
    m1_or_rho: float
    alternative: str
    k: int
    fdr_hat: float
    stderr: float
    bound: float
    pi0: float


CSV_COLUMNS = ("example", "m", "m1_or_rho", "alternative", "k", "fdr_hat", "stderr", "bound")


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list[ExperimentRow] = field(default_factory=list)
    infeasible: dict = field(default_factory=dict)

    def get(self, point, alternative: str, k: int) -> ExperimentRow:
        for r in self.rows:
            if r.m1_or_rho == point and r.alternative == alternative and r.k == k:
                return r
        raise KeyError((point, alternative, k))

    def write_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.rows:
            writer.writerow([r.example, r.m, f"{r.m1_or_rho:.12g}", r.alternative, r.k,
                             f"{r.fdr_hat:.12g}", f"{r.stderr:.12g}", f"{r.bound:.12g}"])


def _bound(k: int, pi0: float, q: float) -> float:
    return bound_fdr_upper_k(1, q) if k == 1 else bound_fdr_k(k, pi0, q)


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    if x.size and x.min() == x.max():
        # Constant samples: report the value itself, not a rounded mean.
        return float(x[0]), 0.0
    se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return float(x.mean()), se


def _bhq_point(cfg: ExperimentConfig, point, seed_seq) -> tuple[list[ExperimentRow], int]:
    rngs = [np.random.default_rng(s) for s in seed_seq.spawn(cfg.reps)]
    VR = {a: np.zeros((cfg.reps, 2), dtype=int) for a in cfg.alternatives}
    for r, rng in enumerate(rngs):
        if cfg.example == "normal":
            stats, is_null = gen_normal_example(cfg.m, int(point), cfg.mu, rng)
        elif cfg.example == "student":
            stats, is_null = gen_student_example(cfg.m, int(point), cfg.mu, cfg.n, rng)
        else:
            stats, is_null = gen_block_example(cfg.m, cfg.mu_tilde, float(point), rng)
        for alt in cfg.alternatives:
            if cfg.example == "student":
                p, _ = t_pvalues(stats, cfg.n - 1, alt, nu=1.0 / stats.size**1.5)
            else:
                p = z_pvalues(stats, alt)
            rs = bhq_step_up(p, cfg.q, is_null)
            VR[alt][r] = rs.V, rs.R
    pi0 = float(is_null.mean())
    rows = []
    for alt in cfg.alternatives:
        V, R = VR[alt][:, 0], VR[alt][:, 1]
        for k in cfg.ks:
            mean, se = _mean_se(fdp_k_array(V, R, k))
            rows.append(ExperimentRow(cfg.example, cfg.m, float(point), alt, int(k), mean, se,
                                      _bound(k, pi0, cfg.q), pi0))
    return rows, 0


def _adversarial_point(cfg: ExperimentConfig, point, seed_seq) -> tuple[list[ExperimentRow], int]:
    m1 = int(point)
    m0 = cfg.m - m1
    pi0 = m0 / cfg.m
    rows = []
    infeasible = 0
    for k, ss in zip(cfg.ks, seed_seq.spawn(len(cfg.ks))):
        vals = []
        for s in ss.spawn(cfg.reps):
            draw = adversarial_compliant(cfg.m, m0, int(k), cfg.q, np.random.default_rng(s))
            if draw.feasible:
                vals.append(draw.record.fdp_k(k))
            else:
                infeasible += 1
        mean, se = _mean_se(np.array(vals)) if vals else (math.nan, math.nan)
        rows.append(ExperimentRow(cfg.example, cfg.m, float(m1), "na", int(k), mean, se,
                                  bound_fdr_k(k, pi0, cfg.q), pi0))
    return rows, infeasible


def run_experiment(config: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    """Estimate ``FDR_k`` of BHq step-up (or of the adversarial procedure).

    Every grid point gets its own child seed and every replicate a grandchild,
    so the output is fixed by ``config.seed`` regardless of ``threads``.
    """
    grid = config.grid()
    seeds = as_seed_sequence(config.seed).spawn(len(grid))
    work = _adversarial_point if config.example == "adversarial" else _bhq_point
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda a: work(config, *a), zip(grid, seeds)))
    else:
        parts = [work(config, p, s) for p, s in zip(grid, seeds)]
    result = ExperimentResult(config)
    for point, (rows, bad) in zip(grid, parts):
        result.rows.extend(rows)
        if bad:
            result.infeasible[point] = bad
            logger.warning("%d infeasible adversarial replicates at m1=%s", bad, point)
    return result
