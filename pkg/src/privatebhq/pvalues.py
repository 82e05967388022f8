"""P-values on databases, their multiplicative sensitivity, and the log transform.

Two p-value families are provided:

* ``binomial``: one-sided test of ``P(d_ij = 1) <= 1/2`` on binary data, with
  the exact upper binomial tail evaluated in log space.
* ``truncexp``: upper tail of the column sum under a unit-rate exponential law
  truncated at a public bound ``A`` (small values point to a rate below 1).
  The tail is integrated exactly for ``n <= 40`` and by a Lugannani-Rice
  saddlepoint approximation above that.

A family is ``(eta, nu)``-sensitive when, for every pair of adjacent databases,
either both p-values are at most ``nu`` or their ratio lies in
``[exp(-eta), exp(eta)]``. ``log_truncate`` maps p-values to
``log(max(nu, p))``, whose additive sensitivity is then at most ``eta``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
from scipy import special

from .errors import DomainError, NumericalError, ParameterError

Domain = Literal["binary", "bounded"]


@dataclass(frozen=True)
class Dataset:
    """An ``n x m`` table: one row per individual, one column per hypothesis.

    ``bound`` is the public upper limit ``A`` of the bounded-real domain and
    must be ``None`` for binary data.
    """

    values: np.ndarray
    domain: Domain = "binary"
    bound: float | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ParameterError(f"dataset must be a non-empty 2-d array, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DomainError("dataset contains non-finite entries")
        if self.domain == "binary":
            if self.bound is not None:
                raise ParameterError("binary datasets take no bound")
            if not np.all((values == 0) | (values == 1)):
                raise DomainError("binary dataset entries must be 0 or 1")
        elif self.domain == "bounded":
            if self.bound is None or not self.bound > 0:
                raise ParameterError("bounded datasets need a bound A > 0")
            if values.min() < 0 or values.max() > self.bound:
                raise DomainError(f"bounded dataset entries must lie in [0, {self.bound}]")
        else:
            raise ParameterError(f"unknown domain {self.domain!r}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def column_sums(self) -> np.ndarray:
        return self.values.sum(axis=0)

    def replace_row(self, i: int, row) -> Dataset:
        """Return the adjacent dataset with row ``i`` swapped for ``row``."""
        values = self.values.copy()
        values[i] = row
        return Dataset(values, self.domain, self.bound)

    def is_adjacent(self, other: Dataset) -> bool:
        """True iff the two tables differ in exactly one row (bitwise)."""
        if self.values.shape != other.values.shape:
            return False
        a = np.ascontiguousarray(self.values).view(np.uint64)
        b = np.ascontiguousarray(other.values).view(np.uint64)
        return int(np.any(a != b, axis=1).sum()) == 1


def read_dataset(path) -> Dataset:
    """Read the CSV dataset format.

    The first line holds ``n,m,domain`` (plus ``A`` for ``bounded``); the next
    ``n`` lines hold ``m`` comma-separated values each.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ParameterError(f"{path}: empty dataset file")
    head = [c.strip() for c in rows[0]]
    try:
        n, m = int(head[0]), int(head[1])
        domain = head[2]
        bound = float(head[3]) if domain == "bounded" else None
    except (IndexError, ValueError) as exc:
        raise ParameterError(f"{path}: bad header line {rows[0]!r}, expected n,m,domain[,A]") from exc
    body = rows[1:]
    if len(body) != n:
        raise ParameterError(f"{path}: header says n={n} rows, found {len(body)}")
    try:
        values = np.array([[float(c) for c in r] for r in body])
    except ValueError as exc:
        raise DomainError(f"{path}: non-numeric entry ({exc})") from exc
    if values.shape != (n, m):
        raise ParameterError(f"{path}: expected {m} columns per row")
    return Dataset(values, domain, bound)


def write_dataset(dataset: Dataset, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        head = [dataset.n, dataset.m, dataset.domain]
        if dataset.domain == "bounded":
            head.append(repr(dataset.bound))
        writer.writerow(head)
        if dataset.domain == "binary":
            writer.writerows(dataset.values.astype(int).tolist())
        else:
            writer.writerows([[repr(float(x)) for x in row] for row in dataset.values])


@dataclass(frozen=True)
class SensitivityProfile:
    """Multiplicative sensitivity ``(eta, nu)`` of a p-value family.

    ``method`` records whether ``eta`` came from an exhaustive (``"exact"``) or
    a gridded (``"numeric"``) scan.
    """

    eta: float
    nu: float
    method: str = "exact"
    family: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.eta >= 0:
            raise ParameterError("eta must be nonnegative")
        if not 0 <= self.nu < 1:
            raise ParameterError("nu must lie in [0, 1)")

    def admits(self, p: float, p_adjacent: float) -> bool:
        """Check the sensitivity condition for one adjacent pair of p-values."""
        if p <= self.nu and p_adjacent <= self.nu:
            return True
        if p <= 0 or p_adjacent <= 0:
            return False
        return abs(math.log(p) - math.log(p_adjacent)) <= self.eta * (1 + 1e-12)


def default_nu(m: int, c: float = 0.5) -> float:
    """Truncation floor ``m ** (-1 - c)``, well below the Bonferroni level."""
    if m < 1 or c < 0:
        raise ParameterError("need m >= 1 and c >= 0")
    return float(m) ** (-1.0 - c)


def log_truncate(p, nu):
    """``log(max(nu, p))`` elementwise."""
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ParameterError("p-values must lie in [0, 1]")
    if not 0 < nu < 1:
        raise ParameterError("nu must lie in (0, 1)")
    out = np.log(np.maximum(nu, p))
    return float(out) if out.ndim == 0 else out


# -- binomial family ---------------------------------------------------------


def binomial_log_tails(n: int) -> np.ndarray:
    """``log P(Bin(n, 1/2) >= t)`` for ``t = 0, ..., n``.

    Summed in log space from the top so tails down to ``2**-n`` keep full
    relative precision.
    """
    if n < 1:
        raise ParameterError("n must be a positive integer")
    i = np.arange(n + 1)
    log_pmf = special.gammaln(n + 1) - special.gammaln(i + 1) - special.gammaln(n - i + 1) - n * math.log(2)
    tails = np.logaddexp.accumulate(log_pmf[::-1])[::-1]
    tails[0] = 0.0
    return np.minimum(tails, 0.0)


def binomial_tail(t, n: int):
    """``P(Bin(n, 1/2) >= t)`` for integer ``t`` (vectorized)."""
    t = np.asarray(t)
    if np.any(t != np.round(t)):
        raise DomainError("binomial statistic must be an integer")
    t = t.astype(int)
    logs = binomial_log_tails(n)
    out = np.where(t <= 0, 1.0, np.where(t > n, 0.0, np.exp(logs[np.clip(t, 0, n)])))
    return float(out) if out.ndim == 0 else out


def _require(dataset: Dataset, domain: str) -> None:
    if dataset.domain != domain:
        raise DomainError(f"test needs a {domain} dataset, got {dataset.domain}")


def binomial_pvalue(dataset: Dataset, hypothesis: int) -> float:
    """Exact one-sided binomial p-value for column ``hypothesis`` (0-based)."""
    _require(dataset, "binary")
    t = int(round(dataset.values[:, hypothesis].sum()))
    return binomial_tail(t, dataset.n)


def binomial_pvalues(dataset: Dataset) -> np.ndarray:
    _require(dataset, "binary")
    return binomial_tail(np.rint(dataset.column_sums()).astype(int), dataset.n)


def sensitivity_scan_binomial(n: int, nu: float) -> SensitivityProfile:
    """Smallest ``eta`` making the binomial family ``(eta, nu)``-sensitive.

    Adjacent databases move the column sum by at most one, so the scan runs
    over the pairs ``(t, t + 1)`` with ``0 <= t < n`` and skips pairs whose
    p-values both sit at or below ``nu``.
    """
    if n < 1:
        raise ParameterError("n must be a positive integer")
    if not 0 <= nu < 1:
        raise ParameterError("nu must lie in [0, 1)")
    logs = binomial_log_tails(n)
    hi, lo = logs[:-1], logs[1:]
    live = hi > math.log(nu) if nu > 0 else np.ones_like(hi, dtype=bool)
    eta = float(np.max(hi[live] - lo[live])) if live.any() else 0.0
    return SensitivityProfile(eta, nu, "exact", "binomial")


# -- truncated exponential family --------------------------------------------

_SERIES = 1e-4


def _tilted_mean(s, A):
    """Mean of the density proportional to ``exp(-s x)`` on ``[0, A]``."""
    s = np.asarray(s, dtype=float)
    x = s * A
    small = np.abs(x) < _SERIES
    xs = np.where(small, 1.0, x)
    with np.errstate(over="ignore"):
        exact = A * (1.0 / xs - 1.0 / np.expm1(xs))
    series = A * (0.5 - x / 12.0)
    return np.where(small, series, exact)


def _tilted_var(s, A):
    s = np.asarray(s, dtype=float)
    x = s * A
    small = np.abs(x) < _SERIES
    xs = np.where(small, 1.0, x)
    with np.errstate(over="ignore"):
        exact = A**2 * (1.0 / xs**2 - 0.25 / np.sinh(0.5 * xs) ** 2)
    series = A**2 * (1.0 / 12.0 - x**2 / 240.0)
    return np.where(small, series, exact)


def _log_mass(s, A):
    """``log of integral_0^A exp(-s x) dx``."""
    s = np.asarray(s, dtype=float)
    x = s * A
    small = np.abs(x) < _SERIES
    xs = np.where(small, 1.0, x)
    pos = np.log(-np.expm1(-np.abs(xs))) - np.log(np.abs(xs))
    # For s < 0 the integral is exp(|x|) (1 - exp(-|x|)) / |s|.
    exact = np.log(A) + np.where(xs > 0, pos, np.abs(xs) + pos)
    series = np.log(A) - x / 2.0 + x**2 / 24.0
    return np.where(small, series, exact)


def _truncexp_cgf(theta, A):
    """Cumulant generating function of a unit exponential truncated at ``A``."""
    theta = np.asarray(theta, dtype=float)
    return _log_mass(1.0 - theta, A) - _log_mass(1.0, A)


def _solve_saddlepoint(a, A, *, tol=1e-13, max_iter=200):
    """Solve ``cgf'(theta) = a`` for each ``a`` in ``(0, A)``.

    Works in ``s = 1 - theta``, where the tilted mean is decreasing and
    ``[-1/(A - a), 1/a]`` brackets the root; Newton steps that leave the
    bracket are replaced by bisection.
    """
    a = np.asarray(a, dtype=float)
    lo = -1.0 / (A - a)
    hi = 1.0 / a
    s = np.clip(1.0 / np.maximum(a, 1e-300) - 1.0 / np.maximum(A - a, 1e-300), lo, hi)
    done = np.zeros(a.shape, dtype=bool)
    for _ in range(max_iter):
        f = _tilted_mean(s, A) - a
        lo = np.where(f > 0, s, lo)
        hi = np.where(f <= 0, s, hi)
        step = f / _tilted_var(s, A)
        cand = s + step
        bad = ~np.isfinite(cand) | (cand <= lo) | (cand >= hi)
        new = np.where(bad, 0.5 * (lo + hi), cand)
        scale = np.maximum(1.0, np.abs(new))
        done = np.abs(new - s) <= tol * scale
        s = new
        if done.all():
            break
    else:
        resid = np.abs(_tilted_mean(s, A) - a)
        worst = int(np.argmax(np.where(done, -1.0, resid)))
        raise NumericalError(
            f"saddlepoint solve did not converge for {int((~done).sum())} point(s); "
            f"worst a={float(a.flat[worst])!r}, A={A}, residual={float(resid.flat[worst]):.3g}"
        )
    return 1.0 - s


def _truncexp_moments(A):
    """Mean, variance and third cumulant of the untilted law."""
    base = -math.expm1(-A)
    raw = [special.gammainc(k + 1, A) * math.gamma(k + 1) / base for k in (1, 2, 3)]
    mu = raw[0]
    var = raw[1] - mu**2
    k3 = raw[2] - 3 * mu * raw[1] + 2 * mu**3
    return mu, var, k3


EXACT_TAIL_MAX_N = 40
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)


def _irwin_hall_pdf(u: np.ndarray, n: int) -> np.ndarray:
    """Density of a sum of ``n`` standard uniforms.

    Uses the reflection ``f(u) = f(n - u)`` so the alternating sum only runs
    over ``k < min(u, n - u)``, which keeps cancellation mild for ``n <= 40``.
    """
    y = np.clip(np.minimum(u, n - u), 0.0, None)
    k = np.arange((n + 1) // 2 + 1)
    log_coef = special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1) - special.gammaln(n)
    d = y[..., None] - k
    pos = d > 0
    terms = np.where(pos, np.exp(log_coef + (n - 1) * np.log(np.where(pos, d, 1.0))), 0.0)
    return (terms * (-1.0) ** k).sum(axis=-1)


def _piece_integrals(lo: np.ndarray, hi: np.ndarray, n: int, A: float) -> np.ndarray:
    """``int_lo^hi exp(-A (u - lo)) f(u) du`` where ``[lo, hi]`` sits in one unit cell."""
    half = 0.5 * (hi - lo)
    u = (lo + half)[:, None] + half[:, None] * _GL_NODES
    vals = np.exp(-A * (u - lo[:, None])) * _irwin_hall_pdf(u, n)
    return half * (vals @ _GL_WEIGHTS)


def _truncexp_tail_exact(t: np.ndarray, n: int, A: float) -> np.ndarray:
    """Exact tail by quadrature for moderate ``n``.

    ``exp(-sum x)`` is constant on the slice ``sum x = s`` of the cube
    ``[0, A]^n``, so ``T`` has density
    ``exp(-s) A^(n-1) f(s / A) / (1 - exp(-A))^n`` with ``f`` the Irwin-Hall
    density. The integrand is positive and a polynomial times an exponential
    on each unit cell of ``s / A``, where Gauss-Legendre is essentially exact.
    """
    u0 = t / A
    cell = np.minimum(np.floor(u0), n - 1).astype(int)
    partial = _piece_integrals(u0, cell + 1.0, n, A)
    starts = np.arange(n, dtype=float)
    full = _piece_integrals(starts, starts + 1.0, n, A)
    # Whole cells above the one holding u0, discounted back to u0.
    later = starts[None, :] > cell[:, None]
    disc = np.where(later, np.exp(-A * np.maximum(starts[None, :] - u0[:, None], 0.0)), 0.0)
    total = partial + disc @ full
    log_scale = -A * u0 + n * math.log(A) - n * math.log(-math.expm1(-A))
    return np.minimum(np.exp(log_scale) * total, 1.0)


def truncexp_tail(t, n: int, A: float):
    """``P(T >= t)`` for ``T`` a sum of ``n`` unit exponentials truncated at ``A``.

    For ``n <= EXACT_TAIL_MAX_N`` the tail is integrated exactly (see
    ``_truncexp_tail_exact``). Larger ``n`` use the Lugannani-Rice saddlepoint
    approximation; within ``1e-8`` of the mean the saddlepoint degenerates and
    a skewness-corrected normal approximation is used instead. The law is
    continuous, so ``t = n A`` gives 0.
    """
    if n < 1:
        raise ParameterError("n must be a positive integer")
    if not A > 0:
        raise ParameterError("A must be positive")
    t = np.asarray(t, dtype=float)
    top = n * A
    if np.any(t < 0) or np.any(t > top * (1 + 1e-12)):
        raise DomainError(f"statistic must lie in [0, n*A] = [0, {top}]")
    out = np.ones(t.shape)
    out[t >= top] = 0.0
    inside = (t > 0) & (t < top)
    if not inside.any():
        return float(out) if out.ndim == 0 else out
    if n <= EXACT_TAIL_MAX_N:
        out[inside] = _truncexp_tail_exact(t[inside], n, A)
        return float(out) if out.ndim == 0 else out

    a = t[inside] / n
    theta = _solve_saddlepoint(a, A)
    kappa = _truncexp_cgf(theta, A)
    var = _tilted_var(1.0 - theta, A)

    mu, sigma2, k3 = _truncexp_moments(A)
    near = np.abs(theta) < 1e-8
    th = np.where(near, 1.0, theta)
    w = np.sign(th) * np.sqrt(np.maximum(2 * n * (th * a - kappa), 0.0))
    w = np.where(w == 0, np.sign(th) * 1e-300, w)
    u = th * np.sqrt(n * var)
    lr = special.ndtr(-w) + np.exp(-0.5 * w**2) / math.sqrt(2 * math.pi) * (1.0 / u - 1.0 / w)

    z = (n * a - n * mu) / math.sqrt(n * sigma2)
    skew = k3 / sigma2**1.5
    edge = special.ndtr(-z) + np.exp(-0.5 * z**2) / math.sqrt(2 * math.pi) * skew * (z**2 - 1) / (6 * math.sqrt(n))

    tail = np.where(near, edge, lr)
    out[inside] = np.clip(tail, np.finfo(float).tiny, 1.0)
    return float(out) if out.ndim == 0 else out


def truncexp_pvalue(dataset: Dataset, hypothesis: int) -> float:
    """Upper-tail p-value for column ``hypothesis`` (0-based) of bounded data."""
    _require(dataset, "bounded")
    t = float(dataset.values[:, hypothesis].sum())
    return truncexp_tail(min(t, dataset.n * dataset.bound), dataset.n, dataset.bound)


def truncexp_pvalues(dataset: Dataset) -> np.ndarray:
    _require(dataset, "bounded")
    t = np.minimum(dataset.column_sums(), dataset.n * dataset.bound)
    return np.atleast_1d(truncexp_tail(t, dataset.n, dataset.bound))


def sensitivity_scan_truncexp(n: int, A: float, nu: float, steps_per_bound: int = 1000) -> SensitivityProfile:
    """Gridded estimate of ``eta`` for the truncated-exponential family.

    Replacing one row moves the column sum by at most ``A``; since the tail is
    decreasing, the extreme ratio for a given ``t`` is against ``t + A``. The
    scan evaluates ``t`` on a grid of step ``A / steps_per_bound`` and is not a
    proof, hence ``method="numeric"``. The top of the support has tail 0, so
    ``eta`` is infinite when the tail one step ``A`` below it still exceeds
    ``nu`` (for example ``n = 1``).
    """
    if not 0 < nu < 1:
        raise ParameterError("nu must lie in (0, 1)")
    total = n * steps_per_bound
    grid = np.linspace(0.0, n * A, total + 1)
    with np.errstate(divide="ignore"):
        logp = np.log(truncexp_tail(grid, n, A))
    hi = logp[:-steps_per_bound]
    lo = logp[steps_per_bound:]
    live = hi > math.log(nu)
    eta = float(np.max(hi[live] - lo[live])) if live.any() else 0.0
    return SensitivityProfile(eta, nu, "numeric", "truncexp")


PVALUE_FAMILIES = {
    "binomial": binomial_pvalues,
    "truncexp": truncexp_pvalues,
}


def pvalues_for(dataset: Dataset, test: str) -> np.ndarray:
    try:
        return PVALUE_FAMILIES[test](dataset)
    except KeyError:
        raise ParameterError(f"unknown test family {test!r}; choose from {sorted(PVALUE_FAMILIES)}") from None


def sensitivity_for(dataset: Dataset, test: str, nu: float) -> SensitivityProfile:
    if test == "binomial":
        return sensitivity_scan_binomial(dataset.n, nu)
    if test == "truncexp":
        _require(dataset, "bounded")
        return sensitivity_scan_truncexp(dataset.n, dataset.bound, nu)
    raise ParameterError(f"unknown test family {test!r}")
