"""Command-line entry point: ``privatebhq <subcommand> ...``.

Exit status is 0 on success, 2 for bad flags, files, or violated
preconditions, and 1 for numerical failures. Randomized subcommands echo
their seed to stderr.
"""

from __future__ import annotations

import argparse
import csv
import logging
import re
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from ._random import fresh_seed
from .errors import NumericalError, ParameterError
from .fdr import estimate_ck_many, write_ck_csv
from .mechanisms import NOISE_OFF, calibrate
from .procedures import bhq_step_down, bhq_step_up, gamma_cutoffs, private_bhq
from .pvalues import default_nu, read_dataset, sensitivity_for
from .simlab import ExperimentConfig, run_experiment

log = logging.getLogger("privatebhq")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _g(x: float) -> str:
    return f"{x:.12g}"


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


@contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with Path(path).open("w", newline="") as fh:
            yield fh


def _seed(args) -> int:
    seed = fresh_seed() if args.seed is None else args.seed
    if not 0 <= seed < 2**64:
        raise ParameterError("seed must be a 64-bit unsigned integer")
    print(f"seed={seed}", file=sys.stderr)
    return seed


def _indices(rejected) -> str:
    return " ".join(str(i + 1) for i in rejected)


def _read_pvalues(path):
    path = Path(path)
    if not path.is_file():
        raise ParameterError(f"input file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "p" not in reader.fieldnames:
            raise ParameterError(f"{path}: needs a column named 'p'")
        rows = list(reader)
    try:
        p = np.array([float(r["p"]) for r in rows])
        labels = None
        if "is_null" in reader.fieldnames:
            labels = np.array([int(r["is_null"]) for r in rows])
            if not np.isin(labels, (0, 1)).all():
                raise ValueError("is_null must be 0 or 1")
    except ValueError as exc:
        raise ParameterError(f"{path}: {exc}") from exc
    return p, None if labels is None else labels.astype(bool)


def cmd_bhq(args) -> None:
    p, is_null = _read_pvalues(args.input)
    fn = bhq_step_up if args.mode == "step-up" else bhq_step_down
    rs = fn(p, args.q, is_null)
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["R", "V", "rejected"])
        w.writerow([rs.R, "" if rs.V is None else rs.V, _indices(rs.rejected)])


def cmd_private_bhq(args) -> None:
    if not Path(args.input).is_file():
        raise ParameterError(f"input file not found: {args.input}")
    if not 0 < args.q < 1:
        raise ParameterError("--q must lie in (0, 1)")
    data = read_dataset(args.input)
    if args.mprime > data.m:
        raise ParameterError(f"--mprime {args.mprime} exceeds the number of hypotheses m={data.m}")
    nu = default_nu(data.m) if args.nu is None else args.nu
    if not 0 < nu < 1:
        raise ParameterError("--nu must lie in (0, 1)")
    profile = sensitivity_for(data, args.test, nu)
    eta = profile.eta if args.eta is None else args.eta
    budget = calibrate(args.epsilon, args.delta, args.mprime, eta)
    if not budget.in_theorem_regime:
        log.warning("parameters are outside epsilon<=0.5, delta<=0.1, m'>=10: no privacy guarantee is claimed")
    rng = np.random.default_rng(_seed(args))
    noise = NOISE_OFF if args.noise_off else None
    rs = private_bhq(data, args.test, args.q, budget, nu, rng, profile=profile, noise=noise)
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["R", "rejected", "threshold", "eta", "nu", "lambda"])
        w.writerow([rs.R, _indices(rs.rejected), _g(rs.threshold), _g(eta), _g(nu), _g(budget.lam)])


def cmd_budget(args) -> None:
    budget = calibrate(args.epsilon, args.delta, args.mprime, args.eta)
    gammas = gamma_cutoffs(args.q, args.m, budget)
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["j", "gamma", "epsilon", "delta", "m_prime", "eta", "lambda", "q", "m", "regime"])
        for j, g in enumerate(gammas, start=1):
            w.writerow([j, _g(g), _g(budget.epsilon), _g(budget.delta), budget.m_prime, _g(budget.eta),
                        _g(budget.lam), _g(args.q), args.m, budget.tag])


def cmd_ck_estimate(args) -> None:
    seed = _seed(args)
    est = estimate_ck_many(args.k, args.reps, args.jmax, seed, threads=args.threads)
    with _output(args.out) as fh:
        write_ck_csv(est, fh)


def cmd_simulate(args) -> None:
    seed = _seed(args)
    alts = ("one-sided", "two-sided") if args.alternative == "both" else (args.alternative,)
    kwargs = dict(example=args.example, q=args.q, reps=args.reps, alternatives=alts, mu=args.mu,
                  mu_tilde=args.mu_tilde, n=args.n, ks=tuple(args.k), seed=seed)
    if args.m is not None:
        kwargs["m"] = args.m
    elif args.example == "block":
        kwargs["m"] = 5000
    if args.m1 is not None:
        kwargs["m1_values"] = tuple(args.m1)
    if args.rho is not None:
        kwargs["rhos"] = tuple(args.rho)
    if args.example == "adversarial" and args.k == [1, 2, 5]:
        kwargs["ks"] = (2, 5)
    result = run_experiment(ExperimentConfig(**kwargs), threads=args.threads)
    for point, bad in result.infeasible.items():
        print(f"infeasible replicates at m1={point:g}: {bad}", file=sys.stderr)
    with _output(args.out) as fh:
        result.write_csv(fh)


_NUMBER_LIST = re.compile(r"-[0-9.]+(,-?[0-9.]+)*")


def _attach_negative_lists(argv: list[str]) -> list[str]:
    # argparse reads "--rho -1,-0.4" as two flags; glue such values on.
    out = []
    i = 0
    while i < len(argv):
        if argv[i] == "--rho" and i + 1 < len(argv) and _NUMBER_LIST.fullmatch(argv[i + 1]):
            out.append(f"--rho={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="privatebhq", description=__doc__.splitlines()[0])
    parser.add_argument("--threads", type=int, default=1, help="cap on worker threads")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("bhq", help="Benjamini-Hochberg on a p-value file")
    p.add_argument("--input", required=True, help="CSV with column p and optional is_null")
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--mode", choices=("step-up", "step-down"), default="step-up")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bhq)

    p = sub.add_parser("private-bhq", help="PrivateBHq on a dataset file")
    p.add_argument("--input", required=True)
    p.add_argument("--test", choices=("binomial", "truncexp"), required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--mprime", type=int, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--nu", type=float, help="truncation floor (default m**-1.5)")
    p.add_argument("--eta", type=float, help="override the scanned sensitivity (must not be smaller)")
    p.add_argument("--seed", type=int)
    p.add_argument("--noise-off", action="store_true", help="TESTING ONLY: disable noise (not private)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_private_bhq)

    p = sub.add_parser("budget", help="Laplace scale and gamma cutoffs")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--mprime", type=int, required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--q", type=float, default=0.1)
    p.add_argument("--m", type=int, default=100, help="total number of hypotheses")
    p.add_argument("--out")
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("ck-estimate", help="Monte Carlo estimates of C_k")
    p.add_argument("--k", type=_int_list, default=[2, 3, 4, 5, 10, 25])
    p.add_argument("--reps", type=int, default=10_000)
    p.add_argument("--jmax", type=int, default=100_000)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ck_estimate)

    p = sub.add_parser("simulate", help="FDR_k of BHq in the negative-dependence examples")
    p.add_argument("--example", choices=("normal", "student", "block", "adversarial"), required=True)
    p.add_argument("--m", type=int, help="hypotheses (pairs for block); default 1000, block 5000")
    p.add_argument("--m1", type=_int_list, help="comma-separated non-null counts")
    p.add_argument("--rho", type=_float_list, help="comma-separated correlations (block)")
    p.add_argument("--q", type=float, default=0.1)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--alternative", choices=("one", "two", "one-sided", "two-sided", "both"), default="both")
    p.add_argument("--mu", type=float, default=2.0)
    p.add_argument("--mu-tilde", type=float, default=1.5)
    p.add_argument("--n", type=int, default=10, help="sample size (student)")
    p.add_argument("--k", type=_int_list, default=[1, 2, 5])
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    try:
        argv = sys.argv[1:] if argv is None else list(argv)
        args = build_parser().parse_args(_attach_negative_lists(argv))
    except UsageError as exc:
        print(f"privatebhq: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="privatebhq: %(levelname)s: %(message)s")
    if args.threads < 1:
        print("privatebhq: error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        args.func(args)
    except (ParameterError, OSError) as exc:
        print(f"privatebhq: error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, FloatingPointError) as exc:
        print(f"privatebhq: numerical failure: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
