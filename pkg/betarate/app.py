"""
Command-line front end and the closed-form versus Monte Carlo benchmark.

Every subcommand prints one structured-text object on standard output:
`key=value` lines, or a JSON document with the same keys under `--json`.
Logs go to standard error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from typing_extensions import Protocol

from .bayes import (
    BetaPosterior,
    ComparisonResult,
    Method,
    decide,
    expected_payout,
    mc_oracle,
    posterior_from_counts,
    pr_rate_greater,
    pr_scaled_rate_greater,
)
from .datasets import generate_cases, read_outcomes, read_samples
from .errors import BetarateError, DomainError, require_int
from .exact_tests import (
    ContingencyTable,
    LikelihoodConvention,
    Tail,
    fisher_exact_p,
    fisher_table_probability,
    ks_two_sample,
    log_likelihood,
    wilks_test,
)
from .sequential import (
    Lift,
    Prefactor,
    SequentialConfig,
    design_sequential,
    power_bound,
    replay,
    significance_bound,
)

logger = logging.getLogger(__name__)

SEED_ENV = "BETARATE_SEED"
DEFAULT_SEED = 0
MIN_BENCH_SAMPLES = 1000

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

_SEED_MASK = (1 << 64) - 1


# ## Benchmark


@dataclass(frozen=True)
class BenchmarkCase:
    alpha_a: int
    beta_a: int
    alpha_b: int
    beta_b: int
    gamma: float
    closed_form: float
    mc_estimate: float
    closed_form_nanos: int
    mc_nanos: int

    @property
    def abs_diff(self) -> float:
        return abs(self.closed_form - self.mc_estimate)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "alpha_a": self.alpha_a,
            "beta_a": self.beta_a,
            "alpha_b": self.alpha_b,
            "beta_b": self.beta_b,
            "gamma": self.gamma,
            "closed_form": self.closed_form,
            "mc_estimate": self.mc_estimate,
            "closed_ns": self.closed_form_nanos,
            "mc_ns": self.mc_nanos,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> BenchmarkCase:
        return cls(
            int(d["alpha_a"]),
            int(d["beta_a"]),
            int(d["alpha_b"]),
            int(d["beta_b"]),
            float(d["gamma"]),
            float(d["closed_form"]),
            float(d["mc_estimate"]),
            int(d["closed_ns"]),
            int(d["mc_ns"]),
        )


_CASE_KEYS = (
    "alpha_a",
    "beta_a",
    "alpha_b",
    "beta_b",
    "gamma",
    "closed_form",
    "mc_estimate",
    "closed_ns",
    "mc_ns",
)
_HEADER_KEYS = ("method", "seed", "mc_samples")
_FOOTER_KEYS = ("mean_closed_ns", "mean_mc_ns", "speedup_orders", "max_abs_diff")


@dataclass(frozen=True)
class BenchmarkReport:
    """
    Outcome of `run_benchmark`.

    `speedup_orders_of_magnitude` is $\\log_{10}$ of the mean Monte Carlo time
    over the mean closed-form time, each floored at one nanosecond.
    """

    cases: Tuple[BenchmarkCase, ...]
    mean_closed_nanos: float
    mean_mc_nanos: float
    speedup_orders_of_magnitude: float
    max_abs_diff: float
    seed: int
    mc_samples: int
    method: str = Method.ClosedFormScaled.value

    @classmethod
    def from_cases(
        cls, cases: Sequence[BenchmarkCase], seed: int, mc_samples: int
    ) -> BenchmarkReport:
        if not cases:
            raise DomainError("A benchmark report needs at least one case.")
        mean_closed = sum(c.closed_form_nanos for c in cases) / len(cases)
        mean_mc = sum(c.mc_nanos for c in cases) / len(cases)
        return cls(
            tuple(cases),
            mean_closed,
            mean_mc,
            math.log10(max(mean_mc, 1.0) / max(mean_closed, 1.0)),
            max(c.abs_diff for c in cases),
            seed,
            mc_samples,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "seed": self.seed,
            "mc_samples": self.mc_samples,
            "cases": [c.to_dict() for c in self.cases],
            "mean_closed_ns": self.mean_closed_nanos,
            "mean_mc_ns": self.mean_mc_nanos,
            "speedup_orders": self.speedup_orders_of_magnitude,
            "max_abs_diff": self.max_abs_diff,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> BenchmarkReport:
        try:
            return cls(
                tuple(BenchmarkCase.from_dict(c) for c in d["cases"]),
                float(d["mean_closed_ns"]),
                float(d["mean_mc_ns"]),
                float(d["speedup_orders"]),
                float(d["max_abs_diff"]),
                int(d["seed"]),
                int(d["mc_samples"]),
                str(d["method"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise DomainError(f"Malformed benchmark report: {e}") from None

    def to_text(self) -> str:
        d = self.to_dict()
        lines = [f"{k}={_format_value(d[k])}" for k in _HEADER_KEYS]
        for i, case in enumerate(d["cases"]):
            lines.append(
                " ".join(["case", str(i)] + [_format_value(case[k]) for k in _CASE_KEYS])
            )
        lines += [f"{k}={_format_value(d[k])}" for k in _FOOTER_KEYS]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> BenchmarkReport:
        d: Dict[str, Any] = {"cases": []}
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            if line.startswith("case "):
                parts = line.split()
                if len(parts) != 2 + len(_CASE_KEYS) or parts[1] != str(len(d["cases"])):
                    raise DomainError(f"line {lineno}: malformed case record {line!r}")
                d["cases"].append(dict(zip(_CASE_KEYS, parts[2:])))
            else:
                key, sep, value = line.partition("=")
                if not sep:
                    raise DomainError(f"line {lineno}: expected key=value, got {line!r}")
                d[key] = value
        return cls.from_dict(d)


class CaseLogger(Protocol):
    def __call__(self, index: int, case: BenchmarkCase, /) -> None:
        ...


def default_log_fn(index: int, case: BenchmarkCase) -> None:
    logger.info(
        "case %d: A=(%d, %d) B=(%d, %d) gamma=%r closed=%.10f mc=%.10f diff=%.2e",
        index,
        case.alpha_a,
        case.beta_a,
        case.alpha_b,
        case.beta_b,
        case.gamma,
        case.closed_form,
        case.mc_estimate,
        case.abs_diff,
    )


def _case_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed & _SEED_MASK, index]).generate_state(1, np.uint64)[0])


def _warm_up(n_jobs: int) -> None:
    # first calls compile the numba kernels
    a, b = BetaPosterior(2, 3), BetaPosterior(3, 2)
    pr_scaled_rate_greater(a, b, 2.0, cross_check=False)
    mc_oracle(a, b, 2.0, 16, 0, n_jobs)


def run_benchmark(
    n_cases: int,
    mc_samples: int,
    seed: int,
    n_jobs: int = 1,
    log_fn: CaseLogger = default_log_fn,
) -> BenchmarkReport:
    """
    Time the closed form against the Monte Carlo oracle on random cases.

    Cases come from `generate_cases(n_cases, seed)`. Case `i` seeds its
    Monte Carlo run from `(seed, i)`, so the whole report apart from the
    timings is a function of the arguments. Each timing covers the
    computation only; a warm-up call is made first and not timed.

    Args:
        n_cases : number of cases
        mc_samples : Monte Carlo draws per case, at least 1000
        seed : 64-bit seed
        n_jobs : Monte Carlo threads
        log_fn : called with `(index, case)` after each case

    Returns:
        The `BenchmarkReport`.
    """
    n_cases = require_int("n_cases", n_cases, 1)
    mc_samples = require_int("mc_samples", mc_samples, MIN_BENCH_SAMPLES)
    params = generate_cases(n_cases, seed)
    _warm_up(n_jobs)
    cases: List[BenchmarkCase] = []
    for i, p in enumerate(params):
        a = BetaPosterior(p.alpha_a, p.beta_a)
        b = BetaPosterior(p.alpha_b, p.beta_b)
        start = time.perf_counter_ns()
        closed = pr_scaled_rate_greater(a, b, p.gamma, cross_check=False).probability
        closed_ns = time.perf_counter_ns() - start
        mc_seed = _case_seed(seed, i)
        start = time.perf_counter_ns()
        mc = mc_oracle(a, b, p.gamma, mc_samples, mc_seed, n_jobs).probability
        mc_ns = time.perf_counter_ns() - start
        case = BenchmarkCase(
            p.alpha_a, p.beta_a, p.alpha_b, p.beta_b, p.gamma, closed, mc, closed_ns, mc_ns
        )
        log_fn(i, case)
        cases.append(case)
    return BenchmarkReport.from_cases(cases, seed, mc_samples)


# ## Structured text


def _format_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit(record: Mapping[str, Any]) -> str:
    "`key=value` lines, floats in shortest round-trip form."
    return "".join(f"{k}={_format_value(v)}\n" for k, v in record.items())


def parse(text: str) -> Dict[str, str]:
    "Inverse of `emit`, values left as strings."
    out = {}
    for line in text.splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            out[key] = value
    return out


Output = Union[Dict[str, Any], BenchmarkReport]


def _render(out: Output, as_json: bool) -> str:
    if isinstance(out, BenchmarkReport):
        return json.dumps(out.to_dict()) + "\n" if as_json else out.to_text()
    return json.dumps(out) + "\n" if as_json else emit(out)


# ## Subcommands


def _posteriors(args: argparse.Namespace) -> Tuple[BetaPosterior, BetaPosterior]:
    return (
        posterior_from_counts(args.a_wins, args.a_losses),
        posterior_from_counts(args.b_wins, args.b_losses),
    )


def _comparison_record(r: ComparisonResult) -> Dict[str, Any]:
    return {
        "method": r.method.value,
        "probability": r.probability,
        "terms_evaluated": r.terms_evaluated,
        "cancellation_flag": r.cancellation_flag,
    }


def _cmd_compare(args: argparse.Namespace) -> Output:
    a, b = _posteriors(args)
    out = _comparison_record(pr_rate_greater(a, b))
    out["expected_payout_a"] = expected_payout(a)
    out["expected_payout_b"] = expected_payout(b)
    return out


def _cmd_compare_scaled(args: argparse.Namespace) -> Output:
    a, b = _posteriors(args)
    out = _comparison_record(pr_scaled_rate_greater(a, b, args.gamma))
    out["gamma"] = args.gamma
    out["expected_payout_a"] = expected_payout(a, args.gamma)
    out["expected_payout_b"] = expected_payout(b)
    out["decision"] = decide(a, b, args.gamma, args.threshold).value
    return out


def _cmd_mc(args: argparse.Namespace) -> Output:
    a, b = _posteriors(args)
    out = _comparison_record(mc_oracle(a, b, args.gamma, args.samples, args.seed, args.jobs))
    out["gamma"] = args.gamma
    out["seed"] = args.seed
    return out


def _cmd_fisher(args: argparse.Namespace) -> Output:
    t = ContingencyTable(args.a_wins, args.a_losses, args.b_wins, args.b_losses)
    tail = Tail(args.tail)
    return {
        "tail": tail.value,
        "p_value": fisher_exact_p(t, tail),
        "table_probability": fisher_table_probability(t),
        "log_likelihood": log_likelihood(t, LikelihoodConvention.Factorial),
    }


def _cmd_ks(args: argparse.Namespace) -> Output:
    r = ks_two_sample(read_samples(args.samples_a), read_samples(args.samples_b), args.alpha)
    return {
        "alpha": args.alpha,
        "d_stat": r.d_stat,
        "threshold": r.threshold,
        "reject": r.reject,
        "m_a": r.m_a,
        "m_b": r.m_b,
    }


def _cmd_wilks(args: argparse.Namespace) -> Output:
    r = wilks_test(args.ell_h1, args.ell_h0, args.dof)
    return {"d_stat": r.d_stat, "p_value": r.p_value, "dof": args.dof}


def _cmd_sequential(args: argparse.Namespace) -> Output:
    config = SequentialConfig(args.n, args.d_star)
    outcomes = read_outcomes(args.outcomes)
    state = replay(config, outcomes)
    return {
        "n_max": config.n_max,
        "d_star": config.d_star,
        "status": state.status.value,
        "t_wins": state.t_wins,
        "c_wins": state.c_wins,
        "d": state.d,
        "n_tot": state.n_tot,
        "consumed": state.n_tot,
        "unconsumed": len(outcomes) - state.n_tot,
    }


def _cmd_design(args: argparse.Namespace) -> Output:
    lift = Lift(args.lift)
    prefactor = Prefactor(args.prefactor)
    config = design_sequential(args.alpha, args.beta, lift, prefactor)
    return {
        "n_max": config.n_max,
        "d_star": config.d_star,
        "prefactor": prefactor.value,
        "significance": significance_bound(config.n_max, config.d_star, prefactor),
        "power": power_bound(config.n_max, config.d_star, lift, prefactor),
    }


def _cmd_bench(args: argparse.Namespace) -> Output:
    return run_benchmark(args.cases, args.samples, args.seed, args.jobs)


def _add_counts(p: argparse.ArgumentParser) -> None:
    for flag in ("--a-wins", "--a-losses", "--b-wins", "--b-losses"):
        p.add_argument(flag, type=int, required=True)


def _jobs(text: str) -> int:
    n = int(text)
    if n == 0 or n < -1:
        raise argparse.ArgumentTypeError(f"expected a thread count or -1, got {text}")
    return n


def _add_seed(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--seed", type=int, default=None, help=f"64-bit seed (default: ${SEED_ENV} or {DEFAULT_SEED})"
    )
    p.add_argument("--jobs", type=_jobs, default=1, help="Monte Carlo threads, -1 for every core")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="betarate",
        description="Exact Bayesian comparison of two beta-binomial rate processes.",
    )
    parser.add_argument("--json", action="store_true", help="emit one JSON document")
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG logs"
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("compare", help="Pr(rate B > rate A)")
    _add_counts(p)
    p.set_defaults(handler=_cmd_compare)

    p = sub.add_parser("compare-scaled", help="Pr(rate B > gamma * rate A)")
    _add_counts(p)
    p.add_argument("--gamma", type=float, required=True, help="payout of A over payout of B")
    p.add_argument("--threshold", type=float, default=0.95, help="decision threshold")
    p.set_defaults(handler=_cmd_compare_scaled)

    p = sub.add_parser("mc", help="Monte Carlo estimate of the scaled comparison")
    _add_counts(p)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=10**6)
    _add_seed(p)
    p.set_defaults(handler=_cmd_mc)

    p = sub.add_parser("fisher", help="Fisher's exact test on the 2x2 table")
    _add_counts(p)
    p.add_argument("--tail", choices=[t.value for t in Tail], default=Tail.TwoSidedMinLikelihood.value)
    p.set_defaults(handler=_cmd_fisher)

    p = sub.add_parser("ks", help="two-sample Kolmogorov-Smirnov test")
    p.add_argument("samples_a", help="file with one real per line")
    p.add_argument("samples_b", help="file with one real per line")
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(handler=_cmd_ks)

    p = sub.add_parser("wilks", help="likelihood-ratio test of nested models")
    p.add_argument("--ell-h1", type=float, required=True)
    p.add_argument("--ell-h0", type=float, required=True)
    p.add_argument("--dof", type=int, required=True)
    p.set_defaults(handler=_cmd_wilks)

    p = sub.add_parser("sequential", help="replay an outcome file through a sequential test")
    p.add_argument("outcomes", help="file of T/C tokens")
    p.add_argument("--n", type=int, required=True, help="success budget N")
    p.add_argument("--d-star", type=int, default=None, help="win margin (default ceil(2 sqrt N))")
    p.set_defaults(handler=_cmd_sequential)

    p = sub.add_parser("design", help="sequential design for given significance and power")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--lift", type=float, required=True)
    p.add_argument("--prefactor", choices=[f.value for f in Prefactor], default=Prefactor.Margin.value)
    p.set_defaults(handler=_cmd_design)

    p = sub.add_parser("bench", help="closed form versus Monte Carlo benchmark")
    p.add_argument("--cases", type=int, default=10)
    p.add_argument("--samples", type=int, default=10**7)
    _add_seed(p)
    p.set_defaults(handler=_cmd_bench)
    return parser


def _env_seed(parser: argparse.ArgumentParser) -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        parser.error(f"${SEED_ENV} must be an integer, got {raw!r}")
        raise


def _configure_logging(verbosity: int) -> None:
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def cli_dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one subcommand and print its result.

    Returns:
        0 on success, 1 when the computation fails, 2 on a usage error.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "seed", 0) is None:
            args.seed = _env_seed(parser)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    _configure_logging(args.verbose)
    try:
        out = args.handler(args)
    except (BetarateError, OSError) as e:
        logger.debug("%s failed", args.command, exc_info=True)
        print(f"betarate {args.command}: error: {e}", file=sys.stderr)
        return EXIT_FAILURE
    sys.stdout.write(_render(out, args.json))
    return EXIT_OK


def main() -> None:
    sys.exit(cli_dispatch())
