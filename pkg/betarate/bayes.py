"""
Bayesian comparison of two beta-binomial rate processes.

Each process is summarised by a Beta posterior built from its win/loss
counts. The closed forms below give the probability that process B has
the higher rate, or the higher expected payout when one of B's wins is
worth `1 / gamma` of one of A's.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Tuple, Union

import numba
import numpy as np
from joblib import Parallel, delayed

from .errors import (
    DomainError,
    SizeError,
    require_int,
    require_open_unit,
    require_positive,
)
from .operators import compensated_add
from .specfun import CANCELLATION_DIGITS, _hyp2f1_series, _ln_beta, _ln_binomial, _log_hyp2f1_jacobi

logger = logging.getLogger(__name__)

# Closed forms refuse posteriors whose summation bounds exceed this.
MAX_TERMS = 100_000
# Samples drawn per Monte Carlo work unit; fixed so results do not depend on n_jobs.
MC_BLOCK_SIZE = 1 << 16
# Relative disagreement between the series and Jacobi routes that gets logged.
CROSS_CHECK_RTOL = 1e-7
# Absolute error the double sum must stay under; a larger error bound raises its flag.
DOUBLE_SUM_ATOL = 1e-8
# Double sums up to this many terms are accumulated as exact rationals.
EXACT_DOUBLE_SUM_TERMS = 4096
_TERM_ULPS = 8.0 * 2.0**-52

_SEED_MASK = (1 << 64) - 1


class Method(enum.Enum):
    ClosedFormRate = "closed_form_rate"
    ClosedFormScaled = "closed_form_scaled"
    DoubleSum = "double_sum"
    MonteCarlo = "monte_carlo"


class Decision(enum.Enum):
    PreferB = "prefer_b"
    PreferA = "prefer_a"
    Undecided = "undecided"


@dataclass(frozen=True)
class BetaPosterior:
    """
    Beta(alpha, beta) posterior of a win rate under a uniform prior.

    Both parameters must be integers: the closed forms are finite sums whose
    bounds are `alpha` of B and `beta` of A.
    """

    alpha: int
    beta: int

    def __post_init__(self) -> None:
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise DomainError(
                    f"Posterior {name} must be an integer (wins + 1 or losses + 1), got {v!r}; "
                    "the closed forms are finite sums and need integer parameters."
                )
            object.__setattr__(self, name, require_int(name, v, 1))

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)


@dataclass(frozen=True)
class PayoutRatio:
    "Payout of one A win over the payout of one B win."

    gamma: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "gamma", require_positive("gamma", self.gamma))


@dataclass(frozen=True)
class ComparisonResult:
    """
    Attributes:
        probability : estimate of $Pr(\\phi_B > \\gamma \\phi_A)$ in [0, 1]
        method : how it was computed
        terms_evaluated : summands or samples behind the estimate
        cancellation_flag : the series cancelled more than 12 digits, or the
            floating-point double sum may be off by more than `DOUBLE_SUM_ATOL`
    """

    probability: float
    method: Method
    terms_evaluated: int
    cancellation_flag: bool = False


RatioLike = Union[PayoutRatio, float]


def _as_ratio(ratio: RatioLike) -> PayoutRatio:
    return ratio if isinstance(ratio, PayoutRatio) else PayoutRatio(ratio)


def _clip(p: float) -> float:
    return min(1.0, max(0.0, p))


def _check_size(name: str, v: int) -> None:
    if v > MAX_TERMS:
        raise SizeError(
            f"{name}={v} exceeds {MAX_TERMS}; the closed form would sum {v} terms."
        )


def posterior_from_counts(wins: int, losses: int) -> BetaPosterior:
    "Posterior after `wins` and `losses` under a uniform Beta(1, 1) prior."
    wins = require_int("wins", wins, 0)
    losses = require_int("losses", losses, 0)
    return BetaPosterior(wins + 1, losses + 1)


def expected_payout(posterior: BetaPosterior, payout: float = 1.0) -> float:
    "Posterior mean payout per trial, $payout \\cdot \\alpha / (\\alpha + \\beta)$."
    return float(payout) * posterior.mean


# ## Kernels


@numba.njit(cache=True)
def _rate_greater_sum(alpha_a: float, beta_a: float, alpha_b: int, beta_b: float) -> float:
    log_norm = _ln_beta(alpha_a, beta_a)
    total = 0.0
    comp = 0.0
    for i in range(1, alpha_b + 1):
        s = (
            _ln_beta(alpha_a - 1.0 + i, beta_b + beta_a)
            - math.log(beta_b - 1.0 + i)
            - _ln_beta(1.0 * i, beta_b)
            - log_norm
        )
        total, comp = compensated_add(total, comp, math.exp(s))
    return total + comp


@numba.njit(cache=True)
def _scaled_sum(
    alpha_a: int, beta_a: int, alpha_b: int, beta_b: int, gamma: float, cross_check: bool
) -> Tuple[float, float, float]:
    "Returns `(sum, worst digits lost in F, worst relative Jacobi disagreement)`."
    z = 1.0 / gamma
    log_c = -alpha_a * math.log(gamma) - _ln_beta(1.0 * alpha_a, 1.0 * beta_a)
    m = beta_a - 1
    use_jacobi = cross_check and beta_a >= 2 and beta_b >= beta_a
    total = 0.0
    comp = 0.0
    worst_lost = 0.0
    worst_gap = 0.0
    for i in range(alpha_b):
        a = 1.0 * (alpha_a + i)
        log_f, sign, lost = _hyp2f1_series(m, a, a + beta_b + 1.0, z, True)
        worst_lost = max(worst_lost, lost)
        if sign == 0:
            continue
        log_s = _ln_beta(a, beta_b + 1.0) - _ln_beta(1.0 + i, 1.0 * beta_b) - math.log(beta_b + i)
        total, comp = compensated_add(total, comp, sign * math.exp(log_c + log_s + log_f))
        if use_jacobi:
            log_j, sign_j, ok = _log_hyp2f1_jacobi(beta_a, a, beta_b, z)
            if ok:
                if sign_j == sign:
                    gap = abs(math.expm1(log_j - log_f))
                else:
                    gap = math.inf
                worst_gap = max(worst_gap, gap)
    return total + comp, worst_lost, worst_gap


@numba.njit(cache=True)
def _scaled_double_sum(
    alpha_a: int, beta_a: int, alpha_b: int, beta_b: int, gamma: float
) -> Tuple[float, float]:
    "Returns `(sum, bound on its absolute rounding error)`."
    log_g = math.log(gamma)
    log_norm = _ln_beta(1.0 * alpha_a, 1.0 * beta_a)
    m = beta_a - 1
    total = 0.0
    comp = 0.0
    err = 0.0
    for k in range(beta_a):
        log_bin = _ln_binomial(m, k)
        log_k = log_bin - (k + alpha_a) * log_g - log_norm
        scale_k = abs(log_bin) + (k + alpha_a) * log_g + abs(log_norm)
        sign = 1.0 if k % 2 == 0 else -1.0
        for i in range(alpha_b):
            lb_num = _ln_beta(1.0 * (alpha_a + k + i), beta_b + 1.0)
            lb_den = _ln_beta(1.0 + i, 1.0 * beta_b)
            log_den = math.log(beta_b + i)
            t = math.exp(log_k + lb_num - log_den - lb_den)
            total, comp = compensated_add(total, comp, sign * t)
            # every log piece carries a few ulps; exp turns that into relative error
            err += t * (scale_k + abs(lb_num) + abs(lb_den) + log_den + 1.0) * _TERM_ULPS
    return total + comp, err


def _scaled_double_sum_exact(
    alpha_a: int, beta_a: int, alpha_b: int, beta_b: int, gamma: float
) -> float:
    # A float gamma is a dyadic rational and every beta function of integers is
    # a ratio of factorials, so the whole double sum is one exact rational.
    g = Fraction(gamma)
    top = alpha_a + beta_a + alpha_b + beta_b
    fact = [1] * (top + 1)
    for n in range(1, top + 1):
        fact[n] = fact[n - 1] * n
    m = beta_a - 1
    total = Fraction(0)
    g_pow = Fraction(1)
    for k in range(beta_a):
        a = alpha_a + k
        # B(a + i, beta_b + 1) / ((beta_b + i) B(1 + i, beta_b))
        inner = Fraction(0)
        for i in range(alpha_b):
            inner += Fraction(
                beta_b * fact[a + i - 1] * fact[i + beta_b - 1],
                fact[a + i + beta_b] * fact[i],
            )
        term = math.comb(m, k) * inner / g_pow
        total += term if k % 2 == 0 else -term
        g_pow *= g
    norm = Fraction(fact[alpha_a + beta_a - 1], fact[alpha_a - 1] * fact[beta_a - 1])
    return float(total * norm / g**alpha_a)


# ## Operations


def pr_rate_greater(a: BetaPosterior, b: BetaPosterior) -> ComparisonResult:
    r"""
    Probability that B's rate exceeds A's.

    $Pr(\phi_B > \phi_A) = \sum_{i=1}^{\alpha_B}
    \frac{B(\alpha_A - 1 + i, \beta_B + \beta_A)}{(\beta_B - 1 + i) B(i, \beta_B) B(\alpha_A, \beta_A)}$

    Every summand is formed as the exponential of its four log terms.

    Args:
        a : posterior of process A
        b : posterior of process B

    Returns:
        A `ComparisonResult` with `alpha_b` terms.

    Raises:
        SizeError : if `b.alpha` exceeds `MAX_TERMS`
    """
    _check_size("alpha_b", b.alpha)
    p = _rate_greater_sum(float(a.alpha), float(a.beta), b.alpha, float(b.beta))
    return ComparisonResult(_clip(float(p)), Method.ClosedFormRate, b.alpha)


def pr_scaled_rate_greater(
    a: BetaPosterior, b: BetaPosterior, ratio: RatioLike, cross_check: bool = True
) -> ComparisonResult:
    r"""
    Probability that B's expected payout exceeds A's, $Pr(\phi_B > \gamma \phi_A)$.

    For $\gamma > 1$ this is
    $\sum_{i=0}^{\alpha_B - 1} \exp\{C + S(\alpha_A + i, \beta_B, i) + F(\alpha_A + i)\}$ with

    * $C = -\alpha_A \ln \gamma - \ln B(\alpha_A, \beta_A)$
    * $S(a, \beta_B, i) = \ln B(a, \beta_B + 1) - \ln B(1 + i, \beta_B) - \ln(\beta_B + i)$
    * $F(a) = \ln\,_2F_1(1 - \beta_A, a; a + \beta_B + 1; \gamma^{-1})$

    $\gamma = 1$ returns `pr_rate_greater(a, b)` and $\gamma < 1$ returns the
    complement of the swapped comparison at $1/\gamma$.

    Args:
        a : posterior of process A
        b : posterior of process B
        ratio : payout ratio $\gamma$
        cross_check : also evaluate F through the Jacobi route where it is
            defined and log disagreements

    Returns:
        A `ComparisonResult`.
    """
    gamma = _as_ratio(ratio).gamma
    if gamma == 1.0:
        return pr_rate_greater(a, b)
    if gamma < 1.0:
        swapped = pr_scaled_rate_greater(b, a, PayoutRatio(1.0 / gamma), cross_check)
        return ComparisonResult(
            _clip(1.0 - swapped.probability),
            swapped.method,
            swapped.terms_evaluated,
            swapped.cancellation_flag,
        )
    _check_size("alpha_b", b.alpha)
    _check_size("beta_a", a.beta)
    p, lost, gap = _scaled_sum(a.alpha, a.beta, b.alpha, b.beta, gamma, cross_check)
    if gap > CROSS_CHECK_RTOL:
        logger.warning(
            "Jacobi and series routes for 2F1 disagree by %.3g (A=%s, B=%s, gamma=%r)",
            gap,
            a,
            b,
            gamma,
        )
    return ComparisonResult(
        _clip(float(p)), Method.ClosedFormScaled, b.alpha, bool(lost > CANCELLATION_DIGITS)
    )


def pr_scaled_double_sum(a: BetaPosterior, b: BetaPosterior, ratio: RatioLike) -> ComparisonResult:
    r"""
    $Pr(\phi_B > \gamma \phi_A)$ from the binomial expansion of $(1 - \phi/\gamma)^{\beta_A - 1}$:

    $\sum_{k=0}^{\beta_A - 1} \sum_{i=0}^{\alpha_B - 1} (-1)^k C(\beta_A - 1, k)
    \gamma^{-k-\alpha_A} \frac{B(\alpha_A + k + i, \beta_B + 1)}{(\beta_B + i) B(1 + i, \beta_B) B(\alpha_A, \beta_A)}$

    Verification backend for `pr_scaled_rate_greater`; only $\gamma > 1$ is accepted.
    The k-sum alternates, so up to `EXACT_DOUBLE_SUM_TERMS` terms it is
    accumulated in exact rational arithmetic and rounded once. Larger sums run
    in floating point and raise `cancellation_flag` when their rounding error
    bound exceeds `DOUBLE_SUM_ATOL`.
    """
    gamma = _as_ratio(ratio).gamma
    if not gamma > 1.0:
        raise DomainError(f"The double sum needs gamma > 1, got {gamma}.")
    _check_size("alpha_b", b.alpha)
    _check_size("beta_a", a.beta)
    n_terms = a.beta * b.alpha
    if n_terms <= EXACT_DOUBLE_SUM_TERMS:
        p = _scaled_double_sum_exact(a.alpha, a.beta, b.alpha, b.beta, gamma)
        return ComparisonResult(_clip(p), Method.DoubleSum, n_terms)
    p, err = _scaled_double_sum(a.alpha, a.beta, b.alpha, b.beta, gamma)
    flag = bool(err > DOUBLE_SUM_ATOL)
    if flag:
        logger.debug("double sum error bound %.3g (A=%s, B=%s, gamma=%r)", err, a, b, gamma)
    return ComparisonResult(_clip(float(p)), Method.DoubleSum, n_terms, flag)


def _sample_beta(rng: np.random.Generator, p: BetaPosterior, size: int) -> np.ndarray:
    x = rng.standard_gamma(p.alpha, size)
    y = rng.standard_gamma(p.beta, size)
    return x / (x + y)


def _mc_block(a: BetaPosterior, b: BetaPosterior, gamma: float, seed: int, block: int, size: int) -> int:
    rng = np.random.Generator(
        np.random.Philox(np.random.SeedSequence(seed & _SEED_MASK, spawn_key=(block,)))
    )
    phi_a = _sample_beta(rng, a, size)
    phi_b = _sample_beta(rng, b, size)
    return int(np.count_nonzero(phi_b > gamma * phi_a))


def mc_oracle(
    a: BetaPosterior,
    b: BetaPosterior,
    ratio: RatioLike,
    n_samples: int,
    seed: int,
    n_jobs: int = 1,
) -> ComparisonResult:
    """
    Monte Carlo estimate of $Pr(\\phi_B > \\gamma \\phi_A)$ from paired posterior draws.

    Samples are split in blocks of `MC_BLOCK_SIZE`; block `k` draws from its
    own Philox stream keyed by `(seed, k)`, so the estimate only depends on
    `(a, b, gamma, n_samples, seed)` and never on `n_jobs`.

    Args:
        a : posterior of process A
        b : posterior of process B
        ratio : payout ratio
        n_samples : number of paired draws, at least 1
        seed : 64-bit seed
        n_jobs : joblib thread count, -1 for every core

    Returns:
        A `ComparisonResult` with `n_samples` terms.
    """
    gamma = _as_ratio(ratio).gamma
    n_samples = require_int("n_samples", n_samples, 1)
    seed = require_int("seed", seed, -(1 << 63))
    n_jobs = require_int("n_jobs", n_jobs, -1)
    if n_jobs == 0:
        raise DomainError("n_jobs must be a thread count or -1 for every core, got 0.")
    n_blocks, rest = divmod(n_samples, MC_BLOCK_SIZE)
    sizes = [MC_BLOCK_SIZE] * n_blocks + ([rest] if rest else [])
    logger.debug("mc_oracle: %d samples in %d blocks, n_jobs=%d", n_samples, len(sizes), n_jobs)
    if n_jobs == 1 or len(sizes) == 1:
        hits = [_mc_block(a, b, gamma, seed, k, size) for k, size in enumerate(sizes)]
    else:
        hits = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(_mc_block)(a, b, gamma, seed, k, size) for k, size in enumerate(sizes)
        )
    return ComparisonResult(sum(hits) / n_samples, Method.MonteCarlo, n_samples)


def decide(a: BetaPosterior, b: BetaPosterior, ratio: RatioLike, threshold: float) -> Decision:
    """
    Turn the payout comparison into a choice.

    `PreferB` when $Pr(\\phi_B > \\gamma \\phi_A) \\ge$ `threshold`, `PreferA`
    when it is at most `1 - threshold`, `Undecided` otherwise.
    """
    threshold = require_open_unit("threshold", threshold)
    if threshold <= 0.5:
        raise DomainError(f"threshold must lie in (0.5, 1), got {threshold}.")
    p = pr_scaled_rate_greater(a, b, ratio).probability
    if p >= threshold:
        return Decision.PreferB
    if p <= 1.0 - threshold:
        return Decision.PreferA
    return Decision.Undecided
