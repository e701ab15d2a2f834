"""
Sequential A/B test on the win-margin random walk.

Every success of either arm moves the walk $d = T - C$ one step. The test
stops with the treatment as winner when $d$ reaches $d^*$, and with no
winner when $T + C$ reaches the budget $N$.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Tuple

import numba
import numpy as np

from .errors import (
    DomainError,
    InfeasibleDesignError,
    StateError,
    require_int,
    require_open_unit,
)
from .operators import compensated_add
from .specfun import _ln_binomial

logger = logging.getLogger(__name__)

# Largest budget N the design search will consider.
DESIGN_SEARCH_CAP = 1_000_000


class Outcome(enum.Enum):
    TreatmentSuccess = "T"
    ControlSuccess = "C"


class Status(enum.Enum):
    Running = "running"
    TreatmentWins = "treatment_wins"
    NoWinner = "no_winner"


class Prefactor(enum.Enum):
    """
    Margin : first-passage mass $d^*/j \\, C(j, (d^*+j)/2) \\, p^{(j+d^*)/2} q^{(j-d^*)/2}$
    Literal : the same with $n^M_{tot}/j$, $n^M_{tot} = (N + d^*)/2$, in front
    """

    Margin = "margin"
    Literal = "literal"


def default_margin(n_max: int) -> int:
    "$\\lceil 2\\sqrt{N} \\rceil$"
    return math.isqrt(4 * n_max - 1) + 1


@dataclass(frozen=True)
class SequentialConfig:
    """
    Budget and stopping margin of a sequential test.

    Attributes:
        n_max : total successes after which the test stops without a winner
        d_star : win margin at which the treatment is declared the winner;
            defaults to $\\lceil 2\\sqrt{N} \\rceil$
    """

    n_max: int
    d_star: Optional[int] = None

    def __post_init__(self) -> None:
        n_max = require_int("n_max", self.n_max, 1)
        d_star = default_margin(n_max) if self.d_star is None else self.d_star
        d_star = require_int("d_star", d_star, 1)
        if d_star > n_max:
            raise DomainError(f"d_star={d_star} exceeds n_max={n_max}; the margin is unreachable.")
        object.__setattr__(self, "n_max", n_max)
        object.__setattr__(self, "d_star", d_star)


@dataclass(frozen=True)
class Lift:
    "Relative success-rate advantage of the treatment."

    delta: float

    def __post_init__(self) -> None:
        delta = float(self.delta)
        if not delta >= 0.0 or math.isinf(delta):
            raise DomainError(f"lift must be a non-negative finite real, got {self.delta}.")
        object.__setattr__(self, "delta", delta)

    @property
    def step_probabilities(self) -> Tuple[float, float]:
        "$(p, q) = ((1+\\delta)/(2+\\delta), 1/(2+\\delta))$"
        return (1.0 + self.delta) / (2.0 + self.delta), 1.0 / (2.0 + self.delta)


@dataclass(frozen=True)
class SequentialState:
    config: SequentialConfig
    t_wins: int = 0
    c_wins: int = 0
    status: Status = field(default=Status.Running)

    def __post_init__(self) -> None:
        require_int("t_wins", self.t_wins, 0)
        require_int("c_wins", self.c_wins, 0)
        if self.n_tot > self.config.n_max:
            raise DomainError(
                f"{self.n_tot} successes recorded against a budget of {self.config.n_max}."
            )

    @property
    def d(self) -> int:
        return self.t_wins - self.c_wins

    @property
    def n_tot(self) -> int:
        return self.t_wins + self.c_wins

    @property
    def is_stopped(self) -> bool:
        return self.status is not Status.Running


def sequential_new(config: SequentialConfig) -> SequentialState:
    "Fresh running test with both counters at zero."
    return SequentialState(config)


def sequential_record(state: SequentialState, outcome: Outcome) -> SequentialState:
    """
    Record one success and return the updated state.

    The margin is checked before the budget, so an outcome that triggers
    both declares the treatment the winner.

    Raises:
        StateError : if the test has already stopped
    """
    if state.is_stopped:
        raise StateError(f"Test already stopped with {state.status.name}.")
    if outcome is Outcome.TreatmentSuccess:
        new = replace(state, t_wins=state.t_wins + 1)
    elif outcome is Outcome.ControlSuccess:
        new = replace(state, c_wins=state.c_wins + 1)
    else:
        raise DomainError(f"Unknown outcome {outcome!r}.")
    if new.d >= new.config.d_star:
        return replace(new, status=Status.TreatmentWins)
    if new.n_tot >= new.config.n_max:
        return replace(new, status=Status.NoWinner)
    return new


def replay(config: SequentialConfig, outcomes: Iterable[Outcome]) -> SequentialState:
    """
    Feed `outcomes` to a fresh test until it stops or they run out.

    Outcomes after the stopping step are not consumed; the number consumed
    is `state.n_tot`.
    """
    state = sequential_new(config)
    for outcome in outcomes:
        state = sequential_record(state, outcome)
        if state.is_stopped:
            break
    return state


# ## Bounds


@numba.njit(cache=True)
def _first_passage(
    d: int, n_max: int, log_up: float, log_down: float, target: float, literal: bool
) -> Tuple[float, int]:
    """
    Sum of first-passage masses at +d over walk lengths j <= n_max.

    Stops at the first budget N <= n_max whose bound reaches `target` and
    returns `(bound, N)`; returns `(bound at n_max, n_max + 1)` when none does.
    """
    total = 0.0
    comp = 0.0
    for j in range(d, n_max + 1, 2):
        k = (d + j) // 2
        lt = math.log(d / j) + _ln_binomial(j, k) + k * log_up + (j - k) * log_down
        total, comp = compensated_add(total, comp, math.exp(lt))
        value = total + comp
        if literal:
            # budgets j and j + 1 share this sum but not the prefactor
            if value * (j + d) / (2.0 * d) >= target:
                return value * (j + d) / (2.0 * d), j
            if j < n_max and value * (j + 1 + d) / (2.0 * d) >= target:
                return value * (j + 1 + d) / (2.0 * d), j + 1
        elif value >= target:
            return value, j
    value = total + comp
    if literal:
        value *= (n_max + d) / (2.0 * d)
    return value, n_max + 1


def _walk_logs(lift: Lift) -> Tuple[float, float]:
    p, q = lift.step_probabilities
    return math.log(p), math.log(q)


def _check_bound_args(n_max: int, d_star: int) -> Tuple[int, int]:
    return require_int("n_max", n_max, 1), require_int("d_star", d_star, 1)


def power_bound(
    n_max: int, d_star: int, lift: Lift, prefactor: Prefactor = Prefactor.Margin
) -> float:
    r"""
    Probability that the treatment is declared the winner within the budget,
    when its success rate is $1 + \delta$ times the control's.

    $\sum_{j} \frac{d^*}{j} C(j, \frac{d^*+j}{2}) \frac{(1+\delta)^{(d^*+j)/2}}{(2+\delta)^j}$

    over $d^* \le j \le N$ with $d^* + j$ even.

    Args:
        n_max : budget N
        d_star : margin
        lift : treatment lift
        prefactor : `Margin` or the `Literal` $n^M_{tot}/j$ form

    Returns:
        The bound, clipped to [0, 1]; zero when $d^* > N$.
    """
    n_max, d_star = _check_bound_args(n_max, d_star)
    if d_star > n_max:
        return 0.0
    log_up, log_down = _walk_logs(lift)
    value, _ = _first_passage(
        d_star, n_max, log_up, log_down, math.inf, prefactor is Prefactor.Literal
    )
    return min(1.0, max(0.0, float(value)))


def significance_bound(n_max: int, d_star: int, prefactor: Prefactor = Prefactor.Margin) -> float:
    """
    Probability of a false winner: `power_bound` of the symmetric walk,
    $\\sum_j \\frac{d^*}{j} C(j, \\frac{d^*+j}{2}) 2^{-j}$.
    """
    return power_bound(n_max, d_star, Lift(0.0), prefactor)


def _largest_reachable_margin(cap: int, log_up: float, log_down: float, target: float, literal: bool) -> int:
    # largest d whose power target is met within the cap; 0 if none
    def reachable(d: int) -> bool:
        return _first_passage(d, cap, log_up, log_down, target, literal)[1] <= cap

    if not reachable(1):
        return 0
    lo, hi = 1, 2
    while hi <= cap and reachable(hi):
        lo, hi = hi, 2 * hi
    hi = min(hi, cap + 1)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if reachable(mid):
            lo = mid
        else:
            hi = mid
    return lo


def design_sequential(
    alpha_target: float,
    beta_target: float,
    lift: Lift,
    prefactor: Prefactor = Prefactor.Margin,
    n_cap: int = DESIGN_SEARCH_CAP,
) -> SequentialConfig:
    """
    Smallest budget N, then smallest margin d*, whose false-winner bound is at
    most `alpha_target` and whose power is at least `1 - beta_target`.

    For each margin the smallest N meeting the power target is found; the
    design is feasible when the false-winner bound at that N stays within
    `alpha_target`. Both bounds grow with N and the power shrinks with the
    margin, so margins are scanned upwards until no smaller N can appear.

    Args:
        alpha_target : significance in (0, 1)
        beta_target : one minus power, in (0, 1)
        lift : treatment lift, must be positive
        prefactor : bound variant
        n_cap : search cap on N

    Returns:
        The `SequentialConfig` of the design.

    Raises:
        InfeasibleDesignError : if no design exists with N <= `n_cap`
    """
    alpha_target = require_open_unit("alpha_target", alpha_target)
    beta_target = require_open_unit("beta_target", beta_target)
    n_cap = require_int("n_cap", n_cap, 1)
    if not lift.delta > 0.0:
        raise DomainError("design_sequential needs a positive lift.")
    literal = prefactor is Prefactor.Literal
    log_up, log_down = _walk_logs(lift)
    log_half, _ = _walk_logs(Lift(0.0))
    power_target = 1.0 - beta_target
    # sum exceeding alpha_target, as a reached target
    alpha_exceeded = float(np.nextafter(alpha_target, np.inf))

    best: Optional[Tuple[int, int]] = None
    d_limit: Optional[int] = None
    d = 0
    while True:
        d += 1
        if best is not None and d > best[0]:
            break
        if d_limit is None and d > 64:
            d_limit = _largest_reachable_margin(n_cap, log_up, log_down, power_target, literal)
            logger.debug("design search: margins above %d cannot meet the power target", d_limit)
        if d_limit is not None and d > d_limit:
            break
        _, cross = _first_passage(d, n_cap, log_half, log_half, alpha_exceeded, literal)
        n_sig = cross - 1
        pow_cap = n_cap if best is None else best[0]
        limit = min(n_sig, pow_cap)
        _, n_pow = _first_passage(d, limit, log_up, log_down, power_target, literal)
        if n_pow <= limit:
            if best is None or n_pow < best[0]:
                best = (n_pow, d)
                logger.debug("design search: feasible N=%d d*=%d", n_pow, d)
        elif limit >= pow_cap:
            # power target not met below pow_cap for this or any larger margin
            break
    if best is None:
        raise InfeasibleDesignError(
            f"No design with N <= {n_cap} meets alpha={alpha_target}, beta={beta_target} "
            f"at lift {lift.delta}."
        )
    return SequentialConfig(best[0], best[1])
