"""
Special-function kernels evaluated in log space.

The numba kernels (leading underscore) take plain floats and ints and are
shared with the summation kernels of `bayes`, `exact_tests` and
`sequential`. The public functions validate their arguments, call the
kernels and translate failures into `betarate.errors` exceptions.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Tuple

import numba

from .errors import (
    CancellationWarning,
    DomainError,
    NumericError,
    UnsupportedDomainError,
    require_int,
    require_positive,
)
from .operators import LOG_ZERO, compensated_add, digits_lost, log_add, log_sub

# Digits an alternating sum may lose before a `CancellationWarning` is issued.
CANCELLATION_DIGITS = 12.0

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_STIRLING_MIN = 10.0
_RESCALE = 1e150
_LOG_RESCALE = math.log(_RESCALE)
_MAX_ITER = 100000
_TINY = 1e-300


@dataclass(frozen=True)
class LogReal:
    """
    A real number stored as `sign * exp(log_magnitude)`.

    Attributes:
        log_magnitude : natural log of the absolute value (unused when zero)
        sign : -1, 0 or +1; zero exactly when the value is zero
    """

    log_magnitude: float
    sign: int

    def __post_init__(self) -> None:
        if self.sign not in (-1, 0, 1):
            raise DomainError(f"LogReal sign must be -1, 0 or +1, got {self.sign}.")
        if self.sign == 0:
            object.__setattr__(self, "log_magnitude", LOG_ZERO)
        elif math.isnan(self.log_magnitude) or self.log_magnitude == LOG_ZERO:
            raise DomainError("Non-zero LogReal needs a finite log magnitude.")

    @classmethod
    def from_float(cls, x: float) -> LogReal:
        if x == 0.0:
            return cls(LOG_ZERO, 0)
        return cls(math.log(abs(x)), 1 if x > 0 else -1)

    def log_abs(self) -> float:
        "$\\ln |v|$, `-inf` for zero."
        return self.log_magnitude

    def value(self) -> float:
        "Back to a float; overflows to +-inf and underflows to 0."
        if self.sign == 0:
            return 0.0
        if self.log_magnitude > 709.78:
            return self.sign * math.inf
        return self.sign * math.exp(self.log_magnitude)

    def __mul__(self, other: LogReal) -> LogReal:
        if self.sign == 0 or other.sign == 0:
            return LogReal(LOG_ZERO, 0)
        return LogReal(self.log_magnitude + other.log_magnitude, self.sign * other.sign)


# ## Kernels


@numba.njit(cache=True)
def _stirling_correction(x: float) -> float:
    "Remainder of Stirling's series for ln-gamma, $x \\ge 10$."
    r = 1.0 / x
    r2 = r * r
    return r * (
        1.0 / 12.0
        - r2 * (1.0 / 360.0 - r2 * (1.0 / 1260.0 - r2 * (1.0 / 1680.0 - r2 / 1188.0)))
    )


@numba.njit(cache=True)
def _ln_beta(a: float, b: float) -> float:
    if a > b:
        a, b = b, a
    s = a + b
    if a >= _STIRLING_MIN:
        return (
            _HALF_LOG_2PI
            - 0.5 * math.log(s)
            - (a - 0.5) * math.log1p(b / a)
            - (b - 0.5) * math.log1p(a / b)
            + _stirling_correction(a)
            + _stirling_correction(b)
            - _stirling_correction(s)
        )
    if b >= _STIRLING_MIN:
        # ln Gamma(b) - ln Gamma(a + b) without subtracting two large numbers
        return (
            math.lgamma(a)
            + a
            - a * math.log(s)
            - (b - 0.5) * math.log1p(a / b)
            + _stirling_correction(b)
            - _stirling_correction(s)
        )
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(s)


@numba.njit(cache=True)
def _ln_binomial(n: int, k: int) -> float:
    if k == 0 or k == n:
        return 0.0
    return -math.log(n + 1.0) - _ln_beta(k + 1.0, n - k + 1.0)


@numba.njit(cache=True)
def _reg_inc_beta_int(x: float, alpha: int, beta: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_x = math.log(x)
    log_tail = beta * math.log1p(-x)
    total = 0.0
    comp = 0.0
    for i in range(alpha):
        lt = i * log_x + log_tail - math.log(beta + i) - _ln_beta(1.0 + i, beta)
        total, comp = compensated_add(total, comp, math.exp(lt))
    return min(1.0, max(0.0, 1.0 - (total + comp)))


@numba.njit(cache=True)
def _hyp2f1_pools(m: int, b: float, c: float, z: float) -> Tuple[float, float]:
    """
    Positive and negative log-sum-exp pools of
    $\\sum_n (-1)^n C(m,n) (b)_n/(c)_n z^n$.
    """
    log_pos = 0.0
    log_neg = LOG_ZERO
    if m == 0 or z == 0.0:
        return log_pos, log_neg
    log_z = math.log(abs(z))
    z_sign = 1 if z > 0.0 else -1
    lt = 0.0
    sign = 1
    for n in range(m):
        bn = b + n
        if bn == 0.0:
            break
        lt += math.log((m - n) / (n + 1.0)) + math.log(abs(bn)) - math.log(abs(c + n)) + log_z
        sign = -sign * z_sign
        if bn < 0.0:
            sign = -sign
        if c + n < 0.0:
            sign = -sign
        if sign > 0:
            log_pos = log_add(log_pos, lt)
        else:
            log_neg = log_add(log_neg, lt)
    return log_pos, log_neg


@numba.njit(cache=True)
def _combine_pools(log_pos: float, log_neg: float) -> Tuple[float, int, float]:
    if log_pos > log_neg:
        out = log_sub(log_pos, log_neg)
        return out, 1, digits_lost(log_pos, out)
    if log_neg > log_pos:
        out = log_sub(log_neg, log_pos)
        return out, -1, digits_lost(log_neg, out)
    return LOG_ZERO, 0, math.inf


@numba.njit(cache=True)
def _hyp2f1_series(
    m: int, b: float, c: float, z: float, transform: bool
) -> Tuple[float, int, float]:
    "Returns `(log|F|, sign, digits lost)` for the terminating series."
    if transform and c > b and z < 1.0:
        # Pfaff: (1 - z)^m 2F1(-m, c - b; c; z / (z - 1)); every term is positive
        log_pos, log_neg = _hyp2f1_pools(m, c - b, c, z / (z - 1.0))
        out, sign, lost = _combine_pools(log_pos, log_neg)
        if sign == 0:
            return out, sign, lost
        return out + m * math.log1p(-z), sign, lost
    log_pos, log_neg = _hyp2f1_pools(m, b, c, z)
    return _combine_pools(log_pos, log_neg)


@numba.njit(cache=True)
def _jacobi_recurrence(n: int, x: float, y: float, t: float) -> Tuple[float, int, bool]:
    "Returns `(log|P|, sign, ok)`; `ok` is False on a vanishing denominator."
    if n == 0:
        return 0.0, 1, True
    p0 = 1.0
    p1 = (x + 1.0) + (x + y + 2.0) * (t - 1.0) / 2.0
    log_scale = 0.0
    for k in range(2, n + 1):
        s = 2.0 * k + x + y
        den = 2.0 * k * (k + x + y) * (s - 2.0)
        if den == 0.0:
            return 0.0, 0, False
        a1 = (s - 1.0) * (s * (s - 2.0) * t + x * x - y * y)
        a2 = 2.0 * (k + x - 1.0) * (k + y - 1.0) * s
        p2 = (a1 * p1 - a2 * p0) / den
        p0 = p1
        p1 = p2
        mag = abs(p1)
        if mag > _RESCALE:
            p0 /= _RESCALE
            p1 /= _RESCALE
            log_scale += _LOG_RESCALE
        elif 0.0 < mag < 1.0 / _RESCALE and abs(p0) < 1.0 / _RESCALE:
            p0 *= _RESCALE
            p1 *= _RESCALE
            log_scale -= _LOG_RESCALE
    if p1 == 0.0:
        return LOG_ZERO, 0, True
    return math.log(abs(p1)) + log_scale, 1 if p1 > 0.0 else -1, True


@numba.njit(cache=True)
def _log_hyp2f1_jacobi(
    beta_a: int, a: float, beta_b: int, z: float
) -> Tuple[float, int, bool]:
    r"""
    $_2F_1(1-\beta_A, a; a+\beta_B+1; z)$ with $m = \beta_A - 1$, $c = a + \beta_B + 1$, as

    $(1-z)^m \, m!/(c)_m \, P_m^{(c-1,\, -a-m)}((1+z)/(1-z))$

    the Jacobi form of the Pfaff-transformed series. Its parameters sum to
    $\beta_B - \beta_A + 1$, so no recurrence denominator vanishes when
    $\beta_B \ge \beta_A$.
    """
    m = beta_a - 1
    c = a + beta_b + 1.0
    log_p, sign, ok = _jacobi_recurrence(m, c - 1.0, -a - m, (1.0 + z) / (1.0 - z))
    if not ok or sign == 0:
        return log_p, sign, ok
    # m!/(c)_m = B(m + 1, c) (c + m)
    return m * math.log1p(-z) + _ln_beta(m + 1.0, c) + math.log(c + m) + log_p, sign, True


@numba.njit(cache=True)
def _reg_inc_gamma_upper(s: float, x: float) -> float:
    if x <= 0.0:
        return 1.0
    log_pref = s * math.log(x) - x - math.lgamma(s)
    if x < s + 1.0:
        ap = s
        delta = 1.0 / s
        total = delta
        for _ in range(_MAX_ITER):
            ap += 1.0
            delta *= x / ap
            total += delta
            if abs(delta) < abs(total) * 1e-17:
                break
        return min(1.0, max(0.0, 1.0 - total * math.exp(log_pref)))
    # modified Lentz continued fraction
    b = x + 1.0 - s
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return min(1.0, max(0.0, math.exp(log_pref) * h))


# ## Public operations


def ln_gamma(x: float) -> float:
    "$f(x) = \\ln \\Gamma(x)$ for $x > 0$"
    return math.lgamma(require_positive("x", x))


def ln_beta(a: float, b: float) -> float:
    r"""
    $f(a, b) = \ln B(a, b) = \ln\Gamma(a) + \ln\Gamma(b) - \ln\Gamma(a+b)$

    Large arguments go through Stirling's series so that the three ln-gamma
    values are never subtracted from each other. Symmetric in its arguments.

    Args:
        a : positive real
        b : positive real

    Returns:
        The log of the beta function.

    Raises:
        DomainError : on a non-positive argument
    """
    return float(_ln_beta(require_positive("a", a), require_positive("b", b)))


def ln_binomial(n: int, k: int) -> float:
    "$f(n, k) = \\ln C(n, k)$ through `ln_beta`"
    n = require_int("n", n, 0)
    k = require_int("k", k, 0)
    if k > n:
        raise DomainError(f"k={k} must not exceed n={n}.")
    return float(_ln_binomial(n, k))


def reg_inc_beta_int(x: float, alpha: int, beta: float) -> float:
    r"""
    Regularized incomplete beta function $I_x(\alpha, \beta)$ for integer $\alpha$:

    $I_x(\alpha, \beta) = 1 - \sum_{i=0}^{\alpha-1} \frac{x^i (1-x)^\beta}{(\beta+i) B(1+i, \beta)}$

    Each summand is formed in log space and exponentiated.

    Args:
        x : point in [0, 1]
        alpha : integer >= 1
        beta : positive real

    Returns:
        The Beta($\alpha$, $\beta$) CDF at `x`.
    """
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"x must lie in [0, 1], got {x}.")
    alpha = require_int("alpha", alpha, 1)
    beta = require_positive("beta", beta)
    return float(_reg_inc_beta_int(x, alpha, beta))


def _check_hyp2f1_args(m: int, b: float, c: float, z: float) -> Tuple[int, float, float, float]:
    m = require_int("m", m, 0)
    b = require_positive("b", b)
    c = require_positive("c", c)
    z = float(z)
    if not 0.0 <= z < 1.0:
        raise DomainError(f"z must lie in [0, 1), got {z}.")
    return m, b, c, z


def hyp2f1_neg_int_series(
    m: int, b: float, c: float, z: float, transform: bool = True
) -> LogReal:
    r"""
    Terminating Gauss series
    $_2F_1(-m, b; c; z) = \sum_{n=0}^{m} (-1)^n C(m,n) \frac{(b)_n}{(c)_n} z^n$
    with rising factorials $(q)_n = q (q+1) \cdots (q+n-1)$.

    Positive and negative terms go to separate log-sum-exp pools that are
    combined once at the end. With `transform` and $c > b$ the sum is
    taken in the Pfaff form $(1-z)^m\,_2F_1(-m, c-b; c; z/(z-1))$, whose
    terms share one sign.

    Args:
        m : non-negative integer
        b : positive real
        c : positive real
        z : real in [0, 1)
        transform : allow the single-sign transformed series

    Returns:
        The exact finite sum as a `LogReal`.
    """
    m, b, c, z = _check_hyp2f1_args(m, b, c, z)
    log_mag, sign, lost = _hyp2f1_series(m, b, c, z, transform)
    if lost > CANCELLATION_DIGITS:
        warnings.warn(
            f"2F1(-{m}, {b}; {c}; {z}) lost {lost:.1f} digits to cancellation",
            CancellationWarning,
            stacklevel=2,
        )
    return LogReal(float(log_mag), int(sign))


def hyp2f1_series_loss(m: int, b: float, c: float, z: float) -> float:
    "Decimal digits the alternating form of `hyp2f1_neg_int_series` cancels."
    m, b, c, z = _check_hyp2f1_args(m, b, c, z)
    return float(_hyp2f1_series(m, b, c, z, False)[2])


def jacobi_poly(n: int, x: float, y: float, t: float) -> float:
    r"""
    Jacobi polynomial $P_n^{(x, y)}(t)$ by the three-term recurrence in degree.

    Raises:
        NumericError : when a recurrence denominator vanishes
    """
    n = require_int("n", n, 0)
    t = float(t)
    if not -1.0 <= t <= 1.0:
        raise DomainError(f"t must lie in [-1, 1], got {t}.")
    log_p, sign, ok = _jacobi_recurrence(n, float(x), float(y), t)
    if not ok:
        raise NumericError(
            f"Jacobi recurrence for P_{n}^({x}, {y}) hits a zero denominator "
            f"(x + y = {float(x) + float(y)})."
        )
    return LogReal(float(log_p), int(sign)).value()


def hyp2f1_via_jacobi(beta_a: int, a: float, beta_b: int, z: float) -> LogReal:
    r"""
    $_2F_1(1-\beta_A, a; a+\beta_B+1; z)$ evaluated as a Jacobi polynomial.

    Same value as `hyp2f1_neg_int_series(beta_a - 1, a, a + beta_b + 1, z)`.
    Only defined for $\beta_B \ge \beta_A \ge 2$; outside it the series
    backend must be used.

    Raises:
        UnsupportedDomainError : outside the domain above
    """
    beta_a = require_int("beta_a", beta_a, 1)
    beta_b = require_int("beta_b", beta_b, 1)
    a = require_positive("a", a)
    z = float(z)
    if not 0.0 < z < 1.0:
        raise DomainError(f"z must lie in (0, 1), got {z}.")
    if beta_a < 2 or beta_b < beta_a:
        raise UnsupportedDomainError(
            f"Jacobi route needs beta_b >= beta_a >= 2, got beta_a={beta_a}, beta_b={beta_b}."
        )
    log_mag, sign, ok = _log_hyp2f1_jacobi(beta_a, a, beta_b, z)
    if not ok:
        raise UnsupportedDomainError(
            f"Jacobi recurrence degenerates for beta_a={beta_a}, a={a}, beta_b={beta_b}."
        )
    return LogReal(float(log_mag), int(sign))


def reg_inc_gamma_upper(s: float, x: float) -> float:
    r"""
    Regularized upper incomplete gamma $Q(s, x) = \Gamma(s, x) / \Gamma(s)$.

    Power series for $x < s + 1$, continued fraction otherwise.
    """
    s = require_positive("s", s)
    x = float(x)
    if not x >= 0.0 or math.isinf(x):
        raise DomainError(f"x must be a non-negative finite real, got {x}.")
    return float(_reg_inc_gamma_upper(s, x))


def reg_inc_gamma_lower(s: float, x: float) -> float:
    "$P(s, x) = 1 - Q(s, x)$"
    return 1.0 - reg_inc_gamma_upper(s, x)


def chi2_sf(d: float, dof: int) -> float:
    "Survival function of the chi-square distribution with `dof` degrees of freedom."
    dof = require_int("dof", dof, 1)
    return reg_inc_gamma_upper(dof / 2.0, float(d) / 2.0)
