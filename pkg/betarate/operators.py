"""
Collection of the core scalar log-space operators used throughout the code base.

Every operator is compiled with numba so that the summation kernels in
`specfun`, `bayes` and `sequential` can call them from nopython code.
"""

import math
from typing import Tuple

import numba

LOG_ZERO = -math.inf


@numba.njit(cache=True)
def log_add(x: float, y: float) -> float:
    "$f(x, y) = \\log(e^x + e^y)$"
    if x == LOG_ZERO:
        return y
    if y == LOG_ZERO:
        return x
    if x < y:
        x, y = y, x
    return x + math.log1p(math.exp(y - x))


@numba.njit(cache=True)
def log_sub(x: float, y: float) -> float:
    r"""
    $f(x, y) = \log(e^x - e^y)$ for $x \ge y$.

    Returns `LOG_ZERO` when both arguments are equal.
    """
    if y == LOG_ZERO:
        return x
    if y >= x:
        return LOG_ZERO
    return x + math.log1p(-math.exp(y - x))


@numba.njit(cache=True)
def compensated_add(total: float, comp: float, x: float) -> Tuple[float, float]:
    r"""
    One step of Neumaier's compensated summation.

    Args:
        total: running sum
        comp: running compensation
        x: value to add

    Returns:
        The updated `(total, comp)` pair; the sum is `total + comp`.
    """
    t = total + x
    if abs(total) >= abs(x):
        comp += (total - t) + x
    else:
        comp += (x - t) + total
    return t, comp


@numba.njit(cache=True)
def digits_lost(log_scale: float, log_result: float) -> float:
    "Decimal digits cancelled when a sum of magnitude $e^{scale}$ yields $e^{result}$."
    if log_result == LOG_ZERO:
        return math.inf
    return max(0.0, (log_scale - log_result) / math.log(10.0))


def is_close(x: float, y: float, rel: float = 1e-9, abs_: float = 0.0) -> bool:
    "$f(x, y) = |x - y| \\le \\max(rel \\cdot \\max(|x|, |y|), abs)$"
    return math.fabs(x - y) <= max(rel * max(math.fabs(x), math.fabs(y)), abs_)
