"""
Benchmark parameter generation and readers for the CLI's input files.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from .bayes import MAX_TERMS
from .errors import DomainError, GenerationError, require_int
from .sequential import Outcome

logger = logging.getLogger(__name__)

# Rejected draws tolerated before `generate_cases` gives up.
GENERATION_RETRY_CAP = 1_000_000

_SEED_MASK = (1 << 64) - 1

PathLike = Union[str, Path]


@dataclass(frozen=True)
class CaseParams:
    alpha_a: int
    beta_a: int
    alpha_b: int
    beta_b: int
    gamma: float


def generate_cases(
    n_cases: int, seed: int, retry_cap: int = GENERATION_RETRY_CAP
) -> List[CaseParams]:
    """
    Random comparison cases with a heavy tail.

    Each attempt draws five uniforms $u$ and maps them to $\\lfloor 1/u \\rfloor + 1$,
    giving `(alpha_a, beta_a, alpha_b, beta_b, gamma)`. Attempts are kept only
    when `alpha_a <= beta_a` and `alpha_b <= beta_b` and both summation bounds
    stay within `MAX_TERMS`.

    Args:
        n_cases : number of cases to return
        seed : 64-bit seed
        retry_cap : maximum number of attempts

    Returns:
        `n_cases` cases, identical for identical seeds.

    Raises:
        GenerationError : if `retry_cap` attempts do not yield enough cases
    """
    n_cases = require_int("n_cases", n_cases, 1)
    rng = np.random.default_rng(require_int("seed", seed, -(1 << 63)) & _SEED_MASK)
    cases: List[CaseParams] = []
    attempts = 0
    while len(cases) < n_cases:
        if attempts >= retry_cap:
            raise GenerationError(
                f"Only {len(cases)} of {n_cases} cases accepted after {retry_cap} draws."
            )
        attempts += 1
        u = rng.random(5)
        if not (u > 0.0).all():
            continue
        alpha_a, beta_a, alpha_b, beta_b, gamma = (int(1.0 / x + 1.0) for x in u)
        if alpha_a > beta_a or alpha_b > beta_b:
            continue
        if alpha_b > MAX_TERMS or beta_a > MAX_TERMS:
            continue
        cases.append(CaseParams(alpha_a, beta_a, alpha_b, beta_b, float(gamma)))
    logger.debug("generated %d cases in %d draws", n_cases, attempts)
    return cases


def _data_lines(path: PathLike) -> List[Tuple[int, str]]:
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            body = line.split("#", 1)[0].strip()
            if body:
                out.append((lineno, body))
    return out


def read_samples(path: PathLike) -> np.ndarray:
    "One real per line; blank lines and `#` comments are skipped."
    values = []
    for lineno, body in _data_lines(path):
        try:
            values.append(float(body))
        except ValueError:
            raise DomainError(f"{path}:{lineno}: not a real number: {body!r}") from None
    return np.asarray(values, dtype=np.float64)


def read_outcomes(path: PathLike) -> List[Outcome]:
    """
    Outcome file: whitespace-separated `T` (treatment success) and `C`
    (control success) tokens, case-insensitive, `#` comments skipped.
    """
    outcomes = []
    for lineno, body in _data_lines(path):
        for token in body.split():
            try:
                outcomes.append(Outcome(token.upper()))
            except ValueError:
                raise DomainError(
                    f"{path}:{lineno}: expected T or C, got {token!r}"
                ) from None
    return outcomes
