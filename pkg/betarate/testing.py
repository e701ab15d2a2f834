# type: ignore

"""
Independent oracles for the test-suite.

Nothing here calls the closed forms: probabilities come from adaptive
quadrature (scipy), exact rational arithmetic or brute-force enumeration
and simulation.
"""

import math
from fractions import Fraction
from typing import Dict, Tuple

import numpy as np
from scipy import integrate, special, stats

QUAD_OPTS = dict(epsabs=1e-13, epsrel=1e-12, limit=200)


class Oracle:
    @staticmethod
    def beta_cdf(x: float, alpha: float, beta: float) -> float:
        "Quadrature of the Beta(alpha, beta) density over [0, x]"
        if x <= 0.0:
            return 0.0
        log_norm = special.betaln(alpha, beta)

        def pdf(t: float) -> float:
            if t <= 0.0 or t >= 1.0:
                return 0.0
            return math.exp((alpha - 1) * math.log(t) + (beta - 1) * math.log1p(-t) - log_norm)

        value, _ = integrate.quad(pdf, 0.0, min(x, 1.0), **QUAD_OPTS)
        return value

    @staticmethod
    def pr_scaled(a: Tuple[int, int], b: Tuple[int, int], gamma: float) -> float:
        "Pr(phi_B > gamma phi_A) as one quadrature over phi_A of the B tail"
        alpha_a, beta_a = a
        alpha_b, beta_b = b
        upper = min(1.0, 1.0 / gamma)

        def integrand(phi: float) -> float:
            return stats.beta.pdf(phi, alpha_a, beta_a) * stats.beta.sf(
                gamma * phi, alpha_b, beta_b
            )

        value, _ = integrate.quad(integrand, 0.0, upper, **QUAD_OPTS)
        return value

    @staticmethod
    def pr_rate(a: Tuple[int, int], b: Tuple[int, int]) -> float:
        "Pr(phi_B > phi_A) by quadrature"
        return Oracle.pr_scaled(a, b, 1.0)

    @staticmethod
    def fisher_tables(m_a: int, m_b: int, n_tot: int) -> Dict[int, float]:
        "Point probability of every table with the given margins, keyed by wins_b"
        m_tot = m_a + m_b
        out = {}
        for wins_b in range(0, m_b + 1):
            wins_a = n_tot - wins_b
            if not 0 <= wins_a <= m_a:
                continue
            p = Fraction(
                math.comb(m_a, wins_a) * math.comb(m_b, wins_b), math.comb(m_tot, n_tot)
            )
            out[wins_b] = float(p)
        return out

    @staticmethod
    def hyp2f1_terms(m: int, b: float, c: float, z: float) -> Tuple[float, float]:
        "Exact rational sum of 2F1(-m, b; c; z), and the sum of |terms|"
        b, c, z = Fraction(b), Fraction(c), Fraction(z)
        term = Fraction(1)
        total = Fraction(1)
        magnitude = Fraction(1)
        for n in range(m):
            term *= Fraction(-(m - n), n + 1) * (b + n) / (c + n) * z
            total += term
            magnitude += abs(term)
        return float(total), float(magnitude)

    @staticmethod
    def jacobi(n: int, x: float, y: float, t: float) -> float:
        "P_n^(x, y)(t) from its hypergeometric form, in rational arithmetic"
        x, y, t = Fraction(x), Fraction(y), Fraction(t)
        w = (1 - t) / 2
        total = Fraction(0)
        coeff = Fraction(1)
        for k in range(n + 1):
            total += coeff
            coeff *= Fraction(-(n - k), k + 1) * (n + x + y + 1 + k) / (x + 1 + k) * w
        pochhammer = Fraction(1)
        for k in range(n):
            pochhammer *= (x + 1 + k) / (k + 1)
        return float(pochhammer * total)

    @staticmethod
    def walk_hit_rate(
        n_max: int, d_star: int, p_up: float, n_walks: int, seed: int, chunk: int = 10_000
    ) -> float:
        "Fraction of simulated walks reaching +d_star within n_max steps"
        rng = np.random.default_rng(seed)
        hits = 0
        done = 0
        while done < n_walks:
            size = min(chunk, n_walks - done)
            steps = np.where(rng.random((size, n_max)) < p_up, 1, -1).astype(np.int32)
            hits += int(np.count_nonzero(np.cumsum(steps, axis=1).max(axis=1) >= d_star))
            done += size
        return hits / n_walks
