import itertools
import logging
import random

import pytest
from hypothesis import given
from hypothesis.strategies import sampled_from

from betarate import (
    BetaPosterior,
    Decision,
    DomainError,
    Method,
    PayoutRatio,
    SizeError,
    decide,
    expected_payout,
    hyp2f1_neg_int_series,
    hyp2f1_via_jacobi,
    mc_oracle,
    posterior_from_counts,
    pr_rate_greater,
    pr_scaled_double_sum,
    pr_scaled_rate_greater,
)
from betarate.bayes import DOUBLE_SUM_ATOL, EXACT_DOUBLE_SUM_TERMS
from betarate.testing import Oracle

from .strategies import assert_close, gammas, posteriors


@pytest.mark.bayes
def test_posterior_from_counts() -> None:
    "Test posterior construction and validation"
    assert posterior_from_counts(0, 0) == BetaPosterior(1, 1)
    assert posterior_from_counts(3, 7) == BetaPosterior(4, 8)
    big = posterior_from_counts(10**6, 0)
    assert (big.alpha, big.beta) == (10**6 + 1, 1)
    with pytest.raises(DomainError):
        posterior_from_counts(-1, 0)
    with pytest.raises(DomainError):
        BetaPosterior(1.5, 2)
    with pytest.raises(DomainError):
        BetaPosterior(0, 2)


@pytest.mark.bayes
def test_payout_ratio() -> None:
    "Test payout ratio validation"
    assert PayoutRatio(2).gamma == 2.0
    for bad in (0.0, -1.0, float("inf"), float("nan")):
        with pytest.raises(DomainError):
            PayoutRatio(bad)


@pytest.mark.bayes
def test_rate_examples() -> None:
    "Test the rate comparison on known values"
    r = pr_rate_greater(BetaPosterior(1, 1), BetaPosterior(1, 1))
    assert_close(r.probability, 0.5, 1e-14)
    assert r.method is Method.ClosedFormRate and r.terms_evaluated == 1
    assert_close(pr_rate_greater(BetaPosterior(1, 1), BetaPosterior(2, 1)).probability, 2 / 3, 1e-14)
    assert pr_rate_greater(BetaPosterior(2, 3), BetaPosterior(4, 5)).probability == pytest.approx(
        Oracle.pr_rate((2, 3), (4, 5)), abs=1e-9
    )


@given(posteriors(200), posteriors(200))
@pytest.mark.bayes
def test_rate_complement(a: BetaPosterior, b: BetaPosterior) -> None:
    "Test Pr(B > A) + Pr(A > B) = 1"
    total = pr_rate_greater(a, b).probability + pr_rate_greater(b, a).probability
    assert total == pytest.approx(1.0, abs=1e-10)


@given(posteriors(200), posteriors(200))
@pytest.mark.bayes
def test_rate_data_monotone(a: BetaPosterior, b: BetaPosterior) -> None:
    "Test more wins help and more losses hurt"
    p = pr_rate_greater(a, b).probability
    more_wins = BetaPosterior(b.alpha + 1, b.beta)
    more_losses = BetaPosterior(b.alpha, b.beta + 1)
    assert pr_rate_greater(a, more_wins).probability >= p - 1e-12
    assert pr_rate_greater(a, more_losses).probability <= p + 1e-12


@pytest.mark.bayes
def test_scaled_examples() -> None:
    "Test the scaled comparison and its gamma dispatch"
    u = BetaPosterior(1, 1)
    r = pr_scaled_rate_greater(u, u, 2.0)
    assert_close(r.probability, 0.25, 1e-14)
    assert r.method is Method.ClosedFormScaled and not r.cancellation_flag

    delegated = pr_scaled_rate_greater(u, BetaPosterior(2, 1), 1.0)
    assert delegated == pr_rate_greater(u, BetaPosterior(2, 1))
    assert_close(delegated.probability, 2 / 3, 1e-14)

    a, b = BetaPosterior(2, 4), BetaPosterior(3, 3)
    low = pr_scaled_rate_greater(a, b, PayoutRatio(0.5)).probability
    assert low == pytest.approx(1.0 - pr_scaled_rate_greater(b, a, 2.0).probability, abs=1e-12)

    with pytest.raises(DomainError):
        pr_scaled_rate_greater(u, u, float("inf"))


@given(posteriors(200), posteriors(200))
@pytest.mark.bayes
def test_scaled_gamma_one(a: BetaPosterior, b: BetaPosterior) -> None:
    "Test gamma = 1 delegates to the rate comparison"
    assert pr_scaled_rate_greater(a, b, 1.0).probability == pr_rate_greater(a, b).probability


@given(posteriors(10), posteriors(10))
@pytest.mark.bayes
def test_scaled_gamma_near_one(a: BetaPosterior, b: BetaPosterior) -> None:
    "Test continuity at gamma = 1"
    near = pr_scaled_rate_greater(a, b, 1.0 + 1e-8).probability
    assert near == pytest.approx(pr_rate_greater(a, b).probability, abs=1e-6)


@given(posteriors(200), posteriors(200), gammas)
@pytest.mark.bayes
def test_scaled_range(a: BetaPosterior, b: BetaPosterior, gamma: float) -> None:
    "Test the scaled comparison stays in [0, 1]"
    for r in (
        pr_scaled_rate_greater(a, b, gamma, cross_check=False),
        pr_scaled_rate_greater(a, b, 1.0 / gamma, cross_check=False),
    ):
        assert 0.0 <= r.probability <= 1.0


@given(posteriors(), posteriors())
@pytest.mark.bayes
def test_scaled_monotone_in_gamma(a: BetaPosterior, b: BetaPosterior) -> None:
    "Test the scaled comparison falls as gamma grows"
    grid = [1.0, 1.05, 1.2, 1.5, 2.0, 3.0, 5.0, 8.0, 13.0, 21.0, 34.0, 50.0]
    values = [pr_scaled_rate_greater(a, b, g).probability for g in grid]
    for hi, lo in zip(values, values[1:]):
        assert lo <= hi + 1e-12


@pytest.mark.bayes
def test_double_sum_examples() -> None:
    "Test the double sum on known values"
    u = BetaPosterior(1, 1)
    r = pr_scaled_double_sum(u, u, 2.0)
    assert_close(r.probability, 0.25, 1e-14)
    assert r.method is Method.DoubleSum and r.terms_evaluated == 1

    a, b = BetaPosterior(2, 2), BetaPosterior(2, 2)
    assert pr_scaled_double_sum(a, b, 3.0).probability == pytest.approx(
        pr_scaled_rate_greater(a, b, 3.0).probability, abs=1e-10
    )
    a, b = BetaPosterior(1, 6), BetaPosterior(2, 5)
    assert pr_scaled_double_sum(a, b, 1.25).probability == pytest.approx(
        Oracle.pr_scaled((1, 6), (2, 5), 1.25), abs=1e-8
    )
    assert pr_scaled_double_sum(a, b, 1.25).terms_evaluated == 6 * 2
    with pytest.raises(DomainError):
        pr_scaled_double_sum(u, u, 1.0)
    with pytest.raises(DomainError):
        pr_scaled_double_sum(u, u, 0.5)


@given(posteriors(30), posteriors(30), sampled_from([1.1, 2.0, 5.0, 10.0]))
@pytest.mark.bayes
def test_backend_triangle(a: BetaPosterior, b: BetaPosterior, gamma: float) -> None:
    "Test the single and double sums agree on the quadrature domain"
    single = pr_scaled_rate_greater(a, b, gamma).probability
    double = pr_scaled_double_sum(a, b, gamma)
    assert not double.cancellation_flag
    assert double.probability == pytest.approx(single, rel=1e-9, abs=1e-15)


@pytest.mark.bayes
def test_double_sum_alternating_cases() -> None:
    "Test the double sum on posteriors where its k-sum cancels heavily"
    cases = [
        ((25, 30), (30, 1), 2.0, 0.6676860501697603),
        ((1, 30), (3, 1), 1.1, 0.99975604838709),
        ((4, 19), (1, 1), 1.5, None),
    ]
    for a, b, gamma, expected in cases:
        got = pr_scaled_double_sum(BetaPosterior(*a), BetaPosterior(*b), gamma)
        single = pr_scaled_rate_greater(BetaPosterior(*a), BetaPosterior(*b), gamma)
        assert not got.cancellation_flag
        assert got.probability == pytest.approx(single.probability, rel=1e-9), (a, b, gamma)
        assert got.probability == pytest.approx(Oracle.pr_scaled(a, b, gamma), abs=1e-9)
        if expected is not None:
            assert got.probability == pytest.approx(expected, abs=1e-12)


@pytest.mark.bayes
def test_double_sum_flag_matches_error() -> None:
    "Test the floating-point double sum flags every result off by more than its tolerance"
    terms = EXACT_DOUBLE_SUM_TERMS + 1
    clean = pr_scaled_double_sum(BetaPosterior(1, 1), BetaPosterior(terms, 1), 2.0)
    assert clean.terms_evaluated == terms and not clean.cancellation_flag
    assert clean.probability == pytest.approx(
        pr_scaled_rate_greater(BetaPosterior(1, 1), BetaPosterior(terms, 1), 2.0).probability,
        abs=DOUBLE_SUM_ATOL,
    )
    assert pr_scaled_double_sum(BetaPosterior(25, 200), BetaPosterior(30, 1), 2.0).cancellation_flag

    rng = random.Random(29)
    for _ in range(40):
        a = BetaPosterior(rng.randint(1, 60), rng.randint(40, 150))
        b = BetaPosterior(rng.randint(110, 200), rng.randint(1, 60))
        gamma = rng.choice([1.1, 2.0, 5.0, 10.0])
        double = pr_scaled_double_sum(a, b, gamma)
        gap = abs(double.probability - pr_scaled_rate_greater(a, b, gamma).probability)
        assert double.cancellation_flag or gap <= DOUBLE_SUM_ATOL, (a, b, gamma, gap)


@pytest.mark.bayes
@pytest.mark.acceptance
def test_backend_triangle_grid() -> None:
    "Test the series, double-sum and Jacobi backends on a random grid"
    rng = random.Random(41)
    for _ in range(200):
        a = BetaPosterior(rng.randint(1, 30), rng.randint(1, 30))
        b = BetaPosterior(rng.randint(1, 30), rng.randint(1, 30))
        gamma = rng.choice([1.1, 2.0, 5.0, 10.0, rng.uniform(1.01, 20.0)])
        single = pr_scaled_rate_greater(a, b, gamma).probability
        double = pr_scaled_double_sum(a, b, gamma).probability
        assert double == pytest.approx(single, rel=1e-9, abs=1e-15), (a, b, gamma)
        if b.beta >= a.beta >= 2:
            for i in range(b.alpha):
                s = a.alpha + i
                series = hyp2f1_neg_int_series(a.beta - 1, s, s + b.beta + 1, 1.0 / gamma)
                jacobi = hyp2f1_via_jacobi(a.beta, s, b.beta, 1.0 / gamma)
                assert jacobi.sign == series.sign
                assert abs(jacobi.log_magnitude - series.log_magnitude) <= 1e-9


@pytest.mark.bayes
def test_cross_check_silent(caplog: pytest.LogCaptureFixture) -> None:
    "Test the Jacobi cross-check stays quiet when the routes agree"
    # Jacobi route is defined on these and must agree with the series
    with caplog.at_level(logging.WARNING, logger="betarate.bayes"):
        for a, b in [((3, 4), (5, 6)), ((10, 12), (7, 20)), ((2, 2), (9, 2))]:
            pr_scaled_rate_greater(BetaPosterior(*a), BetaPosterior(*b), 1.7)
    assert not caplog.records


@pytest.mark.bayes
def test_size_guard() -> None:
    "Test oversized posteriors are refused"
    u = BetaPosterior(1, 1)
    huge = BetaPosterior(100_001, 1)
    with pytest.raises(SizeError):
        pr_rate_greater(u, huge)
    with pytest.raises(SizeError):
        pr_scaled_rate_greater(BetaPosterior(1, 100_001), u, 2.0)
    with pytest.raises(SizeError):
        pr_scaled_double_sum(u, huge, 2.0)


@pytest.mark.bayes
def test_mc_oracle_deterministic() -> None:
    "Test Monte Carlo estimates depend on the seed only"
    a, b = BetaPosterior(3, 5), BetaPosterior(4, 6)
    first = mc_oracle(a, b, 1.5, 200_000, seed=7)
    assert first == mc_oracle(a, b, 1.5, 200_000, seed=7)
    assert first == mc_oracle(a, b, 1.5, 200_000, seed=7, n_jobs=4)
    assert first == mc_oracle(a, b, 1.5, 200_000, seed=7, n_jobs=-1)
    assert first.method is Method.MonteCarlo and first.terms_evaluated == 200_000
    assert first != mc_oracle(a, b, 1.5, 200_000, seed=8)
    with pytest.raises(DomainError):
        mc_oracle(a, b, 1.5, 0, seed=7)
    with pytest.raises(DomainError):
        mc_oracle(a, b, 1.5, 200_000, seed=7, n_jobs=0)


@pytest.mark.bayes
def test_mc_oracle_tails() -> None:
    "Test Monte Carlo estimates at the extremes"
    u = BetaPosterior(1, 1)
    assert mc_oracle(u, u, 1e6, 10**5, seed=1).probability <= 1e-4
    assert mc_oracle(u, u, 2.0, 10**6, seed=2).probability == pytest.approx(0.25, abs=2e-3)


@pytest.mark.bayes
@pytest.mark.acceptance
def test_mc_oracle_agreement() -> None:
    "Test Monte Carlo against the closed form"
    a, b = BetaPosterior(3, 5), BetaPosterior(4, 6)
    exact = pr_scaled_rate_greater(a, b, 1.5).probability
    assert mc_oracle(a, b, 1.5, 10**7, seed=11, n_jobs=2).probability == pytest.approx(
        exact, abs=1e-3
    )
    rng = random.Random(3)
    for k in range(3):
        a = BetaPosterior(rng.randint(1, 30), rng.randint(1, 30))
        b = BetaPosterior(rng.randint(1, 30), rng.randint(1, 30))
        gamma = rng.uniform(1.0, 3.0)
        exact = pr_scaled_rate_greater(a, b, gamma).probability
        mc = mc_oracle(a, b, gamma, 10**7, seed=100 + k, n_jobs=2).probability
        assert mc == pytest.approx(exact, abs=1e-3)


@pytest.mark.bayes
def test_decide() -> None:
    "Test the decision rule"
    u = BetaPosterior(1, 1)
    assert decide(u, u, 2.0, 0.9) is Decision.Undecided
    assert decide(BetaPosterior(1, 100), BetaPosterior(100, 1), 1.01, 0.95) is Decision.PreferB
    assert decide(BetaPosterior(100, 1), BetaPosterior(1, 100), 1.01, 0.95) is Decision.PreferA
    for threshold in (0.51, 0.75, 0.99):
        assert decide(BetaPosterior(4, 7), BetaPosterior(4, 7), 1.0, threshold) is Decision.Undecided
    for bad in (0.5, 1.0, 0.2):
        with pytest.raises(DomainError):
            decide(u, u, 2.0, bad)


@pytest.mark.bayes
def test_expected_payout() -> None:
    "Test the posterior mean payout"
    assert expected_payout(BetaPosterior(1, 3)) == 0.25
    assert expected_payout(BetaPosterior(1, 3), 4.0) == 1.0


@pytest.mark.bayes
@pytest.mark.acceptance
@pytest.mark.parametrize("gamma", [1.0, 1.1, 2.0, 5.0, 10.0])
def test_quadrature_equivalence(gamma: float) -> None:
    "Test both closed-form backends against quadrature"
    params = [1, 3, 13, 30]
    for (aa, ba, ab, bb) in itertools.product(params, repeat=4):
        a, b = BetaPosterior(aa, ba), BetaPosterior(ab, bb)
        expected = Oracle.pr_scaled((aa, ba), (ab, bb), gamma)
        got = pr_scaled_rate_greater(a, b, gamma)
        assert got.probability == pytest.approx(expected, abs=1e-8), (aa, ba, ab, bb)
        if gamma > 1.0:
            double = pr_scaled_double_sum(a, b, gamma).probability
            assert double == pytest.approx(expected, abs=1e-8), (aa, ba, ab, bb)


@pytest.mark.bayes
@pytest.mark.acceptance
def test_rate_complement_grid() -> None:
    "Test complementarity and the gamma = 1 dispatch on 1000 random posteriors"
    rng = random.Random(8)
    for _ in range(1000):
        a = BetaPosterior(rng.randint(1, 200), rng.randint(1, 200))
        b = BetaPosterior(rng.randint(1, 200), rng.randint(1, 200))
        forward = pr_rate_greater(a, b)
        assert forward.probability + pr_rate_greater(b, a).probability == pytest.approx(
            1.0, abs=1e-10
        ), (a, b)
        assert pr_scaled_rate_greater(a, b, 1.0).probability == forward.probability


@given(posteriors(200))
@pytest.mark.bayes
def test_rate_identical_posteriors(p: BetaPosterior) -> None:
    "Test identical posteriors give one half"
    assert pr_rate_greater(p, p).probability == pytest.approx(0.5, abs=1e-10)
