import math
from fractions import Fraction

import numpy as np
import pytest

from palmlab.errors import DegenerateWindow, InsufficientWindow, UnknownTilt
from palmlab.estimate import est_event_probability
from palmlab.events import parse_eventuality
from palmlab.models import (
    deterministic,
    example44,
    example44_block_ends,
    example44_cesaro_exact,
    example44_labels,
    example44_run_lengths,
    example84_exact,
    exponential,
    gamma_intervals,
    make_tilt,
    model_from_config,
    model_to_config,
    poisson_ts,
    renewal_es,
    renewal_ts_from_es,
    tilted_ts,
    uniform_intervals,
)
from palmlab.rng import chunk_rng

from conftest import agree, within


def sample_stat(model, window, n, seed, fn):
    """Mean and s.e. of a per-replication statistic."""
    gen = chunk_rng(seed, "test_models", 0)
    batch = model.sample_batch(gen, window, n)
    vals = np.array([fn(batch.pattern(i)) for i in range(n)], dtype=float)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n))


class TestIntervalDistributions:
    def test_means_exact(self):
        assert exponential(2.0).mean == 0.5
        assert gamma_intervals(2.0, 4.0).mean == 0.5
        assert deterministic(0.7).mean == 0.7
        assert uniform_intervals(1.0, 3.0).mean == 2.0

    def test_validation(self):
        with pytest.raises(ValueError):
            exponential(0.0)
        with pytest.raises(ValueError):
            gamma_intervals(-1.0, 1.0)
        with pytest.raises(ValueError):
            uniform_intervals(2.0, 1.0)

    @pytest.mark.parametrize("dist", [
        exponential(1.5),
        gamma_intervals(2.0, 1.0),
        uniform_intervals(0.5, 2.5),
        deterministic(1.25),
    ])
    def test_sample_mean(self, dist):
        rng = np.random.default_rng(5)
        x = dist.sample(rng, 40_000)
        se = x.std(ddof=1) / math.sqrt(x.size) if x.std() > 0 else 0.0
        assert abs(x.mean() - dist.mean) <= 4 * se + 1e-12

    @pytest.mark.parametrize("dist", [
        exponential(1.5),
        gamma_intervals(2.0, 1.0),
        uniform_intervals(0.5, 2.5),
        deterministic(1.25),
    ])
    def test_length_biased_moments(self, dist):
        # the reweighted law has mean E(X^2)/E(X); compare against a plain
        # sample reweighted by hand
        rng = np.random.default_rng(6)
        plain = dist.sample(rng, 200_000)
        target = float(np.sum(plain**2) / np.sum(plain))
        lb = dist.sample_length_biased(np.random.default_rng(7), 200_000)
        se = lb.std(ddof=1) / math.sqrt(lb.size) if lb.std() > 0 else 0.0
        assert abs(lb.mean() - target) <= 4 * se + 2e-3

    def test_exponential_length_bias_is_gamma2(self):
        rng = np.random.default_rng(8)
        lb = exponential(2.0).sample_length_biased(rng, 200_000)
        assert abs(lb.mean() - 1.0) < 0.01
        assert abs(np.mean(lb**2) - 6.0 / 4.0) < 0.03


class TestPoisson:
    def test_degenerate_window(self):
        gen = chunk_rng(0, "x", 0)
        with pytest.raises(DegenerateWindow):
            poisson_ts(1.0).sample_batch(gen, (-1.0, 1.0), 1)

    def test_mean_count(self):
        m = poisson_ts(1.0)
        mean, se = sample_stat(m, (-20.0, 20.0), 10_000, 11,
                               lambda p: p.count(0.0, 10.0))
        assert abs(mean - 10.0) <= 3 * se

    def test_inverse_gap_identity(self):
        # independent oracle: the straddling gap of a unit Poisson process
        # is the length-biased exponential, i.e. Gamma(2, 1)
        oracle_rng = np.random.default_rng(13)
        g = oracle_rng.gamma(2.0, 1.0, 400_000)
        oracle = float(np.mean(1.0 / g))
        m = poisson_ts(1.0)
        mean, se = sample_stat(m, (-25.0, 25.0), 40_000, 12,
                               lambda p: 1.0 / p.interval(0))
        assert abs(mean - oracle) <= 3 * se + 0.02
        assert abs(oracle - 1.0) < 0.01

    def test_straddling_gap_survival(self):
        m = poisson_ts(1.0)
        mean, se = sample_stat(m, (-25.0, 25.0), 40_000, 14,
                               lambda p: float(p.interval(0) > 1.0))
        assert abs(mean - math.exp(-1) * 2.0) <= 3 * se + 0.002

    def test_reproducible(self):
        m = poisson_ts(2.0)
        b1 = m.sample_batch(chunk_rng(42, "s", 3), (-10.0, 10.0), 50)
        b2 = m.sample_batch(chunk_rng(42, "s", 3), (-10.0, 10.0), 50)
        assert np.array_equal(b1.points, b2.points)
        b3 = m.sample_batch(chunk_rng(43, "s", 3), (-10.0, 10.0), 50)
        assert not np.array_equal(b1.points, b3.points)


class TestRenewalEs:
    def test_event_at_zero(self):
        m = renewal_es(gamma_intervals(2.0, 1.0))
        batch = m.sample_batch(chunk_rng(1, "es", 0), (-15.0, 15.0), 200)
        for i in range(200):
            assert batch.pattern(i).t(0) == 0.0

    def test_deterministic_integers(self):
        m = renewal_es(deterministic(1.0))
        p = m.sample(chunk_rng(0, "es", 1), (-5.5, 5.5)).pattern
        assert np.array_equal(p.points, np.arange(-5.0, 6.0))

    def test_exponential_case_matches_length_unbiased_gaps(self):
        m = renewal_es(exponential(1.0))
        mean, se = sample_stat(m, (-15.0, 15.0), 30_000, 3,
                               lambda p: p.interval(0))
        assert abs(mean - 1.0) <= 3 * se

    def test_gamma_mean(self):
        m = renewal_es(gamma_intervals(2.0, 1.0))
        mean, se = sample_stat(m, (-25.0, 25.0), 30_000, 4,
                               lambda p: p.interval(0))
        assert abs(mean - 2.0) <= 3 * se


class TestRenewalTs:
    def test_exponential_matches_poisson_straddle(self):
        # straddling gap must be Gamma(2, rate): mean 2, second moment 6
        m = renewal_ts_from_es(exponential(1.0))
        mean, se = sample_stat(m, (-25.0, 25.0), 40_000, 5,
                               lambda p: p.interval(0))
        assert abs(mean - 2.0) <= 3 * se
        m2, se2 = sample_stat(m, (-25.0, 25.0), 40_000, 6,
                              lambda p: p.interval(0) ** 2)
        assert abs(m2 - 6.0) <= 3 * se2

    def test_count_rate(self):
        m = renewal_ts_from_es(exponential(2.0))
        mean, se = sample_stat(m, (-10.0, 10.0), 30_000, 7,
                               lambda p: p.count(0.0, 1.0))
        assert abs(mean - 2.0) <= 3 * se

    def test_deterministic_lattice(self):
        m = renewal_ts_from_es(deterministic(1.0))
        gen = chunk_rng(9, "lat", 0)
        t1 = []
        for _ in range(20_000):
            p = m.sample(gen, (-6.5, 6.5)).pattern
            assert abs(p.interval(0) - 1.0) < 1e-12
            t1.append(p.t(1))
        t1 = np.asarray(t1)
        # T_1 uniform(0, 1): mean 1/2, variance 1/12
        assert abs(t1.mean() - 0.5) < 0.01
        assert abs(t1.var() - 1.0 / 12.0) < 0.005

    def test_uniform_arrival_fraction(self):
        m = renewal_ts_from_es(gamma_intervals(2.0, 1.0))
        mean, se = sample_stat(m, (-25.0, 25.0), 30_000, 8,
                               lambda p: p.t(1) / p.interval(0))
        assert abs(mean - 0.5) <= 3 * se
        m2, se2 = sample_stat(m, (-25.0, 25.0), 30_000, 9,
                              lambda p: (p.t(1) / p.interval(0)) ** 2)
        assert abs(m2 - 1.0 / 3.0) <= 3 * se2


class TestTilted:
    def test_unknown_tilt(self):
        with pytest.raises(UnknownTilt):
            make_tilt("frobnicate", 1.0)
        with pytest.raises(UnknownTilt):
            make_tilt("alpha0", -1.0)

    def test_identity_tilt_matches_base(self):
        base = poisson_ts(1.0)
        tilted = tilted_ts(base, make_tilt("identity"))
        A = parse_eventuality("alpha(0)>1")
        a = est_event_probability(tilted, A, 20_000, seed=1, horizon_gaps=15)
        b = est_event_probability(base, A, 20_000, seed=2, horizon_gaps=15)
        agree(a, b, label="identity tilt")

    def test_alpha0_tilt_survival(self):
        tilted = tilted_ts(poisson_ts(1.0), make_tilt("alpha0", 0.5))
        A = parse_eventuality("alpha(0)>1")
        est = est_event_probability(tilted, A, 60_000, seed=3, horizon_gaps=15)
        within(est, math.exp(-1) * 2.5, label="reweighted survival")
        assert 0.0 < est.ess < est.reps

    def test_alpha01_independence_frontier(self):
        # with weights (g0, g1), g1 = rate - 2 g0, the two gaps around the
        # origin stay independent only at the endpoints of the frontier
        def weighted_cov(g0, g1, seed):
            base = poisson_ts(1.0)
            m = tilted_ts(base, make_tilt("alpha01", g0, g1))
            gen = chunk_rng(seed, "cov", 0)
            batch = m.sample_batch(gen, (-25.0, 25.0), 60_000)
            a0 = np.empty(batch.n)
            a1 = np.empty(batch.n)
            for i in range(batch.n):
                p = batch.pattern(i)
                a0[i] = p.interval(0)
                a1[i] = p.interval(1)
            w = batch.weights / batch.weights.sum()
            f = (a0 > 1.0).astype(float)
            g = (a1 > 1.0).astype(float)
            cov = np.sum(w * f * g) - np.sum(w * f) * np.sum(w * g)
            # crude batch s.e. for the weighted covariance
            nb = 60
            parts = []
            for chunk in np.array_split(np.arange(batch.n), nb):
                wc = batch.weights[chunk] / batch.weights[chunk].sum()
                parts.append(np.sum(wc * f[chunk] * g[chunk])
                             - np.sum(wc * f[chunk]) * np.sum(wc * g[chunk]))
            se = np.std(parts, ddof=1) / math.sqrt(nb)
            return cov, se

        for g0, g1, seed in ((0.0, 1.0, 21), (0.5, 0.0, 22)):
            cov, se = weighted_cov(g0, g1, seed)
            assert abs(cov) <= 3 * se + 0.002, (g0, g1, cov, se)
        cov, se = weighted_cov(0.25, 0.5, 23)
        assert abs(cov) > 3 * se, "interior weights must break independence"


class TestExample84:
    def test_matches_importance_sampling_oracle(self):
        # the exact sampler must agree with self-normalized reweighting of
        # the plain stationary law on a five-eventuality battery
        exact = example84_exact(1.0)
        tilted = tilted_ts(poisson_ts(1.0), make_tilt("alpha0", 0.5))
        five = [parse_eventuality(t) for t in (
            "alpha(0)>1", "alpha(0)>2", "alpha(1)>1", "count(0,1]==0", "T1<=0.5",
        )]
        for i, ev in enumerate(five):
            a = est_event_probability(exact, ev, 40_000, seed=30 + i,
                                      horizon_gaps=15)
            b = est_event_probability(tilted, ev, 40_000, seed=60 + i,
                                      horizon_gaps=15)
            agree(a, b, label=f"oracle equivalence {ev.label}")

    def test_survival_and_mean(self):
        m = example84_exact(1.0)
        mean, se = sample_stat(m, (-25.0, 25.0), 40_000, 31,
                               lambda p: p.interval(0))
        assert abs(mean - 3.0) <= 3 * se
        surv, se2 = sample_stat(m, (-25.0, 25.0), 40_000, 32,
                                lambda p: float(p.interval(0) > 2.0))
        assert abs(surv - 5.0 * math.exp(-2)) <= 3 * se2 + 0.002

    def test_uniform_origin_placement(self):
        m = example84_exact(1.0)
        mean, se = sample_stat(m, (-25.0, 25.0), 30_000, 33,
                               lambda p: p.t(1) / p.interval(0))
        assert abs(mean - 0.5) <= 3 * se


class TestExample44:
    def test_run_lengths_and_block_ends(self):
        assert example44_run_lengths(7) == [4, 4, 8, 8, 24, 24, 72]
        assert example44_block_ends(6) == [4, 8, 16, 24, 48, 72]

    def test_labels_prefix(self):
        assert example44_labels(10).tolist() == [1, 1, 1, 1, 0, 0, 0, 0, 1, 1]

    def test_cesaro_exact_rationals(self):
        assert example44_cesaro_exact(8) == Fraction(1, 2)
        assert example44_cesaro_exact(16) == Fraction(3, 4)
        assert example44_cesaro_exact(24) == Fraction(1, 2)
        assert example44_cesaro_exact(48) == Fraction(3, 4)

    def test_gap_encoding(self):
        m = example44(50)
        p = m.sample(chunk_rng(0, "d", 0), (-4.5, 30.5)).pattern
        assert p.t(0) == 0.0 and p.t(1) == 1.0
        labels = example44_labels(20)
        for i in range(1, 15):
            assert p.interval(i) == 2.0 - labels[i - 1]
        # mirrored side has unit gaps
        assert p.interval(-1) == 1.0 and p.interval(-2) == 1.0

    def test_seed_independent(self):
        m = example44(30)
        a = m.sample(chunk_rng(1, "d", 0), (-3.5, 20.5)).pattern
        b = m.sample(chunk_rng(999, "other", 7), (-3.5, 20.5)).pattern
        assert np.array_equal(a.points, b.points)

    def test_window_past_realization(self):
        m = example44(5)
        with pytest.raises(InsufficientWindow):
            m.sample(chunk_rng(0, "d", 0), (-2.5, 100.0))


class TestConfigRoundTrip:
    @pytest.mark.parametrize("model", [
        poisson_ts(1.5),
        renewal_es(gamma_intervals(2.0, 1.0)),
        renewal_ts_from_es(uniform_intervals(0.5, 1.5)),
        renewal_ts_from_es(deterministic(1.0)),
        example84_exact(2.0),
        example44(40),
        tilted_ts(poisson_ts(1.0), make_tilt("alpha0", 0.5)),
        tilted_ts(poisson_ts(1.0), make_tilt("alpha01", 0.25, 0.5)),
    ])
    def test_round_trip(self, model):
        cfg = {k: str(v) for k, v in model_to_config(model).items()}
        back = model_from_config(cfg)
        assert back.descriptor == model.descriptor
        assert back.law_tag == model.law_tag
        if model.interval is not None:
            assert back.interval == model.interval
