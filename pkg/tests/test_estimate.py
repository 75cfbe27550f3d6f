import math

import numpy as np
import pytest

from palmlab.errors import InsufficientCoverage, NoStraddle, ZeroDenominator
from palmlab.estimate import (
    est_event_probability,
    est_intensity,
    est_intermediate,
    est_palm_zero,
    est_shifted_palm,
    guard_window,
    mc_mean,
    pstar_model,
    resample_pstar,
    run_kernel,
    straddle_gaps,
)
from palmlab.events import BATTERY, ev_true, parse_eventuality
from palmlab.models import (
    deterministic,
    example44,
    example84_exact,
    exponential,
    gamma_intervals,
    poisson_ts,
    renewal_es,
    renewal_ts_from_es,
)
from palmlab.pattern import PointPattern

from conftest import agree, palm_renewal_oracle, within

A_GAP = parse_eventuality("alpha(0)>1")
HG = 15.0


class TestPalmZero:
    def test_poisson_against_renewal_oracle(self):
        # event-centered law of a unit Poisson process has i.i.d. unit
        # exponential gaps
        oracle, oracle_se = palm_renewal_oracle(
            lambda r, size: r.exponential(1.0, size),
            lambda left, right: (right[:, 0] > 1.0).astype(float),
            200_000, seed=5,
        )
        assert abs(oracle - math.exp(-1)) < 0.004
        est = est_palm_zero(poisson_ts(1.0), A_GAP, 10.0, 50_000, seed=17,
                            horizon_gaps=HG)
        assert abs(est.value - oracle) <= 3 * math.hypot(est.std_error, oracle_se) + 0.002
        within(est, math.exp(-1), label="palm zero")

    def test_true_is_exactly_one(self):
        est = est_palm_zero(poisson_ts(1.0), ev_true(), 5.0, 2_000, seed=1)
        assert est.value == 1.0 and est.std_error == 0.0

    def test_renewal_matches_direct_es_simulation(self):
        d = gamma_intervals(2.0, 1.0)
        model = renewal_ts_from_es(d)
        est = est_palm_zero(model, A_GAP, 10.0, 50_000, seed=3, horizon_gaps=HG)
        oracle, oracle_se = palm_renewal_oracle(
            lambda r, size: r.gamma(2.0, 1.0, size),
            lambda left, right: (right[:, 0] > 1.0).astype(float),
            200_000, seed=6,
        )
        assert abs(est.value - oracle) <= 3 * math.hypot(est.std_error, oracle_se) + 0.002

    def test_window_length_invariance(self):
        m = poisson_ts(1.0)
        a = est_palm_zero(m, A_GAP, 5.0, 40_000, seed=8, stream="xa", horizon_gaps=HG)
        b = est_palm_zero(m, A_GAP, 20.0, 40_000, seed=8, stream="xb", horizon_gaps=HG)
        agree(a, b, label="x invariance")

    def test_requires_ts(self):
        with pytest.raises(ValueError):
            est_palm_zero(renewal_es(exponential(1.0)), A_GAP, 5.0, 100)

    def test_zero_denominator(self):
        # an eventuality window is irrelevant: force no events by an
        # empty analysis interval on a sparse model
        with pytest.raises(ZeroDenominator):
            est_palm_zero(poisson_ts(0.001), ev_true(), 0.001, 64, seed=0,
                          horizon_gaps=0.01)


class TestShiftedPalm:
    def test_flat_for_stationary(self):
        m = poisson_ts(1.0)
        edges = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
        bins = est_shifted_palm(m, A_GAP, edges, 30_000, seed=4, horizon_gaps=HG)
        ref = est_palm_zero(m, A_GAP, 10.0, 30_000, seed=5, horizon_gaps=HG)
        for b in bins:
            assert b.flag == ""
            agree(b.estimate, ref, label=f"bin {b.bin_lo}")

    def test_example84_left_side_independence(self):
        m = example84_exact(1.0)
        for c, expected in ((0.5, math.exp(-0.5)), (1.0, math.exp(-1.0))):
            ev = parse_eventuality(f"alpha(-1)>{c}")
            bins = est_shifted_palm(m, ev, np.array([-1.25, -0.75]), 50_000,
                                    seed=9, horizon_gaps=HG)
            within(bins[0].estimate, expected, label=f"left independence c={c}")

    def test_true_in_every_bin(self):
        m = example84_exact(1.0)
        edges = np.array([-1.0, 0.0, 1.0])
        bins = est_shifted_palm(m, ev_true(), edges, 5_000, seed=2)
        for b in bins:
            assert b.count > 0
            assert b.estimate.value == 1.0

    def test_empty_bin_flagged(self):
        m = poisson_ts(1.0)
        bins = est_shifted_palm(m, ev_true(), np.array([0.0, 1e-7]), 256, seed=3)
        assert bins[0].flag == "empty"

    def test_per_bin_eventualities(self):
        m = poisson_ts(1.0)
        edges = np.array([-1.0, 0.0, 1.0])
        per_bin = [parse_eventuality("alpha(0)>1"), parse_eventuality("alpha(0)>2")]
        bins = est_shifted_palm(m, per_bin, edges, 30_000, seed=6, horizon_gaps=HG)
        # seen from an event, alpha(0) is the following gap, which is a unit
        # exponential under the event-centered Poisson law
        within(bins[0].estimate, math.exp(-1), label="bin A1")
        within(bins[1].estimate, math.exp(-2), label="bin A2")


class TestIntensity:
    def test_poisson_flat(self):
        m = poisson_ts(2.0)
        edges = np.linspace(-2.0, 2.0, 9)
        prof = est_intensity(m, edges, 20_000, seed=5)
        assert np.all(np.abs(prof.values - 2.0) <= 3 * prof.std_errors + 0.01)

    def test_profile_integrates_to_mean_count(self):
        m = poisson_ts(1.0)
        edges = np.linspace(0.0, 3.0, 7)
        prof = est_intensity(m, edges, 30_000, seed=6)
        integral = float(np.sum(prof.values * prof.widths))
        se = float(np.sqrt(np.sum((prof.std_errors * prof.widths) ** 2)))
        assert abs(integral - 3.0) <= 4 * se

    def test_example84_profile(self):
        m = example84_exact(1.0)
        prof0 = est_intensity(m, np.array([-0.025, 0.025]), 80_000, seed=7,
                              horizon_gaps=HG)
        v0, s0 = prof0.value_at(0.0)
        assert abs(v0 - 0.5) <= 3 * s0 + 0.01
        prof2 = est_intensity(m, np.array([1.975, 2.025]), 80_000, seed=8,
                              horizon_gaps=HG)
        v2, s2 = prof2.value_at(2.0)
        assert abs(v2 - (1.0 - math.exp(-2.0) / 2.0)) <= 3 * s2 + 0.01

    def test_example44_sawtooth_exact(self):
        # deterministic pattern: per-bin rate equals the event count over
        # the bin width, computed directly from the gap encoding
        m = example44(60)
        edges = np.arange(0.0, 12.5, 0.5)
        prof = est_intensity(m, edges, 1, seed=0)
        p = m.sample_batch(np.random.default_rng(0), (-20.0, 40.0), 1).pattern(0)
        for lo, hi, v in zip(edges[:-1], edges[1:], prof.values):
            assert v == pytest.approx(p.count(lo, hi) / (hi - lo))

    def test_empty_bin_reports_zero_rate_infinite_error(self):
        m = example44(30)
        prof = est_intensity(m, np.array([1.2, 1.8]), 1, seed=0)
        assert prof.values[0] == 0.0 and math.isinf(prof.std_errors[0])

    def test_marked_intensity(self):
        # rate of events whose following gap exceeds 1, for unit Poisson:
        # lambda * P0(gap > 1) = exp(-1)
        m = poisson_ts(1.0)
        prof = est_intensity(m, np.array([-0.5, 0.5]), 40_000, A=A_GAP,
                             seed=9, horizon_gaps=HG)
        assert abs(prof.values[0] - math.exp(-1)) <= 3 * prof.std_errors[0] + 0.002


class TestIntermediate:
    def test_event_stationary_invariance(self):
        m = renewal_es(gamma_intervals(2.0, 1.0))
        ref = est_event_probability(m, A_GAP, 30_000, seed=1, horizon_gaps=HG)
        for n in (-2, 1, 3):
            est = est_intermediate(m, n, A_GAP, 30_000, seed=10 + n,
                                   horizon_gaps=HG)
            agree(est, ref, label=f"n={n}")

    def test_poisson_against_es_oracle(self):
        # re-centering at T_0 weights the event-centered law by the gap:
        # oracle = rate * mean(gap * indicator) over i.i.d. exponential gaps
        rng = np.random.default_rng(3)
        g = rng.exponential(1.0, 400_000)
        oracle = float(np.mean(g * (g > 1.0)))
        est = est_intermediate(poisson_ts(1.0), 0, A_GAP, 50_000, seed=21,
                               horizon_gaps=HG)
        assert abs(est.value - oracle) <= 3 * est.std_error + 0.004
        assert est.coverage > 0.99

    def test_example84_straddling_survival(self):
        est = est_intermediate(example84_exact(1.0), 0, A_GAP, 50_000, seed=22,
                               horizon_gaps=HG)
        within(est, 2.5 * math.exp(-1), label="recentered survival")

    def test_example84_far_index_forgets_reweighting(self):
        # standing far from the origin, the view no longer overlaps the
        # reweighted straddling gap; the law is the plain event-centered one
        for n in (8, -8):
            est = est_intermediate(example84_exact(1.0), n, A_GAP, 40_000,
                                   seed=23 + n, horizon_gaps=HG)
            within(est, math.exp(-1), label=f"far intermediate n={n}")

    def test_insufficient_coverage(self):
        m = renewal_es(deterministic(1.0))
        with pytest.raises(InsufficientCoverage):
            est_intermediate(m, 30, A_GAP, 256, seed=0, horizon_gaps=2.0,
                             window=(-5.0, 5.0))


class TestResamplePstar:
    def test_u_zero_lands_on_event(self):
        p = PointPattern(np.array([-0.4, 0.3, 1.7]), (-5.0, 5.0))
        q = resample_pstar(p, 0.0)
        assert q.t(0) == 0.0

    def test_lattice_midpoint(self):
        p = PointPattern(np.array([-2.0, -1.0, 1e-9, 1.0, 2.0]), (-4.0, 4.0))
        q = resample_pstar(p, 0.5)
        assert q.t(1) == pytest.approx(0.5, abs=1e-6)

    def test_requires_straddle(self):
        with pytest.raises(NoStraddle):
            resample_pstar(PointPattern(np.array([1.0, 2.0]), (-1.0, 3.0)), 0.3)

    def test_uniform_arrival_ratio(self):
        ps = pstar_model(renewal_es(gamma_intervals(2.0, 1.0)))

        def kernel(batch, ctx):
            pos0, a0, ok = straddle_gaps(batch, ctx)
            safe = np.clip(pos0, 0, max(batch.points.size - 2, 0))
            t1 = batch.points[safe + 1]
            return np.where(ok, t1 / a0, 0.0), ~ok

        window = guard_window(ps, HG * ps.scale)
        est = mc_mean(ps, window, kernel, 40_000, seed=31)
        within(est, 0.5, label="uniform ratio")

    def test_idempotent_in_distribution(self):
        base = renewal_es(exponential(1.0))
        once = pstar_model(base)
        twice = pstar_model(once)
        for i, ev in enumerate(BATTERY):
            a = est_event_probability(once, ev, 20_000, seed=40 + i,
                                      horizon_gaps=HG)
            b = est_event_probability(twice, ev, 20_000, seed=70 + i,
                                      horizon_gaps=HG)
            agree(a, b, label=f"idempotence {ev.label}")

    def test_ts_model_is_fixed_point(self):
        m = poisson_ts(1.0)
        ps = pstar_model(m)
        for i, ev in enumerate([A_GAP, parse_eventuality("count(0,1]==0")]):
            a = est_event_probability(m, ev, 30_000, seed=50 + i, horizon_gaps=HG)
            b = est_event_probability(ps, ev, 30_000, seed=80 + i, horizon_gaps=HG)
            agree(a, b, label=f"fixed point {ev.label}")


class TestMachinery:
    def test_thread_count_does_not_change_bits(self):
        m = poisson_ts(1.0)
        a = est_palm_zero(m, A_GAP, 10.0, 12_000, seed=7, threads=1, horizon_gaps=HG)
        b = est_palm_zero(m, A_GAP, 10.0, 12_000, seed=7, threads=8, horizon_gaps=HG)
        assert a == b

    def test_merge_order_independence(self):
        # the kernel runner reduces per variance batch, so chunk results
        # must combine identically whatever the execution interleaving
        m = renewal_ts_from_es(gamma_intervals(2.0, 1.0))

        def kernel(batch, ctx):
            _, a0, ok = straddle_gaps(batch, ctx)
            return np.column_stack((np.where(ok, a0, 0.0), np.ones(batch.n))), ~ok

        window = guard_window(m, HG * m.scale)
        sums1 = run_kernel(m, window, 9000, 2, kernel, seed=3, stream="m", threads=1)
        sums4 = run_kernel(m, window, 9000, 2, kernel, seed=3, stream="m", threads=4)
        assert np.array_equal(sums1.cols, sums4.cols)
        assert np.array_equal(sums1.w, sums4.w)

    def test_se_scaling_with_budget(self):
        # doubling the budget should shrink the s.e. by about sqrt(2)
        m = poisson_ts(1.0)
        ratios = []
        for i, ev in enumerate(BATTERY):
            a = est_event_probability(m, ev, 8_192, seed=100 + i,
                                      stream="sA", horizon_gaps=HG)
            b = est_event_probability(m, ev, 16_384, seed=200 + i,
                                      stream="sB", horizon_gaps=HG)
            if a.std_error > 0 and b.std_error > 0:
                ratios.append(b.std_error / a.std_error)
        mean_ratio = float(np.mean(ratios))
        assert 0.6 <= mean_ratio <= 0.82

    def test_ess_tracks_weights(self):
        from palmlab.models import make_tilt, tilted_ts

        tilted = tilted_ts(poisson_ts(1.0), make_tilt("alpha0", 0.5))
        est = est_event_probability(tilted, A_GAP, 20_000, seed=5, horizon_gaps=HG)
        # weights are Gamma(2,1) gaps: effective fraction is 2/3
        assert abs(est.ess / est.reps - 2.0 / 3.0) < 0.03

    def test_rejected_plus_accepted(self):
        est = est_intermediate(poisson_ts(1.0), 4, A_GAP, 4_000, seed=6,
                               horizon_gaps=HG)
        assert est.rejected + est.accepted == est.reps

    def test_degenerate_weights_fail_loudly(self):
        from palmlab.errors import LowEffectiveSampleSize
        from palmlab.models import ProcessModel
        from palmlab.pattern import PatternBatch

        base = poisson_ts(1.0)

        def degenerate(rng, window, n):
            out = base.sample_batch(rng, window, n)
            w = np.full(n, 1e-9)
            w[0] = 1.0
            return PatternBatch(out.points, out.offsets, out.windows, w)

        bad = ProcessModel("TILTED_TS", {"model": "degenerate"}, 1.0,
                           degenerate, weighted=True)
        with pytest.raises(LowEffectiveSampleSize):
            est_event_probability(bad, ev_true(), 256, seed=0)
