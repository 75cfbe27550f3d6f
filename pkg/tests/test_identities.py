import pytest

from palmlab.errors import NotApplicable
from palmlab.events import SUITE_BATTERY, parse_eventuality
from palmlab.identities import (
    DEFAULT_SUITE_MODELS,
    REGISTRY,
    REGISTRY_BY_ID,
    check_identity,
    run_suite,
)
from palmlab.models import example44, exponential, poisson_ts, renewal_es

A_GAP = parse_eventuality("alpha(0)>1")


class TestRegistry:
    def test_ids_unique_and_described(self):
        ids = [s.id for s in REGISTRY]
        assert len(ids) == len(set(ids))
        assert all(s.description for s in REGISTRY)

    def test_expected_ids_present(self):
        expected = {
            "I-2.3", "I-2.4", "I-2.6", "I-2.7a", "I-2.7b", "I-2.8c",
            "I-2.10c", "I-3.7", "I-3.13", "I-4.4", "I-4.5", "I-5.2a",
            "I-7.1b", "I-8.1a", "I-8.4rho",
        }
        assert {s.id for s in REGISTRY} == expected

    def test_applicability_split(self):
        poisson = poisson_ts(1.0)
        e84 = DEFAULT_SUITE_MODELS[2]
        stationary_ids = {"I-2.3", "I-2.4", "I-2.6", "I-2.7a", "I-2.7b",
                          "I-2.8c", "I-2.10c", "I-4.4", "I-4.5"}
        tilted_ids = {"I-3.7", "I-3.13", "I-5.2a", "I-7.1b", "I-8.1a", "I-8.4rho"}
        assert {s.id for s in REGISTRY if s.applies(poisson)} == stationary_ids
        assert {s.id for s in REGISTRY if s.applies(e84)} == tilted_ids


class TestCheckIdentity:
    def test_not_applicable_raises(self):
        es = renewal_es(exponential(1.0))
        with pytest.raises(NotApplicable):
            check_identity(REGISTRY_BY_ID["I-2.3"], es, None, 100)

    def test_needs_eventuality(self):
        with pytest.raises(ValueError):
            check_identity(REGISTRY_BY_ID["I-2.4"], poisson_ts(1.0), None, 100)

    def test_report_shape(self):
        rep = check_identity(REGISTRY_BY_ID["I-2.3"], poisson_ts(1.0), None,
                             20_000, seed=3)
        assert rep.id == "I-2.3"
        assert rep.eventuality == "-"
        assert rep.verdict in ("pass", "fail")
        assert rep.lhs.reps == rep.budget

    def test_rate_two_poisson(self):
        rep = check_identity(REGISTRY_BY_ID["I-2.3"], poisson_ts(2.0), None,
                             20_000, seed=3)
        assert rep.verdict == "pass"
        assert abs(rep.lhs.value - 2.0) <= 3 * rep.lhs.std_error + 0.01

    def test_seed_swap_stability(self):
        for seed in (11, 12):
            rep = check_identity(REGISTRY_BY_ID["I-4.5"], poisson_ts(1.0), None,
                                 30_000, seed=seed)
            assert rep.verdict == "pass"
        for seed in (11, 12):
            rep = check_identity(REGISTRY_BY_ID["I-5.2a"],
                                 DEFAULT_SUITE_MODELS[2], A_GAP,
                                 30_000, seed=seed)
            assert rep.verdict == "pass"


class TestRunSuite:
    def test_empty_model_list(self):
        assert run_suite([], 100) == []

    def test_example44_has_no_applicable_identities(self):
        # the deterministic lattice law is neither stationary nor a
        # reweighting of one; its diagnostics live in the trace machinery
        reports = run_suite([example44(60)], 100)
        assert reports == []

    def test_only_filter(self):
        reports = run_suite([poisson_ts(1.0)], 10_000, only="I-2.3", seed=5)
        assert [r.id for r in reports] == ["I-2.3"]
        assert reports[0].verdict == "pass"

    def test_deterministic_given_seed(self):
        a = run_suite([poisson_ts(1.0)], 5_000, only="I-2.10c", seed=9)
        b = run_suite([poisson_ts(1.0)], 5_000, only="I-2.10c", seed=9)
        assert a == b

    def test_triple_enumeration(self):
        reports = run_suite([poisson_ts(1.0)], 2_000, only="I-2.4", seed=2)
        assert len(reports) == len(SUITE_BATTERY)
        assert {r.eventuality for r in reports} == {e.label for e in SUITE_BATTERY}

    def test_budget_monotonicity(self):
        # quadrupling the budget must not surface hidden bias: verdicts
        # stay green and z-scores stay in the unbiased range
        m = poisson_ts(1.0)
        for ident in ("I-2.3", "I-2.10c", "I-4.5"):
            small = check_identity(REGISTRY_BY_ID[ident], m, None, 10_000, seed=4)
            big = check_identity(REGISTRY_BY_ID[ident], m, None, 40_000, seed=4)
            assert small.verdict == big.verdict == "pass"
            assert big.z <= 4.0
