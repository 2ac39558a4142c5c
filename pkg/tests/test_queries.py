"""User-facing query layer over engine and networks."""

import json
from fractions import Fraction as F
from pathlib import Path

import pytest

from psolve.bayesnet import load_bn, load_bn_path
from psolve.errors import QueryError
from psolve.queries import (
    conditional_moment,
    distribution_from_moments,
    expected_positive,
    expected_samples,
    forward_filter,
    joint_moment,
    node_distribution,
    predict,
    run_query,
    sensitivity,
)
from psolve.symbolic import Polynomial, RationalFunction, decimal_str

DATA = Path(__file__).resolve().parent.parent / "data"


def rf(v):
    return RationalFunction(v)


@pytest.fixture(scope="module")
def alarm():
    return load_bn_path(DATA / "alarm.json")


@pytest.fixture(scope="module")
def alarm_sens():
    return load_bn_path(DATA / "alarm_sens.json")


@pytest.fixture(scope="module")
def asia():
    return load_bn_path(DATA / "asia.json")


@pytest.fixture(scope="module")
def umbrella():
    return load_bn_path(DATA / "umbrella.json")


class TestConditionalMoment:
    def test_alarm_burglary_given_alarm(self, alarm):
        res = conditional_moment(alarm, "B", 1, {"A": 1})
        assert res.value == F(156670, 419407)
        assert res.exact() == "156670/419407"
        assert res.decimal() == "0.373551"

    def test_event_target(self, alarm):
        res = conditional_moment(alarm, {"EQ": 1}, 1, {"M": 1})
        assert res.decimal() == "0.035881"

    def test_polynomial_target(self, alarm):
        # P(no quake and no burglary | alarm, john calls)
        res = conditional_moment(alarm, "(1 - EQ)*(1 - B)", 1, {"A": 1, "J": 1})
        assert res.decimal() == "0.396195"

    def test_zero_probability_evidence(self):
        bn = load_bn(
            {"type": "bn", "nodes": [
                {"name": "X", "model": {"kind": "cpt", "p": ["1", "0"]}}]}
        )
        with pytest.raises(QueryError, match="zero"):
            conditional_moment(bn, "X", 1, {"X": 1})

    def test_empty_evidence_rejected(self, alarm):
        with pytest.raises(QueryError, match="evidence"):
            conditional_moment(alarm, "B", 1, {})

    def test_second_moment(self, alarm):
        # B is 0/1 so E[B^2 | A] = E[B | A]
        a = conditional_moment(alarm, "B", 2, {"A": 1})
        b = conditional_moment(alarm, "B", 1, {"A": 1})
        assert a.value == b.value


class TestSensitivity:
    SPEC = {"query": "conditional", "target": "B", "evidence": {"A": 1}}

    def test_alarm_closed_form(self, alarm_sens):
        res = sensitivity(alarm_sens, self.SPEC)
        b, q = Polynomial.var("b"), Polynomial.var("q")
        num = b * (q * F(1, 100) + F(94, 100))
        den = (
            b * q * F(-279, 1000) + b * F(939, 1000)
            + q * F(289, 1000) + F(1, 1000)
        )
        assert res.value == RationalFunction(num, den)

    def test_denominator_assumption_recorded(self, alarm_sens):
        res = sensitivity(alarm_sens, self.SPEC)
        assert any("!= 0" in a for a in res.assumptions)

    def test_point_binding_matches_numeric(self, alarm_sens):
        res = sensitivity(alarm_sens, self.SPEC)
        bound = res.value.subs({"b": F(1, 1000), "q": F(2, 1000)})
        assert bound == F(156670, 419407)


class TestJointMoment:
    def test_static_first_moment(self, alarm):
        res = joint_moment(alarm, "B")
        assert res.value == F(1, 1000)

    def test_monomial_string(self, asia):
        res = joint_moment(asia, "Asia*Lung")
        assert res.value == F(11, 20000)

    def test_bad_order(self, alarm):
        with pytest.raises(QueryError, match="order"):
            joint_moment(alarm, "B", 0)

    def test_dyn_closed_form(self, umbrella):
        res = joint_moment(umbrella, "R")
        total = res.value.total()
        assert total is not None
        assert total.at(0) == rf(1)
        assert total.at(4) == rf(F(1, 2) + F(1, 2) * F(16, 625))


class TestNodeDistribution:
    def test_alarm_given_evidence(self, alarm):
        res = node_distribution(alarm, "B", {"A": 1})
        p0, p1 = res.value
        assert p0 + p1 == rf(1)
        assert p1 == F(156670, 419407)

    def test_three_state_node(self):
        doc = {
            "type": "bn",
            "nodes": [
                {"name": "X", "states": ["lo", "mid", "hi"],
                 "model": {"kind": "cpt", "p": ["1/2", "1/3", "1/6"]}},
            ],
        }
        bn = load_bn(doc)
        res = node_distribution(bn, "X")
        assert res.value == (rf(F(1, 2)), rf(F(1, 3)), rf(F(1, 6)))

    def test_continuous_node_rejected(self):
        bn = load_bn_path(DATA / "marks.json")
        with pytest.raises(QueryError, match="continuous"):
            node_distribution(bn, "Stat")


class TestDistributionFromMoments:
    def test_three_point(self):
        # distribution on {0, 1, 2} with P = (1/2, 1/3, 1/6)
        m1 = rf(F(1, 3) + F(2, 6))
        m2 = rf(F(1, 3) + F(4, 6))
        probs, notes = distribution_from_moments([m1, m2], 3)
        assert probs == (rf(F(1, 2)), rf(F(1, 3)), rf(F(1, 6)))
        assert notes == ()

    def test_inconsistent_moments_flagged(self):
        probs, notes = distribution_from_moments([rf(2)], 2)
        assert notes  # out-of-range mass reported, not silently clipped
        assert any("outside" in n for n in notes)

    def test_moment_count_checked(self):
        with pytest.raises(QueryError, match="exactly"):
            distribution_from_moments([rf(1)], 3)


class TestExpectedSamples:
    def test_asia_exact(self, asia):
        res = expected_samples(asia, {"Asia": 1, "Lung": 1})
        assert res.value == F(20000, 11)
        assert res.decimal(4) == "1818.1818"

    def test_monitor_route_agrees(self, asia):
        res = expected_samples(asia, {"Asia": 1, "Lung": 1})
        extras = dict(res.extras)
        assert extras["monitor_limit"] == "20000/11"
        assert extras["probability"] == "11/20000"

    def test_alarm_joint_calls(self, alarm):
        res = expected_samples(alarm, {"M": 1, "J": 1})
        p = F(dict(res.extras)["probability"])
        assert res.value == 1 / p

    def test_zero_probability(self):
        bn = load_bn(
            {"type": "bn", "nodes": [
                {"name": "X", "model": {"kind": "cpt", "p": ["1", "0"]}}]}
        )
        with pytest.raises(QueryError):
            expected_samples(bn, {"X": 1})

    def test_expected_positive(self, asia):
        res = expected_positive(asia, {"Asia": 1, "Lung": 1}, 1000)
        assert res.value == F(11, 20)


class TestPredict:
    def test_at_step(self, umbrella):
        res = predict(umbrella, "R", at=2)
        assert res.value == F(1, 2) + F(1, 2) * F(4, 25)

    def test_limit(self, umbrella):
        res = predict(umbrella, "R", limit=True)
        assert res.value == F(1, 2)

    def test_limit_symbolic(self):
        dyn = load_bn_path(DATA / "umbrella_sens.json")
        res = predict(dyn, "R", limit=True)
        r = Polynomial.var("r")
        assert res.value == RationalFunction(-3, 10 * r - 13)

    def test_closed_form_default(self, umbrella):
        res = predict(umbrella, "R")
        assert res.kind == "predict"
        assert res.value.at(0) == rf(1)

    def test_negative_horizon(self, umbrella):
        with pytest.raises(QueryError, match="horizon"):
            predict(umbrella, "R", at=-1)


class TestForwardFilter:
    def test_umbrella_two_wet_observations(self):
        dyn = load_bn_path(DATA / "umbrella_filter.json")
        res = forward_filter(dyn, [{"U": 1}, {"U": 1}])
        first, second = res.value
        # state space is (R=0,), (R=1,)
        assert first[1] == rf(F(9, 11))
        assert second[1] == rf(F(621, 703))
        assert decimal_str(second[1].const_value()) == "0.883357"

    def test_each_step_normalizes(self):
        dyn = load_bn_path(DATA / "umbrella_filter.json")
        res = forward_filter(dyn, [{"U": 1}, {}, {"U": 0}])
        for step in res.value:
            assert sum(step, rf(0)) == rf(1)

    def test_empty_observation_is_prediction(self):
        dyn = load_bn_path(DATA / "umbrella_filter.json")
        res = forward_filter(dyn, [{}])
        # fair-coin prior, symmetric transition noise: still 1/2
        assert res.value[0][1] == rf(F(1, 2))

    def test_impossible_observation(self):
        doc = {
            "type": "dynbn",
            "nodes": [
                {"name": "R", "model": {"kind": "cpt", "parents": ["R"], "rows": [
                    {"given": [0], "p": ["0", "1"]},
                    {"given": [1], "p": ["0", "1"]},
                ]}},
                {"name": "U", "model": {"kind": "cpt", "parents": ["R"], "rows": [
                    {"given": [0], "p": ["1", "0"]},
                    {"given": [1], "p": ["0", "1"]},
                ]}},
            ],
            "inter_edges": {"R": ["R"]},
            "initial": {"R": 1},
        }
        dyn = load_bn(doc)
        with pytest.raises(QueryError, match="step 1"):
            forward_filter(dyn, [{"U": 0}])


class TestRunQuery:
    def test_conditional_spec(self, alarm):
        res = run_query(alarm, {
            "query": "conditional", "target": "B", "evidence": {"A": 1}})
        assert res.decimal() == "0.373551"

    def test_samples_spec(self, asia):
        res = run_query(asia, {
            "query": "samples", "evidence": {"Asia": 1, "Lung": 1}})
        assert res.value == F(20000, 11)

    def test_samples_with_population(self, asia):
        res = run_query(asia, {
            "query": "samples", "evidence": {"Asia": 1, "Lung": 1}, "N": 1000})
        assert res.value == F(11, 20)

    def test_missing_query_field(self, alarm):
        with pytest.raises(QueryError, match="query"):
            run_query(alarm, {"kind": "conditional"})

    def test_unknown_kind(self, alarm):
        with pytest.raises(QueryError, match="unknown query kind"):
            run_query(alarm, {"query": "marginalize"})

    def test_unknown_field_rejected(self, alarm):
        with pytest.raises(QueryError, match="unknown query fields"):
            run_query(alarm, {
                "query": "conditional", "target": "B", "evidence": {},
                "tolerance": 0.1})

    def test_filter_spec(self):
        dyn = load_bn_path(DATA / "umbrella_filter.json")
        res = run_query(dyn, {
            "query": "filter", "observations": [{"U": 1}, {"U": 1}]})
        assert res.value[1][1] == rf(F(621, 703))

    def test_predict_spec(self, umbrella):
        res = run_query(umbrella, {"query": "predict", "node": "R", "limit": True})
        assert res.value == F(1, 2)

    def test_distribution_spec(self, alarm):
        res = run_query(alarm, {
            "query": "distribution", "node": "B", "evidence": {"A": 1}})
        assert res.value[1] == F(156670, 419407)


class TestQueryResult:
    def test_json_round_trip(self, alarm):
        res = conditional_moment(alarm, "B", 1, {"A": 1})
        doc = res.to_json()
        again = json.loads(json.dumps(doc))
        assert again["query"] == "conditional"
        assert again["exact"] == "156670/419407"
        assert again["decimal"] == "0.373551"

    def test_assumption_list_always_present(self, alarm):
        res = joint_moment(alarm, "B")
        assert res.assumptions == ()
        assert "assumptions" in res.to_json()

    def test_extras_serialized(self, asia):
        res = expected_samples(asia, {"Asia": 1, "Lung": 1})
        doc = res.to_json()
        assert doc["probability"] == "11/20000"
