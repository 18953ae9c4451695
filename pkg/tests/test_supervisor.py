"""Joint HI aggregation algebra and alarm decisions."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from himon import supervisor as sup
from himon.component import HiRecord
from himon.errors import ConfigurationError, InsufficientDataError

his_and_weights = st.integers(min_value=1, max_value=8).flatmap(
    lambda n: st.tuples(
        st.lists(st.floats(min_value=0.0, max_value=10.0), min_size=n, max_size=n),
        st.lists(st.floats(min_value=0.01, max_value=5.0), min_size=n, max_size=n),
    ))


class TestJointHi:
    def test_equal_weights_give_plain_mean(self):
        assert sup.joint_hi({"a": 0.2, "b": 0.4}, {"a": 0.5, "b": 0.5}) == \
            pytest.approx(0.3)

    def test_weighted_average_arithmetic(self):
        value = sup.joint_hi({"a": 0.1, "b": 0.2, "c": 0.3},
                             {"a": 0.6, "b": 0.2, "c": 0.2})
        assert value == pytest.approx(0.16, abs=1e-12)

    def test_single_sensor_weight_cancels(self):
        for w in (0.5, 0.1, 3.7):
            assert sup.joint_hi({"only": 0.7}, {"only": w}) == 0.7

    def test_key_mismatch(self):
        with pytest.raises(ConfigurationError):
            sup.joint_hi({"a": 0.1}, {"b": 0.5})

    def test_empty(self):
        with pytest.raises(ConfigurationError):
            sup.joint_hi({}, {})

    @given(his_and_weights)
    @settings(max_examples=200, deadline=None)
    def test_algebra(self, draw):
        his_list, weights_list = draw
        his = {f"s{i}": h for i, h in enumerate(his_list)}
        weights = {f"s{i}": w for i, w in enumerate(weights_list)}
        value = sup.joint_hi(his, weights)
        # Convex-combination sandwich.
        assert min(his.values()) - 1e-12 <= value <= max(his.values()) + 1e-12
        # Scale invariance in the weights.
        scaled = {k: 3.25 * w for k, w in weights.items()}
        assert sup.joint_hi(his, scaled) == pytest.approx(value, abs=1e-12)

    @given(his_and_weights, st.floats(min_value=0.001, max_value=5.0))
    @settings(max_examples=200, deadline=None)
    def test_monotonic_in_each_component(self, draw, bump):
        his_list, weights_list = draw
        his = {f"s{i}": h for i, h in enumerate(his_list)}
        weights = {f"s{i}": w for i, w in enumerate(weights_list)}
        base = sup.joint_hi(his, weights)
        for key in his:
            bumped = dict(his)
            bumped[key] = bumped[key] + bump
            assert sup.joint_hi(bumped, weights) >= base

    def test_equal_weights_exactly_reproduce_mean(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(1, 7))
            his = {f"s{i}": float(rng.uniform(0, 5)) for i in range(n)}
            w = float(rng.uniform(0.01, 3))
            weights = {k: w for k in his}
            assert sup.joint_hi(his, weights) == sum(his.values()) / n


class TestCalibrateJointBound:
    def test_arithmetic(self):
        bound, mean, std = sup.calibrate_joint_bound([0.0, 2.0])
        assert (mean, std) == (1.0, pytest.approx(math.sqrt(2.0)))
        assert bound == pytest.approx(9.0 * math.sqrt(2.0))

    def test_constant_floors(self):
        bound, _, _ = sup.calibrate_joint_bound([0.4, 0.4, 0.4])
        assert bound == pytest.approx(1e-6)

    def test_homogeneity(self):
        series = [0.1, 0.9, 0.4, 0.7]
        b1, _, _ = sup.calibrate_joint_bound(series)
        bk, _, _ = sup.calibrate_joint_bound([4.0 * x for x in series])
        assert bk == pytest.approx(4.0 * b1, rel=1e-12)

    def test_insufficient(self):
        with pytest.raises(InsufficientDataError):
            sup.calibrate_joint_bound([1.0])


def make_supervisor(weights, bound):
    return sup.SupervisorModel(weights=weights, joint_upper_bound=bound)


def rec(sid, hi, over):
    return HiRecord(sensor_id=sid, t=1, hi=hi, over_bound=over)


class TestEvaluate:
    def test_all_quiet_no_alarm(self):
        model = make_supervisor({"a": 0.5, "b": 0.5}, bound=1.0)
        joint, alarm = sup.evaluate(model, [rec("a", 0.1, False), rec("b", 0.2, False)], 5)
        assert alarm is None
        assert joint.t == 5
        assert not joint.over_bound
        assert joint.joint_hi == pytest.approx(0.15)

    def test_component_trigger_only(self):
        model = make_supervisor({"a": 0.5, "b": 0.5}, bound=10.0)
        _, alarm = sup.evaluate(model, [rec("a", 2.0, True), rec("b", 0.1, False)], 7)
        assert alarm is not None
        assert alarm.triggers == ["a"]

    def test_joint_trigger_only(self):
        model = make_supervisor({"a": 0.5, "b": 0.5}, bound=0.2)
        joint, alarm = sup.evaluate(model, [rec("a", 0.3, False), rec("b", 0.3, False)], 9)
        assert joint.over_bound
        assert alarm.triggers == ["joint"]

    def test_multiple_triggers_ordered(self):
        model = make_supervisor({"a": 0.5, "b": 0.5}, bound=0.2)
        _, alarm = sup.evaluate(model, [rec("a", 2.0, True), rec("b", 3.0, True)], 3)
        assert alarm.triggers == ["a", "b", "joint"]

    def test_missing_sensor_record(self):
        model = make_supervisor({"a": 0.5, "b": 0.5}, bound=1.0)
        with pytest.raises(ConfigurationError):
            sup.evaluate(model, [rec("a", 0.1, False)], 1)

    def test_duplicate_record(self):
        model = make_supervisor({"a": 0.5}, bound=1.0)
        with pytest.raises(ConfigurationError):
            sup.evaluate(model, [rec("a", 0.1, False), rec("a", 0.2, False)], 1)

    def test_alarm_soundness_random(self):
        rng = np.random.default_rng(3)
        model = make_supervisor({"a": 1.0, "b": 2.0, "c": 0.5}, bound=0.5)
        for t in range(300):
            records = [rec(s, float(rng.uniform(0, 1)), bool(rng.random() < 0.1))
                       for s in ("a", "b", "c")]
            joint, alarm = sup.evaluate(model, records, t)
            should_alarm = any(r.over_bound for r in records) or joint.over_bound
            assert (alarm is not None) == should_alarm
            if alarm:
                assert alarm.triggers

    def test_weight_validation(self):
        with pytest.raises(ConfigurationError):
            make_supervisor({"a": 0.0}, bound=1.0)
