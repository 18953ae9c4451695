"""Joint health indicator: weighted aggregation of component HI scores,
joint boundary calibration, and alarm decisions."""

from __future__ import annotations

from dataclasses import dataclass, field

from .component import (BOUND_NINE_SIGMA, DEFAULT_EPS_MIN, HiRecord,
                        calibrate_bound)
from .errors import ConfigurationError

JOINT_TRIGGER = "joint"


@dataclass
class SupervisorModel:
    weights: dict[str, float]
    joint_upper_bound: float
    joint_burn_in_mean: float = 0.0
    joint_burn_in_std: float = 0.0

    def __post_init__(self):
        for sid, w in self.weights.items():
            if not w > 0:
                raise ConfigurationError(f"weight for {sid!r} must be > 0, got {w}")


@dataclass
class JointRecord:
    t: int
    joint_hi: float
    over_bound: bool
    component_records: list[HiRecord] = field(default_factory=list)


@dataclass
class AlarmEvent:
    t: int
    triggers: list[str]


def joint_hi(his: dict[str, float], weights: dict[str, float]) -> float:
    """Weighted average of component HI scores.

    Equal weights take the plain-mean path so they reproduce the unweighted
    average exactly (not just to rounding).
    """
    if not his:
        raise ConfigurationError("no HI values to aggregate")
    if set(his.keys()) != set(weights.keys()):
        raise ConfigurationError(
            f"HI keys {sorted(his)} != weight keys {sorted(weights)}")
    ws = [weights[k] for k in his]
    if all(w == ws[0] for w in ws):
        return sum(his.values()) / len(his)
    num = sum(weights[k] * hi for k, hi in his.items())
    return num / sum(ws)


def calibrate_joint_bound(burn_in_joint_series,
                          bound_mode: str = BOUND_NINE_SIGMA,
                          eps_min: float = DEFAULT_EPS_MIN) -> tuple[float, float, float]:
    """(bound, mean, sample std) for the joint HI, same rule as components."""
    return calibrate_bound(burn_in_joint_series, bound_mode, eps_min)


def evaluate(supervisor: SupervisorModel, component_records: list[HiRecord],
             t: int) -> tuple[JointRecord, AlarmEvent | None]:
    """Aggregate one step's component records; an alarm is emitted iff any
    component or the joint HI is over its bound, listing every crossing."""
    his = {}
    for rec in component_records:
        if rec.sensor_id in his:
            raise ConfigurationError(f"duplicate record for sensor {rec.sensor_id!r}")
        his[rec.sensor_id] = rec.hi
    if set(his.keys()) != set(supervisor.weights.keys()):
        missing = sorted(set(supervisor.weights) - set(his))
        extra = sorted(set(his) - set(supervisor.weights))
        raise ConfigurationError(
            f"component records do not match configured sensors "
            f"(missing {missing}, unexpected {extra})")

    value = joint_hi(his, supervisor.weights)
    over = value > supervisor.joint_upper_bound
    joint = JointRecord(t=t, joint_hi=value, over_bound=over,
                        component_records=list(component_records))
    triggers = [rec.sensor_id for rec in component_records if rec.over_bound]
    if over:
        triggers.append(JOINT_TRIGGER)
    alarm = AlarmEvent(t=t, triggers=triggers) if triggers else None
    return joint, alarm
