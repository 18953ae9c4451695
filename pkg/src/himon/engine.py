"""Setup -> burn-in -> inference state machine and the replay harness.

The engine accumulates raw samples per sensor during burn-in, then trains
every component model and calibrates all boundaries in one synchronous
transition, and finally scores a sliding window per sensor on every new
sample, publishing alarms through the supervisor.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import component as comp
from . import nn
from . import supervisor as sup
from .data import SegmentedSeries
from .errors import ConfigurationError, DataError, SetupError

PHASE_SETUP = "setup"
PHASE_BURN_IN = "burn_in"
PHASE_INFERENCE = "inference"


@dataclass
class EngineConfig:
    sensors: list[comp.SensorSpec]
    window_size: int
    burn_in_length: int
    train: nn.TrainConfig
    train_stride: int = 1
    eval_stride: int = 1
    bound_mode: str = comp.BOUND_NINE_SIGMA
    eps_min: float = comp.DEFAULT_EPS_MIN


@dataclass
class StepOutput:
    t: int
    phase: str
    joint: sup.JointRecord | None = None
    alarm: sup.AlarmEvent | None = None


@dataclass
class RunLog:
    sensor_ids: list[str]
    steps: list[StepOutput] = field(default_factory=list)
    calibration: dict = field(default_factory=dict)

    def alarms(self) -> list[sup.AlarmEvent]:
        return [s.alarm for s in self.steps if s.alarm is not None]

    def joint_records(self) -> list[sup.JointRecord]:
        return [s.joint for s in self.steps if s.joint is not None]

    def to_csv(self) -> str:
        """Render the per-step log; floats use repr so they round-trip."""
        header = ["t", "phase"]
        for sid in self.sensor_ids:
            header += [f"{sid}_hi", f"{sid}_bound", f"{sid}_over"]
        header += ["joint_hi", "joint_bound", "joint_over", "alarm_triggers"]
        lines = [",".join(header)]
        joint_bound = self.calibration.get("joint", {}).get("bound")
        bounds = {sid: self.calibration.get("sensors", {}).get(sid, {}).get("bound")
                  for sid in self.sensor_ids}
        for s in self.steps:
            row = [str(s.t), s.phase]
            recs = ({r.sensor_id: r for r in s.joint.component_records}
                    if s.joint is not None else {})
            for sid in self.sensor_ids:
                rec = recs.get(sid)
                if rec is None:
                    row += ["", "", ""]
                else:
                    row += [repr(rec.hi), repr(bounds[sid]), str(int(rec.over_bound))]
            if s.joint is None:
                row += ["", "", ""]
            else:
                row += [repr(s.joint.joint_hi), repr(joint_bound),
                        str(int(s.joint.over_bound))]
            row.append(";".join(s.alarm.triggers) if s.alarm is not None else "")
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())

    def write_events_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "triggers"])
            for alarm in self.alarms():
                writer.writerow([alarm.t, ";".join(alarm.triggers)])


def _sensor_seed(base_seed: int, index: int) -> int:
    state = np.random.SeedSequence((base_seed, index)).generate_state(2, dtype=np.uint64)
    return int(state[0])


class Engine:
    """Single-writer state machine; create via create_engine()."""

    def __init__(self, config: EngineConfig, model_store: dict[str, nn.DaeParams]):
        self.config = config
        self.model_store = model_store
        self.phase = PHASE_SETUP
        self.t = 0
        self.sensor_ids = [s.sensor_id for s in config.sensors]
        self._specs = {s.sensor_id: s for s in config.sensors}
        n = config.window_size
        # Burn-in accumulation: list of closed segments + the open one.
        self._segments: dict[str, list[list[float]]] = {sid: [[]] for sid in self.sensor_ids}
        # Last n samples of the current segment, used for inference windows.
        self._buffers: dict[str, deque] = {sid: deque(maxlen=n) for sid in self.sensor_ids}
        self.components: dict[str, comp.ComponentModel] = {}
        self.supervisor_model: sup.SupervisorModel | None = None
        self.calibration: dict = {}

    def mark_segment_break(self) -> None:
        """Signal a stream discontinuity: windows must not span this point."""
        for sid in self.sensor_ids:
            if self._segments[sid][-1]:
                self._segments[sid].append([])
            self._buffers[sid].clear()

    def ingest(self, readings: dict[str, float]) -> StepOutput:
        """Process one reading per sensor; advances t only if accepted."""
        if set(readings.keys()) != set(self.sensor_ids):
            missing = sorted(set(self.sensor_ids) - set(readings))
            extra = sorted(set(readings) - set(self.sensor_ids))
            raise DataError(f"readings do not cover the configured sensors "
                            f"(missing {missing}, unexpected {extra})")
        for sid in self.sensor_ids:
            if not math.isfinite(readings[sid]):
                raise DataError(f"non-finite reading for sensor {sid!r} rejected")

        self.t += 1
        if self.phase == PHASE_SETUP:
            self.phase = PHASE_BURN_IN
        for sid in self.sensor_ids:
            if self.phase == PHASE_BURN_IN:
                self._segments[sid][-1].append(readings[sid])
            self._buffers[sid].append(readings[sid])

        if self.phase == PHASE_BURN_IN:
            out = StepOutput(t=self.t, phase=PHASE_BURN_IN)
            if self.t >= self.config.burn_in_length:
                self.finalize_burn_in()
            return out

        joint = None
        alarm = None
        n = self.config.window_size
        ready = all(len(self._buffers[sid]) == n for sid in self.sensor_ids)
        due = (self.t - self.config.burn_in_length) % self.config.eval_stride == 0
        if ready and due:
            records = [comp.step(self.components[sid],
                                 np.array(self._buffers[sid]), self.t)
                       for sid in self.sensor_ids]
            joint, alarm = sup.evaluate(self.supervisor_model, records, self.t)
        return StepOutput(t=self.t, phase=PHASE_INFERENCE, joint=joint, alarm=alarm)

    def finalize_burn_in(self) -> dict:
        """Train every component on its burn-in data, calibrate all bounds,
        and move to the inference phase. Returns the calibration summary."""
        if self.phase != PHASE_BURN_IN:
            raise ConfigurationError(f"cannot finalize burn-in from phase {self.phase!r}")
        cfg = self.config
        summary: dict = {"sensors": {}, "joint": {}, "config": {
            "window_size": cfg.window_size,
            "burn_in_length": cfg.burn_in_length,
            "train_stride": cfg.train_stride,
            "eval_stride": cfg.eval_stride,
            "bound_mode": cfg.bound_mode,
            "eps_min": cfg.eps_min,
            "seed": cfg.train.seed,
            "weights": {s.sensor_id: s.weight for s in cfg.sensors},
        }}

        hi_by_end: dict[str, dict[int, float]] = {}
        for idx, sid in enumerate(self.sensor_ids):
            spec = self._specs[sid]
            series = SegmentedSeries(
                [(f"{sid}-seg{k}", np.array(seg))
                 for k, seg in enumerate(self._segments[sid]) if seg])
            train_cfg = nn.TrainConfig(
                seed=_sensor_seed(cfg.train.seed, idx),
                max_epochs=cfg.train.max_epochs, patience=cfg.train.patience,
                batch_size=cfg.train.batch_size, learning_rate=cfg.train.learning_rate,
                noise_sigma=cfg.train.noise_sigma,
                validation_fraction=cfg.train.validation_fraction)
            try:
                model, report = comp.burn_in_fit(
                    spec, self.model_store[spec.model_kind], series,
                    cfg.window_size, train_cfg, stride=cfg.train_stride,
                    bound_mode=cfg.bound_mode, eps_min=cfg.eps_min)
            except (comp.InsufficientDataError, DataError) as exc:
                raise ConfigurationError(
                    f"burn-in training failed for sensor {sid!r}: {exc}") from exc
            self.components[sid] = model
            ends = comp.windows_with_ends(series, cfg.window_size, cfg.train_stride)
            hi_by_end[sid] = {end: comp.compute_hi(model, w) for end, w in ends}
            summary["sensors"][sid] = {
                "bound": model.hi_upper_bound,
                "hi_mean": model.burn_in_hi_mean,
                "hi_std": model.burn_in_hi_std,
                "normalizer_mean": model.normalizer.mean,
                "normalizer_std": model.normalizer.std,
                "normalizer_degenerate": model.normalizer.degenerate,
                "windows": len(ends),
                "weight": spec.weight,
                "model_kind": spec.model_kind,
                "train_seed": train_cfg.seed,
                "epochs_run": report.epochs_run,
                "best_epoch": report.best_epoch,
                "best_validation_loss": report.best_validation_loss,
            }

        weights = {s.sensor_id: s.weight for s in cfg.sensors}
        common = set.intersection(*(set(m.keys()) for m in hi_by_end.values()))
        joint_series = [sup.joint_hi({sid: hi_by_end[sid][end] for sid in self.sensor_ids},
                                     weights)
                        for end in sorted(common)]
        bound, mean, std = sup.calibrate_joint_bound(joint_series, cfg.bound_mode,
                                                     cfg.eps_min)
        self.supervisor_model = sup.SupervisorModel(
            weights=weights, joint_upper_bound=bound,
            joint_burn_in_mean=mean, joint_burn_in_std=std)
        summary["joint"] = {"bound": bound, "hi_mean": mean, "hi_std": std,
                            "windows": len(joint_series)}
        self.calibration = summary
        self.phase = PHASE_INFERENCE
        return summary


def create_engine(config: EngineConfig, model_store: dict[str, nn.DaeParams]) -> Engine:
    """Validate the configuration and return an engine in the setup phase."""
    if not config.sensors:
        raise ConfigurationError("at least one sensor must be configured")
    seen = set()
    for spec in config.sensors:
        if spec.sensor_id in seen:
            raise ConfigurationError(f"duplicate sensor_id {spec.sensor_id!r}")
        seen.add(spec.sensor_id)
    if config.window_size < 1:
        raise ConfigurationError("window_size must be >= 1")
    if config.burn_in_length < config.window_size + 1:
        raise ConfigurationError(
            f"burn_in_length ({config.burn_in_length}) must be >= window_size + 1 "
            f"({config.window_size + 1}) to yield at least 2 windows")
    if config.train_stride < 1 or config.eval_stride < 1:
        raise ConfigurationError("strides must be >= 1")
    if config.bound_mode not in comp.BOUND_MODES:
        raise ConfigurationError(f"unknown bound_mode {config.bound_mode!r}")
    for spec in config.sensors:
        if spec.model_kind not in model_store:
            raise SetupError(
                f"no pretrained model for kind {spec.model_kind!r} "
                f"(sensor {spec.sensor_id!r})")
        if model_store[spec.model_kind].window_size != config.window_size:
            raise SetupError(
                f"pretrained model for kind {spec.model_kind!r} has window_size "
                f"{model_store[spec.model_kind].window_size}, config needs "
                f"{config.window_size}")
    return Engine(config, model_store)


def run_replay(dataset: dict[str, SegmentedSeries], config: EngineConfig,
               model_store: dict[str, nn.DaeParams]) -> RunLog:
    """Feed a recorded multi-sensor stream through the engine in order.

    All sensor series must share one segmentation (same time base); buffers
    reset at segment starts so no window spans a segment boundary.
    """
    ids = [s.sensor_id for s in config.sensors]
    missing = [sid for sid in ids if sid not in dataset]
    if missing:
        raise DataError(f"dataset missing series for sensors {missing}")
    lengths = {sid: dataset[sid].segment_lengths() for sid in ids}
    first = lengths[ids[0]]
    for sid in ids:
        if lengths[sid] != first:
            raise DataError(
                f"sensor {sid!r} segmentation {lengths[sid]} differs from "
                f"{ids[0]!r} segmentation {first}")

    engine = create_engine(config, model_store)
    log = RunLog(sensor_ids=list(ids))
    for seg_index in range(len(first)):
        engine.mark_segment_break()
        seg_len = first[seg_index]
        for i in range(seg_len):
            readings = {sid: float(dataset[sid].segments[seg_index][1][i])
                        for sid in ids}
            log.steps.append(engine.ingest(readings))
    log.calibration = dict(engine.calibration)
    return log
