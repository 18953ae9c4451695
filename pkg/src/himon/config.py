"""Run-configuration files: strict JSON schema with field-path error
messages, plus the bundled replay presets."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import component as comp
from . import nn
from .data import CMAPSS_SENSOR_NAMES, CRUISE_ALT_MAX, CRUISE_ALT_MIN, CRUISE_MIN_LEN
from .engine import EngineConfig
from .errors import ConfigurationError

FORMAT_CMAPSS = "cmapss"
FORMAT_NCMAPSS_CSV = "ncmapss_csv"


@dataclass
class DatasetConfig:
    format: str
    path: str
    unit: int = 1
    columns: dict = field(default_factory=dict)
    alt_min: float = CRUISE_ALT_MIN
    alt_max: float = CRUISE_ALT_MAX
    min_segment: int = CRUISE_MIN_LEN


@dataclass
class OutputConfig:
    log: str = "out/runlog.csv"
    events: str = "out/events.csv"
    calibration: str = "out/calibration.json"
    plots: bool = False
    plot_dir: str = "out/plots"


@dataclass
class RunConfig:
    dataset: DatasetConfig
    engine: EngineConfig
    models: dict[str, str]
    output: OutputConfig


def _require_keys(obj: dict, allowed: dict, where: str) -> None:
    if not isinstance(obj, dict):
        raise ConfigurationError(f"{where}: expected an object")
    unknown = sorted(set(obj.keys()) - set(allowed.keys()))
    if unknown:
        raise ConfigurationError(f"{where}: unknown keys {unknown}")
    missing = sorted(k for k, required in allowed.items() if required and k not in obj)
    if missing:
        raise ConfigurationError(f"{where}: missing required keys {missing}")


def _typed(obj: dict, key: str, types, where: str, default=None):
    if key not in obj:
        return default
    value = obj[key]
    if types is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if isinstance(value, bool) and types in (int, float):
        raise ConfigurationError(f"{where}.{key}: expected {types.__name__}, got bool")
    if not isinstance(value, types):
        tname = types.__name__ if isinstance(types, type) else str(types)
        raise ConfigurationError(
            f"{where}.{key}: expected {tname}, got {type(value).__name__}")
    return value


def _positive_int(obj: dict, key: str, where: str, default=None) -> int:
    value = _typed(obj, key, int, where, default)
    if value is None or value < 1:
        raise ConfigurationError(f"{where}.{key}: must be a positive integer, got {value}")
    return value


def _parse_dataset(obj: dict) -> DatasetConfig:
    _require_keys(obj, {"format": True, "path": True, "unit": False,
                        "columns": False, "alt_min": False, "alt_max": False,
                        "min_segment": False}, "dataset")
    fmt = _typed(obj, "format", str, "dataset")
    if fmt not in (FORMAT_CMAPSS, FORMAT_NCMAPSS_CSV):
        raise ConfigurationError(
            f"dataset.format: must be '{FORMAT_CMAPSS}' or '{FORMAT_NCMAPSS_CSV}', got {fmt!r}")
    ds = DatasetConfig(format=fmt, path=_typed(obj, "path", str, "dataset"))
    if fmt == FORMAT_CMAPSS:
        ds.unit = _positive_int(obj, "unit", "dataset", default=1)
        for key in ("columns", "alt_min", "alt_max", "min_segment"):
            if key in obj:
                raise ConfigurationError(f"dataset.{key}: only valid for {FORMAT_NCMAPSS_CSV}")
    else:
        if "unit" in obj:
            raise ConfigurationError(f"dataset.unit: only valid for {FORMAT_CMAPSS}")
        cols = _typed(obj, "columns", dict, "dataset")
        if cols is None:
            raise ConfigurationError("dataset.columns: required for ncmapss_csv")
        _require_keys(cols, {"time": True, "altitude": True, "flight": True,
                             "sensors": True}, "dataset.columns")
        sensors = cols["sensors"]
        if not isinstance(sensors, dict) or not sensors:
            raise ConfigurationError("dataset.columns.sensors: expected a nonempty object")
        ds.columns = cols
        ds.alt_min = _typed(obj, "alt_min", float, "dataset", CRUISE_ALT_MIN)
        ds.alt_max = _typed(obj, "alt_max", float, "dataset", CRUISE_ALT_MAX)
        if ds.alt_min > ds.alt_max:
            raise ConfigurationError("dataset.alt_min: must be <= dataset.alt_max")
        ds.min_segment = _positive_int(obj, "min_segment", "dataset", CRUISE_MIN_LEN)
    return ds


def _parse_sensors(items, dataset: DatasetConfig) -> list[comp.SensorSpec]:
    if not isinstance(items, list) or not items:
        raise ConfigurationError("sensors: expected a nonempty array")
    specs = []
    for i, obj in enumerate(items):
        where = f"sensors[{i}]"
        _require_keys(obj, {"name": True, "model_kind": True, "weight": False}, where)
        name = _typed(obj, "name", str, where)
        kind = _typed(obj, "model_kind", str, where)
        weight = _typed(obj, "weight", float, where, 0.5)
        if kind not in ("T", "C"):
            raise ConfigurationError(f"{where}.model_kind: must be 'T' or 'C', got {kind!r}")
        if not weight > 0:
            raise ConfigurationError(f"{where}.weight: must be > 0, got {weight}")
        if dataset.format == FORMAT_CMAPSS and name not in CMAPSS_SENSOR_NAMES:
            raise ConfigurationError(f"{where}.name: unknown CMAPSS sensor {name!r}")
        if dataset.format == FORMAT_NCMAPSS_CSV and name not in dataset.columns["sensors"]:
            raise ConfigurationError(
                f"{where}.name: {name!r} not present in dataset.columns.sensors")
        specs.append(comp.SensorSpec(sensor_id=name, model_kind=kind, weight=weight))
    return specs


def _parse_engine(obj: dict, sensors: list[comp.SensorSpec],
                  training: nn.TrainConfig) -> EngineConfig:
    _require_keys(obj, {"window_size": True, "burn_in_length": True,
                        "train_stride": False, "eval_stride": False,
                        "bound_mode": False, "eps_min": False, "seed": True},
                  "engine")
    window = _positive_int(obj, "window_size", "engine")
    burn_in = _positive_int(obj, "burn_in_length", "engine")
    if burn_in < window + 1:
        raise ConfigurationError(
            f"engine.burn_in_length: must be >= window_size + 1 ({window + 1}), got {burn_in}")
    bound_mode = _typed(obj, "bound_mode", str, "engine", comp.BOUND_NINE_SIGMA)
    if bound_mode not in comp.BOUND_MODES:
        raise ConfigurationError(
            f"engine.bound_mode: must be one of {list(comp.BOUND_MODES)}, got {bound_mode!r}")
    eps_min = _typed(obj, "eps_min", float, "engine", comp.DEFAULT_EPS_MIN)
    if not eps_min > 0:
        raise ConfigurationError(f"engine.eps_min: must be > 0, got {eps_min}")
    seed = _typed(obj, "seed", int, "engine")
    if seed is None or seed < 0:
        raise ConfigurationError(f"engine.seed: must be a non-negative integer, got {seed}")
    training.seed = seed
    return EngineConfig(
        sensors=sensors, window_size=window, burn_in_length=burn_in,
        train=training,
        train_stride=_positive_int(obj, "train_stride", "engine", 1),
        eval_stride=_positive_int(obj, "eval_stride", "engine", 1),
        bound_mode=bound_mode, eps_min=eps_min)


def _parse_training(obj: dict) -> nn.TrainConfig:
    _require_keys(obj, {"max_epochs": False, "patience": False, "batch_size": False,
                        "learning_rate": False, "noise_sigma": False,
                        "validation_fraction": False}, "training")
    cfg = nn.TrainConfig(seed=0)
    cfg.max_epochs = _positive_int(obj, "max_epochs", "training", cfg.max_epochs)
    cfg.patience = _positive_int(obj, "patience", "training", cfg.patience)
    cfg.batch_size = _positive_int(obj, "batch_size", "training", cfg.batch_size)
    cfg.learning_rate = _typed(obj, "learning_rate", float, "training", cfg.learning_rate)
    if not cfg.learning_rate > 0:
        raise ConfigurationError("training.learning_rate: must be > 0")
    cfg.noise_sigma = _typed(obj, "noise_sigma", float, "training", cfg.noise_sigma)
    if cfg.noise_sigma < 0:
        raise ConfigurationError("training.noise_sigma: must be >= 0")
    cfg.validation_fraction = _typed(obj, "validation_fraction", float, "training",
                                     cfg.validation_fraction)
    if not 0.0 < cfg.validation_fraction < 1.0:
        raise ConfigurationError("training.validation_fraction: must be in (0, 1)")
    return cfg


def _parse_models(obj: dict, sensors: list[comp.SensorSpec]) -> dict[str, str]:
    _require_keys(obj, {"T": False, "C": False}, "models")
    models = {k: _typed(obj, k, str, "models") for k in obj}
    for spec in sensors:
        if spec.model_kind not in models:
            raise ConfigurationError(
                f"models: sensor {spec.sensor_id!r} needs kind {spec.model_kind!r} "
                f"but models.{spec.model_kind} is not set")
    return models


def _parse_output(obj: dict) -> OutputConfig:
    _require_keys(obj, {"log": False, "events": False, "calibration": False,
                        "plots": False, "plot_dir": False}, "output")
    out = OutputConfig()
    out.log = _typed(obj, "log", str, "output", out.log)
    out.events = _typed(obj, "events", str, "output", out.events)
    out.calibration = _typed(obj, "calibration", str, "output", out.calibration)
    out.plots = _typed(obj, "plots", bool, "output", out.plots)
    out.plot_dir = _typed(obj, "plot_dir", str, "output", out.plot_dir)
    return out


def parse_run_config(doc: dict) -> RunConfig:
    """Validate a parsed JSON document; raises ConfigurationError with the
    offending field path on the first problem found."""
    _require_keys(doc, {"dataset": True, "sensors": True, "engine": True,
                        "training": False, "models": True, "output": False},
                  "config")
    dataset = _parse_dataset(doc["dataset"])
    sensors = _parse_sensors(doc["sensors"], dataset)
    training = _parse_training(doc.get("training", {}))
    engine = _parse_engine(doc["engine"], sensors, training)
    models = _parse_models(doc["models"], sensors)
    output = _parse_output(doc.get("output", {}))
    return RunConfig(dataset=dataset, engine=engine, models=models, output=output)


def load_run_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
    return parse_run_config(doc)


def list_presets() -> list[str]:
    root = resources.files("himon").joinpath("presets")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def resolve_config_path(name_or_path: str) -> Path:
    """A --config argument is a file path or the name of a bundled preset."""
    p = Path(name_or_path)
    if p.exists():
        return p
    preset = resources.files("himon").joinpath("presets", f"{name_or_path}.json")
    if preset.is_file():
        return Path(str(preset))
    raise ConfigurationError(
        f"config {name_or_path!r} is neither a file nor a bundled preset "
        f"(presets: {', '.join(list_presets())})")
