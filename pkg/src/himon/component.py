"""Per-sensor component models: normalization, windowing, the reconstruction
HI score, and burn-in boundary calibration."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .data import SegmentedSeries
from .errors import ConfigurationError, DimensionError, InsufficientDataError

BOUND_NINE_SIGMA = "nine_sigma"
BOUND_MEAN_PLUS_NINE_SIGMA = "mean_plus_nine_sigma"
BOUND_MODES = (BOUND_NINE_SIGMA, BOUND_MEAN_PLUS_NINE_SIGMA)

SIGMA_MULTIPLIER = 9.0
DEFAULT_EPS_MIN = 1e-6
_DEGENERATE_STD = 1e-12


@dataclass
class SensorSpec:
    """Which pretrained model a sensor uses and its supervisor weight."""

    sensor_id: str
    model_kind: str = "C"  # "T" temperature-pretrained, "C" generic
    weight: float = 0.5

    def __post_init__(self):
        if self.model_kind not in ("T", "C"):
            raise ConfigurationError(
                f"sensor {self.sensor_id!r}: model_kind must be 'T' or 'C'")
        if not self.weight > 0:
            raise ConfigurationError(
                f"sensor {self.sensor_id!r}: weight must be > 0, got {self.weight}")


@dataclass
class Normalizer:
    """Z-score parameters fitted on burn-in data."""

    mean: float
    std: float
    degenerate: bool = False

    def normalize(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=np.float64) - self.mean) / self.std


def fit_normalizer(series) -> Normalizer:
    """Mean and population standard deviation; a (near-)constant series gets
    std 1 and is flagged degenerate."""
    values = np.asarray(series, dtype=np.float64)
    if values.size < 2:
        raise InsufficientDataError(f"need >= 2 samples, got {values.size}")
    mean = float(np.mean(values))
    std = float(np.std(values))
    if std < _DEGENERATE_STD:
        return Normalizer(mean, 1.0, degenerate=True)
    return Normalizer(mean, std)


def make_windows(series: SegmentedSeries, n: int, stride: int = 1) -> list[np.ndarray]:
    """Sliding windows per segment; no window spans a segment boundary."""
    return [w for _, w in windows_with_ends(series, n, stride)]


def windows_with_ends(series: SegmentedSeries, n: int,
                      stride: int = 1) -> list[tuple[int, np.ndarray]]:
    """Like make_windows but each window carries the 1-based stream index of
    its last sample (segments indexed consecutively in stream order); the
    end index aligns windows across sensors that share a segmentation."""
    if n < 1:
        raise DimensionError(f"window size must be >= 1, got {n}")
    if stride < 1:
        raise DimensionError(f"stride must be >= 1, got {stride}")
    out = []
    offset = 0
    for _, values in series.segments:
        length = len(values)
        for start in range(0, length - n + 1, stride):
            end = start + n
            out.append((offset + end, values[start:end].copy()))
        offset += length
    return out


@dataclass
class ComponentModel:
    """A fitted per-sensor model: trained autoencoder + normalizer + bound."""

    spec: SensorSpec
    dae: nn.DaeParams
    normalizer: Normalizer
    window_size: int
    hi_upper_bound: float
    burn_in_hi_mean: float = 0.0
    burn_in_hi_std: float = 0.0
    train_seed: int = 0
    calibrated: bool = False


@dataclass
class HiRecord:
    sensor_id: str
    t: int
    hi: float
    over_bound: bool


def hi_from_reconstruction(window_norm: np.ndarray, recon: np.ndarray) -> float:
    """The HI read-out: mean absolute reconstruction error."""
    w = np.asarray(window_norm, dtype=np.float64)
    r = np.asarray(recon, dtype=np.float64)
    if w.shape != r.shape:
        raise DimensionError(f"shape mismatch {w.shape} vs {r.shape}")
    return float(np.mean(np.abs(w - r)))


def reconstruct(model: ComponentModel, window: np.ndarray) -> np.ndarray:
    """Normalized reconstruction of a raw sensor window (inference mode)."""
    w = np.asarray(window, dtype=np.float64).reshape(-1)
    if w.shape[0] != model.window_size:
        raise DimensionError(
            f"window length {w.shape[0]} != model window_size {model.window_size}")
    return nn.dae_forward(model.dae, model.normalizer.normalize(w), mode="infer")


def compute_hi(model: ComponentModel, window: np.ndarray) -> float:
    """HI of a raw window: normalize, reconstruct, mean absolute error."""
    w = np.asarray(window, dtype=np.float64).reshape(-1)
    norm = model.normalizer.normalize(w)
    recon = nn.dae_forward(model.dae, norm, mode="infer")
    return hi_from_reconstruction(norm, recon)


def step(model: ComponentModel, window: np.ndarray, t: int) -> HiRecord:
    """Score one inference window; crossing is strict (hi == bound is inside)."""
    hi = compute_hi(model, window)
    return HiRecord(sensor_id=model.spec.sensor_id, t=t, hi=hi,
                    over_bound=hi > model.hi_upper_bound)


def calibrate_bound(hi_values, bound_mode: str = BOUND_NINE_SIGMA,
                    eps_min: float = DEFAULT_EPS_MIN) -> tuple[float, float, float]:
    """(bound, mean, sample std) of a burn-in HI series.

    nine_sigma: bound = max(9*std, eps_min). mean_plus_nine_sigma:
    bound = mean + max(9*std, eps_min) (the eps floor keeps exactly-constant
    HI series from flapping on ties).
    """
    values = np.asarray(hi_values, dtype=np.float64)
    if values.size < 2:
        raise InsufficientDataError(f"need >= 2 HI values, got {values.size}")
    if bound_mode not in BOUND_MODES:
        raise ConfigurationError(f"unknown bound_mode {bound_mode!r}")
    mean = float(np.mean(values))
    std = float(np.std(values, ddof=1))
    margin = max(SIGMA_MULTIPLIER * std, eps_min)
    bound = mean + margin if bound_mode == BOUND_MEAN_PLUS_NINE_SIGMA else margin
    return bound, mean, std


def pretrain(series: SegmentedSeries, window_size: int,
             train_config: nn.TrainConfig,
             stride: int = 1) -> tuple[nn.DaeParams, Normalizer, nn.TrainReport]:
    """Train a fresh autoencoder on a pretraining stream.

    Used once per model kind before any burn-in; the normalizer returned is
    the pretraining-series scaler (informational; burn-in refits its own).
    """
    normalizer = fit_normalizer(series.concatenated())
    windows = make_windows(series, window_size, stride)
    if len(windows) < 2:
        raise InsufficientDataError(
            f"pretraining series yields {len(windows)} windows, need >= 2")
    normalized = np.stack([normalizer.normalize(w) for w in windows])
    initial = nn.init_dae_params(window_size, train_config.seed)
    trained, report = nn.train_dae(initial, normalized, train_config)
    return trained, normalizer, report


def burn_in_fit(spec: SensorSpec, pretrained: nn.DaeParams,
                burn_in_series: SegmentedSeries, n: int,
                train_config: nn.TrainConfig, stride: int = 1,
                bound_mode: str = BOUND_NINE_SIGMA,
                eps_min: float = DEFAULT_EPS_MIN) -> tuple[ComponentModel, nn.TrainReport]:
    """Fit one component on its burn-in data.

    Fits the normalizer on the whole burn-in stream, fine-tunes the
    pretrained autoencoder on the normalized windows, scores every burn-in
    window with the trained model, and calibrates the HI upper bound.
    """
    if pretrained.window_size != n:
        raise ConfigurationError(
            f"sensor {spec.sensor_id!r}: pretrained window_size "
            f"{pretrained.window_size} != requested n={n}")
    windows = make_windows(burn_in_series, n, stride)
    if len(windows) < 2:
        raise InsufficientDataError(
            f"sensor {spec.sensor_id!r}: burn-in yields {len(windows)} windows, need >= 2")
    normalizer = fit_normalizer(burn_in_series.concatenated())
    normalized = np.stack([normalizer.normalize(w) for w in windows])
    trained, report = nn.train_dae(pretrained, normalized, train_config)

    model = ComponentModel(spec=spec, dae=trained, normalizer=normalizer,
                           window_size=n, hi_upper_bound=eps_min,
                           train_seed=train_config.seed)
    his = [compute_hi(model, w) for w in windows]
    bound, mean, std = calibrate_bound(his, bound_mode, eps_min)
    model.hi_upper_bound = bound
    model.burn_in_hi_mean = mean
    model.burn_in_hi_std = std
    model.calibrated = True
    return model, report
