import numpy as np
import pytest

from himon import component as comp
from himon import data as datamod
from himon import nn


def pretrain_kind(kind: str, window: int, seed: int, length: int = 600,
                  stride: int = 1, epochs: int = 40) -> nn.DaeParams:
    series = datamod.synth_pretrain_series(kind, length, seed)
    cfg = nn.TrainConfig(seed=seed, max_epochs=epochs)
    dae, _, _ = comp.pretrain(series, window, cfg, stride=stride)
    return dae


@pytest.fixture(scope="session")
def pretrained_w8():
    """Small pretrained models (window 8) shared by engine/acceptance tests."""
    return {"T": pretrain_kind("T", 8, seed=101),
            "C": pretrain_kind("C", 8, seed=102)}


@pytest.fixture(scope="session")
def pretrained_w64():
    return {"T": pretrain_kind("T", 64, seed=201, length=1200, stride=4, epochs=30),
            "C": pretrain_kind("C", 64, seed=202, length=1200, stride=4, epochs=30)}


@pytest.fixture(scope="session")
def cmapss_replica_records():
    """Deterministic FD001-unit-1 stand-in used when the real file is absent."""
    return datamod.synth_cmapss_unit(unit=1, n_cycles=220, seed=20)


def save_pretrained(path, dae: nn.DaeParams, kind: str) -> None:
    """Wrap bare pretrained weights in an uncalibrated model file."""
    from himon import modelio

    model = comp.ComponentModel(
        spec=comp.SensorSpec(sensor_id=f"pretrained-{kind}", model_kind=kind),
        dae=dae, normalizer=comp.Normalizer(0.0, 1.0),
        window_size=dae.window_size, hi_upper_bound=comp.DEFAULT_EPS_MIN,
        calibrated=False)
    modelio.save_model(path, model)


def random_component_model(rng: np.random.Generator, window: int = 8) -> comp.ComponentModel:
    dae = nn.init_dae_params(window, seed=int(rng.integers(0, 2 ** 31)))
    for _, arr in dae.param_items():
        arr += rng.normal(0.0, 0.05, size=arr.shape)
    spec = comp.SensorSpec(sensor_id=f"s{rng.integers(0, 1000)}",
                           model_kind="T" if rng.random() < 0.5 else "C",
                           weight=float(rng.uniform(0.1, 2.0)))
    normalizer = comp.Normalizer(float(rng.normal()), float(rng.uniform(0.5, 3.0)),
                                 degenerate=bool(rng.random() < 0.1))
    return comp.ComponentModel(
        spec=spec, dae=dae, normalizer=normalizer, window_size=window,
        hi_upper_bound=float(rng.uniform(1e-6, 2.0)),
        burn_in_hi_mean=float(rng.uniform(0, 1)),
        burn_in_hi_std=float(rng.uniform(0, 0.3)),
        train_seed=int(rng.integers(0, 2 ** 63)), calibrated=True)
