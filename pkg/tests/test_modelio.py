"""MHI1 model file round-trips and corruption handling."""

import numpy as np
import pytest

from conftest import random_component_model
from himon import modelio
from himon.errors import ModelFormatError


def assert_models_equal(a, b):
    assert a.spec == b.spec
    assert a.normalizer == b.normalizer
    assert (a.window_size, a.calibrated, a.train_seed) == \
        (b.window_size, b.calibrated, b.train_seed)
    assert (a.hi_upper_bound, a.burn_in_hi_mean, a.burn_in_hi_std) == \
        (b.hi_upper_bound, b.burn_in_hi_mean, b.burn_in_hi_std)
    assert a.dae.window_size == b.dae.window_size
    assert a.dae.dropout_p == b.dae.dropout_p
    for (name_a, arr_a), (name_b, arr_b) in zip(a.dae.param_items(),
                                                b.dae.param_items()):
        assert name_a == name_b
        assert np.array_equal(arr_a, arr_b), name_a


def test_round_trip_is_bit_exact(tmp_path):
    model = random_component_model(np.random.default_rng(0))
    path = tmp_path / "m.mhi1"
    modelio.save_model(path, model)
    assert_models_equal(model, modelio.load_model(path))


def test_save_is_byte_deterministic(tmp_path):
    model = random_component_model(np.random.default_rng(1))
    p1, p2 = tmp_path / "a.mhi1", tmp_path / "b.mhi1"
    modelio.save_model(p1, model)
    modelio.save_model(p2, model)
    assert p1.read_bytes() == p2.read_bytes()


def test_magic_bytes(tmp_path):
    model = random_component_model(np.random.default_rng(2))
    path = tmp_path / "m.mhi1"
    modelio.save_model(path, model)
    assert path.read_bytes()[:4] == b"MHI1"


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.mhi1"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(ModelFormatError, match="magic"):
        modelio.load_model(path)


def test_truncated_file_rejected(tmp_path):
    model = random_component_model(np.random.default_rng(3))
    path = tmp_path / "m.mhi1"
    modelio.save_model(path, model)
    blob = path.read_bytes()
    for cut in (5, len(blob) // 2, len(blob) - 3):
        trunc = tmp_path / f"t{cut}.mhi1"
        trunc.write_bytes(blob[:cut])
        with pytest.raises(ModelFormatError):
            modelio.load_model(trunc)


def test_trailing_garbage_rejected(tmp_path):
    model = random_component_model(np.random.default_rng(4))
    path = tmp_path / "m.mhi1"
    modelio.save_model(path, model)
    path.write_bytes(path.read_bytes() + b"\x00\x01")
    with pytest.raises(ModelFormatError, match="trailing"):
        modelio.load_model(path)


def test_window_size_mismatch_rejected(tmp_path):
    model = random_component_model(np.random.default_rng(5), window=8)
    path = tmp_path / "m.mhi1"
    modelio.save_model(path, model)
    with pytest.raises(ModelFormatError, match="window_size"):
        modelio.load_model(path, expected_window_size=16)
    loaded = modelio.load_model(path, expected_window_size=8)
    assert loaded.window_size == 8
