"""Denoising LSTM autoencoder: parameters, exact gradients, Adam, trainer.

The architecture is fixed: two LSTM encoder layers (8 then 4 units, the
second returning only its last step), a repeat of the 4-dim code across the
window length, two LSTM decoder layers (4 then 8 units, returning sequences),
dropout (p=0.5) after the first encoder and first decoder LSTM, and a dense
8->1 read-out applied per time step. Everything is float64 and every
stochastic choice is driven by an explicit seeded generator, so equal seeds
give bitwise-equal results on a given backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DimensionError, InsufficientDataError, NumericalError

# Gate blocks along the 4*units axis, in order.
GATE_ORDER = ("input", "forget", "cell", "output")

ENC1_UNITS = 8
ENC2_UNITS = 4
DEC1_UNITS = 4
DEC2_UNITS = 8

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class LstmLayerParams:
    """Weights of one LSTM layer; w maps inputs, u the recurrent state."""

    w: np.ndarray  # (input_dim, 4*units)
    u: np.ndarray  # (units, 4*units)
    b: np.ndarray  # (4*units,)

    @property
    def units(self) -> int:
        return self.u.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w.shape[0]

    def copy(self) -> "LstmLayerParams":
        return LstmLayerParams(self.w.copy(), self.u.copy(), self.b.copy())


@dataclass
class DaeParams:
    """All weights of the autoencoder plus its window length."""

    enc1: LstmLayerParams
    enc2: LstmLayerParams
    dec1: LstmLayerParams
    dec2: LstmLayerParams
    out_w: np.ndarray  # (DEC2_UNITS, 1)
    out_b: np.ndarray  # (1,)
    window_size: int
    dropout_p: float = 0.5

    def param_items(self) -> list[tuple[str, np.ndarray]]:
        """Ordered (name, array) pairs over every trainable array."""
        items = []
        for tag, layer in (("enc1", self.enc1), ("enc2", self.enc2),
                           ("dec1", self.dec1), ("dec2", self.dec2)):
            items.append((f"{tag}.w", layer.w))
            items.append((f"{tag}.u", layer.u))
            items.append((f"{tag}.b", layer.b))
        items.append(("out.w", self.out_w))
        items.append(("out.b", self.out_b))
        return items

    def n_params(self) -> int:
        return sum(a.size for _, a in self.param_items())

    def copy(self) -> "DaeParams":
        return DaeParams(self.enc1.copy(), self.enc2.copy(), self.dec1.copy(),
                         self.dec2.copy(), self.out_w.copy(), self.out_b.copy(),
                         self.window_size, self.dropout_p)


def init_lstm_layer(input_dim: int, units: int, rng: np.random.Generator) -> LstmLayerParams:
    """Glorot-uniform weights; forget-gate bias starts at 1.0."""
    lw = math.sqrt(6.0 / (input_dim + units))
    lu = math.sqrt(6.0 / (units + units))
    w = rng.uniform(-lw, lw, size=(input_dim, 4 * units))
    u = rng.uniform(-lu, lu, size=(units, 4 * units))
    b = np.zeros(4 * units)
    b[units:2 * units] = 1.0
    return LstmLayerParams(w, u, b)


def init_dae_params(window_size: int, seed: int, dropout_p: float = 0.5) -> DaeParams:
    if window_size < 1:
        raise DimensionError(f"window_size must be >= 1, got {window_size}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    enc1 = init_lstm_layer(1, ENC1_UNITS, rng)
    enc2 = init_lstm_layer(ENC1_UNITS, ENC2_UNITS, rng)
    dec1 = init_lstm_layer(ENC2_UNITS, DEC1_UNITS, rng)
    dec2 = init_lstm_layer(DEC1_UNITS, DEC2_UNITS, rng)
    lo = math.sqrt(6.0 / (DEC2_UNITS + 1))
    out_w = rng.uniform(-lo, lo, size=(DEC2_UNITS, 1))
    out_b = np.zeros(1)
    return DaeParams(enc1, enc2, dec1, dec2, out_w, out_b, window_size, dropout_p)


def replace_arrays(params: DaeParams, arrays: dict[str, np.ndarray]) -> DaeParams:
    """New DaeParams with the named arrays swapped in (shapes must match)."""
    def layer(tag, old):
        return LstmLayerParams(arrays[f"{tag}.w"], arrays[f"{tag}.u"], arrays[f"{tag}.b"])

    return DaeParams(layer("enc1", params.enc1), layer("enc2", params.enc2),
                     layer("dec1", params.dec1), layer("dec2", params.dec2),
                     arrays["out.w"], arrays["out.b"],
                     params.window_size, params.dropout_p)


def lstm_forward(params: LstmLayerParams, sequence: np.ndarray,
                 return_sequences: bool = True) -> np.ndarray:
    """Run one LSTM layer over a single (T, input_dim) sequence.

    Returns (T, units) when return_sequences, else the last step (units,).
    """
    seq = np.asarray(sequence, dtype=np.float64)
    if seq.ndim != 2:
        raise DimensionError(f"sequence must be 2-D (T, input_dim), got shape {seq.shape}")
    if seq.shape[0] < 1:
        raise DimensionError("sequence must have at least one step")
    if seq.shape[1] != params.input_dim:
        raise DimensionError(
            f"sequence feature dim {seq.shape[1]} != layer input_dim {params.input_dim}")
    x = np.ascontiguousarray(seq)[:, None, :]  # (T, 1, input_dim)
    h, _, _ = kernels.lstm_forward(x, params.w, params.u, params.b)
    out = h[:, 0, :] if return_sequences else h[-1, 0, :]
    return out.copy()


@dataclass
class DropoutMasks:
    """Inverted-dropout masks, values in {0, 1/(1-p)}; time-major shapes."""

    enc: np.ndarray  # (T, B, ENC1_UNITS)
    dec: np.ndarray  # (T, B, DEC1_UNITS)


def make_dropout_masks(params: DaeParams, batch_size: int,
                       rng: np.random.Generator) -> DropoutMasks:
    p = params.dropout_p
    n = params.window_size
    keep = 1.0 - p
    enc = (rng.random((n, batch_size, ENC1_UNITS)) >= p).astype(np.float64) / keep
    dec = (rng.random((n, batch_size, DEC1_UNITS)) >= p).astype(np.float64) / keep
    return DropoutMasks(enc, dec)


def _windows_to_time_major(windows: np.ndarray) -> np.ndarray:
    # (B, n) -> (T=n, B, 1) contiguous
    return np.ascontiguousarray(windows.T)[:, :, None]


@dataclass
class _ForwardCache:
    x: np.ndarray
    h1: np.ndarray
    c1: np.ndarray
    g1: np.ndarray
    d1: np.ndarray
    h2: np.ndarray
    c2: np.ndarray
    g2: np.ndarray
    r: np.ndarray
    h3: np.ndarray
    c3: np.ndarray
    g3: np.ndarray
    d2: np.ndarray
    h4: np.ndarray
    c4: np.ndarray
    g4: np.ndarray
    y: np.ndarray


def _forward(params: DaeParams, x: np.ndarray,
             masks: DropoutMasks | None) -> _ForwardCache:
    """Full pipeline on time-major input x (T, B, 1); masks=None is inference."""
    T = x.shape[0]
    h1, c1, g1 = kernels.lstm_forward(x, params.enc1.w, params.enc1.u, params.enc1.b)
    d1 = h1 * masks.enc if masks is not None else h1
    h2, c2, g2 = kernels.lstm_forward(d1, params.enc2.w, params.enc2.u, params.enc2.b)
    r = np.repeat(h2[-1][None, :, :], T, axis=0)
    h3, c3, g3 = kernels.lstm_forward(r, params.dec1.w, params.dec1.u, params.dec1.b)
    d2 = h3 * masks.dec if masks is not None else h3
    h4, c4, g4 = kernels.lstm_forward(d2, params.dec2.w, params.dec2.u, params.dec2.b)
    y = h4 @ params.out_w + params.out_b  # (T, B, 1)
    return _ForwardCache(x, h1, c1, g1, d1, h2, c2, g2, r, h3, c3, g3, d2, h4, c4, g4, y)


def dae_batch_forward(params: DaeParams, windows: np.ndarray,
                      masks: DropoutMasks | None = None) -> np.ndarray:
    """Reconstruct a (B, n) batch of windows; masks=None runs inference mode."""
    w = np.atleast_2d(np.asarray(windows, dtype=np.float64))
    if w.shape[1] != params.window_size:
        raise DimensionError(
            f"window length {w.shape[1]} != model window_size {params.window_size}")
    cache = _forward(params, _windows_to_time_major(w), masks)
    return np.ascontiguousarray(cache.y[:, :, 0].T)


def dae_forward(params: DaeParams, window: np.ndarray, mode: str = "infer",
                rng: np.random.Generator | None = None) -> np.ndarray:
    """Reconstruct one window. 'train' applies dropout sampled from rng;
    'infer' is deterministic (dropout disabled)."""
    w = np.asarray(window, dtype=np.float64).reshape(-1)
    if w.shape[0] != params.window_size:
        raise DimensionError(
            f"window length {w.shape[0]} != model window_size {params.window_size}")
    if mode == "train":
        if rng is None:
            raise ValueError("train mode requires rng")
        masks = make_dropout_masks(params, 1, rng)
    elif mode == "infer":
        masks = None
    else:
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    out = dae_batch_forward(params, w[None, :], masks)[0]
    if not np.all(np.isfinite(out)):
        raise NumericalError("autoencoder produced non-finite output")
    return out


def corrupt(window: np.ndarray, noise_sigma: float,
            rng: np.random.Generator) -> np.ndarray:
    """Additive Gaussian corruption; the input array is left untouched."""
    if noise_sigma < 0:
        raise ValueError(f"noise_sigma must be >= 0, got {noise_sigma}")
    w = np.asarray(window, dtype=np.float64)
    return w + rng.normal(0.0, noise_sigma, size=w.shape)


def reconstruction_loss(recon: np.ndarray, target: np.ndarray) -> float:
    """Mean squared error between reconstruction and target."""
    r = np.asarray(recon, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if r.shape != t.shape:
        raise DimensionError(f"shape mismatch {r.shape} vs {t.shape}")
    return float(np.mean((r - t) ** 2))


def _gradient_arrays(params: DaeParams, noisy: np.ndarray, clean: np.ndarray,
                     masks: DropoutMasks | None) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and exact gradients for stacked (B, n) noisy inputs/clean targets."""
    x = _windows_to_time_major(noisy)
    target = _windows_to_time_major(clean)
    cache = _forward(params, x, masks)
    T, B = x.shape[0], x.shape[1]
    resid = cache.y - target
    loss = float(np.mean(resid ** 2))

    dy = (2.0 / (T * B)) * resid                       # (T, B, 1)
    dh4 = dy @ params.out_w.T                          # (T, B, DEC2_UNITS)
    dout_w = cache.h4.reshape(-1, DEC2_UNITS).T @ dy.reshape(-1, 1)
    dout_b = np.array([dy.sum()])

    dd2, dw4, du4, db4 = kernels.lstm_backward(
        cache.d2, params.dec2.w, params.dec2.u, cache.h4, cache.c4, cache.g4, dh4)
    dh3 = dd2 * masks.dec if masks is not None else dd2
    dr, dw3, du3, db3 = kernels.lstm_backward(
        cache.r, params.dec1.w, params.dec1.u, cache.h3, cache.c3, cache.g3, dh3)
    dh2 = np.zeros_like(cache.h2)
    dh2[-1] = dr.sum(axis=0)                           # repeat-vector backprop
    dd1, dw2, du2, db2 = kernels.lstm_backward(
        cache.d1, params.enc2.w, params.enc2.u, cache.h2, cache.c2, cache.g2, dh2)
    dh1 = dd1 * masks.enc if masks is not None else dd1
    _, dw1, du1, db1 = kernels.lstm_backward(
        cache.x, params.enc1.w, params.enc1.u, cache.h1, cache.c1, cache.g1, dh1)

    grads = {
        "enc1.w": dw1, "enc1.u": du1, "enc1.b": db1,
        "enc2.w": dw2, "enc2.u": du2, "enc2.b": db2,
        "dec1.w": dw3, "dec1.u": du3, "dec1.b": db3,
        "dec2.w": dw4, "dec2.u": du4, "dec2.b": db4,
        "out.w": dout_w, "out.b": dout_b,
    }
    return loss, grads


def _stack_batch(params: DaeParams,
                 batch: list[tuple[np.ndarray, np.ndarray]]) -> tuple[np.ndarray, np.ndarray]:
    if not batch:
        raise InsufficientDataError("batch must be nonempty")
    noisy = np.stack([np.asarray(p[0], dtype=np.float64).reshape(-1) for p in batch])
    clean = np.stack([np.asarray(p[1], dtype=np.float64).reshape(-1) for p in batch])
    if noisy.shape[1] != params.window_size or clean.shape[1] != params.window_size:
        raise DimensionError("batch window length != model window_size")
    return noisy, clean


def dae_gradient(params: DaeParams, batch: list[tuple[np.ndarray, np.ndarray]],
                 masks: DropoutMasks | None) -> tuple[float, dict[str, np.ndarray]]:
    """Mean batch loss and its exact gradient for fixed dropout masks.

    batch is a list of (noisy window, clean target) pairs; masks=None computes
    the inference-mode gradient.
    """
    noisy, clean = _stack_batch(params, batch)
    return _gradient_arrays(params, noisy, clean, masks)


def finite_diff_gradient(params: DaeParams, batch: list[tuple[np.ndarray, np.ndarray]],
                         masks: DropoutMasks | None, eps: float = 1e-5) -> dict[str, np.ndarray]:
    """Central-difference gradient oracle; same masks as dae_gradient.

    Perturbs every scalar parameter independently; intentionally shares no
    code with the analytic backward pass beyond the forward evaluation.
    """
    if eps <= 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    noisy, clean = _stack_batch(params, batch)
    x = _windows_to_time_major(noisy)
    target = _windows_to_time_major(clean)

    work = params.copy()
    arrays = dict(work.param_items())

    def loss_now() -> float:
        y = _forward(work, x, masks).y
        return float(np.mean((y - target) ** 2))

    grads = {}
    for name, arr in arrays.items():
        g = np.empty_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            lp = loss_now()
            flat[k] = orig - eps
            lm = loss_now()
            flat[k] = orig
            gflat[k] = (lp - lm) / (2.0 * eps)
        grads[name] = g
    return grads


@dataclass
class AdamState:
    """First/second moment accumulators, one pair per parameter array."""

    t: int
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]


def init_adam_state(params: DaeParams) -> AdamState:
    zeros = lambda: {name: np.zeros_like(a) for name, a in params.param_items()}
    return AdamState(0, zeros(), zeros())


def adam_step(params: DaeParams, grads: dict[str, np.ndarray], state: AdamState,
              learning_rate: float) -> tuple[DaeParams, AdamState]:
    """One bias-corrected Adam update; inputs are not mutated."""
    t = state.t + 1
    new_m, new_v, new_arrays = {}, {}, {}
    bc1 = 1.0 - ADAM_BETA1 ** t
    bc2 = 1.0 - ADAM_BETA2 ** t
    for name, arr in params.param_items():
        g = grads[name]
        if g.shape != arr.shape:
            raise DimensionError(f"gradient shape mismatch for {name}")
        m = ADAM_BETA1 * state.m[name] + (1.0 - ADAM_BETA1) * g
        v = ADAM_BETA2 * state.v[name] + (1.0 - ADAM_BETA2) * g * g
        new_arrays[name] = arr - learning_rate * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
        new_m[name] = m
        new_v[name] = v
    return replace_arrays(params, new_arrays), AdamState(t, new_m, new_v)


@dataclass
class TrainConfig:
    seed: int
    max_epochs: int = 1000
    patience: int = 25
    batch_size: int = 32
    learning_rate: float = 1e-3
    noise_sigma: float = 0.05
    validation_fraction: float = 0.2


@dataclass
class TrainReport:
    epochs_run: int
    best_epoch: int
    best_validation_loss: float
    val_losses: list[float] = field(default_factory=list)
    train_losses: list[float] = field(default_factory=list)


class EarlyStopper:
    """Stop after `patience` epochs without strict validation improvement."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best_loss = math.inf
        self.best_epoch = 0

    def update(self, epoch: int, loss: float) -> bool:
        """Record epoch loss (1-indexed); returns True when training should stop."""
        if loss < self.best_loss:
            self.best_loss = loss
            self.best_epoch = epoch
            return False
        return epoch - self.best_epoch >= self.patience


def validation_loss(params: DaeParams, windows: np.ndarray) -> float:
    """Inference-mode MSE of clean windows against their reconstructions."""
    w = np.atleast_2d(np.asarray(windows, dtype=np.float64))
    recon = dae_batch_forward(params, w)
    return float(np.mean((recon - w) ** 2))


def train_dae(initial: DaeParams, windows, config: TrainConfig) -> tuple[DaeParams, TrainReport]:
    """Fine-tune on (already normalized) windows with denoising + early stopping.

    The last validation_fraction of windows (in time order) is held out; each
    epoch shuffles the training windows, corrupts inputs with Gaussian noise,
    and applies Adam on exact gradients. Returns the parameters of the epoch
    with the lowest validation loss.
    """
    data = np.atleast_2d(np.asarray(windows, dtype=np.float64))
    n_windows = data.shape[0]
    if n_windows < 2:
        raise InsufficientDataError(f"need at least 2 windows, got {n_windows}")
    if data.shape[1] != initial.window_size:
        raise DimensionError(
            f"window length {data.shape[1]} != model window_size {initial.window_size}")
    if not np.all(np.isfinite(data)):
        raise NumericalError("training windows contain non-finite values")

    n_val = int(round(config.validation_fraction * n_windows))
    n_val = min(max(n_val, 1), n_windows - 1)
    train_w = data[:n_windows - n_val]
    val_w = data[n_windows - n_val:]

    shuffle_rng, noise_rng, mask_rng = (
        np.random.default_rng(child)
        for child in np.random.SeedSequence(config.seed).spawn(3)
    )

    params = initial.copy()
    state = init_adam_state(params)
    stopper = EarlyStopper(config.patience)
    best_params = params.copy()
    val_losses: list[float] = []
    train_losses: list[float] = []

    epoch = 0
    for epoch in range(1, config.max_epochs + 1):
        order = shuffle_rng.permutation(len(train_w))
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            clean = train_w[idx]
            noisy = clean + noise_rng.normal(0.0, config.noise_sigma, size=clean.shape)
            masks = make_dropout_masks(params, len(idx), mask_rng)
            loss, grads = _gradient_arrays(params, noisy, clean, masks)
            params, state = adam_step(params, grads, state, config.learning_rate)
            epoch_loss += loss * len(idx)
        train_losses.append(epoch_loss / len(train_w))

        vloss = validation_loss(params, val_w)
        if not math.isfinite(vloss):
            raise NumericalError(f"validation loss diverged at epoch {epoch}")
        val_losses.append(vloss)
        improved = vloss < stopper.best_loss
        stop = stopper.update(epoch, vloss)
        if improved:
            best_params = params.copy()
        if stop:
            break

    report = TrainReport(epochs_run=epoch, best_epoch=stopper.best_epoch,
                         best_validation_loss=stopper.best_loss,
                         val_losses=val_losses, train_losses=train_losses)
    return best_params, report
