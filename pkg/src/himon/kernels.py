"""Hot numeric kernels: batched LSTM forward and backward-through-time passes.

The recurrences below dominate training/inference runtime, so they are JIT
compiled with numba by default. Set ``HIMON_BACKEND=numpy`` to run the exact
same functions as plain vectorized numpy (useful where numba is unavailable
or for benchmarking; see benchmarks/bench_kernels.py), or
``HIMON_BACKEND=numba`` to fail loudly if numba cannot be imported.

All kernels take time-major float64 arrays: inputs are shaped (T, B, input_dim)
and hidden/cell/gate caches (T, B, units) / (T, B, 4*units). The gate axis is
ordered (input, forget, cell-candidate, output). Initial hidden and cell
states are zero.
"""

import os

import numpy as np

_FLAG = os.environ.get("HIMON_BACKEND", "auto").strip().lower()
if _FLAG not in ("auto", "numba", "numpy", ""):
    raise RuntimeError(
        f"HIMON_BACKEND must be 'numba', 'numpy' or unset, got {_FLAG!r}"
    )

if _FLAG in ("auto", "", "numba"):
    try:
        from numba import njit

        _HAVE_NUMBA = True
    except ImportError:
        if _FLAG == "numba":
            raise
        _HAVE_NUMBA = False
else:
    _HAVE_NUMBA = False

BACKEND = "numba" if _HAVE_NUMBA else "numpy"


def _jit(fn):
    if _HAVE_NUMBA:
        return njit(cache=True)(fn)
    return fn


@_jit
def lstm_forward(x, w, u, b):
    """One LSTM layer over a batch of sequences.

    x: (T, B, input_dim); w: (input_dim, 4*units); u: (units, 4*units);
    b: (4*units,). Returns (h, c, gates) with h, c shaped (T, B, units) and
    gates (T, B, 4*units) holding the post-activation gate values needed by
    lstm_backward.
    """
    T, B, _ = x.shape
    units = u.shape[0]
    h = np.empty((T, B, units))
    c = np.empty((T, B, units))
    gates = np.empty((T, B, 4 * units))
    h_prev = np.zeros((B, units))
    c_prev = np.zeros((B, units))
    for t in range(T):
        z = np.dot(x[t], w) + np.dot(h_prev, u) + b
        gates[t, :, :units] = 1.0 / (1.0 + np.exp(-z[:, :units]))
        gates[t, :, units:2 * units] = 1.0 / (1.0 + np.exp(-z[:, units:2 * units]))
        gates[t, :, 2 * units:3 * units] = np.tanh(z[:, 2 * units:3 * units])
        gates[t, :, 3 * units:] = 1.0 / (1.0 + np.exp(-z[:, 3 * units:]))
        c[t] = (gates[t, :, units:2 * units] * c_prev
                + gates[t, :, :units] * gates[t, :, 2 * units:3 * units])
        h[t] = gates[t, :, 3 * units:] * np.tanh(c[t])
        h_prev = h[t]
        c_prev = c[t]
    return h, c, gates


@_jit
def lstm_backward(x, w, u, h, c, gates, dh_out):
    """Exact gradients through lstm_forward.

    dh_out is the loss gradient w.r.t. every h[t] (zero rows where the layer
    output is unused). Returns (dx, dw, du, db).
    """
    T, B, input_dim = x.shape
    units = u.shape[0]
    dx = np.empty((T, B, input_dim))
    dw = np.zeros_like(w)
    du = np.zeros_like(u)
    db = np.zeros(4 * units)
    dh_next = np.zeros((B, units))
    dc_next = np.zeros((B, units))
    zeros_bu = np.zeros((B, units))
    wT = np.ascontiguousarray(w.T)
    uT = np.ascontiguousarray(u.T)
    for t in range(T - 1, -1, -1):
        i_t = gates[t, :, :units]
        f_t = gates[t, :, units:2 * units]
        g_t = gates[t, :, 2 * units:3 * units]
        o_t = gates[t, :, 3 * units:]
        c_prev = c[t - 1] if t > 0 else zeros_bu
        h_prev = h[t - 1] if t > 0 else zeros_bu
        dh = dh_out[t] + dh_next
        tc = np.tanh(c[t])
        dc = dh * o_t * (1.0 - tc * tc) + dc_next
        dz = np.empty((B, 4 * units))
        dz[:, :units] = dc * g_t * i_t * (1.0 - i_t)
        dz[:, units:2 * units] = dc * c_prev * f_t * (1.0 - f_t)
        dz[:, 2 * units:3 * units] = dc * i_t * (1.0 - g_t * g_t)
        dz[:, 3 * units:] = dh * tc * o_t * (1.0 - o_t)
        dw += np.dot(x[t].T, dz)
        du += np.dot(h_prev.T, dz)
        db += dz.sum(axis=0)
        dx[t] = np.dot(dz, wT)
        dh_next = np.dot(dz, uT)
        dc_next = dc * f_t
    return dx, dw, du, db


def warmup():
    """Trigger JIT compilation on tiny inputs (no-op on the numpy backend)."""
    x = np.zeros((2, 1, 1))
    w = np.zeros((1, 8))
    u = np.zeros((2, 8))
    b = np.zeros(8)
    h, c, g = lstm_forward(x, w, u, b)
    lstm_backward(x, w, u, h, c, g, np.zeros_like(h))
