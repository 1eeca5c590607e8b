"""Training kernels for skipgram with negative sampling.

Two interchangeable backends implement the same algorithm: a numba-jitted
kernel and a pure-numpy fallback.  Selection is via the ``VT_BACKEND``
environment variable (``numba`` or ``numpy``); unset picks numba when it is
importable.  Both consume an identical SplitMix64 draw stream (see rng.py),
so they differ only in floating-point summation order.

Draw order per center position: one window-shrink uniform, then
``negatives`` uniforms per context word, left to right.  A sampled negative
equal to the context word consumes its draw but skips the update.
"""

import os

import numpy as np

from . import rng

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap if not (args and callable(args[0])) else args[0]


def active_backend() -> str:
    """Resolve the kernel backend from VT_BACKEND."""
    choice = os.environ.get("VT_BACKEND", "").strip().lower()
    if choice == "numpy":
        return "numpy"
    if choice == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("VT_BACKEND=numba but numba is not importable")
        return "numba"
    if choice:
        raise ValueError(f"VT_BACKEND must be 'numba' or 'numpy', got {choice!r}")
    return "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numba backend
# ---------------------------------------------------------------------------

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV = 1.0 / (1 << 53)


@njit(cache=True)
def _uniform(seed, t):
    z = seed + (np.uint64(t) + np.uint64(1)) * _GOLDEN
    z = z ^ (z >> np.uint64(30))
    z = z * _M1
    z = z ^ (z >> np.uint64(27))
    z = z * _M2
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)) * _INV


@njit(cache=True)
def _sigmoid(x):
    if x >= 0.0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


@njit(cache=True)
def _bisect_right(cum, u):
    lo = 0
    hi = cum.shape[0]
    while lo < hi:
        mid = (lo + hi) // 2
        if u < cum[mid]:
            hi = mid
        else:
            lo = mid + 1
    if lo >= cum.shape[0]:
        lo = cum.shape[0] - 1
    return lo


@njit(cache=True, nogil=True)
def _train_kernel_numba(
    w_in,
    w_out,
    grams,
    tokens,
    line_offsets,
    ngram_flat,
    ngram_offsets,
    neg_cum,
    window,
    negatives,
    epochs,
    lr0,
    seed,
):
    dim = w_in.shape[1]
    total = np.float64(epochs) * np.float64(tokens.shape[0])
    t = 0
    draw = 0
    v = np.empty(dim, dtype=np.float64)
    gacc = np.empty(dim, dtype=np.float64)
    for _epoch in range(epochs):
        for li in range(line_offsets.shape[0] - 1):
            start = line_offsets[li]
            end = line_offsets[li + 1]
            for i in range(start, end):
                center = tokens[i]
                lr_t = lr0 * (1.0 - t / total)
                t += 1
                u = _uniform(seed, draw)
                draw += 1
                b = 1 + int(u * window)
                lo = i - b
                if lo < start:
                    lo = start
                hi = i + b
                if hi > end - 1:
                    hi = end - 1
                g_start = ngram_offsets[center]
                g_end = ngram_offsets[center + 1]
                k_comp = 1.0 + (g_end - g_start)
                for d in range(dim):
                    acc = w_in[center, d]
                    for gi in range(g_start, g_end):
                        acc += grams[ngram_flat[gi], d]
                    v[d] = acc / k_comp
                for j in range(lo, hi + 1):
                    if j == i:
                        continue
                    ctx = tokens[j]
                    for d in range(dim):
                        gacc[d] = 0.0
                    s = 0.0
                    for d in range(dim):
                        s += v[d] * w_out[ctx, d]
                    g = _sigmoid(s) - 1.0
                    for d in range(dim):
                        gacc[d] += g * w_out[ctx, d]
                        w_out[ctx, d] -= lr_t * g * v[d]
                    for _k in range(negatives):
                        un = _uniform(seed, draw)
                        draw += 1
                        neg = _bisect_right(neg_cum, un)
                        if neg == ctx:
                            continue
                        s = 0.0
                        for d in range(dim):
                            s += v[d] * w_out[neg, d]
                        g = _sigmoid(s)
                        for d in range(dim):
                            gacc[d] += g * w_out[neg, d]
                            w_out[neg, d] -= lr_t * g * v[d]
                    scale = lr_t / k_comp
                    for d in range(dim):
                        w_in[center, d] -= scale * gacc[d]
                    for gi in range(g_start, g_end):
                        gid = ngram_flat[gi]
                        for d in range(dim):
                            grams[gid, d] -= scale * gacc[d]
                    # the mean of the updated component rows, kept incrementally
                    for d in range(dim):
                        v[d] -= scale * gacc[d]
    return draw


# ---------------------------------------------------------------------------
# numpy backend
# ---------------------------------------------------------------------------


def _sigmoid_np(x):
    if x >= 0.0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


def _train_kernel_numpy(
    w_in,
    w_out,
    grams,
    tokens,
    line_offsets,
    ngram_flat,
    ngram_offsets,
    neg_cum,
    window,
    negatives,
    epochs,
    lr0,
    seed,
):
    seed = int(seed)
    total = float(epochs) * float(tokens.shape[0])
    t = 0
    draw = 0
    n_lines = line_offsets.shape[0] - 1
    for _epoch in range(epochs):
        for li in range(n_lines):
            start = int(line_offsets[li])
            end = int(line_offsets[li + 1])
            for i in range(start, end):
                center = int(tokens[i])
                lr_t = lr0 * (1.0 - t / total)
                t += 1
                u = float(rng.uniforms(seed, draw, 1)[0])
                draw += 1
                b = 1 + int(u * window)
                lo = max(start, i - b)
                hi = min(end - 1, i + b)
                gsl = ngram_flat[int(ngram_offsets[center]): int(ngram_offsets[center + 1])]
                k_comp = 1.0 + gsl.shape[0]
                v = (w_in[center] + grams[gsl].sum(axis=0)) / k_comp
                for j in range(lo, hi + 1):
                    if j == i:
                        continue
                    ctx = int(tokens[j])
                    gacc = np.zeros_like(v)
                    g = _sigmoid_np(float(v @ w_out[ctx])) - 1.0
                    gacc += g * w_out[ctx]
                    w_out[ctx] -= lr_t * g * v
                    if negatives:
                        us = rng.uniforms(seed, draw, negatives)
                        draw += negatives
                        negs = np.minimum(
                            np.searchsorted(neg_cum, us, side="right"), neg_cum.shape[0] - 1
                        )
                        for neg in negs:
                            neg = int(neg)
                            if neg == ctx:
                                continue
                            g = _sigmoid_np(float(v @ w_out[neg]))
                            gacc += g * w_out[neg]
                            w_out[neg] -= lr_t * g * v
                    scale = lr_t / k_comp
                    w_in[center] -= scale * gacc
                    if gsl.shape[0]:
                        # subtract.at honours duplicate bucket ids
                        np.subtract.at(grams, gsl, scale * gacc)
                    v = v - scale * gacc
    return draw


def run_training(backend, *args):
    if backend == "numba":
        return _train_kernel_numba(*args)
    if backend == "numpy":
        return _train_kernel_numpy(*args)
    raise ValueError(f"unknown backend {backend!r}")
