"""Numeric hot-path kernels, in two flavors: numba @njit and pure numpy.

The numba flavor is used when numba imports cleanly; setting the environment
variable ``DEDUP_SCAN_NO_NUMBA=1`` (before import) forces the numpy fallback.
Both flavors are kept importable so tests and ``benchmarks/bench_kernels.py``
can compare them directly.

Box resampling detail: output pixel k of an n-point axis covers the source
interval [k*s, (k+1)*s] with s = len/n. s is len/32 here, i.e. exact in
binary, so coverage boundaries and overlap weights are exact dyadics and a
constant integer-valued image survives resampling bit-exactly.
"""

from __future__ import annotations

import os
from functools import lru_cache

import numpy as np

_FORCED_OFF = os.environ.get("DEDUP_SCAN_NO_NUMBA", "") not in ("", "0")

if not _FORCED_OFF:
    try:
        from numba import njit

        _HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - depends on install
        _HAVE_NUMBA = False
else:
    _HAVE_NUMBA = False

# ITU-R BT.601 luma weights
LUMA_R = 0.299
LUMA_G = 0.587
LUMA_B = 0.114


def selected_path() -> str:
    """Name of the kernel flavor in use: ``"numba"`` or ``"numpy"``."""
    return "numba" if _HAVE_NUMBA else "numpy"


def using_numba() -> bool:
    return _HAVE_NUMBA


# ---------------------------------------------------------------------------
# numpy flavor


def rgb_to_gray_numpy(img: np.ndarray) -> np.ndarray:
    r = img[:, :, 0].astype(np.float64)
    g = img[:, :, 1].astype(np.float64)
    b = img[:, :, 2].astype(np.float64)
    return LUMA_R * r + LUMA_G * g + LUMA_B * b


@lru_cache(maxsize=64)
def _overlap_matrix(n_out: int, n_in: int) -> np.ndarray:
    """Unnormalized coverage weights: row k holds |[i, i+1] ∩ [k*s, (k+1)*s]|."""
    s = n_in / n_out
    mat = np.zeros((n_out, n_in))
    for k in range(n_out):
        lo = k * s
        hi = (k + 1) * s
        for i in range(int(lo), min(int(np.ceil(hi)), n_in)):
            mat[k, i] = min(hi, i + 1.0) - max(lo, float(i))
    mat.setflags(write=False)
    return mat

def box_resize_numpy(gray: np.ndarray, n_out: int) -> np.ndarray:
    h, w = gray.shape
    rows = _overlap_matrix(n_out, h)
    cols = _overlap_matrix(n_out, w)
    scale = (h / n_out) * (w / n_out)
    return (rows @ gray @ cols.T) / scale


def hamming_distances_numpy(probe: int, hashes: np.ndarray) -> np.ndarray:
    x = np.bitwise_xor(hashes, np.uint64(probe))
    return np.bitwise_count(x).astype(np.int64)


# ---------------------------------------------------------------------------
# numba flavor

if _HAVE_NUMBA:

    @njit(cache=True)
    def _box_resize_nb(gray: np.ndarray, n_out: int) -> np.ndarray:
        h, w = gray.shape
        sr = h / n_out
        sc = w / n_out
        tmp = np.empty((n_out, w))
        for k in range(n_out):
            lo = k * sr
            hi = (k + 1) * sr
            i0 = int(lo)
            i1 = min(int(np.ceil(hi)), h)
            for j in range(w):
                acc = 0.0
                for i in range(i0, i1):
                    ov = min(hi, i + 1.0) - max(lo, float(i))
                    acc += ov * gray[i, j]
                tmp[k, j] = acc / sr
        out = np.empty((n_out, n_out))
        for k in range(n_out):
            lo = k * sc
            hi = (k + 1) * sc
            j0 = int(lo)
            j1 = min(int(np.ceil(hi)), w)
            for r in range(n_out):
                acc = 0.0
                for j in range(j0, j1):
                    ov = min(hi, j + 1.0) - max(lo, float(j))
                    acc += ov * tmp[r, j]
                out[r, k] = acc / sc
        return out

    @njit(cache=True)
    def _rgb_to_gray_nb(img: np.ndarray) -> np.ndarray:
        h, w = img.shape[0], img.shape[1]
        out = np.empty((h, w))
        for i in range(h):
            for j in range(w):
                out[i, j] = (
                    0.299 * img[i, j, 0] + 0.587 * img[i, j, 1] + 0.114 * img[i, j, 2]
                )
        return out

    @njit(cache=True)
    def _hamming_nb(probe: np.uint64, hashes: np.ndarray) -> np.ndarray:
        m1 = np.uint64(0x5555555555555555)
        m2 = np.uint64(0x3333333333333333)
        m4 = np.uint64(0x0F0F0F0F0F0F0F0F)
        h01 = np.uint64(0x0101010101010101)
        out = np.empty(hashes.shape[0], dtype=np.int64)
        for i in range(hashes.shape[0]):
            x = hashes[i] ^ probe
            x = x - ((x >> np.uint64(1)) & m1)
            x = (x & m2) + ((x >> np.uint64(2)) & m2)
            x = (x + (x >> np.uint64(4))) & m4
            out[i] = np.int64((x * h01) >> np.uint64(56))
        return out

    def rgb_to_gray_numba(img: np.ndarray) -> np.ndarray:
        return _rgb_to_gray_nb(np.ascontiguousarray(img))

    def box_resize_numba(gray: np.ndarray, n_out: int) -> np.ndarray:
        return _box_resize_nb(np.ascontiguousarray(gray), n_out)

    def hamming_distances_numba(probe: int, hashes: np.ndarray) -> np.ndarray:
        return _hamming_nb(np.uint64(probe), np.ascontiguousarray(hashes))

else:
    rgb_to_gray_numba = None
    box_resize_numba = None
    hamming_distances_numba = None


# Selected flavor, used by the rest of the package.
if _HAVE_NUMBA:
    rgb_to_gray = rgb_to_gray_numba
    box_resize = box_resize_numba
    hamming_distances = hamming_distances_numba
else:
    rgb_to_gray = rgb_to_gray_numpy
    box_resize = box_resize_numpy
    hamming_distances = hamming_distances_numpy
