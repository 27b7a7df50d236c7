"""64-bit DCT perceptual hash of an RGB image.

The pipeline: BT.601 grayscale -> 32x32 box resample -> orthonormal 2D
DCT-II -> top-left 8x8 low-frequency block -> threshold each coefficient
against the block mean (DC included, strict greater-than) -> pack the 64
bits row-major with coefficient (0,0) at the most significant bit.

All intermediate arithmetic is float64. Every function here is pure, so
concurrent use needs no locking. Conventions worth knowing:

* Grayscale weights are 0.299 / 0.587 / 0.114 (ITU-R BT.601 luma).
* Resampling is area (box) averaging with fractional coverage weights. It
  commutes with the square symmetries (rotations/flips), which the
  augmentation module's fast path relies on.
* Ties at the threshold produce 0 bits (strict inequality).
* A constant image with value > 0 hashes to 0x8000000000000000 (only the
  DC bit set); a black image hashes to 0x0.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from . import _kernels
from .errors import InvalidInputError

DCT_SIZE = 32
BLOCK_SIZE = 8
HASH_BITS = 64

LUMA_WEIGHTS = (_kernels.LUMA_R, _kernels.LUMA_G, _kernels.LUMA_B)


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """Convert an (H, W, 3) RGB array to float64 luminance in [0, 255]."""
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise InvalidInputError(f"expected (H, W, 3) RGB array, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise InvalidInputError("image has zero-sized dimension")
    return _kernels.rgb_to_gray(arr)


def resize_to_32(gray: np.ndarray) -> np.ndarray:
    """Box-resample a grayscale image to 32x32.

    Output pixel (k, l) averages the source region it covers, with partial
    source pixels weighted by their covered fraction. A constant image of
    integer value comes through bit-exactly.
    """
    arr = np.asarray(gray, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInputError(f"expected 2-D grayscale array, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidInputError("image has zero-sized dimension")
    return _kernels.box_resize(arr, DCT_SIZE)


@lru_cache(maxsize=8)
def _dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II basis matrix of size n."""
    k = np.arange(n, dtype=np.float64).reshape(-1, 1)
    x = np.arange(n, dtype=np.float64).reshape(1, -1)
    mat = np.cos((np.pi / n) * (x + 0.5) * k) * np.sqrt(2.0 / n)
    mat[0, :] /= np.sqrt(2.0)
    mat.setflags(write=False)
    return mat


def dct2d(gray32: np.ndarray) -> np.ndarray:
    """Orthonormal 2-D DCT-II of a 32x32 image (rows then columns)."""
    arr = np.asarray(gray32, dtype=np.float64)
    if arr.shape != (DCT_SIZE, DCT_SIZE):
        raise InvalidInputError(f"expected {DCT_SIZE}x{DCT_SIZE} input, got {arr.shape}")
    mat = _dct_matrix(DCT_SIZE)
    return mat @ arr @ mat.T


def idct2d(coeffs: np.ndarray) -> np.ndarray:
    """Inverse of :func:`dct2d`; recovers the input to ~1e-9 per pixel."""
    arr = np.asarray(coeffs, dtype=np.float64)
    if arr.shape != (DCT_SIZE, DCT_SIZE):
        raise InvalidInputError(f"expected {DCT_SIZE}x{DCT_SIZE} input, got {arr.shape}")
    mat = _dct_matrix(DCT_SIZE)
    return mat.T @ arr @ mat


def low_freq(coeffs: np.ndarray) -> np.ndarray:
    """Top-left 8x8 block of a 32x32 DCT; (0, 0) is the DC coefficient."""
    arr = np.asarray(coeffs, dtype=np.float64)
    if arr.shape != (DCT_SIZE, DCT_SIZE):
        raise InvalidInputError(f"expected {DCT_SIZE}x{DCT_SIZE} input, got {arr.shape}")
    return arr[:BLOCK_SIZE, :BLOCK_SIZE].copy()


def threshold_hash(block: np.ndarray) -> int:
    """Threshold an 8x8 block against its mean and pack the bits.

    The mean runs over all 64 values including DC. Bit (u, v) is set iff
    the coefficient strictly exceeds the mean; bit index is 63 - (8u + v),
    i.e. row-major with (0, 0) at the MSB.
    """
    arr = np.asarray(block, dtype=np.float64)
    if arr.shape != (BLOCK_SIZE, BLOCK_SIZE):
        raise InvalidInputError(
            f"expected {BLOCK_SIZE}x{BLOCK_SIZE} block, got {arr.shape}"
        )
    bits = arr > arr.mean()
    return int.from_bytes(np.packbits(bits.ravel()).tobytes(), "big")


def compute_phash(img: np.ndarray) -> int:
    """64-bit perceptual hash of an (H, W, 3) RGB array.

    Pure function of the pixel content: identical pixels give identical
    hashes regardless of call order or thread count.
    """
    return threshold_hash(low_freq(dct2d(resize_to_32(to_grayscale(img)))))


def hamming(a: int, b: int) -> int:
    """Hamming distance between two 64-bit hash values."""
    return ((a ^ b) & 0xFFFFFFFFFFFFFFFF).bit_count()


def hash_hex(h: int) -> str:
    return f"{h:016x}"
