"""Orthonormal 8x8 DCT-II and block (un)tiling."""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..errors import ParameterError

BLOCK = 8


@lru_cache(maxsize=None)
def dct_matrix(n: int = BLOCK) -> np.ndarray:
    """``A[k, i] = a_k cos(pi (2i + 1) k / 2n)`` with orthonormal scaling."""
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    a = np.cos(np.pi * (2 * i + 1) * k / (2 * n)) * np.sqrt(2.0 / n)
    a[0] /= np.sqrt(2.0)
    a.setflags(write=False)
    return a


def _check_block(block):
    block = np.asarray(block, dtype=np.float64)
    if block.shape[-2:] != (BLOCK, BLOCK):
        raise ParameterError("expected 8x8 blocks")
    return block


def dct8_forward(block) -> np.ndarray:
    """2-D DCT of one block or a stack of blocks (last two axes)."""
    a = dct_matrix()
    return a @ _check_block(block) @ a.T


def dct8_inverse(coeffs) -> np.ndarray:
    a = dct_matrix()
    return a.T @ _check_block(coeffs) @ a


def pad_to_blocks(img: np.ndarray) -> np.ndarray:
    """Replicate the last row/column until both sides are multiples of 8."""
    h, w = img.shape[:2]
    ph, pw = -h % BLOCK, -w % BLOCK
    if ph == 0 and pw == 0:
        return img
    pad = [(0, ph), (0, pw)] + [(0, 0)] * (img.ndim - 2)
    return np.pad(img, pad, mode="edge")


def blockify(plane: np.ndarray) -> np.ndarray:
    """(H, W) with H, W multiples of 8 -> (H/8, W/8, 8, 8)."""
    h, w = plane.shape
    if h % BLOCK or w % BLOCK:
        raise ParameterError("plane size must be a multiple of 8")
    return plane.reshape(h // BLOCK, BLOCK, w // BLOCK, BLOCK).swapaxes(1, 2)


def unblockify(blocks: np.ndarray) -> np.ndarray:
    bh, bw = blocks.shape[:2]
    return blocks.swapaxes(1, 2).reshape(bh * BLOCK, bw * BLOCK)


def zigzag_order(n: int = BLOCK) -> np.ndarray:
    """Flat indices of an n x n block in JPEG zigzag order."""
    idx = sorted(
        ((i, j) for i in range(n) for j in range(n)),
        key=lambda p: (p[0] + p[1], p[1] if (p[0] + p[1]) % 2 == 0 else p[0]),
    )
    return np.array([i * n + j for i, j in idx])
