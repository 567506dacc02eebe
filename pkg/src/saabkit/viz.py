"""Render transform basis functions as 8-bit grayscale tiles and grids.

A basis function is obtained by inverting a unit spectral impulse (bias
plus ``e_k``), then linearly stretched so its minimum maps to 0 and its
maximum to 255. Each tile is normalized on its own.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import RejectedInputError
from .transforms import AffineOrthoKernel, inverse


@dataclass(frozen=True)
class GrayImage:
    width: int
    height: int
    pixels: np.ndarray  # (height, width) uint8

    def tile(self, t: int, n: int, columns: int) -> np.ndarray:
        """The ``n x n`` tile at grid slot ``t`` of a basis grid."""
        r, c = divmod(t, columns)
        y, x = r * (n + 1), c * (n + 1)
        return self.pixels[y : y + n, x : x + n]

    def to_pgm(self) -> bytes:
        return b"P5\n%d %d\n255\n" % (self.width, self.height) + self.pixels.astype(np.uint8).tobytes()


def normalize_gray(values) -> np.ndarray:
    """Min-max stretch to 0..255, rounding half away from zero.

    A (numerically) constant input maps to 128 everywhere.
    """
    v = np.asarray(values, dtype=np.float64)
    lo, hi = float(v.min()), float(v.max())
    if hi - lo < 1e-12:
        return np.full(v.shape, 128, dtype=np.uint8)
    scaled = (v - lo) / (hi - lo) * 255.0
    return np.floor(scaled + 0.5).astype(np.uint8)


def basis_image(kernel: AffineOrthoKernel, k: int) -> GrayImage:
    if not 0 <= k < kernel.dim:
        raise RejectedInputError(f"coefficient index {k} outside 0..{kernel.dim - 1}")
    impulse = kernel.bias.copy()
    impulse[k] += 1.0
    x = inverse(kernel, impulse).reshape(kernel.n, kernel.n)
    return GrayImage(kernel.n, kernel.n, normalize_gray(x))


def basis_grid(kernel: AffineOrthoKernel, columns: int, order=None, top: int | None = None) -> GrayImage:
    """Tile DC and then the AC basis functions in ``order``.

    Tiles run left to right, then top to bottom, separated by 1-pixel black
    lines. ``top`` keeps only the first ``top`` tiles (DC included).
    """
    if columns < 1:
        raise RejectedInputError("columns must be >= 1")
    n, dim = kernel.n, kernel.dim
    ac = list(range(1, dim)) if order is None else [int(i) for i in order]
    if sorted(ac) != list(range(1, dim)):
        raise RejectedInputError("order must be a permutation of the AC indices")
    indices = [0] + ac
    if top is not None:
        if top < 1:
            raise RejectedInputError("top must be >= 1")
        indices = indices[:top]
    rows = math.ceil(len(indices) / columns)
    width = columns * n + (columns - 1)
    height = rows * n + (rows - 1)
    canvas = np.zeros((height, width), dtype=np.uint8)
    for t, k in enumerate(indices):
        r, c = divmod(t, columns)
        y, x = r * (n + 1), c * (n + 1)
        canvas[y : y + n, x : x + n] = basis_image(kernel, k).pixels
    return GrayImage(width, height, canvas)
