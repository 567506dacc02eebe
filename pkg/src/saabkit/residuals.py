"""Residual-block datasets: image planes, intra prediction, AR(1) synthesis.

Planes are read from binary PGM (P5) or YUV4MPEG2 files and normalized to
[0, 1]. Residuals come from a simplified open-loop intra predictor working
on the original (not reconstructed) neighbours, in real arithmetic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import FrameRangeError, OutOfBorderError, ParseError, RejectedInputError
from .linalg import eig_sym


class Mode(str, Enum):
    PLANAR = "PLANAR"
    DC = "DC"
    HORIZONTAL = "HORIZONTAL"
    VERTICAL = "VERTICAL"
    SYNTH_AR1 = "SYNTH_AR1"


PREDICTION_MODES = (Mode.PLANAR, Mode.DC, Mode.HORIZONTAL, Mode.VERTICAL)
CHANNELS = ("Y", "Cb", "Cr", "GRAY")


@dataclass(frozen=True)
class Plane:
    width: int
    height: int
    samples: np.ndarray  # (height, width), values in [0, 1]
    channel: str = "GRAY"

    def __post_init__(self):
        s = self.samples
        if s.shape != (self.height, self.width):
            raise RejectedInputError(f"samples shape {s.shape} != ({self.height}, {self.width})")
        if not np.all(np.isfinite(s)) or s.min(initial=0.0) < 0.0 or s.max(initial=0.0) > 1.0:
            raise RejectedInputError("plane samples must be finite and in [0, 1]")
        if self.channel not in CHANNELS:
            raise RejectedInputError(f"unknown channel {self.channel!r}")


@dataclass(frozen=True)
class ResidualBlockSet:
    """Labelled residual blocks, one lexicographic block per row of ``blocks``."""

    n: int
    mode: Mode | None
    channel: str
    blocks: np.ndarray  # (count, n*n)
    provenance: str = ""

    def __post_init__(self):
        if self.blocks.ndim != 2 or self.blocks.shape[1] != self.n * self.n:
            raise RejectedInputError(
                f"blocks must have shape (count, {self.n * self.n}), got {self.blocks.shape}"
            )

    def __len__(self) -> int:
        return self.blocks.shape[0]


def _coerce_mode(mode) -> Mode:
    try:
        return mode if isinstance(mode, Mode) else Mode(str(mode).upper())
    except ValueError:
        raise RejectedInputError(f"unknown prediction mode {mode!r}") from None


# --------------------------------------------------------------------------
# File parsing


def _read_token(data: bytes, pos: int) -> tuple:
    """Next whitespace-delimited PNM header token, skipping ``#`` comments."""
    size = len(data)
    while pos < size:
        ch = data[pos : pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            end = data.find(b"\n", pos)
            pos = size if end < 0 else end + 1
        else:
            break
    start = pos
    while pos < size and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise ParseError("unexpected end of PGM header", start)
    return data[start:pos], start, pos


def parse_pgm(data: bytes, channel: str = "GRAY") -> Plane:
    if data[:2] != b"P5":
        raise ParseError(f"unsupported PGM magic {data[:2]!r}; only binary P5 is read", 0)
    pos = 2
    values = []
    for name in ("width", "height", "maxval"):
        tok, start, pos = _read_token(data, pos)
        try:
            v = int(tok)
        except ValueError:
            raise ParseError(f"bad PGM {name} {tok!r}", start) from None
        if v <= 0:
            raise ParseError(f"PGM {name} must be positive", start)
        values.append(v)
    width, height, maxval = values
    if maxval > 255:
        raise ParseError(f"only 8-bit PGM is supported, maxval {maxval}", pos)
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise ParseError("missing whitespace after PGM maxval", pos)
    pos += 1
    need = width * height
    if len(data) - pos < need:
        raise ParseError(f"PGM payload truncated: need {need} bytes, have {len(data) - pos}", pos)
    raw = np.frombuffer(data, dtype=np.uint8, count=need, offset=pos)
    return Plane(width, height, raw.reshape(height, width) / maxval, channel)


def _y4m_geometry(colorspace: str, width: int, height: int, offset: int):
    if colorspace.startswith("420"):
        if colorspace not in ("420", "420jpeg", "420paldv", "420mpeg2"):
            raise ParseError(f"unsupported Y4M colorspace C{colorspace}", offset)
        return (width + 1) // 2, (height + 1) // 2
    if colorspace == "444":
        return width, height
    raise ParseError(f"unsupported Y4M colorspace C{colorspace}; only 8-bit 420/444", offset)


def parse_y4m(data: bytes, frame: int = 0, channel: str = "Y") -> Plane:
    if not data.startswith(b"YUV4MPEG2"):
        raise ParseError("missing YUV4MPEG2 signature", 0)
    eol = data.find(b"\n")
    if eol < 0:
        raise ParseError("unterminated Y4M stream header", len(data))
    width = height = None
    colorspace = "420"
    pos = len(b"YUV4MPEG2")
    for tok in data[pos:eol].split(b" "):
        if not tok:
            continue
        key, val = tok[:1], tok[1:].decode("ascii", "replace")
        try:
            if key == b"W":
                width = int(val)
            elif key == b"H":
                height = int(val)
        except ValueError:
            raise ParseError(f"bad Y4M header field {tok!r}", data.find(tok, pos)) from None
        if key == b"C":
            colorspace = val
    if not width or not height or width <= 0 or height <= 0:
        raise ParseError("Y4M header lacks positive W and H", 0)
    cw, ch = _y4m_geometry(colorspace, width, height, data.find(b" C", 0, eol) + 1)
    frame_bytes = width * height + 2 * cw * ch
    if channel not in ("Y", "Cb", "Cr"):
        raise RejectedInputError(f"Y4M channel must be Y, Cb or Cr, got {channel!r}")
    if frame < 0:
        raise FrameRangeError(f"frame index {frame} is negative")

    pos = eol + 1
    index = 0
    while True:
        if pos >= len(data):
            raise FrameRangeError(f"frame {frame} out of range; stream has {index} frames")
        if not data.startswith(b"FRAME", pos):
            raise ParseError("expected FRAME marker", pos)
        hdr_end = data.find(b"\n", pos)
        if hdr_end < 0:
            raise ParseError("unterminated FRAME header", pos)
        payload = hdr_end + 1
        if len(data) - payload < frame_bytes:
            raise ParseError(
                f"frame {index} truncated: need {frame_bytes} bytes, have {len(data) - payload}",
                payload,
            )
        if index == frame:
            break
        pos = payload + frame_bytes
        index += 1

    if channel == "Y":
        off, w, h = payload, width, height
    elif channel == "Cb":
        off, w, h = payload + width * height, cw, ch
    else:
        off, w, h = payload + width * height + cw * ch, cw, ch
    raw = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=off)
    return Plane(w, h, raw.reshape(h, w) / 255.0, channel)


def load_plane(path, format: str | None = None, frame: int = 0, channel: str | None = None) -> Plane:
    """Read one normalized plane from a PGM (P5) or Y4M file.

    ``format`` defaults to the file extension. For Y4M, ``channel`` picks
    ``Y``, ``Cb`` or ``Cr`` (chroma at its native subsampled size).
    """
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).upper()
    data = path.read_bytes()
    if fmt == "PGM":
        if frame != 0:
            raise FrameRangeError(f"PGM files hold a single frame, asked for {frame}")
        return parse_pgm(data, channel or "GRAY")
    if fmt == "Y4M":
        return parse_y4m(data, frame, channel or "Y")
    raise RejectedInputError(f"unknown plane format {fmt!r}; expected PGM or Y4M")


# --------------------------------------------------------------------------
# Intra prediction


def _references(samples: np.ndarray, row: int, col: int, n: int):
    h, w = samples.shape
    if row < 1 or col < 1 or row + n > h or col + n > w:
        raise OutOfBorderError(
            f"block at ({row}, {col}) of size {n} needs a top/left border inside a {w}x{h} plane"
        )
    top = samples[row - 1, col : col + n]
    left = samples[row : row + n, col - 1]
    # missing top-right / bottom-left samples take the nearest border value
    top_right = samples[row - 1, col + n] if col + n < w else top[-1]
    bottom_left = samples[row + n, col - 1] if row + n < h else left[-1]
    return top, left, top_right, bottom_left


def _predict(top, left, top_right, bottom_left, n, mode):
    """Vectorized predictor; references carry a leading batch axis."""
    if mode is Mode.DC:
        dc = (top.sum(axis=-1) + left.sum(axis=-1)) / (2 * n)
        return np.broadcast_to(dc[..., None, None], dc.shape + (n, n))
    if mode is Mode.HORIZONTAL:
        return np.broadcast_to(left[..., :, None], left.shape + (n,))
    if mode is Mode.VERTICAL:
        return np.broadcast_to(top[..., None, :], top.shape[:-1] + (n, n))
    if mode is Mode.PLANAR:
        i = np.arange(n)
        x = i[None, :]  # column
        y = i[:, None]  # row
        tr = np.asarray(top_right)[..., None, None]
        bl = np.asarray(bottom_left)[..., None, None]
        return (
            (n - 1 - x) * left[..., :, None]
            + (x + 1) * tr
            + (n - 1 - y) * top[..., None, :]
            + (y + 1) * bl
        ) / (2 * n)
    raise RejectedInputError(f"mode {mode} is not a prediction mode")


def intra_predict(plane: Plane, origin, n: int, mode) -> np.ndarray:
    """Predicted ``n x n`` block at ``origin=(row, col)``, flattened row-major."""
    mode = _coerce_mode(mode)
    row, col = origin
    top, left, tr, bl = _references(plane.samples, int(row), int(col), n)
    return np.array(_predict(top, left, tr, bl, n, mode), dtype=np.float64).reshape(n * n)


def extract_residuals(plane: Plane, n: int, mode) -> ResidualBlockSet:
    """Residuals of every full block on the grid anchored at (1, 1).

    Block count is ``floor((h-1)/n) * floor((w-1)/n)``; the first row and
    column only serve as prediction references.
    """
    mode = _coerce_mode(mode)
    s = plane.samples
    h, w = s.shape
    if n < 1 or h < n + 1 or w < n + 1:
        raise FrameRangeError(f"plane {w}x{h} is too small for {n}x{n} blocks")
    by, bx = (h - 1) // n, (w - 1) // n
    orig = s[1 : 1 + by * n, 1 : 1 + bx * n].reshape(by, n, bx, n).transpose(0, 2, 1, 3)
    rows = 1 + n * np.arange(by)
    cols = 1 + n * np.arange(bx)
    top = s[rows[:, None, None] - 1, cols[None, :, None] + np.arange(n)]
    left = s[rows[:, None, None] + np.arange(n), cols[None, :, None] - 1]
    tr_col = cols + n
    top_right = np.where(
        (tr_col < w)[None, :],
        s[rows[:, None] - 1, np.minimum(tr_col, w - 1)[None, :]],
        top[..., -1],
    )
    bl_row = rows + n
    bottom_left = np.where(
        (bl_row < h)[:, None],
        s[np.minimum(bl_row, h - 1)[:, None], cols[None, :] - 1],
        left[..., -1],
    )
    pred = _predict(top, left, top_right, bottom_left, n, mode)
    res = (orig - pred).reshape(by * bx, n * n)
    return ResidualBlockSet(
        n=n,
        mode=mode,
        channel=plane.channel,
        blocks=np.ascontiguousarray(res),
        provenance=f"intra {mode.value} residuals of {plane.channel} plane {plane.width}x{plane.height}",
    )


# --------------------------------------------------------------------------
# Synthetic residuals


def ar1_covariance(n: int, rho: float) -> np.ndarray:
    i = np.arange(n)
    return rho ** np.abs(i[:, None] - i[None, :]).astype(np.float64)


def synth_ar1(rho: float, sigma: float, n: int, count: int, seed: int) -> ResidualBlockSet:
    """Zero-mean Gaussian blocks with separable AR(1) covariance.

    ``Cov(x[i, j], x[k, l]) = sigma**2 * rho**|i-k| * rho**|j-l|``.
    """
    if not (0.0 <= rho < 1.0) or not math.isfinite(rho):
        raise RejectedInputError(f"rho must lie in [0, 1), got {rho}")
    if not (sigma > 0.0) or not math.isfinite(sigma):
        raise RejectedInputError(f"sigma must be positive and finite, got {sigma}")
    if n < 1 or count < 1:
        raise RejectedInputError("n and count must be positive")
    eig = eig_sym(ar1_covariance(n, rho))
    vals = np.clip(eig.eigenvalues, 0.0, None)
    root = (eig.eigenvectors * np.sqrt(vals)) @ eig.eigenvectors.T
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((count, n, n))
    # columns then rows: root @ z @ root^T
    blocks = sigma * np.matmul(np.matmul(root, z), root.T)
    return ResidualBlockSet(
        n=n,
        mode=Mode.SYNTH_AR1,
        channel="GRAY",
        blocks=blocks.reshape(count, n * n),
        provenance=f"synth_ar1 rho={rho!r} sigma={sigma!r} n={n} count={count} seed={seed}",
    )
