"""On-disk formats: kernel files, SBLK block files, PGM images.

Kernel files are JSON text. Matrix rows, biases and energies are written
with 17 significant digits, one matrix row per line, so a saved kernel
reloads bit for bit and diffs cleanly.

Block files are a small little-endian binary container::

    b"SBLK" | uint32 version | uint32 n | uint64 count | count*n*n float64

Every writer goes through :func:`atomic_write` (temp file, then rename).
"""
from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import (
    KernelDimensionError,
    KernelFileError,
    KernelOrthonormalityError,
    KernelVersionError,
    ParseError,
)
from .residuals import ResidualBlockSet
from .transforms import DCT, KLT, SAAB, AffineOrthoKernel, KltKernel, orthonormality_error

KERNEL_FORMAT_VERSION = 1
ORTHONORMALITY_GUARD = 1e-6

BLOCK_MAGIC = b"SBLK"
BLOCK_VERSION = 1
_BLOCK_HEADER = struct.Struct("<4sIIQ")


def atomic_write(path, data) -> None:
    path = Path(path)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --------------------------------------------------------------------------
# Kernel files


def _num(v: float) -> str:
    return format(float(v), ".17g")


def _vec(values) -> str:
    return "[" + ", ".join(_num(v) for v in np.ravel(values)) + "]"


def _mat(rows, indent: str) -> str:
    if len(rows) == 0:
        return "[]"
    inner = (",\n" + indent + "  ").join(_vec(r) for r in rows)
    return "[\n" + indent + "  " + inner + "\n" + indent + "]"


def kernel_to_text(k, meta: dict | None = None) -> str:
    meta = dict(meta or {})
    meta.setdefault("sample_count", int(k.sample_count))
    meta.setdefault("source", k.source)
    if isinstance(k, KltKernel):
        head = {"format_version": KERNEL_FORMAT_VERSION, "kind": KLT, "n": k.n, "plan": [k.n]}
        arrays = [
            ("mean", _vec(k.mean)),
            ("bias", _vec(np.zeros(k.dim))),
            ("matrix", _mat(k.basis, "  ")),
            ("energies", _vec(k.eigenvalues)),
        ]
    else:
        head = {"format_version": KERNEL_FORMAT_VERSION, "kind": k.kind, "n": k.n, "plan": list(k.plan)}
        arrays = [
            ("bias", _vec(k.bias)),
            ("stage_biases", _vec(k.stage_biases)),
            ("matrix", _mat(k.matrix, "  ")),
            ("energies", _vec(k.energies)),
        ]
    lines = [f"  {json.dumps(key)}: {json.dumps(val)}" for key, val in head.items()]
    lines += [f"  {json.dumps(key)}: {val}" for key, val in arrays]
    lines.append(f"  \"training\": {json.dumps(meta, sort_keys=True)}")
    return "{\n" + ",\n".join(lines) + "\n}\n"


def _array(doc, key, shape):
    try:
        a = np.array(doc[key], dtype=np.float64)
    except KeyError:
        raise KernelDimensionError(f"kernel file lacks {key!r}") from None
    except (ValueError, TypeError):
        raise KernelDimensionError(f"{key!r} is ragged or non-numeric") from None
    if a.shape != shape:
        raise KernelDimensionError(f"{key!r} has shape {a.shape}, expected {shape}")
    if not np.all(np.isfinite(a)):
        raise KernelFileError(f"{key!r} has non-finite values")
    return a


def kernel_from_text(text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"kernel file is not valid JSON: {exc.msg}", exc.pos) from None
    version = doc.get("format_version")
    if version != KERNEL_FORMAT_VERSION:
        raise KernelVersionError(f"unsupported kernel format version {version!r}")
    kind = doc.get("kind")
    try:
        n = int(doc["n"])
        plan = tuple(int(s) for s in doc["plan"])
    except (KeyError, TypeError, ValueError):
        raise KernelDimensionError("kernel file lacks a valid n/plan") from None
    dim = n * n
    meta = doc.get("training", {})
    count = int(meta.get("sample_count", 0))
    source = str(meta.get("source", ""))
    if kind == KLT:
        basis = _array(doc, "matrix", (dim - 1, dim))
        if orthonormality_error(basis) >= ORTHONORMALITY_GUARD:
            raise KernelOrthonormalityError("KLT basis rows are not orthonormal")
        return KltKernel(
            n=n,
            mean=_array(doc, "mean", (dim,)),
            basis=basis,
            eigenvalues=_array(doc, "energies", (dim - 1,)),
            sample_count=count,
            source=source,
        )
    if kind not in (DCT, SAAB):
        raise KernelFileError(f"unknown kernel kind {kind!r}")
    matrix = _array(doc, "matrix", (dim, dim))
    err = orthonormality_error(matrix)
    if err >= ORTHONORMALITY_GUARD:
        raise KernelOrthonormalityError(f"kernel rows are not orthonormal (||MM^T - I||_F = {err:.3g})")
    stage_biases = doc.get("stage_biases", [])
    return AffineOrthoKernel(
        n=n,
        kind=kind,
        plan=plan,
        matrix=matrix,
        bias=_array(doc, "bias", (dim,)),
        energies=_array(doc, "energies", (dim,)),
        sample_count=count,
        source=source,
        stage_biases=tuple(float(b) for b in stage_biases),
    )


def save_kernel(k, path, meta: dict | None = None) -> None:
    atomic_write(path, kernel_to_text(k, meta))


def load_kernel(path):
    return kernel_from_text(Path(path).read_text(encoding="utf-8"))


def load_kernel_meta(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8")).get("training", {})


# --------------------------------------------------------------------------
# Block files


def blocks_to_bytes(blocks) -> bytes:
    x = blocks.blocks if isinstance(blocks, ResidualBlockSet) else np.asarray(blocks)
    n = blocks.n if isinstance(blocks, ResidualBlockSet) else int(round(np.sqrt(x.shape[1])))
    head = _BLOCK_HEADER.pack(BLOCK_MAGIC, BLOCK_VERSION, n, x.shape[0])
    return head + np.ascontiguousarray(x, dtype="<f8").tobytes()


def blocks_from_bytes(data: bytes, provenance: str = "") -> ResidualBlockSet:
    if len(data) < _BLOCK_HEADER.size:
        raise ParseError("block file shorter than its header", len(data))
    magic, version, n, count = _BLOCK_HEADER.unpack_from(data)
    if magic != BLOCK_MAGIC:
        raise ParseError(f"bad block-file magic {magic!r}", 0)
    if version != BLOCK_VERSION:
        raise ParseError(f"unsupported block-file version {version}", 4)
    need = count * n * n * 8
    have = len(data) - _BLOCK_HEADER.size
    if have != need:
        raise ParseError(f"block payload has {have} bytes, header implies {need}", _BLOCK_HEADER.size)
    x = np.frombuffer(data, dtype="<f8", offset=_BLOCK_HEADER.size).reshape(count, n * n)
    return ResidualBlockSet(n=n, mode=None, channel="GRAY", blocks=x.astype(np.float64), provenance=provenance)


def save_blocks(blocks, path) -> None:
    atomic_write(path, blocks_to_bytes(blocks))


def load_blocks(path) -> ResidualBlockSet:
    return blocks_from_bytes(Path(path).read_bytes(), provenance=str(path))


def save_pgm(image, path) -> None:
    atomic_write(path, image.to_pgm())


__all__ = [
    "atomic_write",
    "blocks_from_bytes",
    "blocks_to_bytes",
    "kernel_from_text",
    "kernel_to_text",
    "load_blocks",
    "load_kernel",
    "save_blocks",
    "save_kernel",
    "save_pgm",
]
