"""End-to-end kernel fitting with covariance-convergence monitoring.

Samples are streamed into a :class:`~saabkit.linalg.CovarianceAccumulator`
in chunks of ``delta_m``. After every chunk past the first, the covariance
is compared (Frobenius norm) with the snapshot taken one chunk earlier;
fitting stops at the first checkpoint whose difference drops below
``epsilon`` or when ``max_samples`` is reached.

Residual samples are divided by ``scale`` (255 by default) before they
reach the accumulator, so ``epsilon`` applies to a unit-range covariance.
Fitted kernels always act on unscaled data.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace

import numpy as np

from .errors import InsufficientDataError, RejectedInputError
from .linalg import CovarianceAccumulator, frobenius_diff
from .residuals import ResidualBlockSet
from .transforms import (
    BIAS_MARGIN,
    DCT,
    KLT,
    SAAB,
    as_blocks,
    bias_select,
    dct_kernel,
    group_cuboids,
    kernel_from_stages,
    klt_kernel,
    saab_stage_from_moments,
    to_grid,
    validate_plan,
)

DEFAULT_EPSILON = 1.5e-4
DEFAULT_DELTA_M = 5000
DEFAULT_SCALE = 255.0
DEFAULT_MAX_SAMPLES = 500_000


@dataclass(frozen=True)
class ConvergenceParams:
    epsilon: float = DEFAULT_EPSILON
    delta_m: int = DEFAULT_DELTA_M
    max_samples: int = DEFAULT_MAX_SAMPLES
    scale: float = DEFAULT_SCALE

    def __post_init__(self):
        if self.delta_m < 1:
            raise RejectedInputError(f"delta_m must be >= 1, got {self.delta_m}")
        if not self.epsilon > 0:
            raise RejectedInputError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_samples < 1:
            raise RejectedInputError(f"max_samples must be >= 1, got {self.max_samples}")
        if not self.scale > 0:
            raise RejectedInputError(f"scale must be positive, got {self.scale}")


@dataclass(frozen=True)
class ConvergenceTrace:
    checkpoints: tuple  # ((M, diff), ...)
    epsilon: float
    delta_m: int
    converged_at: int | None = None

    @property
    def final_m(self) -> int:
        return self.checkpoints[-1][0] if self.checkpoints else 0

    @property
    def diffs(self) -> np.ndarray:
        return np.array([d for _, d in self.checkpoints], dtype=np.float64)


@dataclass(frozen=True)
class FitReport:
    kernel: object
    trace: ConvergenceTrace
    stage_traces: tuple = ()
    bias_basis: tuple = ()  # (max training norm, margin) per Saab stage
    sample_count: int = 0
    source: str = ""


def iter_chunks(source, size: int):
    """Yield 2-D float arrays of at most ``size`` rows from ``source``.

    ``source`` may be a :class:`ResidualBlockSet`, a 2-D array, or any
    iterable of vectors or 2-D arrays.
    """
    if isinstance(source, ResidualBlockSet):
        source = source.blocks
    if isinstance(source, np.ndarray):
        x = as_blocks(source) if source.ndim == 3 else np.asarray(source, dtype=np.float64)
        if x.ndim != 2:
            raise RejectedInputError(f"sample array must be 2-D, got shape {x.shape}")
        for i in range(0, x.shape[0], size):
            yield x[i : i + size]
        return
    pending, have = [], 0
    for item in source:
        a = np.asarray(item, dtype=np.float64)
        a = a[None, :] if a.ndim == 1 else a.reshape(a.shape[0], -1)
        pending.append(a)
        have += a.shape[0]
        while have >= size:
            buf = np.concatenate(pending)
            yield buf[:size]
            rest = buf[size:]
            pending, have = ([rest] if rest.shape[0] else []), rest.shape[0]
    if have:
        yield np.concatenate(pending)


def _exact_chunks(chunks, size: int):
    """Re-cut a chunk stream into pieces of exactly ``size`` rows; drop the tail."""
    pending, have = [], 0
    for c in chunks:
        pending.append(c)
        have += c.shape[0]
        while have >= size:
            buf = np.concatenate(pending) if len(pending) > 1 else pending[0]
            yield buf[:size]
            rest = buf[size:]
            pending, have = ([rest] if rest.shape[0] else []), rest.shape[0]


def _monitor(chunks, delta_m, epsilon, max_samples, scale):
    acc = None
    prev_cov = None
    checkpoints = []
    converged_at = None
    max_norm = 0.0
    for chunk in _exact_chunks(chunks, delta_m):
        if (0 if acc is None else acc.count) + delta_m > max_samples:
            break
        if acc is None:
            acc = CovarianceAccumulator(chunk.shape[1])
        max_norm = max(max_norm, float(np.max(np.linalg.norm(chunk, axis=1))))
        acc.update(chunk / scale)
        cov = acc.covariance()
        if prev_cov is not None:
            diff = frobenius_diff(cov, prev_cov)
            checkpoints.append((acc.count, diff))
            if diff < epsilon:
                converged_at = acc.count
                break
        prev_cov = cov
    if acc is None or acc.count < 2 * delta_m:
        seen = 0 if acc is None else acc.count
        raise InsufficientDataError(
            f"need at least 2*delta_m = {2 * delta_m} samples (within max_samples), got {seen}"
        )
    trace = ConvergenceTrace(tuple(checkpoints), float(epsilon), int(delta_m), converged_at)
    return acc, trace, max_norm


def convergence_monitor(stream, delta_m: int = DEFAULT_DELTA_M, epsilon: float = DEFAULT_EPSILON,
                        max_samples: int = DEFAULT_MAX_SAMPLES, scale: float = 1.0):
    """Accumulate ``stream`` until its covariance settles.

    Returns ``(accumulator, trace)``. The accumulator holds the consumed
    samples divided by ``scale``. Only whole ``delta_m`` chunks are used.
    """
    params = ConvergenceParams(epsilon, delta_m, max_samples, scale)
    acc, trace, _ = _monitor(iter_chunks(stream, delta_m), delta_m, epsilon, max_samples, params.scale)
    return acc, trace


def _unscaled(acc: CovarianceAccumulator, scale: float) -> CovarianceAccumulator:
    out = acc.copy()
    out.mean = acc.mean * scale
    out.scatter = acc.scatter * (scale * scale)
    return out


class _Replayable:
    """Iterate a one-shot block source several times by caching it."""

    def __init__(self, source, chunk: int):
        self._source = source
        self._chunk = chunk
        self._cache = []
        self._it = None
        if isinstance(source, (ResidualBlockSet, np.ndarray)):
            self._static = True
        else:
            self._static = False
            self._it = iter(iter_chunks(source, chunk))

    def chunks(self):
        if self._static:
            yield from iter_chunks(self._source, self._chunk)
            return
        yield from self._cache
        for c in self._it:
            self._cache.append(c)
            yield c


def _block_size(source) -> int | None:
    if isinstance(source, ResidualBlockSet):
        return source.n
    return None


def fit_pipeline(source, kind: str, plan=None, params: ConvergenceParams = ConvergenceParams(),
                 n: int | None = None, margin: float = BIAS_MARGIN, label: str = "") -> FitReport:
    """Fit a DCT, KLT or Saab kernel from a block source.

    For Saab, every stage gets its own convergence run over the stream of
    that stage's input vectors (counted in vectors, not blocks).
    """
    kind = str(kind).upper()
    if n is None:
        n = _block_size(source)
    if n is None and plan is not None:
        n = int(np.prod(plan))
    if n is None:
        raise RejectedInputError("block size is unknown; pass n or a plan")
    empty = ConvergenceTrace((), params.epsilon, params.delta_m, None)
    label = label or (getattr(source, "provenance", "") if source is not None else "")

    if kind == DCT:
        return FitReport(kernel=dct_kernel(n), trace=empty, sample_count=0, source="analytic")

    if isinstance(source, ResidualBlockSet) and source.n != n:
        raise RejectedInputError(f"block set has n={source.n}, expected {n}")

    if kind == KLT:
        acc, trace, _ = _monitor(
            (as_blocks(c, n) for c in iter_chunks(source, params.delta_m)),
            params.delta_m, params.epsilon, params.max_samples, params.scale,
        )
        kernel = klt_kernel(_unscaled(acc, params.scale), source=label)
        return FitReport(kernel=kernel, trace=trace, stage_traces=(trace,),
                         sample_count=trace.final_m, source=label)

    if kind != SAAB:
        raise RejectedInputError(f"unknown kernel kind {kind!r}")

    plan = validate_plan(n, plan if plan is not None else (n,))
    blocks = _Replayable(source, params.delta_m)
    stages, traces, basis = [], [], []
    for i, s in enumerate(plan):
        def vectors(i=i, s=s):
            for c in blocks.chunks():
                grid = to_grid(as_blocks(c, n), n)
                for ss, st in zip(plan[:i], stages[:i]):
                    grid = st.apply(group_cuboids(grid, ss))
                cub = group_cuboids(grid, s)
                yield cub.reshape(-1, cub.shape[-1])

        acc, trace, max_norm = _monitor(
            vectors(), params.delta_m, params.epsilon, params.max_samples, params.scale
        )
        stage = saab_stage_from_moments(_unscaled(acc, params.scale), max_norm, margin)
        stages.append(stage)
        traces.append(trace)
        basis.append((max_norm, margin))

    final = traces[-1]
    kernel = kernel_from_stages(n, plan, stages, source=label)
    kernel = replace(kernel, sample_count=final.final_m)
    return FitReport(
        kernel=kernel,
        trace=final,
        stage_traces=tuple(traces),
        bias_basis=tuple(basis),
        sample_count=final.final_m,
        source=label,
    )


TRACE_HEADER = ("stage", "M", "frobenius_diff")


def traces_to_csv(traces) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for stage, tr in enumerate(traces, start=1):
        for m, d in tr.checkpoints:
            w.writerow((stage, m, format(d, ".12g")))
    return buf.getvalue()


__all__ = [
    "ConvergenceParams",
    "ConvergenceTrace",
    "FitReport",
    "bias_select",
    "convergence_monitor",
    "fit_pipeline",
    "iter_chunks",
    "traces_to_csv",
]
