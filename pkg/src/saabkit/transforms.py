"""DCT, KLT and one-/multi-stage Saab block transforms.

Blocks are handled as lexicographically (row-major) flattened vectors of
length ``n*n``; every function also accepts a 2-D batch with one block per
row. The DCT and Saab transforms are affine maps ``y = M x + b`` whose
linear part ``M`` is orthonormal, so they share one kernel type,
:class:`AffineOrthoKernel`. The KLT keeps its ensemble mean separately
and lives in :class:`KltKernel`.

Multi-stage Saab kernels are fitted stage by stage and then flattened into
a single ``n*n x n*n`` affine map. Between stages the outputs of the
``s x s`` subblocks are regrouped into spatial-spectral cuboids: subblock
positions in row-major order, with each position's spectral channels
contiguous.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    DegenerateACWarning,
    InsufficientDataError,
    RejectedInputError,
    UnderdeterminedError,
)
from .linalg import CovarianceAccumulator, eig_sym

DCT = "DCT"
SAAB = "SAAB"
KLT = "KLT"

BLOCK_SIZES = (2, 4, 8, 16)
STAGE_SIZES = (2, 4, 8, 16)
MULTISTAGE_PLANS = ((2, 2), (2, 4), (4, 2), (4, 4))
BIAS_MARGIN = 1.25


def parse_plan(text, n: int | None = None) -> tuple:
    """Parse a stage list such as ``"4"``, ``"4x4,2x2"`` or ``(2, 4)``.

    Each comma-separated item is one stage, written ``S`` or ``SxS``.
    A lone ``"SxS"`` token whose side does not match ``n`` but whose
    square does (``"2x2"`` for 4x4 blocks) is read as two ``S`` stages,
    following the ``[2x2, 2x2]`` naming of two-stage plans.
    """
    if isinstance(text, (tuple, list)):
        return tuple(int(s) for s in text)
    parts = [p.strip() for p in str(text).split(",") if p.strip()]
    if not parts:
        raise RejectedInputError(f"empty stage plan {text!r}")
    stages = []
    for p in parts:
        a, sep, b = p.partition("x")
        try:
            side = int(a)
            other = int(b) if sep else side
        except ValueError:
            raise RejectedInputError(f"cannot parse stage {p!r} in plan {text!r}") from None
        if other != side:
            raise RejectedInputError(f"stage {p!r} is not square")
        stages.append(side)
    if n is not None and len(parts) == 1 and "x" in parts[0]:
        side = stages[0]
        if side != n and side * side == n:
            return (side, side)
    return tuple(stages)


def plan_label(plan) -> str:
    return ",".join(f"{s}x{s}" for s in plan)


def validate_plan(n: int, plan) -> tuple:
    plan = tuple(int(s) for s in plan)
    if n not in BLOCK_SIZES:
        raise RejectedInputError(f"unsupported block size {n}; expected one of {BLOCK_SIZES}")
    if not plan or any(s not in STAGE_SIZES for s in plan):
        raise RejectedInputError(f"invalid stage plan {plan}")
    if math.prod(plan) != n:
        raise RejectedInputError(f"stage plan {plan} does not multiply to block size {n}")
    if len(plan) > 1 and plan not in MULTISTAGE_PLANS:
        raise RejectedInputError(f"unsupported multi-stage plan {plan}")
    return plan


@dataclass(frozen=True)
class AffineOrthoKernel:
    """Affine block transform ``y = matrix @ x + bias``.

    Row ``k`` of ``matrix`` is the ``k``-th basis function; row 0 is the
    DC filter. ``energies`` holds training-time mean coefficient energies
    (mean squared bias-free coefficient for row 0, PCA eigenvalues for
    Saab AC rows, zeros for an unmeasured DCT).
    """

    n: int
    kind: str
    plan: tuple
    matrix: np.ndarray
    bias: np.ndarray
    energies: np.ndarray
    sample_count: int = 0
    source: str = ""
    stage_biases: tuple = ()

    @property
    def dim(self) -> int:
        return self.n * self.n

    @property
    def label(self) -> str:
        if self.kind == DCT:
            return "DCT"
        return f"SAAB[{plan_label(self.plan)}]"

    def with_energies(self, energies) -> "AffineOrthoKernel":
        e = np.asarray(energies, dtype=np.float64)
        if e.shape != (self.dim,):
            raise RejectedInputError(f"expected {self.dim} energies, got shape {e.shape}")
        return replace(self, energies=e.copy())


@dataclass(frozen=True)
class KltKernel:
    """KLT trained on mean-removed data.

    ``basis`` holds ``dim - 1`` unit row vectors (descending eigenvalue);
    coefficient 0 is reserved for the projection on the mean direction.
    """

    n: int
    mean: np.ndarray
    basis: np.ndarray
    eigenvalues: np.ndarray
    sample_count: int = 0
    source: str = ""
    kind: str = field(default=KLT, init=False)

    @property
    def dim(self) -> int:
        return self.n * self.n

    @property
    def label(self) -> str:
        return "KLT"


def _side_from_dim(dim: int) -> int:
    n = math.isqrt(dim)
    if n * n != dim:
        raise RejectedInputError(f"vector length {dim} is not a square")
    return n


def as_blocks(x, n: int | None = None) -> np.ndarray:
    """Coerce one block vector, a batch of vectors or a stack of ``n x n``
    arrays to a (B, n*n) float array."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 3:
        a = a.reshape(a.shape[0], -1)
    elif a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise RejectedInputError(f"cannot interpret array of shape {a.shape} as blocks")
    if n is not None and a.shape[1] != n * n:
        raise RejectedInputError(f"expected blocks of length {n * n}, got {a.shape[1]}")
    if not np.all(np.isfinite(a)):
        raise RejectedInputError("block values must be finite")
    return a


def _dct_lambda(k: int) -> float:
    return 1.0 / math.sqrt(2.0) if k == 0 else 1.0


def dct_kernel(n: int) -> AffineOrthoKernel:
    """Orthonormal 2-D DCT-II basis, rows at lexicographic frequency index ``p*n + q``."""
    if n not in BLOCK_SIZES:
        raise RejectedInputError(f"unsupported block size {n}; expected one of {BLOCK_SIZES}")
    m = np.arange(n)
    # cos1d[p, m] = cos((2m+1) p pi / 2n)
    cos1d = np.cos(np.outer(np.arange(n), 2 * m + 1) * np.pi / (2 * n))
    lam = np.array([_dct_lambda(k) for k in range(n)])
    scale = (2.0 / n) * np.outer(lam, lam)
    scale[0, 0] = 1.0 / n  # exact, so the DC row matches 1/sqrt(n*n) bit for bit
    basis = np.einsum("pq,pm,qk->pqmk", scale, cos1d, cos1d)
    matrix = basis.reshape(n * n, n * n)
    dim = n * n
    return AffineOrthoKernel(
        n=n,
        kind=DCT,
        plan=(n,),
        matrix=matrix,
        bias=np.zeros(dim),
        energies=np.zeros(dim),
        source="analytic",
    )


def klt_kernel(acc: CovarianceAccumulator, source: str = "") -> KltKernel:
    if acc.count < acc.dim:
        raise UnderdeterminedError(
            f"KLT needs at least {acc.dim} samples, accumulator has {acc.count}"
        )
    n = _side_from_dim(acc.dim)
    eig = eig_sym(acc.covariance())
    k = acc.dim - 1
    return KltKernel(
        n=n,
        mean=acc.mean.copy(),
        basis=eig.eigenvectors[:, :k].T.copy(),
        eigenvalues=eig.eigenvalues[:k].copy(),
        sample_count=acc.count,
        source=source,
    )


def klt_fit(blocks, source: str = "") -> KltKernel:
    x = as_blocks(blocks)
    return klt_kernel(CovarianceAccumulator.from_samples(x), source=source)


def klt_coefficients(k: KltKernel, x) -> np.ndarray:
    """Mean-direction coefficient followed by ``dim - 1`` mean-removed KLT coefficients."""
    single = np.ndim(x) == 1
    xb = as_blocks(x, k.n)
    out = np.empty_like(xb)
    mu_norm = float(np.linalg.norm(k.mean))
    out[:, 0] = xb @ (k.mean / mu_norm) if mu_norm > 1e-12 else 0.0
    out[:, 1:] = (xb - k.mean) @ k.basis.T
    return out[0] if single else out


# --------------------------------------------------------------------------
# Saab stages


@dataclass(frozen=True)
class SaabStage:
    """One fitted Saab stage acting on vectors of length ``d``."""

    matrix: np.ndarray
    bias: float
    eigenvalues: np.ndarray  # AC eigenvalues, length d - 1
    dc_energy: float  # mean squared DC response on the training vectors
    dc_mean: float  # mean DC response on the training vectors
    max_norm: float
    sample_count: int

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        return x @ self.matrix.T + self.bias


def bias_select(norms, margin: float = BIAS_MARGIN) -> float:
    """Shared stage bias: ``margin`` times the largest training norm.

    By Cauchy-Schwarz, ``a @ x + b >= 0`` for every unit ``a`` and every
    ``x`` whose norm is at most ``b``.
    """
    if margin < 1:
        raise RejectedInputError(f"margin must be >= 1, got {margin}")
    largest = None
    values = np.ravel(norms) if isinstance(norms, (np.ndarray, list, tuple)) else norms
    for v in values:
        v = float(v)
        if v < 0 or not np.isfinite(v):
            raise RejectedInputError(f"invalid norm {v}")
        largest = v if largest is None else max(largest, v)
    if largest is None:
        raise InsufficientDataError("bias selection needs at least one norm")
    return float(margin * largest)


def _complete_ac_basis(rows: list, d: int) -> list:
    """Extend orthonormal ``rows`` to ``d`` vectors by Gram-Schmidt on e_0, e_1, ..."""
    basis = list(rows)
    for i in range(d):
        if len(basis) == d:
            break
        v = np.zeros(d)
        v[i] = 1.0
        for _ in range(2):
            for b in basis:
                v = v - (b @ v) * b
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            v = v / nv
            nz = np.flatnonzero(np.abs(v) > 1e-12)
            if nz.size and v[nz[0]] < 0:
                v = -v
            basis.append(v)
    return basis


def saab_stage_from_moments(
    acc: CovarianceAccumulator, max_norm: float, margin: float = BIAS_MARGIN
) -> SaabStage:
    """Fit a Saab stage from the accumulated statistics of its input vectors.

    The DC filter is the normalized constant vector. AC filters are the
    principal directions of the DC-removed inputs ``x - (a0 @ x) a0``; the
    ensemble mean is not subtracted, so each AC eigenvalue equals the mean
    squared coefficient on the training set.
    """
    d = acc.dim
    if acc.count < d:
        raise UnderdeterminedError(f"Saab stage of size {d} needs at least {d} samples, got {acc.count}")
    dc = np.full(d, 1.0 / math.sqrt(d))
    proj = np.eye(d) - np.outer(dc, dc)
    mean_ac = proj @ acc.mean
    moment_ac = proj @ acc.covariance() @ proj + np.outer(mean_ac, mean_ac)
    eig = eig_sym(0.5 * (moment_ac + moment_ac.T))

    # the DC direction is an exact null vector; keep the leading directions
    total = max(float(np.trace(moment_ac)), 0.0)
    thresh = 1e-10 * total
    rows = [dc]
    values = []
    for lam, vec in zip(eig.eigenvalues, eig.eigenvectors.T):
        if len(rows) == d or total == 0.0 or lam <= thresh:
            break
        v = vec - (dc @ vec) * dc
        v /= np.linalg.norm(v)
        rows.append(v)
        values.append(lam)
    if len(rows) < d:
        warnings.warn(
            f"training data spans only {len(rows) - 1} of {d - 1} AC directions; "
            "completing the AC basis deterministically",
            DegenerateACWarning,
            stacklevel=3,
        )
        rows = _complete_ac_basis(rows, d)
        values.extend([0.0] * (d - len(values) - 1))
    matrix = np.vstack(rows)
    dc_energy = float(dc @ acc.second_moment() @ dc)
    return SaabStage(
        dc_mean=float(dc @ acc.mean),
        matrix=matrix,
        bias=bias_select([max_norm], margin),
        eigenvalues=np.array(values, dtype=np.float64),
        dc_energy=dc_energy,
        max_norm=float(max_norm),
        sample_count=acc.count,
    )


def saab_fit_stage(samples, margin: float = BIAS_MARGIN) -> SaabStage:
    """Fit one Saab stage on a (count, d) array of input vectors."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2:
        raise RejectedInputError(f"expected (count, d) samples, got shape {x.shape}")
    if x.shape[0] < x.shape[1]:
        raise UnderdeterminedError(
            f"Saab stage of size {x.shape[1]} needs at least {x.shape[1]} samples, got {x.shape[0]}"
        )
    acc = CovarianceAccumulator.from_samples(x)
    max_norm = float(np.max(np.linalg.norm(x, axis=1)))
    return saab_stage_from_moments(acc, max_norm, margin)


# --------------------------------------------------------------------------
# Cuboid regrouping between stages


def to_grid(blocks: np.ndarray, n: int) -> np.ndarray:
    """(B, n*n) blocks -> (B, n, n, 1) position grid with one channel."""
    return blocks.reshape(-1, n, n, 1)


def group_cuboids(grid: np.ndarray, s: int) -> np.ndarray:
    """Regroup an (B, G, G, C) grid into (B, G/s, G/s, s*s*C) cuboid vectors.

    Inside each cuboid vector, positions of the ``s x s`` window run in
    row-major order and each position's ``C`` channels are contiguous.
    """
    b, g, _, c = grid.shape
    h = g // s
    return (
        grid.reshape(b, h, s, h, s, c)
        .transpose(0, 1, 3, 2, 4, 5)
        .reshape(b, h, h, s * s * c)
    )


def stage_inputs(blocks: np.ndarray, n: int, plan, stages, upto: int) -> np.ndarray:
    """Biased input vectors seen by stage ``upto`` (0-based), shape (B, G, G, d)."""
    grid = to_grid(as_blocks(blocks, n), n)
    for s, st in zip(plan[:upto], stages[:upto]):
        grid = st.apply(group_cuboids(grid, s))
    return group_cuboids(grid, plan[upto])


def run_stages(blocks: np.ndarray, n: int, plan, stages, with_bias: bool = True) -> np.ndarray:
    """Push (B, n*n) blocks through fitted stages; returns (B, n*n) outputs."""
    grid = to_grid(blocks, n)
    for s, st in zip(plan, stages):
        cub = group_cuboids(grid, s)
        grid = cub @ st.matrix.T
        if with_bias:
            grid = grid + st.bias
    return grid.reshape(blocks.shape[0], n * n)


def compose_stages(n: int, plan, stages) -> tuple:
    """Flatten fitted stages into one affine map (matrix, bias)."""
    dim = n * n
    matrix = run_stages(np.eye(dim), n, plan, stages, with_bias=False).T
    bias = run_stages(np.zeros((1, dim)), n, plan, stages, with_bias=True)[0]
    return matrix, bias


def saab_fit_multistage(
    blocks,
    plan,
    n: int | None = None,
    margin: float = BIAS_MARGIN,
    source: str = "",
) -> AffineOrthoKernel:
    """Fit a one- or multi-stage Saab transform and flatten it to one kernel.

    Stage ``i`` is fitted on every non-overlapping cuboid of the previous
    stage's biased outputs (raw ``s x s`` subblocks for the first stage).
    """
    x = as_blocks(blocks)
    if n is None:
        n = _side_from_dim(x.shape[1])
    x = as_blocks(x, n)
    plan = validate_plan(n, plan)
    if x.shape[0] < n * n:
        raise UnderdeterminedError(f"need at least {n * n} blocks, got {x.shape[0]}")
    stages = []
    grid = to_grid(x, n)
    for s in plan:
        cub = group_cuboids(grid, s)
        vecs = cub.reshape(-1, cub.shape[-1])
        st = saab_fit_stage(vecs, margin)
        stages.append(st)
        grid = st.apply(cub)
    return kernel_from_stages(n, plan, stages, x, source=source)


def kernel_from_stages(n, plan, stages, blocks=None, source: str = "") -> AffineOrthoKernel:
    """Compose fitted stages into an :class:`AffineOrthoKernel`.

    Row-0 energy is measured on ``blocks`` when given, otherwise derived
    from the last stage's DC statistics with the upstream bias removed.
    """
    matrix, bias = compose_stages(n, plan, stages)
    energies = np.empty(n * n)
    energies[1:] = stages[-1].eigenvalues
    if blocks is not None:
        energies[0] = float(np.mean((blocks @ matrix[0]) ** 2))
    else:
        last = stages[-1]
        upstream = bias[0] - last.bias
        energies[0] = max(last.dc_energy - 2.0 * upstream * last.dc_mean + upstream**2, 0.0)
    return AffineOrthoKernel(
        n=n,
        kind=SAAB,
        plan=tuple(plan),
        matrix=matrix,
        bias=bias,
        energies=energies,
        sample_count=stages[0].sample_count // ((n // plan[0]) ** 2),
        source=source,
        stage_biases=tuple(st.bias for st in stages),
    )


# --------------------------------------------------------------------------
# Applying kernels


def _check_kernel_input(k, x):
    single = np.ndim(x) == 1
    return single, as_blocks(x, k.n)


def forward(k: AffineOrthoKernel, x) -> np.ndarray:
    single, xb = _check_kernel_input(k, x)
    y = xb @ k.matrix.T + k.bias
    return y[0] if single else y


def coefficients_biasfree(k: AffineOrthoKernel, x) -> np.ndarray:
    single, xb = _check_kernel_input(k, x)
    y = xb @ k.matrix.T
    return y[0] if single else y


def inverse(k: AffineOrthoKernel, y) -> np.ndarray:
    single = np.ndim(y) == 1
    yb = np.asarray(y, dtype=np.float64)
    yb = yb[None, :] if single else yb
    if yb.ndim != 2 or yb.shape[1] != k.dim:
        raise RejectedInputError(f"expected coefficient vectors of length {k.dim}, got shape {yb.shape}")
    x = (yb - k.bias) @ k.matrix
    return x[0] if single else x


def orthonormality_error(matrix) -> float:
    m = np.asarray(matrix, dtype=np.float64)
    return float(np.linalg.norm(m @ m.T - np.eye(m.shape[0])))
