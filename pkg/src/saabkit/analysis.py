"""Energy-compaction measurements: DC/AC/total tables and cumulative AC curves.

Energies are the mean, over a block set, of squared bias-free coefficients.
The cumulative AC curve ``E_K`` is the percentage of total AC energy held
by the first ``K`` AC coefficients under a chosen ordering; it is formed
from block-averaged energies (curve of the mean, not mean of curves).
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DegenerateDataError, InvalidStrategyError, RejectedInputError
from .residuals import ResidualBlockSet
from .transforms import (
    DCT,
    KLT,
    AffineOrthoKernel,
    KltKernel,
    as_blocks,
    coefficients_biasfree,
    klt_coefficients,
)


class Ordering(str, Enum):
    NATIVE = "native"
    MEAN_ENERGY_DESC = "energy"
    ZIGZAG = "zigzag"


@dataclass(frozen=True)
class EnergyReport:
    transform: str
    n: int
    per_index_mean_energy: np.ndarray
    block_count: int

    @property
    def dc_energy(self) -> float:
        return float(self.per_index_mean_energy[0])

    @property
    def ac_energy(self) -> float:
        return float(np.sum(self.per_index_mean_energy[1:]))

    @property
    def total_energy(self) -> float:
        return float(np.sum(self.per_index_mean_energy))


@dataclass(frozen=True)
class CompactionCurve:
    transform: str
    ordering: str
    values: np.ndarray  # E_K in percent for K = 1 .. n*n - 1

    @property
    def n(self) -> int:
        return int(round(np.sqrt(len(self.values) + 1)))

    def __eq__(self, other):
        if not isinstance(other, CompactionCurve):
            return NotImplemented
        return (
            self.transform == other.transform
            and self.ordering == other.ordering
            and np.array_equal(self.values, other.values)
        )


def _blocks_of(blocks) -> np.ndarray:
    if isinstance(blocks, ResidualBlockSet):
        return blocks.blocks
    return as_blocks(blocks)


def coefficients(kernel, blocks) -> np.ndarray:
    """Bias-free coefficients for any kernel type, shape (B, n*n)."""
    x = _blocks_of(blocks)
    if x.shape[1] != kernel.dim:
        raise RejectedInputError(f"kernel is {kernel.n}x{kernel.n}, blocks have length {x.shape[1]}")
    if isinstance(kernel, KltKernel):
        return klt_coefficients(kernel, x)
    return coefficients_biasfree(kernel, x)


def energy_table(kernel, blocks) -> EnergyReport:
    c = coefficients(kernel, blocks)
    if c.shape[0] == 0:
        raise DegenerateDataError("empty block set")
    return EnergyReport(
        transform=kernel.label,
        n=kernel.n,
        per_index_mean_energy=np.mean(c * c, axis=0),
        block_count=c.shape[0],
    )


def zigzag_order(n: int) -> tuple:
    """Lexicographic indices ``p*n + q`` of the diagonal (zigzag) scan."""
    out = []
    for s in range(2 * n - 1):
        ps = range(max(0, s - n + 1), min(s, n - 1) + 1)
        if s % 2 == 0:
            ps = reversed(ps)
        out.extend(p * n + (s - p) for p in ps)
    return tuple(out)


def _coerce_ordering(strategy) -> Ordering:
    if isinstance(strategy, Ordering):
        return strategy
    key = str(strategy).lower()
    aliases = {"mean_energy_desc": Ordering.MEAN_ENERGY_DESC}
    try:
        return aliases.get(key) or Ordering(key)
    except ValueError:
        raise InvalidStrategyError(f"unknown ordering strategy {strategy!r}") from None


def order_from_energies(energies) -> tuple:
    """AC indices sorted by descending energy, ties to the lower index."""
    e = np.asarray(energies, dtype=np.float64)[1:]
    return tuple(int(i) + 1 for i in np.argsort(-e, kind="stable"))


def order_coeffs(kernel, blocks=None, strategy=Ordering.MEAN_ENERGY_DESC, report=None) -> tuple:
    """Permutation of AC indices ``1 .. n*n - 1`` under ``strategy``.

    ``MEAN_ENERGY_DESC`` measures energies on ``blocks`` (or uses a
    precomputed ``report``).
    """
    strategy = _coerce_ordering(strategy)
    dim = kernel.dim
    if strategy is Ordering.NATIVE:
        return tuple(range(1, dim))
    if strategy is Ordering.ZIGZAG:
        if kernel.kind != DCT:
            raise InvalidStrategyError("zigzag ordering only applies to DCT kernels")
        return zigzag_order(kernel.n)[1:]
    if report is None:
        if blocks is None:
            raise RejectedInputError("energy ordering needs a block set")
        report = energy_table(kernel, blocks)
    return order_from_energies(report.per_index_mean_energy)


def curve_from_report(report: EnergyReport, order, ordering_label: str) -> CompactionCurve:
    e = report.per_index_mean_energy
    order = np.asarray(order, dtype=int)
    if sorted(order.tolist()) != list(range(1, len(e))):
        raise RejectedInputError("ordering must be a permutation of the AC indices")
    total = float(np.sum(e[1:]))
    # roundoff-level AC energy (e.g. constant blocks through a DCT) counts as zero
    if not total > 1e-24 * float(np.sum(e)):
        raise DegenerateDataError("total AC energy is zero; the curve is undefined")
    values = 100.0 * np.cumsum(e[order]) / total
    return CompactionCurve(report.transform, ordering_label, values)


def cumulative_ac_curve(kernel, blocks, ordering=Ordering.MEAN_ENERGY_DESC) -> CompactionCurve:
    ordering = _coerce_ordering(ordering)
    report = energy_table(kernel, blocks)
    order = order_coeffs(kernel, strategy=ordering, report=report)
    return curve_from_report(report, order, ordering.value)


# --------------------------------------------------------------------------
# Comparison documents

CURVE_HEADER = ("transform", "ordering", "K", "E_K_percent")
TABLE_HEADER = ("transform", "index_class", "energy")
INDEX_CLASSES = ("DC", "AC", "TOTAL")


def fmt(v: float) -> str:
    return format(float(v), ".12g")


def transform_sort_key(label: str):
    """DCT, KLT, one-stage Saab, then multi-stage Saab variants."""
    if label == "DCT":
        return (0, 0, label)
    if label == KLT:
        return (1, 0, label)
    if label.startswith("SAAB["):
        stages = label[5:-1].count(",") + 1
        return (2 if stages == 1 else 3, stages, label)
    return (4, 0, label)


def curves_to_csv(curves) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_HEADER)
    for c in curves:
        for k, v in enumerate(c.values, start=1):
            w.writerow((c.transform, c.ordering, k, fmt(v)))
    return buf.getvalue()


def parse_curves_csv(text: str) -> list:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CURVE_HEADER:
        raise RejectedInputError("curve CSV must start with the header " + ",".join(CURVE_HEADER))
    curves, current, values = [], None, []
    for r in rows[1:]:
        key = (r[0], r[1])
        if key != current:
            if current is not None:
                curves.append(CompactionCurve(current[0], current[1], np.array(values)))
            current, values = key, []
        if int(r[2]) != len(values) + 1:
            raise RejectedInputError(f"curve {key} has out-of-sequence K {r[2]}")
        values.append(float(r[3]))
    if current is not None:
        curves.append(CompactionCurve(current[0], current[1], np.array(values)))
    return curves


def tables_to_csv(tables) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_HEADER)
    for t in tables:
        for cls, v in zip(INDEX_CLASSES, (t.dc_energy, t.ac_energy, t.total_energy)):
            w.writerow((t.transform, cls, fmt(v)))
    return buf.getvalue()


def parse_tables_csv(text: str) -> dict:
    """``{transform: {index_class: energy}}`` from a table CSV."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != TABLE_HEADER:
        raise RejectedInputError("table CSV must start with the header " + ",".join(TABLE_HEADER))
    out: dict = {}
    for name, cls, v in rows[1:]:
        if cls not in INDEX_CLASSES:
            raise RejectedInputError(f"unknown index class {cls!r}")
        out.setdefault(name, {})[cls] = float(v)
    return out


@dataclass(frozen=True)
class Comparison:
    curves: tuple
    tables: tuple

    @property
    def transforms(self) -> list:
        return [c.transform for c in self.curves]

    def aligned_rows(self) -> list:
        """One row per K: E_K for every curve, then the max pairwise gap."""
        if not self.curves:
            return []
        m = np.vstack([c.values for c in self.curves])
        gap = m.max(axis=0) - m.min(axis=0)
        return [
            (k + 1, *m[:, k].tolist(), float(gap[k])) for k in range(m.shape[1])
        ]

    def aligned_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("K", *(f"{c.transform}|{c.ordering}" for c in self.curves), "max_gap"))
        for row in self.aligned_rows():
            w.writerow((row[0], *(fmt(v) for v in row[1:])))
        return buf.getvalue()

    def energy_summary(self) -> list:
        """Rows DC / AC / Total with one column per transform."""
        header = ("Energy", *(t.transform for t in self.tables))
        body = [
            ("DC", *(t.dc_energy for t in self.tables)),
            ("AC", *(t.ac_energy for t in self.tables)),
            ("Total", *(t.total_energy for t in self.tables)),
        ]
        return [header, *body]

    def curve_csv(self) -> str:
        return curves_to_csv(self.curves)

    def table_csv(self) -> str:
        return tables_to_csv(self.tables)


def compare_report(curves, tables=()) -> Comparison:
    curves = list(curves)
    tables = list(tables)
    sizes = {c.n for c in curves} | {t.n for t in tables}
    if len(sizes) > 1:
        raise RejectedInputError(f"cannot compare block sizes {sorted(sizes)}")
    curves.sort(key=lambda c: (transform_sort_key(c.transform), c.ordering))
    tables.sort(key=lambda t: transform_sort_key(t.transform))
    return Comparison(tuple(curves), tuple(tables))
