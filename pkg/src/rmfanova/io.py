"""Reading and writing long-format curve files.

Input is delimited text (comma, or tab when the header contains one) with the
header ``subject,group,treatment,t,value`` and one row per observation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .basis import BSplineBasis, SampledCurve, build_basis, fit_curves, gcv_select
from .design import RMDataset
from .errors import BalanceError, ParseError

__all__ = ["CurveCollection", "ingest", "parse_curves", "smooth_collection", "write_curves"]

COLUMNS = ("subject", "group", "treatment", "t", "value")


@dataclass
class CurveCollection:
    """Curves keyed by ``(subject, treatment)`` plus the balanced layout.

    ``subjects`` is ordered by group, then by first appearance.
    """

    curves: dict[tuple[str, str], SampledCurve]
    subjects: list[str]
    subject_group: dict[str, str]
    groups: list[str]
    treatments: list[str]

    @property
    def group_sizes(self) -> tuple[int, ...]:
        return tuple(sum(1 for s in self.subjects if self.subject_group[s] == g)
                     for g in self.groups)

    @property
    def domain(self) -> tuple[float, float]:
        lo = min(c.grid[0] for c in self.curves.values())
        hi = max(c.grid[-1] for c in self.curves.values())
        return float(lo), float(hi)


def parse_curves(lines: Sequence[str], source: str = "<input>") -> CurveCollection:
    lines = list(lines)
    if not lines or not lines[0].strip():
        raise ParseError(f"{source}: line 1: empty file or missing header")
    delim = "\t" if "\t" in lines[0] else ","
    reader = csv.reader(lines, delimiter=delim)
    header = [h.strip().lower() for h in next(reader)]
    if header[:5] != list(COLUMNS) or len(header) != 5:
        raise ParseError(f"{source}: line 1: header must be {','.join(COLUMNS)}, got {header}")

    points: dict[tuple[str, str], dict[float, float]] = {}
    subject_group: dict[str, str] = {}
    groups: list[str] = []
    treatments: list[str] = []
    order: list[str] = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 5:
            raise ParseError(f"{source}: line {lineno}: expected 5 fields, got {len(row)}")
        subj, grp, trt = (c.strip() for c in row[:3])
        try:
            t, val = float(row[3]), float(row[4])
        except ValueError:
            raise ParseError(f"{source}: line {lineno}: non-numeric t/value {row[3:5]}") from None
        if not (np.isfinite(t) and np.isfinite(val)):
            raise ParseError(f"{source}: line {lineno}: non-finite t/value {row[3:5]}")
        if subj not in subject_group:
            subject_group[subj] = grp
            order.append(subj)
        elif subject_group[subj] != grp:
            raise ParseError(f"{source}: line {lineno}: subject {subj!r} appears in groups "
                             f"{subject_group[subj]!r} and {grp!r}")
        if grp not in groups:
            groups.append(grp)
        if trt not in treatments:
            treatments.append(trt)
        cell = points.setdefault((subj, trt), {})
        if t in cell:
            raise ParseError(f"{source}: line {lineno}: duplicate t={t} for subject {subj!r}, "
                             f"treatment {trt!r}")
        cell[t] = val
    if not points:
        raise ParseError(f"{source}: no data rows")

    missing = {s: [t for t in treatments if (s, t) not in points] for s in order}
    missing = {s: ts for s, ts in missing.items() if ts}
    if missing:
        detail = "; ".join(f"{s} missing {', '.join(ts)}" for s, ts in missing.items())
        raise BalanceError(f"{source}: unbalanced design: {detail}")

    curves = {}
    for key, cell in points.items():
        ts = np.array(sorted(cell))
        curves[key] = SampledCurve(ts, np.array([cell[t] for t in ts]))
    subjects = [s for g in groups for s in order if subject_group[s] == g]
    return CurveCollection(curves, subjects, subject_group, groups, treatments)


def ingest(path) -> CurveCollection:
    """Read a curve file; see :func:`parse_curves` for the checks applied."""
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_curves(fh.read().splitlines(), str(path))


def smooth_collection(coll: CurveCollection, basis: BSplineBasis) -> RMDataset:
    """Fit every curve on `basis` and assemble the repeated-measures dataset."""
    n, m = len(coll.subjects), len(coll.treatments)
    coefs = np.empty((n, m, basis.dimension))
    by_grid: dict[bytes, list[tuple[int, int]]] = {}
    for k, s in enumerate(coll.subjects):
        for i, t in enumerate(coll.treatments):
            by_grid.setdefault(coll.curves[(s, t)].grid.tobytes(), []).append((k, i))
    for cells in by_grid.values():
        k0, i0 = cells[0]
        grid = coll.curves[(coll.subjects[k0], coll.treatments[i0])].grid
        vals = np.column_stack([coll.curves[(coll.subjects[k], coll.treatments[i])].values
                                for k, i in cells])
        fitted = fit_curves(basis, grid, vals)
        for col, (k, i) in enumerate(cells):
            coefs[k, i] = fitted[:, col]
    return RMDataset(coefs, coll.group_sizes, subject_ids=tuple(coll.subjects),
                     group_labels=tuple(coll.groups), treatment_labels=tuple(coll.treatments))


def choose_basis(coll: CurveCollection, dimension: int | None = None,
                 candidates: Sequence[int] | None = None, order: int = 4) -> BSplineBasis:
    """Basis over the pooled observation range, fixed-size or chosen by GCV."""
    domain = coll.domain
    if dimension is None:
        if not candidates:
            rmin = min(c.grid.size for c in coll.curves.values())
            candidates = range(order + 2, max(order + 3, min(40, rmin - 2)))
        dimension = gcv_select(domain, candidates, list(coll.curves.values()), order)
    return build_basis(domain, dimension, order)


def write_curves(path, dataset: RMDataset, basis: BSplineBasis, grid) -> None:
    """Export `dataset` as curve records sampled on `grid`."""
    grid = np.asarray(grid, dtype=float)
    phi = basis.evaluate(grid)
    subjects = dataset.subject_ids or tuple(f"s{k + 1}" for k in range(dataset.n))
    groups = dataset.group_labels or tuple(f"g{j + 1}" for j in range(dataset.g))
    treatments = dataset.treatment_labels or tuple(f"t{i + 1}" for i in range(dataset.m))
    gi = dataset.group_index
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for k in range(dataset.n):
            for i in range(dataset.m):
                vals = phi @ dataset.coefficients[k, i]
                for t, v in zip(grid, vals):
                    w.writerow([subjects[k], groups[gi[k]], treatments[i], repr(float(t)),
                                repr(float(v))])
