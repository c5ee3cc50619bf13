"""Data containers, CSV I/O and Procrustes preprocessing for multi-dimensional curves.

File formats (UTF-8, '.' decimal separator):
  curves CSV  (long): curve_id,dim,t,value
  scalars CSV       : curve_id,v1,...,vp
  labels CSV        : curve_id,label

All constructed objects are immutable; operations are pure functions.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class FormatError(ValueError):
    """Malformed input file (missing columns, non-numeric fields, duplicates)."""


class ValidationError(ValueError):
    """Structurally valid input that violates a dataset invariant."""


@dataclass(frozen=True, eq=False)
class TimeGrid:
    points: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", p)
        if p.ndim != 1 or p.size < 2:
            raise ValidationError("time grid needs at least two points")
        if np.any(np.diff(p) <= 0):
            raise ValidationError("time grid must be strictly increasing")
        if p[0] < 0.0 or p[-1] > 1.0:
            raise ValidationError("time grid must lie inside [0, 1]")

    @property
    def n(self) -> int:
        return self.points.size


@dataclass(frozen=True, eq=False)
class Curve:
    id: str
    grid: TimeGrid
    values: np.ndarray  # (A, n)

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        object.__setattr__(self, "values", v)
        if v.shape[1] != self.grid.n:
            raise ValidationError(f"curve {self.id!r}: {v.shape[1]} values vs {self.grid.n} grid points")
        if v.shape[0] not in (1, 2, 3):
            raise ValidationError(f"curve {self.id!r}: spatial dimension must be 1, 2 or 3")
        if not np.all(np.isfinite(v)):
            raise ValidationError(f"curve {self.id!r}: non-finite values")

    @property
    def dimension(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class FunctionalDataset:
    curves: tuple
    dimension: int
    labels: tuple | None = None  # per-curve integer labels, aligned with curves

    def __post_init__(self):
        curves = tuple(self.curves)
        object.__setattr__(self, "curves", curves)
        if not curves:
            raise ValidationError("dataset has no curves; dimension undefined")
        ids = [c.id for c in curves]
        if len(set(ids)) != len(ids):
            raise ValidationError("curve ids must be unique")
        dims = {c.dimension for c in curves}
        if dims != {self.dimension}:
            raise ValidationError(f"curves have dimensions {sorted(dims)}, expected {{{self.dimension}}}")
        if self.labels is not None:
            labels = tuple(int(l) for l in self.labels)
            object.__setattr__(self, "labels", labels)
            if len(labels) != len(curves):
                raise ValidationError("one label per curve required")
            if min(labels) < 1:
                raise ValidationError("labels must be positive integers 1..K")

    def __len__(self) -> int:
        return len(self.curves)

    @property
    def ids(self) -> tuple:
        return tuple(c.id for c in self.curves)

    def common_grid(self) -> np.ndarray | None:
        """The shared grid if every curve uses the same one, else None."""
        g0 = self.curves[0].grid.points
        for c in self.curves[1:]:
            if c.grid.n != g0.size or not np.array_equal(c.grid.points, g0):
                return None
        return g0


@dataclass(frozen=True, eq=False)
class ScalarCovariates:
    ids: tuple
    values: np.ndarray  # (N, p), first column identically 1
    names: tuple

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "names", tuple(self.names))
        if v.ndim != 2 or v.shape[0] != len(self.ids) or v.shape[1] != len(self.names):
            raise ValidationError("covariate matrix does not match ids/names")
        if len(set(self.ids)) != len(self.ids):
            raise ValidationError("duplicate curve_id in scalar covariates")
        if not np.all(v[:, 0] == 1.0):
            raise ValidationError("first covariate column must be the intercept (all ones)")
        if not np.all(np.isfinite(v)):
            raise ValidationError("non-finite covariate values")

    @property
    def p(self) -> int:
        return self.values.shape[1]


def intercept_only(ids) -> ScalarCovariates:
    ids = tuple(ids)
    return ScalarCovariates(ids=ids, values=np.ones((len(ids), 1)), names=("intercept",))


def _parse_float(text: str, what: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise FormatError(f"non-numeric {what}: {text!r}") from None


def load_curves(path) -> FunctionalDataset:
    """Read a long-format curves CSV and assemble a validated dataset.

    Rows are grouped by curve_id and sorted by t within each (curve, dim).
    Every dim of a curve must be observed on the same time grid.  If the grids
    do not already lie inside [0, 1] they are mapped there by one global
    affine transformation (so relative timing across curves is preserved).
    """
    path = Path(path)
    per_curve: dict[str, dict[int, list]] = {}
    order: list[str] = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        required = {"curve_id", "dim", "t", "value"}
        if not required.issubset(header):
            raise FormatError(f"curves file must have columns {sorted(required)}, got {header}")
        for row in reader:
            cid = row["curve_id"]
            dim = int(_parse_float(row["dim"], "dim"))
            t = _parse_float(row["t"], "t")
            val = _parse_float(row["value"], "value")
            if cid not in per_curve:
                per_curve[cid] = {}
                order.append(cid)
            per_curve[cid].setdefault(dim, []).append((t, val))
    if not per_curve:
        raise ValidationError(f"{path}: no curves found; dimension undefined")

    dims_seen = {frozenset(d.keys()) for d in per_curve.values()}
    if len(dims_seen) != 1:
        raise ValidationError("ragged dimensions: not all curves observed in the same dims")
    dims = sorted(next(iter(dims_seen)))
    if dims != list(range(1, len(dims) + 1)):
        raise ValidationError(f"dims must be 1..A, got {dims}")

    # global affine time map to [0,1] when needed
    all_t = np.array([t for d in per_curve.values() for rows in d.values() for t, _ in rows])
    t_lo, t_hi = all_t.min(), all_t.max()
    if t_lo < 0.0 or t_hi > 1.0:
        if t_hi == t_lo:
            raise ValidationError("all time stamps identical; cannot normalize")
        remap = lambda t: (t - t_lo) / (t_hi - t_lo)
    else:
        remap = lambda t: t

    curves = []
    for cid in order:
        grids = []
        rows_by_dim = []
        for dim in dims:
            rows = sorted(per_curve[cid][dim])
            ts = np.array([t for t, _ in rows])
            if np.any(np.diff(ts) <= 0):
                raise ValidationError(f"curve {cid!r} dim {dim}: duplicate or non-monotone t")
            grids.append(ts)
            rows_by_dim.append(np.array([v for _, v in rows]))
        for other in grids[1:]:
            if other.size != grids[0].size or not np.allclose(other, grids[0]):
                raise ValidationError(f"curve {cid!r}: dims observed on different time grids")
        grid = TimeGrid(remap(grids[0]))
        curves.append(Curve(id=cid, grid=grid, values=np.vstack(rows_by_dim)))
    return FunctionalDataset(curves=tuple(curves), dimension=len(dims))


def save_curves(dataset: FunctionalDataset, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["curve_id", "dim", "t", "value"])
        for c in dataset.curves:
            for a in range(c.dimension):
                for t, v in zip(c.grid.points, c.values[a]):
                    w.writerow([c.id, a + 1, repr(float(t)), repr(float(v))])


def load_scalars(path) -> ScalarCovariates:
    """Read a scalars CSV and prepend the intercept column."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "curve_id":
            raise FormatError("scalars file must start with a curve_id column")
        names = header[1:]
        ids, rows = [], []
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise FormatError(f"scalars row for {row[0]!r} has {len(row)} fields, expected {len(header)}")
            ids.append(row[0])
            rows.append([_parse_float(x, f"covariate {n}") for n, x in zip(names, row[1:])])
    if len(set(ids)) != len(ids):
        raise FormatError("duplicate curve_id in scalars file")
    vals = np.array(rows, dtype=float) if rows else np.zeros((0, len(names)))
    for j, name in enumerate(names):
        if vals.shape[0] > 1 and np.ptp(vals[:, j]) == 0.0:
            warnings.warn(f"covariate {name!r} has zero variance", stacklevel=2)
    full = np.column_stack([np.ones(len(ids)), vals]) if ids else np.zeros((0, len(names) + 1))
    return ScalarCovariates(ids=tuple(ids), values=full, names=("intercept", *names))


def save_scalars(scalars: ScalarCovariates, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["curve_id", *scalars.names[1:]])
        for cid, row in zip(scalars.ids, scalars.values):
            w.writerow([cid, *[repr(float(x)) for x in row[1:]]])


def load_labels(path) -> dict:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or not {"curve_id", "label"}.issubset(reader.fieldnames):
            raise FormatError("labels file must have columns curve_id,label")
        out = {}
        for row in reader:
            cid = row["curve_id"]
            if cid in out:
                raise FormatError(f"duplicate curve_id {cid!r} in labels file")
            out[cid] = int(_parse_float(row["label"], "label"))
    return out


def save_labels(ids, labels, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["curve_id", "label"])
        for cid, lab in zip(ids, labels):
            w.writerow([cid, int(lab)])


def attach_labels(dataset: FunctionalDataset, labels: dict) -> FunctionalDataset:
    missing = [cid for cid in dataset.ids if cid not in labels]
    if missing:
        raise ValidationError(f"labels missing for curves {missing[:5]}")
    return FunctionalDataset(
        curves=dataset.curves,
        dimension=dataset.dimension,
        labels=tuple(labels[cid] for cid in dataset.ids),
    )


def join_scalars(dataset: FunctionalDataset, scalars: ScalarCovariates) -> ScalarCovariates:
    """Reorder covariate rows to match the dataset's curve order."""
    index = {cid: i for i, cid in enumerate(scalars.ids)}
    missing = [cid for cid in dataset.ids if cid not in index]
    if missing:
        raise ValidationError(f"scalar covariates missing for curves {missing[:5]}")
    rows = np.array([scalars.values[index[cid]] for cid in dataset.ids])
    return ScalarCovariates(ids=dataset.ids, values=rows, names=scalars.names)


# ---------------------------------------------------------------------------
# Generalized Procrustes alignment

@dataclass(frozen=True)
class GpaConfig:
    max_iter: int = 100
    tol: float = 1e-10


def _resample_common(dataset: FunctionalDataset) -> list[np.ndarray]:
    """Linearly resample all curves onto a uniform union-range grid of median length."""
    grid = dataset.common_grid()
    if grid is not None:
        return [c.values for c in dataset.curves]
    lo = min(c.grid.points[0] for c in dataset.curves)
    hi = max(c.grid.points[-1] for c in dataset.curves)
    n = int(np.median([c.grid.n for c in dataset.curves]))
    t = np.linspace(lo, hi, n)
    out = []
    for c in dataset.curves:
        out.append(np.vstack([np.interp(t, c.grid.points, c.values[a]) for a in range(c.dimension)]))
    return out


def _rotation_to(target: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Rotation R (det +1) minimizing ||R points - target||_F for column configurations."""
    u, _, vt = np.linalg.svd(target @ points.T)
    r = u @ vt
    if np.linalg.det(r) < 0:
        u[:, -1] *= -1
        r = u @ vt
    return r


def gpa_align(dataset: FunctionalDataset, cfg: GpaConfig = GpaConfig()) -> FunctionalDataset:
    """Remove translation, scale and rotation by iterative Procrustes alignment.

    Each output curve is centred at the origin, scaled to unit centroid size
    and rotated towards the iteratively updated consensus; the summed squared
    distance to the consensus is non-increasing over iterations.
    """
    if dataset.dimension < 2:
        raise ValidationError("Procrustes alignment needs spatial dimension >= 2")
    confs = []
    for c, vals in zip(dataset.curves, _resample_common(dataset)):
        centred = vals - vals.mean(axis=1, keepdims=True)
        size = np.linalg.norm(centred)
        if size < 1e-12:
            raise ValidationError(f"curve {c.id!r} is degenerate (all points identical)")
        confs.append(centred / size)

    rotations = [np.eye(dataset.dimension) for _ in confs]
    consensus = np.mean(confs, axis=0)
    prev_obj = np.inf
    for _ in range(cfg.max_iter):
        rotations = [_rotation_to(consensus, p) for p in confs]
        aligned = [r @ p for r, p in zip(rotations, confs)]
        consensus = np.mean(aligned, axis=0)
        obj = float(sum(np.linalg.norm(a - consensus) ** 2 for a in aligned))
        if prev_obj - obj < cfg.tol * max(1.0, abs(prev_obj)):
            break
        prev_obj = obj

    out = []
    for c, r in zip(dataset.curves, rotations):
        centred = c.values - c.values.mean(axis=1, keepdims=True)
        size = np.linalg.norm(centred)
        if size < 1e-12:
            raise ValidationError(f"curve {c.id!r} is degenerate (all points identical)")
        vals = r @ (centred / size)
        # exact re-normalization on the native grid
        vals = vals - vals.mean(axis=1, keepdims=True)
        vals = vals / np.linalg.norm(vals)
        out.append(Curve(id=c.id, grid=c.grid, values=vals))
    return FunctionalDataset(curves=tuple(out), dimension=dataset.dimension, labels=dataset.labels)
