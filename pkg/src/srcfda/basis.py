"""Spline bases: clamped B-splines for mean curves, cubic Hermite splines for warps.

The B-spline basis is clamped at 0 and 1 so that it spans constants and its
rows form a partition of unity on [0, 1].  Warp anchor splines come in two
kinds: plain cubic Hermite with three-point finite-difference tangents
(linear in the anchor values, used when fitting), and a Hyman-filtered
variant whose composite map t + s(t) stays monotone for monotone composite
anchor data (used when generating data).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline as _ScipyBSpline


class BasisConfigError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BSplineBasis:
    """Clamped B-spline basis on [0, 1] with equally spaced or custom interior knots."""

    interior_knots: np.ndarray
    degree: int = 3

    def __post_init__(self):
        knots = np.asarray(self.interior_knots, dtype=float)
        object.__setattr__(self, "interior_knots", knots)
        if self.degree < 0:
            raise BasisConfigError("degree must be >= 0")
        if knots.ndim != 1:
            raise BasisConfigError("interior knots must be a 1-d sequence")
        if knots.size and (np.any(np.diff(knots) <= 0) or knots[0] <= 0 or knots[-1] >= 1):
            raise BasisConfigError("interior knots must be strictly increasing inside (0, 1)")
        # q = interior + degree + 1 basis functions; need at least degree+1 in total
        if self.q < self.degree + 1:
            raise BasisConfigError("too few knots for the requested degree")

    @classmethod
    def uniform(cls, n_interior: int = 8, degree: int = 3) -> "BSplineBasis":
        interior = np.linspace(0.0, 1.0, n_interior + 2)[1:-1]
        return cls(interior_knots=interior, degree=degree)

    @property
    def q(self) -> int:
        return self.interior_knots.size + self.degree + 1

    @property
    def knots(self) -> np.ndarray:
        """Full knot vector with (degree+1)-fold boundary knots at 0 and 1."""
        p = self.degree
        return np.concatenate([np.zeros(p + 1), self.interior_knots, np.ones(p + 1)])


def design_matrix(basis: BSplineBasis, times: np.ndarray) -> np.ndarray:
    """Evaluate all basis functions at `times`, clamping arguments to [0, 1].

    Returns an (n, q) dense matrix whose rows sum to 1.
    """
    t = np.clip(np.asarray(times, dtype=float), 0.0, 1.0)
    mat = _ScipyBSpline.design_matrix(t, basis.knots, basis.degree)
    return np.asarray(mat.todense())


def deriv_design_matrix(basis: BSplineBasis, times: np.ndarray) -> np.ndarray:
    """First-derivative design matrix d/dt of every basis function at `times`.

    Uses the lower-degree recurrence; arguments outside [0, 1] are clamped,
    where the derivative of the clamped evaluation is reported as 0.
    """
    t_raw = np.asarray(times, dtype=float)
    t = np.clip(t_raw, 0.0, 1.0)
    p = basis.degree
    q = basis.q
    if p == 0:
        return np.zeros((t.size, q))
    knots = basis.knots
    lower = _ScipyBSpline.design_matrix(t, knots, p - 1)
    lower = np.asarray(lower.todense())  # (n, q+1)
    out = np.zeros((t.size, q))
    for l in range(q):
        left = knots[l + p] - knots[l]
        right = knots[l + p + 1] - knots[l + 1]
        col = np.zeros(t.size)
        if left > 0:
            col += lower[:, l] / left
        if right > 0:
            col -= lower[:, l + 1] / right
        out[:, l] = p * col
    out[(t_raw < 0.0) | (t_raw > 1.0)] = 0.0
    return out


def _three_point_tangents(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Centred finite-difference tangents, one-sided at the ends (linear in y)."""
    m = np.empty_like(y, dtype=float)
    m[1:-1] = (y[2:] - y[:-2]) / (x[2:] - x[:-2])
    m[0] = (y[1] - y[0]) / (x[1] - x[0])
    m[-1] = (y[-1] - y[-2]) / (x[-1] - x[-2])
    return m


def _hyman_filter(x: np.ndarray, y: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Constrain Hermite tangents so the interpolant preserves local monotonicity."""
    d = np.diff(y) / np.diff(x)
    m = m.copy()
    n = y.size
    for j in range(n):
        lo = d[j - 1] if j > 0 else d[0]
        hi = d[j] if j < n - 1 else d[-1]
        if lo >= 0 and hi >= 0:
            m[j] = min(max(m[j], 0.0), 3.0 * min(lo, hi))
        elif lo <= 0 and hi <= 0:
            m[j] = max(min(m[j], 0.0), 3.0 * max(lo, hi))
        else:
            # slope sign change at an extremum: flat tangent
            m[j] = 0.0
    return m


@dataclass(frozen=True, eq=False)
class AnchorSpline:
    """Cubic Hermite interpolant through (anchor, value) pairs.

    kind="hermite": three-point tangents, evaluation is linear in `values`.
    kind="hyman": tangents of the composite t + s(t) are Hyman-filtered, so the
    composite stays monotone whenever the composite anchor data is monotone.
    """

    anchors: np.ndarray
    values: np.ndarray
    kind: str = "hermite"

    def __post_init__(self):
        a = np.asarray(self.anchors, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "anchors", a)
        object.__setattr__(self, "values", v)
        if a.ndim != 1 or v.shape != a.shape:
            raise BasisConfigError("anchors and values must be 1-d and the same length")
        if a.size < 2 or np.any(np.diff(a) <= 0):
            raise BasisConfigError("anchors must be strictly increasing (at least 2)")
        if self.kind not in ("hermite", "hyman"):
            raise BasisConfigError(f"unknown spline kind {self.kind!r}")


def _hermite_eval(x: np.ndarray, y: np.ndarray, m: np.ndarray, t: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(x, t, side="right") - 1
    idx = np.clip(idx, 0, x.size - 2)
    h = x[idx + 1] - x[idx]
    u = (t - x[idx]) / h
    u2 = u * u
    u3 = u2 * u
    h00 = 2 * u3 - 3 * u2 + 1
    h10 = u3 - 2 * u2 + u
    h01 = -2 * u3 + 3 * u2
    h11 = u3 - u2
    return h00 * y[idx] + h10 * h * m[idx] + h01 * y[idx + 1] + h11 * h * m[idx + 1]


def eval_spline(s: AnchorSpline, times: np.ndarray) -> np.ndarray:
    """Evaluate the anchor spline at `times`."""
    t = np.asarray(times, dtype=float)
    if s.kind == "hermite":
        m = _three_point_tangents(s.anchors, s.values)
        return _hermite_eval(s.anchors, s.values, m, t)
    # hyman: interpolate the composite map and subtract the identity back out
    comp = s.anchors + s.values
    m = _three_point_tangents(s.anchors, comp)
    m = _hyman_filter(s.anchors, comp, m)
    return _hermite_eval(s.anchors, comp, m, t) - t


def hermite_cardinal_matrix(anchors: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Matrix Phi with eval_spline(values, times) == Phi @ values for the hermite kind.

    Exists because the hermite construction is linear in the anchor values;
    column l is the interpolant of the l-th unit vector.
    """
    anchors = np.asarray(anchors, dtype=float)
    t = np.asarray(times, dtype=float)
    cols = []
    for l in range(anchors.size):
        e = np.zeros(anchors.size)
        e[l] = 1.0
        m = _three_point_tangents(anchors, e)
        cols.append(_hermite_eval(anchors, e, m, t))
    return np.stack(cols, axis=1)
