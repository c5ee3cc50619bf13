"""Inverse warping functions, the warped design matrix and warp Jacobians.

The inverse warp for curve i under cluster k is
    g(t) = t + s_fixed(t) + s_random(t)
where both parts are cubic Hermite anchor splines with pinned endpoints
(value 0 at the first and last anchor) and the result is clamped to [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import AnchorSpline, BSplineBasis, design_matrix, deriv_design_matrix, eval_spline
from .dataset import TimeGrid, ValidationError


@dataclass(frozen=True, eq=False)
class WarpParameters:
    """Anchor values of the fixed (per-cluster) and random (per-curve) warp parts.

    fixed has shape (K, n_v); random has shape (N, K, n_w).  Endpoint anchor
    values must be 0 in both parts.  fixed_anchors defaults to the shared
    anchor grid.
    """

    anchors: np.ndarray
    fixed: np.ndarray
    random: np.ndarray
    fixed_anchors: np.ndarray | None = None

    def __post_init__(self):
        a = np.asarray(self.anchors, dtype=float)
        f = np.asarray(self.fixed, dtype=float)
        r = np.asarray(self.random, dtype=float)
        fa = a if self.fixed_anchors is None else np.asarray(self.fixed_anchors, dtype=float)
        object.__setattr__(self, "anchors", a)
        object.__setattr__(self, "fixed", f)
        object.__setattr__(self, "random", r)
        object.__setattr__(self, "fixed_anchors", fa)
        if a.ndim != 1 or a.size < 2 or np.any(np.diff(a) <= 0):
            raise ValidationError("warp anchors must be strictly increasing")
        if a[0] != 0.0 or a[-1] != 1.0:
            raise ValidationError("warp anchors must start at 0 and end at 1")
        if f.ndim != 2 or f.shape[1] != fa.size:
            raise ValidationError("fixed warp values must be (K, n_v)")
        if r.ndim != 3 or r.shape[2] != a.size or r.shape[1] != f.shape[0]:
            raise ValidationError("random warp values must be (N, K, n_w)")
        for arr, name in ((f[:, [0, -1]], "fixed"), (r[:, :, [0, -1]], "random")):
            if arr.size and np.abs(arr).max() > 0:
                raise ValidationError(f"{name} warp endpoints must be pinned at 0")

    @property
    def n_w(self) -> int:
        return self.anchors.size

    @property
    def k(self) -> int:
        return self.fixed.shape[0]


def identity_warp(anchors, n_curves: int, n_clusters: int, fixed_anchors=None) -> WarpParameters:
    anchors = np.asarray(anchors, dtype=float)
    fa = anchors if fixed_anchors is None else np.asarray(fixed_anchors, dtype=float)
    return WarpParameters(
        anchors=anchors,
        fixed=np.zeros((n_clusters, fa.size)),
        random=np.zeros((n_curves, n_clusters, anchors.size)),
        fixed_anchors=None if fixed_anchors is None else fa,
    )


def _grid_points(grid) -> np.ndarray:
    return grid.points if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)


def eval_g(wp: WarpParameters, k: int, i: int, grid) -> np.ndarray:
    """g(t) = t + fixed spline + random spline, clamped to [0, 1]."""
    t = _grid_points(grid)
    g = t.astype(float).copy()
    g += eval_spline(AnchorSpline(wp.fixed_anchors, wp.fixed[k]), t)
    g += eval_spline(AnchorSpline(wp.anchors, wp.random[i, k]), t)
    return np.clip(g, 0.0, 1.0)


def warped_design(basis: BSplineBasis, g_values: np.ndarray) -> np.ndarray:
    """B-spline design evaluated at warped times (rows sum to 1)."""
    return design_matrix(basis, g_values)


def warp_jacobian(wp: WarpParameters, k: int, i: int, grid, step: float = 1e-6) -> np.ndarray:
    """d g / d (random anchor values) by central finite differences.

    Endpoint anchors are pinned, so their columns are identically zero.
    """
    t = _grid_points(grid)
    n_w = wp.n_w
    jac = np.zeros((t.size, n_w))
    base = wp.random[i, k]
    for l in range(1, n_w - 1):
        plus = base.copy()
        minus = base.copy()
        plus[l] += step
        minus[l] -= step
        sp = eval_spline(AnchorSpline(wp.anchors, plus), t)
        sm = eval_spline(AnchorSpline(wp.anchors, minus), t)
        fixed_part = eval_spline(AnchorSpline(wp.fixed_anchors, wp.fixed[k]), t)
        gp = np.clip(t + fixed_part + sp, 0.0, 1.0)
        gm = np.clip(t + fixed_part + sm, 0.0, 1.0)
        jac[:, l] = (gp - gm) / (2.0 * step)
    return jac


def model_jacobian(basis: BSplineBasis, d_ak: np.ndarray, wp: WarpParameters, k: int, i: int, grid) -> np.ndarray:
    """Jacobian of the warped mean curve w.r.t. the random anchor values.

    Row j is tau'(g(t_j)) * dg(t_j)/dw with the analytic B-spline derivative.
    d_ak may be a (q,) vector for one coordinate or (A, q) for all; the result
    is (n, n_w) or (A, n, n_w) accordingly.
    """
    t = _grid_points(grid)
    g = eval_g(wp, k, i, grid)
    dpsi = deriv_design_matrix(basis, g)
    jac_g = warp_jacobian(wp, k, i, grid)
    d = np.asarray(d_ak, dtype=float)
    if d.ndim == 1:
        tau_prime = dpsi @ d
        return tau_prime[:, None] * jac_g
    tau_prime = dpsi @ d.T  # (n, A)
    return np.einsum("na,nw->anw", tau_prime, jac_g)
