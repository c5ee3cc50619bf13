"""Covariance kernels and SPD Gram-matrix construction for the random effects.

The amplitude effect uses a Matern kernel; the warp anchors use a Brownian
(motion or bridge) kernel or a fixed user-supplied matrix.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as _gamma, kv as _kv


class CovarianceError(ValueError):
    pass


class NumericalError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class MaternKernel:
    scale: float
    range: float
    smoothness: float

    def __post_init__(self):
        if self.scale <= 0 or self.range <= 0 or self.smoothness <= 0:
            raise CovarianceError("Matern scale, range and smoothness must all be positive")


@dataclass(frozen=True, eq=False)
class BrownianKernel:
    scale: float
    kind: str = "bridge"

    def __post_init__(self):
        if self.scale <= 0:
            raise CovarianceError("Brownian scale must be positive")
        if self.kind not in ("motion", "bridge"):
            raise CovarianceError(f"unknown Brownian kind {self.kind!r}")


@dataclass(frozen=True, eq=False)
class UnstructuredCov:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", m)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise CovarianceError("unstructured covariance must be square")
        if not np.allclose(m, m.T, atol=1e-12 * max(1.0, np.abs(m).max())):
            raise CovarianceError("unstructured covariance must be symmetric")
        w = np.linalg.eigvalsh(m)
        if w.min() < -1e-10 * max(np.trace(m), 1e-300):
            raise CovarianceError("unstructured covariance must be positive semi-definite")


def matern_eval(k: MaternKernel, d) -> np.ndarray:
    """Matern covariance at distance(s) d: scale * m_nu(d / range).

    m_nu(h) = 2^(1-nu)/Gamma(nu) * (sqrt(2 nu) h)^nu * K_nu(sqrt(2 nu) h),
    continuous at h = 0 with value 1.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise CovarianceError("distances must be non-negative")
    nu = k.smoothness
    x = np.sqrt(2.0 * nu) * d / k.range
    small = x < 1e-12
    x_safe = np.where(small, 1.0, x)
    with np.errstate(invalid="ignore", over="ignore", under="ignore"):
        corr = (2.0 ** (1.0 - nu) / _gamma(nu)) * x_safe**nu * _kv(nu, x_safe)
    corr = np.where(small, 1.0, corr)
    corr = np.nan_to_num(corr, nan=0.0)  # kv underflow at very large x
    return k.scale * corr


def brownian_eval(k: BrownianKernel, s, t) -> np.ndarray:
    """Brownian covariance: scale*min(s,t) (motion) or scale*(min(s,t)-s*t) (bridge)."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(s > 1) or np.any(t < 0) or np.any(t > 1):
        raise CovarianceError("Brownian kernel times must lie in [0, 1]")
    m = np.minimum(s, t)
    if k.kind == "motion":
        return k.scale * m
    return k.scale * (m - s * t)


def _gram(kernel, times: np.ndarray) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if isinstance(kernel, MaternKernel):
        d = np.abs(times[:, None] - times[None, :])
        return matern_eval(kernel, d)
    if isinstance(kernel, BrownianKernel):
        return brownian_eval(kernel, times[:, None], times[None, :])
    if isinstance(kernel, UnstructuredCov):
        if kernel.matrix.shape[0] != times.size:
            raise CovarianceError(
                f"unstructured covariance is {kernel.matrix.shape[0]}x"
                f"{kernel.matrix.shape[0]} but {times.size} times were given"
            )
        return kernel.matrix.copy()
    raise CovarianceError(f"unknown kernel type {type(kernel).__name__}")


def _kernel_scale(kernel) -> float:
    if isinstance(kernel, (MaternKernel, BrownianKernel)):
        return kernel.scale
    diag = np.diag(kernel.matrix)
    return float(diag.mean()) if diag.size and diag.mean() > 0 else 1.0


def build_cov(kernel, times: np.ndarray, jitter: float | None = None) -> np.ndarray:
    """Gram matrix of `kernel` on `times` plus a jitter diagonal; guaranteed Cholesky-able.

    The jitter starts at 1e-8*scale (or the given value) and is escalated by
    factors of 10 up to 1e-6*scale before giving up.
    """
    g = _gram(kernel, times)
    scale = _kernel_scale(kernel)
    jit = 1e-8 * scale if jitter is None else float(jitter)
    cap = max(1e-6 * scale, jit)
    eye = np.eye(g.shape[0])
    while True:
        try:
            np.linalg.cholesky(g + jit * eye)
            return g + jit * eye
        except np.linalg.LinAlgError:
            if jit >= cap:
                w_min = float(np.linalg.eigvalsh(g).min())
                raise NumericalError(
                    f"covariance factorization failed on {g.shape[0]} points "
                    f"(min eigenvalue {w_min:.3e}, jitter up to {jit:.1e})"
                )
            jit = min(jit * 10.0, cap)


def interior_cov(kernel, anchors: np.ndarray, jitter: float | None = None) -> np.ndarray:
    """Covariance of the free (interior) warp anchors; endpoints are pinned at zero.

    For an UnstructuredCov the matrix may be supplied either on the interior
    anchors directly or on the full anchor set (interior block is taken).
    """
    anchors = np.asarray(anchors, dtype=float)
    interior = anchors[1:-1]
    if isinstance(kernel, UnstructuredCov) and kernel.matrix.shape[0] == interior.size:
        mat = kernel.matrix.copy()
        scale = _kernel_scale(kernel)
        jit = 1e-8 * scale if jitter is None else float(jitter)
        return mat + jit * np.eye(mat.shape[0])
    if isinstance(kernel, UnstructuredCov):
        full = build_cov(kernel, anchors, jitter)
        return full[1:-1, 1:-1]
    return build_cov(kernel, interior, jitter)
