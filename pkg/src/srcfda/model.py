"""The two-level mixture model: component densities, responsibilities,
mixture likelihood, allocation probabilities, prediction and classification.

Conventions: random effects are scaled by the noise standard deviation, so the
marginal covariance of one coordinate of curve i under cluster k is
sigma2 * (I + S_i) with S_i the Matern Gram matrix on the curve's grid, and
the random warp anchors have covariance sigma2 * H.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .basis import BSplineBasis
from .covariance import (
    BrownianKernel,
    MaternKernel,
    NumericalError,
    UnstructuredCov,
    build_cov,
)
from .dataset import Curve, FunctionalDataset, ScalarCovariates
from .warping import WarpParameters, eval_g, warped_design

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(eq=False)
class SrcParameters:
    """All model unknowns for K clusters on N curves of dimension A."""

    basis: BSplineBasis
    warp: WarpParameters
    d: np.ndarray                 # (K, A, q) spline weights
    rho_s: MaternKernel
    rho_h: BrownianKernel | UnstructuredCov
    sigma2: float
    beta: np.ndarray | None       # (K-1, p) allocation coefficients; None before fitting
    curve_ids: tuple = ()

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=float)
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        if self.d.ndim != 3 or self.d.shape[2] != self.basis.q:
            raise ValueError("spline weights must be (K, A, q)")
        if self.d.shape[0] != self.warp.fixed.shape[0]:
            raise ValueError("spline weights and warps disagree on K")
        if self.beta is not None:
            self.beta = np.asarray(self.beta, dtype=float)
            if not np.all(np.isfinite(self.beta)):
                raise ValueError("allocation coefficients must be finite")

    @property
    def k(self) -> int:
        return self.d.shape[0]

    @property
    def n_dim(self) -> int:
        return self.d.shape[1]


@dataclass(frozen=True, eq=False)
class Responsibilities:
    m: np.ndarray  # (N, K)

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        object.__setattr__(self, "m", m)
        if m.ndim != 2:
            raise ValueError("responsibilities must be an (N, K) matrix")
        if np.any(m < -1e-12) or np.any(m > 1 + 1e-12):
            raise ValueError("responsibilities must lie in [0, 1]")
        if np.any(np.abs(m.sum(axis=1) - 1.0) > 1e-10):
            raise ValueError("responsibility rows must sum to 1")

    @property
    def assignments(self) -> np.ndarray:
        """Argmax cluster per curve, 1-based; ties break to the lowest index."""
        return self.m.argmax(axis=1) + 1


@dataclass(eq=False)
class FitResult:
    params: SrcParameters
    responsibilities: Responsibilities
    loglik_trace: np.ndarray
    assignments: np.ndarray       # (N,) in 1..K
    aicc: float
    aligned: list                 # per-curve (A, n_i) fixed-effect curves
    converged: bool
    n_iter: int
    mixing: np.ndarray | None = None  # free mixing proportions when no scalar model is used


def component_loglik(data: FunctionalDataset, i: int, params: SrcParameters, k: int) -> float:
    """Log density of curve i under cluster k (coordinates independent given the warp)."""
    curve = data.curves[i]
    g = eval_g(params.warp, k, i, curve.grid)
    psi = warped_design(params.basis, g)
    mean = psi @ params.d[k].T  # (n, A)
    resid = curve.values - mean.T
    cov = np.eye(curve.grid.n) + build_cov(params.rho_s, curve.grid.points)
    try:
        chol = cho_factor(cov, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"covariance factorization failed for curve {curve.id!r}") from exc
    logdet = 2.0 * np.sum(np.log(np.diag(chol[0])))
    n = curve.grid.n
    total = 0.0
    for a in range(curve.dimension):
        q = resid[a] @ cho_solve(chol, resid[a])
        total += -0.5 * (n * (LOG_2PI + np.log(params.sigma2)) + logdet + q / params.sigma2)
    return float(total)


def responsibilities(priors: np.ndarray, logliks: np.ndarray) -> Responsibilities:
    """Posterior cluster weights from priors and per-cluster log densities.

    Computed in log space with max subtraction, so adding a constant to every
    log density in a row leaves the result unchanged.
    """
    priors = np.asarray(priors, dtype=float)
    logliks = np.asarray(logliks, dtype=float)
    if np.any(~np.isfinite(logliks) & (logliks > 0)) or np.any(np.isnan(logliks)):
        raise ValueError("log densities contain NaN")
    with np.errstate(divide="ignore"):
        log_w = np.log(priors) + logliks
    log_w -= log_w.max(axis=1, keepdims=True)
    w = np.exp(log_w)
    w /= w.sum(axis=1, keepdims=True)
    return Responsibilities(w)


def allocation_probs(beta: np.ndarray | None, scalars: ScalarCovariates, k: int | None = None) -> np.ndarray:
    """Cluster prior probabilities from the logistic allocation model.

    The last cluster is the reference category with logit 0.  With beta=None
    (or all zeros) every cluster gets probability 1/K.
    """
    v = scalars.values
    if beta is None:
        if k is None:
            raise ValueError("k required when beta is None")
        return np.full((v.shape[0], k), 1.0 / k)
    beta = np.asarray(beta, dtype=float)
    logits = np.column_stack([v @ beta.T, np.zeros(v.shape[0])])
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=1, keepdims=True)
    return p


def mixture_loglik(data: FunctionalDataset, priors: np.ndarray, params: SrcParameters) -> float:
    """Observed-data log likelihood: sum_i log sum_k pi_ki p(x_i | theta_ki)."""
    n = len(data)
    logliks = np.array([
        [component_loglik(data, i, params, k) for k in range(params.k)] for i in range(n)
    ])
    return float(logsumexp_rows(np.log(np.asarray(priors)) + logliks).sum())


def logsumexp_rows(x: np.ndarray) -> np.ndarray:
    m = x.max(axis=1, keepdims=True)
    return (m + np.log(np.exp(x - m).sum(axis=1, keepdims=True))).ravel()


def predict_curve(data: FunctionalDataset, scalars: ScalarCovariates, i: int,
                  params: SrcParameters, grid=None) -> np.ndarray:
    """Fixed-effect reconstruction of curve i: prior-weighted warped cluster means."""
    curve = data.curves[i]
    grid = curve.grid if grid is None else grid
    pi = allocation_probs(params.beta, scalars, params.k)[i]
    out = None
    for k in range(params.k):
        g = eval_g(params.warp, k, i, grid)
        mean = (warped_design(params.basis, g) @ params.d[k].T).T  # (A, n)
        out = pi[k] * mean if out is None else out + pi[k] * mean
    return out


def classify(curve: Curve, v_star: np.ndarray, params: SrcParameters,
              w_random: np.ndarray | None = None) -> tuple[int, np.ndarray]:
    """Posterior cluster membership for a single curve.

    For a genuinely new curve no per-curve warp is available, so the random
    part defaults to its prior mode, zero; pass `w_random` (K, n_w) to reuse
    fitted warps for in-sample curves.  Ties break to the lowest index.
    """
    n_w = params.warp.n_w
    rand = np.zeros((1, params.k, n_w)) if w_random is None else np.asarray(w_random)[None, :, :]
    wp = WarpParameters(anchors=params.warp.anchors, fixed=params.warp.fixed,
                        random=rand, fixed_anchors=None)
    one = FunctionalDataset(curves=(curve,), dimension=curve.dimension)
    tmp = SrcParameters(basis=params.basis, warp=wp, d=params.d, rho_s=params.rho_s,
                        rho_h=params.rho_h, sigma2=params.sigma2, beta=params.beta)
    logliks = np.array([component_loglik(one, 0, tmp, k) for k in range(params.k)])
    v = np.array([1.0]) if v_star is None else np.atleast_1d(np.asarray(v_star, dtype=float))
    sc = ScalarCovariates(ids=(curve.id,), values=v[None, :], names=tuple(f"v{j}" for j in range(v.size)))
    pi = allocation_probs(params.beta, sc, params.k)[0]
    post = responsibilities(pi[None, :], logliks[None, :]).m[0]
    return int(post.argmax()) + 1, post


# ---------------------------------------------------------------------------
# JSON serialization of fit results

def _kernel_to_dict(kernel):
    if isinstance(kernel, MaternKernel):
        return {"type": "matern", "scale": kernel.scale, "range": kernel.range,
                "smoothness": kernel.smoothness}
    if isinstance(kernel, BrownianKernel):
        return {"type": "brownian", "scale": kernel.scale, "kind": kernel.kind}
    return {"type": "unstructured", "matrix": kernel.matrix.tolist()}


def _kernel_from_dict(d):
    if d["type"] == "matern":
        return MaternKernel(scale=d["scale"], range=d["range"], smoothness=d["smoothness"])
    if d["type"] == "brownian":
        return BrownianKernel(scale=d["scale"], kind=d["kind"])
    return UnstructuredCov(matrix=np.asarray(d["matrix"]))


def fit_result_to_dict(result: FitResult) -> dict:
    p = result.params
    return {
        "k": p.k,
        "parameters": {
            "spline_weights": p.d.tolist(),
            "basis": {"interior_knots": p.basis.interior_knots.tolist(), "degree": p.basis.degree},
            "warp_anchors": p.warp.anchors.tolist(),
            "fixed_warps": p.warp.fixed.tolist(),
            "random_warps": p.warp.random.tolist(),
            "amplitude_kernel": _kernel_to_dict(p.rho_s),
            "warp_kernel": _kernel_to_dict(p.rho_h),
            "sigma2": float(p.sigma2),
            "beta": None if p.beta is None else p.beta.tolist(),
        },
        "curve_ids": list(p.curve_ids),
        "responsibilities": result.responsibilities.m.tolist(),
        "assignments": [int(a) for a in result.assignments],
        "loglik_trace": [float(x) for x in result.loglik_trace],
        "aicc": float(result.aicc),
        "converged": bool(result.converged),
        "n_iter": int(result.n_iter),
        "mixing": None if result.mixing is None else [float(x) for x in result.mixing],
    }


def fit_result_from_dict(d: dict) -> FitResult:
    pr = d["parameters"]
    basis = BSplineBasis(interior_knots=np.asarray(pr["basis"]["interior_knots"]),
                         degree=pr["basis"]["degree"])
    warp = WarpParameters(anchors=np.asarray(pr["warp_anchors"]),
                          fixed=np.asarray(pr["fixed_warps"]),
                          random=np.asarray(pr["random_warps"]))
    params = SrcParameters(
        basis=basis, warp=warp, d=np.asarray(pr["spline_weights"]),
        rho_s=_kernel_from_dict(pr["amplitude_kernel"]),
        rho_h=_kernel_from_dict(pr["warp_kernel"]),
        sigma2=pr["sigma2"],
        beta=None if pr["beta"] is None else np.asarray(pr["beta"]),
        curve_ids=tuple(d.get("curve_ids", ())),
    )
    return FitResult(
        params=params,
        responsibilities=Responsibilities(np.asarray(d["responsibilities"])),
        loglik_trace=np.asarray(d["loglik_trace"]),
        assignments=np.asarray(d["assignments"], dtype=int),
        aicc=float(d["aicc"]),
        aligned=[],
        converged=bool(d["converged"]),
        n_iter=int(d["n_iter"]),
        mixing=None if d.get("mixing") is None else np.asarray(d["mixing"]),
    )
