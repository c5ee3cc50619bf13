"""Synthetic two-group 2D curve generator with per-curve warps, smooth amplitude
effects, white noise and group-dependent scalar covariates.

Draw order per curve (one seeded generator, fixed order): 2 standard normals
for the warp anchors, n standard normals for the amplitude effect, A*n for the
noise; after all curves, N uniforms for the scalar covariates.  Replication r
of a study uses seed + r.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .basis import AnchorSpline, BSplineBasis, design_matrix, eval_spline
from .covariance import MaternKernel, build_cov
from .dataset import Curve, FunctionalDataset, ScalarCovariates, TimeGrid

WARP_ANCHORS = np.array([0.0, 0.33, 0.67, 1.0])
# anchor covariances of the two groups (interior anchors only)
GROUP_WARP_COV = (
    np.array([[10.0, 4.0], [4.0, 8.0]]),
    np.array([[10.0, 8.0], [8.0, 15.0]]),
)
AMPLITUDE_KERNEL_PARAMS = (100.0, 0.3, 3.0)  # scale, range, smoothness


def default_grid() -> np.ndarray:
    j = np.arange(1, 101)
    return (j + 1) / 102.0


@dataclass(frozen=True)
class ScenarioConfig:
    b1: float
    b2: float
    sigma_w2: float
    sigma_r2: float
    sigma2: float
    n1: int = 30
    n2: int = 30
    grid: np.ndarray = field(default_factory=default_grid)
    seed: int = 0
    n_interior_knots: int = 8

    def __post_init__(self):
        object.__setattr__(self, "grid", np.asarray(self.grid, dtype=float))
        if min(self.sigma_w2, self.sigma_r2, self.sigma2) <= 0:
            raise ValueError("variance levels must be positive (use a tiny floor to disable)")
        if self.n1 < 1 or self.n2 < 1:
            raise ValueError("group sizes must be at least 1")


@dataclass(frozen=True)
class GroundTruth:
    labels: np.ndarray          # (N,) 1 or 2
    warps: np.ndarray           # (N, 4) anchor values of each curve's warp
    mean1: np.ndarray           # (2, n) true mean of group 1 on the grid
    mean2: np.ndarray           # (2, n)


def true_means(b1: float, times) -> tuple[np.ndarray, np.ndarray]:
    """The two group mean curves; they coincide at t=0 when b1=0."""
    t = np.asarray(times, dtype=float)
    mu1 = np.vstack([np.exp(np.cos(2 * np.pi * t)), np.exp(np.sin(2 * np.pi * t))])
    mu2 = np.vstack([
        np.exp(np.cos(2 * np.pi * t**1.05 - b1)),
        np.exp(np.sin(2 * np.pi * t**1.1 + b1)),
    ])
    return mu1, mu2


_PRESETS = {
    "1": dict(b1=0.12, b2=0.8, sigma_w2=0.25e-4, sigma_r2=1e-4, sigma2=1e-4, n1=30, n2=30),
    "2": dict(b1=0.10, b2=0.8, sigma_w2=0.25e-4, sigma_r2=1e-4, sigma2=1e-4, n1=30, n2=30),
    "3": dict(b1=0.08, b2=0.8, sigma_w2=0.25e-4, sigma_r2=1e-4, sigma2=1e-4, n1=30, n2=30),
    "4": dict(b1=0.08, b2=0.6, sigma_w2=0.25e-4, sigma_r2=1e-4, sigma2=1e-4, n1=30, n2=30),
    "extreme": dict(b1=0.05, b2=0.8, sigma_w2=1e-4, sigma_r2=4e-4, sigma2=4e-4, n1=50, n2=50),
    "recovery": dict(b1=0.15, b2=0.8, sigma_w2=1e-4, sigma_r2=4e-4, sigma2=4e-4, n1=50, n2=50),
}


def scenario_preset(name, seed: int = 0) -> ScenarioConfig:
    key = str(name)
    if key not in _PRESETS:
        raise KeyError(f"unknown scenario preset {name!r}; choose one of {sorted(_PRESETS)}")
    return ScenarioConfig(seed=seed, **_PRESETS[key])


def _fit_mean_weights(basis: BSplineBasis, t: np.ndarray, mu: np.ndarray) -> np.ndarray:
    psi = design_matrix(basis, t)
    w, *_ = np.linalg.lstsq(psi, mu.T, rcond=None)
    return w.T  # (2, q)


def generate(cfg: ScenarioConfig) -> tuple[FunctionalDataset, ScalarCovariates, GroundTruth]:
    """Draw one replication: curves, scalar covariates and the ground truth."""
    rng = np.random.default_rng(cfg.seed)
    t = cfg.grid
    n = t.size
    basis = BSplineBasis.uniform(cfg.n_interior_knots)
    mu1, mu2 = true_means(cfg.b1, t)
    d = [_fit_mean_weights(basis, t, mu) for mu in (mu1, mu2)]

    chol_w = [np.linalg.cholesky(o) for o in GROUP_WARP_COV]
    amp_kernel = MaternKernel(*AMPLITUDE_KERNEL_PARAMS)
    chol_amp = np.linalg.cholesky(build_cov(amp_kernel, t))

    n_total = cfg.n1 + cfg.n2
    width = len(str(n_total))
    curves = []
    warps = np.zeros((n_total, WARP_ANCHORS.size))
    labels = np.concatenate([np.ones(cfg.n1, dtype=int), np.full(cfg.n2, 2, dtype=int)])
    sw, sr, se = np.sqrt([cfg.sigma_w2, cfg.sigma_r2, cfg.sigma2])

    for i, group in enumerate(labels):
        k = group - 1
        interior = chol_w[k] @ (sw * rng.standard_normal(2))
        anchor_vals = np.array([0.0, interior[0], interior[1], 0.0])
        composite = WARP_ANCHORS + anchor_vals
        if np.any(np.diff(composite) <= 0):
            raise ValueError(
                "warp variance too large: drawn anchors break monotonicity "
                f"(curve {i}, values {anchor_vals})"
            )
        warps[i] = anchor_vals
        g = t + eval_spline(AnchorSpline(WARP_ANCHORS, anchor_vals, kind="hyman"), t)
        amplitude = chol_amp @ (sr * rng.standard_normal(n))  # one draw, shared by both coords
        noise = se * rng.standard_normal((2, n))
        tau = design_matrix(basis, g) @ d[k].T  # (n, 2)
        values = tau.T + amplitude[None, :] + noise
        curves.append(Curve(id=f"c{i + 1:0{width}d}", grid=TimeGrid(t), values=values))

    u = rng.uniform(size=n_total)
    v = np.where(labels == 1, 1.0 + u, (1.0 - cfg.b2) + u)
    ids = tuple(c.id for c in curves)
    scalars = ScalarCovariates(ids=ids, values=np.column_stack([np.ones(n_total), v]), names=("intercept", "v1"))
    data = FunctionalDataset(curves=tuple(curves), dimension=2, labels=tuple(labels))
    truth = GroundTruth(labels=labels, warps=warps, mean1=mu1, mean2=mu2)
    return data, scalars, truth


def replication_config(cfg: ScenarioConfig, rep: int) -> ScenarioConfig:
    return replace(cfg, seed=cfg.seed + rep)
