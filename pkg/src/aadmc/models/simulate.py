"""Euler paths of geometric Brownian motion with a tangent process."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .. import _kernels as K
from .scenario import THETAS, ScenarioParams

OUTER_STREAM = 0
INNER_STREAM = 1


@dataclass(frozen=True)
class TangentCoefficients:
    """Per-step coefficients of the tangent recursion for one designated parameter.

    ``y <- y + rh*y + drift*x + (y*sigma + diffusion*x) * sqrt(h) * z``.
    """

    y0: float
    drift: float
    diffusion: float


def tangent_coefficients(params: ScenarioParams, theta: str) -> TangentCoefficients:
    if theta not in THETAS:
        raise ValueError(f"unknown parameter {theta!r}; expected one of {THETAS}")
    h = params.h
    if theta == "spot":
        return TangentCoefficients(1.0, 0.0, 0.0)
    if theta == "rate":
        return TangentCoefficients(0.0, h, 0.0)
    if theta == "sigma":
        return TangentCoefficients(0.0, 0.0, 1.0)
    if theta == "maturity":
        # h = T/n, so d(r h)/dT = r/n and d(sqrt h)/dT = sqrt(h)/(2T)
        return TangentCoefficients(0.0, params.rate / params.steps, params.sigma / (2.0 * params.maturity))
    return TangentCoefficients(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class PathBatch:
    X: np.ndarray     # (M, n+1)
    Y: np.ndarray     # (M, n+1) tangent dX/dtheta
    Z: np.ndarray     # (M, n)
    params: ScenarioParams
    theta: str
    path0: int = 0

    @property
    def n_paths(self) -> int:
        return self.X.shape[0]

    def to_csv(self, path) -> None:
        n = self.Z.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["path", "step", "x", "y", "z"])
            for m in range(self.n_paths):
                for k in range(n + 1):
                    z = "" if k == 0 else repr(float(self.Z[m, k - 1]))
                    w.writerow([self.path0 + m, k, repr(float(self.X[m, k])), repr(float(self.Y[m, k])), z])


def outer_normals(params: ScenarioParams, path0: int, n_paths: int, n_steps: int | None = None, seed=None):
    seed = params.seed if seed is None else seed
    return K.normals(seed, OUTER_STREAM, path0, n_paths, params.steps if n_steps is None else n_steps)


def simulate(params: ScenarioParams, theta: str = "spot", path0: int = 0, n_paths: int | None = None,
             seed: int | None = None, n_steps: int | None = None) -> PathBatch:
    """Euler paths ``path0 .. path0+n_paths-1``; each path depends only on (seed, path index)."""
    M = params.paths if n_paths is None else n_paths
    n = params.steps if n_steps is None else n_steps
    h = params.h
    z = outer_normals(params, path0, M, n, seed)
    c = tangent_coefficients(params, theta)
    X, Y = K.euler_gbm(params.spot, c.y0, params.rate * h, params.sigma, np.sqrt(h), c.drift, c.diffusion, z)
    return PathBatch(X, Y, z, params, theta, path0)


def iter_batches(params: ScenarioParams, theta: str = "spot", chunk: int = 25_000, n_paths: int | None = None,
                 seed: int | None = None, n_steps: int | None = None):
    M = params.paths if n_paths is None else n_paths
    for p0 in range(0, M, chunk):
        yield simulate(params, theta, p0, min(chunk, M - p0), seed, n_steps)
