"""Full-tensor reference solvers for the 1D3V models.

The same discretizations as the low-rank path (upwind transport, conservative
Fokker-Planck fluxes, IMEX BGK with moment predictor) applied to dense arrays
of shape ``(N_x, N_v, N_v, N_v)``.  Used for low-rank vs full comparisons and
cost measurements; memory grows as ``N_x N_v^3``.
"""

from __future__ import annotations

import numpy as np

from .kinetic_discretization import MomentSet, VelocityGrid
from .models import ModelConfig, initial_trains
from .tt_core import tt_to_full

__all__ = ["FullTensorSolver", "dense_moments", "dense_maxwellian"]


def dense_moments(f: np.ndarray, grid: VelocityGrid) -> MomentSet:
    v = grid.points
    w = grid.dv**3
    m1 = f.sum(axis=(2, 3))
    m2 = f.sum(axis=(1, 3))
    m3 = f.sum(axis=(1, 2))
    n = m1.sum(axis=1) * w
    mom = np.stack([m1 @ v, m2 @ v, m3 @ v], axis=-1) * w
    e = (m1 @ (v * v) + m2 @ (v * v) + m3 @ (v * v)) * w
    with np.errstate(divide="ignore", invalid="ignore"):
        u = mom / n[:, None]
        T = (e / n - np.sum(u * u, axis=-1)) / 3.0
    return MomentSet(n=n, u=u, T=T, J1=-mom[:, 0], energy=e)


def dense_maxwellian(n, u, T, grid: VelocityGrid) -> np.ndarray:
    v = grid.points
    g = [np.exp(-((v[None, :] - u[:, i, None]) ** 2) / (2.0 * T[:, None])) for i in range(3)]
    pre = n * (2.0 * np.pi * T) ** -1.5
    return pre[:, None, None, None] * g[0][:, :, None, None] * g[1][:, None, :, None] * g[2][:, None, None, :]


def _vdx(f: np.ndarray, grid: VelocityGrid, dx: float) -> np.ndarray:
    v = grid.points
    vp = (np.maximum(v, 0.0) / (2.0 * dx))[None, :, None, None]
    vm = (np.maximum(-v, 0.0) / (2.0 * dx))[None, :, None, None]
    r = lambda s: np.roll(f, -s, axis=0)  # noqa: E731  r(s)[j] = f[j+s]
    return vp * (3.0 * f - 4.0 * r(-1) + r(-2)) + vm * (3.0 * f - 4.0 * r(1) + r(2))


def _fp(f: np.ndarray, M: np.ndarray, grid: VelocityGrid, scale) -> np.ndarray:
    g = f / M
    out = np.zeros_like(f)
    for ax in (1, 2, 3):
        n = f.shape[ax]
        lo = [slice(None)] * 4
        hi = [slice(None)] * 4
        lo[ax], hi[ax] = slice(0, n - 1), slice(1, n)
        lo, hi = tuple(lo), tuple(hi)
        flux = 0.5 * (M[lo] + M[hi]) * (g[hi] - g[lo])
        out[lo] += flux
        out[hi] -= flux
    return np.asarray(scale)[:, None, None, None] * out / grid.dv**2


class FullTensorSolver:
    """Dense first-order solver for ``bgk_1d3v`` (IMEX) and ``fp_1d3v`` (explicit)."""

    def __init__(self, cfg: ModelConfig):
        if cfg.model not in ("bgk_1d3v", "fp_1d3v"):
            raise ValueError(f"no full-tensor reference for model {cfg.model}")
        self.cfg = cfg
        self.grid = cfg.vgrid
        self.dx = cfg.sgrid.dx
        self.f = tt_to_full(initial_trains(cfg), cap=None)
        self.t = 0.0

    def step(self, dt: float) -> None:
        cfg, grid = self.cfg, self.grid
        f = self.f
        tr = _vdx(f, grid, self.dx)
        if cfg.model == "bgk_1d3v":
            # moment predictor for M^{n+1}, then implicit relaxation
            w = grid.dv**3
            v = grid.points
            m = dense_moments(f, grid)
            m1 = tr.sum(axis=(2, 3))
            m2 = tr.sum(axis=(1, 3))
            m3 = tr.sum(axis=(1, 2))
            flux = np.stack([m1.sum(axis=1), m1 @ v, m2 @ v, m3 @ v,
                             m1 @ (v * v) + m2 @ (v * v) + m3 @ (v * v)], axis=-1) * w
            U = np.concatenate([m.n[:, None], m.n[:, None] * m.u, m.energy[:, None]], axis=-1)
            U = U - dt * flux
            n = U[:, 0]
            u = U[:, 1:4] / n[:, None]
            T = (U[:, 4] / n - np.sum(u * u, axis=-1)) / 3.0
            MomentSet(n, u, T, -U[:, 1], U[:, 4]).check(t=self.t)
            M = dense_maxwellian(n, u, T, grid)
            a = dt * cfg.eta
            self.f = (f - dt * tr + a * M) / (1.0 + a)
        else:
            m = dense_moments(f, grid).check(t=self.t)
            M = dense_maxwellian(m.n, m.u, m.T, grid)
            self.f = f - dt * tr + dt * _fp(f, M, grid, np.full(f.shape[0], cfg.eta))
        self.t += dt

    def moments(self) -> MomentSet:
        return dense_moments(self.f, self.grid)
