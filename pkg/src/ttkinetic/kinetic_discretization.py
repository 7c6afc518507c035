"""Velocity/space grids, Maxwellians, discrete moments and discrete operators.

Operators return :class:`~ttkinetic.projector_splitting.RhsTerms`.  Each
term differs from its input train in a single core (a banded matrix applied
along one velocity index), so no term has a larger rank than the input.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .projector_splitting import RhsTerms
from .tt_core import TensorTrain3, tt_divide_rank1

__all__ = [
    "VelocityGrid",
    "SpatialGrid",
    "MomentSet",
    "DegenerateStateError",
    "maxwellian_tt",
    "moments_of",
    "velocity_moments",
    "apply_diffusion",
    "apply_fokker_planck",
    "apply_upwind_x",
    "apply_upwind_v1",
    "upwind_x_stencil",
    "apply_mode",
]


class DegenerateStateError(ArithmeticError):
    """Non-positive density or temperature where a Maxwellian is needed."""

    def __init__(self, message, j=None, t=None, step=None):
        self.j, self.t, self.step = j, t, step
        super().__init__(message)


@dataclass(frozen=True)
class VelocityGrid:
    """Uniform cell-centred grid, identical in all three velocity directions."""

    v_min: float
    v_max: float
    n_v: int

    def __post_init__(self):
        if self.n_v < 1 or not self.v_max > self.v_min:
            raise ValueError(f"bad velocity grid {self}")

    @property
    def dv(self) -> float:
        return (self.v_max - self.v_min) / self.n_v

    @property
    def points(self) -> np.ndarray:
        return self.v_min + (np.arange(1, self.n_v + 1) - 0.5) * self.dv

    @property
    def max_abs(self) -> float:
        """Largest |v| over grid nodes."""
        return float(np.max(np.abs(self.points)))


@dataclass(frozen=True)
class SpatialGrid:
    """Periodic cell-centred grid on ``[0, length]``."""

    length: float
    n_x: int

    @property
    def dx(self) -> float:
        return self.length / self.n_x

    @property
    def points(self) -> np.ndarray:
        return (np.arange(1, self.n_x + 1) - 0.5) * self.dx


@dataclass
class MomentSet:
    """Macroscopic fields per spatial point (arrays over the batch axis)."""

    n: np.ndarray
    u: np.ndarray  # (..., 3)
    T: np.ndarray
    J1: np.ndarray
    energy: np.ndarray  # sum f |v|^2 dv^3

    @property
    def degenerate(self) -> np.ndarray:
        return ~((self.n > 0) & (self.T > 0))

    def check(self, t=None, step=None):
        bad = np.atleast_1d(self.degenerate)
        if bad.any():
            j = int(np.argmax(bad))
            n = np.atleast_1d(self.n)[j]
            T = np.atleast_1d(self.T)[j]
            raise DegenerateStateError(
                f"degenerate moments at step={step} t={t} j={j}: n={n:.6g} T={T:.6g}",
                j=j, t=t, step=step,
            )
        return self


def maxwellian_tt(n, u, T, grid: VelocityGrid) -> TensorTrain3:
    """Rank-(1,1) discrete Maxwellian; the prefactor lives in core1.

    ``n``, ``T`` may be arrays (batch) and ``u`` then has shape ``(..., 3)``.
    """
    n = np.asarray(n, dtype=float)
    T = np.asarray(T, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(~(n > 0)) or np.any(~(T > 0)):
        raise DegenerateStateError(f"Maxwellian needs n > 0 and T > 0 (n={n}, T={T})")
    v = grid.points
    pre = n * (2.0 * np.pi * T) ** -1.5
    g = [np.exp(-((v - u[..., i, None]) ** 2) / (2.0 * T[..., None])) for i in range(3)]
    return TensorTrain3.rank1(pre[..., None] * g[0], g[1], g[2])


def moments_of(f: TensorTrain3, grid: VelocityGrid) -> MomentSet:
    """Midpoint-rule moments: density, bulk velocity, temperature, current."""
    raw = velocity_moments(f, grid.points) * grid.dv**3
    n, mom, e = raw[..., 0], raw[..., 1:4], raw[..., 4]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = mom / n[..., None]
        T = (e / n - np.sum(u * u, axis=-1)) / 3.0
    return MomentSet(n=n, u=u, T=T, J1=-mom[..., 0], energy=e)


def velocity_moments(f: TensorTrain3, v: np.ndarray) -> np.ndarray:
    """Plain sums ``sum f * (1, v1, v2, v3, |v|^2)`` over the grid, shape ``(..., 5)``."""
    c1, c2, c3 = f.cores
    vv = v * v
    w3 = np.stack([np.ones_like(v), v, vv], axis=-1)  # (N, 3)
    a3 = c3 @ w3  # (..., r2, 3): sums of core3 against 1, v, v^2
    a2 = np.einsum("...akb,kw->...wab", c2, w3)  # (..., 3, r1, r2)
    a1 = np.swapaxes(c1, -1, -2) @ w3  # (..., r1, 3)
    t0 = a2[..., 0, :, :] @ a3[..., :, 0:1]  # (..., r1, 1) sums over k2, k3
    # reduce core1 against 1, v, v^2 with core2/core3 plain sums
    m1 = np.swapaxes(a1, -1, -2) @ t0  # (..., 3, 1)
    b1 = a1[..., :, 0]  # core1 plain sum, (..., r1)
    mid = np.einsum("...a,...wab->...wb", b1, a2)  # (..., 3, r2)
    m2 = np.einsum("...wb,...b->...w", mid, a3[..., :, 0])  # weights on v2
    m3 = np.einsum("...b,...bw->...w", mid[..., 0, :], a3)  # weights on v3
    n = m1[..., 0, 0]
    return np.stack([n, m1[..., 1, 0], m2[..., 1], m3[..., 1],
                     m1[..., 2, 0] + m2[..., 2] + m3[..., 2]], axis=-1)


# ----------------------------------------------------------- 1D stencils


def apply_mode(tt: TensorTrain3, direction: int, core: np.ndarray) -> TensorTrain3:
    """Train equal to ``tt`` with the core of ``direction`` (0, 1, 2) replaced."""
    return tt.replace_core(direction + 1, core)


def _mode_axis(direction: int) -> int:
    # physical axis of each core (counted from the end)
    return (-2, -2, -1)[direction]


def _shift(a: np.ndarray, s: int, axis: int) -> np.ndarray:
    """``out[k] = a[k + s]`` along ``axis`` with zero fill outside."""
    out = np.zeros_like(a)
    n = a.shape[axis]
    if abs(s) >= n:
        return out
    dst = [slice(None)] * a.ndim
    src = [slice(None)] * a.ndim
    if s >= 0:
        dst[axis], src[axis] = slice(0, n - s), slice(s, n)
    else:
        dst[axis], src[axis] = slice(-s, n), slice(0, n + s)
    out[tuple(dst)] = a[tuple(src)]
    return out


def _flux_divergence(g: np.ndarray, axis: int, weight=None) -> np.ndarray:
    """``(F[k+1/2] - F[k-1/2])`` with ``F[k+1/2] = w (g[k+1]-g[k])``, zero end fluxes.

    ``weight`` holds the N-1 interface weights (broadcast along ``axis``).
    """
    n = g.shape[axis]
    sl = lambda a, b: tuple(slice(a, b) if i == axis % g.ndim else slice(None) for i in range(g.ndim))  # noqa: E731
    flux = g[sl(1, n)] - g[sl(0, n - 1)]
    if weight is not None:
        flux = flux * weight
    out = np.zeros_like(g)
    out[sl(0, n - 1)] += flux
    out[sl(1, n)] -= flux
    return out


def _interface_weight(m: np.ndarray, axis: int) -> np.ndarray:
    n = m.shape[axis]
    sl = lambda a, b: tuple(slice(a, b) if i == axis % m.ndim else slice(None) for i in range(m.ndim))  # noqa: E731
    return 0.5 * (m[sl(0, n - 1)] + m[sl(1, n)])


def apply_diffusion(f: TensorTrain3, grid: VelocityGrid, eta: float) -> RhsTerms:
    """``eta * Laplacian f`` with zero boundary fluxes, one term per direction."""
    c = eta / grid.dv**2
    terms = []
    for d in range(3):
        core = f.cores[d]
        terms.append(apply_mode(f, d, c * _flux_divergence(core, _mode_axis(d))))
    return RhsTerms(terms)


def apply_fokker_planck(f: TensorTrain3, M: TensorTrain3, grid: VelocityGrid, scale=1.0) -> RhsTerms:
    """``scale * div(M grad(f / M))`` in conservative flux form.

    ``M`` must be rank (1,1) and strictly positive; ``scale`` may be an array
    over the batch axes (e.g. ``eta * T`` per spatial point).
    """
    if M.rank != (1, 1):
        raise ValueError(f"Fokker-Planck weight must be rank (1,1), got {M.rank}")
    if not all(np.all(c > 0) for c in M.cores):
        raise ValueError("Fokker-Planck weight must be strictly positive")
    g = tt_divide_rank1(f, M)
    c = np.asarray(scale, dtype=float) / grid.dv**2
    terms = []
    for d in range(3):
        axis = _mode_axis(d)
        w = _interface_weight(M.cores[d], axis)
        core = _flux_divergence(g.cores[d], axis, w)
        if d == 0:
            core = core * c[..., None, None]
        elif d == 1:
            core = core * c[..., None, None, None]
        else:
            core = core * c[..., None, None]
        # the other directions carry m * g = f; reuse f's cores so terms share frames
        terms.append(apply_mode(f, d, core))
    return RhsTerms(terms)


def _weight_core1(f: TensorTrain3, w) -> TensorTrain3:
    return f.replace_core(1, f.core1 * np.asarray(w)[..., :, None])


def apply_upwind_x(stencil: Sequence[TensorTrain3], grid: VelocityGrid, dx: float) -> RhsTerms:
    """Second-order upwind ``v1 d/dx`` from the trains at ``j-2 .. j+2``.

    ``f[j]`` appears in both one-sided differences; its two contributions are
    merged into one term, so the result has five terms.
    """
    fm2, fm1, f0, fp1, fp2 = stencil
    v = grid.points
    vp = np.maximum(v, 0.0) / (2.0 * dx)
    vm = np.maximum(-v, 0.0) / (2.0 * dx)
    return RhsTerms([
        _weight_core1(f0, 3.0 * (vp + vm)),
        _weight_core1(fm1, -4.0 * vp),
        _weight_core1(fm2, vp),
        _weight_core1(fp1, -4.0 * vm),
        _weight_core1(fp2, vm),
    ])


def _roll_batch(c: np.ndarray, s: int) -> np.ndarray:
    # out[j] = c[(j + s) mod N] along the leading (spatial) axis
    s %= c.shape[0]
    return np.concatenate((c[s:], c[:s]), axis=0) if s else c


def upwind_x_stencil(f: TensorTrain3):
    """Periodic neighbours ``f[j-2], ..., f[j+2]`` of a train batched over j."""
    out = []
    for s in (-2, -1, 0, 1, 2):
        if s == 0:
            out.append(f)
        else:
            out.append(TensorTrain3(*(_roll_batch(c, s) for c in f.cores)))
    return out


def apply_upwind_v1(f: TensorTrain3, E1, grid: VelocityGrid) -> RhsTerms:
    """Second-order upwind ``E1 d/dv1`` with zero ghost values, sign-split on E1."""
    E1 = np.asarray(E1, dtype=float)
    ep = np.maximum(E1, 0.0)[..., None, None]
    em = np.maximum(-E1, 0.0)[..., None, None]
    c = f.core1
    ax = -2
    fwd = -_shift(c, 2, ax) + 4.0 * _shift(c, 1, ax) - 3.0 * c
    bwd = 3.0 * c - 4.0 * _shift(c, -1, ax) + _shift(c, -2, ax)
    return RhsTerms([f.replace_core(1, (ep * fwd - em * bwd) / (2.0 * grid.dv))])
