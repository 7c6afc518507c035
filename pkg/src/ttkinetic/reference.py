"""Dense reference implementations used as oracles.

Everything here works on full arrays: discrete operators are explicit
matrices applied along one tensor axis, and the projector-splitting sweeps
are carried out with explicit orthonormal basis matrices.  Nothing in this
module touches the core-wise code paths, which is what makes it useful for
checking them.  Only intended for small grids.
"""

from __future__ import annotations

from typing import Callable, List

import numpy as np

__all__ = [
    "apply_along",
    "laplacian_matrix",
    "weighted_laplacian_matrix",
    "fp_matrix",
    "upwind_x_matrices",
    "upwind_v_matrices",
    "dense_diffusion",
    "dense_fokker_planck",
    "dense_transport_x",
    "dense_transport_v1",
    "dense_lie_step",
    "dense_strang_step",
]

DenseMap = Callable[[np.ndarray, float], np.ndarray]


def apply_along(A: np.ndarray, f: np.ndarray, axis: int) -> np.ndarray:
    """``sum_l A[k, l] f[..., l, ...]`` along ``axis``."""
    return np.moveaxis(np.tensordot(A, f, axes=([1], [axis])), 0, axis)


def weighted_laplacian_matrix(w: np.ndarray, h: float) -> np.ndarray:
    """Matrix of ``(w_{k+1/2}(g_{k+1}-g_k) - w_{k-1/2}(g_k-g_{k-1})) / h^2`` with zero end fluxes."""
    n = len(w) + 1
    A = np.zeros((n, n))
    for k in range(n - 1):
        A[k, k] -= w[k]
        A[k, k + 1] += w[k]
        A[k + 1, k + 1] -= w[k]
        A[k + 1, k] += w[k]
    return A / h**2


def laplacian_matrix(n: int, h: float) -> np.ndarray:
    return weighted_laplacian_matrix(np.ones(n - 1), h)


def fp_matrix(m: np.ndarray, h: float) -> np.ndarray:
    """1D ``d/dv (m d/dv (f/m))`` with interface weights ``(m_k + m_{k+1})/2``."""
    w = 0.5 * (m[:-1] + m[1:])
    return weighted_laplacian_matrix(w, h) @ np.diag(1.0 / m)


def upwind_x_matrices(n_x: int, dx: float):
    """Periodic second-order one-sided differences: ``(backward, forward)``.

    ``backward`` (for positive speed) is ``(3 f_j - 4 f_{j-1} + f_{j-2}) / (2 dx)``,
    ``forward`` is ``(-3 f_j + 4 f_{j+1} - f_{j+2}) / (2 dx)``.
    """
    I = np.eye(n_x)
    S = lambda s: np.roll(I, s, axis=1)  # noqa: E731  (S(s) f)_j = f_{j+s}
    back = (3 * I - 4 * S(-1) + S(-2)) / (2 * dx)
    fwd = (-3 * I + 4 * S(1) - S(2)) / (2 * dx)
    return back, fwd


def upwind_v_matrices(n: int, dv: float):
    """One-sided second-order differences with zero values outside the grid.

    Returns ``(forward, backward)``: ``(-f_{k+2} + 4 f_{k+1} - 3 f_k)/(2 dv)`` and
    ``(3 f_k - 4 f_{k-1} + f_{k-2})/(2 dv)``.
    """
    I = np.eye(n)
    up = lambda s: np.eye(n, k=s)  # noqa: E731  (up(s) f)_k = f_{k+s}, zero outside
    fwd = (-up(2) + 4 * up(1) - 3 * I) / (2 * dv)
    bwd = (3 * I - 4 * up(-1) + up(-2)) / (2 * dv)
    return fwd, bwd


def dense_diffusion(f: np.ndarray, dv: float, eta: float) -> np.ndarray:
    """``eta * Laplacian`` over the last three axes."""
    L = laplacian_matrix(f.shape[-1], dv)
    nd = f.ndim
    return eta * sum(apply_along(L, f, nd - 3 + d) for d in range(3))


def dense_fokker_planck(f: np.ndarray, ms, dv: float, scale=1.0) -> np.ndarray:
    """Kinetic Fokker-Planck with separable weight ``ms[0] x ms[1] x ms[2]`` (last three axes).

    ``ms[d]`` may carry leading batch axes matching ``f``; ``scale`` is per batch.
    """
    nd = f.ndim
    out = np.zeros_like(f)
    batch = f.shape[:-3]
    for idx in np.ndindex(*batch) if batch else [()]:
        for d in range(3):
            m = np.asarray(ms[d])[idx] if np.asarray(ms[d]).ndim > 1 else np.asarray(ms[d])
            out[idx] += apply_along(fp_matrix(m, dv), f[idx], d)
    s = np.asarray(scale, dtype=float)
    return out * s.reshape(s.shape + (1,) * 3) if s.ndim else out * s


def dense_transport_x(f: np.ndarray, v: np.ndarray, dx: float) -> np.ndarray:
    """Upwind ``v1 df/dx`` for ``f`` of shape ``(N_x, N, N, N)``."""
    back, fwd = upwind_x_matrices(f.shape[0], dx)
    vp = np.maximum(v, 0.0)[None, :, None, None]
    vm = np.minimum(v, 0.0)[None, :, None, None]
    return vp * apply_along(back, f, 0) + vm * apply_along(fwd, f, 0)


def dense_transport_v1(f: np.ndarray, E: np.ndarray, dv: float) -> np.ndarray:
    """Upwind ``E df/dv1``: forward difference where ``E > 0``, backward where ``E < 0``."""
    fwd, bwd = upwind_v_matrices(f.shape[1], dv)
    out = np.zeros_like(f)
    for j, e in enumerate(E):
        A = fwd if e > 0 else bwd
        out[j] = e * apply_along(A, f[j], 0)
    return out


# ------------------------------------------------------------ dense sweeps


def _full(c1, c2, c3):
    return np.einsum("ia,ajb,bk->ijk", c1, c2, c3)


def _right_basis(q2, q3):
    # rows span the (k2, k3) space: shape (r1, N2*N3)
    return np.einsum("ajb,bk->ajk", q2, q3).reshape(q2.shape[0], -1)


def _left_basis(p1, p2):
    # columns span the (k1, k2) space: shape (N1*N2, r2)
    return np.einsum("ia,ajb->ijb", p1, p2).reshape(-1, p2.shape[-1])


def dense_lie_step(c1, q2, q3, fwd: DenseMap, bwd: DenseMap, dt: float) -> np.ndarray:
    """First-order sweep with explicit projections.

    ``c1, q2, q3`` are lists (one per spatial point) of form-I factors;
    ``fwd``/``bwd`` act on the stacked full tensors ``(N_x, N1, N2, N3)``.
    Returns the full tensors after the step.
    """
    nx = len(c1)
    n1, n2, n3 = c1[0].shape[0], q2[0].shape[1], q3[0].shape[1]
    U = [_right_basis(q2[j], q3[j]) for j in range(nx)]
    F = np.stack([_full(c1[j], q2[j], q3[j]) for j in range(nx)])
    G = fwd(F, dt)
    C1 = [G[j].reshape(n1, -1) @ U[j].T for j in range(nx)]
    Ft = np.stack([(C1[j] @ U[j]).reshape(n1, n2, n3) for j in range(nx)])
    P1 = [np.linalg.qr(C1[j])[0] for j in range(nx)]
    H = bwd(Ft, dt)
    S1 = [P1[j].T @ H[j].reshape(n1, -1) @ U[j].T for j in range(nx)]
    C2 = [np.einsum("ab,bjc->ajc", S1[j], q2[j]) for j in range(nx)]
    F = np.stack([_full(P1[j], C2[j], q3[j]) for j in range(nx)])
    G = fwd(F, dt)
    C2 = [np.einsum("ia,ijk,bk->ajb", P1[j], G[j], q3[j]) for j in range(nx)]
    Ft = np.stack([_full(P1[j], C2[j], q3[j]) for j in range(nx)])
    P2 = [np.linalg.qr(C2[j].reshape(-1, C2[j].shape[-1]))[0].reshape(C2[j].shape) for j in range(nx)]
    L = [_left_basis(P1[j], P2[j]) for j in range(nx)]
    H = bwd(Ft, dt)
    S2 = [L[j].T @ H[j].reshape(-1, n3) @ q3[j].T for j in range(nx)]
    F = np.stack([(L[j] @ S2[j] @ q3[j]).reshape(n1, n2, n3) for j in range(nx)])
    G = fwd(F, dt)
    return np.stack([(L[j] @ (L[j].T @ G[j].reshape(-1, n3))).reshape(n1, n2, n3) for j in range(nx)])


def dense_strang_step(c1, q2, q3, fwd: DenseMap, bwd: DenseMap, dt: float) -> np.ndarray:
    """Second-order sweep (half steps out, full last step, half steps back)."""
    nx = len(c1)
    h = 0.5 * dt
    n1, n2, n3 = c1[0].shape[0], q2[0].shape[1], q3[0].shape[1]
    U = [_right_basis(q2[j], q3[j]) for j in range(nx)]
    F = np.stack([_full(c1[j], q2[j], q3[j]) for j in range(nx)])
    G = fwd(F, h)
    C1 = [G[j].reshape(n1, -1) @ U[j].T for j in range(nx)]
    Ft = np.stack([(C1[j] @ U[j]).reshape(n1, n2, n3) for j in range(nx)])
    P1 = [np.linalg.qr(C1[j])[0] for j in range(nx)]
    H = bwd(Ft, h)
    S1 = [P1[j].T @ H[j].reshape(n1, -1) @ U[j].T for j in range(nx)]
    C2 = [np.einsum("ab,bjc->ajc", S1[j], q2[j]) for j in range(nx)]
    F = np.stack([_full(P1[j], C2[j], q3[j]) for j in range(nx)])
    G = fwd(F, h)
    C2 = [np.einsum("ia,ijk,bk->ajb", P1[j], G[j], q3[j]) for j in range(nx)]
    Ft = np.stack([_full(P1[j], C2[j], q3[j]) for j in range(nx)])
    P2 = [np.linalg.qr(C2[j].reshape(-1, C2[j].shape[-1]))[0].reshape(C2[j].shape) for j in range(nx)]
    L = [_left_basis(P1[j], P2[j]) for j in range(nx)]
    H = bwd(Ft, h)
    S2 = [L[j].T @ H[j].reshape(-1, n3) @ q3[j].T for j in range(nx)]
    F = np.stack([(L[j] @ S2[j] @ q3[j]).reshape(n1, n2, n3) for j in range(nx)])
    # full step on the last core
    G = fwd(F, dt)
    C3 = [L[j].T @ G[j].reshape(-1, n3) for j in range(nx)]
    Ft = np.stack([(L[j] @ C3[j]).reshape(n1, n2, n3) for j in range(nx)])
    Q3 = [np.linalg.qr(C3[j].T)[0].T for j in range(nx)]
    H = bwd(Ft, h)
    S2 = [L[j].T @ H[j].reshape(-1, n3) @ Q3[j].T for j in range(nx)]
    C2 = [np.einsum("ajc,cb->ajb", P2[j], S2[j]) for j in range(nx)]
    F = np.stack([_full(P1[j], C2[j], Q3[j]) for j in range(nx)])
    G = fwd(F, h)
    C2 = [np.einsum("ia,ijk,bk->ajb", P1[j], G[j], Q3[j]) for j in range(nx)]
    Ft = np.stack([_full(P1[j], C2[j], Q3[j]) for j in range(nx)])
    Q2 = [np.linalg.qr(C2[j].reshape(C2[j].shape[0], -1).T)[0].T.reshape(C2[j].shape) for j in range(nx)]
    U = [_right_basis(Q2[j], Q3[j]) for j in range(nx)]
    H = bwd(Ft, h)
    S1 = [P1[j].T @ H[j].reshape(n1, -1) @ U[j].T for j in range(nx)]
    F = np.stack([(P1[j] @ S1[j] @ U[j]).reshape(n1, n2, n3) for j in range(nx)])
    G = fwd(F, h)
    return np.stack([(G[j].reshape(n1, -1) @ U[j].T @ U[j]).reshape(n1, n2, n3) for j in range(nx)])
