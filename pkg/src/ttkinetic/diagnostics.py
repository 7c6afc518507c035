"""Error norms, electric energy, effective ranks and least-squares fits."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .projector_splitting import SpatialTTField, advance_form
from .tt_core import TensorTrain3, tt_add, tt_frobenius_norm, tt_scale

__all__ = [
    "RankTrace",
    "relative_error",
    "electric_energy",
    "connector_singular_values",
    "effective_ranks",
    "v1_marginal",
    "marginal_contrast",
    "find_peaks",
    "fit_damping_rate",
    "convergence_order",
]

log = logging.getLogger(__name__)


@dataclass
class RankTrace:
    """Effective ranks recorded at output times."""

    delta: float
    times: List[float] = field(default_factory=list)
    R1: List[int] = field(default_factory=list)
    R2: List[int] = field(default_factory=list)

    def record(self, t: float, ranks: Tuple[int, int]):
        self.times.append(float(t))
        self.R1.append(int(ranks[0]))
        self.R2.append(int(ranks[1]))

    @property
    def max(self) -> Tuple[int, int]:
        return (max(self.R1, default=0), max(self.R2, default=0))


def relative_error(f: TensorTrain3, g: TensorTrain3) -> float:
    """``||f - g||_F / ||g||_F`` evaluated in TT format.

    Raises
    ------
    ValueError
        If ``g`` is zero or the mode sizes differ.
    """
    if f.mode_sizes != g.mode_sizes:
        raise ValueError(f"mode sizes differ: {f.mode_sizes} vs {g.mode_sizes}")
    ng = tt_frobenius_norm(g)
    if np.any(np.asarray(ng) == 0):
        raise ValueError("reference tensor has zero norm")
    return tt_frobenius_norm(tt_add(f, tt_scale(-1.0, g))) / ng


def electric_energy(E1, dx: float) -> float:
    """``0.5 * sum_j E_j^2 dx``."""
    E1 = np.asarray(E1, dtype=float)
    return 0.5 * float(np.sum(E1 * E1)) * dx


def connector_singular_values(fld: SpatialTTField):
    """Singular values of the form-II and form-IV connectors, per spatial point.

    Returns two arrays of shapes ``(N_x, r1)`` and ``(N_x, r2)`` (descending).
    """
    s = fld.state
    if s.form != "I":
        raise ValueError(f"expected a form-I field, got {s.form}")
    s2 = advance_form(s, "forward")
    sig1 = np.linalg.svd(s2.connector, compute_uv=False)
    s4 = advance_form(advance_form(s2, "forward"), "forward")
    sig2 = np.linalg.svd(s4.connector, compute_uv=False)
    return sig1, sig2


def _count(sig: np.ndarray, delta: float) -> int:
    lead = sig[..., :1]
    zero = lead[..., 0] == 0
    if np.any(zero):
        log.info("zero tensor at %d spatial point(s); effective rank taken as 1", int(zero.sum()))
    counts = np.sum(sig >= delta * lead, axis=-1)
    counts = np.where(zero, 1, counts)
    return int(np.max(counts))


def effective_ranks(fld: SpatialTTField, delta: float = 1e-5) -> Tuple[int, int]:
    """Largest ``r`` with ``sigma_r >= delta * sigma_1`` for both connectors, max over space."""
    sig1, sig2 = connector_singular_values(fld)
    return _count(sig1, delta), _count(sig2, delta)


def v1_marginal(f: TensorTrain3, dv: float) -> np.ndarray:
    """Phase-space density ``g(x_j, v1_k) = sum_{k2,k3} f dv^2``, shape ``(..., N1)``."""
    tail = np.einsum("...ab,...b->...a", f.core2.sum(axis=-2), f.core3.sum(axis=-1))
    return (f.core1 @ tail[..., None])[..., 0] * dv**2


def marginal_contrast(g: np.ndarray) -> float:
    """Relative size of the spatial variation of a phase-space density ``g[j, k]``.

    ``||g - <g>_x|| / ||<g>_x||`` (Frobenius), where ``<g>_x`` is the spatial
    mean.  Zero for a spatially uniform state; phase-space vortices raise it,
    collisional smoothing lowers it.
    """
    g = np.asarray(g, dtype=float)
    mean = g.mean(axis=0, keepdims=True)
    return float(np.linalg.norm(g - mean) / (np.linalg.norm(mean) * np.sqrt(g.shape[0])))


def find_peaks(y: Sequence[float]) -> np.ndarray:
    """Indices of local maxima; a plateau counts once, at its first index.

    A run of equal values is a peak if the value before it is smaller and the
    value after it is smaller.  End points are never peaks.
    """
    y = np.asarray(y, dtype=float)
    peaks = []
    i = 1
    n = len(y)
    while i < n - 1:
        if y[i] > y[i - 1]:
            k = i
            while k + 1 < n and y[k + 1] == y[i]:
                k += 1
            if k + 1 < n and y[k + 1] < y[i]:
                peaks.append(i)
            i = k + 1
        else:
            i += 1
    return np.asarray(peaks, dtype=int)


def fit_damping_rate(t, energy, window=(5.0, 35.0)) -> float:
    """Slope of the least-squares line through ``(t_peak, 0.5 * log E_peak)``.

    Parameters
    ----------
    t, energy : array_like
        Time series of the electric energy.
    window : (float, float)
        Closed time interval searched for peaks.

    Returns
    -------
    float
        Damping (negative) or growth (positive) rate of the field amplitude.
        A constant series returns 0.
    """
    t = np.asarray(t, dtype=float)
    e = np.asarray(energy, dtype=float)
    if t.shape != e.shape:
        raise ValueError("t and energy must have the same length")
    sel = (t >= window[0]) & (t <= window[1])
    tw, ew = t[sel], e[sel]
    if tw.size and np.all(ew == ew[0]):
        return 0.0
    idx = find_peaks(ew)
    if idx.size < 3:
        raise ValueError(f"need at least 3 energy peaks in window {window}, found {idx.size}")
    if np.any(ew[idx] <= 0):
        raise ValueError("energy peaks must be positive")
    slope, _ = np.polyfit(tw[idx], 0.5 * np.log(ew[idx]), 1)
    return float(slope)


def convergence_order(h, err) -> float:
    """Least-squares slope of ``log err`` against ``log h``."""
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    if h.size < 2 or h.shape != err.shape:
        raise ValueError("need at least two (h, error) pairs")
    if np.any(h <= 0) or np.any(err <= 0):
        raise ValueError("step sizes and errors must be positive")
    slope, _ = np.polyfit(np.log(h), np.log(err), 1)
    return float(slope)
