"""Time loop tying a model configuration to the projector-splitting sweeps."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Optional

import numpy as np

from .diagnostics import effective_ranks, electric_energy, relative_error
from .kinetic_discretization import moments_of
from .models import FieldState, ModelConfig, exact_solution, initial_conditions, pre_step, time_step_rule
from .projector_splitting import lie_step, strang_step

__all__ = ["Simulation", "Snapshot", "fit_step"]


def fit_step(t_final: float, dt: float):
    """Largest step ``<= dt`` that divides ``t_final``; returns ``(dt, n_steps)``."""
    n = max(1, math.ceil(t_final / dt - 1e-9))
    return t_final / n, n


@dataclass
class Snapshot:
    """Diagnostics at one output time."""

    step: int
    t: float
    energy: float
    R1: Optional[int]
    R2: Optional[int]
    mass: float
    relative_error: Optional[float]
    x: np.ndarray
    n: np.ndarray
    u1: np.ndarray
    T: np.ndarray


class Simulation:
    """Advance a :class:`ModelConfig` from its initial state to ``t_final``.

    Parameters
    ----------
    cfg : ModelConfig
    delta : float
        Singular-value threshold for effective ranks.
    ranks, error : bool
        Whether snapshots compute effective ranks and the error against the
        exact solution (when one is known).
    """

    def __init__(self, cfg: ModelConfig, delta: float = 1e-5, ranks: bool = True, error: bool = True):
        self.cfg = cfg
        self.delta = delta
        self.track_ranks = ranks
        self.track_error = error
        self.state: FieldState = initial_conditions(cfg)
        self.dt, self.n_steps = fit_step(cfg.t_final, time_step_rule(cfg, self.state))
        self.step_index = 0
        self._sweep = strang_step if cfg.order == 2 else lie_step

    def step(self) -> None:
        k = self.step_index
        state, prop = pre_step(self.cfg, self.state, self.dt, step=k)
        fld = self._sweep(state.field, prop, self.dt, step=k)
        # the integer step count fixes the clock; avoids drift from repeated sums
        fld.t = (k + 1) * self.dt
        E = state.E_next if state.E_next is not None else state.E
        self.state = FieldState(field=fld, E=E)
        self.step_index = k + 1

    def snapshot(self) -> Snapshot:
        cfg = self.cfg
        f = self.state.field.tensor()
        m = moments_of(f, cfg.vgrid)
        dx = 1.0 if cfg.homogeneous else cfg.sgrid.dx
        mass = float(np.sum(m.n) * dx)
        if self.state.E is not None:
            energy = electric_energy(self.state.E, cfg.sgrid.dx)
        else:
            energy = 0.5 * float(np.sum(m.energy) * dx)
        R1, R2 = effective_ranks(self.state.field, self.delta) if self.track_ranks else (None, None)
        exact = exact_solution(cfg, self.state.t) if self.track_error else None
        err = None if exact is None else float(relative_error(f[0], exact))
        x = np.zeros(1) if cfg.homogeneous else cfg.sgrid.points
        return Snapshot(self.step_index, self.state.t, energy, R1, R2, mass, err,
                        x, m.n, m.u[..., 0], m.T)

    def iter_outputs(self, cadence: int = 1) -> Iterator[Snapshot]:
        """Yield a snapshot at step 0, every ``cadence`` steps and at the end."""
        if cadence < 1:
            raise ValueError("cadence must be >= 1")
        yield self.snapshot()
        while self.step_index < self.n_steps:
            self.step()
            if self.step_index % cadence == 0 or self.step_index == self.n_steps:
                yield self.snapshot()

    def run(self, cadence: int = 1, callback: Optional[Callable[[Snapshot], None]] = None):
        """Run to ``t_final``; return the list of snapshots."""
        out = []
        for snap in self.iter_outputs(cadence):
            out.append(snap)
            if callback is not None:
                callback(snap)
        return out
