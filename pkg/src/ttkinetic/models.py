"""Concrete kinetic models as propagator pairs, with their data and exact solutions.

Supported model ids:

``bgk_homog``   spatially homogeneous BGK relaxation (Euler/Lie or Heun/Strang)
``heat``        3D heat equation in velocity
``linear_fp``   linear Fokker-Planck with fixed weight exp(-|v|^2/2)
``bgk_1d3v``    1D3V transport + stiff BGK, IMEX with a moment predictor
``fp_1d3v``     1D3V transport + kinetic Fokker-Planck, forward Euler
``vafp``        Vlasov-Ampere-Fokker-Planck (Landau damping, two-stream)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .kinetic_discretization import (
    DegenerateStateError,
    MomentSet,
    SpatialGrid,
    VelocityGrid,
    apply_diffusion,
    apply_fokker_planck,
    apply_upwind_v1,
    apply_upwind_x,
    maxwellian_tt,
    moments_of,
    upwind_x_stencil,
    velocity_moments,
)
from .projector_splitting import PropagatorPair, RhsTerms, SpatialTTField
from .tt_core import TensorTrain3, orthonormalize_right, tt_add, tt_rank_pad, tt_scale

__all__ = [
    "MODELS",
    "SCHEMES",
    "ModelConfig",
    "FieldState",
    "benchmark_config",
    "bgk_homog_maxwellian",
    "bgk_homog_propagators",
    "bgk_exact_tt",
    "heat_propagators",
    "heat_exact",
    "fp_weight",
    "linear_fp_propagators",
    "fp_exact",
    "exact_solution",
    "upwind_moment_flux",
    "moment_predictor_bgk",
    "imex_variant",
    "bgk_1d3v_propagators",
    "fp_1d3v_propagators",
    "vafp_prestep",
    "vafp_propagators",
    "initial_trains",
    "initial_conditions",
    "initial_electric_field",
    "solve_gauss",
    "time_step_rule",
    "pre_step",
]

MODELS = ("bgk_homog", "heat", "linear_fp", "bgk_1d3v", "fp_1d3v", "vafp")
SCHEMES = ("euler", "heun", "imex", "imex_imex", "imex_euler")
# automatic IMEX choice: the 1/(1 - dt eta) backward map is avoided from here on
IMEX_EULER_THRESHOLD = 0.5
DT_RULES = ("fixed", "heat", "linear_fp", "fp_1d3v", "vafp")
_HOMOGENEOUS = ("bgk_homog", "heat", "linear_fp")

# initial-condition parameters used when a config leaves them out
_IC_DEFAULTS = {
    "bgk_homog": dict(n1=0.5, u1=(-1.0, 2.0, 0.0), T1=1.0, n2=0.5, u2=(3.0, -3.0, 2.0), T2=1.0),
    "heat": dict(A1=1 / 3, u1=(1.0, 2.0, -1.0), beta1=1.0, A2=2 / 3, u2=(3.0, -1.0, -2.0), beta2=1.5),
    "linear_fp": dict(),
    "bgk_1d3v": dict(u0=(0.2, 0.0, 0.0)),
    "fp_1d3v": dict(u0=(0.2, 0.0, 0.0)),
    "vafp": dict(kind="landau", A=0.001, kappa=0.5, v_star=2.4),
}


@dataclass
class ModelConfig:
    """Everything needed to set up and advance one model."""

    model: str
    eta: float = 1.0
    v_min: float = -8.0
    v_max: float = 8.0
    n_v: int = 64
    length: float = 1.0
    n_x: int = 1
    rank: tuple = (5, 5)
    t_final: float = 1.0
    dt: Optional[float] = None
    dt_rule: str = "fixed"
    cfl_safety: Optional[float] = None
    collision_number: float = 6.0
    scheme: str = "euler"
    ic: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.dt_rule not in DT_RULES:
            raise ValueError(f"unknown dt_rule {self.dt_rule!r}; expected one of {DT_RULES}")
        self.rank = tuple(int(r) for r in self.rank)
        if len(self.rank) != 2 or min(self.rank) < 1:
            raise ValueError(f"rank must be two integers >= 1, got {self.rank}")
        if self.dt_rule == "fixed" and not (self.dt is not None and self.dt > 0):
            raise ValueError("dt_rule 'fixed' needs dt > 0")
        if self.t_final <= 0:
            raise ValueError("t_final must be positive")
        if self.model in _HOMOGENEOUS and self.n_x != 1:
            raise ValueError(f"model {self.model} is spatially homogeneous; n_x must be 1")
        if self.model == "bgk_homog" and self.scheme not in ("euler", "heun"):
            raise ValueError("bgk_homog supports schemes 'euler' and 'heun'")
        if self.model == "bgk_1d3v":
            if self.scheme not in ("imex", "imex_imex", "imex_euler"):
                raise ValueError("bgk_1d3v supports schemes 'imex', 'imex_imex' and 'imex_euler'")
            if self.scheme == "imex_imex" and self.dt is not None and math.isclose(self.dt * self.eta, 1.0):
                raise ValueError("imex_imex backward map is singular at dt*eta = 1")
        elif self.model not in ("bgk_homog",) and self.scheme != "euler":
            raise ValueError(f"model {self.model} supports scheme 'euler' only")
        unknown = set(self.ic) - set(_IC_DEFAULTS[self.model])
        if unknown:
            raise ValueError(f"unknown initial-condition keys for {self.model}: {sorted(unknown)}; "
                             f"allowed: {sorted(_IC_DEFAULTS[self.model])}")
        self.ic = {**_IC_DEFAULTS[self.model], **self.ic}

    @property
    def vgrid(self) -> VelocityGrid:
        return VelocityGrid(self.v_min, self.v_max, self.n_v)

    @property
    def sgrid(self) -> SpatialGrid:
        return SpatialGrid(self.length, self.n_x)

    @property
    def homogeneous(self) -> bool:
        return self.model in _HOMOGENEOUS

    @property
    def order(self) -> int:
        return 2 if self.scheme == "heun" else 1


def benchmark_config(name: str, **overrides) -> ModelConfig:
    """Standard benchmark setups by name; keyword overrides replace any field."""
    presets = {
        "bgk_homog": dict(model="bgk_homog", eta=1.0, v_min=-8, v_max=8, n_v=256, t_final=5.0,
                          dt=1 / 32, scheme="euler"),
        "heat": dict(model="heat", eta=1.0, v_min=-16, v_max=16, n_v=64, t_final=5.0,
                     dt_rule="heat"),
        "linear_fp": dict(model="linear_fp", v_min=-8, v_max=8, n_v=64, t_final=1.0,
                          dt_rule="linear_fp"),
        "bgk_1d3v": dict(model="bgk_1d3v", eta=1e5, v_min=-6, v_max=6, n_v=64, length=1.0,
                         n_x=64, t_final=0.1, dt=1e-3, scheme="imex"),
        "fp_1d3v": dict(model="fp_1d3v", eta=1.0, v_min=-6, v_max=6, n_v=64, length=1.0,
                        n_x=64, t_final=0.1, dt_rule="fp_1d3v"),
        "landau": dict(model="vafp", eta=0.0, v_min=-9, v_max=9, n_v=128, length=4 * math.pi,
                       n_x=128, t_final=40.0, dt_rule="vafp",
                       ic=dict(kind="landau", A=0.001, kappa=0.5)),
        "two_stream": dict(model="vafp", eta=0.0, v_min=-9, v_max=9, n_v=128, length=10 * math.pi,
                           n_x=128, t_final=45.0, dt_rule="vafp",
                           ic=dict(kind="two_stream", A=0.005, kappa=0.2, v_star=2.4)),
    }
    base = dict(presets[name])
    ic = {**base.pop("ic", {}), **overrides.pop("ic", {})}
    base.update(overrides)
    return ModelConfig(ic=ic, **base)


@dataclass
class FieldState:
    """Solver state plus the per-step macroscopic data the propagators need."""

    field: SpatialTTField
    E: Optional[np.ndarray] = None  # E1 per spatial point at the field's time
    moments: Optional[MomentSet] = None
    maxwellian: Optional[TensorTrain3] = None
    E_next: Optional[np.ndarray] = None

    @property
    def t(self) -> float:
        return self.field.t


# ------------------------------------------------------------ homogeneous


def _gaussian_tt(amp, u, var, grid: VelocityGrid) -> TensorTrain3:
    v = grid.points
    g = [np.exp(-((v - u[i]) ** 2) / (2.0 * var)) for i in range(3)]
    return TensorTrain3.rank1(amp * g[0], g[1], g[2])


def bgk_homog_maxwellian(cfg: ModelConfig) -> TensorTrain3:
    """Maxwellian of the combined moments of the two-Maxwellian initial state."""
    p = cfg.ic
    n1, n2 = p["n1"], p["n2"]
    u1, u2 = np.asarray(p["u1"], float), np.asarray(p["u2"], float)
    n = n1 + n2
    u = (n1 * u1 + n2 * u2) / n
    T = (n1 * p["T1"] + n2 * p["T2"] + (n1 * np.sum((u1 - u) ** 2) + n2 * np.sum((u2 - u) ** 2)) / 3.0) / n
    return maxwellian_tt(n, u, T, cfg.vgrid)


def _bgk_homog_f0(cfg: ModelConfig) -> TensorTrain3:
    p = cfg.ic
    g = cfg.vgrid
    return tt_add(maxwellian_tt(p["n1"], p["u1"], p["T1"], g), maxwellian_tt(p["n2"], p["u2"], p["T2"], g))


def bgk_homog_propagators(cfg: ModelConfig, M: Optional[TensorTrain3] = None) -> PropagatorPair:
    """Forward/backward Euler (order 1) or Heun (order 2) maps for BGK relaxation."""
    eta = cfg.eta
    if M is None:
        M = bgk_homog_maxwellian(cfg)

    def batched_M(f):
        return _broadcast(M, f)

    if cfg.scheme == "euler":
        def forward(f, dt):
            a = dt * eta
            return RhsTerms([tt_scale(1.0 - a, f), tt_scale(a, batched_M(f))])

        def backward(f, dt):
            a = dt * eta
            return RhsTerms([tt_scale(1.0 + a, f), tt_scale(-a, batched_M(f))])

        return PropagatorPair(forward, backward, order=1)

    # Heun: f° = f ± a (M - f), then average; written out as f and M coefficients
    def forward(f, dt):
        a = dt * eta
        return RhsTerms([tt_scale(0.5 * (1.0 + (1.0 - a) ** 2), f),
                         tt_scale(0.5 * (a * (1.0 - a) + a), batched_M(f))])

    def backward(f, dt):
        a = dt * eta
        return RhsTerms([tt_scale(0.5 * (1.0 + (1.0 + a) ** 2), f),
                         tt_scale(-0.5 * (a * (1.0 + a) + a), batched_M(f))])

    return PropagatorPair(forward, backward, order=2)


def bgk_exact_tt(cfg: ModelConfig, t: float) -> TensorTrain3:
    """``(1 - e^{-eta t}) M + e^{-eta t} f0`` as a rank-(3,3) train."""
    decay = math.exp(-cfg.eta * t)
    return tt_add(tt_scale(1.0 - decay, bgk_homog_maxwellian(cfg)), tt_scale(decay, _bgk_homog_f0(cfg)))


def heat_propagators(cfg: ModelConfig) -> PropagatorPair:
    """Forward/backward Euler with the discrete Laplacian."""
    g = cfg.vgrid

    def forward(f, dt):
        return (RhsTerms([f]) + _scaled(apply_diffusion(f, g, cfg.eta), dt)).compact()

    def backward(f, dt):
        return (RhsTerms([f]) + _scaled(apply_diffusion(f, g, cfg.eta), -dt)).compact()

    return PropagatorPair(forward, backward, order=1)


def heat_exact(cfg: ModelConfig, t: float) -> TensorTrain3:
    """Two spreading Gaussians, rank (2,2)."""
    p = cfg.ic
    parts = []
    for i in (1, 2):
        A, beta, u = p[f"A{i}"], p[f"beta{i}"], np.asarray(p[f"u{i}"], float)
        s = 1.0 + 4.0 * cfg.eta * beta * t
        parts.append(_gaussian_tt(A / s**1.5, u, s / (2.0 * beta), cfg.vgrid))
    return tt_add(*parts)


def fp_weight(grid: VelocityGrid) -> TensorTrain3:
    """``exp(-|v|^2 / 2)`` as a rank-(1,1) train."""
    m = np.exp(-0.5 * grid.points**2)
    return TensorTrain3.rank1(m, m, m)


def linear_fp_propagators(cfg: ModelConfig) -> PropagatorPair:
    g = cfg.vgrid
    M = fp_weight(g)

    def op(f):
        return apply_fokker_planck(f, _broadcast(M, f), g, 1.0)

    def forward(f, dt):
        return (RhsTerms([f]) + _scaled(op(f), dt)).compact()

    def backward(f, dt):
        return (RhsTerms([f]) + _scaled(op(f), -dt)).compact()

    return PropagatorPair(forward, backward, order=1)


def fp_exact(cfg: ModelConfig, t: float) -> TensorTrain3:
    """Gaussian with variance ``1 - exp(-2t - 1)``."""
    var = 1.0 - math.exp(-2.0 * t - 1.0)
    return _gaussian_tt((2.0 * math.pi * var) ** -1.5, np.zeros(3), var, cfg.vgrid)


def exact_solution(cfg: ModelConfig, t: float) -> Optional[TensorTrain3]:
    return {"bgk_homog": bgk_exact_tt, "heat": heat_exact, "linear_fp": fp_exact}.get(
        cfg.model, lambda c, t: None)(cfg, t)


# ---------------------------------------------------------- inhomogeneous


def _scaled(terms: RhsTerms, c) -> RhsTerms:
    return RhsTerms([tt_scale(c, t) for t in terms])


def _broadcast(M: TensorTrain3, f: TensorTrain3) -> TensorTrain3:
    if M.batch_shape == f.batch_shape:
        return M
    nb = len(M.batch_shape)
    return TensorTrain3(*(np.broadcast_to(c, f.batch_shape + c.shape[nb:]) for c in M.cores))


def upwind_moment_flux(f: TensorTrain3, vgrid: VelocityGrid, dx: float) -> np.ndarray:
    """Moments ``sum (v1 Dx f)(1, v, |v|^2) dv^3`` per point: shape ``(N_x, 5)``."""
    terms = apply_upwind_x(upwind_x_stencil(f), vgrid, dx)
    return sum(velocity_moments(t, vgrid.points) for t in terms) * vgrid.dv**3


def _conserved(m: MomentSet) -> np.ndarray:
    return np.concatenate([m.n[..., None], m.n[..., None] * m.u, m.energy[..., None]], axis=-1)


def _from_conserved(U: np.ndarray):
    n = U[..., 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = U[..., 1:4] / n[..., None]
        T = (U[..., 4] / n - np.sum(u * u, axis=-1)) / 3.0
    return n, u, T


def moment_predictor_bgk(f: TensorTrain3, vgrid: VelocityGrid, dx: float, dt: float,
                         t=None, step=None):
    """Advance ``U = (n, n u, n|u|^2 + 3 n T)`` by the transport flux and return ``M^{n+1}``.

    Returns ``(M_next, n, u, T)``; raises :class:`DegenerateStateError` if the
    predicted density or temperature is not positive.
    """
    U = _conserved(moments_of(f, vgrid))
    U_next = U - dt * upwind_moment_flux(f, vgrid, dx)
    n, u, T = _from_conserved(U_next)
    MomentSet(n=n, u=u, T=T, J1=-n * u[..., 0], energy=U_next[..., 4]).check(t=t, step=step)
    return maxwellian_tt(n, u, T, vgrid), n, u, T


def _transport(f: TensorTrain3, vgrid: VelocityGrid, dx: float) -> RhsTerms:
    return apply_upwind_x(upwind_x_stencil(f), vgrid, dx)


def imex_variant(cfg: ModelConfig, dt: float) -> str:
    """Backward-map variant actually used: ``'imex'`` picks by the stiffness ``dt * eta``."""
    if cfg.scheme != "imex":
        return cfg.scheme
    return "imex_euler" if dt * cfg.eta >= IMEX_EULER_THRESHOLD else "imex_imex"


def bgk_1d3v_propagators(cfg: ModelConfig, M_next: TensorTrain3, dt: float) -> PropagatorPair:
    """IMEX forward map; IMEX or forward-Euler backward map.

    ``dt`` is the step size and only selects the variant when
    ``cfg.scheme == 'imex'`` (see :func:`imex_variant`).
    """
    vg, dx, eta = cfg.vgrid, cfg.sgrid.dx, cfg.eta

    def forward(f, dt):
        a = dt * eta
        c = 1.0 / (1.0 + a)
        return (RhsTerms([tt_scale(c, f)]) + _scaled(_transport(f, vg, dx), -dt * c)
                + RhsTerms([tt_scale(a * c, M_next)])).compact()

    if imex_variant(cfg, dt) == "imex_imex":
        def backward(f, dt):
            a = dt * eta
            c = 1.0 / (1.0 - a)
            return (RhsTerms([tt_scale(c, f)]) + _scaled(_transport(f, vg, dx), dt * c)
                    + RhsTerms([tt_scale(-a * c, M_next)])).compact()
    else:
        def backward(f, dt):
            a = dt * eta
            return (RhsTerms([tt_scale(1.0 + a, f)]) + _scaled(_transport(f, vg, dx), dt)
                    + RhsTerms([tt_scale(-a, M_next)])).compact()

    return PropagatorPair(forward, backward, order=1)


def fp_1d3v_propagators(cfg: ModelConfig, M_now: TensorTrain3) -> PropagatorPair:
    """Forward Euler transport + Fokker-Planck, Maxwellian frozen over the step."""
    vg, dx, eta = cfg.vgrid, cfg.sgrid.dx, cfg.eta

    def rhs(f, dt):
        terms = _scaled(_transport(f, vg, dx), -dt)
        if eta != 0.0:
            terms = terms + _scaled(apply_fokker_planck(f, M_now, vg, eta), dt)
        return terms

    def forward(f, dt):
        return (RhsTerms([f]) + rhs(f, dt)).compact()

    def backward(f, dt):
        return (RhsTerms([f]) + rhs(f, -dt)).compact()

    return PropagatorPair(forward, backward, order=1)


def vafp_prestep(state: FieldState, cfg: ModelConfig, dt: float, step=None) -> FieldState:
    """Moments of ``f^n``, Ampere update ``E^{n+1} = E^n - dt J^n``, Maxwellian ``M^n``."""
    f = state.field.tensor()
    m = moments_of(f, cfg.vgrid)
    E_next = state.E - dt * m.J1
    M = None
    if cfg.eta != 0.0:
        m.check(t=state.t, step=step)
        M = maxwellian_tt(m.n, m.u, m.T, cfg.vgrid)
    return replace(state, moments=m, maxwellian=M, E_next=E_next)


def vafp_propagators(cfg: ModelConfig, state: FieldState) -> PropagatorPair:
    """Forward Euler for transport in x, E-transport in v1 and ``eta T`` Fokker-Planck."""
    vg, dx, eta = cfg.vgrid, cfg.sgrid.dx, cfg.eta
    E = state.E_next
    field_on = bool(np.any(E != 0.0))
    if eta != 0.0:
        scale = eta * state.moments.T
        M = state.maxwellian

    def rhs(f, dt):
        terms = _scaled(_transport(f, vg, dx), -dt)
        if field_on:
            terms = terms + _scaled(apply_upwind_v1(f, E, vg), dt)
        if eta != 0.0:
            terms = terms + _scaled(apply_fokker_planck(f, M, vg, scale), dt)
        return terms

    def forward(f, dt):
        return (RhsTerms([f]) + rhs(f, dt)).compact()

    def backward(f, dt):
        return (RhsTerms([f]) + rhs(f, -dt)).compact()

    return PropagatorPair(forward, backward, order=1)


# ------------------------------------------------------ initial conditions


def initial_trains(cfg: ModelConfig) -> TensorTrain3:
    """Initial distribution at every spatial point, batched, at its natural rank."""
    vg = cfg.vgrid
    v = vg.points
    p = cfg.ic
    if cfg.model == "bgk_homog":
        f = _bgk_homog_f0(cfg)
    elif cfg.model == "heat":
        f = heat_exact(cfg, 0.0)
    elif cfg.model == "linear_fp":
        f = fp_exact(cfg, 0.0)
    elif cfg.model in ("bgk_1d3v", "fp_1d3v"):
        x = cfg.sgrid.points
        n0 = (2.0 + np.sin(2.0 * np.pi * x)) / 3.0
        T0 = (3.0 + np.cos(2.0 * np.pi * x)) / 4.0
        u0 = np.broadcast_to(np.asarray(p["u0"], float), (cfg.n_x, 3))
        return maxwellian_tt(n0, u0, T0, vg)
    else:  # vafp
        x = cfg.sgrid.points
        A, kappa = p["A"], p["kappa"]
        g = np.exp(-0.5 * v**2)
        if p["kind"] == "landau":
            g1 = g / (2.0 * np.pi) ** 1.5
        elif p["kind"] == "two_stream":
            vs = p["v_star"]
            g1 = (np.exp(-0.5 * (v - vs) ** 2) + np.exp(-0.5 * (v + vs) ** 2)) / (2.0 * (2.0 * np.pi) ** 1.5)
        else:
            raise ValueError(f"unknown vafp initial condition {p['kind']!r}")
        amp = 1.0 + A * np.cos(kappa * x)
        ones = np.ones(cfg.n_x)
        return TensorTrain3.rank1(amp[:, None] * g1, ones[:, None] * g, ones[:, None] * g)
    return _lift(f) if not f.batch_shape else f


def _lift(t: TensorTrain3) -> TensorTrain3:
    return TensorTrain3(t.core1[None], t.core2[None], t.core3[None])


def initial_electric_field(cfg: ModelConfig) -> Optional[np.ndarray]:
    if cfg.model != "vafp":
        return None
    p = cfg.ic
    return -(p["A"] / p["kappa"]) * np.sin(p["kappa"] * cfg.sgrid.points)


def solve_gauss(n: np.ndarray, sgrid: SpatialGrid) -> np.ndarray:
    """Zero-mean periodic solution of ``dE/dx = rho - rho_i`` with ``rho = -n``.

    ``rho_i`` is the spatial mean of ``rho`` (charge neutrality).  Spectral.
    """
    rho = -np.asarray(n, dtype=float)
    rhs = rho - rho.mean()
    k = 2.0 * np.pi * np.fft.fftfreq(sgrid.n_x, d=sgrid.dx)
    hat = np.fft.fft(rhs)
    out = np.zeros_like(hat)
    nz = k != 0
    out[nz] = hat[nz] / (1j * k[nz])
    return np.fft.ifft(out).real


def initial_conditions(cfg: ModelConfig) -> FieldState:
    """Step 0: analytic trains, padded to the working rank, in form I."""
    f0 = initial_trains(cfg)
    if f0.batch_shape == ():
        f0 = _lift(f0)
    f0 = tt_rank_pad(f0, cfg.rank)
    fld = SpatialTTField(orthonormalize_right(f0), 0.0, cfg.sgrid.dx)
    return FieldState(field=fld, E=initial_electric_field(cfg))


def time_step_rule(cfg: ModelConfig, state: Optional[FieldState] = None) -> float:
    """Time step from the configured rule (before fitting to ``t_final``)."""
    vg = cfg.vgrid
    dv = vg.dv
    rule = cfg.dt_rule
    if rule == "fixed":
        return float(cfg.dt)
    if rule in ("heat", "linear_fp"):
        c = cfg.cfl_safety if cfg.cfl_safety is not None else 1.0 / 12.0
        eta = cfg.eta if rule == "heat" else 1.0
        return c * dv**2 / eta
    s = cfg.cfl_safety if cfg.cfl_safety is not None else 0.1
    limits = [cfg.sgrid.dx / vg.max_abs]
    if rule == "vafp":
        E0 = state.E if state is not None and state.E is not None else initial_electric_field(cfg)
        emax = float(np.max(np.abs(E0)))
        if emax > 0:
            limits.append(dv / emax)
    if cfg.eta > 0:
        limits.append(dv**2 / (cfg.collision_number * cfg.eta))
    return s * min(limits)


def pre_step(cfg: ModelConfig, state: FieldState, dt: float, step=None) -> tuple:
    """Per-step precomputation; returns ``(state, propagators)``."""
    m = cfg.model
    if m == "bgk_homog":
        return state, bgk_homog_propagators(cfg)
    if m == "heat":
        return state, heat_propagators(cfg)
    if m == "linear_fp":
        return state, linear_fp_propagators(cfg)
    f = state.field.tensor()
    if m == "bgk_1d3v":
        M_next, *_ = moment_predictor_bgk(f, cfg.vgrid, cfg.sgrid.dx, dt, t=state.t, step=step)
        return replace(state, maxwellian=M_next), bgk_1d3v_propagators(cfg, M_next, dt)
    if m == "fp_1d3v":
        mom = moments_of(f, cfg.vgrid).check(t=state.t, step=step)
        M = maxwellian_tt(mom.n, mom.u, mom.T, cfg.vgrid)
        return replace(state, moments=mom, maxwellian=M), fp_1d3v_propagators(cfg, M)
    state = vafp_prestep(state, cfg, dt, step=step)
    return state, vafp_propagators(cfg, state)
