import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _helpers import full_sum, rel
from ttkinetic import reference as ref
from ttkinetic.kinetic_discretization import (
    DegenerateStateError,
    SpatialGrid,
    VelocityGrid,
    apply_diffusion,
    apply_fokker_planck,
    apply_upwind_v1,
    apply_upwind_x,
    maxwellian_tt,
    moments_of,
    upwind_x_stencil,
)
from ttkinetic.models import bgk_exact_tt, initial_trains, benchmark_config
from ttkinetic.tt_core import TensorTrain3, tt_scale, tt_sum_all, tt_to_full

RNG = np.random.default_rng


def _phi(z):
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def truncated_gaussian_moments(u, T, a, b):
    """Mass, mean and variance of a unit 1D Gaussian ``N(u, T)`` restricted to ``[a, b]``."""
    s = math.sqrt(T)
    al, be = (a - u) / s, (b - u) / s
    pdf = lambda z: math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)  # noqa: E731
    Z = _phi(be) - _phi(al)
    mean = u + s * (pdf(al) - pdf(be)) / Z
    var = T * (1 + (al * pdf(al) - be * pdf(be)) / Z - ((pdf(al) - pdf(be)) / Z) ** 2)
    return Z, mean, var


# ---------------------------------------------------------------------- grids


def test_velocity_grid_cell_centred():
    g = VelocityGrid(-8, 8, 64)
    assert g.dv == 0.25
    assert g.points[0] == -8 + 0.125 and g.points[-1] == 8 - 0.125
    assert abs(g.points.sum()) < 1e-12
    assert g.max_abs == 8 - 0.125
    with pytest.raises(ValueError):
        VelocityGrid(1, 1, 4)


def test_spatial_grid():
    s = SpatialGrid(4 * math.pi, 128)
    assert np.all(np.diff(s.points) > 0)
    assert s.points[0] == pytest.approx(s.dx / 2)


# ----------------------------------------------------------------- Maxwellian


def test_maxwellian_moments_standard():
    g = VelocityGrid(-8, 8, 64)
    m = moments_of(maxwellian_tt(1.0, (0, 0, 0), 1.0, g), g)
    assert abs(m.n - 1) < 1e-8 and np.all(np.abs(m.u) < 1e-8) and abs(m.T - 1) < 1e-8


def test_maxwellian_moments_shifted():
    g = VelocityGrid(-8, 8, 64)
    m = moments_of(maxwellian_tt(1.5, (0.2, 0, 0), 0.75, g), g)
    assert abs(m.n - 1.5) < 1e-8
    assert np.allclose(m.u, (0.2, 0, 0), atol=1e-8, rtol=0)
    assert abs(m.T - 0.75) < 1e-8
    assert m.J1 == pytest.approx(-1.5 * 0.2, abs=1e-8)


def test_maxwellian_linear_in_density():
    g = VelocityGrid(-4, 4, 8)
    a = maxwellian_tt(2.0, (0.1, 0.2, 0.3), 0.9, g)
    b = tt_scale(2.0, maxwellian_tt(1.0, (0.1, 0.2, 0.3), 0.9, g))
    assert rel(tt_to_full(a), tt_to_full(b)) < 1e-13
    assert a.rank == (1, 1) and np.all(tt_to_full(a) > 0)


def test_maxwellian_rejects_nonpositive():
    g = VelocityGrid(-4, 4, 8)
    with pytest.raises(DegenerateStateError):
        maxwellian_tt(0.0, (0, 0, 0), 1.0, g)
    with pytest.raises(DegenerateStateError):
        maxwellian_tt(1.0, (0, 0, 0), -1.0, g)


HOT = dict(u=(1.0, -0.5, 1.0), T=19 / 4)


def test_hot_maxwellian_matches_truncated_gaussian():
    # the domain cuts the T = 19/4 Gaussian at ~3.2 standard deviations: the
    # discrete moments are those of the truncated Gaussian (midpoint rule)
    g = VelocityGrid(-8, 8, 256)
    m = moments_of(maxwellian_tt(1.0, HOT["u"], HOT["T"], g), g)
    parts = [truncated_gaussian_moments(u, HOT["T"], -8, 8) for u in HOT["u"]]
    n = np.prod([p[0] for p in parts])
    mean = [p[1] for p in parts]
    T = np.mean([p[2] for p in parts])  # product density: T is the mean per-direction variance
    # midpoint-rule end corrections are O(dv^2 f'(boundary)) ~ 1e-6 here
    assert abs(m.n - n) < 1e-6
    np.testing.assert_allclose(m.u, mean, atol=5e-6)
    assert abs(m.T - T) < 5e-5


@pytest.mark.xfail(strict=True, reason="domain truncation at [-8,8]: tail mass 1.7e-3 for T=19/4")
def test_hot_maxwellian_recovers_parameters_to_1e6():
    g = VelocityGrid(-8, 8, 256)
    m = moments_of(maxwellian_tt(1.0, HOT["u"], HOT["T"], g), g)
    assert abs(m.n - 1) < 1e-6 and np.allclose(m.u, HOT["u"], atol=1e-6) and abs(m.T - HOT["T"]) < 1e-6


def test_two_gaussian_initial_moments():
    cfg = benchmark_config("bgk_homog", n_v=64)
    m = moments_of(initial_trains(cfg), cfg.vgrid)
    assert abs(m.n[0] - 1) < 1e-6
    np.testing.assert_allclose(m.u[0], HOT["u"], atol=2e-6)
    assert abs(m.T[0] - HOT["T"]) < 1e-5  # tail of the T=1 components beyond 5 std


def test_moments_of_zero_is_degenerate():
    g = VelocityGrid(-4, 4, 8)
    m = moments_of(TensorTrain3.zeros((8, 8, 8)), g)
    assert m.n == 0 and m.degenerate
    with pytest.raises(DegenerateStateError):
        m.check(t=0.0, step=0)


def test_moments_batched_match_dense():
    g = VelocityGrid(-3, 3, 6)
    f = TensorTrain3.random((6, 6, 6), (2, 3), RNG(0), batch=(4,))
    F = tt_to_full(f)
    v = g.points
    m = moments_of(f, g)
    w = g.dv**3
    np.testing.assert_allclose(m.n, F.sum(axis=(1, 2, 3)) * w, rtol=1e-12)
    e = np.einsum("jabc,a->j", F, v * v) + np.einsum("jabc,b->j", F, v * v) + np.einsum("jabc,c->j", F, v * v)
    np.testing.assert_allclose(m.energy, e * w, rtol=1e-12)
    np.testing.assert_allclose(m.J1, -np.einsum("jabc,a->j", F, v) * w, rtol=1e-12)


# ------------------------------------------------------------------ diffusion


def test_diffusion_kills_constants():
    g = VelocityGrid(-2, 2, 6)
    ones = TensorTrain3.rank1(np.ones(6), np.ones(6), np.ones(6))
    assert not np.any(full_sum(apply_diffusion(ones, g, 1.3)))


def test_diffusion_structure_and_mass():
    g = VelocityGrid(-2, 2, 7)
    f = TensorTrain3.random((7, 7, 7), (2, 3), RNG(1))
    terms = apply_diffusion(f, g, 0.8)
    assert len(terms) == 3 and terms.max_term_rank == max(f.rank)
    assert abs(sum(tt_sum_all(t) for t in terms)) <= 1e-12 * np.linalg.norm(tt_to_full(f))


@pytest.mark.parametrize("mode", [1, 2, 5])
def test_diffusion_eigenvalue(mode):
    n, eta = 8, 0.7
    g = VelocityGrid(-3, 5, n)
    # zero-flux eigenvectors: cos(pi m (k - 1/2) / N)
    e = np.cos(np.pi * mode * (np.arange(1, n + 1) - 0.5) / n)
    f = TensorTrain3.rank1(e, np.ones(n), np.ones(n))
    lam = -(4 * eta / g.dv**2) * math.sin(math.pi * g.dv * mode / (2 * (g.v_max - g.v_min))) ** 2
    got = full_sum(apply_diffusion(f, g, eta))
    assert rel(got, lam * tt_to_full(f)) < 1e-10
    assert rel(got, ref.dense_diffusion(tt_to_full(f), g.dv, eta)) < 1e-12


# ------------------------------------------------------------- Fokker-Planck


def fp_loop(F, m, dv, scale):
    """Flux form written out with explicit loops (one weight per direction)."""
    n = F.shape[0]
    M = np.einsum("a,b,c->abc", *m)
    G = F / M
    out = np.zeros_like(F)
    for ax in range(3):
        for idx in np.ndindex(F.shape):
            k = idx[ax]
            # F[k+1/2] - F[k-1/2] = sum over both neighbours of w (G[nb] - G[k])
            for nb in (k + 1, k - 1):
                if not 0 <= nb < n:
                    continue  # zero boundary flux
                j = list(idx)
                j[ax] = nb
                j = tuple(j)
                w = 0.5 * (M[idx] + M[j])
                out[idx] += w * (G[j] - G[idx])
    return scale * out / dv**2


def test_fokker_planck_matches_loop_oracle():
    rng = RNG(2)
    g = VelocityGrid(-3, 3, 8)
    f = TensorTrain3.random((8, 8, 8), (2, 2), rng)
    M = maxwellian_tt(1.2, (0.3, -0.2, 0.1), 0.8, g)
    m = [M.core1[:, 0], M.core2[0, :, 0], M.core3[0, :]]
    got = full_sum(apply_fokker_planck(f, M, g, 0.6))
    want = fp_loop(tt_to_full(f), m, g.dv, 0.6)
    assert np.max(np.abs(got - want)) <= 1e-11 * np.max(np.abs(want))
    assert rel(ref.dense_fokker_planck(tt_to_full(f), m, g.dv, 0.6), want) < 1e-12


def test_fokker_planck_equilibrium_is_exact():
    g = VelocityGrid(-6, 6, 16)
    M = maxwellian_tt(0.9, (0.4, 0.0, -0.3), 1.3, g)
    out = full_sum(apply_fokker_planck(M, M, g, 1.0))
    assert np.max(np.abs(out)) <= 1e-14 * np.linalg.norm(tt_to_full(M))


def test_fokker_planck_mass_and_rank():
    rng = RNG(3)
    g = VelocityGrid(-4, 4, 8)
    f = TensorTrain3.random((8, 8, 8), (3, 2), rng)
    M = maxwellian_tt(1.0, (0, 0, 0), 1.0, g)
    terms = apply_fokker_planck(f, M, g, 2.0)
    assert terms.max_term_rank == max(f.rank)
    assert abs(sum(tt_sum_all(t) for t in terms)) <= 1e-12 * np.linalg.norm(tt_to_full(f))


def test_fokker_planck_rejects_bad_weight():
    g = VelocityGrid(-2, 2, 4)
    f = TensorTrain3.random((4, 4, 4), (2, 2), RNG(4))
    with pytest.raises(ValueError, match="rank"):
        apply_fokker_planck(f, f, g)
    neg = TensorTrain3.rank1(-np.ones(4), np.ones(4), np.ones(4))
    with pytest.raises(ValueError, match="positive"):
        apply_fokker_planck(f, neg, g)


# ---------------------------------------------------------------- upwind in x


def upwind_x_loop(F, v, dx):
    n_x = F.shape[0]
    out = np.zeros_like(F)
    for j in range(n_x):
        f = lambda s: F[(j + s) % n_x]  # noqa: E731
        for k, vk in enumerate(v):
            vp, vm = max(vk, 0.0), max(-vk, 0.0)
            out[j, k] = (vp * (3 * f(0)[k] - 4 * f(-1)[k] + f(-2)[k])
                         - vm * (-f(2)[k] + 4 * f(1)[k] - 3 * f(0)[k])) / (2 * dx)
    return out


def test_upwind_x_constant_in_space_vanishes():
    g = VelocityGrid(-3, 3, 6)
    f = TensorTrain3.random((6, 6, 6), (2, 2), RNG(5))
    st_ = [f] * 5
    out = full_sum(apply_upwind_x(st_, g, 0.1))
    assert np.max(np.abs(out)) <= 1e-14 * np.max(np.abs(tt_to_full(f))) / 0.1
    assert len(apply_upwind_x(st_, g, 0.1)) == 5


def test_upwind_x_fourier_mode_matches_loop():
    g = VelocityGrid(-3, 3, 6)
    sg = SpatialGrid(2 * np.pi, 8)
    x = sg.points
    rng = RNG(6)
    G = TensorTrain3.random((6, 6, 6), (2, 2), rng)
    # real form of exp(i kappa x) g(v): cos part and sin part, rank 2 in total
    c = np.cos(2 * x)
    s = np.sin(2 * x)
    trains = TensorTrain3.stack([tt_scale(c[j], G) for j in range(8)])
    trains2 = TensorTrain3.stack([tt_scale(s[j], G) for j in range(8)])
    for f in (trains, trains2):
        got = full_sum(apply_upwind_x(upwind_x_stencil(f), g, sg.dx))
        want = upwind_x_loop(tt_to_full(f), g.points, sg.dx)
        assert np.max(np.abs(got - want)) <= 1e-11 * np.max(np.abs(want))
        assert rel(ref.dense_transport_x(tt_to_full(f), g.points, sg.dx), want) < 1e-12


def test_upwind_x_even_in_v1_uniform_in_x():
    g = VelocityGrid(-3, 3, 6)
    e = np.exp(-g.points**2)
    f = TensorTrain3.rank1(np.tile(e, (4, 1)), np.ones((4, 6)), np.ones((4, 6)))
    out = full_sum(apply_upwind_x(upwind_x_stencil(f), g, 0.5))
    assert np.max(np.abs(out)) < 1e-14
    assert np.max(np.abs(ref.dense_transport_x(tt_to_full(f), g.points, 0.5))) < 1e-14


# --------------------------------------------------------------- upwind in v1


def upwind_v_loop(F, E, dv):
    n = F.shape[0]
    fz = lambda k: F[k] if 0 <= k < n else np.zeros_like(F[0])  # noqa: E731
    out = np.zeros_like(F)
    ep, em = max(E, 0.0), max(-E, 0.0)
    for k in range(n):
        out[k] = (ep * (-fz(k + 2) + 4 * fz(k + 1) - 3 * fz(k)) - em * (3 * fz(k) - 4 * fz(k - 1) + fz(k - 2))) / (2 * dv)
    return out


def test_upwind_v1_zero_field():
    g = VelocityGrid(-3, 3, 8)
    f = TensorTrain3.random((8, 8, 8), (2, 2), RNG(7))
    assert not np.any(full_sum(apply_upwind_v1(f, 0.0, g)))


@pytest.mark.parametrize("E", [0.7, -0.7])
def test_upwind_v1_matches_loop(E):
    g = VelocityGrid(-3, 3, 8)
    f = TensorTrain3.random((8, 8, 8), (2, 3), RNG(8))
    terms = apply_upwind_v1(f, E, g)
    assert terms.max_term_rank == max(f.rank)
    got = full_sum(terms)
    want = upwind_v_loop(tt_to_full(f), E, g.dv)
    assert np.max(np.abs(got - want)) <= 1e-11 * np.max(np.abs(want))


def test_upwind_v1_constant_profile_interior():
    g = VelocityGrid(-3, 3, 8)
    f = TensorTrain3.rank1(np.ones(8), np.linspace(1, 2, 8), np.ones(8))
    got = full_sum(apply_upwind_v1(f, 1.0, g))
    assert np.max(np.abs(got[2:-2])) < 1e-14
    want = upwind_v_loop(tt_to_full(f), 1.0, g.dv)
    assert rel(got, want) < 1e-12 and np.any(got[-2:])


def test_upwind_v1_batched_field_sign_split():
    g = VelocityGrid(-3, 3, 6)
    f = TensorTrain3.random((6, 6, 6), (2, 2), RNG(9), batch=(3,))
    E = np.array([0.5, -1.5, 0.0])
    got = full_sum(apply_upwind_v1(f, E, g))
    F = tt_to_full(f)
    for j in range(3):
        assert rel(got[j], upwind_v_loop(F[j], E[j], g.dv)) < 1e-12


# ----------------------------------------------------------------- properties


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-2, 2), st.floats(-2, 2))
def test_property_operators_linear(seed, a, b):
    rng = RNG(seed)
    g = VelocityGrid(-3, 3, 6)
    f1 = TensorTrain3.random((6, 6, 6), (2, 2), rng, batch=(4,))
    f2 = TensorTrain3.random((6, 6, 6), (2, 2), rng, batch=(4,))
    M = maxwellian_tt(np.full(4, 1.0), np.zeros((4, 3)), np.full(4, 1.1), g)
    E = rng.normal(size=4)
    ops = [
        lambda f: apply_diffusion(f, g, 0.9),
        lambda f: apply_fokker_planck(f, M, g, 0.5),
        lambda f: apply_upwind_x(upwind_x_stencil(f), g, 0.3),
        lambda f: apply_upwind_v1(f, E, g),
    ]
    combo = TensorTrain3(np.concatenate([a * f1.core1, b * f2.core1], -1),
                         np.zeros((4, 4, 6, 4)), np.concatenate([f1.core3, f2.core3], -2))
    combo.core2[:, :2, :, :2] = f1.core2
    combo.core2[:, 2:, :, 2:] = f2.core2
    for op in ops:
        lhs = full_sum(op(combo))
        rhs = a * full_sum(op(f1)) + b * full_sum(op(f2))
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(np.max(np.abs(rhs)), 1.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_property_collision_operators_conserve_mass(seed):
    rng = RNG(seed)
    n = int(rng.integers(3, 9))
    g = VelocityGrid(-4, 4, n)
    f = TensorTrain3.random((n, n, n), (int(rng.integers(1, 4)), int(rng.integers(1, 4))), rng)
    M = maxwellian_tt(rng.uniform(0.5, 2), rng.normal(size=3) * 0.5, rng.uniform(0.5, 2), g)
    norm = np.linalg.norm(tt_to_full(f))
    for terms in (apply_diffusion(f, g, rng.uniform(0.1, 2)), apply_fokker_planck(f, M, g, rng.uniform(0.1, 2))):
        assert abs(sum(tt_sum_all(t) for t in terms)) <= 1e-12 * norm


def test_bgk_exact_solution_relaxes_to_truncated_maxwellian():
    cfg = benchmark_config("bgk_homog", n_v=256)
    g = cfg.vgrid
    m = moments_of(bgk_exact_tt(cfg, 5.0), g)
    n_M = np.prod([truncated_gaussian_moments(u, HOT["T"], -8, 8)[0] for u in HOT["u"]])
    n_f0 = moments_of(initial_trains(cfg), g).n[0]
    d = math.exp(-5.0)
    assert abs(m.n - ((1 - d) * n_M + d * n_f0)) < 1e-6


@pytest.mark.xfail(strict=True, reason="domain truncation at [-8,8]: the relaxed state inherits M's tail loss")
def test_bgk_exact_solution_moments_to_1e6():
    cfg = benchmark_config("bgk_homog", n_v=256)
    m = moments_of(bgk_exact_tt(cfg, 5.0), cfg.vgrid)
    assert abs(m.n - 1) < 1e-6 and np.allclose(m.u, HOT["u"], atol=1e-6) and abs(m.T - HOT["T"]) < 1e-6
