import numpy as np
import pytest

from rvml.compat import preset_initial_data
from rvml.driver import (IterationConfig, MirrorConfig, StepCoefficients, energy_functionals,
                         energy_identity_sides, equilibrium_coefficients, frozen_coefficients,
                         linearized_kinetic_step, mirror_equivalence_run, momentum_div, momentum_grad,
                         picard_iterate, slab_transport, time_derivatives)
from rvml.errors import ConfigurationError, DivergenceError, InsufficientHistoryError, InvalidArgumentError
from rvml.kernel import MomentumGrid, energy, velocity
from rvml.maxwell import Torus
from rvml.operators import TwoSpecies, xi0
from rvml.phase import CHARGE, PhaseSpace

SMALL = dict(x_shape=(1, 1, 8), p_max=6.0, n_p=13, T=0.2, dt=0.05, max_iterations=3)


def test_div_is_minus_grad_adjoint(rng):
    u = rng.normal(size=(2, 6, 7, 5))
    w = rng.normal(size=(2, 6, 7, 5, 3))
    lhs = np.sum(momentum_grad(u, 0.3) * w)
    rhs = -np.sum(u * momentum_div(w, 0.3))
    assert lhs == pytest.approx(rhs, rel=1e-12)
    assert np.max(np.abs(momentum_grad(np.ones((5, 5, 5)), 0.3))) == 0.0
    assert abs(np.sum(momentum_div(w, 0.3))) <= 1e-12 * np.sum(np.abs(w))


def test_equilibrium_is_stationary(slab_space):
    g = slab_space.grid
    f = xi0(np.broadcast_to(g.sqrtJ, slab_space.shape).copy())
    out = linearized_kinetic_step(f, equilibrium_coefficients(slab_space), 0.05, slab_space).f
    assert (out - f).max_abs() <= 1e-12


def test_charge_mass_is_conserved(slab_space, rng):
    # x-uniform data: only the collision part acts, and it moves no int sqrt(J) f
    g = slab_space.grid
    prof = np.exp(-np.sum((g.points - 0.4) ** 2, -1))
    f = slab_space.from_profile(np.ones(slab_space.torus.shape), prof, 0.5 * prof)
    co = equilibrium_coefficients(slab_space)
    before = [g.integrate(u[0, 0, 0] * g.sqrtJ) for u in (f.plus, f.minus)]
    for k in range(4):
        f = linearized_kinetic_step(f, co, 0.05, slab_space, t=0.05 * k, cg_tol=1e-13).f
    after = [g.integrate(u[0, 0, 0] * g.sqrtJ) for u in (f.plus, f.minus)]
    np.testing.assert_allclose(after, before, rtol=1e-10)


def test_step_guards(slab_space):
    f = slab_space.zeros()
    co = equilibrium_coefficients(slab_space)
    with pytest.raises(ConfigurationError):
        linearized_kinetic_step(f, co, 10.0, slab_space)
    with pytest.raises(ConfigurationError):
        linearized_kinetic_step(f, co, 0.0, slab_space)


def test_energy_identity_consistent_in_dt(slab_space):
    # ||f(t+dt)||^2 - ||f(t)||^2 = 2 dt <L f, f> + O(dt^2)
    space = slab_space
    g = space.grid
    x3 = space.torus.coords[..., 2]
    f0, e0, b0 = preset_initial_data(space)
    co = frozen_coefficients(f0, e0 + 0.01, b0, space)
    f = space.from_profile(1 + 0.5 * np.cos(x3), g.J * (1 + 0.2 * g.points[..., 0]), g.J)
    gaps = []
    for dt in (0.02, 0.01):
        lhs, rhs = energy_identity_sides(f, co, dt, space, 1.0, cg_tol=1e-13)
        gaps.append(abs(lhs - rhs))
    assert gaps[0] / gaps[1] >= 3.0


# manufactured solution -------------------------------------------------------

E_MMS = np.array([0.1, 0.0, 0.05])
B_MMS = np.array([0.0, 0.2, 0.0])
SPECIES_SCALE = (1.0, 0.5)


def _sig(p):
    r2 = np.sum(p * p, -1)[..., None, None]
    return (1.0 + 0.5 * np.exp(-r2 / 4)) * np.eye(3) + 0.1 * p[..., :, None] * p[..., None, :] / (1 + r2)


def _drift(p):
    w = np.exp(-np.sum(p * p, -1) / 8)
    return 0.1 * np.stack([np.sin(p[..., 0]) * w, np.cos(p[..., 1]) * w, 0 * w], -1)


def _u(p):
    return np.exp(-0.5 * np.sum(p * p, -1)) * (1 + 0.2 * p[..., 0])


def _juttner(p):
    return np.exp(-energy(p))


def _ksrc(p):
    return 0.05 * np.exp(-np.sum(p * p, -1))


def _fd_grad(fn, p, d=1e-3):
    out = []
    for k in range(3):
        e = np.zeros(3)
        e[k] = d
        out.append((-fn(p + 2 * e) + 8 * fn(p + e) - 8 * fn(p - e) + fn(p - 2 * e)) / (12 * d))
    return np.stack(out, -1)


def _fd_div(field, p, d=1e-3):
    s = 0.0
    for k in range(3):
        e = np.zeros(3)
        e[k] = d
        s = s + (-field(p + 2 * e)[..., k] + 8 * field(p + e)[..., k]
                 - 8 * field(p - e)[..., k] + field(p - 2 * e)[..., k]) / (12 * d)
    return s


def _mms_error(n, dt, t_end=0.5):
    # f = c_s e^{-t} cos(x3 - t) sqrt(J) u(p); the operators are applied to it by fourth-order
    # differences of the closed-form coefficients, independent of the stepper's stencils
    grid = MomentumGrid(5.0, n)
    space = PhaseSpace(Torus((1, 1, 8), (1.0, 1.0, 2 * np.pi)), grid)
    p = grid.points
    x3 = space.torus.coords[..., 2][..., None, None, None]
    sq = np.sqrt(_juttner(p))
    u = _u(p)
    diff = _fd_div(lambda q: _juttner(q)[..., None] * np.einsum("...ij,...j->...i", _sig(q), _fd_grad(_u, q)), p) / sq
    push = {q: _fd_div(lambda r: (_juttner(r) * _u(r))[..., None]
                       * (_drift(r) - q * (E_MMS + np.cross(velocity(r), B_MMS))), p) / sq for q in CHARGE}
    vel = velocity(p)
    ks = _ksrc(p)
    vde = vel @ E_MMS
    amp = lambda t: np.exp(-t) * np.cos(x3 - t)
    amp_t = lambda t: -np.exp(-t) * np.cos(x3 - t) + np.exp(-t) * np.sin(x3 - t)
    amp_x = lambda t: -np.exp(-t) * np.sin(x3 - t)
    exact = lambda t: TwoSpecies(*(c * amp(t) * sq * u for c in SPECIES_SCALE))

    def forcing(t):
        return TwoSpecies(*(c * (amp_t(t) * sq * u + vel[..., 2] * amp_x(t) * sq * u - amp(t) * (diff + push[q]))
                            - q * vde * sq - ks for c, q in zip(SPECIES_SCALE, CHARGE)))

    shape = space.torus.shape + (3,)
    co = StepCoefficients(_sig(p), _drift(p), ks, np.broadcast_to(E_MMS, shape), np.broadcast_to(B_MMS, shape))
    f = exact(0.0)
    steps = int(round(t_end / dt))
    for k in range(steps):
        f = linearized_kinetic_step(f, co, dt, space, t=k * dt, forcing=forcing).f
    d = f - exact(t_end)
    return float(np.sqrt(space.inner(d, d)))


@pytest.mark.slow
def test_manufactured_solution_second_order():
    coarse, fine = _mms_error(21, 0.05), _mms_error(41, 0.025)
    assert coarse / fine >= 3.5


# functionals -------------------------------------------------------------------

def test_time_derivatives_of_quadratic():
    dt = 0.1
    series = [np.array((k * dt) ** 2) for k in range(5)]
    second = time_derivatives(series, dt, 2)
    assert len(second) == 3
    np.testing.assert_allclose(second, 2.0, rtol=1e-10)
    with pytest.raises(InsufficientHistoryError):
        time_derivatives(series[:2], dt, 2)


def test_energy_functionals_need_history(slab_space):
    cfg = IterationConfig(**SMALL)
    f0, e0, b0 = preset_initial_data(slab_space)
    with pytest.raises(InsufficientHistoryError):
        energy_functionals(np.zeros(1), [f0], [e0], [b0], slab_space, cfg)


def test_energy_functionals_weighting(slab_space):
    cfg = IterationConfig(**SMALL)
    f0, e0, b0 = preset_initial_data(slab_space)
    times = 0.05 * np.arange(5)
    fs = [f0 * float(1 + t) for t in times]
    es = [e0 * float(1 + t) for t in times]
    bs = [b0 for _ in times]
    base = energy_functionals(times, fs, es, bs, slab_space, cfg)
    heavy = energy_functionals(times, fs, es, bs, slab_space, cfg, weight_lambda=2 * cfg.lam)
    assert min(base.e_f, base.em_f, base.h_f, base.hm_f) >= 0
    assert base.y_f == pytest.approx(base.e_f + base.em_f + base.h_f + base.hm_f)
    assert heavy.e_f < base.e_f and heavy.em_f < base.em_f and heavy.h_f <= base.h_f
    grown = energy_functionals(times, [f * 2.0 for f in fs], es, bs, slab_space, cfg)
    assert grown.e_f == pytest.approx(4 * base.e_f, rel=1e-12)


def test_config_validation():
    with pytest.raises(InvalidArgumentError):
        IterationConfig(lam=0.0)
    with pytest.raises(InvalidArgumentError):
        IterationConfig(r_list=(2.0, 6.0))
    assert IterationConfig(T=0.5, dt=0.1).steps == 5


# Picard iteration --------------------------------------------------------------

def test_picard_zero_data():
    cfg = IterationConfig(**SMALL)
    space = cfg.space()
    f0, e0, b0 = preset_initial_data(space, "zero")
    trace = picard_iterate(f0, e0, b0, cfg, space)
    assert trace.iterations == 1 and trace.diffs == [0.0]
    assert trace.reports[0].y_f == 0.0


def test_picard_small_preset_contracts():
    cfg = IterationConfig(**SMALL)
    space = cfg.space()
    trace = picard_iterate(*preset_initial_data(space), cfg, space)
    assert trace.iterations == cfg.max_iterations
    assert len(trace.ratios) == cfg.max_iterations - 1
    assert all(r <= 0.9 for r in trace.ratios[1:]), trace.ratios
    assert max(trace.constraint_residuals) <= 1e-8
    assert len(trace.final_f) == cfg.steps + 1


def test_picard_rejects_large_data():
    cfg = IterationConfig(**SMALL)
    space = cfg.space()
    with pytest.raises(ConfigurationError):
        picard_iterate(*preset_initial_data(space, amplitude=1.0), cfg, space)


def test_picard_rejects_constraint_violation():
    cfg = IterationConfig(**SMALL)
    space = cfg.space()
    f0, e0, b0 = preset_initial_data(space)
    with pytest.raises(ConfigurationError):
        picard_iterate(f0, np.zeros_like(e0), b0, cfg, space)


def test_picard_divergence_reported():
    cfg = IterationConfig(**SMALL, divergence_factor=1e-6)
    space = cfg.space()
    with pytest.raises(DivergenceError) as info:
        picard_iterate(*preset_initial_data(space), cfg, space)
    assert info.value.trace.iterations == 1


# slab and mirror -----------------------------------------------------------------

def test_slab_transport_ignores_uniform_even_data(slab_space):
    g = slab_space.grid
    f = slab_space.from_profile(np.ones(slab_space.torus.shape), g.J, g.J)
    op = slab_transport(slab_space, 2 * np.pi / 8)
    assert np.max(np.abs(op(f.plus))) == 0.0


def test_mirror_gap_small_for_even_data():
    cfg = MirrorConfig(n_x=8, T=0.2)
    _, _, even = mirror_equivalence_run(cfg)
    _, _, odd = mirror_equivalence_run(MirrorConfig(n_x=8, T=0.2, data="odd"))
    assert even < odd
    with pytest.raises(InvalidArgumentError):
        mirror_equivalence_run(MirrorConfig(data="neither"))
