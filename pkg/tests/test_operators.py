import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rvml.errors import DegenerateCoefficientsError, InvalidArgumentError, StateError
from rvml.kernel import MomentumGrid
from rvml.operators import (TwoSpecies, WeightedNormParams, a_operator, a_operator_direct, assemble_coefficients,
                            coercivity_holds, dissipation_probe, fit_bound_constant, fit_coercivity,
                            gamma_bilinear, gamma_bilinear_direct, k_operator, k_operator_direct, weighted_norm,
                            xi, xi0, xi1)
from rvml.verify import probe_family


def bump(grid, centre, width=1.0):
    return np.exp(-np.sum((grid.points - np.asarray(centre)) ** 2, axis=-1) / (2 * width * width))


def test_xi_combinators():
    u = np.arange(3.0)
    f = TwoSpecies(u, 2 * u)
    np.testing.assert_array_equal(xi(f).minus, -2 * u)
    np.testing.assert_array_equal(xi0(u).plus, xi0(u).minus)
    np.testing.assert_array_equal(xi1(u).plus, -u)


def test_sigma_required():
    g = MomentumGrid(p_max=6.0, n=13)
    with pytest.raises(StateError):
        a_operator(xi0(g.sqrtJ), g)


def test_equilibrium_direction_residual_shrinks():
    # A and K annihilate sqrt(J) xi0 in the continuum; on the grid the residual refines away
    res = []
    for n in (13, 25):
        g = MomentumGrid(p_max=4.0, n=n)
        g.sigma
        eq = xi0(np.array(g.sqrtJ))
        q, _, _ = dissipation_probe(eq, 0.0, g)
        res.append((a_operator(eq, g).max_abs(), k_operator(eq, g).max_abs(), abs(q)))
    for coarse, fine in zip(*res):
        assert fine < 0.5 * coarse


def test_k_output_is_xi0_and_ignores_charge(coarse_grid):
    g = coarse_grid
    f = TwoSpecies(bump(g, [0.3, 0, 0]), bump(g, [0, 0.4, 0], 1.3))
    kf = k_operator(f, g)
    np.testing.assert_array_equal(kf.plus, kf.minus)
    u = bump(g, [0.2, -0.1, 0.5])
    odd = k_operator(TwoSpecies(u, -u), g)
    assert odd.max_abs() == 0.0


def test_gamma_vanishes_on_charge_direction_and_is_bilinear(coarse_grid):
    g = coarse_grid
    a = TwoSpecies(bump(g, [0.3, 0, 0]), bump(g, [0, 0.4, 0]))
    u = bump(g, [0.1, 0.2, -0.3])
    assert gamma_bilinear(a, TwoSpecies(u, -u), g).max_abs() == 0.0
    h = TwoSpecies(bump(g, [0, 0, 0.5]), bump(g, [-0.5, 0, 0]))
    lhs = gamma_bilinear(a * 3.0, h, g)
    rhs = gamma_bilinear(a, h, g) * 3.0
    assert (lhs - rhs).max_abs() <= 1e-12 * rhs.max_abs()


def test_closed_forms_converge_to_definitions():
    # both routes discretize the same continuum operator; their L2 gap must shrink with h
    gaps = []
    for n in (13, 25):
        g = MomentumGrid(p_max=4.0, n=n)
        g.sigma
        f = TwoSpecies(bump(g, [0.3, 0, 0]) * g.sqrtJ, bump(g, [0, -0.2, 0.1]) * g.sqrtJ)
        m = g.interior_mask(2)
        row = []
        for closed, direct in ((a_operator(f, g), a_operator_direct(f, g)),
                               (k_operator(f, g), k_operator_direct(f, g)),
                               (gamma_bilinear(f, f, g), gamma_bilinear_direct(f, f, g))):
            row.append(float(np.sqrt(np.sum((closed - direct).plus[m] ** 2) * g.h ** 3)))
        gaps.append(row)
    for coarse, fine in zip(*gaps):
        assert fine < coarse


def test_k_pointwise_decay_bound():
    # fit |K f| <= N J^{1/4} on one grid and check it on a finer one
    ratios = []
    for n in (13, 19):
        g = MomentumGrid(p_max=6.0, n=n)
        g.sigma
        f = TwoSpecies(bump(g, [0.4, 0, 0]), bump(g, [0, 0.4, 0]))
        ratios.append(float(np.max(np.abs(k_operator(f, g).plus) / g.J ** 0.25)))
    n_fit = fit_bound_constant([ratios[0]], [1.0])
    assert ratios[1] <= n_fit


def test_trilinear_gamma_bound(coarse_grid, rng):
    g = coarse_grid
    theta, r = 1.0, 6.0
    fam = probe_family(g, 30, rng)
    w2 = WeightedNormParams(2.0, theta)
    wr = WeightedNormParams(r, 0.0)

    def grad_norm(f, params):
        return math.sqrt(sum(weighted_norm(np.linalg.norm(g.grad(u), axis=-1), params, g) ** 2
                             for u in (f.plus, f.minus)))

    lhs, rhs = [], []
    for i in range(10):
        f1, f2, f3 = fam[3 * i], fam[3 * i + 1], fam[3 * i + 2]
        gam = gamma_bilinear(f1, f2, g)
        w = g.p0 ** (2 * theta)
        pairing = abs(float(np.sum((gam.plus * f3.plus + gam.minus * f3.minus) * w)) * g.h ** 3)
        left = grad_norm(f1, w2) * weighted_norm(f2, wr, g) + weighted_norm(f1, w2, g) * grad_norm(f2, wr)
        w1 = math.hypot(weighted_norm(f3, w2, g), grad_norm(f3, w2))
        lhs.append(pairing)
        rhs.append(left * w1)
    n_fit = fit_bound_constant(lhs[:5], rhs[:5])
    assert np.all(np.array(lhs[5:]) <= n_fit * np.array(rhs[5:]))


def test_coefficients_at_zero_state(coarse_grid):
    g = coarse_grid
    z = np.zeros(g.shape)
    c = assemble_coefficients(TwoSpecies(z, z), g)
    np.testing.assert_array_equal(c.sigma_G, g.sigma)
    assert np.max(np.abs(c.a_g)) == 0.0


def test_coefficients_small_state(coarse_grid):
    g = coarse_grid
    c = assemble_coefficients(xi0(1e-3 * np.array(g.sqrtJ)), g)
    base = float(np.min(np.linalg.eigvalsh(g.sigma)[..., 0]))
    assert abs(c.min_eigenvalue - base) <= 0.01 * base
    np.testing.assert_array_equal(c.sigma_G, np.swapaxes(c.sigma_G, -1, -2))


def test_ellipticity_loss_reported(coarse_grid):
    g = coarse_grid
    big = xi0(-50.0 * np.array(g.sqrtJ))
    with pytest.raises(DegenerateCoefficientsError) as info:
        assemble_coefficients(big, g)
    assert info.value.min_eigenvalue < 0.5 * float(np.min(np.linalg.eigvalsh(g.sigma)[..., 0]))


def test_weighted_norm_of_sqrt_juttner():
    g = MomentumGrid(p_max=12.0, n=96, max_spacing=1.0)
    assert weighted_norm(g.sqrtJ, WeightedNormParams(2.0, 0.0), g) == pytest.approx(4.518, abs=1e-3)


@settings(max_examples=30, deadline=None)
# r-th powers of tiny scales underflow; homogeneity is a statement about representable values
@given(st.floats(-5, 5).filter(lambda x: x == 0 or abs(x) > 1e-6), st.floats(0, 3), st.floats(0, 3), st.sampled_from([1.0, 2.0, 6.0, math.inf]))
def test_weighted_norm_homogeneous_and_monotone(s, t1, t2, r):
    g = MomentumGrid(p_max=3.0, n=7)
    f = TwoSpecies(np.sin(g.points[..., 0]), np.cos(g.points[..., 1]))
    base = weighted_norm(f, WeightedNormParams(r, t1), g)
    assert weighted_norm(f * s, WeightedNormParams(r, t1), g) == pytest.approx(abs(s) * base, rel=1e-12, abs=1e-300)
    lo, hi = sorted((t1, t2))
    assert weighted_norm(f, WeightedNormParams(r, hi), g) >= weighted_norm(f, WeightedNormParams(r, lo), g)


def test_weighted_norm_rejects_small_exponent():
    with pytest.raises(InvalidArgumentError):
        WeightedNormParams(0.5, 0.0)


def test_dissipation_probe_positive_parts_and_scaling(coarse_grid):
    g = coarse_grid
    _, d, m = dissipation_probe(xi0(np.array(g.sqrtJ)), 0.0, g)
    assert d > 0 and m > 0
    generic = TwoSpecies(bump(g, [0.5, 0, 0]), bump(g, [0, -0.5, 0.3]))
    qg, dg, mg = dissipation_probe(generic, 0.0, g)
    q2, d2, m2 = dissipation_probe(generic * 3.0, 0.0, g)
    np.testing.assert_allclose([q2, d2, m2], [9 * qg, 9 * dg, 9 * mg], rtol=1e-12)


def test_coercivity_fit_holds_out(medium_grid, rng):
    g = medium_grid
    fam = probe_family(g, 20, rng)
    probes = np.array([dissipation_probe(f, 1.0, g) for f in fam]).T
    kap, n_const = fit_coercivity(*probes[:, :10])
    assert kap > 0
    ok, margin = coercivity_holds(*probes[:, 10:], kap, n_const)
    assert ok, margin
