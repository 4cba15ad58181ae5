"""Linearized kinetic stepper, Picard iteration, energy functionals and the
mirror-equivalence experiment.

The collision part of the linearized equation is advanced in the balanced
form

    A f + Gamma(f, g) + K g = J^{-1/2} div( J [ sigma_G grad(phi) + (phi + psi) a_g ] )

with phi = f / sqrt(J), psi = (g+ + g-) / sqrt(J), sigma_G = sigma + int Phi J psi
and a_g = -int Phi J grad(psi).  The momentum box is closed (no flux
leaves it), the diffusion operator is symmetric, sqrt(J) is an exact steady
state, and int sqrt(J) f changes only through the spatial transport.
"""

from dataclasses import dataclass, field, replace
from math import comb

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .compat import proxy_power_sums, smallness_check, generate_sequence, validate_compatibility
from .errors import (ConfigurationError, DivergenceError, InsufficientHistoryError,
                     InvalidArgumentError, SolverError)
from .kernel import MomentumGrid
from .maxwell import EMField, RK4_IMAG_LIMIT, Torus, check_time_step, constraint_residuals, maxwell_step
from .operators import TwoSpecies, WeightedNormParams, weighted_norm
from .phase import CHARGE, PhaseSpace

RK4_WEIGHTS = (1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0)


# momentum differences -------------------------------------------------------
#
# grad uses central differences with edge padding (u beyond the box equals
# the face value), so constants have zero gradient.  div is minus the exact
# adjoint of grad: central in the interior, and its node sum vanishes, which
# makes every flux form below conservative and the diffusion symmetric.

def _axis_slices(ndim, axis):
    def at(s):
        sl = [slice(None)] * ndim
        sl[axis] = s
        return tuple(sl)
    return at


def _grad_axis(u, axis, h):
    at = _axis_slices(u.ndim, axis)
    n = u.shape[axis]
    out = np.empty_like(u)
    out[at(slice(1, n - 1))] = u[at(slice(2, n))] - u[at(slice(0, n - 2))]
    out[at(slice(0, 1))] = u[at(slice(1, 2))] - u[at(slice(0, 1))]
    out[at(slice(n - 1, n))] = u[at(slice(n - 1, n))] - u[at(slice(n - 2, n - 1))]
    return out / (2.0 * h)


def _div_axis(w, axis, h):
    # minus the adjoint of _grad_axis
    at = _axis_slices(w.ndim, axis)
    n = w.shape[axis]
    out = np.empty_like(w)
    out[at(slice(1, n - 1))] = w[at(slice(2, n))] - w[at(slice(0, n - 2))]
    out[at(slice(0, 1))] = w[at(slice(1, 2))] + w[at(slice(0, 1))]
    out[at(slice(n - 1, n))] = -w[at(slice(n - 1, n))] - w[at(slice(n - 2, n - 1))]
    return out / (2.0 * h)


def momentum_grad(u, h):
    """(..., n, n, n) -> (..., n, n, n, 3)."""
    return np.stack([_grad_axis(u, u.ndim - 3 + k, h) for k in range(3)], axis=-1)


def momentum_div(w, h):
    """(..., n, n, n, 3) -> (..., n, n, n); equals -grad^T."""
    nd = w.ndim - 1
    return sum(_div_axis(w[..., k], nd - 3 + k, h) for k in range(3))


# frozen coefficients --------------------------------------------------------

@dataclass(frozen=True)
class StepCoefficients:
    """Coefficients of one kinetic step, frozen over the step.

    sigma_G (..., n, n, n, 3, 3) and a_g (..., n, n, n, 3) may omit the
    spatial axes, in which case they are shared by every x.  k_source is
    the K g field (same for both species) or None; e and b are the frozen
    electromagnetic fields (spatial shape + (3,)) or None.
    """

    sigma_G: np.ndarray
    a_g: np.ndarray
    k_source: np.ndarray = None
    e: np.ndarray = None
    b: np.ndarray = None

    def average(self, other):
        def mid(a, b):
            if a is None and b is None:
                return None
            a = 0.0 if a is None else a
            b = 0.0 if b is None else b
            return 0.5 * (a + b)

        return StepCoefficients(mid(self.sigma_G, other.sigma_G), mid(self.a_g, other.a_g),
                                mid(self.k_source, other.k_source), mid(self.e, other.e),
                                mid(self.b, other.b))


def frozen_coefficients(g, e, b, space):
    """StepCoefficients for the frozen state (g, E_g, B_g)."""
    grid = space.grid
    sigma = grid.sigma
    sq = grid.sqrtJ
    J = grid.J
    psi = g.total / sq
    mats, vecs = grid.field_moments(scalar=J * psi, vector=J[..., None] * momentum_grad(psi, grid.h))
    sigma_G = sigma + mats
    a_g = -vecs
    k_src = momentum_div(J[..., None] * a_g, grid.h) / sq
    return StepCoefficients(sigma_G, a_g, k_src,
                            None if e is None else np.asarray(e, dtype=np.float64),
                            None if b is None else np.asarray(b, dtype=np.float64))


def equilibrium_coefficients(space):
    """Coefficients for g = 0 and zero fields."""
    grid = space.grid
    return StepCoefficients(np.array(grid.sigma), np.zeros(grid.shape + (3,)))


# kinetic step ---------------------------------------------------------------

def diffusion_apply(u, coeffs, grid):
    """J^{-1/2} div(J sigma_G grad(u / sqrt(J)))."""
    sq = grid.sqrtJ
    gphi = momentum_grad(u / sq, grid.h)
    flux = grid.J[..., None] * np.einsum("...ij,...j->...i", coeffs.sigma_G, gphi)
    return momentum_div(flux, grid.h) / sq


def explicit_rhs(f, coeffs, space, transport=None, forcing=None, t=0.0):
    """Transport, Lorentz, drift and source terms of the kinetic equation."""
    grid = space.grid
    sq = grid.sqrtJ
    transport = space.transport if transport is None else transport
    frc = vde = None
    if coeffs.e is not None or coeffs.b is not None:
        e = coeffs.e if coeffs.e is not None else np.zeros(space.torus.shape + (3,))
        b = coeffs.b if coeffs.b is not None else np.zeros(space.torus.shape + (3,))
        frc = space.force(e, b)
        vde = space.v_dot(e)
    force_term = forcing(t) if forcing is not None else None
    outs = []
    for s, (q, u) in enumerate(zip(CHARGE, (f.plus, f.minus))):
        vel = coeffs.a_g if frc is None else coeffs.a_g - q * frc
        flux = (sq * u)[..., None] * vel
        r = -transport(u) + momentum_div(flux, grid.h) / sq
        if vde is not None:
            r = r + q * vde * sq
        if coeffs.k_source is not None:
            r = r + coeffs.k_source
        if force_term is not None:
            r = r + (force_term.plus, force_term.minus)[s]
        outs.append(r)
    return TwoSpecies(*outs)


def explicit_rate(coeffs, space, transport_rate=None):
    """Spectral-radius bound of the explicit part, per unit time."""
    grid = space.grid
    kx = space.torus.k_max if transport_rate is None else transport_rate
    vmax = float(np.max(np.linalg.norm(grid.v, axis=-1)))
    speed = float(np.max(np.linalg.norm(coeffs.a_g, axis=-1)))
    if coeffs.e is not None or coeffs.b is not None:
        e = coeffs.e if coeffs.e is not None else 0.0
        b = coeffs.b if coeffs.b is not None else 0.0
        speed += float(np.max(np.linalg.norm(e, axis=-1))) + vmax * float(np.max(np.linalg.norm(b, axis=-1)))
    return kx * vmax + speed / grid.h


def _cn_half(u, coeffs, grid, dt, tol, maxiter):
    # Crank-Nicolson over dt/2: (I - dt/4 L) u1 = (I + dt/4 L) u0
    tau = 0.25 * dt
    shape = u.shape
    b = (u + tau * diffusion_apply(u, coeffs, grid)).ravel()
    if not np.any(b):
        return np.zeros_like(u)

    def mv(x):
        x = x.reshape(shape)
        return (x - tau * diffusion_apply(x, coeffs, grid)).ravel()

    op = LinearOperator((u.size, u.size), matvec=mv, dtype=np.float64)
    x, info = cg(op, b, x0=u.ravel(), rtol=tol, atol=0.0, maxiter=maxiter)
    if info != 0:
        raise SolverError(f"implicit diffusion solve did not converge (info = {info})")
    return x.reshape(shape)


@dataclass(frozen=True)
class StepResult:
    f: TwoSpecies
    current: np.ndarray = None


def linearized_kinetic_step(f, coeffs, dt, space, t=0.0, transport=None, transport_rate=None,
                            forcing=None, cg_tol=1e-10, cg_maxiter=1000, record_current=False):
    """Advance the linearized kinetic equation by one Strang step.

    Half a Crank-Nicolson step of the collision diffusion, a classical RK4
    step of the explicit terms, and another diffusion half step.  With
    record_current the RK4-weighted current int v sqrt(J) q.f of the
    explicit stages is returned; it is the flux that moved the charge
    density during the step.
    """
    grid = space.grid
    space.check(f)
    if not (np.isfinite(dt) and dt > 0):
        raise ConfigurationError("time step must be positive")
    rate = explicit_rate(coeffs, space, transport_rate)
    if dt * rate > RK4_IMAG_LIMIT:
        raise ConfigurationError(
            f"dt = {dt:.4g} violates the explicit stability bound {RK4_IMAG_LIMIT / rate:.4g}")

    def diffuse(u):
        return TwoSpecies(*(_cn_half(c, coeffs, grid, dt, cg_tol, cg_maxiter) for c in (u.plus, u.minus)))

    def rhs(u, s):
        return explicit_rhs(u, coeffs, space, transport, forcing, s)

    u = diffuse(f)
    k1 = rhs(u, t)
    u2 = u + (0.5 * dt) * k1
    k2 = rhs(u2, t + 0.5 * dt)
    u3 = u + (0.5 * dt) * k2
    k3 = rhs(u3, t + 0.5 * dt)
    u4 = u + dt * k3
    k4 = rhs(u4, t + dt)
    out = diffuse(u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
    cur = None
    if record_current:
        cur = sum(w * space.moments(s)[1] for w, s in zip(RK4_WEIGHTS, (u, u2, u3, u4)))
    return StepResult(out, cur)


def energy_identity_sides(f, coeffs, dt, space, theta, **kw):
    """(||f(t+dt)||^2 - ||f(t)||^2, 2 dt <RHS f, f p0^{2 theta}>) for one step."""
    grid = space.grid
    w = grid.p0 ** (2.0 * theta)
    new = linearized_kinetic_step(f, coeffs, dt, space, **kw).f
    lhs = space.inner(new, new, w) - space.inner(f, f, w)
    ex = explicit_rhs(f, coeffs, space, kw.get("transport"), kw.get("forcing"), kw.get("t", 0.0))
    full = ex + TwoSpecies(diffusion_apply(f.plus, coeffs, grid), diffusion_apply(f.minus, coeffs, grid))
    return lhs, 2.0 * dt * space.inner(full, f, w)


# slab transport with specular ghost cells -----------------------------------

def slab_transport(space, spacing):
    """v3 d/dx3 on cell centres of [0, L] with specular walls at both ends.

    Ghost cells take the value of the adjacent cell with p3 reversed;
    second-order central differences.
    """
    v3 = space.grid.v[..., 2]

    def op(u):
        ghost_lo = space.reflect_p3(u[:, :, :1])
        ghost_hi = space.reflect_p3(u[:, :, -1:])
        ext = np.concatenate([ghost_lo, u, ghost_hi], axis=2)
        return v3 * (ext[:, :, 2:] - ext[:, :, :-2]) / (2.0 * spacing)

    return op


# functionals ------------------------------------------------------------------

@dataclass(frozen=True)
class EnergyReport:
    """Discrete energy functionals on [0, tau].

    e_f, em_f, h_f, hm_f are the kinetic energy, field energy, kinetic
    higher-regularity proxy and field integrability proxy; *_by_k hold the
    per-derivative contributions.  y_f is their sum.
    """

    e_f: float
    em_f: float
    h_f: float
    hm_f: float
    y_f: float
    e_f_by_k: tuple = ()
    em_f_by_k: tuple = ()


def time_derivatives(series, dt, k):
    """Backward differences of order k; entry i stands for time index i + k."""
    if len(series) < k + 1:
        raise InsufficientHistoryError(f"derivative order {k} needs {k + 1} samples, have {len(series)}")
    out = []
    for i in range(k, len(series)):
        acc = None
        for j in range(k + 1):
            term = series[i - j] * ((-1) ** j * comb(k, j) / dt ** k)
            acc = term if acc is None else acc + term
        out.append(acc)
    return out


def _time_integral(values, dt):
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        return 0.0
    return float(np.sum(0.5 * (v[1:] + v[:-1])) * dt)


def energy_functionals(times, f_series, e_series, b_series, space, config, weight_lambda=None):
    """EnergyReport of a stored run.

    The exponential weight uses weight_lambda (default config.lam) while
    the dissipation multiplier is config.lam, so the two can be decoupled.
    Temporal derivatives are backward differences; derivative k is sampled
    from time index k on.
    """
    m = config.m
    if len(f_series) < m + 1:
        raise InsufficientHistoryError(f"m = {m} needs at least {m + 1} time samples")
    times = np.asarray(times, dtype=np.float64)
    dt = float(times[1] - times[0]) if times.size > 1 else 1.0
    lam = config.lam
    wl = lam if weight_lambda is None else weight_lambda
    grid = space.grid
    torus = space.torus
    cv = torus.cell_volume
    e_terms, em_terms = [], []
    h_f = 0.0
    hm_f = 0.0
    for k in range(m + 1):
        th = config.theta / 2 ** k
        df = time_derivatives(f_series, dt, k)
        de = time_derivatives(e_series, dt, k)
        db = time_derivatives(b_series, dt, k)
        ts = times[k:]
        wt = np.exp(-wl * ts)
        l2 = np.array([weighted_norm(u, WeightedNormParams(2.0, th), grid, cv) ** 2 for u in df])
        grad2 = np.array([sum(weighted_norm(np.sqrt(np.sum(grid.grad(c) ** 2, axis=-1)),
                                             WeightedNormParams(2.0, th), grid, cv) ** 2
                              for c in (u.plus, u.minus)) for u in df])
        e_terms.append(float(np.max(wt ** 2 * l2)) + lam * _time_integral(wt ** 2 * (l2 + grad2), dt))
        f2 = np.array([float(np.sum(a ** 2) + np.sum(c ** 2)) * cv for a, c in zip(de, db)])
        em_terms.append(float(np.max(wt ** 2 * f2)) + lam * _time_integral(wt ** 2 * f2, dt))
    for i, r in enumerate(config.r_list, start=1):
        for k in range(0, m - i + 2):
            th = config.theta / 2 ** (k + 1)
            df = time_derivatives(f_series, dt, k)
            wt = np.exp(-wl * times[k:])
            sums = np.array([proxy_power_sums(u * float(w), space, r, th) for u, w in zip(df, wt)])
            if np.isinf(r):
                h_f += float(np.sum(np.max(sums, axis=0))) ** 2
            else:
                per = [_time_integral(sums[:, j], dt) if sums.shape[0] > 1 else float(sums[0, j])
                       for j in range(sums.shape[1])]
                h_f += sum(p ** (1.0 / r) for p in per) ** 2
    for k in range(0, m - 2):
        th = config.theta / 2 ** (k + 1)
        df = time_derivatives(f_series, dt, k)
        wt = np.exp(-wl * times[k:])
        for s in (2.0, np.inf):
            best = 0.0
            for u, w in zip(df, wt):
                for c in (u.plus, u.minus):
                    pieces = (np.abs(c), np.sqrt(np.sum(grid.grad(c) ** 2, axis=-1)))
                    pw = grid.p0 ** th
                    if np.isinf(s):
                        val = sum(np.max(p * pw, axis=(-3, -2, -1)) for p in pieces)
                    else:
                        val = sum(np.sqrt(np.sum((p * pw) ** 2, axis=(-3, -2, -1)) * grid.h ** 3)
                                  for p in pieces)
                    best = max(best, float(w) * float(np.max(val)))
            h_f += best ** 2
    for i, r in zip(range(2, 5), config.r_list[1:]):
        for k in range(0, m - i + 2):
            de = time_derivatives(e_series, dt, k)
            db = time_derivatives(b_series, dt, k)
            vals = np.array([float(np.sum(np.abs(a) ** r) + np.sum(np.abs(c) ** r)) * cv
                             for a, c in zip(de, db)])
            tot = _time_integral(vals, dt) if vals.size > 1 else float(vals[0])
            hm_f += tot ** (2.0 / r)
    e_f = float(sum(e_terms))
    em_f = float(sum(em_terms))
    return EnergyReport(e_f, em_f, float(h_f), float(hm_f), e_f + em_f + float(h_f) + float(hm_f),
                        tuple(e_terms), tuple(em_terms))


# configuration and Picard iteration -----------------------------------------

@dataclass(frozen=True)
class IterationConfig:
    """Constants and grids of a Picard run.

    The default run is a slab: one spatial dimension (x3, periodic) times
    three momentum dimensions.
    """

    lam: float = 1.0
    theta: float = 4.0
    m: int = 1
    T: float = 0.5
    epsilon: float = 1e-4
    epsilon0: float = 1e-2
    M: float = 10.0
    L: float = 1.0
    r_list: tuple = (2.0, 6.0, 12.0, 16.0)
    x_shape: tuple = (1, 1, 16)
    x_lengths: tuple = (1.0, 1.0, 2.0 * np.pi)
    p_max: float = 8.0
    n_p: int = 24
    dt: float = 0.1
    max_iterations: int = 8
    tolerance: float = 1e-8
    cg_tol: float = 1e-10
    amplitude: float = 1e-3
    divergence_factor: float = 10.0

    def __post_init__(self):
        if not (self.lam > 0 and self.T > 0 and self.dt > 0):
            raise InvalidArgumentError("lambda, T and dt must be positive")
        if self.m < 0 or self.max_iterations < 1:
            raise InvalidArgumentError("m must be >= 0 and at least one iteration is needed")
        if self.theta < 0:
            raise InvalidArgumentError("theta must be non-negative")
        if len(self.r_list) != 4:
            raise InvalidArgumentError("r_list needs four exponents")

    @property
    def steps(self):
        return max(1, int(round(self.T / self.dt)))

    @property
    def step(self):
        return self.T / self.steps

    def space(self):
        return PhaseSpace(Torus(self.x_shape, self.x_lengths), MomentumGrid(self.p_max, self.n_p))

    def stability_factor(self, space, coeffs=None):
        """dt times this must stay <= 1."""
        c = coeffs if coeffs is not None else equilibrium_coefficients(space)
        return max(explicit_rate(c, space), space.torus.k_max) / RK4_IMAG_LIMIT


@dataclass
class IterationTrace:
    """Per-iterate reports and successive differences.

    diffs[n - 1] = sup_t e^{-lambda t} ||f^n - f^{n-1}||_{2,theta} and
    l2_diffs the same with theta = 0; field_diffs use the plain L2 norm of
    (E, B).
    """

    reports: list = field(default_factory=list)
    diffs: list = field(default_factory=list)
    l2_diffs: list = field(default_factory=list)
    field_diffs: list = field(default_factory=list)
    constraint_residuals: list = field(default_factory=list)
    times: np.ndarray = None
    final_f: list = None
    final_e: list = None
    final_b: list = None

    @property
    def ratios(self):
        d = self.diffs
        return [d[i + 1] / d[i] if d[i] > 0 else 0.0 for i in range(len(d) - 1)]

    @property
    def iterations(self):
        return len(self.diffs)


def _kinetic_run(f0, coeff_levels, space, config):
    dt = config.step
    fs = [f0]
    currents = []
    f = f0
    for k in range(config.steps):
        c = coeff_levels(k).average(coeff_levels(k + 1))
        res = linearized_kinetic_step(f, c, dt, space, t=k * dt, cg_tol=config.cg_tol,
                                      record_current=True)
        f = res.f
        fs.append(f)
        currents.append(res.current)
    return fs, currents


def _maxwell_run(e0, b0, currents, space, config):
    dt = config.step
    flds = [EMField(np.array(e0), np.array(b0))]
    for j in currents:
        flds.append(maxwell_step(flds[-1], j, dt, space.torus))
    return [x.e for x in flds], [x.b for x in flds]


def picard_iterate(f0, e0, b0, config, space=None, validate=True):
    """Picard iteration of the linearized system.

    Iterate n + 1 solves the kinetic equation with coefficients frozen at
    (f^n, E^n, B^n) and Maxwell's equations sourced by the current of f^n.
    The zeroth iterate is the initial data held constant in time; later
    iterates are sourced by the RK4-weighted current their kinetic run
    recorded.  validate checks compatibility and smallness first.
    """
    space = config.space() if space is None else space
    space.check(f0)
    torus = space.torus
    dt = config.step
    check_time_step(torus, dt)
    if validate:
        if config.m >= 1:
            seq = generate_sequence(f0, e0, b0, min(config.m, 2), space)
            rep = validate_compatibility(seq)
            worst = max(rep.div_b + rep.gauss[:1])
            if worst > 1e-8:
                raise ConfigurationError(f"initial data violate the constraints (residual {worst:.3g})")
            value, ok = smallness_check(seq, config.r_list, config.theta, config.M, config.epsilon)
            if not ok:
                raise ConfigurationError(f"smallness functional {value:.3g} exceeds eps / M")
    times = dt * np.arange(config.steps + 1)
    wt = np.exp(-config.lam * times)
    params = WeightedNormParams(2.0, config.theta)

    g_series = [f0] * (config.steps + 1)
    e_series = [np.asarray(e0, dtype=np.float64)] * (config.steps + 1)
    b_series = [np.asarray(b0, dtype=np.float64)] * (config.steps + 1)
    _, j0 = space.moments(f0)
    g_currents = [j0] * config.steps
    trace = IterationTrace(times=times)
    budget = config.divergence_factor * config.epsilon

    for _ in range(config.max_iterations):
        cache = {}

        def levels(k, gs=g_series, es=e_series, bs=b_series):
            key = id(gs[k]) if gs[k] is gs[0] and k > 0 else k
            if key not in cache:
                cache[key] = frozen_coefficients(gs[k], es[k], bs[k], space)
            return cache[key]

        f_new, currents = _kinetic_run(f0, levels, space, config)
        e_new, b_new = _maxwell_run(e0, b0, g_currents, space, config)
        d = max(w * weighted_norm(a - b, params, space.grid, torus.cell_volume)
                for w, a, b in zip(wt, f_new, g_series))
        d0 = max(w * weighted_norm(a - b, WeightedNormParams(2.0, 0.0), space.grid, torus.cell_volume)
                 for w, a, b in zip(wt, f_new, g_series))
        fd = max(w * np.sqrt(field_norm2(a - c, b - e, torus))
                 for w, a, b, c, e in zip(wt, e_new, b_new, e_series, b_series))
        cres = max(max(constraint_residuals(EMField(e, b), space.moments(g)[0], torus))
                   for e, b, g in zip(e_new, b_new, g_series))
        report = energy_functionals(times, f_new, e_new, b_new, space, config)
        trace.reports.append(report)
        trace.diffs.append(float(d))
        trace.l2_diffs.append(float(d0))
        trace.field_diffs.append(float(fd))
        trace.constraint_residuals.append(float(cres))
        trace.final_f, trace.final_e, trace.final_b = f_new, e_new, b_new
        if not np.isfinite(report.y_f) or report.y_f > budget:
            raise DivergenceError(f"total functional {report.y_f:.3g} exceeds {budget:.3g}", trace)
        g_series, e_series, b_series, g_currents = f_new, e_new, b_new, currents
        if d <= config.tolerance:
            break
    return trace


def field_norm2(e, b, torus):
    return float(np.sum(np.asarray(e) ** 2) + np.sum(np.asarray(b) ** 2)) * torus.cell_volume


# mirror equivalence ------------------------------------------------------------

@dataclass(frozen=True)
class MirrorConfig:
    """Half-space slab [0, L] with n_x cells versus its doubled periodic image."""

    n_x: int = 8
    length: float = np.pi
    p_max: float = 6.0
    n_p: int = 13
    T: float = 0.5
    dt: float = 0.05
    data: str = "even"
    cg_tol: float = 1e-12

    def refined(self):
        return replace(self, n_x=2 * self.n_x, dt=0.5 * self.dt)


def _mirror_data(space, cfg, centres):
    grid = space.grid
    prof = 1.0 + np.cos(2.0 * np.pi * centres / cfg.length)
    mom = grid.J * (1.0 + 0.3 * grid.points[..., 0] ** 2)
    if cfg.data == "odd":
        mom = mom * (1.0 + np.tanh(grid.points[..., 2]))
    elif cfg.data != "even":
        raise InvalidArgumentError(f"unknown mirror data {cfg.data!r}")
    xp = prof[None, None, :]
    return space.from_profile(xp, mom, 0.5 * mom)


def mirror_equivalence_run(cfg=MirrorConfig()):
    """(slab solution, doubled-domain solution restricted to [0, L], L2 gap).

    The slab uses specular ghost cells with central differences in x3; the
    doubled domain [0, 2L) holds f(x, p) for x < L and f(2L - x, R p)
    beyond, with spectral x-derivatives and no boundary.  SRBC-violating
    data ("odd") are extended without the reflection, as a control.
    Frozen state g = 0 with zero fields.
    """
    grid = MomentumGrid(cfg.p_max, cfg.n_p)
    h = cfg.length / cfg.n_x
    centres = (np.arange(cfg.n_x) + 0.5) * h
    slab = PhaseSpace(Torus((1, 1, cfg.n_x), (1.0, 1.0, cfg.length)), grid)
    double = PhaseSpace(Torus((1, 1, 2 * cfg.n_x), (1.0, 1.0, 2.0 * cfg.length)), grid)
    coeffs = equilibrium_coefficients(slab)
    f = _mirror_data(slab, cfg, centres)
    reflect = cfg.data == "even"

    def extend(u):
        mirror = u[:, :, ::-1]
        if reflect:
            mirror = slab.reflect_p3(mirror)
        return np.concatenate([u, mirror], axis=2)

    fd = f.map(extend)
    steps = max(1, int(round(cfg.T / cfg.dt)))
    dt = cfg.T / steps
    tr = slab_transport(slab, h)
    for k in range(steps):
        f = linearized_kinetic_step(f, coeffs, dt, slab, t=k * dt, transport=tr,
                                    transport_rate=1.0 / h, cg_tol=cfg.cg_tol).f
        fd = linearized_kinetic_step(fd, coeffs, dt, double, t=k * dt, cg_tol=cfg.cg_tol).f
    restricted = fd.map(lambda u: u[:, :, :cfg.n_x])
    diff = f - restricted
    gap = np.sqrt(slab.inner(diff, diff))
    return f, restricted, float(gap)
