"""Time-derivative initial data and the compatibility diagnostics.

Given (f0, E0, B0) the entries f_k, E_k, B_k stand for the k-th time
derivatives at t = 0 and follow from differentiating the linearized system:

    f_{k+1} = -v.grad_x f_k + (A + K) f_k + q (v.E_k) sqrt(J)
              + sum_j C(k, j) [ -q (E_j + v x B_j).grad_p f_{k-j}
                               + (q/2) (v.E_j) f_{k-j} + Gamma(f_j, f_{k-j}) ]
    E_{k+1} = curl B_k - int v sqrt(J) (f_k+ - f_k-) dp
    B_{k+1} = -curl E_k

with species charges q = (+1, -1).
"""

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .errors import InvalidArgumentError, NumericalOverflowError
from .operators import (TwoSpecies, WeightedNormParams, a_operator, gamma_bilinear, k_operator,
                        kernel_moments)
from .phase import PhaseSpace

DEFAULT_MAX_DEPTH = 2


@dataclass(frozen=True)
class CompatSequence:
    f_seq: list
    e_seq: list
    b_seq: list
    m: int
    space: PhaseSpace = field(repr=False, default=None)

    def __post_init__(self):
        n = self.m + 1
        if not (len(self.f_seq) == len(self.e_seq) == len(self.b_seq) == n):
            raise InvalidArgumentError("sequence lengths must equal m + 1")

    def scaled(self, s):
        return CompatSequence([s * f for f in self.f_seq], [s * e for e in self.e_seq],
                              [s * b for b in self.b_seq], self.m, self.space)


class _MomentCache:
    # kernel moments of f_k+ + f_k- are reused by K and every Gamma(., f_k)
    def __init__(self, space):
        self.space = space
        self.store = {}

    def get(self, k, f):
        if k not in self.store:
            self.store[k] = kernel_moments(f.total, self.space.grid)
        return self.store[k]


def _check_finite(f, what):
    for u in (f.plus, f.minus):
        if not np.all(np.isfinite(u)):
            raise NumericalOverflowError(f"non-finite values in {what}")


def generate_sequence(f0, e0, b0, m, space, max_depth=DEFAULT_MAX_DEPTH):
    """Build f_k, E_k, B_k for k = 0..m."""
    if not (0 <= m <= max_depth):
        raise InvalidArgumentError(f"depth m = {m} outside 0..{max_depth}")
    space.check(f0)
    grid = space.grid
    grid.sigma
    torus = space.torus
    cache = _MomentCache(space)
    fs, es, bs = [f0], [np.asarray(e0, dtype=np.float64)], [np.asarray(b0, dtype=np.float64)]
    for k in range(m):
        fk = fs[k]
        mom = cache.get(k, fk)
        tr = fk.map(space.transport)
        nxt = (-1.0) * tr + a_operator(fk, grid) + k_operator(fk, grid, moments=mom) \
            + space.field_source(es[k])
        for j in range(k + 1):
            c = float(comb(k, j))
            lor = space.lorentz(fs[k - j], es[j], bs[j])
            gam = gamma_bilinear(fs[j], fs[k - j], grid, moments=cache.get(k - j, fs[k - j]))
            nxt = nxt + c * (lor + gam)
        _check_finite(nxt, f"f_{k + 1}")
        _, jk = space.moments(fk)
        e_next = torus.curl(bs[k]) - jk
        b_next = -torus.curl(es[k])
        if not (np.all(np.isfinite(e_next)) and np.all(np.isfinite(b_next))):
            raise NumericalOverflowError(f"non-finite field at level {k + 1}")
        fs.append(nxt)
        es.append(e_next)
        bs.append(b_next)
    return CompatSequence(fs, es, bs, m, space)


def straight_line_first_step(f0, e0, b0, space):
    """f_1, E_1, B_1 written out term by term, without the binomial loop."""
    grid = space.grid
    grid.sigma
    v = grid.v
    sq = grid.sqrtJ
    vde = np.einsum("abci,xyzi->xyzabc", v, e0)
    frc = np.asarray(e0)[:, :, :, None, None, None, :] + np.cross(v, np.asarray(b0)[:, :, :, None, None, None, :])
    af = a_operator(f0, grid)
    kf = k_operator(f0, grid)
    gf = gamma_bilinear(f0, f0, grid)
    out = []
    for q, u, a_u, k_u, g_u in ((1.0, f0.plus, af.plus, kf.plus, gf.plus),
                                (-1.0, f0.minus, af.minus, kf.minus, gf.minus)):
        adv = sum(v[..., i] * space.x_derivative(u, i) for i in range(3) if space.torus.shape[i] > 1)
        push = np.einsum("...i,...i->...", frc, grid.grad(u))
        out.append(-adv + a_u + k_u + q * vde * sq - q * push + 0.5 * q * vde * u + g_u)
    d = sq * (f0.plus - f0.minus)
    j0 = np.einsum("xyzabc,abci->xyzi", d, v) * grid.h ** 3
    e1 = space.torus.curl(b0) - j0
    b1 = -space.torus.curl(e0)
    return TwoSpecies(*out), e1, b1


@dataclass(frozen=True)
class CompatReport:
    """Per-k residual lists; boundary entries are None on a torus."""

    srbc: list
    e_tangential: list
    b_normal: list
    div_b: list
    gauss: list
    continuity: list

    def as_dict(self):
        return {k: getattr(self, k) for k in
                ("srbc", "e_tangential", "b_normal", "div_b", "gauss", "continuity")}


def validate_compatibility(seq, wall_nodes=None):
    """Residuals of the compatibility conditions for every k.

    wall_nodes lists x3 indices of wall planes with normal e3 (slab runs);
    None means a torus and the boundary checks are skipped.  The continuity
    entry k is int sqrt(J) q.f_{k+1} + div_x int v sqrt(J) q.f_k (sup norm).
    """
    space = seq.space
    torus = space.torus
    srbc, etan, bnor, divb, gauss, cont = [], [], [], [], [], []
    for k in range(seq.m + 1):
        f, e, b = seq.f_seq[k], seq.e_seq[k], seq.b_seq[k]
        rho, j = space.moments(f)
        divb.append(torus.norm(torus.div(b)))
        gauss.append(torus.norm(torus.div(e) - rho))
        if k < seq.m:
            rho_next, _ = space.moments(seq.f_seq[k + 1])
            cont.append(float(np.max(np.abs(rho_next + torus.div(j)))))
        if wall_nodes is None:
            srbc.append(None)
            etan.append(None)
            bnor.append(None)
            continue
        idx = list(wall_nodes)
        s = 0.0
        for u in (f.plus, f.minus):
            w = u[:, :, idx]
            s = max(s, float(np.max(np.abs(w - space.reflect_p3(w)), initial=0.0)))
        srbc.append(s)
        etan.append(float(np.max(np.abs(e[:, :, idx, :2]), initial=0.0)))
        bnor.append(float(np.max(np.abs(b[:, :, idx, 2]), initial=0.0)))
    return CompatReport(srbc, etan, bnor, divb, gauss, cont)


def proxy_pieces(f, space, theta):
    """Weighted pieces |f|, |grad_p f|, |D^2_p f|, |v.grad_x f| times p0^theta.

    Returns a list over both species of the four arrays (vector and matrix
    pieces reduced to their Euclidean magnitude per node).
    """
    grid = space.grid
    w = grid.p0 ** theta
    out = []
    for u in (f.plus, f.minus):
        g = grid.grad(u)
        hess = np.stack([grid.grad(g[..., i]) for i in range(3)], axis=-2)
        out.extend([np.abs(u) * w, np.sqrt(np.sum(g * g, axis=-1)) * w,
                    np.sqrt(np.sum(hess * hess, axis=(-2, -1))) * w,
                    np.abs(space.transport(u)) * w])
    return out


def proxy_power_sums(f, space, r, theta):
    """Per-piece sum |piece|^r dx dp, or per-piece sup when r is infinite."""
    vol = space.volume_element
    pieces = proxy_pieces(f, space, theta)
    if np.isinf(r):
        return [float(np.max(a, initial=0.0)) for a in pieces]
    return [float(np.sum(a ** r)) * vol for a in pieces]


def relativistic_norm_proxy(f, space, r, theta):
    """Discrete stand-in for the kinetic Sobolev norm with weight p0^theta.

    Sum of weighted L_r norms of f, grad_p f, D^2_p f and v.grad_x f over
    space and momentum, both species; r = inf gives sups.  The transport
    piece uses the same spectral x-derivative as the stepper.
    """
    sums = proxy_power_sums(f, space, r, theta)
    if np.isinf(r):
        return float(sum(sums))
    return float(sum(s ** (1.0 / r) for s in sums))


def smallness_check(seq, r_list=(2.0, 6.0, 12.0, 16.0), theta=4.0, M=10.0, eps=1e-4):
    """Smallness functional of the initial data and the verdict value <= eps / M.

    Level i (1-based) runs over k = 0 .. m - i + 1 with weight theta / 2^k.
    """
    space = seq.space
    total = 0.0
    for i, r in enumerate(r_list, start=1):
        for k in range(0, seq.m - i + 2):
            total += relativistic_norm_proxy(seq.f_seq[k], space, r, theta / 2 ** k) ** 2
    for k in range(seq.m + 1):
        total += space.torus.norm(seq.e_seq[k]) ** 2 + space.torus.norm(seq.b_seq[k]) ** 2
    return total, bool(total <= eps / M)


def preset_initial_data(space, name="small", amplitude=1e-3, odd_p3=False):
    """Seedless presets.

    "small": f0 = c cos(2 pi x3 / L) J(p) (1.1, 0.9), with c chosen so that
    relativistic_norm_proxy(f0, r=2, theta=4) equals amplitude; E0 solves
    div E = rho and B0 = c (cos(2 pi x3 / L), 0, 0).  Both profiles
    are even about x3 = 0 and x3 = L/2 and the momentum profile is radial, so
    those planes carry the wall conditions for every k.  odd_p3 multiplies
    the momentum profile by tanh(p3), which breaks specular symmetry.
    """
    from .maxwell import divcurl_solve

    if name not in ("small", "zero"):
        raise InvalidArgumentError(f"unknown preset {name!r}")
    torus = space.torus
    grid = space.grid
    if name == "zero":
        z = np.zeros(torus.shape + (3,))
        return space.zeros(), z, z.copy()
    x3 = torus.coords[..., 2]
    kx = 2 * np.pi / torus.lengths[2]
    mom = grid.J
    if odd_p3:
        mom = mom * np.tanh(grid.points[..., 2])
    f0 = space.from_profile(np.cos(kx * x3), 1.1 * mom, 0.9 * mom)
    scale = amplitude / relativistic_norm_proxy(f0, space, 2.0, 4.0)
    f0 = scale * f0
    rho, _ = space.moments(f0)
    e0 = divcurl_solve(np.zeros(torus.shape + (3,)), rho - np.mean(rho), torus)
    b0 = np.zeros(torus.shape + (3,))
    b0[..., 0] = scale * np.cos(kx * x3)
    return f0, e0, b0
