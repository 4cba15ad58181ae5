"""Linearized collision operators around the Juttner equilibrium.

With F = J + sqrt(J) f for each species, the linearization of the
two-species Landau operator splits into

    A f  = 2 J^{-1/2} C(sqrt(J) f, J)                 (per species)
    K f  = J^{-1/2} C(J, sqrt(J) (f+ + f-)) (1, 1)
    Gamma(g, h) = J^{-1/2} C(sqrt(J) g, sqrt(J) (h+ + h-))

and each has a closed differential form that only needs the moments

    I_H  = int Phi sqrt(J) H dq,       I_dH = int Phi sqrt(J) grad H dq.

Closed forms used here (sigma = 2 int Phi J dq):

    A f        = div(sigma grad f) - 1/4 v.sigma.v f + 1/2 div(sigma v) f
    K f        = J^{-1/2} div(J a_G) (1, 1),  a_G = -(I_dG + 1/2 I_G v)
    Gamma(g,h) = div Y - 1/2 v.Y,             Y = I_H grad g - g I_dH

The *_direct functions evaluate the same operators through
collision_bilinear and serve as the second route of every equivalence check.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import (DegenerateCoefficientsError, InvalidArgumentError, ShapeMismatchError,
                     StateError)
from .kernel import collision_bilinear, kappa


@dataclass(frozen=True)
class TwoSpecies:
    """A pair of fields (f+, f-) on one grid; leading batch axes allowed."""

    plus: np.ndarray
    minus: np.ndarray

    def __post_init__(self):
        plus = np.asarray(self.plus, dtype=np.float64)
        minus = np.asarray(self.minus, dtype=np.float64)
        if plus.shape != minus.shape:
            raise ShapeMismatchError(f"species shapes differ: {plus.shape} vs {minus.shape}")
        object.__setattr__(self, "plus", plus)
        object.__setattr__(self, "minus", minus)

    @classmethod
    def zeros(cls, shape):
        return cls(np.zeros(shape), np.zeros(shape))

    @classmethod
    def from_array(cls, arr):
        """Inverse of stack(): species on axis 0."""
        arr = np.asarray(arr, dtype=np.float64)
        return cls(arr[0], arr[1])

    @property
    def shape(self):
        return self.plus.shape

    def stack(self):
        return np.stack([self.plus, self.minus])

    @property
    def total(self):
        """f+ + f-, the only combination K and Gamma see in their second slot."""
        return self.plus + self.minus

    @property
    def charge(self):
        """f+ - f-."""
        return self.plus - self.minus

    def map(self, fn):
        return TwoSpecies(fn(self.plus), fn(self.minus))

    def __add__(self, other):
        return TwoSpecies(self.plus + other.plus, self.minus + other.minus)

    def __sub__(self, other):
        return TwoSpecies(self.plus - other.plus, self.minus - other.minus)

    def __mul__(self, s):
        return TwoSpecies(s * self.plus, s * self.minus)

    __rmul__ = __mul__

    def __neg__(self):
        return TwoSpecies(-self.plus, -self.minus)

    def max_abs(self):
        return float(max(np.max(np.abs(self.plus), initial=0.0),
                         np.max(np.abs(self.minus), initial=0.0)))


# species sign diag(1, -1) and the two fixed directions (1, 1), (-1, 1)
XI = (1.0, -1.0)


def xi(f):
    """Apply diag(1, -1)."""
    return TwoSpecies(f.plus, -f.minus)


def xi0(u):
    """u (1, 1)."""
    return TwoSpecies(u, u)


def xi1(u):
    """u (-1, 1)."""
    return TwoSpecies(-u, u)


def _check_pair(f, grid):
    if not isinstance(f, TwoSpecies):
        raise InvalidArgumentError("expected a TwoSpecies field")
    grid.check_field(f.plus)
    return f


def _require_sigma(grid):
    # sigma is a cached_property; its value lands in the instance dict
    if "sigma" not in grid.__dict__:
        raise StateError("sigma has not been computed on this grid; access grid.sigma first")
    return grid.sigma


def _mat_vec(m, u):
    return np.einsum("...ij,...j->...i", m, u)


def _quad(v, m, u):
    return np.einsum("...i,...ij,...j->...", v, m, u)


def kernel_moments(h_total, grid):
    """I_H = int Phi sqrt(J) H and I_dH = int Phi sqrt(J) grad H at the nodes."""
    h_total = grid.check_field(h_total)
    grid.check_resolution()
    sq = grid.sqrtJ
    return grid.field_moments(scalar=sq * h_total, vector=sq[..., None] * grid.grad(h_total))


def _zero_faces(u, grid):
    u[..., ~grid.interior_mask()] = 0.0
    return u


def a_operator(f, grid):
    """A f per species: div(sigma grad f) - 1/4 v.sigma.v f + 1/2 div(sigma v) f."""
    f = _check_pair(f, grid)
    sigma = _require_sigma(grid)
    v = grid.v
    quad = _quad(v, sigma, v)
    div_sv = grid.div(_mat_vec(sigma, v))

    def one(u):
        out = grid.div(_mat_vec(sigma, grid.grad(u))) - 0.25 * quad * u + 0.5 * div_sv * u
        return _zero_faces(out, grid)

    return f.map(one)


def drift_coefficient(i_h, i_dh, grid):
    """a = -(I_dH + 1/2 I_H v); equals -int Phi sqrt(J) (grad H + v(q) H / 2) dq."""
    return -(i_dh + 0.5 * _mat_vec(i_h, grid.v))


def k_operator(f, grid, moments=None):
    """K f = J^{-1/2} div(J a) (1, 1) with a built from f+ + f-."""
    f = _check_pair(f, grid)
    i_h, i_dh = moments if moments is not None else kernel_moments(f.total, grid)
    a = drift_coefficient(i_h, i_dh, grid)
    out = grid.div(grid.J[..., None] * a) / grid.sqrtJ
    return xi0(_zero_faces(out, grid))


def gamma_bilinear(g, h, grid, moments=None):
    """Gamma(g, h) per species: div Y - 1/2 v.Y with Y = I_H grad g - g I_dH."""
    g = _check_pair(g, grid)
    h = _check_pair(h, grid)
    if g.shape != h.shape:
        raise ShapeMismatchError(f"fields differ in shape: {g.shape} vs {h.shape}")
    i_h, i_dh = moments if moments is not None else kernel_moments(h.total, grid)
    v = grid.v

    def one(u):
        y = _mat_vec(i_h, grid.grad(u)) - u[..., None] * i_dh
        return _zero_faces(grid.div(y) - 0.5 * np.sum(v * y, axis=-1), grid)

    return g.map(one)


# second route: the definitions through the bilinear collision operator

def a_operator_direct(f, grid):
    """2 J^{-1/2} C(sqrt(J) f, J) per species."""
    f = _check_pair(f, grid)
    sq = grid.sqrtJ

    def one(u):
        jj = np.broadcast_to(grid.J, u.shape)
        return 2.0 * collision_bilinear(sq * u, jj, grid) / sq

    return f.map(one)


def k_operator_direct(f, grid):
    """J^{-1/2} C(J, sqrt(J) (f+ + f-)) (1, 1)."""
    f = _check_pair(f, grid)
    sq = grid.sqrtJ
    g = sq * f.total
    return xi0(collision_bilinear(np.broadcast_to(grid.J, g.shape), g, grid) / sq)


def gamma_bilinear_direct(g, h, grid):
    """J^{-1/2} C(sqrt(J) g, sqrt(J) (h+ + h-)) per species."""
    g = _check_pair(g, grid)
    h = _check_pair(h, grid)
    sq = grid.sqrtJ
    hh = sq * h.total
    return g.map(lambda u: collision_bilinear(sq * u, hh, grid) / sq)


@dataclass(frozen=True)
class CoefficientFields:
    """Coefficients of the linearized equation frozen at a state g.

    sigma_G = sigma + I_G and a_g = -(I_dG + 1/2 I_G v) with G = g+ + g-;
    c_g = -1/4 v.sigma.v + 1/2 div(sigma v) - div(I_dG) + 1/2 v.I_dG.
    sigma_g holds sigma + int Phi sqrt(J) g dq per species on axis 0 when
    requested, else None.
    """

    sigma_G: np.ndarray
    a_g: np.ndarray
    c_g: np.ndarray
    sigma_g: np.ndarray = None
    min_eigenvalue: float = float("nan")


def sigma_divergence(grid, method="sampled"):
    """div(sigma v) and v.sigma.v with sigma's p-derivative taken one of two ways.

    "sampled" differences the node values of sigma.  "under_integral"
    differences the quadrature itself at targets shifted by +-h/2 along each
    axis; the shifted targets never meet a node, so the singular cell is
    sampled off-centre and that route is only first order.
    """
    sigma = _require_sigma(grid)
    v = grid.v
    quad = _quad(v, sigma, v)
    if method == "sampled":
        return grid.div(_mat_vec(sigma, v)), quad
    if method != "under_integral":
        raise InvalidArgumentError(f"unknown sigma derivative method {method!r}")
    h = grid.h
    pts = grid.nodes
    div = np.zeros(grid.size)
    vflat = v.reshape(-1, 3)
    p0 = grid.p0.reshape(-1)
    for k in range(3):
        e = np.zeros(3)
        e[k] = 0.5 * h
        mp, _ = grid.moments(scalar=2.0 * grid.J, targets=pts + e)
        mm, _ = grid.moments(scalar=2.0 * grid.J, targets=pts - e)
        # d/dp_k of (sigma v)_k = (d sigma / dp_k) v + sigma dv/dp_k
        dsig = (mp - mm) / h
        dv = (np.eye(3)[k] - vflat * vflat[:, k:k + 1]) / p0[:, None]
        sig = sigma.reshape(-1, 3, 3)
        div += np.einsum("nj,nj->n", dsig[:, k, :], vflat) + np.einsum("nj,nj->n", sig[:, k, :], dv)
    return div.reshape(grid.shape), quad


def assemble_coefficients(g, grid, delta0=None, sigma_derivative="sampled",
                          species_sigma=False, moments=None):
    """Assemble sigma_G, a_g, c_g at the frozen state g.

    delta0 is the ellipticity floor; by default half the smallest eigenvalue
    of sigma over the grid.  Raises DegenerateCoefficientsError at the first
    node where sigma_G drops below it.
    """
    g = _check_pair(g, grid)
    sigma = _require_sigma(grid)
    i_g, i_dg = moments if moments is not None else kernel_moments(g.total, grid)
    sigma_G = sigma + i_g
    a_g = drift_coefficient(i_g, i_dg, grid)
    div_sv, quad = sigma_divergence(grid, sigma_derivative)
    c_g = -0.25 * quad + 0.5 * div_sv - grid.div(i_dg) + 0.5 * np.sum(grid.v * i_dg, axis=-1)

    eig = np.linalg.eigvalsh(sigma_G)[..., 0]
    if delta0 is None:
        delta0 = 0.5 * float(np.min(np.linalg.eigvalsh(sigma)[..., 0]))
    lo = float(np.min(eig))
    if lo < delta0:
        node = np.unravel_index(int(np.argmin(eig)), eig.shape)
        raise DegenerateCoefficientsError(
            f"sigma_G loses ellipticity: eigenvalue {lo:.4g} < {delta0:.4g}",
            node=tuple(int(i) for i in node), min_eigenvalue=lo)

    sigma_g = None
    if species_sigma:
        sq = grid.sqrtJ
        mats, _ = grid.field_moments(scalar=np.stack([sq * g.plus, sq * g.minus]))
        sigma_g = sigma + mats
    return CoefficientFields(sigma_G=sigma_G, a_g=a_g, c_g=c_g, sigma_g=sigma_g,
                             min_eigenvalue=lo)


@dataclass(frozen=True)
class WeightedNormParams:
    """Exponent r (math.inf allowed) and momentum weight p0^theta."""

    r: float = 2.0
    theta: float = 0.0

    def __post_init__(self):
        if not (self.r >= 1.0):
            raise InvalidArgumentError(f"integrability exponent must be >= 1, got {self.r}")
        if not (np.isfinite(self.theta) and self.theta >= 0.0):
            raise InvalidArgumentError("theta must be finite and non-negative")


def weighted_norm(f, params, grid, cell_volume=1.0):
    """||p0^theta f||_{L_r} over the momentum axes and any leading axes.

    Leading (spatial) axes are summed with weight cell_volume.  A TwoSpecies
    argument counts both species.  r = inf gives the grid sup.
    """
    parts = [f.plus, f.minus] if isinstance(f, TwoSpecies) else [np.asarray(f, dtype=np.float64)]
    w = grid.p0 ** params.theta
    vals = [np.abs(grid.check_field(u)) * w for u in parts]
    if math.isinf(params.r):
        return float(max(np.max(u, initial=0.0) for u in vals))
    r = params.r
    total = sum(float(np.sum(u ** r)) for u in vals) * grid.h ** 3 * cell_volume
    return total ** (1.0 / r)


def dissipation_probe(g, theta, grid):
    """(q, d, m) = (-<A g, g p0^{2 theta}>, ||grad g||^2_{2,theta}, ||g||^2_2).

    Both species are summed.  No sign is asserted.
    """
    g = _check_pair(g, grid)
    ag = a_operator(g, grid)
    w = grid.p0 ** (2.0 * theta)
    dv = grid.h ** 3
    q = -sum(float(np.sum(a * u * w)) for a, u in ((ag.plus, g.plus), (ag.minus, g.minus))) * dv
    d = sum(float(np.sum(np.sum(grid.grad(u) ** 2, axis=-1) * w)) for u in (g.plus, g.minus)) * dv
    m = sum(float(np.sum(u * u)) for u in (g.plus, g.minus)) * dv
    return q, d, m


def nonpositivity_diagnostic(g, grid):
    """<(A + K) g, g> unweighted; reported, never asserted."""
    g = _check_pair(g, grid)
    tot = a_operator(g, grid) + k_operator(g, grid)
    return (float(np.sum(tot.plus * g.plus)) + float(np.sum(tot.minus * g.minus))) * grid.h ** 3


def ibp_identity_sides(g, grid):
    """Both sides of the integration-by-parts identity for the kernel.

    Returns (lhs, rhs) on the grid with

        lhs = div_p int Phi sqrt(J) grad g dq
        rhs = div_p int Phi (v(q)/2) sqrt(J) g dq
              - 4 int (P.Q) / (p0 q0 ((P.Q)^2 - 1)^{1/2}) sqrt(J) g dq
              - 2^{-3/2} kappa(p) sqrt(J(p)) g(p).

    The last term is the point mass carried by the q-divergence of Phi,
    div_q Phi = 2 Lambda / (p0 q0) ((P.Q) p - q), at q = p.  The outermost
    node layer is zeroed on both sides.
    """
    g = grid.check_field(g)
    grid.check_resolution()
    sq = grid.sqrtJ
    _, lhs_flux = grid.field_moments(vector=sq[..., None] * grid.grad(g))
    lhs = _zero_faces(grid.div(lhs_flux), grid)

    _, half = grid.field_moments(vector=0.5 * grid.v * (sq * g)[..., None])
    smooth = grid.scalar_kernel_moments(sq * g)
    radii, inverse = np.unique(np.round(np.sum(grid.nodes ** 2, axis=1), 12), return_inverse=True)
    kap = np.array([kappa(np.array([math.sqrt(r), 0.0, 0.0])) for r in radii])[inverse]
    point = 2.0 ** -1.5 * kap.reshape(grid.shape) * sq * g
    rhs = _zero_faces(grid.div(half) - 4.0 * smooth - point, grid)
    return lhs, rhs


def fit_bound_constant(lhs, rhs, safety=2.0):
    """Smallest N with lhs <= N rhs on the sample, times a safety factor."""
    lhs = np.asarray(lhs, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    if np.any(rhs <= 0):
        raise InvalidArgumentError("bounding quantities must be positive")
    return safety * float(np.max(lhs / rhs))


def fit_coercivity(q, d, m, kappa_safety=0.5, n_safety=2.0):
    """Fit (kappa, N) in q >= kappa d - N m from a training family.

    kappa is the least-squares slope of q against (d, -m) scaled down by
    kappa_safety; N is the smallest value making every training sample
    satisfy the inequality at that kappa, scaled up by n_safety.
    """
    q, d, m = (np.asarray(a, dtype=np.float64) for a in (q, d, m))
    design = np.stack([d, -m], axis=1)
    (k_ls, _), *_ = np.linalg.lstsq(design, q, rcond=None)
    if k_ls <= 0:
        # fall back to the best pointwise ratio
        k_ls = float(np.max(q / d))
    kap = kappa_safety * float(k_ls)
    need = np.max((kap * d - q) / m)
    n_const = n_safety * max(float(need), 0.0)
    return kap, n_const


def coercivity_holds(q, d, m, kap, n_const):
    q, d, m = (np.asarray(a, dtype=np.float64) for a in (q, d, m))
    return bool(np.all(q >= kap * d - n_const * m)), q - (kap * d - n_const * m)
