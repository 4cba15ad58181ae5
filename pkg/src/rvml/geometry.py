"""Boundary charts, specular reflection, momentum compactification and mirroring.

A chart flattens the wall x3 = rho(x1, x2) through

    x(y) = (y1, y2, rho(y1, y2)) + y3 (-rho_1^e, -rho_2^e, 1),   e = |y3|,

where rho^e is the Gaussian mollification of rho with width e.  Momenta
transform as p = M(y) w with M = dx/dy, and the compactified momentum is
v = w / sqrt(1 + |M w|^2), so that M v is the physical velocity.

R = diag(1, 1, -1) throughout.
"""

from dataclasses import dataclass, field
import math
import re

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import ChartDomainError, InvalidArgumentError, OutOfRangeError
from ._quadrature import phi_moments

R = np.diag([1.0, 1.0, -1.0])
R.setflags(write=False)


def specular_reflect(p, n):
    """R_x p = p - 2 (p.n) n for a unit normal n."""
    p = np.asarray(p, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    norm = np.sqrt(np.sum(n * n, axis=-1))
    if np.any(np.abs(norm - 1.0) > 1e-12):
        raise InvalidArgumentError("normal must have unit length")
    return p - 2.0 * np.sum(p * n, axis=-1, keepdims=True) * n


# ---- surfaces -------------------------------------------------------------
#
# Each surface supplies rho and its derivatives, plus Gaussian mollifications
# of the derivatives.  Gaussian mollification with width e solves the heat
# equation in t = e^2 / 2, so d/de of a mollified quantity is e times the
# mollified Laplacian; the chart only needs the Laplacian of grad rho.

class Surface:
    """Base class: a wall x3 = rho(y1, y2)."""

    def value(self, y1, y2):
        raise NotImplementedError

    def grad(self, y1, y2, eps=0.0):
        raise NotImplementedError

    def hess(self, y1, y2, eps=0.0):
        raise NotImplementedError

    def lap_grad(self, y1, y2, eps=0.0):
        """Mollified Laplacian of (rho_1, rho_2)."""
        raise NotImplementedError

    def hess_bound(self):
        """Upper bound on the spectral norm of D^2 rho."""
        raise NotImplementedError


class Flat(Surface):
    def value(self, y1, y2):
        return np.zeros_like(np.asarray(y1, dtype=np.float64))

    def grad(self, y1, y2, eps=0.0):
        z = np.zeros_like(np.asarray(y1, dtype=np.float64))
        return np.stack([z, z], axis=-1)

    def hess(self, y1, y2, eps=0.0):
        z = np.zeros_like(np.asarray(y1, dtype=np.float64))
        return np.stack([np.stack([z, z], -1), np.stack([z, z], -1)], -2)

    def lap_grad(self, y1, y2, eps=0.0):
        return self.grad(y1, y2)

    def hess_bound(self):
        return 0.0


@dataclass(frozen=True)
class Linear(Surface):
    a: float = 0.0
    b: float = 0.0

    def value(self, y1, y2):
        return self.a * np.asarray(y1, dtype=np.float64) + self.b * np.asarray(y2, dtype=np.float64)

    def grad(self, y1, y2, eps=0.0):
        y1 = np.asarray(y1, dtype=np.float64)
        return np.stack([np.full_like(y1, self.a), np.full_like(y1, self.b)], axis=-1)

    def hess(self, y1, y2, eps=0.0):
        return Flat().hess(y1, y2)

    def lap_grad(self, y1, y2, eps=0.0):
        return Flat().grad(y1, y2)

    def hess_bound(self):
        return 0.0


@dataclass(frozen=True)
class Quadratic(Surface):
    """rho = c11 y1^2 + 2 c12 y1 y2 + c22 y2^2; mollification leaves grad rho unchanged."""

    c11: float = 0.0
    c12: float = 0.0
    c22: float = 0.0

    def value(self, y1, y2):
        y1 = np.asarray(y1, dtype=np.float64)
        y2 = np.asarray(y2, dtype=np.float64)
        return self.c11 * y1 ** 2 + 2.0 * self.c12 * y1 * y2 + self.c22 * y2 ** 2

    def grad(self, y1, y2, eps=0.0):
        y1 = np.asarray(y1, dtype=np.float64)
        y2 = np.asarray(y2, dtype=np.float64)
        return np.stack([2.0 * (self.c11 * y1 + self.c12 * y2),
                         2.0 * (self.c12 * y1 + self.c22 * y2)], axis=-1)

    def hess(self, y1, y2, eps=0.0):
        y1 = np.asarray(y1, dtype=np.float64)
        h = 2.0 * np.array([[self.c11, self.c12], [self.c12, self.c22]])
        return np.broadcast_to(h, y1.shape + (2, 2)).copy()

    def lap_grad(self, y1, y2, eps=0.0):
        return Flat().grad(y1, y2)

    def hess_bound(self):
        return 2.0 * float(np.max(np.abs(np.linalg.eigvalsh(
            np.array([[self.c11, self.c12], [self.c12, self.c22]])))))


@dataclass(frozen=True)
class Sinusoidal(Surface):
    """rho = amp sin(k y1) cos(k y2); mollification damps by exp(-k^2 e^2)."""

    k: float = 1.0
    amp: float = 0.1

    def _damp(self, eps):
        return np.exp(-(self.k * np.asarray(eps, dtype=np.float64)) ** 2)

    def value(self, y1, y2):
        return self.amp * np.sin(self.k * np.asarray(y1)) * np.cos(self.k * np.asarray(y2))

    def grad(self, y1, y2, eps=0.0):
        k, a = self.k, self.amp * self._damp(eps)
        s1, c1 = np.sin(k * np.asarray(y1)), np.cos(k * np.asarray(y1))
        s2, c2 = np.sin(k * np.asarray(y2)), np.cos(k * np.asarray(y2))
        return np.stack([a * k * c1 * c2, -a * k * s1 * s2], axis=-1)

    def hess(self, y1, y2, eps=0.0):
        k, a = self.k, self.amp * self._damp(eps)
        s1, c1 = np.sin(k * np.asarray(y1)), np.cos(k * np.asarray(y1))
        s2, c2 = np.sin(k * np.asarray(y2)), np.cos(k * np.asarray(y2))
        h11 = -a * k * k * s1 * c2
        h12 = -a * k * k * c1 * s2
        h22 = -a * k * k * s1 * c2
        return np.stack([np.stack([h11, h12], -1), np.stack([h12, h22], -1)], -2)

    def lap_grad(self, y1, y2, eps=0.0):
        # each Fourier mode has |wavevector|^2 = 2 k^2
        return -2.0 * self.k ** 2 * self.grad(y1, y2, eps)

    def hess_bound(self):
        return 2.0 * abs(self.amp) * self.k ** 2


_PRESET_RE = re.compile(r"^\s*(\w+)\s*(?:\(([^)]*)\))?\s*$")


def surface_from_preset(spec):
    """Parse flat, linear(a,b), quadratic(c) or sinusoidal(k, amp)."""
    m = _PRESET_RE.match(spec or "")
    if not m:
        raise InvalidArgumentError(f"cannot parse surface preset {spec!r}")
    name = m.group(1).lower()
    try:
        args = [float(s) for s in m.group(2).split(",")] if m.group(2) else []
    except ValueError as exc:
        raise InvalidArgumentError(f"bad surface arguments in {spec!r}") from exc
    table = {"flat": (0, lambda: Flat()),
             "linear": (2, lambda a, b: Linear(a, b)),
             "quadratic": (1, lambda c: Quadratic(c, 0.0, c)),
             "sinusoidal": (2, lambda k, amp: Sinusoidal(k, amp))}
    if name not in table or len(args) != table[name][0]:
        raise InvalidArgumentError(f"unknown surface preset {spec!r}")
    return table[name][1](*args)


# ---- charts ---------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryChart:
    """Flattening chart y -> x for a wall surface.

    radius bounds |y3| so that |y3| |D^2 rho| <= 1/2, which keeps dx/dy
    invertible.
    """

    surface: Surface
    radius: float = field(default=None)
    fd_step: float = 1e-5

    def __post_init__(self):
        if self.radius is None:
            hb = self.surface.hess_bound()
            object.__setattr__(self, "radius", 0.5 / hb if hb > 0 else 1e3)

    def _split(self, y):
        y = np.asarray(y, dtype=np.float64)
        if y.shape[-1:] != (3,):
            raise InvalidArgumentError("chart points need a trailing axis of length 3")
        return y, y[..., 0], y[..., 1], y[..., 2]

    def to_physical(self, y):
        """x(y); the map the chart inverts."""
        y, y1, y2, y3 = self._split(y)
        g = self.surface.grad(y1, y2, np.abs(y3))
        return np.stack([y1 - y3 * g[..., 0], y2 - y3 * g[..., 1],
                         self.surface.value(y1, y2) + y3], axis=-1)

    def jacobi(self, y):
        """dx/dy, shape (..., 3, 3)."""
        y, y1, y2, y3 = self._split(y)
        eps = np.abs(y3)
        g = self.surface.grad(y1, y2, eps)
        hm = self.surface.hess(y1, y2, eps)
        lg = self.surface.lap_grad(y1, y2, eps)
        g0 = self.surface.grad(y1, y2)
        m = np.zeros(y.shape[:-1] + (3, 3))
        for i in range(2):
            for j in range(2):
                m[..., i, j] = (1.0 if i == j else 0.0) - y3 * hm[..., i, j]
            # d/dy3 of y3 rho_i^{|y3|} = rho_i^e + y3^2 (lap rho_i)^e
            m[..., i, 2] = -g[..., i] - y3 * y3 * lg[..., i]
            m[..., 2, i] = g0[..., i]
        m[..., 2, 2] = 1.0
        return m

    def metric(self, y):
        """C(y) = (dx/dy)^T (dx/dy)."""
        m = self.jacobi(y)
        return np.swapaxes(m, -1, -2) @ m

    def jacobi_derivative(self, y):
        """d(dx/dy)/dy_k by central differences; shape (..., 3, 3, 3), k last."""
        y = np.asarray(y, dtype=np.float64)
        h = self.fd_step
        out = np.zeros(y.shape[:-1] + (3, 3, 3))
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            out[..., k] = (self.jacobi(y + e) - self.jacobi(y - e)) / (2.0 * h)
        return out

    def normal(self, y1, y2):
        """Outward unit normal of the wall {x3 = rho}, domain below."""
        g = self.surface.grad(y1, y2)
        n = np.concatenate([-g, np.ones(g.shape[:-1] + (1,))], axis=-1)
        return n / np.linalg.norm(n, axis=-1, keepdims=True)

    def to_chart(self, x, tol=1e-10, max_iter=50):
        """y(x) by damped Newton; raises ChartDomainError on failure."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (3,):
            raise InvalidArgumentError("to_chart expects a single point")
        y = np.array([x[0], x[1], x[2] - float(self.surface.value(x[0], x[1]))])
        for _ in range(max_iter):
            r = self.to_physical(y) - x
            if np.linalg.norm(r) <= tol:
                break
            step = np.linalg.solve(self.jacobi(y), r)
            t = 1.0
            base = np.linalg.norm(r)
            while t > 1e-4 and np.linalg.norm(self.to_physical(y - t * step) - x) > (1 - 0.5 * t) * base:
                t *= 0.5
            y = y - t * step
        else:
            raise ChartDomainError(f"Newton inversion did not converge at x = {x}")
        if np.linalg.norm(self.to_physical(y) - x) > tol:
            raise ChartDomainError(f"Newton inversion did not converge at x = {x}")
        if abs(y[2]) > self.radius:
            raise ChartDomainError(f"|y3| = {abs(y[2]):.3g} exceeds the chart radius {self.radius:.3g}")
        return y


def build_chart(rho, radius=None):
    """Chart for a Surface instance or a preset string."""
    if isinstance(rho, str):
        rho = surface_from_preset(rho)
    if not isinstance(rho, Surface):
        raise InvalidArgumentError("rho must be a Surface or preset string")
    return BoundaryChart(rho, radius)


def reflected_momentum(chart, y1, y2, w):
    """Physical momentum of R w at the wall; equals R_x applied to M w."""
    y = np.array([y1, y2, 0.0])
    return chart.jacobi(y) @ (R @ np.asarray(w, dtype=np.float64))


# ---- momentum compactification ------------------------------------------

@dataclass(frozen=True)
class MomentumMap:
    """v = w / sqrt(1 + |M w|^2) and its inverse for a fixed matrix M."""

    m: np.ndarray

    def __post_init__(self):
        m = np.array(self.m, dtype=np.float64)
        if m.shape != (3, 3) or abs(np.linalg.det(m)) < 1e-14:
            raise InvalidArgumentError("momentum map needs a nondegenerate 3x3 matrix")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    @property
    def c(self):
        return self.m.T @ self.m

    def _mw2(self, u):
        mu = u @ self.m.T
        return np.sum(mu * mu, axis=-1)

    def compactify(self, w):
        w = np.asarray(w, dtype=np.float64)
        return w / np.sqrt(1.0 + self._mw2(w))[..., None]

    def decompactify(self, v):
        v = np.asarray(v, dtype=np.float64)
        s = 1.0 - self._mw2(v)
        if np.any(s <= 0.0):
            raise OutOfRangeError("|M v| >= 1 lies outside the image of the compactification")
        return v / np.sqrt(s)[..., None]

    def dv_dw(self, w):
        """d v_i / d w_j = delta_ij / s - w_i (C w)_j / s^3, s = (1 + |M w|^2)^{1/2}."""
        w = np.asarray(w, dtype=np.float64)
        s = np.sqrt(1.0 + self._mw2(w))[..., None, None]
        cw = w @ self.c
        return np.eye(3) / s - w[..., :, None] * cw[..., None, :] / s ** 3

    def dw_dv(self, v):
        """d w_i / d v_j = delta_ij / t + v_i (C v)_j / t^3, t = (1 - |M v|^2)^{1/2}."""
        v = np.asarray(v, dtype=np.float64)
        s = 1.0 - self._mw2(v)
        if np.any(s <= 0.0):
            raise OutOfRangeError("|M v| >= 1 lies outside the image of the compactification")
        t = np.sqrt(s)[..., None, None]
        cv = v @ self.c
        return np.eye(3) / t + v[..., :, None] * cv[..., None, :] / t ** 3


def momentum_map(m):
    return MomentumMap(m)


def jacobian_sup_norms(mmap, n, samples=2000, seed=0):
    """Sup of |dv/dw| and |dw/dv| (spectral norms) on the shell 2^{n-3/2} < |w| < 2^{n+2}.

    Directions are seeded random plus the coordinate axes; radii are spread
    log-uniformly.  Returns (sup |dv/dw|, sup |dw/dv|).
    """
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(samples, 3))
    dirs = np.concatenate([dirs, np.eye(3), -np.eye(3)])
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    lo, hi = 2.0 ** (n - 1.5), 2.0 ** (n + 2)
    radii = np.exp(rng.uniform(np.log(lo), np.log(hi), size=dirs.shape[0]))
    radii[:6] = hi * (1 - 1e-9)
    w = dirs * radii[:, None]
    fwd = np.linalg.norm(mmap.dv_dw(w), ord=2, axis=(-2, -1))
    inv = np.linalg.norm(mmap.dw_dv(mmap.compactify(w)), ord=2, axis=(-2, -1))
    return float(np.max(fwd)), float(np.max(inv))


def pushforward_matrix(a, dv_dw):
    """(dv/dw) A (dv/dw)^T for matrix fields broadcast over leading axes."""
    return dv_dw @ a @ np.swapaxes(dv_dw, -1, -2)


# ---- chart-level drifts ---------------------------------------------------

def geometric_drift(chart, y, w):
    """X = (dy/dx) (d(M w)/dy) W with W = w / sqrt(1 + |M w|^2)."""
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if np.any(np.abs(y[..., 2]) > chart.radius):
        raise ChartDomainError("point outside the chart radius")
    m = chart.jacobi(y)
    dm = chart.jacobi_derivative(y)
    mw = np.einsum("...ij,...j->...i", m, w)
    big_w = w / np.sqrt(1.0 + np.sum(mw * mw, axis=-1))[..., None]
    # d(M w)/dy_k = (dM/dy_k) w
    dmw = np.einsum("...ijk,...j->...ik", dm, w)
    return np.linalg.solve(m, np.einsum("...ik,...k->...i", dmw, big_w)[..., None])[..., 0]


def dw_dy(chart, y, v):
    """d w / d y at fixed v, w = v / sqrt(1 - v.C(y).v); shape (..., 3, 3), y index last.

    d w / d y_k = v (v . dC/dy_k . v) / (2 (1 - v.C.v)^{3/2}).
    """
    y = np.asarray(y, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    m = chart.jacobi(y)
    dm = chart.jacobi_derivative(y)
    c = np.swapaxes(m, -1, -2) @ m
    s = 1.0 - np.einsum("...i,...ij,...j->...", v, c, v)
    if np.any(s <= 0.0):
        raise OutOfRangeError("|M v| >= 1 lies outside the image of the compactification")
    # dC/dy_k = dM_k^T M + M^T dM_k
    dc = (np.einsum("...lik,...lj->...ijk", dm, m) + np.einsum("...li,...ljk->...ijk", m, dm))
    vdcv = np.einsum("...i,...ijk,...j->...k", v, dc, v)
    return 0.5 * v[..., :, None] * vdcv[..., None, :] / s[..., None, None] ** 1.5


def newtonian_drift(chart, y, v):
    """G = (dv/dw) (dw/dy) v at fixed v."""
    y = np.asarray(y, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    mmap_m = chart.jacobi(y)
    t = dw_dy(chart, y, v)
    mv = np.einsum("...ij,...j->...i", mmap_m, v)
    w = v / np.sqrt(1.0 - np.sum(mv * mv, axis=-1))[..., None]
    c = np.swapaxes(mmap_m, -1, -2) @ mmap_m
    s = np.sqrt(1.0 + np.einsum("...i,...ij,...j->...", w, c, w))[..., None, None]
    cw = np.einsum("...ij,...j->...i", c, w)
    dvdw = np.eye(3) / s - w[..., :, None] * cw[..., None, :] / s ** 3
    return np.einsum("...ij,...jk,...k->...i", dvdw, t, v)


def newtonian_identity_sides(chart, phi, u, y, h, w_max=6.0, v_cut=0.95):
    """Both sides of the change-of-momentum identity at one chart point y.

        lhs = int (W . grad_y phi) u dw
        rhs = int (v . grad_y phi^) u^ dv - int (G . grad_v phi^) u^ dv

    with W = w / sqrt(1 + |M w|^2), phi^(y, v) = phi(y, w(y, v)) and
    u^ = u |det dw/dv|.  phi and u are callables (y, w) -> values over the
    leading axes of w.  The w box has half-width w_max and spacing h; the
    v box covers the image ellipsoid with the same node count, keeping
    nodes with |M v| <= v_cut.  Derivatives are central differences with
    step h, so the sides agree to O(h^2) when u decays inside both boxes.
    """
    y = np.asarray(y, dtype=np.float64)
    n = int(round(2 * w_max / h)) + 1
    ax = np.linspace(-w_max, w_max, n)
    hw = ax[1] - ax[0]
    w = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1)
    m = chart.jacobi(y)
    big_w = MomentumMap(m).compactify(w)
    eye = np.eye(3)
    grad_y = np.stack([(phi(y + h * e, w) - phi(y - h * e, w)) / (2 * h) for e in eye], axis=-1)
    lhs = float(np.sum(np.sum(big_w * grad_y, axis=-1) * u(y, w))) * hw ** 3

    # the image of R^3 is {|M v| < 1}, inside the ball of radius 1 / s_min(M)
    b = 1.0 / np.linalg.svd(m, compute_uv=False)[-1]
    axv = np.linspace(-b, b, n)
    hv = axv[1] - axv[0]
    v = np.stack(np.meshgrid(axv, axv, axv, indexing="ij"), axis=-1)
    # both stencils must stay inside the image of every shifted map
    keep = np.ones(v.shape[:-1], dtype=bool)
    shifts = [s * e for e in np.eye(3) for s in (1, -1)]
    for yy in [y] + [y + h * d for d in shifts]:
        mv = v @ chart.jacobi(yy).T
        keep &= np.sum(mv * mv, axis=-1) <= v_cut ** 2
    for d in shifts:
        mv = (v + hv * d) @ m.T
        keep &= np.sum(mv * mv, axis=-1) <= v_cut ** 2
    v = v[keep]

    def phi_hat(yy, vv):
        return phi(yy, MomentumMap(chart.jacobi(yy)).decompactify(vv))

    mmap = MomentumMap(m)
    w_of_v = mmap.decompactify(v)
    u_hat = u(y, w_of_v) * np.abs(np.linalg.det(mmap.dw_dv(v)))
    gy = np.stack([(phi_hat(y + h * e, v) - phi_hat(y - h * e, v)) / (2 * h) for e in eye], axis=-1)
    gv = np.stack([(phi_hat(y, v + hv * e) - phi_hat(y, v - hv * e)) / (2 * hv) for e in eye], axis=-1)
    drift = newtonian_drift(chart, np.broadcast_to(y, v.shape), v)
    rhs = float(np.sum((np.sum(v * gy, axis=-1) - np.sum(drift * gv, axis=-1)) * u_hat)) * hv ** 3
    return lhs, rhs


@dataclass(frozen=True)
class NewtonianField:
    """A field resampled on a (v1, v2, v3) tensor grid at fixed y, with its drift."""

    v_axes: tuple
    values: np.ndarray
    drift: np.ndarray
    jacobian: np.ndarray


def newtonian_transform(values, w_axes, mmap, v_axes, drift=None):
    """Resample a field on a w tensor grid onto a v tensor grid.

    values(w) is interpolated (cubic) at w = W(v) for every v node; nodes
    whose preimage leaves the w box raise OutOfRangeError.  jacobian is
    |det dw/dv| at the v nodes; drift is passed through (see newtonian_drift).
    """
    grids = np.meshgrid(*v_axes, indexing="ij")
    v = np.stack(grids, axis=-1)
    w = mmap.decompactify(v)
    lo = np.array([ax[0] for ax in w_axes])
    hi = np.array([ax[-1] for ax in w_axes])
    if np.any(w < lo) or np.any(w > hi):
        raise OutOfRangeError("v grid maps outside the sampled w box")
    interp = RegularGridInterpolator(tuple(w_axes), values, method="cubic")
    out = interp(w.reshape(-1, 3)).reshape(v.shape[:-1])
    jac = np.abs(np.linalg.det(mmap.dw_dv(v)))
    return NewtonianField(tuple(v_axes), out, drift, jac)


def inverse_newtonian_transform(field_v, w_axes, mmap):
    """Back from a v tensor grid to a w tensor grid by cubic interpolation."""
    grids = np.meshgrid(*w_axes, indexing="ij")
    w = np.stack(grids, axis=-1)
    v = mmap.compactify(w)
    interp = RegularGridInterpolator(field_v.v_axes, field_v.values, method="cubic")
    return interp(v.reshape(-1, 3)).reshape(w.shape[:-1])


# ---- mirror extension -----------------------------------------------------

_KINDS = ("scalar", "vector", "matrix")


@dataclass(frozen=True)
class MirroredField:
    """Even mirror extension of a function given on {y3 <= 0}.

    scalar: u(Ry, Rw); vector: R B(Ry, Rw); matrix: R A(Ry, Rw) R.
    """

    lower: object
    kind: str = "scalar"

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InvalidArgumentError(f"unknown field kind {self.kind!r}")

    def upper(self, y, w):
        y = np.asarray(y, dtype=np.float64)
        w = np.asarray(w, dtype=np.float64)
        val = np.asarray(self.lower(y @ R, w @ R))
        if self.kind == "vector":
            return val @ R
        if self.kind == "matrix":
            return R @ val @ R
        return val

    def __call__(self, y, w):
        y = np.asarray(y, dtype=np.float64)
        if y[..., 2] <= 0.0:
            return np.asarray(self.lower(y, np.asarray(w, dtype=np.float64)))
        return self.upper(y, w)


def mirror_extend(lower, kind="scalar"):
    return MirroredField(lower, kind)


def mirror_extend_array(values, kind="scalar", y_axis=0, w_axis=-1, component_axes=0):
    """Mirror-extend samples on a node-centred lower half grid.

    values holds the lower half along y_axis, wall node last, and a full w3
    axis symmetric about 0 along w_axis.  component_axes trailing axes hold
    vector (1) or matrix (2) components.  The returned array doubles the
    y_axis length minus the shared wall node.
    """
    values = np.asarray(values, dtype=np.float64)
    if kind not in _KINDS:
        raise InvalidArgumentError(f"unknown field kind {kind!r}")
    ncomp = {"scalar": 0, "vector": 1, "matrix": 2}[kind]
    if component_axes != ncomp and component_axes != 0:
        raise InvalidArgumentError("component_axes does not match the field kind")
    nd = values.ndim
    y_axis %= nd
    w_axis %= nd
    upper = np.flip(values, axis=(y_axis, w_axis))
    upper = np.take(upper, np.arange(1, values.shape[y_axis]), axis=y_axis)
    if ncomp >= 1:
        sign = np.array([1.0, 1.0, -1.0])
        shape = [1] * nd
        shape[nd - ncomp] = 3
        upper = upper * sign.reshape(shape)
        if ncomp == 2:
            shape = [1] * nd
            shape[nd - 1] = 3
            upper = upper * sign.reshape(shape)
    return np.concatenate([values, upper], axis=y_axis)


def extended_compactify(chart, y, w):
    """v = W(y, w) with M(y) below the wall and M(Ry) R above it."""
    y = np.asarray(y, dtype=np.float64)
    m = chart.jacobi(y @ R)
    if y[2] > 0.0:
        m = m @ R
    return MomentumMap(m).compactify(w)


def pushforward_kernel_moment(chart, y, w, u, w_nodes, weight):
    """(dy/dx) U (dy/dx)^T with U(x, p) = int Phi(p, q) u(q) dq at p = M w.

    The q integral runs over q = M w' for the supplied w' nodes, with
    |det M| weight per node; a node set symmetric under w' -> R w' keeps the
    reflection structure exact.  u holds the integrand at the q nodes.
    """
    m = chart.jacobi(np.asarray(y, dtype=np.float64))
    w = np.atleast_2d(np.asarray(w, dtype=np.float64))
    q = np.asarray(w_nodes, dtype=np.float64) @ m.T
    rows = (np.asarray(u, dtype=np.float64) * abs(np.linalg.det(m)) * weight)[None, :]
    mat, _ = phi_moments(w @ m.T, q, scalar=rows)
    minv = np.linalg.inv(m)
    return minv @ mat[:, 0] @ minv.T


def jacobian_bound_fit(mmap, fit_levels=(0, 1), check_levels=(2, 3, 4), stability=2.0, seed=0):
    """Fit N in |dv/dw| <= N 2^{-n} and |dw/dv| <= N 2^{3n}; check on held-out levels.

    Returns dict with fitted constants and the worst held-out ratios.
    """
    def scaled(n):
        f, i = jacobian_sup_norms(mmap, n, seed=seed + n)
        return f * 2.0 ** n, i * 2.0 ** (-3 * n)

    fit = [scaled(n) for n in fit_levels]
    n_fwd = max(a for a, _ in fit)
    n_inv = max(b for _, b in fit)
    chk = [scaled(n) for n in check_levels]
    worst_fwd = max(a for a, _ in chk) / n_fwd
    worst_inv = max(b for _, b in chk) / n_inv
    return {"n_forward": n_fwd, "n_inverse": n_inv,
            "worst_forward_ratio": worst_fwd, "worst_inverse_ratio": worst_inv,
            "stable": bool(worst_fwd <= stability and worst_inv <= stability)}


def dyadic_weights(r, n_max, width=0.25):
    """Smooth partition of unity in r >= 0 over dyadic shells.

    Row 0 covers r < 2, row n covers 2^n < r < 2^{n+1} up to a transition
    band of width `width` in log2 r, and row n_max takes everything beyond
    2^{n_max}.  Rows sum to 1 exactly.
    """
    r = np.asarray(r, dtype=np.float64)

    def step(t):
        # smooth 0 -> 1 across |t| < width
        s = np.clip((t + width) / (2 * width), 0.0, 1.0)
        a = np.where(s > 0, np.exp(-1.0 / np.maximum(s, 1e-300)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.maximum(1 - s, 1e-300)), 0.0)
        return a / (a + b)

    lr = np.log2(np.maximum(r, 1e-300))
    # cut[n] is ~1 inside r < 2^n and ~0 outside
    cut = [step(n - lr) for n in range(1, n_max + 1)]
    rows = [cut[0]] + [cut[n] - cut[n - 1] for n in range(1, n_max)] + [1.0 - cut[-1]]
    return np.stack(rows)
