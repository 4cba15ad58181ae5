"""Relativistic collision kernel, Juttner equilibrium and momentum-grid quadrature.

Momenta are dimensionless, with energy p0 = sqrt(1 + |p|^2), velocity
v = p / p0 and Minkowski product P.Q = p0 q0 - p.q.  The kernel matrix is

    Phi(P, Q) = Lambda(P, Q) / (p0 q0) * S(P, Q),
    Lambda    = (P.Q)^2 ((P.Q)^2 - 1)^(-3/2),
    S         = ((P.Q)^2 - 1) I - (p - q)(p - q)^T + (P.Q - 1)(p q^T + q p^T).

P.Q - 1 is evaluated as (|p - q|^2 + |p x q|^2) / (p0 q0 + 1 + p.q), which
keeps full relative precision as q approaches p.

Grid fields carry the three momentum axes last: scalars are (..., n, n, n),
vectors (..., n, n, n, 3) and matrices (..., n, n, n, 3, 3).
"""

from dataclasses import dataclass
from functools import cached_property
import csv

import numpy as np
from scipy import integrate

from .errors import (InvalidArgumentError, ResolutionError, ShapeMismatchError,
                     SingularPointError)
from ._quadrature import phi_moments, scalar_moments

KERNEL_TABLE_SCHEMA = 1


def _as_points(p):
    p = np.asarray(p, dtype=np.float64)
    if p.shape[-1:] != (3,):
        raise InvalidArgumentError(f"expected trailing axis of length 3, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise InvalidArgumentError("momentum must be finite")
    return p


def energy(p):
    """p0 = sqrt(1 + |p|^2) over the trailing axis."""
    p = np.asarray(p, dtype=np.float64)
    return np.sqrt(1.0 + np.sum(p * p, axis=-1))


def velocity(p):
    """v(p) = p / p0 over the trailing axis."""
    p = np.asarray(p, dtype=np.float64)
    return p / energy(p)[..., None]


def juttner(p):
    """Juttner equilibrium J(p) = exp(-p0)."""
    return np.exp(-energy(_as_points(p)))


@dataclass(frozen=True)
class Momentum4:
    """A relativistic momentum point (p0, p)."""

    p: np.ndarray
    p0: float

    @property
    def v(self):
        return self.p / self.p0

    def dot(self, other):
        """Minkowski product p0 q0 - p.q."""
        return self.p0 * other.p0 - float(self.p @ other.p)


def lift(p):
    """Attach the mass-shell energy to a spatial momentum."""
    p = _as_points(p)
    if p.shape != (3,):
        raise InvalidArgumentError("lift expects a single 3-vector")
    p = p.copy()
    p.setflags(write=False)
    return Momentum4(p=p, p0=float(np.sqrt(1.0 + p @ p)))


def minkowski_dot(P, Q):
    return P.dot(Q)


def _pq_minus_one(p, q, p0, q0):
    diff = p - q
    cross = np.cross(p, q)
    num = np.sum(diff * diff, axis=-1) + np.sum(cross * cross, axis=-1)
    return num / (p0 * q0 + 1.0 + np.sum(p * q, axis=-1))


@dataclass(frozen=True)
class KernelEval:
    """Kernel pieces at one momentum pair: Lambda, S and Phi."""

    lam: float
    s: np.ndarray
    phi: np.ndarray


def phi_kernel(P, Q):
    """Evaluate Lambda, S and Phi at a pair of distinct momenta."""
    p, q = P.p, Q.p
    pqm1 = float(_pq_minus_one(p, q, P.p0, Q.p0))
    if pqm1 == 0.0:
        raise SingularPointError("kernel is singular at p = q")
    pq = pqm1 + 1.0
    d = pqm1 * (pq + 1.0)
    lam = pq * pq / (d * np.sqrt(d))
    diff = p - q
    s = d * np.eye(3) - np.outer(diff, diff) + pqm1 * (np.outer(p, q) + np.outer(q, p))
    phi = lam / (P.p0 * Q.p0) * s
    return KernelEval(lam=lam, s=s, phi=phi)


def phi_matrix(p, q):
    """Vectorized Phi(P, Q) for momentum arrays of shape (..., 3).

    Raises SingularPointError if any pair coincides.
    """
    p = _as_points(p)
    q = _as_points(q)
    p0 = energy(p)
    q0 = energy(q)
    pqm1 = _pq_minus_one(p, q, p0, q0)
    if np.any(pqm1 == 0.0):
        raise SingularPointError("kernel is singular at p = q")
    pq = pqm1 + 1.0
    d = pqm1 * (pq + 1.0)
    lam = pq * pq / (d * np.sqrt(d))
    diff = p - q
    s = (d[..., None, None] * np.eye(3)
         - diff[..., :, None] * diff[..., None, :]
         + pqm1[..., None, None] * (p[..., :, None] * q[..., None, :]
                                    + q[..., :, None] * p[..., None, :]))
    return (lam / (p0 * q0))[..., None, None] * s


@dataclass(frozen=True)
class MomentumGrid:
    """Uniform Cartesian cube [-p_max, p_max]^3 with n nodes per axis.

    Quadrature uses equal weights h^3 at every node.  The coincident node of
    a kernel integral is omitted (singular_policy "omit_self_node").
    """

    p_max: float = 8.0
    n: int = 48
    singular_policy: str = "omit_self_node"
    max_spacing: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.p_max) and self.p_max > 0):
            raise InvalidArgumentError("p_max must be positive")
        if self.n < 3:
            raise InvalidArgumentError("need at least 3 nodes per axis")
        if self.singular_policy != "omit_self_node":
            raise InvalidArgumentError(f"unknown singular policy {self.singular_policy!r}")

    @property
    def h(self):
        return 2.0 * self.p_max / (self.n - 1)

    @property
    def shape(self):
        return (self.n, self.n, self.n)

    @property
    def size(self):
        return self.n ** 3

    @cached_property
    def axis(self):
        ax = np.linspace(-self.p_max, self.p_max, self.n)
        # exact symmetry about 0 so that p3 -> -p3 maps nodes onto nodes
        ax = 0.5 * (ax - ax[::-1])
        ax.setflags(write=False)
        return ax

    @cached_property
    def points(self):
        """Node coordinates, shape (n, n, n, 3)."""
        ax = self.axis
        pts = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1)
        pts.setflags(write=False)
        return pts

    @property
    def nodes(self):
        return self.points.reshape(-1, 3)

    @property
    def weights(self):
        return np.full(self.size, self.h ** 3)

    @cached_property
    def p0(self):
        out = energy(self.points)
        out.setflags(write=False)
        return out

    @cached_property
    def v(self):
        out = velocity(self.points)
        out.setflags(write=False)
        return out

    @cached_property
    def J(self):
        out = np.exp(-self.p0)
        out.setflags(write=False)
        return out

    @cached_property
    def sqrtJ(self):
        out = np.exp(-0.5 * self.p0)
        out.setflags(write=False)
        return out

    @property
    def tail_bound(self):
        """J at the truncation radius; bounds the neglected tail density."""
        return float(np.exp(-np.sqrt(1.0 + self.p_max ** 2)))

    @cached_property
    def sigma(self):
        """sigma(p) = 2 int Phi J dq at every node, shape (n, n, n, 3, 3)."""
        self.check_resolution()
        mat, _ = self.moments(scalar=2.0 * self.J)
        out = mat.reshape(self.shape + (3, 3))
        out.setflags(write=False)
        return out

    def check_resolution(self):
        if self.h > self.max_spacing:
            raise ResolutionError(
                f"spacing {self.h:.3g} exceeds the configured bound {self.max_spacing:.3g}")

    def check_field(self, f, trailing=0):
        """Validate that f carries this grid's momentum axes."""
        f = np.asarray(f)
        lo = f.ndim - 3 - trailing
        if lo < 0 or f.shape[lo:lo + 3] != self.shape:
            raise ShapeMismatchError(
                f"field of shape {f.shape} does not live on a {self.shape} grid")
        return f

    def integrate(self, f):
        """Quadrature over the momentum axes of a scalar field."""
        f = self.check_field(f)
        return np.sum(f, axis=(-3, -2, -1)) * self.h ** 3

    def grad(self, f):
        """Second-order gradient; one-sided at the faces.  Returns (..., n, n, n, 3)."""
        f = self.check_field(f)
        parts = [np.gradient(f, self.h, axis=f.ndim - 3 + k, edge_order=2) for k in range(3)]
        return np.stack(parts, axis=-1)

    def div(self, u):
        """Divergence of a vector field (..., n, n, n, 3)."""
        u = self.check_field(u, trailing=1)
        nd = u.ndim - 1
        return sum(np.gradient(u[..., k], self.h, axis=nd - 3 + k, edge_order=2)
                   for k in range(3))

    def interior_mask(self, width=1):
        m = np.zeros(self.shape, dtype=bool)
        m[width:-width, width:-width, width:-width] = True
        return m

    def moments(self, scalar=None, vector=None, targets=None):
        """Kernel integrals int Phi(p, q) u(q) dq and int Phi(p, q) w(q) dq.

        Parameters
        ----------
        scalar : (..., n, n, n) array or None
        vector : (..., n, n, n, 3) array or None
        targets : (m, 3) array or None
            Evaluation points; defaults to the grid nodes.

        Returns
        -------
        mat : (..., m, 3, 3) array or None
        vec : (..., m, 3) array or None
            Leading batch axes follow the inputs; m is flattened targets.
        """
        if targets is None:
            targets = self.nodes
        targets = np.asarray(targets, dtype=np.float64).reshape(-1, 3)
        nq = self.size
        w = self.h ** 3
        s_batch = v_batch = ()
        s_rows = np.zeros((0, nq))
        v_rows = np.zeros((0, 3, nq))
        if scalar is not None:
            scalar = self.check_field(scalar)
            s_batch = scalar.shape[:-3]
            s_rows = scalar.reshape(-1, nq) * w
        if vector is not None:
            vector = self.check_field(vector, trailing=1)
            v_batch = vector.shape[:-4]
            v_rows = np.moveaxis(vector.reshape(-1, nq, 3), -1, -2) * w
        mat, vec = phi_moments(targets, self.nodes, s_rows, v_rows)
        out_m = out_v = None
        if scalar is not None:
            out_m = np.moveaxis(mat, 1, 0).reshape(s_batch + (targets.shape[0], 3, 3))
        if vector is not None:
            out_v = np.moveaxis(vec, 1, 0).reshape(v_batch + (targets.shape[0], 3))
        return out_m, out_v

    def field_moments(self, scalar=None, vector=None):
        """Like moments, evaluated at the nodes and reshaped onto the grid."""
        mat, vec = self.moments(scalar, vector)
        if mat is not None:
            mat = mat.reshape(mat.shape[:-3] + self.shape + (3, 3))
        if vec is not None:
            vec = vec.reshape(vec.shape[:-2] + self.shape + (3,))
        return mat, vec

    def scalar_kernel_moments(self, scalar):
        """int (P.Q) / (p0 q0 ((P.Q)^2 - 1)^{1/2}) u(q) dq at the nodes."""
        scalar = self.check_field(scalar)
        batch = scalar.shape[:-3]
        rows = scalar.reshape(-1, self.size) * self.h ** 3
        out = scalar_moments(self.nodes, self.nodes, rows)
        return np.moveaxis(out, 1, 0).reshape(batch + self.shape)


def sigma_weight(p, grid):
    """sigma(p) = 2 int Phi(P, Q) J(q) dq by quadrature on grid.

    p may be a single 3-vector or an array (..., 3).  A target that
    coincides with a node omits that node.
    """
    p = _as_points(p)
    grid.check_resolution()
    mat, _ = grid.moments(scalar=2.0 * grid.J, targets=p.reshape(-1, 3))
    return mat.reshape(p.shape[:-1] + (3, 3))


def _kappa_integral(a):
    val, _ = integrate.quad(lambda t: np.sin(t) * (1.0 + a * np.sin(t) ** 2) ** -1.5,
                            0.0, np.pi, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def kappa(p):
    """kappa(p) = 2^{7/2} pi p0 int_0^pi (1 + |p|^2 sin^2 t)^{-3/2} sin t dt."""
    p = _as_points(p)
    sq = np.sum(p * p, axis=-1)
    flat = np.atleast_1d(sq).ravel()
    vals = np.array([_kappa_integral(a) for a in flat]).reshape(np.shape(sq))
    out = 2.0 ** 3.5 * np.pi * np.sqrt(1.0 + sq) * vals
    return float(out) if np.ndim(out) == 0 else out


def collision_bilinear(F, G, grid):
    """C(F, G) = div_p int Phi (grad F(p) G(q) - F(p) grad G(q)) dq.

    Derivatives are second-order differences.  The outer divergence is only
    meaningful away from the cube faces, so the outermost node layer of the
    result is set to zero.  Leading batch axes of F and G must agree.
    """
    F = grid.check_field(F)
    G = grid.check_field(G)
    if F.shape != G.shape:
        raise ShapeMismatchError(f"fields differ in shape: {F.shape} vs {G.shape}")
    grid.check_resolution()
    a_mat, b_vec = grid.field_moments(scalar=G, vector=grid.grad(G))
    flux = np.einsum("...ij,...j->...i", a_mat, grid.grad(F)) - F[..., None] * b_vec
    out = grid.div(flux)
    out[..., ~grid.interior_mask()] = 0.0
    return out


def write_kernel_table(path, p_max, n):
    """Write sigma and kappa at every node of a (p_max, n) grid as CSV."""
    grid = MomentumGrid(p_max=p_max, n=n)
    sig = grid.sigma.reshape(-1, 3, 3)
    nodes = grid.nodes
    # kappa depends on |p| only: one quadrature per distinct radius
    radii, inverse = np.unique(np.round(np.sum(nodes * nodes, axis=1), 12), return_inverse=True)
    kap_r = np.array([kappa(np.array([np.sqrt(r), 0.0, 0.0])) for r in radii])
    kap = kap_r[inverse]
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema_version: {KERNEL_TABLE_SCHEMA}\n")
        fh.write(f"# p_max: {p_max!r}, n: {n}, h: {grid.h!r}, tail_bound: {grid.tail_bound!r}\n")
        writer = csv.writer(fh, lineterminator="\n")
        names = ["p1", "p2", "p3"] + [f"sigma_{i}{j}" for i in (1, 2, 3) for j in (1, 2, 3)] + ["kappa"]
        writer.writerow(names)
        for k in range(nodes.shape[0]):
            row = list(nodes[k]) + list(sig[k].ravel()) + [kap[k]]
            writer.writerow([repr(float(x)) for x in row])
    return grid
