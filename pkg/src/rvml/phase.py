"""Phase-space grids: a periodic spatial box times a momentum cube.

Phase fields are arrays (nx, ny, nz, n, n, n); a two-species field is a
TwoSpecies of two such arrays.  Species charges are q = (+1, -1).
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError
from .maxwell import Torus
from .kernel import MomentumGrid
from .operators import TwoSpecies

CHARGE = (1.0, -1.0)


@dataclass(frozen=True)
class PhaseSpace:
    torus: Torus
    grid: MomentumGrid

    @property
    def shape(self):
        return self.torus.shape + self.grid.shape

    @property
    def volume_element(self):
        return self.torus.cell_volume * self.grid.h ** 3

    def check(self, f):
        for u in (f.plus, f.minus):
            if u.shape != self.shape:
                raise ShapeMismatchError(f"phase field of shape {u.shape} does not fit {self.shape}")
        return f

    def zeros(self):
        return TwoSpecies.zeros(self.shape)

    def from_profile(self, x_profile, p_profile_plus, p_profile_minus):
        """f(x, p) = x_profile(x) * p_profile(p) per species."""
        xp = np.asarray(x_profile)[..., None, None, None]
        return TwoSpecies(xp * p_profile_plus, xp * p_profile_minus)

    def x_derivative(self, u, axis):
        """Spectral d/dx_axis over the leading spatial axes."""
        uh = np.fft.fftn(u, axes=(0, 1, 2))
        k = self.torus.wavenumbers[..., axis][..., None, None, None]
        return np.fft.ifftn(1j * k * uh, axes=(0, 1, 2)).real

    def transport(self, u):
        """v(p) . grad_x u."""
        v = self.grid.v
        out = np.zeros_like(u)
        for a in range(3):
            if self.torus.shape[a] > 1:
                out += v[..., a] * self.x_derivative(u, a)
        return out

    def force(self, e, b):
        """E(x) + v(p) x B(x), shape (nx, ny, nz, n, n, n, 3)."""
        v = self.grid.v
        ee = np.asarray(e)[:, :, :, None, None, None, :]
        bb = np.asarray(b)[:, :, :, None, None, None, :]
        return ee + np.cross(v, bb)

    def v_dot(self, e):
        """v(p) . E(x), shape (nx, ny, nz, n, n, n)."""
        return np.einsum("abci,xyzi->xyzabc", self.grid.v, np.asarray(e))

    def lorentz(self, f, e, b):
        """Per species: -q (E + v x B) . grad_p f + (q/2) (v . E) f."""
        frc = self.force(e, b)
        vde = self.v_dot(e)
        outs = []
        for q, u in zip(CHARGE, (f.plus, f.minus)):
            g = self.grid.grad(u)
            outs.append(-q * np.sum(frc * g, axis=-1) + 0.5 * q * vde * u)
        return TwoSpecies(*outs)

    def field_source(self, e):
        """q (v . E) sqrt(J) per species."""
        s = self.v_dot(e) * self.grid.sqrtJ
        return TwoSpecies(CHARGE[0] * s, CHARGE[1] * s)

    def moments(self, f):
        """(rho, j) on the spatial grid."""
        d = self.grid.sqrtJ * f.charge
        w = self.grid.h ** 3
        return (np.sum(d, axis=(-3, -2, -1)) * w,
                np.einsum("xyzabc,abci->xyzi", d, self.grid.v) * w)

    def inner(self, f, g, weight=None):
        """Sum over species of int f g (weight) dx dp."""
        w = 1.0 if weight is None else weight
        return float(np.sum(f.plus * g.plus * w) + np.sum(f.minus * g.minus * w)) * self.volume_element

    def reflect_p3(self, u):
        """u(x, R p) on the symmetric momentum grid."""
        return np.flip(u, axis=-1)
