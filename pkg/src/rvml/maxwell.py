"""Spectral Maxwell solver and div-curl tools on a periodic box.

Vector fields are stored with components last: (nx, ny, nz, 3).  Derivatives
multiply Fourier coefficients by i k; the Nyquist wavenumber is set to zero
on even axes so every derivative is a real operator and div(curl) vanishes
at the symbol level.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, ConsistencyError, InvalidArgumentError, ShapeMismatchError

# RK4 is stable on the imaginary axis up to |z| = 2 sqrt(2)
RK4_IMAG_LIMIT = 2.0 * np.sqrt(2.0)


@dataclass(frozen=True)
class Torus:
    """Periodic box with shape (nx, ny, nz) and side lengths."""

    shape: tuple = (16, 16, 16)
    lengths: tuple = (2 * np.pi, 2 * np.pi, 2 * np.pi)

    def __post_init__(self):
        shape = tuple(int(s) for s in self.shape)
        lengths = tuple(float(s) for s in self.lengths)
        if len(shape) != 3 or len(lengths) != 3 or min(shape) < 1 or min(lengths) <= 0:
            raise InvalidArgumentError("torus needs three positive sizes and lengths")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "lengths", lengths)

    @property
    def spacing(self):
        return tuple(L / n for L, n in zip(self.lengths, self.shape))

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    @cached_property
    def coords(self):
        axes = [np.arange(n) * d for n, d in zip(self.shape, self.spacing)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    @cached_property
    def wavenumbers(self):
        """k vectors (nx, ny, nz, 3) with the Nyquist entries zeroed."""
        ks = []
        for n, L in zip(self.shape, self.lengths):
            k = 2 * np.pi * np.fft.fftfreq(n, d=L / n)
            if n % 2 == 0:
                k[n // 2] = 0.0
            ks.append(k)
        k = np.stack(np.meshgrid(*ks, indexing="ij"), axis=-1)
        k.setflags(write=False)
        return k

    @cached_property
    def k2(self):
        return np.sum(self.wavenumbers ** 2, axis=-1)

    @property
    def k_max(self):
        return float(np.sqrt(np.max(self.k2)))

    def check_vector(self, u):
        u = np.asarray(u)
        if u.shape != self.shape + (3,):
            raise ShapeMismatchError(f"vector field of shape {u.shape} does not fit {self.shape}")
        return u

    def check_scalar(self, s):
        s = np.asarray(s)
        if s.shape != self.shape:
            raise ShapeMismatchError(f"scalar field of shape {s.shape} does not fit {self.shape}")
        return s

    def fft(self, u, vector=True):
        return np.fft.fftn(u, axes=(0, 1, 2))

    def ifft(self, u):
        return np.fft.ifftn(u, axes=(0, 1, 2)).real

    def curl(self, u):
        uh = self.fft(self.check_vector(u))
        return self.ifft(1j * np.cross(self.wavenumbers, uh))

    def div(self, u):
        uh = self.fft(self.check_vector(u))
        return self.ifft(1j * np.sum(self.wavenumbers * uh, axis=-1))

    def grad(self, s):
        sh = self.fft(self.check_scalar(s))
        return self.ifft(1j * self.wavenumbers * sh[..., None])

    def jacobian(self, u):
        """du_i/dx_j, shape (nx, ny, nz, 3, 3)."""
        uh = self.fft(self.check_vector(u))
        return self.ifft(1j * uh[..., :, None] * self.wavenumbers[..., None, :])

    def norm(self, u):
        """Discrete L2 norm with cell-volume weights."""
        return float(np.sqrt(np.sum(np.asarray(u) ** 2) * self.cell_volume))

    def mean(self, u):
        return np.mean(np.asarray(u), axis=(0, 1, 2))

    def random_field(self, rng, amplitude=1.0, k_cut=None):
        """Smooth zero-mean vector field without Nyquist content."""
        u = rng.normal(size=self.shape + (3,))
        uh = self.fft(u)
        k2 = self.k2
        mask = k2 > 0
        if k_cut is not None:
            mask &= k2 <= k_cut ** 2
        uh = uh * mask[..., None] / (1.0 + k2[..., None])
        out = self.ifft(uh)
        return amplitude * out / max(np.max(np.abs(out)), 1e-300)


@dataclass(frozen=True)
class EMField:
    e: np.ndarray
    b: np.ndarray

    @classmethod
    def zeros(cls, torus):
        return cls(np.zeros(torus.shape + (3,)), np.zeros(torus.shape + (3,)))

    def __add__(self, other):
        return EMField(self.e + other.e, self.b + other.b)

    def __sub__(self, other):
        return EMField(self.e - other.e, self.b - other.b)

    def __mul__(self, s):
        return EMField(s * self.e, s * self.b)

    __rmul__ = __mul__


@dataclass(frozen=True)
class ChargeCurrent:
    rho: np.ndarray
    j: np.ndarray


def moments(g, grid):
    """rho = int sqrt(J) (g+ - g-) dp and j = int v sqrt(J) (g+ - g-) dp.

    Leading axes of g (usually space) are kept.
    """
    grid.check_field(g.plus)
    d = grid.sqrtJ * g.charge
    w = grid.h ** 3
    rho = np.sum(d, axis=(-3, -2, -1)) * w
    j = np.einsum("...abc,abci->...i", d, grid.v) * w
    return ChargeCurrent(rho=rho, j=j)


def field_energy(fields, torus):
    return float(np.sum(fields.e ** 2 + fields.b ** 2) * torus.cell_volume)


def _rhs(torus, fields, j):
    return EMField(torus.curl(fields.b) - j, -torus.curl(fields.e))


def check_time_step(torus, dt):
    if not (np.isfinite(dt) and dt > 0):
        raise ConfigurationError("time step must be positive")
    if dt * torus.k_max > RK4_IMAG_LIMIT:
        raise ConfigurationError(
            f"dt = {dt:.4g} exceeds the RK4 stability bound {RK4_IMAG_LIMIT / torus.k_max:.4g}")


def maxwell_step(fields, j, dt, torus, t=0.0):
    """One classical RK4 step of dE/dt = curl B - j, dB/dt = -curl E.

    j is an array, held fixed over the step, or a callable j(t).
    """
    check_time_step(torus, dt)
    torus.check_vector(fields.e)
    torus.check_vector(fields.b)
    src = j if callable(j) else (lambda _t: j)
    k1 = _rhs(torus, fields, src(t))
    k2 = _rhs(torus, fields + 0.5 * dt * k1, src(t + 0.5 * dt))
    k3 = _rhs(torus, fields + 0.5 * dt * k2, src(t + 0.5 * dt))
    k4 = _rhs(torus, fields + dt * k3, src(t + dt))
    return fields + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def field_time_derivatives(fields, j_derivs, torus):
    """Time derivatives from the differentiated system.

    d^{k+1}E = curl d^k B - d^k j and d^{k+1}B = -curl d^k E, for
    k = 0 .. len(j_derivs) - 1.  Returns the list of EMField levels 0..m.
    """
    out = [fields]
    for jk in j_derivs:
        prev = out[-1]
        out.append(EMField(torus.curl(prev.b) - jk, -torus.curl(prev.e)))
    return out


def constraint_residuals(fields, rho, torus):
    """(||div E - rho||_2, ||div B||_2)."""
    rho = torus.check_scalar(rho)
    return torus.norm(torus.div(fields.e) - rho), torus.norm(torus.div(fields.b))


def divcurl_solve(curl_target, div_target, torus, tol=1e-10):
    """Zero-mean u with curl u = curl_target and div u = div_target.

    Raises ConsistencyError when div(curl_target) or either mean is above
    tol (relative to the target size).
    """
    c = torus.check_vector(curl_target)
    d = torus.check_scalar(div_target)
    scale = max(torus.norm(c), torus.norm(d), 1.0)
    residuals = {
        "div_of_curl_target": torus.norm(torus.div(c)),
        "curl_target_mean": float(np.max(np.abs(torus.mean(c)))),
        "div_target_mean": float(abs(torus.mean(d))),
    }
    if max(residuals.values()) > tol * scale:
        raise ConsistencyError("div-curl targets are incompatible", residuals)
    k = torus.wavenumbers
    k2 = torus.k2
    safe = np.where(k2 > 0, k2, 1.0)
    ch = torus.fft(c)
    dh = torus.fft(d)
    uh = (1j * np.cross(k, ch) - 1j * k * dh[..., None]) / safe[..., None]
    uh[k2 == 0] = 0.0
    return torus.ifft(uh)


def divcurl_norm_check(u, torus):
    """(||grad u||, ||curl u||, ||div u||, ||u||) in discrete L2."""
    u = torus.check_vector(u)
    return (torus.norm(torus.jacobian(u)), torus.norm(torus.curl(u)),
            torus.norm(torus.div(u)), torus.norm(u))


def plancherel_residual(u, torus):
    """| ||grad u||^2 - ||curl u||^2 - ||div u||^2 | relative to ||grad u||^2."""
    g, c, d, _ = divcurl_norm_check(u, torus)
    return abs(g * g - c * c - d * d) / max(g * g, 1e-300)


def weighted_energy_terms(energies, source_norms2, dt, lam):
    """Pieces of the lambda-weighted energy estimate along a run.

    energies[n] = ||E||^2 + ||B||^2 and source_norms2[n] = ||j||^2 at
    t = n dt.  Returns (weighted final energy, initial energy,
    lambda^{-1} int e^{-2 lambda t} ||j||^2 dt by the trapezoid rule).
    """
    energies = np.asarray(energies, dtype=np.float64)
    src = np.asarray(source_norms2, dtype=np.float64)
    t = dt * np.arange(energies.size)
    wt = np.exp(-2.0 * lam * t)
    integral = float(np.sum(0.5 * (wt[1:] * src[1:] + wt[:-1] * src[:-1])) * dt)
    return float(wt[-1] * energies[-1]), float(energies[0]), integral / lam
