"""Frequency grids, spectrum containers and quadrature helpers.

Conventions used throughout the package:

* frequencies are angular (rad/s) and two-sided; Hz appear only at file
  and command-line boundaries,
* power spectral densities are two-sided and symmetrized, in quanta
  units where vacuum (shot) noise contributes 1/2 per quadrature,
* spectral integrals use the measure ``d(omega) / (2 pi)``, so the
  integral of a displacement PSD is an occupancy in quanta.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi

# relative tolerance for the uniform-spacing check of SpectrumGrid
_UNIFORM_RTOL = 1e-8


@dataclass
class SpectrumGrid:
    """Uniformly sampled two-sided frequency axis with real or complex values.

    Parameters
    ----------
    omega : ndarray
        Strictly increasing, uniformly spaced angular frequencies (rad/s).
    values : ndarray
        Samples on ``omega``.  Real arrays hold PSDs (quanta units unless
        stated otherwise); complex arrays hold response functions, in which
        case the instance doubles as the carrier for susceptibilities
        evaluated on a grid.
    """

    omega: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        values = np.asarray(self.values)
        if not np.iscomplexobj(values):
            values = values.astype(float)
        self.values = values
        if self.omega.ndim != 1 or self.omega.size < 2:
            raise ValueError("omega must be a 1-D array with at least two samples")
        if self.values.shape != self.omega.shape:
            raise ValueError("values length must equal grid length")
        steps = np.diff(self.omega)
        if np.any(steps <= 0):
            raise ValueError("omega must be strictly increasing")
        if np.max(steps) - np.min(steps) > _UNIFORM_RTOL * np.max(np.abs(steps)):
            raise ValueError("omega must be uniformly sampled")

    @property
    def domega(self):
        """Grid spacing in rad/s."""
        return float(self.omega[1] - self.omega[0])

    @property
    def n(self):
        return self.omega.size

    def with_values(self, values) -> "SpectrumGrid":
        return SpectrumGrid(self.omega, values)

    def integrate(self, lo=None, hi=None):
        """Trapezoid integral of the values over [lo, hi] with measure dw/2pi."""
        sel = self._select(lo, hi)
        return float(np.trapz(self.values[sel].real, self.omega[sel]) / TWO_PI)

    def band_average(self, lo, hi):
        """Mean value over the (two-sided) band [lo, hi] in rad/s."""
        sel = self._select(lo, hi)
        if not np.any(sel):
            raise ValueError(f"band [{lo}, {hi}] rad/s contains no grid points")
        return complex(np.mean(self.values[sel])) if np.iscomplexobj(self.values) \
            else float(np.mean(self.values[sel]))

    def _select(self, lo, hi):
        sel = np.ones_like(self.omega, dtype=bool)
        if lo is not None:
            sel &= self.omega >= lo
        if hi is not None:
            sel &= self.omega <= hi
        return sel

    def resample(self, omega_new, warn=True) -> "SpectrumGrid":
        """Linear interpolation onto a new grid; zero outside the support."""
        if warn:
            warnings.warn("resampling spectrum with linear interpolation", stacklevel=2)
        omega_new = np.asarray(omega_new, dtype=float)
        if np.iscomplexobj(self.values):
            re = np.interp(omega_new, self.omega, self.values.real, left=0.0, right=0.0)
            im = np.interp(omega_new, self.omega, self.values.imag, left=0.0, right=0.0)
            return SpectrumGrid(omega_new, re + 1j * im)
        vals = np.interp(omega_new, self.omega, self.values, left=0.0, right=0.0)
        return SpectrumGrid(omega_new, vals)


# Complex-valued SpectrumGrid instances carry susceptibilities on a grid.
ComplexResponse = SpectrumGrid


def symmetric_grid(omega_max, n) -> np.ndarray:
    """Two-sided uniform grid [-omega_max, omega_max] with n points (odd n
    includes zero)."""
    return np.linspace(-float(omega_max), float(omega_max), int(n))


def halfline_integral(func, center, halfwidth, side=+1, nodes=4096):
    """Integrate ``func`` over a frequency half-line with a resonance inside.

    Maps the half-line onto a finite interval with ``w = center + halfwidth *
    tan(phi)`` so that a Lorentzian of half-width ``halfwidth`` centred at
    ``center`` becomes a smooth bounded integrand, then applies Gauss-Legendre
    quadrature.  ``side=+1`` integrates (0, +inf), ``side=-1`` integrates
    (-inf, 0).  Returns the plain integral (measure ``dw``, not ``dw/2pi``).
    """
    center = float(center)
    halfwidth = float(halfwidth)
    if halfwidth <= 0:
        raise ValueError("halfwidth must be positive")
    if side not in (+1, -1):
        raise ValueError("side must be +1 or -1")
    if side == +1:
        phi_lo, phi_hi = np.arctan((0.0 - center) / halfwidth), np.pi / 2
    else:
        phi_lo, phi_hi = -np.pi / 2, np.arctan((0.0 - center) / halfwidth)
    x, wts = np.polynomial.legendre.leggauss(int(nodes))
    phi = 0.5 * (phi_hi - phi_lo) * x + 0.5 * (phi_hi + phi_lo)
    scale = 0.5 * (phi_hi - phi_lo)
    omega = center + halfwidth * np.tan(phi)
    jac = halfwidth / np.cos(phi) ** 2
    vals = np.asarray(func(omega), dtype=float)
    return float(np.sum(wts * vals * jac) * scale)


def real_line_integral(func, centers, halfwidth, nodes=4096):
    """Integrate ``func`` over the whole real line, one tan-map per half-line.

    ``centers`` gives the (positive, negative) resonance locations; pass the
    same magnitude with both signs for a symmetric doublet.
    """
    pos, neg = centers
    return (halfline_integral(func, pos, halfwidth, +1, nodes)
            + halfline_integral(func, neg, halfwidth, -1, nodes))


def as_omega(grid_or_array) -> np.ndarray:
    """Accept a SpectrumGrid or a bare frequency array; return the array."""
    if isinstance(grid_or_array, SpectrumGrid):
        return grid_or_array.omega
    return np.asarray(grid_or_array, dtype=float)
