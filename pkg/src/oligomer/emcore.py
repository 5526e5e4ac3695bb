"""Electromagnetic kernel in natural units.

Lengths are in units of the emitter resonance wavelength, rates and
detunings in units of the single-emitter decay rate, and hbar = 1.  The
dipoles are all oriented along z, so only the zz element of the dyadic
Green's tensor enters the coupling between emitters in the xy plane.
"""

from __future__ import annotations

import numpy as np

GAMMA0 = 1.0
LAMBDA0 = 1.0
K0 = 2.0 * np.pi / LAMBDA0
HBAR = 1.0
P0 = 1.0

# below this k0*r the imaginary part of the coupling is summed as a series
_SERIES_CUTOFF = 0.5
_SERIES_TERMS = 14


class DomainError(ValueError):
    """Raised when an argument lies outside the physically supported domain."""


def _im_series(x: np.ndarray) -> np.ndarray:
    # sin(x)/x + cos(x)/x^2 - sin(x)/x^3, free of the 1/x^2 cancellation
    total = np.zeros_like(x)
    x2 = x * x
    power = np.ones_like(x)
    fact = 1.0  # (2n+1)!
    for n in range(_SERIES_TERMS):
        if n > 0:
            fact *= (2 * n) * (2 * n + 1)
        coef = (2 * n + 2) / ((2 * n + 3) * fact)
        total += (-1) ** n * coef * power
        power = power * x2
    return total


def coupling_rate(separation):
    """Dipole-dipole coupling g(r) between two z-dipoles separated in-plane.

    g(r) = -(3/4) exp(i k0 r) / (k0 r) * (1 + i/(k0 r) - 1/(k0 r)^2),
    in units of gamma0.  Accepts scalars or arrays; ``separation`` is in
    units of lambda0 and must be strictly positive.
    """
    r = np.asarray(separation, dtype=float)
    if np.any(~np.isfinite(r)) or np.any(r <= 0.0):
        raise DomainError("coupling_rate needs strictly positive, finite separations")
    x = K0 * r
    re = -0.75 * (np.cos(x) / x - np.sin(x) / x**2 - np.cos(x) / x**3)
    im_direct = np.sin(x) / x + np.cos(x) / x**2 - np.sin(x) / x**3
    small = x < _SERIES_CUTOFF
    if np.any(small):
        im_direct = np.where(small, _im_series(np.where(small, x, 1.0)), im_direct)
    out = re - 0.75j * im_direct
    return out if out.ndim else complex(out)


def green_tensor(r_vec, k: float = K0) -> np.ndarray:
    """Full free-space dyadic Green's tensor G0(r) as a 3x3 complex matrix."""
    r_vec = np.asarray(r_vec, dtype=float)
    r = float(np.linalg.norm(r_vec))
    if r <= 0.0:
        raise DomainError("Green's tensor is singular at r = 0")
    kr = k * r
    rr = np.outer(r_vec, r_vec) / r**2
    a = 1.0 + 1j / kr - 1.0 / kr**2
    b = -1.0 - 3j / kr + 3.0 / kr**2
    return np.exp(1j * kr) / (4.0 * np.pi * r) * (a * np.eye(3) + b * rr)


def green_zz(separation):
    """zz element of G0 for in-plane separations (vectorized)."""
    r = np.asarray(separation, dtype=float)
    if np.any(r <= 0.0):
        raise DomainError("Green's tensor is singular at r = 0")
    return -K0 / (3.0 * np.pi) * coupling_rate(r)


def green_tensor_farfield(direction, source_position) -> np.ndarray:
    """Angular factor of the far-field Green's tensor.

    Returns exp(-i k0 n.r_k) (I - n n) / (4 pi); the outgoing
    exp(i k0 r)/r factor is left to the caller.
    """
    n = np.asarray(direction, dtype=float)
    if n.shape != (3,) or abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise DomainError("far-field direction must be a unit 3-vector")
    r_k = np.asarray(source_position, dtype=float)
    phase = np.exp(-1j * K0 * float(n @ r_k))
    return phase * (np.eye(3) - np.outer(n, n)) / (4.0 * np.pi)


def lorentz_polarizability(detuning):
    """alpha(w) = -(6 pi / k0^3) (gamma0/2) / (detuning + i gamma0/2)."""
    d = np.asarray(detuning, dtype=float)
    out = -(6.0 * np.pi / K0**3) * (0.5 * GAMMA0) / (d + 0.5j * GAMMA0)
    return out if out.ndim else complex(out)
