"""Classical coupled-dipole response to a Bessel beam and scattering spectra."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit
from scipy.signal import find_peaks
from scipy.special import jv

from .emcore import K0, DomainError, lorentz_polarizability
from .farfield import directions, sphere_grid
from .geometry import EmitterArray
from .manifolds import coupling_matrix


class SingularDriveError(RuntimeError):
    def __init__(self, message: str, condition: float):
        super().__init__(f"{message} (condition number {condition:.3e})")
        self.condition = condition


@dataclass(frozen=True)
class BesselBeam:
    """Longitudinal field of a Bessel beam along z; total angular momentum ell + spin."""

    oam_ell: int = 1
    spin_s: int = -1
    cone_half_angle: float = np.pi / 3.0
    amplitude_E0: complex = 1.0

    def __post_init__(self):
        if self.spin_s not in (-1, 0, 1):
            raise DomainError("spin must be -1, 0 or +1")
        if not 0.0 < self.cone_half_angle < np.pi / 2.0:
            raise DomainError("cone half-angle must lie in (0, pi/2)")

    @property
    def m_tot(self) -> int:
        return int(self.oam_ell + self.spin_s)

    def scaled(self, factor: complex) -> "BesselBeam":
        return BesselBeam(self.oam_ell, self.spin_s, self.cone_half_angle, self.amplitude_E0 * factor)


def bessel_field_z(beam: BesselBeam, position) -> complex | np.ndarray:
    """E0 J_|m|(k0 sin(theta_b) rho) exp(i m phi) exp(i k0 cos(theta_b) z)."""
    r = np.asarray(position, dtype=float)
    rho = np.hypot(r[..., 0], r[..., 1])
    phi = np.arctan2(r[..., 1], r[..., 0])
    m = beam.m_tot
    kt = K0 * np.sin(beam.cone_half_angle)
    kz = K0 * np.cos(beam.cone_half_angle)
    e = beam.amplitude_E0 * jv(abs(m), kt * rho) * np.exp(1j * m * phi) * np.exp(1j * kz * r[..., 2])
    return complex(e) if np.ndim(e) == 0 else e


@dataclass(frozen=True)
class DipoleSolution:
    """z dipole moments in units of alpha(omega): d_k = alpha * dipole_moments[k]."""

    dipole_moments: np.ndarray
    drive_detuning: float
    polarizability: complex
    residual: float
    condition: float

    @property
    def physical(self) -> np.ndarray:
        return self.polarizability * self.dipole_moments


def _interaction(geometry: EmitterArray) -> np.ndarray:
    # alpha k0^2 G_zz = g / (detuning + i/2); this returns the g part
    return coupling_matrix(geometry)


def _solve(g: np.ndarray, e_inc: np.ndarray, detuning: float):
    n = len(e_inc)
    m = np.eye(n) - g / (detuning + 0.5j)
    cond = float(np.linalg.cond(m)) if n > 1 else 1.0
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularDriveError("coupled-dipole system is singular", cond)
    x = np.linalg.solve(m, e_inc)
    res = float(np.linalg.norm(m @ x - e_inc) / max(np.linalg.norm(e_inc), np.finfo(float).tiny))
    if res > 1e-10:
        raise SingularDriveError(f"coupled-dipole residual {res:.2e} too large", cond)
    return x, res, cond


def solve_coupled_dipoles(geometry: EmitterArray, beam: BesselBeam, detuning: float) -> DipoleSolution:
    """Solve (1 - alpha k0^2 G_zz) d = alpha E_inc for the z dipoles.

    G_zz is frozen at the resonance frequency and only alpha disperses.
    """
    e_inc = np.atleast_1d(bessel_field_z(beam, geometry.positions))
    x, res, cond = _solve(_interaction(geometry), e_inc, float(detuning))
    return DipoleSolution(x, float(detuning), lorentz_polarizability(detuning), res, cond)


def single_emitter_cross_section(detuning):
    """sigma0 = k0^4 |alpha|^2 / (6 pi) in units of lambda0^2."""
    return K0**4 * np.abs(lorentz_polarizability(detuning)) ** 2 / (6.0 * np.pi)


@dataclass
class SCSResult:
    detuning: np.ndarray
    scs: np.ndarray  # sigma / (N sigma0), NaN where the solve failed
    error: list  # per-point message or ""

    @property
    def n_failed(self) -> int:
        return sum(1 for e in self.error if e)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["detuning_over_gamma0", "scs_normalized", "error"])
        for d, s, e in zip(self.detuning, self.scs, self.error):
            w.writerow([repr(float(d)), "" if e else repr(float(s)), e])
        return buf.getvalue()


def scattering_cross_section_sweep(geometry: EmitterArray, beam: BesselBeam, detuning_grid,
                                   theta_nodes: int = 64, phi_nodes: int = 128) -> SCSResult:
    """Normalized scattering cross section sigma / (N sigma0) across detunings.

    sigma/(N sigma0) = 3 / (8 pi N |E(0)|^2) * integral sin^2(theta) |sum_k e^{-i k0 n.r_k} x_k|^2 dOmega,
    with x = d / alpha; the single-emitter reference sits at the origin.
    """
    e0 = bessel_field_z(beam, np.zeros(3))
    if abs(e0) == 0.0:
        raise DomainError("beam has no longitudinal field at the origin; sigma0 reference vanishes")
    grid = sphere_grid(theta_nodes, phi_nodes)
    dirs = directions(grid.theta, grid.phi).reshape(-1, 3)
    w = (grid.weights * np.sin(grid.theta)[:, None] ** 2).ravel()
    phase = np.exp(-1j * K0 * dirs @ geometry.positions.T)
    # same quadrature, folded into a Hermitian N x N kernel once
    kernel = phase.conj().T @ (w[:, None] * phase)
    g = _interaction(geometry)
    e_inc = np.atleast_1d(bessel_field_z(beam, geometry.positions))
    norm = 3.0 / (8.0 * np.pi * geometry.n_total * abs(e0) ** 2)
    grid_d = np.asarray(detuning_grid, dtype=float)
    scs = np.full(len(grid_d), np.nan)
    errors = []
    for i, d in enumerate(grid_d):
        try:
            x, _, _ = _solve(g, e_inc, float(d))
        except SingularDriveError as exc:
            errors.append(str(exc))
            continue
        scs[i] = norm * float(np.vdot(x, kernel @ x).real)
        errors.append("")
    return SCSResult(grid_d, scs, errors)


@dataclass(frozen=True)
class SpectralFeature:
    center: float
    height: float
    prominence: float


def spectral_features(detuning, scs, min_rel_prominence: float = 0.25) -> list:
    """Peaks whose prominence is at least ``min_rel_prominence`` of their own height."""
    y = np.asarray(scs, dtype=float)
    idx, props = find_peaks(np.nan_to_num(y, nan=np.nanmin(y)), prominence=0.0)
    d = np.asarray(detuning, dtype=float)
    return [SpectralFeature(float(d[i]), float(y[i]), float(p))
            for i, p in zip(idx, props["prominences"]) if p >= min_rel_prominence * y[i]]


def _fano(x, x0, width, p0, p1, p2):
    u = x - x0
    return (p0 + p1 * u + p2 * u * u) / (u * u + 0.25 * width * width)


@dataclass(frozen=True)
class ResonanceFit:
    center: float
    width: float
    params: np.ndarray


def fit_resonance(detuning, scs, center: float, half_window: float, width_guess: float | None = None) -> ResonanceFit:
    """Fit a Lorentzian with a quadratic numerator (Fano-type line) near ``center``."""
    x = np.asarray(detuning, dtype=float)
    y = np.asarray(scs, dtype=float)
    sel = (np.abs(x - center) <= half_window) & np.isfinite(y)
    if sel.sum() < 6:
        raise DomainError("too few points in the fit window")
    x, y = x[sel], y[sel]
    w0 = width_guess or half_window / 10.0
    base = float(np.median(y))
    p0 = [center, w0, (float(y.max()) - base) * 0.25 * w0 * w0, 0.0, base]
    popt, _ = curve_fit(_fano, x, y, p0=p0, maxfev=20000)
    return ResonanceFit(float(popt[0]), float(abs(popt[1])), popt)
