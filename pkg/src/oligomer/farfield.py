"""Far-field emission: radiation patterns, radiated power and photon-pair correlations."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .emcore import K0, DomainError, green_tensor_farfield
from .geometry import EmitterArray

# (3 / 32 pi) * (8 pi / 3): power of one emitter with |c| = 1
P_SINGLE = 0.25
PATTERN_PREFACTOR = 3.0 / (32.0 * np.pi)
MASK_REL = 1e-12

COINCIDENT = "coincident"
POLAR_FIXED = "polar-fixed"


def directions(theta, phi) -> np.ndarray:
    """Unit vectors n(theta, phi) on the outer-product grid, shape (nt, np, 3)."""
    t, p = np.meshgrid(np.asarray(theta, float), np.asarray(phi, float), indexing="ij")
    return np.stack([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)], axis=-1)


@dataclass(frozen=True)
class SphereGrid:
    theta: np.ndarray
    phi: np.ndarray
    weights: np.ndarray  # solid-angle weights, shape (nt, np)

    @property
    def shape(self):
        return (len(self.theta), len(self.phi))


def sphere_grid(theta_nodes: int = 64, phi_nodes: int = 128) -> SphereGrid:
    """Gauss-Legendre in cos(theta), trapezoid in phi; theta ascending."""
    if theta_nodes < 1 or phi_nodes < 1:
        raise DomainError("quadrature needs at least one node per axis")
    x, w = np.polynomial.legendre.leggauss(theta_nodes)
    theta = np.arccos(x)[::-1]
    w = w[::-1]
    phi = 2.0 * np.pi * np.arange(phi_nodes) / phi_nodes
    weights = np.outer(w, np.full(phi_nodes, 2.0 * np.pi / phi_nodes))
    return SphereGrid(theta, phi, weights)


@dataclass
class FarFieldMap:
    """Samples on a (theta, phi) grid; ``mask`` marks undefined points."""

    theta: np.ndarray
    phi: np.ndarray
    values: np.ndarray
    weights: np.ndarray | None = None
    mask: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mask is None:
            self.mask = np.zeros(self.values.shape, dtype=bool)

    def integrate(self) -> float:
        if self.weights is None:
            raise DomainError("map was not sampled on a quadrature grid")
        return float(np.sum(np.where(self.mask, 0.0, self.values) * self.weights))

    def argmax(self) -> tuple[float, float, float]:
        """(theta, phi, value) of the largest unmasked sample."""
        vals = np.where(self.mask, -np.inf, self.values)
        i, j = np.unravel_index(int(np.argmax(vals)), vals.shape)
        return float(self.theta[i]), float(self.phi[j]), float(self.values[i, j])

    def rows(self):
        for i, t in enumerate(self.theta):
            for j, p in enumerate(self.phi):
                masked = bool(self.mask[i, j])
                yield float(t), float(p), (None if masked else float(self.values[i, j])), masked

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theta", "phi", "value", "mask"])
        for t, p, v, m in self.rows():
            w.writerow([repr(t), repr(p), "" if v is None else repr(v), int(m)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "meta": self.meta,
            "theta": [float(t) for t in self.theta],
            "phi": [float(p) for p in self.phi],
            "values": [[None if m else float(v) for v, m in zip(row, mrow)]
                       for row, mrow in zip(self.values, self.mask)],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def array_factor(amplitudes, positions, dirs) -> np.ndarray:
    """sum_k exp(-i k0 n.r_k) c_k for every direction in ``dirs`` (..., 3)."""
    phase = np.exp(-1j * K0 * (np.asarray(dirs) @ np.asarray(positions).T))
    return phase @ np.asarray(amplitudes, dtype=complex)


def _check_normalized(c):
    norm = float(np.sum(np.abs(c) ** 2))
    if abs(norm - 1.0) > 1e-8:
        raise DomainError(f"amplitudes must satisfy sum |c|^2 = 1 (got {norm:.6g})")


def radiation_pattern(amplitudes, geometry: EmitterArray, theta_nodes: int = 64, phi_nodes: int = 128,
                      theta=None, phi=None) -> FarFieldMap:
    """p(theta, phi) = (3 / 32 pi) sin^2(theta) |array factor|^2 in units of P0.

    By default the map is sampled on the quadrature grid; explicit
    ``theta``/``phi`` arrays give a plain sampling without weights.
    """
    c = np.asarray(amplitudes, dtype=complex)
    _check_normalized(c)
    if theta is None and phi is None:
        grid = sphere_grid(theta_nodes, phi_nodes)
        theta, phi, weights = grid.theta, grid.phi, grid.weights
    else:
        theta = np.atleast_1d(np.asarray(theta, float))
        phi = np.atleast_1d(np.asarray(phi if phi is not None else [0.0], float))
        weights = None
    dirs = directions(theta, phi)
    af = array_factor(c, geometry.positions, dirs)
    values = PATTERN_PREFACTOR * np.sin(theta)[:, None] ** 2 * np.abs(af) ** 2
    return FarFieldMap(theta, phi, values, weights, meta={"quantity": "power_per_solid_angle"})


def total_power(pattern: FarFieldMap) -> float:
    return pattern.integrate()


def radiated_power(amplitudes, geometry: EmitterArray, theta_nodes: int = 64, phi_nodes: int = 128):
    """(P, error estimate); the estimate compares against doubled node counts."""
    p = total_power(radiation_pattern(amplitudes, geometry, theta_nodes, phi_nodes))
    p2 = total_power(radiation_pattern(amplitudes, geometry, 2 * theta_nodes, 2 * phi_nodes))
    return p2, abs(p2 - p)


@dataclass(frozen=True)
class DetectorPair:
    theta1: float
    phi1: float
    theta2: float
    phi2: float

    def __post_init__(self):
        for t in (self.theta1, self.theta2):
            if not 0.0 <= t <= np.pi:
                raise DomainError(f"polar angle {t} outside [0, pi]")
        for p in (self.phi1, self.phi2):
            if not np.isfinite(p):
                raise DomainError("azimuth must be finite")

    def unit_vectors(self):
        return directions([self.theta1], [self.phi1])[0, 0], directions([self.theta2], [self.phi2])[0, 0]


def farfield_columns(dirs, positions) -> np.ndarray:
    """Far-field Green's tensor applied to z-dipoles: shape (..., 3, N).

    Entry [..., beta, k] is the beta component of exp(-i k0 n.r_k)(I - n n) z / 4 pi.
    """
    dirs = np.asarray(dirs, dtype=float)
    phase = np.exp(-1j * K0 * (dirs @ np.asarray(positions).T))  # (..., N)
    zproj = np.array([0.0, 0.0, 1.0]) - dirs * dirs[..., 2:3]  # (..., 3)
    return zproj[..., :, None] * phase[..., None, :] / (4.0 * np.pi)


def _pair_tensor(state) -> np.ndarray:
    """Symmetric tensor with c_kl at (k, l) and (l, k), zero diagonal."""
    c = np.asarray(state.amplitudes, dtype=complex)
    _check_normalized(c)
    return state.pairs.to_tensor(c)


def _outgoing(radius):
    return 1.0 if radius is None else np.exp(1j * K0 * radius) / radius


def _g2_parts(f1, f2, ct):
    amp = np.einsum("...ak,kl,...bl->...ab", f1, ct, f2)
    num = np.sum(np.abs(amp) ** 2, axis=(-2, -1))
    i1 = np.sum(np.abs(f1 @ ct) ** 2, axis=(-2, -1))
    i2 = np.sum(np.abs(f2 @ ct) ** 2, axis=(-2, -1))
    return num, i1, i2


def _mask_scale(ct, radius) -> float:
    return MASK_REL * float(np.sum(np.abs(ct) ** 2)) * abs(_outgoing(radius)) ** 2 / (4.0 * np.pi) ** 2


def g2_value(state, geometry: EmitterArray, detectors: DetectorPair, radius: float | None = None) -> float:
    """Equal-time g2 for two far-field detectors; NaN on an intensity node."""
    ct = _pair_tensor(state)
    n1, n2 = detectors.unit_vectors()
    out = _outgoing(radius)
    f1 = out * farfield_columns(n1, geometry.positions)
    f2 = out * farfield_columns(n2, geometry.positions)
    num, i1, i2 = _g2_parts(f1, f2, ct)
    floor = _mask_scale(ct, radius)
    if i1 <= floor or i2 <= floor:
        return float("nan")
    return float(num / (i1 * i2))


def g2_map(state, geometry: EmitterArray, config: str = COINCIDENT, theta=None, phi=None,
           theta_nodes: int = 64, phi_nodes: int = 128, detector_theta: float = 0.0,
           detector_phi: float = 0.0, radius: float | None = None) -> FarFieldMap:
    """g2 over a direction grid.

    ``coincident``: both detectors at the scanned direction.
    ``polar-fixed``: detector 1 fixed at (detector_theta, detector_phi),
    detector 2 scans.  Points where a single-detector intensity vanishes
    are masked.
    """
    if config not in (COINCIDENT, POLAR_FIXED):
        raise DomainError(f"unknown detector configuration {config!r}")
    ct = _pair_tensor(state)
    weights = None
    if theta is None and phi is None:
        grid = sphere_grid(theta_nodes, phi_nodes)
        theta, phi, weights = grid.theta, grid.phi, grid.weights
    theta = np.atleast_1d(np.asarray(theta, float))
    phi = np.atleast_1d(np.asarray(phi, float))
    out = _outgoing(radius)
    f2 = out * farfield_columns(directions(theta, phi), geometry.positions)
    if config == COINCIDENT:
        f1 = f2
    else:
        n1 = directions([detector_theta], [detector_phi])[0, 0]
        f1 = np.broadcast_to(out * farfield_columns(n1, geometry.positions), f2.shape)
    num, i1, i2 = _g2_parts(f1, f2, ct)
    floor = _mask_scale(ct, radius)
    mask = (i1 <= floor) | (i2 <= floor)
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.where(mask, np.nan, num / (i1 * i2))
    meta = {"quantity": "g2", "config": config}
    if config == POLAR_FIXED:
        meta.update(detector_theta=float(detector_theta), detector_phi=float(detector_phi))
    return FarFieldMap(theta, phi, values, weights, mask, meta)


def green_columns_reference(direction, positions) -> np.ndarray:
    """Unvectorized (3, N) columns straight from the far-field Green's tensor."""
    z = np.array([0.0, 0.0, 1.0])
    return np.column_stack([green_tensor_farfield(direction, r) @ z for r in np.asarray(positions)])
