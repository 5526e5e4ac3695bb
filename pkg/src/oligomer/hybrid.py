"""Two-mode hybridization of ring subsystems and the B1 doubly excited states."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import manifolds as mf
from .emcore import GAMMA0, DomainError, coupling_rate
from .geometry import EmitterArray, build_double_ring, ring_radius
from .spectra import DoubleExcState, SingleExcState, fix_phase, irrep_label, ring_energy_analytic

SYMMETRIC = "symmetric"
ANTISYMMETRIC = "antisymmetric"


class ConstructionError(RuntimeError):
    """The requested symmetric state cannot be built for this geometry."""


class DefectiveBasisError(RuntimeError):
    """A single-excitation basis is too ill-conditioned for a biorthogonal expansion."""


def _sqrt_branch(z: complex) -> complex:
    s = np.sqrt(complex(z))
    if s.real < 0 or (s.real == 0 and s.imag < 0):
        s = -s
    return s


def _mode_vector(eps, eps_a, eps_b, k_ab, k_ba, fallback):
    # null vector of [[eps_a - eps, k_ab], [k_ba, eps_b - eps]]
    # of the two row-derived candidates the longer one suffers less cancellation
    v = max((np.array([k_ab, eps - eps_a]), np.array([eps - eps_b, k_ba])), key=np.linalg.norm)
    if np.linalg.norm(v) <= 1e-14 * max(1.0, abs(eps)):
        v = np.asarray(fallback, dtype=complex)
    v = v / np.linalg.norm(v)
    ref = v[0] if abs(v[0]) > 1e-14 else v[1]
    return v * (abs(ref) / ref)


@dataclass(frozen=True)
class TwoModeModel:
    """Two resonances eps_a, eps_b coupled through kappa.

    For the geometries built here the coupling matrix is symmetric; a
    twisted double ring has kappa_ba != kappa, so both are kept.
    ``c_plus``/``c_minus`` are (c_a, c_b), Hermitian-normalized with c_a
    real and non-negative.
    """

    eps_a: complex
    eps_b: complex
    kappa: complex
    kappa_ba: complex
    eps_plus: complex
    eps_minus: complex
    eta_plus: complex
    eta_minus: complex
    c_plus: np.ndarray
    c_minus: np.ndarray
    tag_plus: str
    tag_minus: str

    def matrix(self) -> np.ndarray:
        return np.array([[self.eps_a, self.kappa], [self.kappa_ba, self.eps_b]])

    def branch(self, tag: str):
        """(energy, vector) of the symmetric or antisymmetric hybrid."""
        if tag == self.tag_plus:
            return self.eps_plus, self.c_plus
        if tag == self.tag_minus:
            return self.eps_minus, self.c_minus
        raise KeyError(tag)

    @property
    def antisymmetric(self):
        return self.branch(ANTISYMMETRIC)

    @property
    def symmetric(self):
        return self.branch(SYMMETRIC)

    @property
    def gamma_plus(self) -> float:
        return -2.0 * self.eps_plus.imag

    @property
    def gamma_minus(self) -> float:
        return -2.0 * self.eps_minus.imag


def _relative_phase(c) -> float:
    return float(abs(np.angle(c[1] * np.conj(c[0])))) if abs(c[0] * c[1]) > 1e-14 else 0.0


def hybridize(eps_a, eps_b, kappa, kappa_ba=None) -> TwoModeModel:
    """Eigen-solution of [[eps_a, kappa], [kappa_ba, eps_b]].

    eps_pm = (eps_a + eps_b +- s) / 2 with s = sqrt((eps_a - eps_b)^2 + 4 kappa kappa_ba)
    on the branch Re s >= 0 (Im s >= 0 on a tie).  The hybrid whose
    components are closer to out of phase is tagged antisymmetric.
    """
    eps_a, eps_b, kappa = complex(eps_a), complex(eps_b), complex(kappa)
    kappa_ba = kappa if kappa_ba is None else complex(kappa_ba)
    s = _sqrt_branch((eps_a - eps_b) ** 2 + 4.0 * kappa * kappa_ba)
    ep = 0.5 * (eps_a + eps_b + s)
    em = 0.5 * (eps_a + eps_b - s)
    cp = _mode_vector(ep, eps_a, eps_b, kappa, kappa_ba, (1.0, 0.0))
    cm = _mode_vector(em, eps_a, eps_b, kappa, kappa_ba, (0.0, 1.0))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        eta_p = (ep - eps_a) / kappa if kappa != 0 else complex("nan")
        eta_m = (em - eps_a) / kappa if kappa != 0 else complex("nan")
    if _relative_phase(cm) > _relative_phase(cp):
        tags = (SYMMETRIC, ANTISYMMETRIC)
    elif _relative_phase(cp) > _relative_phase(cm):
        tags = (ANTISYMMETRIC, SYMMETRIC)
    else:
        tags = (SYMMETRIC, ANTISYMMETRIC)
    return TwoModeModel(eps_a, eps_b, kappa, kappa_ba, ep, em, eta_p, eta_m, cp, cm, *tags)


def ring_center_model(n_d: int, spacing_a: float) -> TwoModeModel:
    """m = 0 hybrid of a central emitter (a) with the uniform ring state (b)."""
    if n_d < 2:
        raise DomainError("ring_center_model needs n_d >= 2")
    eps_ring = ring_energy_analytic(n_d, spacing_a, 0)
    kappa = np.sqrt(n_d) * coupling_rate(ring_radius(n_d, spacing_a))
    return hybridize(-0.5j * GAMMA0, eps_ring, kappa)


def ring_ring_model(n_d: int, spacing_a: float, ratio: float, m: int, twist: float = 0.0) -> TwoModeModel:
    """Quasi-momentum m hybrid of the inner (a) and outer (b) ring states."""
    if m not in mf.brillouin_zone(n_d):
        raise DomainError(f"m={m} is outside the first Brillouin zone of n_d={n_d}")
    if not ratio > 1.0:
        raise DomainError("outer ring must be larger than the inner one")
    r_in = ring_radius(n_d, spacing_a)
    r_out = ratio * r_in
    theta = 2.0 * np.pi * np.arange(n_d) / n_d
    phase = np.exp(1j * m * theta)

    def ring_sum(angles):
        d = np.sqrt(r_in**2 + r_out**2 - 2.0 * r_in * r_out * np.cos(angles))
        return complex(np.sum(coupling_rate(d) * phase))

    k_ab = ring_sum(theta + twist)  # inner emitter 0 to every outer emitter
    k_ba = ring_sum(theta - twist)  # outer emitter 0 to every inner emitter
    eps_a = ring_energy_analytic(n_d, spacing_a, m)
    eps_b = ring_energy_analytic(n_d, ratio * spacing_a, m)
    return hybridize(eps_a, eps_b, k_ab, k_ba)


def _ring_wave(n_d: int, m: int) -> np.ndarray:
    return np.exp(2j * np.pi * m * np.arange(n_d) / n_d) / np.sqrt(n_d)


def embed_hybrid(geometry: EmitterArray, m: int, c) -> np.ndarray:
    """Emitter amplitudes of a two-mode vector (c_a, c_b) in sector m."""
    n_d = geometry.n_d
    out = np.zeros(geometry.n_total, dtype=complex)
    f = _ring_wave(n_d, m)
    if geometry.tag == "ring-center":
        if m != 0:
            raise DomainError("the central emitter only hybridizes in the m = 0 sector")
        out[list(geometry.center_indices)] = c[0]
        out[list(geometry.rings[0])] = c[1] * f
    elif geometry.tag == "double-ring":
        out[list(geometry.rings[0])] = c[0] * f
        out[list(geometry.rings[1])] = c[1] * f
    else:
        raise DomainError(f"no two-mode structure for geometry {geometry.tag!r}")
    return out


def model_for(geometry: EmitterArray, m: int = 0) -> TwoModeModel:
    if geometry.tag == "ring-center":
        if m != 0:
            raise DomainError("ring-center hybridization exists only for m = 0")
        return ring_center_model(geometry.n_d, geometry.a)
    if geometry.tag == "double-ring":
        return ring_ring_model(geometry.n_d, geometry.a, geometry.b_over_a, m, geometry.twist)
    raise DomainError(f"no two-mode structure for geometry {geometry.tag!r}")


def hybrid_state(geometry: EmitterArray, m: int, tag: str) -> SingleExcState:
    model = model_for(geometry, m)
    eps, c = model.branch(tag)
    amps = fix_phase(embed_hybrid(geometry, m, c))
    return SingleExcState(complex(eps), amps, m, irrep_label(geometry.n_d, m), tag,
                          bilinear_norm=complex(amps @ amps))


def label_hybrid_states(states: list, geometry: EmitterArray, tol: float = 1e-8) -> list:
    """Set ``hybrid_tag`` on solved states that match a two-mode hybrid energy."""
    for st in states:
        try:
            model = model_for(geometry, st.m)
        except DomainError:
            continue
        scale = max(1.0, abs(st.energy))
        for eps, tag in ((model.eps_plus, model.tag_plus), (model.eps_minus, model.tag_minus)):
            if abs(st.energy - eps) < tol * scale:
                st.hybrid_tag = tag
    return states


def b1_tensor(geometry: EmitterArray, s1: str, s2: str) -> np.ndarray:
    """(i/2)(a b + b a - a' b' - b' a') with a = psi^(+1)_{s1}, b = psi^(+2)_{s2}; primes flip m."""
    def psi(m, tag):
        return embed_hybrid(geometry, m, model_for(geometry, m).branch(tag)[1])

    a, b = psi(1, s1), psi(2, s2)
    ap, bp = psi(-1, s1), psi(-2, s2)
    return 0.5j * (np.outer(a, b) + np.outer(b, a) - np.outer(ap, bp) - np.outer(bp, ap))


def build_b1_states(n_d: int = 6, spacing_a: float = 0.16, ratio: float = 2.2, twist: float = 0.0,
                    residual_tol: float = 1e-8) -> dict:
    """The four doubly excited m = 3 states built from (+-1, +-2) hybrid pairs.

    Returns {(s1, s2): DoubleExcState} with s in {"+", "-"}, where "-"
    is the antisymmetric hybrid.  Energies are eps^(1)_{s1} + eps^(2)_{s2}.
    """
    if n_d != 6:
        raise DomainError("B1 states are defined for the hexagonal double ring (n_d = 6)")
    geometry = build_double_ring(n_d, spacing_a, ratio, twist)
    h2 = mf.build_h2(geometry)
    pairs = h2.pairs
    for m in (1, 2):
        e_p = ring_ring_model(n_d, spacing_a, ratio, m, twist)
        e_m = ring_ring_model(n_d, spacing_a, ratio, -m, twist)
        if abs(e_p.eps_plus - e_m.eps_plus) > 1e-10 or abs(e_p.eps_minus - e_m.eps_minus) > 1e-10:
            raise ConstructionError(f"m = +-{m} hybrids are not degenerate")
    tags = {"+": SYMMETRIC, "-": ANTISYMMETRIC}
    scale = np.abs(h2.matrix).max()
    out = {}
    for s1 in "+-":
        for s2 in "+-":
            t = b1_tensor(geometry, tags[s1], tags[s2])
            if np.abs(np.diag(t)).max() > 1e-12:
                raise ConstructionError("B1 combination has a doubly occupied component")
            c = fix_phase(np.sqrt(2.0) * pairs.from_tensor(t))
            energy = (ring_ring_model(n_d, spacing_a, ratio, 1, twist).branch(tags[s1])[0]
                      + ring_ring_model(n_d, spacing_a, ratio, 2, twist).branch(tags[s2])[0])
            res = float(np.linalg.norm(h2.matrix @ c - energy * c))
            if res > residual_tol * scale:
                raise ConstructionError(f"B1 state ({s1}{s2}) is not an H2 eigenvector (residual {res:.2e})")
            out[(s1, s2)] = DoubleExcState(complex(energy), c, 3, "B1", s1 + s2,
                                           bilinear_norm=complex(c @ c), residual=res, pairs=pairs)
    return out


@dataclass(frozen=True)
class DecompositionResult:
    """Expansion of a doubly excited state over products of single states.

    ``v[i, j]`` are right coefficients, T = sum v_ij r_i r_j^T with r the
    single states; ``v_left`` the matching coefficients of the dual
    double state.  ``reconstructed_energy`` uses the biorthogonal weights
    v_left * v; ``weighted_energy`` uses |v|^2 normalized to unit sum.
    """

    v: np.ndarray
    v_left: np.ndarray
    single_m: tuple
    reconstructed_energy: complex
    weighted_energy: complex
    direct_energy: complex
    selection_violation: float
    weight_sum: float
    bilinear_sum: complex

    @property
    def relative_error(self) -> float:
        return abs(self.reconstructed_energy - self.direct_energy) / abs(self.direct_energy)

    @property
    def weighted_relative_error(self) -> float:
        return abs(self.weighted_energy - self.direct_energy) / abs(self.direct_energy)


def _double_dual(state: DoubleExcState, n_d: int | None) -> np.ndarray:
    if state.dual is not None and np.all(np.isfinite(state.dual)):
        return np.asarray(state.dual)
    c = state.amplitudes
    norm = c @ c
    # c^T is a left eigenvector; it is a usable dual when it is not self-orthogonal
    if n_d and state.m is not None and (2 * state.m) % n_d == 0 and abs(norm) > 1e-8:
        return c / norm
    raise DefectiveBasisError("doubly excited state has no usable left dual")


def decompose_double_state(state: DoubleExcState, singles: list, n_d: int | None = None) -> DecompositionResult:
    """Expand a doubly excited state over the single-excitation eigenbasis."""
    if any(s.near_defective for s in singles) or any(s.dual is None for s in singles):
        raise DefectiveBasisError("single-excitation basis is near-defective")
    r1 = np.column_stack([s.amplitudes for s in singles])
    l1 = np.vstack([s.dual for s in singles])
    eps = np.array([s.energy for s in singles])
    ms = tuple(s.m for s in singles)
    pairs = state.pairs
    t = pairs.to_tensor(state.amplitudes, 1.0 / np.sqrt(2.0))
    t_left = pairs.to_tensor(_double_dual(state, n_d), 1.0 / np.sqrt(2.0))
    v = l1 @ t @ l1.T
    v_left = r1.T @ t_left @ r1
    esum = eps[:, None] + eps[None, :]
    recon = complex(np.sum(v_left * v * esum))
    w = np.abs(v) ** 2
    weighted = complex(np.sum(w * esum) / np.sum(w))
    violation = 0.0
    if n_d and state.m is not None and all(m is not None for m in ms):
        mm = np.array(ms)
        bad = (mm[:, None] + mm[None, :] - state.m) % n_d != 0
        violation = float(np.abs(v[bad]).max()) if bad.any() else 0.0
    return DecompositionResult(v, v_left, ms, recon, weighted, complex(state.energy), violation,
                               float(w.sum()), complex(np.sum(v_left * v)))
