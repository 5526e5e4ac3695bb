"""Eigenstates of the effective Hamiltonians and their symmetry labels.

Amplitudes are always reported with the Hermitian normalization
sum |c|^2 = 1 and a fixed phase: the first component whose modulus is
maximal is made real and positive.  Each state also carries its
biorthogonal dual (a row vector w with w @ c = 1 and w @ c' = 0 for
every other state c' of the same Hamiltonian), which is what the
bilinear expansions need.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .emcore import GAMMA0, DomainError, coupling_rate
from .geometry import EmitterArray, ring_radius
from . import manifolds as mf

DEFECTIVE_CONDITION = 1e8
BILINEAR_TOL = 1e-8
_PHASE_REL = 1e-9


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, worst_residual: float):
        super().__init__(f"{message} (worst residual {worst_residual:.3e})")
        self.worst_residual = worst_residual


class ClassificationError(RuntimeError):
    """A state could not be assigned a single quasi-momentum."""


def fix_phase(vec: np.ndarray) -> np.ndarray:
    """Scale to unit Hermitian norm and make the leading largest entry real positive."""
    vec = np.asarray(vec, dtype=complex)
    vec = vec / np.linalg.norm(vec)
    mag = np.abs(vec)
    k = int(np.argmax(mag >= (1.0 - _PHASE_REL) * mag.max()))
    vec = vec * (abs(vec[k]) / vec[k])
    vec[k] = abs(vec[k])
    return vec


def _order(values: np.ndarray, tags=None) -> np.ndarray:
    re = np.round(values.real, 10)
    im = np.round(values.imag, 10)
    keys = [im, re] if tags is None else [np.asarray(tags), im, re]
    return np.lexsort(keys)


class EigResult(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray  # columns, Hermitian-normalized, phase-fixed
    duals: np.ndarray  # rows, duals @ vectors = I
    bilinear_norms: np.ndarray  # v^T v of the reported columns
    residuals: np.ndarray
    near_defective: np.ndarray


def eig_dense_complex(matrix) -> EigResult:
    """Full eigendecomposition of a dense complex matrix (LAPACK geev).

    Raises ConvergenceError if any pair violates
    ||A v - l v|| <= 1e-9 n ||A||_max ||v||.
    """
    a = np.asarray(matrix, dtype=complex)
    n = a.shape[0]
    if a.ndim != 2 or a.shape != (n, n):
        raise DomainError("eig_dense_complex needs a square matrix")
    if n > 512:
        raise DomainError("dense eigensolver limited to n <= 512")
    if not np.all(np.isfinite(a)):
        raise DomainError("matrix has non-finite entries")
    vals, vecs = np.linalg.eig(a)
    order = _order(vals)
    vals = vals[order]
    vecs = np.column_stack([fix_phase(vecs[:, j]) for j in order]) if n else vecs
    res = np.linalg.norm(a @ vecs - vecs * vals, axis=0)
    bound = 1e-9 * n * max(np.abs(a).max(), np.finfo(float).tiny)
    if n and res.max() > bound:
        raise ConvergenceError("eigenpairs failed the residual bound", float(res.max()))
    duals, defective = _duals(vecs)
    bil = np.einsum("ij,ij->j", vecs, vecs)
    return EigResult(vals, vecs, duals, bil, res, defective)


def _duals(vecs: np.ndarray):
    """Biorthogonal dual rows and a per-state near-defective flag."""
    try:
        duals = np.linalg.inv(vecs)
        cond = np.linalg.norm(duals, axis=1) * np.linalg.norm(vecs, axis=0)
        return duals, ~np.isfinite(cond) | (cond > DEFECTIVE_CONDITION)
    except np.linalg.LinAlgError:
        n = vecs.shape[1]
        return np.full((n, vecs.shape[0]), np.nan + 0j), np.ones(n, dtype=bool)


@dataclass
class SingleExcState:
    energy: complex
    amplitudes: np.ndarray
    m: int | None = None
    irrep: str | None = None
    hybrid_tag: str | None = None
    dual: np.ndarray | None = field(default=None, repr=False)
    bilinear_norm: complex = 1.0
    near_defective: bool = False
    residual: float = 0.0

    @property
    def gamma(self) -> float:
        return -2.0 * self.energy.imag

    @property
    def detuning(self) -> float:
        return self.energy.real

    @property
    def lifetime_enhancement(self) -> float:
        return GAMMA0 / self.gamma

    def to_dict(self) -> dict:
        return {
            "energy": [float(self.energy.real), float(self.energy.imag)],
            "gamma_over_gamma0": float(self.gamma / GAMMA0),
            "m": self.m,
            "irrep": self.irrep,
            "hybrid_tag": self.hybrid_tag,
            "near_defective": bool(self.near_defective),
            "amplitudes": [[float(c.real), float(c.imag)] for c in self.amplitudes],
        }


@dataclass
class DoubleExcState(SingleExcState):
    """Pair amplitudes c_kl on the k < l basis of :class:`PairIndex`."""

    pairs: mf.PairIndex | None = field(default=None, repr=False)

    def tensor(self) -> np.ndarray:
        """Symmetric N x N embedding with c_kl / sqrt(2) off the diagonal."""
        return self.pairs.to_tensor(self.amplitudes, 1.0 / np.sqrt(2.0))


def irrep_label(n_d: int, m: int, parity: int | None = None) -> str | None:
    """C6v irrep for an N_d = 6 quasi-momentum.

    ``parity`` is the character under the mirror through an emitter
    (y -> -y); it separates A1/A2 at m = 0 and B1/B2 at m = 3.
    """
    if n_d != 6:
        return None
    m = mf.fold_momentum(m, 6)
    if abs(m) == 1:
        return "E1"
    if abs(m) == 2:
        return "E2"
    if m == 0:
        return "A2" if parity == -1 else "A1"
    if parity is None:
        return "B"
    return "B2" if parity == 1 else "B1"


def _mirror_parity(vec: np.ndarray, perm: np.ndarray | None) -> int | None:
    if perm is None:
        return None
    overlap = np.vdot(vec, vec[perm]) / np.vdot(vec, vec)
    if abs(overlap - 1.0) < 1e-8:
        return 1
    if abs(overlap + 1.0) < 1e-8:
        return -1
    return None


def _state_cls(manifold: mf.Manifold):
    return DoubleExcState if manifold is mf.Manifold.DOUBLE else SingleExcState


def _make_states(ham: mf.Hamiltonian, vals, vecs, ms, duals, defective, mirror):
    cls = _state_cls(ham.manifold)
    h = ham.matrix
    scale = max(np.abs(h).max(), np.finfo(float).tiny)
    states = []
    for j in range(len(vals)):
        c = vecs[:, j]
        res = float(np.linalg.norm(h @ c - vals[j] * c))
        if res > 1e-9 * scale:
            raise ConvergenceError("state failed the residual bound", res)
        kw = {"pairs": ham.pairs} if cls is DoubleExcState else {}
        m = ms[j]
        st = cls(complex(vals[j]), c, m, None, None, duals[j], complex(c @ c), bool(defective[j]), res, **kw)
        if m is not None and mirror[0]:
            st.irrep = irrep_label(mirror[0], m, _mirror_parity(c, mirror[1]))
        states.append(st)
    return states


def _mirror_for(geometry: EmitterArray, manifold: mf.Manifold, n_d: int | None):
    perm = mf.reflection_permutation(geometry)
    if perm is not None and manifold is mf.Manifold.DOUBLE:
        perm = mf.pair_permutation(perm, mf.PairIndex(geometry.n_total))
    return n_d, perm


def solve(geometry: EmitterArray, excitations: int = 1, n_d: int | None = None,
          full_matrix: bool = False) -> list:
    """All eigenstates of H1 (excitations=1) or H2 (excitations=2).

    With rotational order known, every quasi-momentum block is solved
    separately, so each state carries an exact m label.  ``full_matrix``
    diagonalizes the whole Hamiltonian instead and labels the states
    afterwards with :func:`classify`.
    """
    if excitations not in (1, 2):
        raise DomainError("excitations must be 1 or 2")
    manifold = mf.Manifold.SINGLE if excitations == 1 else mf.Manifold.DOUBLE
    ham = mf.build_hamiltonian(geometry, manifold)
    n_d = n_d or geometry.n_d
    mirror = _mirror_for(geometry, manifold, n_d)

    if not n_d or full_matrix:
        eig = eig_dense_complex(ham.matrix)
        states = _make_states(ham, eig.values, eig.vectors, [None] * len(eig.values),
                              eig.duals, eig.near_defective, mirror)
        if n_d:
            states = classify(states, geometry, mf.momentum_basis(geometry, manifold, n_d), ham)
        return states

    basis = mf.momentum_basis(geometry, manifold, n_d)
    vals, cols, ms = [], [], []
    for m in basis.zone:
        v = basis.sectors[m]
        if v.shape[1] == 0:
            continue
        w, y = np.linalg.eig(basis.block(ham.matrix, m))
        vals.append(w)
        cols.append(v @ y)
        ms += [m] * len(w)
    vals = np.concatenate(vals)
    vecs = np.hstack(cols)
    order = _order(vals, ms)
    vals = vals[order]
    ms = [ms[j] for j in order]
    vecs = np.column_stack([fix_phase(vecs[:, j]) for j in order])
    duals, defective = _duals(vecs)
    return _make_states(ham, vals, vecs, ms, duals, defective, mirror)


def classify(states: list, geometry: EmitterArray, basis: mf.MomentumBasis,
             ham: mf.Hamiltonian | None = None, tol: float = 1e-8) -> list:
    """Attach quasi-momentum (and N_d = 6 irrep) labels to solved states.

    Degenerate groups whose members mix several sectors are rotated
    into eigenvectors of the rotation operator before labelling.
    """
    n_d = basis.n_d
    rot = mf.rotation_operator(geometry, basis.manifold, n_d)
    mirror = _mirror_for(geometry, basis.manifold, n_d)
    vecs = np.column_stack([s.amplitudes for s in states])
    vals = np.array([s.energy for s in states])
    scale = max(1.0, np.abs(vals).max())
    out_vecs, out_vals, out_ms = [], [], []
    used = np.zeros(len(states), dtype=bool)
    for j in range(len(states)):
        if used[j]:
            continue
        group = np.flatnonzero(~used & (np.abs(vals - vals[j]) < 1e-9 * scale))
        used[group] = True
        c = vecs[:, group]
        q, _ = np.linalg.qr(c)
        w, y = np.linalg.eig(q.conj().T @ rot @ q)
        for k in range(len(group)):
            vec = fix_phase(q @ y[:, k])
            m = mf.fold_momentum(int(round(np.angle(w[k]) * n_d / (2 * np.pi))), n_d)
            weight = basis.weights(vec)[m]
            if weight < 1.0 - tol:
                raise ClassificationError(f"state at energy {vals[j]:.6g} splits across sectors "
                                          f"(weight {weight:.3e} in m={m})")
            out_vecs.append(vec)
            out_vals.append(np.mean(vals[group]) if len(group) > 1 else vals[j])
            out_ms.append(m)
    vecs = np.column_stack(out_vecs)
    vals = np.array(out_vals)
    order = _order(vals, out_ms)
    vals, vecs = vals[order], vecs[:, order]
    ms = [out_ms[j] for j in order]
    # refine degenerate energies with the Rayleigh quotient of each new vector
    if ham is None:
        ham = mf.build_hamiltonian(geometry, basis.manifold)
    duals, defective = _duals(vecs)
    vals = np.array([duals[j] @ ham.matrix @ vecs[:, j] for j in range(len(vals))])
    return _make_states(ham, vals, vecs, ms, duals, defective, mirror)


def ring_energy_analytic(n_d: int, spacing_a: float, m: int) -> complex:
    """Single-ring energy -i/2 + sum_k g(|r_1k|) exp(i m phi_k).

    Emitters k and n_d - k sit at the same distance with conjugate
    phases; adding those two phases first keeps eps(m) = eps(-m) exact.
    """
    if m not in mf.brillouin_zone(n_d):
        raise DomainError(f"m={m} is outside the first Brillouin zone of n_d={n_d}")
    radius = ring_radius(n_d, spacing_a)
    total = -0.5j * GAMMA0
    for k in range(1, n_d // 2 + 1):
        g = coupling_rate(2.0 * radius * np.sin(np.pi * k / n_d))
        theta = 2.0 * np.pi * mf.fold_momentum(m * k, n_d) / n_d
        phase = np.exp(1j * theta)
        total += g * (phase if 2 * k == n_d else phase + np.conj(phase))
    return complex(total)


def ring_energy_hexagon(spacing_a: float, m: int) -> complex:
    """Closed form for N_d = 6, grouping the five neighbours by distance."""
    a = spacing_a
    s = 2.0 * (coupling_rate(a) * np.cos(np.pi * m / 3.0)
               + coupling_rate(np.sqrt(3.0) * a) * np.cos(2.0 * np.pi * m / 3.0)
               + 0.5 * coupling_rate(2.0 * a) * np.cos(np.pi * m))
    return complex(-0.5j * GAMMA0 + s)


def states_by_m(states: list) -> dict:
    out: dict = {}
    for s in states:
        out.setdefault(s.m, []).append(s)
    return out
