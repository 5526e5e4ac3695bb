"""Single- and double-excitation Hamiltonians and their rotational sectors."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .emcore import GAMMA0, DomainError, coupling_rate
from .geometry import EmitterArray, rotate_z


class Manifold(str, enum.Enum):
    SINGLE = "single"
    DOUBLE = "double"


class PairIndex:
    """Lexicographic map between flat index p and emitter pairs (k, l), k < l."""

    def __init__(self, n: int):
        if n < 2:
            raise DomainError("pair index needs at least two emitters")
        self.n = n
        self.pairs = tuple(itertools.combinations(range(n), 2))
        self._index = {p: i for i, p in enumerate(self.pairs)}

    def __len__(self) -> int:
        return len(self.pairs)

    def index(self, k: int, l: int) -> int:
        if k == l:
            raise KeyError(f"no pair ({k}, {l}): doubly occupied emitter")
        return self._index[(k, l) if k < l else (l, k)]

    def pair(self, p: int) -> tuple[int, int]:
        return self.pairs[p]

    def to_tensor(self, c, scale: float = 1.0) -> np.ndarray:
        """Symmetric N x N tensor with zero diagonal, entries scale * c_kl."""
        c = np.asarray(c)
        t = np.zeros((self.n, self.n), dtype=complex)
        k, l = np.array(self.pairs).T
        t[k, l] = scale * c
        t[l, k] = scale * c
        return t

    def from_tensor(self, t, scale: float = 1.0) -> np.ndarray:
        k, l = np.array(self.pairs).T
        return np.asarray(t)[k, l] / scale


@dataclass(frozen=True)
class Hamiltonian:
    matrix: np.ndarray
    manifold: Manifold
    pairs: PairIndex | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def coupling_matrix(geometry: EmitterArray) -> np.ndarray:
    """Pairwise g(|r_k - r_l|) with a zero diagonal."""
    n = geometry.n_total
    g = np.zeros((n, n), dtype=complex)
    if n < 2:
        return g
    iu = np.triu_indices(n, 1)
    vals = coupling_rate(geometry.distances()[iu])
    g[iu] = vals
    g[iu[1], iu[0]] = vals
    return g


def build_h1(geometry: EmitterArray) -> Hamiltonian:
    h = coupling_matrix(geometry)
    h[np.diag_indices_from(h)] = -0.5j * GAMMA0
    h.setflags(write=False)
    return Hamiltonian(h, Manifold.SINGLE)


def build_h2(geometry: EmitterArray) -> Hamiltonian:
    """Double-excitation Hamiltonian on the k < l pair basis.

    Pairs sharing one emitter are coupled by g between the two emitters
    they differ in; pairs sharing none are uncoupled.
    """
    n = geometry.n_total
    if n < 2:
        raise DomainError("the double-excitation manifold needs N >= 2")
    g = coupling_matrix(geometry)
    pairs = PairIndex(n)
    h = np.zeros((len(pairs), len(pairs)), dtype=complex)
    for p, (k, l) in enumerate(pairs.pairs):
        h[p, p] = -1j * GAMMA0
        for j in range(n):
            if j == k or j == l:
                continue
            # excitation hops l -> j or k -> j
            h[p, pairs.index(k, j)] = g[l, j]
            h[p, pairs.index(j, l)] = g[k, j]
    h.setflags(write=False)
    return Hamiltonian(h, Manifold.DOUBLE, pairs)


def build_hamiltonian(geometry: EmitterArray, manifold) -> Hamiltonian:
    manifold = Manifold(manifold)
    return build_h1(geometry) if manifold is Manifold.SINGLE else build_h2(geometry)


def brillouin_zone(n_d: int) -> list[int]:
    """Quasi-momenta of the first zone; for even n_d the edge is +n_d/2."""
    if n_d < 1:
        raise DomainError("n_d must be positive")
    return list(range(-((n_d - 1) // 2), n_d // 2 + 1))


def fold_momentum(m: int, n_d: int) -> int:
    """Map any integer m onto the first-zone representative."""
    r = int(m) % n_d
    return r - n_d if r > n_d // 2 else r


def _symmetry_order(geometry: EmitterArray, n_d: int | None) -> int:
    n_d = n_d or geometry.n_d
    if not n_d:
        raise DomainError("geometry carries no rotational order; pass n_d")
    return int(n_d)


def rotation_permutation(geometry: EmitterArray, n_d: int | None = None, tol: float = 1e-9) -> np.ndarray:
    """perm[k] = index of the emitter that emitter k is carried onto by C_{n_d}.

    The rotation operator then acts as (R c)_k = c_{perm[k]}.
    """
    n_d = _symmetry_order(geometry, n_d)
    pos = geometry.positions
    rotated = rotate_z(pos, 2.0 * np.pi / n_d)
    scale = max(1.0, float(np.abs(pos).max()))
    d = np.linalg.norm(rotated[:, None, :] - pos[None, :, :], axis=-1)
    perm = np.argmin(d, axis=1)
    if np.any(d[np.arange(len(pos)), perm] > tol * scale) or len(set(perm.tolist())) != len(pos):
        raise DomainError(f"geometry is not symmetric under rotation by 2pi/{n_d}")
    return perm


def reflection_permutation(geometry: EmitterArray, tol: float = 1e-9) -> np.ndarray | None:
    """Permutation for the mirror y -> -y, or None if the array lacks it."""
    pos = geometry.positions
    mirrored = pos * np.array([1.0, -1.0, 1.0])
    scale = max(1.0, float(np.abs(pos).max()))
    d = np.linalg.norm(mirrored[:, None, :] - pos[None, :, :], axis=-1)
    perm = np.argmin(d, axis=1)
    if np.any(d[np.arange(len(pos)), perm] > tol * scale) or len(set(perm.tolist())) != len(pos):
        return None
    return perm


def pair_permutation(perm: np.ndarray, pairs: PairIndex) -> np.ndarray:
    out = np.empty(len(pairs), dtype=int)
    for p, (k, l) in enumerate(pairs.pairs):
        out[p] = pairs.index(int(perm[k]), int(perm[l]))
    return out


def _permutation_matrix(perm: np.ndarray) -> np.ndarray:
    r = np.zeros((len(perm), len(perm)))
    r[np.arange(len(perm)), perm] = 1.0
    return r


def rotation_operator(geometry: EmitterArray, manifold=Manifold.SINGLE, n_d: int | None = None) -> np.ndarray:
    """Permutation matrix of the 2pi/n_d rotation on the chosen manifold."""
    perm = rotation_permutation(geometry, n_d)
    if Manifold(manifold) is Manifold.DOUBLE:
        perm = pair_permutation(perm, PairIndex(geometry.n_total))
    return _permutation_matrix(perm)


def _orbits(perm: np.ndarray) -> list[list[int]]:
    seen = np.zeros(len(perm), dtype=bool)
    orbits = []
    for start in range(len(perm)):
        if seen[start]:
            continue
        orbit = [start]
        seen[start] = True
        nxt = int(perm[start])
        while nxt != start:
            orbit.append(nxt)
            seen[nxt] = True
            nxt = int(perm[nxt])
        orbits.append(orbit)
    return orbits


@dataclass(frozen=True)
class MomentumBasis:
    """Orthonormal basis of every quasi-momentum sector.

    ``sectors[m]`` has one column per orbit of the rotation compatible
    with m; the rotation multiplies each column by exp(2 pi i m / n_d).
    Columns are ordered by the smallest emitter (or pair) index of their
    orbit, so for ring-center the center comes first and for the double
    ring the inner ring comes first.
    """

    n_d: int
    manifold: Manifold
    zone: tuple
    sectors: dict

    @property
    def dim(self) -> int:
        return next(iter(self.sectors.values())).shape[0]

    def sector_dims(self) -> dict:
        return {m: v.shape[1] for m, v in self.sectors.items()}

    def block(self, matrix: np.ndarray, m: int) -> np.ndarray:
        v = self.sectors[m]
        return v.conj().T @ matrix @ v

    def unitary(self) -> np.ndarray:
        """All sector columns side by side, in zone order."""
        return np.hstack([self.sectors[m] for m in self.zone if self.sectors[m].shape[1]])

    def weights(self, vector) -> dict:
        """Squared projection of ``vector`` on each sector."""
        vec = np.asarray(vector)
        norm = np.vdot(vec, vec).real
        return {m: float(np.sum(np.abs(v.conj().T @ vec) ** 2) / norm) for m, v in self.sectors.items()}


def momentum_basis(geometry: EmitterArray, manifold=Manifold.SINGLE, n_d: int | None = None) -> MomentumBasis:
    manifold = Manifold(manifold)
    n_d = _symmetry_order(geometry, n_d)
    perm = rotation_permutation(geometry, n_d)
    if manifold is Manifold.DOUBLE:
        perm = pair_permutation(perm, PairIndex(geometry.n_total))
    dim = len(perm)
    orbits = _orbits(perm)
    zone = tuple(brillouin_zone(n_d))
    sectors = {}
    for m in zone:
        omega = np.exp(2j * np.pi * m / n_d)
        cols = []
        for orbit in orbits:
            length = len(orbit)
            if (m * length) % n_d:
                continue
            col = np.zeros(dim, dtype=complex)
            col[orbit] = omega ** np.arange(length) / np.sqrt(length)
            cols.append(col)
        sectors[m] = np.column_stack(cols) if cols else np.zeros((dim, 0), dtype=complex)
    return MomentumBasis(n_d, manifold, zone, sectors)


def count_states(n_d: int, n_r: int, m: int) -> int:
    """Number of doubly excited states with quasi-momentum m for n_r rings of n_d."""
    if n_d < 2 or n_r < 1:
        raise DomainError("count_states needs n_d >= 2 and n_r >= 1")
    if m not in brillouin_zone(n_d):
        raise DomainError(f"m={m} is outside the first Brillouin zone of n_d={n_d}")
    inter = n_r * (n_r - 1) // 2 * n_d
    if n_d % 2:
        return n_r * (n_d - 1) // 2 + inter
    if m % 2 == 0:
        return n_r * (n_d // 2) + inter
    return n_r * (n_d // 2 - 1) + inter
