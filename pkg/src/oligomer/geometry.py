"""Planar emitter arrays: rings, ring with a central emitter, double rings."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .emcore import DomainError

RING = "ring"
RING_CENTER = "ring-center"
DOUBLE_RING = "double-ring"
POINTS = "points"

TAGS = (RING, RING_CENTER, DOUBLE_RING, POINTS)


@dataclass(frozen=True)
class EmitterArray:
    """Positions of z-oriented emitters in the z = 0 plane (units of lambda0).

    ``ring_of`` holds 0 for the central emitter or inner ring and 1 for
    the outer ring.  ``rings`` lists the emitter indices of every ring in
    angular order, so ``rings[j][k]`` sits at angle 2 pi k / n_d (+ twist
    for the outer ring of a double ring).
    """

    positions: np.ndarray
    tag: str = POINTS
    n_d: int | None = None
    a: float | None = None
    b_over_a: float | None = None
    twist: float = 0.0
    ring_of: np.ndarray = field(default=None)
    rings: tuple = ()

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise DomainError("positions must be an (N, 3) array")
        if np.any(np.abs(pos[:, 2]) > 0.0):
            raise DomainError("all emitters must lie in the z = 0 plane")
        if len(pos) > 1 and min_distance(pos) <= 0.0:
            raise DomainError("coincident emitters are not supported")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        ring_of = np.zeros(len(pos), dtype=int) if self.ring_of is None else np.asarray(self.ring_of, dtype=int)
        ring_of.setflags(write=False)
        object.__setattr__(self, "ring_of", ring_of)
        object.__setattr__(self, "rings", tuple(tuple(int(i) for i in r) for r in self.rings))

    @property
    def n_total(self) -> int:
        return len(self.positions)

    @property
    def n_rings(self) -> int:
        return len(self.rings)

    @property
    def center_indices(self) -> tuple[int, ...]:
        in_ring = {i for r in self.rings for i in r}
        return tuple(i for i in range(self.n_total) if i not in in_ring)

    def radius(self, ring: int = 0) -> float:
        idx = self.rings[ring]
        return float(np.linalg.norm(self.positions[idx[0]]))

    def distances(self) -> np.ndarray:
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        return np.linalg.norm(diff, axis=-1)

    def to_dict(self) -> dict:
        if self.tag == POINTS:
            return {"tag": POINTS, "positions": self.positions.tolist()}
        return {
            "tag": self.tag,
            "n_d": self.n_d,
            "a": self.a,
            "b_over_a": self.b_over_a,
            "twist": self.twist,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def min_distance(positions) -> float:
    pos = np.asarray(positions, dtype=float)
    diff = pos[:, None, :] - pos[None, :, :]
    d = np.linalg.norm(diff, axis=-1)
    d[np.diag_indices_from(d)] = np.inf
    return float(d.min())


def ring_radius(n_d: int, spacing_a: float) -> float:
    return spacing_a / (2.0 * np.sin(np.pi / n_d))


def _ring_positions(n_d: int, radius: float, offset: float = 0.0) -> np.ndarray:
    phi = 2.0 * np.pi * np.arange(n_d) / n_d + offset
    return np.column_stack([radius * np.cos(phi), radius * np.sin(phi), np.zeros(n_d)])


def _check_ring_args(n_d, spacing_a):
    if int(n_d) != n_d or n_d < 2:
        raise DomainError(f"a ring needs at least 2 emitters, got n_d={n_d}")
    if not spacing_a > 0.0:
        raise DomainError(f"ring spacing must be positive, got {spacing_a}")


def build_ring(n_d: int, spacing_a: float) -> EmitterArray:
    """N_d emitters on a circle with nearest-neighbour spacing ``spacing_a``."""
    _check_ring_args(n_d, spacing_a)
    pos = _ring_positions(n_d, ring_radius(n_d, spacing_a))
    return EmitterArray(pos, RING, int(n_d), float(spacing_a),
                        ring_of=np.zeros(n_d, dtype=int), rings=(tuple(range(n_d)),))


def build_ring_plus_center(n_d: int, spacing_a: float) -> EmitterArray:
    """Ring plus one emitter at the origin.  The center gets index 0."""
    _check_ring_args(n_d, spacing_a)
    ring = _ring_positions(n_d, ring_radius(n_d, spacing_a))
    pos = np.vstack([np.zeros((1, 3)), ring])
    ring_of = np.r_[0, np.ones(n_d, dtype=int)]
    return EmitterArray(pos, RING_CENTER, int(n_d), float(spacing_a),
                        ring_of=ring_of, rings=(tuple(range(1, n_d + 1)),))


def build_double_ring(n_d: int, spacing_a: float, ratio_b_over_a: float, twist: float = 0.0) -> EmitterArray:
    """Two concentric rings of N_d emitters; the outer spacing is b = ratio * a.

    Inner ring emitters are 0..N_d-1, outer ring N_d..2N_d-1.  Both rings
    start at angle 0 unless ``twist`` (radians) rotates the outer one.
    """
    _check_ring_args(n_d, spacing_a)
    if not ratio_b_over_a > 1.0:
        raise DomainError(f"outer ring must be larger than inner ring, got b/a={ratio_b_over_a}")
    r_in = ring_radius(n_d, spacing_a)
    pos = np.vstack([
        _ring_positions(n_d, r_in),
        _ring_positions(n_d, ratio_b_over_a * r_in, float(twist)),
    ])
    ring_of = np.r_[np.zeros(n_d, dtype=int), np.ones(n_d, dtype=int)]
    rings = (tuple(range(n_d)), tuple(range(n_d, 2 * n_d)))
    return EmitterArray(pos, DOUBLE_RING, int(n_d), float(spacing_a), float(ratio_b_over_a),
                        float(twist), ring_of=ring_of, rings=rings)


def build_points(positions) -> EmitterArray:
    """Generic planar point set without ring metadata."""
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    if pos.shape[1] == 2:
        pos = np.column_stack([pos, np.zeros(len(pos))])
    return EmitterArray(pos, POINTS)


def from_dict(spec: dict) -> EmitterArray:
    tag = spec.get("tag")
    if tag == RING:
        return build_ring(int(spec["n_d"]), float(spec["a"]))
    if tag == RING_CENTER:
        return build_ring_plus_center(int(spec["n_d"]), float(spec["a"]))
    if tag == DOUBLE_RING:
        return build_double_ring(int(spec["n_d"]), float(spec["a"]), float(spec["b_over_a"]),
                                 float(spec.get("twist") or 0.0))
    if tag == POINTS:
        return build_points(spec["positions"])
    raise DomainError(f"unknown geometry tag {tag!r}")


def from_json(text: str) -> EmitterArray:
    return from_dict(json.loads(text))


def rotate_z(positions, angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return np.asarray(positions) @ rot.T
