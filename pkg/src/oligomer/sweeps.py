"""Parameter sweeps over ring geometries and the B1 lifetime optimization."""

from __future__ import annotations

import enum
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import geometry as geo
from .emcore import DomainError
from .hybrid import ConstructionError, build_b1_states, model_for
from .manifolds import brillouin_zone
from .spectra import ConvergenceError, solve


class Target(str, enum.Enum):
    SINGLE_SPECTRUM = "single-spectrum"
    DOUBLE_SPECTRUM = "double-spectrum"
    TWO_MODE = "two-mode"
    B1_LIFETIME = "b1-lifetime"


B1_KEYS = (("+", "+"), ("+", "-"), ("-", "+"), ("-", "-"))


def linear_grid(lo: float, hi: float, count: int) -> np.ndarray:
    return np.linspace(float(lo), float(hi), int(count))


@dataclass(frozen=True)
class SweepSpec:
    geometry: str
    n_d: int
    a_range: tuple  # (min, max, count)
    ratio_range: tuple | None = None
    twist: float = 0.0
    target: Target = Target.SINGLE_SPECTRUM

    def __post_init__(self):
        object.__setattr__(self, "target", Target(self.target))
        for rng in (self.a_range, self.ratio_range):
            if rng is None:
                continue
            lo, hi, count = rng
            if not (lo > 0 and hi > lo and int(count) >= 2):
                raise DomainError(f"bad sweep range {rng}: need 0 < min < max and count >= 2")
        if self.geometry == geo.DOUBLE_RING and self.ratio_range is None:
            raise DomainError("double-ring sweeps need a b/a range")
        if self.geometry not in (geo.RING, geo.RING_CENTER, geo.DOUBLE_RING):
            raise DomainError(f"unknown geometry {self.geometry!r}")

    def points(self) -> list:
        a = linear_grid(*self.a_range)
        if self.ratio_range is None:
            return [(float(x), None) for x in a]
        r = linear_grid(*self.ratio_range)
        return [(float(x), float(y)) for x in a for y in r]

    def build(self, a: float, ratio: float | None) -> geo.EmitterArray:
        if self.geometry == geo.RING:
            return geo.build_ring(self.n_d, a)
        if self.geometry == geo.RING_CENTER:
            return geo.build_ring_plus_center(self.n_d, a)
        return geo.build_double_ring(self.n_d, a, ratio, self.twist)


def _spectrum_columns(states) -> dict:
    out = {}
    counter: dict = {}
    for st in sorted(states, key=lambda s: (s.m, s.energy.real, s.energy.imag)):
        j = counter.get(st.m, 0)
        counter[st.m] = j + 1
        out[f"re_m{st.m}_{j}"] = st.energy.real
        out[f"lifetime_m{st.m}_{j}"] = st.lifetime_enhancement
    return out


def evaluate_point(spec: SweepSpec, a: float, ratio: float | None) -> dict:
    g = spec.build(a, ratio)
    if spec.target is Target.SINGLE_SPECTRUM:
        return _spectrum_columns(solve(g, 1))
    if spec.target is Target.DOUBLE_SPECTRUM:
        return _spectrum_columns(solve(g, 2))
    if spec.target is Target.TWO_MODE:
        ms = [0] if g.tag == geo.RING_CENTER else brillouin_zone(spec.n_d)
        out = {}
        for m in ms:
            model = model_for(g, m)
            for tag, short in (("symmetric", "sym"), ("antisymmetric", "anti")):
                eps, _ = model.branch(tag)
                out[f"re_{short}_m{m}"] = eps.real
                out[f"lifetime_{short}_m{m}"] = -0.5 / eps.imag
        return out
    if spec.geometry != geo.DOUBLE_RING:
        raise DomainError("B1 lifetimes need a double-ring geometry")
    states = build_b1_states(spec.n_d, a, ratio, spec.twist)
    return {f"lifetime_{s1}{s2}": states[(s1, s2)].lifetime_enhancement for s1, s2 in B1_KEYS}


def _safe_point(args):
    spec, a, ratio = args
    try:
        return evaluate_point(spec, a, ratio), ""
    except (DomainError, ConvergenceError, ConstructionError, np.linalg.LinAlgError) as exc:
        return {}, f"{type(exc).__name__}: {exc}"


@dataclass
class SweepTable:
    columns: list
    rows: list  # list of dicts, grid order

    @property
    def n_failed(self) -> int:
        return sum(1 for r in self.rows if r["error"])

    def column(self, name: str) -> np.ndarray:
        return np.array([r.get(name, np.nan) for r in self.rows], dtype=float)


def run_sweep(spec: SweepSpec, workers: int = 1) -> SweepTable:
    """Evaluate every grid point; rows come back in grid order."""
    pts = spec.points()
    jobs = [(spec, a, r) for a, r in pts]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_safe_point, jobs))
    else:
        results = [_safe_point(j) for j in jobs]
    keys: list = []
    for values, _ in results:
        for k in values:
            if k not in keys:
                keys.append(k)
    head = ["a_over_lambda0"] + (["b_over_a"] if spec.ratio_range is not None else [])
    rows = []
    for (a, r), (values, err) in zip(pts, results):
        row = {"a_over_lambda0": a}
        if r is not None:
            row["b_over_a"] = r
        row.update(values)
        row["error"] = err
        rows.append(row)
    return SweepTable(head + keys + ["error"], rows)


@dataclass
class OptimizationResult:
    best_point: tuple
    best_lifetime_enhancement: float
    grid_surface: np.ndarray  # shape (len(a_grid), len(ratio_grid)); NaN where masked
    a_grid: np.ndarray
    ratio_grid: np.ndarray
    refined_point: tuple | None = None
    refined_lifetime_enhancement: float | None = None
    n_failed: int = field(default=0)


def b1_enhancement(a: float, ratio: float, n_d: int = 6) -> float:
    """gamma0 / Gamma of the fully antisymmetric B1 state."""
    return build_b1_states(n_d, a, ratio)[("-", "-")].lifetime_enhancement


def _masked(a, r, n_d):
    try:
        return b1_enhancement(a, r, n_d)
    except (DomainError, ConstructionError, ConvergenceError):
        return np.nan


def optimize_b1(a_bounds=(0.05, 0.25), ratio_bounds=(1.5, 3.0), a_count: int = 41, ratio_count: int = 31,
                n_d: int = 6, refine: bool = False) -> OptimizationResult:
    """Grid search of the B1 lifetime enhancement, with optional golden-section polish."""
    a_grid = linear_grid(a_bounds[0], a_bounds[1], a_count)
    r_grid = linear_grid(ratio_bounds[0], ratio_bounds[1], ratio_count)
    surface = np.array([[_masked(a, r, n_d) for r in r_grid] for a in a_grid])
    if np.all(np.isnan(surface)):
        raise ConvergenceError("every grid point failed", float("nan"))
    i, j = np.unravel_index(int(np.nanargmax(surface)), surface.shape)
    best = (float(a_grid[i]), float(r_grid[j]))
    result = OptimizationResult(best, float(surface[i, j]), surface, a_grid, r_grid,
                                n_failed=int(np.isnan(surface).sum()))
    if refine:
        a_best, r_best = best
        if 0 < i < len(a_grid) - 1:
            a_best = _golden(lambda x: _masked(x, r_best, n_d), a_grid[i - 1], a_grid[i], a_grid[i + 1])
        if 0 < j < len(r_grid) - 1:
            r_best = _golden(lambda y: _masked(a_best, y, n_d), r_grid[j - 1], r_grid[j], r_grid[j + 1])
        result.refined_point = (a_best, r_best)
        result.refined_lifetime_enhancement = _masked(a_best, r_best, n_d)
    return result


def _golden(f, lo, mid, hi) -> float:
    res = minimize_scalar(lambda x: -f(x), bracket=(lo, mid, hi), method="golden",
                          options={"xtol": 1e-6})
    x = float(res.x)
    return x if lo <= x <= hi else float(mid)
