"""One test per acceptance criterion; each prints a PASS/FAIL line."""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from oligomer.drive import (
    BesselBeam,
    fit_resonance,
    scattering_cross_section_sweep,
    single_emitter_cross_section,
    spectral_features,
)
from oligomer.farfield import COINCIDENT, P_SINGLE, DetectorPair, g2_map, g2_value, radiation_pattern
from oligomer.geometry import build_double_ring, build_points, build_ring, build_ring_plus_center
from oligomer.hybrid import (
    ANTISYMMETRIC,
    build_b1_states,
    decompose_double_state,
    label_hybrid_states,
    ring_center_model,
    ring_ring_model,
)
from oligomer.manifolds import Manifold, brillouin_zone, build_h2, count_states, momentum_basis
from oligomer.spectra import ring_energy_analytic, solve
from oligomer.sweeps import optimize_b1
from test_farfield import fock_g2, random_state

pytestmark = pytest.mark.acceptance


def report(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_01_ring_center_peak_subradiance():
    t0 = time.perf_counter()
    grid = np.round(np.arange(0.10, 0.22 + 1e-9, 0.002), 6)
    life = []
    for a in grid:
        g = build_ring_plus_center(6, a)
        states = label_hybrid_states(solve(g, 1), g)
        s = next(s for s in states if s.m == 0 and s.hybrid_tag == ANTISYMMETRIC)
        life.append(s.lifetime_enhancement)
    elapsed = time.perf_counter() - t0
    i = int(np.argmax(life))
    ok = 180 <= life[i] <= 290 and 0.15 <= grid[i] <= 0.17 and elapsed < 5
    report(1, ok, f"max gamma0/gamma_- = {life[i]:.2f} at a = {grid[i]:.3f} (need [180, 290] in [0.15, 0.17]); "
                  f"{elapsed:.2f} s")


def test_criterion_02_two_mode_exactness():
    t0 = time.perf_counter()
    worst = 0.0
    cases = [(build_ring_plus_center(6, a), lambda m, a=a: ring_center_model(6, a), [0]) for a in (0.08, 0.16, 0.22)]
    cases += [(build_double_ring(6, a, r), lambda m, a=a, r=r: ring_ring_model(6, a, r, m), brillouin_zone(6))
              for a, r in ((0.16, 2.2), (0.1, 1.6), (0.2, 2.8))]
    for g, model_of, ms in cases:
        states = solve(g, 1)
        for m in ms:
            num = sorted((s.energy for s in states if s.m == m), key=lambda z: (z.real, z.imag))
            mod = model_of(m)
            ana = sorted([mod.eps_plus, mod.eps_minus], key=lambda z: (z.real, z.imag))
            assert len(num) == 2
            worst = max(worst, max(abs(x - y) / abs(y) for x, y in zip(ana, num)))
    elapsed = time.perf_counter() - t0
    report(2, worst <= 1e-10 and elapsed < 1, f"worst relative deviation {worst:.2e} (need <= 1e-10); {elapsed:.2f} s")


def test_criterion_03_analytic_ring_spectrum():
    worst, worst_pm = 0.0, 0.0
    for a in (0.05, 0.10, 0.16, 0.22):
        for s in solve(build_ring(6, a), 1):
            worst = max(worst, abs(s.energy - ring_energy_analytic(6, a, s.m)))
        for m in (1, 2):
            worst_pm = max(worst_pm, abs(ring_energy_analytic(6, a, m) - ring_energy_analytic(6, a, -m)))
    report(3, worst <= 1e-10 and worst_pm <= 1e-10,
           f"numeric vs closed form {worst:.2e}, eps(m) - eps(-m) {worst_pm:.2e} (need <= 1e-10)")


def test_criterion_04_trace_sum_rules():
    geoms = [build_ring(n, a) for n in (3, 6, 8) for a in (0.05, 0.16)]
    geoms += [build_ring_plus_center(6, a) for a in (0.08, 0.16)]
    geoms += [build_double_ring(6, 0.16, 2.2), build_double_ring(5, 0.12, 1.7, 0.2), build_double_ring(4, 0.2, 3.0)]
    worst = 0.0
    for g in geoms:
        n = g.n_total
        worst = max(worst, abs(sum(s.gamma for s in solve(g, 1)) - n) / n)
        worst = max(worst, abs(sum(s.gamma for s in solve(g, 2)) - n * (n - 1)) / (n * (n - 1)))
    report(4, worst <= 1e-10, f"worst relative deviation over {len(geoms)} geometries {worst:.2e} (need <= 1e-10)")


def test_criterion_05_state_counting():
    mismatches = 0
    for n_d in range(3, 9):
        for n_r in (1, 2):
            g = build_ring(n_d, 0.1) if n_r == 1 else build_double_ring(n_d, 0.1, 2.0)
            dims = momentum_basis(g, Manifold.DOUBLE).sector_dims()
            mismatches += sum(count_states(n_d, n_r, m) != dims[m] for m in brillouin_zone(n_d))
    states = solve(build_double_ring(6, 0.16, 2.2), 2)
    total, m3 = len(states), sum(s.m == 3 for s in states)
    report(5, mismatches == 0 and total == 66 and m3 == 10,
           f"{mismatches} formula/sector mismatches; double ring has {total} states, {m3} at m = 3")


def test_criterion_06_doubly_excited_decomposition():
    g = build_double_ring(6, 0.16, 2.2)
    h2 = build_h2(g).matrix
    b1 = build_b1_states(6, 0.16, 2.2)
    tag = {"+": "symmetric", "-": "antisymmetric"}
    res_worst, add_worst = 0.0, 0.0
    for (s1, s2), st in b1.items():
        res_worst = max(res_worst, np.linalg.norm(h2 @ st.amplitudes - st.energy * st.amplitudes))
        g1 = ring_ring_model(6, 0.16, 2.2, 1).branch(tag[s1])[0]
        g2 = ring_ring_model(6, 0.16, 2.2, 2).branch(tag[s2])[0]
        ref = -2 * (g1 + g2).imag
        add_worst = max(add_worst, abs(st.gamma - ref) / ref)
    singles = solve(g, 1)
    dec_worst, n_dec = 0.0, 0
    for d in solve(g, 2):
        if d.near_defective:
            continue
        dec_worst = max(dec_worst, decompose_double_state(d, singles, 6).relative_error)
        n_dec += 1
    ok = res_worst <= 1e-8 and add_worst <= 1e-8 and dec_worst <= 1e-6
    report(6, ok, f"B1 residual {res_worst:.1e}, additivity {add_worst:.1e}, "
                  f"reconstruction {dec_worst:.1e} over {n_dec} states")


def test_criterion_07_optimization():
    t0 = time.perf_counter()
    res = optimize_b1((0.05, 0.25), (1.5, 3.0), 41, 31)
    elapsed = time.perf_counter() - t0
    a, r = res.best_point
    ok = abs(a - 0.16) <= 0.01 and abs(r - 2.2) <= 0.1 and res.best_lifetime_enhancement >= 100 and elapsed < 180
    report(7, ok, f"argmax ({a:.3f}, {r:.3f}), gamma0/Gamma = {res.best_lifetime_enhancement:.1f}; {elapsed:.1f} s")


def test_criterion_08_power_decay_balance():
    geoms = [build_ring(6, a) for a in (0.05, 0.1, 0.2)]
    geoms += [build_ring_plus_center(6, a) for a in (0.08, 0.16, 0.22)]
    geoms += [build_double_ring(6, a, 2.2) for a in (0.08, 0.16, 0.2)]
    worst, count = 0.0, 0
    for g in geoms:
        for s in solve(g, 1):
            p = radiation_pattern(s.amplitudes, g, 64, 128).integrate() / P_SINGLE
            worst = max(worst, abs(p - s.gamma))
            count += 1
    report(8, worst <= 1e-6, f"max |P/P_single - gamma/gamma0| = {worst:.1e} over {count} states (need <= 1e-6)")


def test_criterion_09_scs_physics():
    single = scattering_cross_section_sweep(build_points([[0.0, 0.0]]), BesselBeam(1, -1), np.linspace(-5, 5, 101))
    unit = np.max(np.abs(single.scs - 1.0))
    s0 = abs(single_emitter_cross_section(0.0) / (3 / (2 * np.pi)) - 1)
    grid = np.round(np.arange(-20.0, 20.0 + 5e-4, 0.001), 6)
    res = scattering_cross_section_sweep(build_ring_plus_center(6, 0.16), BesselBeam(1, -1), grid)
    feats = sorted(spectral_features(grid, res.scs), key=lambda f: f.center)
    model = ring_center_model(6, 0.16)
    poles = sorted([model.eps_plus, model.eps_minus], key=lambda z: z.real)
    centers_ok = len(feats) == 2 and all(abs(f.center - p.real) <= -p.imag for f, p in zip(feats, poles))
    eps_m, _ = model.antisymmetric
    fit = fit_resonance(grid, res.scs, eps_m.real, 0.05, -2 * eps_m.imag)
    width_err = abs(fit.width / (-2 * eps_m.imag) - 1)
    ok = unit <= 1e-12 and s0 <= 1e-8 and centers_ok and width_err <= 0.2
    report(9, ok, f"|sigma/sigma0 - 1| {unit:.1e}, sigma0 rel err {s0:.1e}, {len(feats)} features at "
                  f"{[round(f.center, 3) for f in feats]}, narrow width off by {100 * width_err:.1f}%")


def test_criterion_10_g2_properties():
    g = build_double_ring(6, 0.16, 2.2)
    psi = build_b1_states(6, 0.16, 2.2)[("-", "-")]
    rng = np.random.default_rng(7)
    exch = 0.0
    for _ in range(100):
        t1, t2 = rng.uniform(0.05, np.pi - 0.05, 2)
        p1, p2 = rng.uniform(0, 2 * np.pi, 2)
        a = g2_value(psi, g, DetectorPair(t1, p1, t2, p2))
        b = g2_value(psi, g, DetectorPair(t2, p2, t1, p1))
        exch = max(exch, abs(a - b) / max(1.0, abs(a)))
    theta = np.radians(np.arange(1.0, 90.0, 1.0))
    phi = np.radians(np.arange(0.0, 360.0, 2.0))
    m1 = g2_map(psi, g, COINCIDENT, theta, phi)
    m2 = g2_map(psi, g, COINCIDENT, theta, phi + np.pi / 3)
    ok_pts = ~(m1.mask | m2.mask)
    period = float(np.max(np.abs(m1.values[ok_pts] - m2.values[ok_pts]) / np.maximum(1.0, np.abs(m1.values[ok_pts]))))
    t_max = np.degrees(m1.argmax()[0])
    g4 = build_points([[0.0, 0.0], [0.2, 0.05], [-0.1, 0.17], [0.05, -0.3]])
    fock = 0.0
    for seed in range(5):
        st = random_state(4, seed)
        det = DetectorPair(*rng.uniform([0.1, 0, 0.1, 0], [3.0, 6.3, 3.0, 6.3]))
        ref = fock_g2(st.amplitudes, st.pairs, g4.positions, *det.unit_vectors())
        fock = max(fock, abs(g2_value(st, g4, det) - ref) / abs(ref))
    ok = exch <= 1e-10 and period <= 1e-8 and 55 <= t_max <= 75 and fock <= 1e-10
    report(10, ok, f"exchange {exch:.1e}, pi/3 periodicity {period:.1e}, theta max {t_max:.1f} deg, "
                   f"Fock-space oracle {fock:.1e}")


def test_criterion_11_limits():
    model = ring_center_model(6, 0.01)
    gamma_plus = -2 * model.symmetric[0].imag
    dicke_ok = 0.9 * 7 <= gamma_plus <= 7
    pair = build_points([[0.0, 0.0], [1e-3, 0.0]])
    p2 = radiation_pattern(np.array([1.0, 1.0]) / np.sqrt(2), pair).integrate() / P_SINGLE
    # isolated rings: inner at spacing a, outer at spacing 50 a
    worst = 0.0
    for m in brillouin_zone(6):
        mod = ring_ring_model(6, 0.1, 50.0, m)
        iso_a, iso_b = ring_energy_analytic(6, 0.1, m), ring_energy_analytic(6, 5.0, m)
        bound = abs(mod.kappa * mod.kappa_ba) / abs(iso_a - iso_b)
        shifts = sorted([abs(mod.eps_plus - iso_a), abs(mod.eps_minus - iso_a)])[0], \
            sorted([abs(mod.eps_plus - iso_b), abs(mod.eps_minus - iso_b)])[0]
        worst = max(worst, max(shifts) / bound)
    ok = dicke_ok and abs(p2 - 2) <= 1e-3 and worst <= 1.0
    report(11, ok, f"gamma_+/gamma0 = {gamma_plus:.3f} (need [6.3, 7]), two-emitter P/P_single = {p2:.6f}, "
                   f"largest shift / (|kappa|^2/|delta eps|) = {worst:.6f} (need <= 1)")
