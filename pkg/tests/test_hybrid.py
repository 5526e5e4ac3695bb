import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oligomer.geometry import build_double_ring, build_ring_plus_center
from oligomer.hybrid import (
    ANTISYMMETRIC,
    SYMMETRIC,
    ConstructionError,
    DefectiveBasisError,
    build_b1_states,
    decompose_double_state,
    embed_hybrid,
    hybridize,
    label_hybrid_states,
    ring_center_model,
    ring_ring_model,
)
from oligomer.manifolds import build_h1, build_h2, momentum_basis
from oligomer.spectra import ring_energy_analytic, solve

finite = st.floats(-5, 5, allow_nan=False)
complexes = st.builds(complex, finite, st.floats(-5, 0))


def sector_energies(g, m):
    return sorted((s.energy for s in solve(g, 1) if s.m == m), key=lambda z: (z.real, z.imag))


def test_decoupled_limit():
    model = hybridize(1.0 - 0.5j, -2.0 - 0.1j, 0.0)
    got = sorted([model.eps_plus, model.eps_minus], key=lambda z: z.real)
    assert np.allclose(got, [-2.0 - 0.1j, 1.0 - 0.5j], rtol=0, atol=1e-15)
    for c in (model.c_plus, model.c_minus):
        assert np.isclose(np.linalg.norm(c), 1.0)
        assert np.isclose(abs(c[0] * c[1]), 0.0)


def test_degenerate_splitting():
    eps, kappa = 0.3 - 0.5j, 0.8
    model = hybridize(eps, eps, kappa)
    assert model.eps_plus == pytest.approx(eps + kappa)
    assert model.eps_minus == pytest.approx(eps - kappa)
    assert np.allclose(model.c_plus, np.array([1, 1]) / np.sqrt(2))
    assert np.allclose(model.c_minus, np.array([1, -1]) / np.sqrt(2))
    assert (model.tag_plus, model.tag_minus) == (SYMMETRIC, ANTISYMMETRIC)


@given(complexes, complexes, complexes)
@settings(max_examples=200, deadline=None)
def test_trace_and_determinant(ea, eb, k):
    model = hybridize(ea, eb, k)
    scale = max(1.0, abs(ea) + abs(eb) + abs(k)) ** 2
    assert abs(model.eps_plus + model.eps_minus - (ea + eb)) <= 1e-12 * scale
    assert abs(model.eps_plus * model.eps_minus - (ea * eb - k * k)) <= 1e-12 * scale
    for eps, c in ((model.eps_plus, model.c_plus), (model.eps_minus, model.c_minus)):
        assert np.linalg.norm(c) == pytest.approx(1.0)
        assert np.linalg.norm(model.matrix() @ c - eps * c) <= 1e-9 * scale
    assert {model.tag_plus, model.tag_minus} == {SYMMETRIC, ANTISYMMETRIC}


def test_sqrt_branch():
    model = hybridize(0.0, 0.0, 1j)
    s = model.eps_plus - model.eps_minus
    assert s.real > 0 or (s.real == 0 and s.imag >= 0)


@pytest.mark.parametrize("a", [0.05, 0.12, 0.16, 0.22])
def test_ring_center_model_is_exact(a):
    model = ring_center_model(6, a)
    got = sorted([model.eps_plus, model.eps_minus], key=lambda z: (z.real, z.imag))
    ref = sector_energies(build_ring_plus_center(6, a), 0)
    assert np.allclose(got, ref, rtol=1e-10, atol=0)


def test_ring_center_vectors_reproduce_eigenvectors():
    g = build_ring_plus_center(6, 0.16)
    h = build_h1(g).matrix
    model = ring_center_model(6, 0.16)
    for eps, c in ((model.eps_plus, model.c_plus), (model.eps_minus, model.c_minus)):
        v = embed_hybrid(g, 0, c)
        assert np.linalg.norm(v) == pytest.approx(1.0)
        assert np.linalg.norm(h @ v - eps * v) < 1e-12


def test_ring_center_antisymmetric_state_at_016():
    model = ring_center_model(6, 0.16)
    eps, c = model.antisymmetric
    assert 1 / (-2 * eps.imag) > 200
    # weight sits on the central emitter
    assert abs(c[0]) ** 2 > 0.5
    assert abs(np.angle(c[1] / c[0])) > np.pi - 0.05


def test_ring_center_dicke_limit():
    model = ring_center_model(6, 0.01)
    eps, _ = model.symmetric
    assert 0.9 * 7 <= -2 * eps.imag <= 7


def test_ring_center_small_spacing_limit_of_subradiant_rate():
    # As a -> 0 the antisymmetric rate tends to a finite value set by the
    # near-field block [[0, sqrt6 c], [sqrt6 c, s c]] with the 1/x^3 couplings;
    # second order in the far-field corrections gives the limit below.
    rates = [-2 * ring_center_model(6, a).antisymmetric[0].imag for a in (0.004, 0.002, 0.001)]
    assert rates[-1] == pytest.approx(0.18, abs=2e-3)
    assert abs(rates[-1] - rates[-2]) < abs(rates[-2] - rates[-3]) + 1e-6


@pytest.mark.parametrize("a,ratio", [(0.16, 2.2), (0.1, 1.5), (0.2, 3.0), (0.1, 50.0)])
def test_ring_ring_model_is_exact(a, ratio):
    g = build_double_ring(6, a, ratio)
    for m in range(-2, 4):
        model = ring_ring_model(6, a, ratio, m)
        got = sorted([model.eps_plus, model.eps_minus], key=lambda z: (z.real, z.imag))
        assert np.allclose(got, sector_energies(g, m), rtol=1e-10, atol=0)


def test_ring_ring_model_twisted_is_exact():
    g = build_double_ring(6, 0.14, 2.0, 0.25)
    for m in range(-2, 4):
        model = ring_ring_model(6, 0.14, 2.0, m, 0.25)
        got = sorted([model.eps_plus, model.eps_minus], key=lambda z: (z.real, z.imag))
        assert np.allclose(got, sector_energies(g, m), rtol=1e-10, atol=0)


@pytest.mark.parametrize("m", [1, 2])
def test_ring_ring_parity(m):
    p, q = ring_ring_model(6, 0.16, 2.2, m), ring_ring_model(6, 0.16, 2.2, -m)
    assert abs(p.kappa - q.kappa) < 1e-12
    assert abs(p.eps_plus - q.eps_plus) < 1e-12 and abs(p.eps_minus - q.eps_minus) < 1e-12


def test_decoupling_shift_is_second_order():
    # far-apart rings: the exact shift agrees with kappa^2 / delta up to the next order
    for m in range(-2, 4):
        model = ring_ring_model(6, 0.1, 50.0, m)
        delta = model.eps_a - model.eps_b
        k2 = model.kappa * model.kappa_ba
        shift = min(abs(model.eps_plus - model.eps_a), abs(model.eps_minus - model.eps_a))
        assert abs(shift - abs(k2 / delta)) <= 2 * abs(k2) ** 2 / abs(delta) ** 3 + 1e-15
        assert model.eps_a == ring_energy_analytic(6, 0.1, m)


def test_label_hybrid_states():
    g = build_double_ring(6, 0.16, 2.2)
    states = label_hybrid_states(solve(g, 1), g)
    assert all(s.hybrid_tag in (SYMMETRIC, ANTISYMMETRIC) for s in states)
    for m in range(-2, 4):
        tags = sorted(s.hybrid_tag for s in states if s.m == m)
        assert tags == [ANTISYMMETRIC, SYMMETRIC]


@pytest.fixture(scope="module")
def b1():
    return build_b1_states(6, 0.16, 2.2)


@pytest.fixture(scope="module")
def optimum():
    g = build_double_ring(6, 0.16, 2.2)
    return g, solve(g, 1), solve(g, 2)


def test_b1_states_are_eigenvectors(b1):
    g = build_double_ring(6, 0.16, 2.2)
    h2 = build_h2(g).matrix
    basis = momentum_basis(g, "double")
    assert set(b1) == {("+", "+"), ("+", "-"), ("-", "+"), ("-", "-")}
    for st_ in b1.values():
        c = st_.amplitudes
        assert np.linalg.norm(c) == pytest.approx(1.0, abs=1e-13)
        assert np.linalg.norm(h2 @ c - st_.energy * c) <= 1e-8 * np.abs(h2).max()
        assert np.allclose(np.diag(st_.tensor()), 0.0)
        assert basis.weights(c)[3] > 1 - 1e-10


def test_b1_decay_additivity(b1):
    for (s1, s2), st_ in b1.items():
        tag = {"+": SYMMETRIC, "-": ANTISYMMETRIC}
        g1 = -2 * ring_ring_model(6, 0.16, 2.2, 1).branch(tag[s1])[0].imag
        g2 = -2 * ring_ring_model(6, 0.16, 2.2, 2).branch(tag[s2])[0].imag
        assert st_.gamma == pytest.approx(g1 + g2, rel=1e-8)


def test_b1_minus_minus_dominated_by_m1(b1):
    g1 = -2 * ring_ring_model(6, 0.16, 2.2, 1).antisymmetric[0].imag
    g2 = -2 * ring_ring_model(6, 0.16, 2.2, 2).antisymmetric[0].imag
    assert g2 < 0.1 * g1
    assert b1[("-", "-")].gamma == pytest.approx(g1, rel=0.1)


def test_b1_states_match_solved_b1(b1, optimum):
    _, _, doubles = optimum
    solved = [s.energy for s in doubles if s.irrep == "B1"]
    for st_ in b1.values():
        assert min(abs(st_.energy - e) for e in solved) < 1e-10


def test_b1_needs_hexagon():
    with pytest.raises(Exception):
        build_b1_states(5, 0.16, 2.2)


def test_twisted_rings_have_no_b1_states():
    with pytest.raises(ConstructionError):
        build_b1_states(6, 0.16, 2.2, twist=0.2)


def test_decomposition_of_all_double_states(optimum):
    _, singles, doubles = optimum
    assert not any(s.near_defective for s in singles)
    for d in doubles:
        res = decompose_double_state(d, singles, 6)
        assert res.selection_violation < 1e-10
        assert res.relative_error < 1e-6
        assert res.bilinear_sum == pytest.approx(1.0, abs=1e-10)


def test_decomposition_of_b1_minus_minus(b1, optimum):
    _, singles, _ = optimum
    res = decompose_double_state(b1[("-", "-")], singles, 6)
    big = np.abs(res.v) > 1e-8
    assert big.sum() == 4
    assert np.allclose(np.abs(res.v[big]), 0.5, atol=1e-10)
    pairs = {(res.single_m[i], res.single_m[j]) for i, j in zip(*np.nonzero(big))}
    assert pairs == {(1, 2), (2, 1), (-1, -2), (-2, -1)}
    assert res.relative_error < 1e-10


def test_decomposition_rejects_defective_basis(optimum):
    _, singles, doubles = optimum
    bad = list(singles)
    bad[0] = type(bad[0])(**{**bad[0].__dict__, "near_defective": True})
    with pytest.raises(DefectiveBasisError):
        decompose_double_state(doubles[0], bad, 6)
