import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import openrabi.lindblad as lb
from openrabi.lindblad import (
    HALF_ROUND_TRIP,
    InvariantViolation,
    build_lindblad_generator,
    check_density_matrix,
    evolve,
    modemap_over_sweep,
    observables,
    project_initial_state_onto_eigenmodes,
    propagate,
    relax_to_steady_state,
    steady_state,
)
from openrabi.model import (
    ModelParams,
    Parity,
    basis_projector,
    build_closed_parity_hamiltonian,
    full_index,
    full_space_hamiltonian,
    number_parity_to_bare,
    sector_of_index,
)

from oracles import bare_evolve, bare_lindblad_superop, bare_operators, bare_state, random_density_matrix, random_hermitian

BENCHMARK = ModelParams(nu_q=0.8, kappa_c2=1 / 40)


def _rho_in_sector(rng, p, n_max):
    d = n_max + 1
    rho = np.zeros((2 * d, 2 * d), dtype=complex)
    sl = slice(0, d) if p == 1 else slice(d, 2 * d)
    rho[sl, sl] = random_density_matrix(rng, d)
    return rho


# --- generator -------------------------------------------------------------


def test_vacuum_is_stationary_at_g0():
    gen = build_lindblad_generator(BENCHMARK, 6)
    assert np.all(gen(basis_projector((0, 1), 6)) == 0)


def test_vacuum_is_driven_at_finite_g():
    gen = build_lindblad_generator(BENCHMARK.replace(g=0.3), 6)
    assert np.max(np.abs(gen(basis_projector((0, 1), 6)))) > 0.1


def test_two_photon_state_feeds_vacuum():
    n_max = 6
    out = build_lindblad_generator(BENCHMARK, n_max)(basis_projector((2, 1), n_max))
    k = BENCHMARK.kappa_c2
    assert out[0, 0] == pytest.approx(4 * k, abs=1e-15)
    assert out[2, 2] == pytest.approx(-4 * k, abs=1e-15)
    out[0, 0] = out[2, 2] = 0
    assert np.all(out == 0)


@given(st.floats(0, 2), st.floats(0, 0.2), st.integers(0, 2**31))
@settings(max_examples=40, deadline=None)
def test_generator_is_traceless_and_hermitian(g, kappa, seed):
    rng = np.random.default_rng(seed)
    gen = build_lindblad_generator(ModelParams(nu_q=0.8, g=g, kappa_c2=kappa), 5)
    out = gen(random_hermitian(rng, 12))
    assert abs(np.trace(out)) < 1e-11
    assert np.max(np.abs(out - out.conj().T)) == 0


def test_matrix_form_matches_direct_application():
    rng = np.random.default_rng(3)
    gen = build_lindblad_generator(BENCHMARK.replace(g=0.6), 4)
    mat = gen.matrix()
    for _ in range(5):
        x = rng.normal(size=(10, 10)) + 1j * rng.normal(size=(10, 10))
        np.testing.assert_allclose((mat @ x.ravel()).reshape(10, 10), gen.apply_unsymmetrised(x), atol=1e-12)
        h = x + x.conj().T
        np.testing.assert_allclose(gen(h), gen.apply_unsymmetrised(h), atol=1e-12)


def test_generator_never_couples_parity_sectors():
    gen = build_lindblad_generator(BENCHMARK.replace(g=1.1), 5)
    mat = gen.matrix()
    d = 12
    parity = np.where(np.arange(d) < 6, 1, -1)
    key = (parity[:, None] * 2 + parity[None, :]).ravel()
    assert np.all(mat[key[:, None] != key[None, :]] == 0)


def test_richardson_first_order_consistency():
    rng = np.random.default_rng(5)
    params = BENCHMARK.replace(g=0.4)
    rho0 = _rho_in_sector(rng, 1, 6)
    gen = build_lindblad_generator(params, 6)
    errors = []
    for dt in (1e-2, 5e-3, 2.5e-3):
        exact = evolve(rho0, params, 6, [0.0, dt], store=True, rtol=1e-13, atol=1e-15).states[-1]
        errors.append(np.max(np.abs(exact - (rho0 + dt * gen(rho0)))))
    ratios = np.array(errors[:-1]) / np.array(errors[1:])
    np.testing.assert_allclose(ratios, 4.0, rtol=0.05)


# --- observables -----------------------------------------------------------


def test_observables_table_states():
    assert observables(basis_projector((2, 1), 5)) == (2.0, 0.0, 1.0)
    assert observables(basis_projector((2, -1), 5)) == (2.0, 1.0, -1.0)


def test_observables_mixture():
    rho = 0.5 * (basis_projector((0, 1), 5) + basis_projector((1, -1), 5))
    photon, qubit, parity = observables(rho)
    assert (photon, parity) == (0.5, 0.0)
    # |0,+> = |0,g> and |1,-> = |1,g>
    assert qubit == 0.0


def test_observables_shape_check():
    with pytest.raises(ValueError):
        observables(np.eye(12) / 12, 4)


def test_observables_match_bare_basis_construction():
    """Photon and qubit excitation against a master equation written in |n, q>."""
    n_max = 8
    params = BENCHMARK.replace(g=0.35)
    superop = bare_lindblad_superop(1.0, 0.8, 0.35, params.kappa_c2, n_max)
    ops = bare_operators(n_max)
    psi = bare_state(2, "g", n_max)
    rho_bare0 = np.outer(psi, psi)
    for t in (0.7, 5.0, 40.0):
        ref = bare_evolve(rho_bare0, superop, t)
        ours = propagate(basis_projector("2,g", n_max), params, n_max, t)
        photon, qubit, _ = observables(ours, n_max)
        assert photon == pytest.approx(np.trace(ops["n"] @ ref).real, abs=1e-10)
        assert qubit == pytest.approx(np.trace(ops["excited"] @ ref).real, abs=1e-10)


# --- time evolution --------------------------------------------------------


def test_evolve_g0_two_photons_decay_monotonically():
    t = np.linspace(0, 400, 401)
    res = evolve(basis_projector("2,g", 9), BENCHMARK, 9, t)
    s = res.series
    assert s.photon[0] == 2.0
    assert np.all(np.diff(s.photon) <= 1e-12)
    assert s.photon[-1] < 1e-4
    assert res.home_sector == Parity.EVEN


def test_evolve_g0_three_photons_stop_at_one():
    t = np.linspace(0, 400, 201)
    s = evolve(basis_projector("3,g", 9), BENCHMARK, 9, t).series
    assert s.photon[-1] == pytest.approx(1.0, abs=1e-4)
    assert np.all(s.qubit < 1e-12)


@pytest.mark.parametrize("g", [0.2, 1.0])
def test_unitary_limit_conserves_purity_and_energy(g):
    params = ModelParams(nu_q=0.8, g=g)
    n_max = 9
    rng = np.random.default_rng(7)
    psi = np.zeros(20, dtype=complex)
    psi[:10] = rng.normal(size=10) + 1j * rng.normal(size=10)
    psi /= np.linalg.norm(psi)
    rho0 = np.outer(psi, psi.conj())
    res = evolve(rho0, params, n_max, np.linspace(0, 30, 61), store=True)
    h = full_space_hamiltonian(params, n_max)
    e0 = np.trace(h @ rho0).real
    for rho in res.states:
        assert abs(np.trace(rho @ rho).real - 1) < 1e-8
        assert abs(np.trace(h @ rho).real - e0) < 1e-8
    assert np.max(np.abs(res.series.trace - 1)) < 1e-8


@pytest.mark.parametrize("init", ["2,g", "3,g", "1,e"])
@pytest.mark.parametrize("g", [0.05, 0.5, 1.5])
def test_evolve_invariants(init, g):
    s = evolve(basis_projector(init, 9), BENCHMARK.replace(g=g), 9, np.linspace(0, 200, 101)).series
    assert np.max(np.abs(s.trace - 1)) < 1e-8
    assert np.max(s.hermiticity) < 1e-10
    assert np.min(s.min_eigenvalue) > -1e-8
    assert np.max(s.leakage) < 1e-12
    assert np.all(s.qubit >= -1e-8) and np.all(s.qubit <= 1 + 1e-8)
    assert np.all(s.photon >= -1e-8)


def test_time_units():
    s = evolve(basis_projector("2,g", 4), BENCHMARK, 4, np.array([0.0, HALF_ROUND_TRIP, 2 * HALF_ROUND_TRIP])).series
    np.testing.assert_allclose(s.t_half_round_trip, [0, 1, 2])


def test_evolve_rejects_bad_initial_state():
    with pytest.raises(ValueError):
        evolve(2 * basis_projector("2,g", 4), BENCHMARK, 4, [0, 1])
    with pytest.raises(ValueError):
        evolve(basis_projector("2,g", 4), BENCHMARK, 5, [0, 1])
    with pytest.raises(ValueError):
        evolve(basis_projector("2,g", 4), BENCHMARK, 4, [1, 0])


def test_invariant_abort(monkeypatch):
    monkeypatch.setattr(lb, "TRACE_TOL", 1e-30)
    with pytest.raises(InvariantViolation):
        evolve(basis_projector("2,g", 4), BENCHMARK.replace(g=0.5), 4, np.linspace(0, 50, 11))


def test_check_density_matrix_leakage():
    rho = 0.5 * (basis_projector((1, 1), 4) + basis_projector((1, -1), 4))
    diag = check_density_matrix(rho, Parity.EVEN, 4)
    assert diag.leakage == pytest.approx(0.5)
    assert diag.trace_error < 1e-15


# --- steady states ---------------------------------------------------------


def test_steady_g0_even_sector_is_vacuum():
    ss = steady_state(BENCHMARK, 9, basis_projector("2,g", 9))
    np.testing.assert_allclose(ss.rho, basis_projector((0, 1), 9), atol=1e-9)
    assert ss.observables[0] < 1e-6


def test_steady_g0_odd_sector_keeps_one_photon():
    ss = steady_state(BENCHMARK, 9, basis_projector("3,g", 9))
    np.testing.assert_allclose(ss.rho, basis_projector((1, -1), 9), atol=1e-9)
    assert ss.observables[0] == pytest.approx(1.0, abs=1e-6)


def test_steady_g0_reports_degenerate_null_space():
    ss = steady_state(BENCHMARK, 9)
    assert ss.rho is None
    assert ss.null_dimension((Parity.EVEN, Parity.EVEN)) == 2
    assert ss.null_dimension((Parity.ODD, Parity.ODD)) == 2


def test_steady_unique_at_finite_g():
    ss = steady_state(BENCHMARK.replace(g=0.3), 9, sectors=[(1, 1)])
    assert ss.rho is not None
    assert ss.null_dimension((Parity.EVEN, Parity.EVEN)) == 1
    assert abs(np.trace(ss.rho) - 1) < 1e-10
    assert ss.residual < 1e-9


@pytest.mark.parametrize("init", ["2,g", "3,g"])
@pytest.mark.parametrize("g", [0.0, 0.05, 0.4, 1.0])
def test_steady_state_agrees_with_long_time_relaxation(init, g):
    params = BENCHMARK.replace(g=g)
    rho0 = basis_projector(init, 9)
    ss = steady_state(params, 9, rho0)
    assert ss.residual < 1e-9
    relaxed, _ = relax_to_steady_state(rho0, params, 9)
    np.testing.assert_allclose(observables(relaxed), ss.observables, atol=1e-6)


def test_steady_state_is_monotone_at_weak_coupling():
    g = np.linspace(0, 0.2, 21)
    rho0 = basis_projector("2,g", 9)
    total = [sum(steady_state(BENCHMARK.replace(g=x), 9, rho0).observables[:2]) for x in g]
    assert np.all(np.diff(total) > 0)


def test_finite_time_populations_peak_near_kappa():
    g = np.linspace(0, 0.2, 21)
    rho0 = basis_projector("2,g", 9)
    t = 10 / BENCHMARK.kappa_c2
    total = np.array([sum(observables(propagate(rho0, BENCHMARK.replace(g=x), 9, t))[:2]) for x in g])
    k = int(np.argmax(total[:10]))
    assert 0.5 * BENCHMARK.kappa_c2 <= g[k] <= 2 * BENCHMARK.kappa_c2
    assert total[k] > 2 * total[6]


# --- eigenmode weights -----------------------------------------------------


def test_weights_g0_one_hot():
    w = project_initial_state_onto_eigenmodes(2, BENCHMARK, 1, 9)
    expected = np.zeros(10)
    expected[2] = 1
    np.testing.assert_allclose(w.weights, expected, atol=1e-15)


@pytest.mark.parametrize("g", [0.3, 1.2])
def test_weights_hermitian_limit(g):
    params = ModelParams(nu_q=0.8, g=g)
    w = project_initial_state_onto_eigenmodes(3, params, -1, 12)
    _, v = np.linalg.eigh(build_closed_parity_hamiltonian(params, -1, 12))
    np.testing.assert_allclose(w.weights, np.abs(v[3, :]) ** 2, atol=1e-10)


@given(st.floats(0, 2), st.integers(0, 9))
@settings(max_examples=30, deadline=None)
def test_weights_normalised(g, m):
    w = project_initial_state_onto_eigenmodes(m, BENCHMARK.replace(g=g), 1, 9)
    assert w.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(w.weights >= 0)


def test_weights_shared_between_neighbouring_modes():
    mm = modemap_over_sweep(2, 1, BENCHMARK, np.linspace(0, 0.6, 61), 9)
    for i in (10, 20, 30):
        top = np.argsort(mm.weights[:, i])[::-1][:2]
        assert set(top) == {1, 2}
        assert mm.weights[1, i] + mm.weights[2, i] > 0.75


def test_modemap_matches_rank_labelled_projection_without_crossings():
    g = np.linspace(0, 0.3, 31)
    mm = modemap_over_sweep(2, 1, BENCHMARK, g, 9)
    direct = project_initial_state_onto_eigenmodes(2, BENCHMARK.replace(g=0.3), 1, 9)
    np.testing.assert_allclose(mm.weights[:4, -1], direct.weights[:4], atol=1e-10)
