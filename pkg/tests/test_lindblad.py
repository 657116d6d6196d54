import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from qhopfield.errors import IntegrationError, SizeError
from qhopfield.lindblad import (
    PatternSet,
    SpinSystem,
    boltzmann_distribution,
    build_jump_operators,
    check_density,
    classical_glauber_evolve,
    density_violations,
    energy,
    evolve,
    glauber_rate_matrix,
    glauber_stationary,
    hamiltonian,
    hebb_couplings,
    lindblad_rhs,
    lindblad_rhs_dense,
    local_fields,
    maximally_mixed,
    overlap_expectation,
    pattern_state,
    rate_factors,
    site_operator,
    spin_table,
)


def _random_density(dim, rng):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def _random_system(n, rng, beta=1.5, omega=0.3):
    J = rng.normal(size=(n, n))
    J = J + J.T
    np.fill_diagonal(J, 0.0)
    return SpinSystem(n, J, beta, omega)


# ------------------------------------------------------------------ patterns

def test_pattern_set_layout():
    ps = PatternSet.from_rows([[1, -1, 1], [1, 1, -1]])
    assert (ps.n, ps.p) == (3, 2)
    np.testing.assert_array_equal(ps[1], [1, 1, -1])


@pytest.mark.parametrize("bad", [[[1, 0, 1]], [[2, 1]], []])
def test_pattern_set_rejects_bad_entries(bad):
    with pytest.raises(ValueError):
        PatternSet.from_rows(bad)


def test_pattern_set_size_limit():
    with pytest.raises(SizeError):
        PatternSet(np.ones((11, 1)))


def test_random_patterns_are_seeded():
    a = PatternSet.random(6, 3, np.random.default_rng(7))
    b = PatternSet.random(6, 3, np.random.default_rng(7))
    np.testing.assert_array_equal(a.entries, b.entries)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(2, 10), p=st.integers(1, 4), seed=st.integers(0, 2**32 - 1))
def test_hebb_couplings_invariants(n, p, seed):
    ps = PatternSet.random(n, p, np.random.default_rng(seed))
    raw = hebb_couplings(ps, spherical=False)
    np.testing.assert_array_equal(raw, np.where(np.eye(n, dtype=bool), 0, ps.entries @ ps.entries.T))
    J = hebb_couplings(ps)
    assert np.all(np.diag(J) == 0)
    live = np.any(raw != 0, axis=1)
    rows = (J * J).sum(axis=1)
    np.testing.assert_allclose(rows[live], n, rtol=1e-12)
    assert np.all(rows[~live] == 0)
    # rescaling keeps signs
    assert np.all(np.sign(J) == np.sign(raw))


def test_equal_row_norms_keep_symmetry():
    # a single pattern gives every row the same norm, N - 1
    ps = PatternSet(np.array([1, -1, -1, 1, 1]))
    J = hebb_couplings(ps)
    np.testing.assert_allclose(J, J.T, atol=1e-15)
    np.testing.assert_allclose(np.abs(J[~np.eye(5, dtype=bool)]), math.sqrt(5 / 4), rtol=1e-12)


def test_single_pattern_hebb_is_uniform():
    J = hebb_couplings(PatternSet(np.ones(4, dtype=int)))
    off = J[~np.eye(4, dtype=bool)]
    np.testing.assert_allclose(off, math.sqrt(4 / 3), rtol=1e-12)


# ----------------------------------------------------------------- operators

def test_spin_table_ordering():
    np.testing.assert_array_equal(spin_table(2), [[1, 1], [1, -1], [-1, 1], [-1, -1]])
    np.testing.assert_array_equal(np.diag(site_operator(2, 0, "z")).real, [1, 1, -1, -1])
    rho = pattern_state([1, -1])
    assert rho[1, 1] == 1.0 and abs(np.trace(rho) - 1) == 0


def test_energy_example():
    s = SpinSystem(2, [[0.0, 1.0], [1.0, 0.0]], beta=1.0)
    np.testing.assert_allclose(energy(s), [-1, 1, 1, -1] / np.sqrt(2), atol=1e-15)
    np.testing.assert_allclose(local_fields(s)[0], [1 / np.sqrt(2)] * 2, atol=1e-15)


def test_rate_factors():
    rng = np.random.default_rng(0)
    s = _random_system(3, rng)
    fp, fm = rate_factors(s)
    np.testing.assert_allclose(fp**2 + fm**2, 1.0, atol=1e-15)
    cold = SpinSystem(3, s.couplings, beta=math.inf)
    fp, fm = rate_factors(cold)
    assert set(np.unique(fp)) <= {0.0, math.sqrt(0.5), 1.0}


def test_system_validation():
    with pytest.raises(SizeError):
        SpinSystem(11, np.zeros((11, 11)), 1.0)
    with pytest.raises(ValueError):
        SpinSystem(2, np.eye(2), 1.0)
    with pytest.raises(ValueError):
        SpinSystem(2, np.zeros((3, 3)), 1.0)


def test_jump_operator_order():
    s = SpinSystem(2, [[0.0, 1.0], [1.0, 0.0]], beta=0.0)
    ops = build_jump_operators(s)
    assert len(ops) == 4
    np.testing.assert_allclose(ops[0], math.sqrt(0.5) * site_operator(2, 0, "+"), atol=1e-15)
    np.testing.assert_allclose(ops[3], math.sqrt(0.5) * site_operator(2, 1, "-"), atol=1e-15)


# ------------------------------------------------------------------ generator

@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 4), seed=st.integers(0, 2**32 - 1), beta=st.floats(0.0, 5.0),
       omega=st.floats(0.0, 1.0))
def test_structured_generator_matches_dense(n, seed, beta, omega):
    rng = np.random.default_rng(seed)
    s = _random_system(n, rng, beta, omega)
    rho = _random_density(s.dim, rng)
    d = lindblad_rhs(rho, s)
    ref = lindblad_rhs_dense(rho, s)
    assert np.max(np.abs(d - ref)) < 1e-12
    assert abs(np.trace(d)) < 1e-12
    assert np.max(np.abs(d - d.conj().T)) < 1e-12


def test_hamiltonian_is_transverse_field():
    s = SpinSystem(2, np.zeros((2, 2)), beta=1.0, omega=0.7)
    ref = 0.7 * (site_operator(2, 0, "x") + site_operator(2, 1, "x"))
    np.testing.assert_allclose(hamiltonian(s), ref, atol=1e-15)


def test_single_spin_infinite_temperature_decay():
    s = SpinSystem(1, np.zeros((1, 1)), beta=0.0)
    d = lindblad_rhs(pattern_state([1]), s)
    assert overlap_expectation(d, [1], "z") == pytest.approx(-1.0, abs=1e-15)


def test_single_spin_bloch_equations():
    # dz = -z + 2Ω y, dy = -2Ω z - y/2, dx = -x/2 at β = 0
    w, t = 0.4, 3.0
    s = SpinSystem(1, np.zeros((1, 1)), beta=0.0, omega=w)
    traj = evolve(pattern_state([1]), s, t, dt=1e-3)
    A = np.array([[-1.0, 2 * w], [-2 * w, -0.5]])
    z, y = expm(A * t) @ [1.0, 0.0]
    rho = traj.states[-1]
    assert abs(overlap_expectation(rho, [1], "z") - z) < 1e-10
    assert abs(overlap_expectation(rho, [1], "y") - y) < 1e-10
    assert abs(overlap_expectation(rho, [1], "x")) < 1e-12


def test_zero_omega_diagonal_follows_glauber():
    rng = np.random.default_rng(3)
    s = _random_system(4, rng, beta=2.0, omega=0.0)
    p0 = rng.random(s.dim)
    p0 /= p0.sum()
    q = evolve(np.diag(p0).astype(complex), s, 2.0, dt=1e-3, store_every=500)
    c = classical_glauber_evolve(p0, s, 2.0, dt=1e-3, store_every=500)
    for rho, p in zip(q.states, c.states):
        assert np.max(np.abs(np.real(np.diag(rho)) - p)) < 1e-12
        assert np.max(np.abs(rho - np.diag(np.diag(rho)))) == 0.0


@settings(max_examples=20, deadline=None)
@given(n=st.integers(1, 5), seed=st.integers(0, 2**32 - 1), beta=st.floats(0.0, 3.0))
def test_glauber_stationary_is_boltzmann(n, seed, beta):
    s = _random_system(n, np.random.default_rng(seed), beta, 0.0)
    p = glauber_stationary(s)
    assert 0.5 * np.abs(p - boltzmann_distribution(s)).sum() < 1e-9
    W = glauber_rate_matrix(s)
    np.testing.assert_allclose(W.sum(axis=0), 0.0, atol=1e-12)
    flux = W * p[None, :]
    np.testing.assert_allclose(flux, flux.T, atol=1e-12)


# ---------------------------------------------------------------- evolution

def test_evolve_keeps_a_valid_state():
    rng = np.random.default_rng(11)
    s = _random_system(3, rng, beta=1.0, omega=0.5)
    traj = evolve(_random_density(s.dim, rng), s, 1.0, dt=1e-3, store_every=100)
    assert len(traj) == 11 and traj.times[-1] == pytest.approx(1.0)
    for rho in traj.states:
        herm, tr, neg = density_violations(rho)
        assert herm < 1e-12 and tr < 1e-12 and neg < 1e-12


def test_invalid_initial_state_is_reported():
    s = SpinSystem(1, np.zeros((1, 1)), beta=1.0)
    with pytest.raises(IntegrationError):
        evolve(np.diag([1.5, -0.5]).astype(complex), s, 0.1)
    with pytest.raises(IntegrationError):
        check_density(np.eye(2, dtype=complex))


def test_overlaps_of_simple_states():
    xi = np.array([1, -1, 1])
    assert overlap_expectation(pattern_state(xi), xi, "z") == pytest.approx(1.0)
    assert overlap_expectation(pattern_state(xi), -xi, "z") == pytest.approx(-1.0)
    assert overlap_expectation(maximally_mixed(3), xi, "z") == pytest.approx(0.0)
    plus = np.full(8, 1 / np.sqrt(8))
    rho = np.outer(plus, plus).astype(complex)
    assert overlap_expectation(rho, [1, 1, 1], "x") == pytest.approx(1.0)
    assert overlap_expectation(rho, [1, 1, 1], "y") == pytest.approx(0.0, abs=1e-15)


def test_mixed_state_is_stationary_at_infinite_temperature():
    s = SpinSystem(3, np.zeros((3, 3)), beta=0.0, omega=0.8)
    assert np.max(np.abs(lindblad_rhs(maximally_mixed(3), s))) < 1e-15
