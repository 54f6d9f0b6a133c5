import itertools

import numpy as np
from hypothesis import given, settings, strategies as st

from catbench.ergotropy import ergotropy, passive_state, unitary_orbit_oracle
from catbench.qstate import DensityMatrix, HermitianOperator, energy, evolve, maximally_mixed
from catbench.sampling import haar_unitaries, random_density_matrix, random_hamiltonian, random_unitary

SZ = np.diag([1.0, -1.0])


def brute_force_passive_energy(rho, H):
    # minimum over all assignments of state eigenvalues to energy levels
    lam = np.linalg.eigvalsh(rho.data)
    h = np.linalg.eigvalsh(H.data)
    return min(float(np.dot(lam, np.array(p))) for p in itertools.permutations(h))


def test_ground_projector_is_passive():
    H = HermitianOperator(0.5 * SZ)
    rho = DensityMatrix(np.diag([0.0, 1.0]))
    dec = passive_state(rho, H)
    assert np.abs(dec.passive_state.data - rho.data).max() < 1e-15
    assert abs(dec.passive_energy + 0.5) < 1e-15
    assert ergotropy(rho, H) == 0.0


def test_two_level_closed_forms():
    for k in (0.0, 0.3, 1.0):
        for h_b in (0.5, 2.0):
            rho = DensityMatrix(np.diag([(1 + k) / 2, (1 - k) / 2]))
            H = HermitianOperator(h_b * SZ)
            assert abs(passive_state(rho, H).passive_energy + k * h_b) < 1e-14
            assert abs(ergotropy(rho, H) - 2 * k * h_b) < 1e-14


def test_named_examples():
    r = np.random.default_rng(0)
    assert ergotropy(maximally_mixed(2), random_hamiltonian(2, r)) < 1e-15
    assert abs(ergotropy(DensityMatrix(np.diag([1.0, 0.0])), HermitianOperator(1.5 * SZ)) - 3.0) < 1e-14


def test_passive_decomposition_invariants():
    r = np.random.default_rng(1)
    for d in (2, 3, 4, 5):
        rho, H = random_density_matrix(d, r), random_hamiltonian(d, r)
        dec = passive_state(rho, H)
        assert np.all(np.diff(dec.sorted_state_eigs) <= 0)
        assert np.all(np.diff(dec.sorted_energy_eigs) >= 0)
        p = dec.passive_state.data
        assert np.abs(p @ H.data - H.data @ p).max() < 1e-12
        assert abs(dec.passive_energy - energy(dec.passive_state, H)) < 1e-12
        assert abs(dec.passive_energy - brute_force_passive_energy(rho, H)) < 1e-12


def test_passive_energy_below_random_orbit():
    r = np.random.default_rng(2)
    rho, H = random_density_matrix(3, r), random_hamiltonian(3, r)
    us = haar_unitaries(3, 10_000, r)
    finals = np.einsum("nij,jk,nlk,li->n", us, rho.data, us.conj(), H.data).real
    assert passive_state(rho, H).passive_energy <= finals.min() + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(0, 10**6))
def test_ergotropy_nonnegative_and_unitary_invariant_passive_energy(d, seed):
    r = np.random.default_rng(seed)
    rho, H = random_density_matrix(d, r), random_hamiltonian(d, r)
    assert ergotropy(rho, H) >= 0
    moved = evolve(rho, random_unitary(d, r))
    assert abs(passive_state(moved, H).passive_energy - passive_state(rho, H).passive_energy) < 1e-10


def test_ergotropy_zero_on_passive_states():
    r = np.random.default_rng(3)
    for d in (2, 3, 4):
        H = random_hamiltonian(d, r)
        _, vecs = np.linalg.eigh(H.data)
        lam = np.sort(r.dirichlet(np.ones(d)))[::-1]
        rho = DensityMatrix((vecs * lam) @ vecs.conj().T)
        assert ergotropy(rho, H) < 1e-10


def test_degenerate_tie_break_does_not_change_energy():
    H = HermitianOperator(np.diag([0.0, 0.0, 1.0]))
    rho = DensityMatrix(np.diag([0.25, 0.25, 0.5]))
    dec = passive_state(rho, H)
    assert abs(dec.passive_energy - 0.25) < 1e-15
    again = passive_state(DensityMatrix(np.diag([0.5, 0.25, 0.25])), H)
    assert abs(again.passive_energy - dec.passive_energy) < 1e-15


def test_oracle_identity_and_determinism():
    r = np.random.default_rng(4)
    rho, H = random_density_matrix(2, r), random_hamiltonian(2, r)
    assert unitary_orbit_oracle(rho, H, 1, seed=0) == 0.0
    a = unitary_orbit_oracle(rho, H, 500, seed=3)
    b = unitary_orbit_oracle(rho, H, 500, seed=3)
    assert a == b


def test_oracle_below_closed_form_qutrits():
    r = np.random.default_rng(5)
    for i in range(100):
        rho, H = random_density_matrix(3, r), random_hamiltonian(3, r)
        assert unitary_orbit_oracle(rho, H, 200, seed=i) <= ergotropy(rho, H) + 1e-12


def test_oracle_close_for_qubits():
    r = np.random.default_rng(6)
    for i in range(10):
        rho, H = random_density_matrix(2, r), random_hamiltonian(2, r)
        gap = ergotropy(rho, H) - unitary_orbit_oracle(rho, H, 10_000, seed=i)
        assert -1e-12 <= gap <= 1e-3
