"""Tests for the Fock basis and Bose-Hubbard Hamiltonian.

Ground-state checks use independent oracles: brute-force enumeration for
basis counts, and the closed-form condensate wavefunction (a multinomial
over the lowest single-particle orbital) for the non-interacting chain.
"""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scatterloc.lattice import (
    Boundary,
    CapacityError,
    EigensolverError,
    FockBasis,
    HubbardParams,
    LatticeSpec,
    ManyBodyState,
    build_hamiltonian,
    enumerate_basis,
    fock_dimension,
    fock_state,
    ground_state,
    overlap,
)


def brute_force_occupations(M, N):
    """All occupation tuples by exhaustive search, independent of the library."""
    return [occ for occ in itertools.product(range(N + 1), repeat=M)
            if sum(occ) == N]


class TestBasis:
    def test_dimension_against_brute_force(self):
        for M, N in [(1, 5), (2, 3), (3, 3), (4, 2), (5, 5)]:
            assert fock_dimension(M, N) == len(brute_force_occupations(M, N))

    def test_dimension_known_values(self):
        assert fock_dimension(3, 3) == 10
        assert fock_dimension(1, 5) == 1
        assert fock_dimension(5, 5) == 126

    def test_states_are_descending_lex(self):
        basis = enumerate_basis(LatticeSpec(M=3, N=3))
        assert basis.states[0] == (3, 0, 0)
        assert basis.states[-1] == (0, 0, 3)
        for a, b in zip(basis.states, basis.states[1:]):
            assert a > b

    def test_states_match_brute_force_set(self):
        spec = LatticeSpec(M=4, N=3)
        basis = enumerate_basis(spec)
        assert set(basis.states) == set(brute_force_occupations(4, 3))
        assert len(basis) == fock_dimension(4, 3)

    def test_index_round_trip(self):
        basis = enumerate_basis(LatticeSpec(M=3, N=3))
        for i, occ in enumerate(basis.states):
            assert basis.index_of(occ) == i
        with pytest.raises(ValueError):
            basis.index_of((3, 1, 0))  # wrong particle number

    def test_occupations_array_is_readonly(self):
        basis = enumerate_basis(LatticeSpec(M=3, N=2))
        assert basis.occupations.shape == (6, 3)
        with pytest.raises(ValueError):
            basis.occupations[0, 0] = 7

    def test_capacity_guard(self):
        with pytest.raises(CapacityError):
            enumerate_basis(LatticeSpec(M=3, N=3), max_dim=9)
        # exactly at the limit is fine
        enumerate_basis(LatticeSpec(M=3, N=3), max_dim=10)

    @settings(max_examples=30, deadline=None)
    @given(M=st.integers(1, 5), N=st.integers(1, 5))
    def test_enumeration_matches_brute_force(self, M, N):
        basis = enumerate_basis(LatticeSpec(M=M, N=N))
        expected = sorted(brute_force_occupations(M, N), reverse=True)
        assert basis.states == expected


class TestLatticeSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            LatticeSpec(M=0, N=1)
        with pytest.raises(ValueError):
            LatticeSpec(M=2, N=0)
        with pytest.raises(ValueError):
            LatticeSpec(M=2, N=2, boundary=Boundary.PERIODIC)
        with pytest.raises(ValueError):
            LatticeSpec(M=2, N=2, a=0.0)

    def test_bonds(self):
        assert LatticeSpec(M=4, N=1).bonds == ((0, 1), (1, 2), (2, 3))
        assert LatticeSpec(M=1, N=2).bonds == ()
        periodic = LatticeSpec(M=4, N=1, boundary=Boundary.PERIODIC)
        assert periodic.bonds == ((0, 1), (1, 2), (2, 3), (3, 0))


class TestHamiltonian:
    def test_two_site_single_particle(self):
        basis = enumerate_basis(LatticeSpec(M=2, N=1))
        H = build_hamiltonian(basis, HubbardParams(J=1.0, U=0.0))
        np.testing.assert_array_equal(H, [[0.0, -1.0], [-1.0, 0.0]])

    def test_interaction_diagonal(self):
        basis = enumerate_basis(LatticeSpec(M=3, N=3))
        H = build_hamiltonian(basis, HubbardParams(J=0.0, U=1.0))
        assert np.count_nonzero(H - np.diag(np.diag(H))) == 0
        assert H[basis.index_of((3, 0, 0)), basis.index_of((3, 0, 0))] == 3.0
        assert H[basis.index_of((2, 1, 0)), basis.index_of((2, 1, 0))] == 1.0
        assert H[basis.index_of((1, 1, 1)), basis.index_of((1, 1, 1))] == 0.0

    def test_single_particle_chain_spectrum(self):
        # open tridiagonal hopping matrix: eigenvalues -2J cos(k pi / (M+1))
        basis = enumerate_basis(LatticeSpec(M=3, N=1))
        H = build_hamiltonian(basis, HubbardParams(J=1.0, U=0.0))
        evals = np.linalg.eigvalsh(H)
        expected = sorted(-2.0 * math.cos(k * math.pi / 4) for k in (1, 2, 3))
        np.testing.assert_allclose(evals, expected, atol=1e-12)

    def test_hop_amplitude_bose_factor(self):
        basis = enumerate_basis(LatticeSpec(M=2, N=3))
        H = build_hamiltonian(basis, HubbardParams(J=1.0, U=0.0))
        i = basis.index_of((2, 1))
        j = basis.index_of((1, 2))
        # b_2^dag b_1 on |2,1>: sqrt(2) * sqrt(2) = 2
        assert H[j, i] == pytest.approx(-2.0, abs=1e-15)

    def test_exact_symmetry(self):
        for M, N, bc in [(3, 3, Boundary.OPEN), (4, 2, Boundary.PERIODIC),
                         (2, 4, Boundary.OPEN)]:
            basis = enumerate_basis(LatticeSpec(M=M, N=N, boundary=bc))
            H = build_hamiltonian(basis, HubbardParams(J=0.7, U=1.3))
            assert np.array_equal(H, H.T)

    def test_offdiagonals_are_single_neighbour_hops(self):
        spec = LatticeSpec(M=3, N=2)
        basis = enumerate_basis(spec)
        H = build_hamiltonian(basis, HubbardParams(J=1.0, U=0.0))
        bonds = set(spec.bonds)
        occs = basis.occupations
        for i in range(len(basis)):
            for j in range(len(basis)):
                if i == j or H[i, j] == 0.0:
                    continue
                diff = occs[i] - occs[j]
                moved = np.nonzero(diff)[0]
                assert len(moved) == 2
                s, t = int(moved[0]), int(moved[1])
                assert abs(diff[s]) == 1 and abs(diff[t]) == 1
                assert (s, t) in bonds or (t, s) in bonds


class TestGroundState:
    def test_hard_core_limit_is_unit_filling(self):
        # with J = 0 the Hamiltonian is diagonal and the unique minimum
        # is one atom per site
        basis = enumerate_basis(LatticeSpec(M=3, N=3))
        H = build_hamiltonian(basis, HubbardParams(J=0.0, U=1.0))
        energy, state = ground_state(H, basis)
        assert energy == 0.0
        expected = np.zeros(10)
        expected[basis.index_of((1, 1, 1))] = 1.0
        np.testing.assert_allclose(np.abs(state.coeffs), expected, atol=1e-14)

    def test_free_bosons_energy(self):
        basis = enumerate_basis(LatticeSpec(M=3, N=3))
        H = build_hamiltonian(basis, HubbardParams(J=1.0, U=0.0))
        energy, _ = ground_state(H, basis)
        assert energy == pytest.approx(-3.0 * math.sqrt(2.0), abs=1e-12)

    def test_free_bosons_condensate_coefficients(self):
        # U = 0: all atoms condense into the lowest orbital of the open
        # 3-site chain, v = (1/2, 1/sqrt(2), 1/2); the number-basis
        # coefficients are multinomial amplitudes in that orbital
        basis = enumerate_basis(LatticeSpec(M=3, N=3))
        H = build_hamiltonian(basis, HubbardParams(J=1.0, U=0.0))
        _, state = ground_state(H, basis)

        v = np.array([0.5, 1.0 / math.sqrt(2.0), 0.5])
        for i, occ in enumerate(basis.states):
            amp = math.sqrt(math.factorial(3) / np.prod(
                [math.factorial(n) for n in occ]))
            expected = amp * np.prod(v ** np.array(occ))
            assert abs(state.coeffs[i] - expected) < 1e-8, occ

    def test_phase_convention(self):
        basis = enumerate_basis(LatticeSpec(M=4, N=2))
        H = build_hamiltonian(basis, HubbardParams(J=1.0, U=2.0))
        _, state = ground_state(H, basis)
        k = int(np.argmax(np.abs(state.coeffs)))
        assert state.coeffs[k].real > 0
        assert state.coeffs[k].imag == 0.0
        assert state.norm_sq() == pytest.approx(1.0, abs=1e-12)

    def test_rejects_bad_input(self):
        basis = enumerate_basis(LatticeSpec(M=2, N=1))
        with pytest.raises(ValueError):
            ground_state(np.zeros((3, 3)), basis)
        bad = np.full((2, 2), np.nan)
        with pytest.raises(EigensolverError):
            ground_state(bad, basis)


class TestStatesAndOverlap:
    def test_normalization(self):
        basis = enumerate_basis(LatticeSpec(M=2, N=2))
        state = ManyBodyState.from_coefficients(basis, [3.0, 4.0, 0.0])
        assert state.norm_sq() == pytest.approx(1.0, abs=1e-15)
        np.testing.assert_allclose(state.probabilities, [0.36, 0.64, 0.0])
        with pytest.raises(ValueError):
            ManyBodyState.from_coefficients(basis, [0.0, 0.0, 0.0])
        with pytest.raises(ValueError):
            ManyBodyState.from_coefficients(basis, [1.0, 2.0])

    def test_coefficients_are_readonly(self):
        basis = enumerate_basis(LatticeSpec(M=2, N=2))
        state = fock_state(basis, (1, 1))
        with pytest.raises(ValueError):
            state.coeffs[0] = 1.0

    def test_fock_states_orthonormal(self):
        basis = enumerate_basis(LatticeSpec(M=2, N=2))
        states = [fock_state(basis, occ) for occ in basis.states]
        for i, si in enumerate(states):
            for j, sj in enumerate(states):
                assert overlap(si, sj) == (1.0 if i == j else 0.0)

    def test_overlap_conjugates_first_argument(self):
        basis = enumerate_basis(LatticeSpec(M=2, N=1))
        s1 = ManyBodyState.from_coefficients(basis, [1.0, 1.0j])
        s2 = fock_state(basis, (0, 1))
        r = 1.0 / math.sqrt(2.0)
        assert overlap(s1, s2) == pytest.approx(-1.0j * r)
        assert overlap(s2, s1) == pytest.approx(1.0j * r)

    def test_overlap_basis_mismatch(self):
        b1 = enumerate_basis(LatticeSpec(M=2, N=1))
        b2 = enumerate_basis(LatticeSpec(M=3, N=1))
        with pytest.raises(ValueError):
            overlap(fock_state(b1, (1, 0)), fock_state(b2, (1, 0, 0)))
