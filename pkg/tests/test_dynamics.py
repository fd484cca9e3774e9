import math

import numpy as np
import numpy.testing as npt
import pytest

from khep.dynamics import (ConservedSet, GroupElement, PhaseState, conserved,
                           dilate, hamiltonian, heis_norm, rotate,
                           sublaplacian_of_potential, vector_field)
from khep.errors import CollisionError

from conftest import random_bound_states

EIGHT_PI = 8.0 * math.pi


def fd_symplectic_gradient(state: PhaseState, delta=1e-5):
    """Finite-difference oracle for Hamilton's equations.

    xdot = dH/dp, pdot = -dH/dq via central differences of H.
    """
    s = state.as_array()

    def h_at(arr):
        return conserved(PhaseState.from_array(arr)).H

    grad = np.empty(6)
    for i in range(6):
        up, dn = s.copy(), s.copy()
        up[i] += delta
        dn[i] -= delta
        grad[i] = (h_at(up) - h_at(dn)) / (2 * delta)
    return np.concatenate([grad[3:], -grad[:3]])


class TestHamiltonian:
    def test_rest_state_at_unit_x(self):
        c = hamiltonian(PhaseState(1, 0, 0, 0, 0, 0))
        assert c.K == 0.0
        npt.assert_allclose(c.U, -1 / EIGHT_PI, rtol=1e-15)
        npt.assert_allclose(c.H, -1 / EIGHT_PI, rtol=1e-15)

    def test_rest_state_on_z_axis(self):
        c = hamiltonian(PhaseState(0, 0, 1, 0, 0, 0))
        npt.assert_allclose(c.U, -1 / (32 * math.pi), rtol=1e-15)

    def test_zero_energy_circular_momentum(self):
        py = 1 / (2 * math.sqrt(math.pi))
        c = hamiltonian(PhaseState(1, 0, 0, 0, py, 0))
        npt.assert_allclose(c.K, 1 / EIGHT_PI, rtol=1e-14)
        assert abs(c.H) < 1e-16

    def test_h_equals_k_plus_u(self):
        for s in random_bound_states(20):
            c = conserved(PhaseState.from_array(s))
            assert c.H == c.K + c.U
            assert c.K >= 0.0
            assert c.U < 0.0

    def test_singular_state_rejected(self):
        with pytest.raises(CollisionError):
            hamiltonian(PhaseState(0, 0, 0, 0, 0, 0))

    def test_conserved_has_no_singularity_guard(self):
        c = conserved(PhaseState(0, 0, 0, 0.1, 0.2, 0.3))
        assert c.U == -math.inf
        assert c.ptheta == 0.0


class TestConserved:
    def test_substitution_examples(self):
        c = conserved(PhaseState(1, 0, 0, 0, 0.2, 0.1))
        assert c.ptheta == 0.2
        assert c.J == 0.0
        c = conserved(PhaseState(0, 0, 1, 0, 0, 3))
        assert c.ptheta == 0.0
        assert c.J == 6.0

    def test_ptheta_rotation_invariant(self):
        rng = np.random.default_rng(1)
        for s in random_bound_states(10, seed=2):
            state = PhaseState.from_array(s)
            phi = rng.uniform(0, 2 * math.pi)
            assert abs(conserved(rotate(state, phi)).ptheta
                       - conserved(state).ptheta) < 1e-12


class TestVectorField:
    def test_z_axis_family(self):
        for pz in [0.0, 0.5, -2.0]:
            d = vector_field(PhaseState(0, 0, 1, 0, 0, pz))
            expect = np.array([0, 0, 0, 0, 0, -1 / (32 * math.pi)])
            npt.assert_allclose(d, expect, atol=1e-15)

    def test_zero_energy_seed_velocity(self):
        py = 1 / (2 * math.sqrt(math.pi))
        d = vector_field(PhaseState(1, 0, 0, 0, py, 0))
        assert d[0] == 0.0
        npt.assert_allclose(d[1], py, rtol=1e-15)

    def test_matches_finite_difference_gradient(self):
        for s in random_bound_states(25, seed=3):
            state = PhaseState.from_array(s)
            npt.assert_allclose(vector_field(state),
                                fd_symplectic_gradient(state), atol=1e-6)

    def test_singular_rejected(self):
        with pytest.raises(CollisionError):
            vector_field(PhaseState(0, 0, 0, 1, 1, 1))


class TestSymmetries:
    def test_dilate_example(self):
        out = dilate(PhaseState(1, 0, 0, 0, 0, 0), 2.0)
        assert out == PhaseState(2, 0, 0, 0, 0, 0)
        npt.assert_allclose(conserved(out).H, -1 / (32 * math.pi), rtol=1e-15)

    def test_dilate_identity(self):
        s = PhaseState(1.1, -0.2, 0.3, 0.05, -0.1, 0.2)
        assert dilate(s, 1.0) == s

    def test_energy_homogeneity(self):
        for s in random_bound_states(10, seed=4):
            state = PhaseState.from_array(s)
            h0 = conserved(state).H
            for lam in (0.5, 2.0, 10.0):
                h1 = conserved(dilate(state, lam)).H
                assert abs(h1 - h0 / lam ** 2) <= 1e-12 * (1 + abs(h0))

    def test_momenta_dilation_invariant(self):
        rng = np.random.default_rng(5)
        for s in random_bound_states(100, seed=6):
            state = PhaseState.from_array(s)
            lam = rng.uniform(0.2, 5.0)
            out = dilate(state, lam)
            assert abs(conserved(out).J - conserved(state).J) < 1e-12
            assert abs(conserved(out).ptheta - conserved(state).ptheta) < 1e-12

    def test_dilate_rejects_nonpositive(self):
        s = PhaseState(1, 0, 0, 0, 0, 0)
        for lam in (0.0, -2.0):
            with pytest.raises(ValueError):
                dilate(s, lam)

    def test_rotate_quarter_turn(self):
        out = rotate(PhaseState(1, 0, 0, 0, 1, 0), math.pi / 2)
        npt.assert_allclose(out.as_array(), [0, 1, 0, -1, 0, 0], atol=1e-16)

    def test_rotate_identity(self):
        s = PhaseState(1.1, -0.2, 0.3, 0.05, -0.1, 0.2)
        assert rotate(s, 0.0) == s

    def test_rotation_invariance_of_invariants(self):
        rng = np.random.default_rng(7)
        for s in random_bound_states(10, seed=8):
            state = PhaseState.from_array(s)
            phi = rng.uniform(-10, 10)
            a, b = conserved(state), conserved(rotate(state, phi))
            assert abs(a.H - b.H) < 1e-12
            assert abs(a.ptheta - b.ptheta) < 1e-12
            assert abs(a.J - b.J) < 1e-12

    def test_group_element_composition(self):
        g = GroupElement(2.0, 0.3).compose(GroupElement(0.5, -0.1))
        assert g.lam == 1.0
        npt.assert_allclose(g.phi, 0.2)
        with pytest.raises(ValueError):
            GroupElement(-1.0, 0.0)

    def test_group_element_apply_matches_maps(self):
        s = PhaseState(1.0, 0.2, -0.1, 0.0, 0.3, 0.1)
        g = GroupElement(1.7, 0.9)
        npt.assert_allclose(g.apply(s).as_array(),
                            dilate(rotate(s, 0.9), 1.7).as_array(), rtol=1e-15)


class TestHeisNorm:
    def test_examples(self):
        assert heis_norm(1, 0, 0) == 1.0
        npt.assert_allclose(heis_norm(0, 0, 1), 2.0, rtol=1e-15)

    def test_homogeneity(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            x, y, z = rng.uniform(-2, 2, size=3)
            npt.assert_allclose(heis_norm(2 * x, 2 * y, 4 * z),
                                2 * heis_norm(x, y, z), rtol=1e-14)


class TestSubLaplacian:
    @pytest.mark.parametrize("point", [(1, 0, 0), (0, 0, 1), (3, -2, 0.5)])
    def test_potential_is_harmonic(self, point):
        assert abs(sublaplacian_of_potential(*point)) <= 1e-5

    def test_singular_rejected(self):
        with pytest.raises(CollisionError):
            sublaplacian_of_potential(0, 0, 0)


class TestPhaseState:
    def test_validity(self):
        assert PhaseState(1, 0, 0, 0, 0, 0).is_valid()
        assert not PhaseState(math.nan, 0, 0, 0, 0, 0).is_valid()
        assert not PhaseState(math.inf, 0, 0, 0, 0, 0).is_valid()

    def test_singularity_threshold(self):
        assert PhaseState(0, 0, 0, 1, 1, 1).is_singular()
        assert not PhaseState(1, 0, 0, 0, 0, 0).is_singular()

    def test_array_round_trip(self):
        arr = np.array([0.1, -0.2, 0.3, -0.4, 0.5, -0.6])
        npt.assert_array_equal(PhaseState.from_array(arr).as_array(), arr)
        with pytest.raises(ValueError):
            PhaseState.from_array([1.0, 2.0])
