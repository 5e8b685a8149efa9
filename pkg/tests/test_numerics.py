import numpy as np
import pytest
import scipy.linalg

from spinforge.numerics import (
    InfeasibleConstraints,
    LinearConstraintSet,
    SymTridiag,
    antisym_exp,
    constrained_direction,
    eig_sym_tridiag,
    propagator,
    solve_affine,
)


def random_tridiag(rng, n):
    return SymTridiag(rng.uniform(-2, 2, n), rng.uniform(-2, 2, n - 1))


class TestSymTridiag:
    def test_band_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            SymTridiag(np.zeros(3), np.zeros(3))

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            SymTridiag(np.array([0.0, np.nan]), np.array([1.0]))

    def test_to_dense_roundtrip(self):
        m = SymTridiag([1.0, 2.0, 3.0], [4.0, 5.0])
        dense = m.to_dense()
        assert np.array_equal(dense, dense.T)
        assert dense[0, 1] == 4.0 and dense[2, 2] == 3.0


class TestEig:
    def test_two_by_two(self):
        s, v = eig_sym_tridiag(SymTridiag([0.0, 0.0], [1.0]))
        assert np.allclose(s.values, [-1.0, 1.0], atol=1e-12)
        assert np.abs(v.T @ v - np.eye(2)).max() < 1e-12

    def test_four_site_transfer_band(self):
        # independent oracle: dense symmetric eigensolve of the same matrix
        m = SymTridiag(np.zeros(4), [np.sqrt(3), 2.0, np.sqrt(3)])
        s, _ = eig_sym_tridiag(m)
        dense = np.linalg.eigvalsh(m.to_dense())
        assert np.abs(s.values - dense).max() < 1e-10
        assert np.allclose(s.values, [-3.0, -1.0, 1.0, 3.0], atol=1e-9)

    def test_single_site(self):
        s, v = eig_sym_tridiag(SymTridiag([5.0], []))
        assert s.values.tolist() == [5.0]
        assert v.shape == (1, 1)

    @pytest.mark.parametrize("seed,n", [(0, 3), (1, 17), (2, 64), (3, 128)])
    def test_reconstruction_and_orthonormality(self, seed, n):
        rng = np.random.default_rng(seed)
        m = random_tridiag(rng, n)
        s, v = eig_sym_tridiag(m)
        rebuilt = (v * s.values) @ v.T
        assert np.abs(rebuilt - m.to_dense()).max() < 1e-10
        assert np.abs(v.T @ v - np.eye(n)).max() < 1e-10

    def test_degenerate_cluster_stays_orthonormal(self):
        # a zero coupling splits the chain into two identical blocks, so every
        # eigenvalue is exactly twofold degenerate
        m = SymTridiag([0.0, 1.0, 0.0, 1.0], [1.0, 0.0, 1.0])
        s, v = eig_sym_tridiag(m)
        assert np.abs(v.T @ v - np.eye(4)).max() < 1e-10
        rebuilt = (v * s.values) @ v.T
        assert np.abs(rebuilt - m.to_dense()).max() < 1e-10


class TestPropagator:
    def test_zero_time_is_identity(self):
        h = np.array([[1.0, 2.0], [2.0, -1.0]])
        assert np.abs(propagator(h, 0.0).u - np.eye(2)).max() < 1e-14

    def test_two_site_transfer(self):
        h = SymTridiag([0.0, 0.0], [1.0]).to_dense()
        u = propagator(h, np.pi / 2).u
        out = u @ np.array([1.0, 0.0])
        assert np.abs(out - np.array([0.0, -1.0j])).max() < 1e-12

    def test_pi_phase(self):
        u = propagator(np.diag([1.0, -1.0]), np.pi).u
        assert np.abs(u + np.eye(2)).max() < 1e-12

    def test_non_hermitian_rejected(self):
        with pytest.raises(ValueError):
            propagator(np.array([[0.0, 1.0], [0.0, 0.0]]), 1.0)

    @pytest.mark.parametrize("seed", range(3))
    def test_unitarity(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(9, 9)) + 1j * rng.normal(size=(9, 9))
        h = a + a.conj().T
        u = propagator(h, rng.uniform(0.1, 5.0)).u
        assert np.abs(u.conj().T @ u - np.eye(9)).max() < 1e-10


class TestAntisymExp:
    def test_zero_gives_identity(self):
        assert np.abs(antisym_exp(np.zeros((4, 4))) - np.eye(4)).max() < 1e-14

    @pytest.mark.parametrize("theta", [0.3, -1.2, np.pi / 5])
    def test_planar_rotation(self, theta):
        g = np.array([[0.0, theta], [-theta, 0.0]])
        expected = np.array(
            [[np.cos(theta), np.sin(theta)], [-np.sin(theta), np.cos(theta)]]
        )
        assert np.abs(antisym_exp(g) - expected).max() < 1e-12

    @pytest.mark.parametrize("seed", range(4))
    def test_inverse_orthogonal_and_special(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.uniform(-1, 1, (7, 7))
        g = a - a.T
        r = antisym_exp(g)
        assert np.abs(r @ antisym_exp(-g) - np.eye(7)).max() < 1e-10
        assert np.abs(r.T @ r - np.eye(7)).max() < 1e-10
        assert abs(np.linalg.det(r) - 1.0) < 1e-10
        assert np.abs(r - scipy.linalg.expm(g)).max() < 1e-10

    def test_not_antisymmetric_rejected(self):
        with pytest.raises(ValueError):
            antisym_exp(np.array([[0.0, 1.0], [1.0, 0.0]]))


class TestConstrainedDirection:
    def test_unconstrained_steepest_descent(self):
        cs = LinearConstraintSet(np.zeros((0, 3)), np.zeros(0))
        g = np.array([3.0, 0.0, 4.0])
        res = constrained_direction(cs, g, delta=0.5)
        assert not res.stationary
        assert np.abs(res.direction + 0.5 * g / 5.0).max() < 1e-12

    def test_orthogonal_objective_is_stationary(self):
        cs = LinearConstraintSet(np.array([[1.0, 0.0]]), np.zeros(1))
        res = constrained_direction(cs, np.array([1.0, 0.0]), delta=0.1)
        assert res.stationary
        assert np.linalg.norm(res.direction) == 0.0

    def test_inhomogeneous_rows_rejected(self):
        cs = LinearConstraintSet(np.array([[1.0, 0.0]]), np.array([1.0]))
        with pytest.raises(ValueError):
            constrained_direction(cs, np.array([1.0, 0.0]), delta=0.1)

    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("mode", ["two_norm", "inf_norm"])
    def test_constraints_and_descent(self, seed, mode):
        rng = np.random.default_rng(seed)
        n, r = 12, 5
        cs = LinearConstraintSet(rng.normal(size=(r, n)), np.zeros(r))
        g = rng.normal(size=n)
        res = constrained_direction(cs, g, delta=0.3, norm_mode=mode)
        assert not res.stationary
        assert np.abs(cs.rows @ res.direction).max() < 1e-10
        assert g @ res.direction < 0
        if mode == "two_norm":
            assert np.linalg.norm(res.direction) <= 0.3 + 1e-12
        else:
            assert np.abs(res.direction).max() <= 0.3 + 1e-12

    def test_frobenius_scaling(self):
        cs = LinearConstraintSet(np.zeros((0, 4)), np.zeros(0))
        g = np.ones(4)
        res = constrained_direction(cs, g, delta=1.0, param_norm_scale=np.sqrt(2))
        assert abs(np.sqrt(2) * np.linalg.norm(res.direction) - 1.0) < 1e-12

    def test_fully_constrained_space_is_stationary(self):
        cs = LinearConstraintSet(np.eye(3), np.zeros(3))
        res = constrained_direction(cs, np.ones(3), delta=1.0)
        assert res.stationary
        assert res.constraint_rank == 3


class TestSolveAffine:
    def test_consistent_redundant_system(self):
        rows = np.array([[1.0, 0.0], [2.0, 0.0]])
        sol, rank = solve_affine(LinearConstraintSet(rows, np.array([1.0, 2.0])))
        assert rank == 1
        assert np.abs(sol - [1.0, 0.0]).max() < 1e-12

    def test_inconsistent_system_raises(self):
        rows = np.array([[1.0, 0.0], [1.0, 0.0]])
        with pytest.raises(InfeasibleConstraints) as err:
            solve_affine(LinearConstraintSet(rows, np.array([0.0, 1.0])))
        assert err.value.rank == 1
