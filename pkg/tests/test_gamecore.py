import numpy as np
import pytest

from nohd import gamecore
from nohd.deriv import fd_check
from nohd.errors import DimensionError, NotAFixedPointError
from nohd.gamecore import (Decomposition, FixedPointKind, GameEval, ParamVector,
                           classify_fixed_point, decompose, evaluate)
from nohd.games import make_analytic, matching_pennies, random_game


def eval_from_jacobian(jac, xi=None):
    jac = np.asarray(jac, dtype=float)
    n = jac.shape[0]
    xi = np.zeros(n) if xi is None else np.asarray(xi, dtype=float)
    return GameEval(np.zeros(n), (n,), np.zeros(1), np.zeros((1, n)), xi, jac)


def dec_with_S(s, xi=(0.0, 0.0)):
    s = np.asarray(s, dtype=float)
    return Decomposition(s, np.zeros_like(s), 0.5 * float(np.dot(xi, xi)), np.zeros(len(xi)))


def fd_jacobian(game, theta, h=1e-5):
    """Central differences of the simultaneous gradient."""
    n = theta.size
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        cols.append((gamecore.sim_grad(game, theta + e) - gamecore.sim_grad(game, theta - e)) / (2 * h))
    return np.stack(cols, axis=1)


class TestEvaluate:
    def test_bilinear(self):
        ev = evaluate(make_analytic("bilinear"), [1.0, 1.0])
        np.testing.assert_allclose(ev.sim_grad, [1.0, -1.0])
        np.testing.assert_allclose(ev.jacobian, [[0.0, 1.0], [-1.0, 0.0]])
        np.testing.assert_allclose(ev.values, [1.0, -1.0])

    def test_potential(self):
        ev = evaluate(make_analytic("quadratic_potential"), [1.0, 2.0])
        np.testing.assert_allclose(ev.sim_grad, [1.0, 2.0])
        np.testing.assert_allclose(ev.jacobian, np.eye(2))

    def test_boltzmann_mp_uniform_is_stationary(self):
        ev = evaluate(matching_pennies(), np.zeros(4))
        np.testing.assert_allclose(ev.sim_grad, 0.0, atol=1e-15)

    def test_full_gradient_table(self):
        ev = evaluate(make_analytic("bilinear"), [2.0, 3.0])
        # V1 = t1 t2, V2 = -t1 t2
        np.testing.assert_allclose(ev.full_grads, [[3.0, 2.0], [-3.0, -2.0]])

    def test_jacobian_against_fd(self):
        rng = np.random.default_rng(42)
        games = [matching_pennies(), random_game(6, seed=1),
                 make_analytic("perturbed_hamiltonian")]
        for _ in range(100):
            game = games[rng.integers(len(games))]
            theta = rng.normal(size=sum(game.block_sizes))
            np.testing.assert_allclose(evaluate(game, theta).jacobian, fd_jacobian(game, theta),
                                       atol=1e-7)

    def test_param_vector_input(self):
        game = random_game(4, seed=0)
        pv = ParamVector.from_blocks([[0.1, 0.2], [0.3, 0.4]])
        np.testing.assert_array_equal(evaluate(game, pv).jacobian,
                                      evaluate(game, pv.flat).jacobian)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            evaluate(make_analytic("bilinear"), [1.0, 2.0, 3.0])
        with pytest.raises(DimensionError):
            evaluate(random_game(4, seed=0), ParamVector(np.zeros(4), (1, 3)))


class TestDecompose:
    @pytest.mark.parametrize("jac, s, a", [
        ([[0, 1], [-1, 0]], [[0, 0], [0, 0]], [[0, 1], [-1, 0]]),
        (np.eye(2), np.eye(2), np.zeros((2, 2))),
        ([[1, 2], [0, 1]], [[1, 1], [1, 1]], [[0, 1], [-1, 0]]),
    ])
    def test_examples(self, jac, s, a):
        dec = decompose(eval_from_jacobian(jac))
        np.testing.assert_array_equal(dec.S, s)
        np.testing.assert_array_equal(dec.A, a)

    def test_identities_random(self):
        rng = np.random.default_rng(0)
        for n in (1, 2, 5, 9):
            jac = rng.normal(size=(n, n))
            xi = rng.normal(size=n)
            dec = decompose(eval_from_jacobian(jac, xi))
            np.testing.assert_allclose(dec.S + dec.A, jac, atol=1e-15)
            np.testing.assert_array_equal(dec.S, dec.S.T)
            np.testing.assert_array_equal(dec.A, -dec.A.T)
            np.testing.assert_allclose(dec.ham_grad, (dec.S + dec.A.T) @ xi, atol=1e-13)
            assert dec.xi_norm == pytest.approx(np.linalg.norm(xi))

    def test_ham_grad_against_fd(self):
        rng = np.random.default_rng(7)
        game = random_game(6, seed=3)

        def ham(theta):
            xi = gamecore.sim_grad(game, theta)
            return 0.5 * xi @ xi

        for _ in range(5):
            theta = rng.normal(size=6)
            dec = decompose(evaluate(game, theta))
            fd_grad, _ = fd_check(ham, theta, 1e-5)
            np.testing.assert_allclose(dec.ham_grad, fd_grad, atol=1e-7)

    def test_non_square(self):
        with pytest.raises(DimensionError):
            decompose(GameEval(np.zeros(2), (2,), np.zeros(1), np.zeros((1, 2)), np.zeros(2),
                               np.zeros((2, 3))))


class TestClassify:
    @pytest.mark.parametrize("s, kind", [
        (np.eye(2), FixedPointKind.SYMMETRIC_STABLE),
        (-np.eye(2), FixedPointKind.SYMMETRIC_UNSTABLE),
        (np.diag([1.0, -1.0]), FixedPointKind.STRICT_SADDLE),
        (np.diag([1.0, 0.0]), FixedPointKind.INDETERMINATE),
    ])
    def test_examples(self, s, kind):
        assert classify_fixed_point(dec_with_S(s)).kind is kind

    def test_antisymmetric_part_ignored(self):
        dec = Decomposition(np.eye(2), np.array([[0.0, 5.0], [-5.0, 0.0]]), 0.0, np.zeros(2))
        assert classify_fixed_point(dec).kind is FixedPointKind.SYMMETRIC_STABLE

    def test_eigen_summary_sorted(self):
        fp = classify_fixed_point(dec_with_S(np.diag([3.0, -2.0, 1.0]), xi=(0, 0, 0)))
        np.testing.assert_allclose(fp.eigen_summary, [-2.0, 1.0, 3.0])

    def test_not_a_fixed_point(self):
        with pytest.raises(NotAFixedPointError):
            classify_fixed_point(dec_with_S(np.eye(2), xi=(1e-3, 0.0)))

    def test_bilinear_equilibrium(self):
        dec = decompose(evaluate(make_analytic("bilinear"), [0.0, 0.0]))
        assert classify_fixed_point(dec).kind is FixedPointKind.INDETERMINATE


class TestParamVector:
    def test_blocks_roundtrip(self):
        pv = ParamVector.from_blocks([[1.0, 2.0], [3.0], [4.0, 5.0, 6.0]])
        assert pv.sizes == (2, 1, 3)
        np.testing.assert_array_equal(pv.block(2), [4.0, 5.0, 6.0])
        np.testing.assert_array_equal(np.concatenate(pv.blocks), pv.flat)

    def test_size_mismatch(self):
        with pytest.raises(DimensionError):
            ParamVector(np.zeros(3), (1, 1))
