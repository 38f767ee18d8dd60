import numpy as np
import pytest

from bandctl.dynamics import (DiffusionModel, mean_evolution, mean_transition, mean_spectrum,
                              selection_matrix, simulate, simulate_final, stack_controls,
                              transition_batch, transition_matrix, unstack_controls)
from bandctl.gsp import ADJACENCY, LAPLACIAN, Graph, graph_basis, spectral_norm
from bandctl.random_graph import load_bundled, rng_stream, sample_edge_mask, sample_res

HEAT = DiffusionModel(LAPLACIAN)
SHIFT = DiffusionModel(ADJACENCY)


class TestModel:
    def test_default_eps_is_stability_limit(self, p3):
        assert HEAT.bind(p3).eps == pytest.approx(1 / 3)

    def test_eps_out_of_range(self, p3):
        with pytest.raises(ValueError, match="stability"):
            DiffusionModel(LAPLACIAN, 0.5).bind(p3)
        with pytest.raises(ValueError):
            DiffusionModel(LAPLACIAN, -1.0)
        with pytest.raises(ValueError):
            DiffusionModel("wave")

    def test_eps_checked_against_underlying_graph(self, p3):
        # 0.5 is stable for K2 alone but not for the underlying P3
        with pytest.raises(ValueError):
            transition_matrix(DiffusionModel(LAPLACIAN, 0.5), Graph(3, [(0, 1)]), underlying=p3)


class TestTransition:
    def test_empty_realization_heat(self, p3):
        A = transition_matrix(HEAT, Graph(3, []), underlying=p3)
        assert np.array_equal(A, np.eye(3))

    def test_k2_heat(self, k2):
        A = transition_matrix(DiffusionModel(LAPLACIAN, 0.5), k2)
        assert np.allclose(A, [[0.5, 0.5], [0.5, 0.5]])

    def test_k2_shift(self, k2):
        assert np.array_equal(transition_matrix(SHIFT, k2), [[0, 1], [1, 0]])

    @pytest.mark.parametrize("model", [HEAT, SHIFT])
    def test_batch_matches_single(self, model):
        g = load_bundled("florentine")
        rng = rng_stream(0)
        masks = sample_edge_mask(g, 0.5, rng, size=5)
        batch = transition_batch(model, g, masks)
        for A, m in zip(batch, masks):
            gt = Graph(g.n, g.edges[m], g.weights[m])
            assert np.allclose(A, transition_matrix(model, gt, underlying=g))

    @pytest.mark.parametrize("model", [HEAT, SHIFT])
    def test_norm_bound(self, model):
        g = load_bundled("zachary")
        rho = model.rho(g)
        for A in transition_batch(model, g, sample_edge_mask(g, 0.7, rng_stream(1), size=50)):
            assert np.allclose(A, A.T)
            assert spectral_norm(A) <= rho + 1e-10


class TestMeanTransition:
    def test_p1_equals_full_realization(self, p3):
        for model in (HEAT, SHIFT):
            assert np.allclose(mean_transition(model, p3, 1.0), transition_matrix(model, p3))

    def test_k2_values(self, k2):
        assert np.allclose(mean_transition(DiffusionModel(LAPLACIAN, 0.5), k2, 0.5),
                           [[0.75, 0.25], [0.25, 0.75]])
        assert np.allclose(mean_transition(SHIFT, k2, 0.5), 0.5 * k2.adjacency())

    @pytest.mark.parametrize("model", [HEAT, SHIFT])
    def test_shares_eigenvectors(self, model):
        g = load_bundled("zachary")
        b = graph_basis(g, model.kind)
        D = b.eigenvectors.T @ mean_transition(model, g, 0.8) @ b.eigenvectors
        assert np.allclose(D, np.diag(np.diag(D)), atol=1e-10)
        assert np.allclose(np.diag(D), mean_spectrum(model, g, 0.8, b.eigenvalues), atol=1e-10)

    def test_empirical_mean(self):
        g = load_bundled("florentine")
        A = transition_batch(HEAT, g, sample_edge_mask(g, 0.4, rng_stream(2), size=20000))
        assert np.allclose(A.mean(axis=0), mean_transition(HEAT, g, 0.4), atol=0.01)


class TestControls:
    def test_stacking_order(self):
        c = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        assert stack_controls(c).tolist() == [5, 6, 3, 4, 1, 2]
        assert np.array_equal(unstack_controls(stack_controls(c), 3), c)

    def test_selection_matrix(self):
        C = selection_matrix([2, 0], 3)
        assert np.array_equal(C, [[0, 0, 1], [1, 0, 0]])
        for bad in ([], [0, 0], [3]):
            with pytest.raises(ValueError):
                selection_matrix(bad, 3)


class TestSimulate:
    def test_p1_deterministic(self, p3):
        ctrl = np.array([[1.0], [-0.5], [2.0]])
        x = simulate(HEAT, p3, 1.0, [1], ctrl, rng_stream(0))
        A = transition_matrix(HEAT, p3)
        y = np.zeros(3)
        for t in range(3):
            y = A @ y + np.eye(3)[1] * ctrl[t, 0]
            assert np.allclose(x[t + 1], y)

    def test_zero_control(self, p3):
        x = simulate(HEAT, p3, 0.5, [0], np.zeros((4, 1)), rng_stream(0))
        assert x.shape == (5, 3) and np.all(x == 0)

    def test_first_step_deterministic(self, k2):
        for s in range(5):
            x = simulate(SHIFT, k2, 0.5, [0], [[1.0]], rng_stream(s))
            assert np.array_equal(x[1], [1.0, 0.0])

    def test_initial_state(self, k2):
        x = simulate(SHIFT, k2, 1.0, [0], [[0.0]], rng_stream(0), x0=[2.0, 3.0])
        assert np.array_equal(x[1], [3.0, 2.0])

    def test_control_shape_mismatch(self, p3):
        with pytest.raises(ValueError):
            simulate(HEAT, p3, 0.5, [0, 1], np.zeros((2, 1)), rng_stream(0))

    def test_final_matches_step_by_step(self):
        g = load_bundled("florentine")
        ctrl = np.random.default_rng(0).normal(size=(4, 2))
        a = simulate_final(HEAT, g, 0.6, [3, 7], ctrl, rng_stream(1), 3, chunk=2)
        rng = rng_stream(1)
        # simulate_final draws all R masks per step; reproduce that order
        x = np.zeros((3, g.n))
        for t in range(4):
            A = transition_batch(HEAT, g, sample_edge_mask(g, 0.6, rng, size=2))
            x[:2] = np.einsum("rij,rj->ri", A, x[:2])
            x[:2, [3, 7]] += ctrl[t]
        assert np.allclose(a[:2], x[:2])


class TestMeanEvolution:
    def test_t1(self, p3):
        mu = mean_evolution(np.eye(3), [2], [[1.5]])
        assert np.array_equal(mu, [0, 0, 1.5])

    def test_zero(self, p3):
        assert np.all(mean_evolution(mean_transition(HEAT, p3, 0.5), [0], np.zeros((3, 1))) == 0)

    def test_k2_two_steps(self, k2):
        mu = mean_evolution(mean_transition(SHIFT, k2, 0.5), [0], [[1.0], [0.0]])
        assert np.allclose(mu, [0, 0.5])

    @pytest.mark.parametrize("model", [HEAT, SHIFT])
    def test_empirical_mean_within_4_se(self, model):
        g = load_bundled("florentine")
        ctrl = np.random.default_rng(3).normal(size=(5, 3))
        sel = [0, 4, 9]
        R = 10_000
        xT = simulate_final(model, g, 0.7, sel, ctrl, rng_stream(4), R)
        mu = mean_evolution(mean_transition(model, g, 0.7), sel, ctrl)
        se = xT.std(axis=0, ddof=1) / np.sqrt(R)
        assert np.all(np.abs(xT.mean(axis=0) - mu) <= 4 * se + 1e-12)
