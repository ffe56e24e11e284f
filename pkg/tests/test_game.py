import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fogbandit.config import ArrivalConfig, ScenarioConfig, ScenarioValueError
from fogbandit.env import TaskSpec, build_topology
from fogbandit.game import (GameMatrix, bilinear_value, epsilon_ne_gap, ergodic_average,
                            joint_frequency, resolve_collisions)


def topo_fixture(n_arms=2, seed=0, arrival=1.0, service=10.0):
    cfg = ScenarioConfig(
        service_fns=n_arms, task_fns=2, horizon=100, runs=1,
        arrival=ArrivalConfig(kind="explicit", rates=(arrival,) * n_arms),
        collision_model="winner_takes_all")
    topo = build_topology(cfg, np.random.default_rng(seed))
    for node in topo.nodes:
        node.service_rate = service
    return topo


class TestResolveCollisions:
    def test_single_agent_gets_real_outcome_under_both_models(self):
        for model in ("winner_takes_all", "random_order"):
            topo = topo_fixture()
            out = resolve_collisions([(0, 1)], model, topo, TaskSpec(), 1.0,
                                     np.random.default_rng(3))
            assert len(out) == 1
            assert out[0].processed
            assert np.isfinite(out[0].total_latency)

    def test_winner_takes_all_one_real_one_unit_loss(self):
        topo = topo_fixture()
        out = resolve_collisions([(0, 0), (1, 0)], "winner_takes_all", topo, TaskSpec(),
                                 1.0, np.random.default_rng(5))
        processed = [o for o in out if o.processed]
        failed = [o for o in out if not o.processed]
        assert len(processed) == 1 and len(failed) == 1
        assert failed[0].total_latency == float("inf")

    def test_winner_takes_all_conserves_work(self):
        topo = topo_fixture()
        q_before = topo.nodes[0].queue_len
        resolve_collisions([(0, 0), (1, 0), (0, 0)], "winner_takes_all", topo, TaskSpec(),
                           1.0, np.random.default_rng(6))
        assert topo.nodes[0].queue_len == q_before + 1

    def test_winner_is_uniform(self):
        wins = np.zeros(2)
        for trial in range(4000):
            topo = topo_fixture(seed=trial % 7)
            out = resolve_collisions([(0, 0), (1, 0)], "winner_takes_all", topo,
                                     TaskSpec(), 1.0, np.random.default_rng(trial))
            for o in out:
                if o.processed:
                    wins[o.agent] += 1
        freq = wins / wins.sum()
        assert abs(freq[0] - 0.5) < 0.03

    def test_random_order_everyone_processed_later_strictly_larger(self):
        topo = topo_fixture()
        out = resolve_collisions([(0, 1), (1, 1)], "random_order", topo, TaskSpec(),
                                 1.0, np.random.default_rng(8))
        assert all(o.processed for o in out)
        lats = sorted(o.total_latency for o in out)
        assert lats[0] < lats[1]
        assert topo.nodes[1].queue_len == 2

    def test_random_order_is_exchangeable(self):
        means = np.zeros(2)
        for trial in range(3000):
            topo = topo_fixture(seed=trial % 5)
            out = resolve_collisions([(0, 0), (1, 0)], "random_order", topo, TaskSpec(),
                                     1.0, np.random.default_rng(trial + 10_000))
            for o in out:
                means[o.agent] += o.total_latency
        means /= 3000
        assert means[0] == pytest.approx(means[1], rel=0.05)

    def test_same_agent_batch_is_not_a_collision(self):
        topo = topo_fixture()
        out = resolve_collisions([(0, 0), (0, 0)], "winner_takes_all", topo, TaskSpec(),
                                 1.0, np.random.default_rng(9))
        assert all(o.processed for o in out)
        assert out[0].total_latency < out[1].total_latency  # FIFO in dispatch order

    def test_unknown_model_rejected(self):
        topo = topo_fixture()
        with pytest.raises(ScenarioValueError):
            resolve_collisions([(0, 0)], "duel", topo, TaskSpec(), 1.0,
                               np.random.default_rng(0))


class TestErgodicAverage:
    def test_constant_sequence(self):
        p = np.array([0.2, 0.8])
        assert np.allclose(ergodic_average([p, p, p]), p)

    def test_two_pure_points(self):
        out = ergodic_average([np.array([1.0, 0.0]), np.array([0.0, 1.0])])
        assert np.allclose(out, [0.5, 0.5])

    def test_matches_independent_mean(self):
        rng = np.random.default_rng(0)
        sims = rng.dirichlet(np.ones(5), size=100)
        expected = sims.sum(axis=0) / 100.0
        assert np.allclose(ergodic_average(sims), expected, atol=1e-12)
        assert ergodic_average(sims).sum() == pytest.approx(1.0, abs=1e-9)

    def test_empty_history_rejected(self):
        with pytest.raises(ScenarioValueError):
            ergodic_average(np.empty((0, 3)))


class TestBilinearValue:
    def test_pure_strategies_pick_the_entry(self):
        u = np.array([[0.1, 0.9], [0.4, 0.7]])
        assert bilinear_value(u, [0, 1], [1, 0]) == pytest.approx(0.4)

    def test_all_ones_matrix(self):
        u = np.ones((3, 3))
        rng = np.random.default_rng(1)
        p = rng.dirichlet(np.ones(3))
        q = rng.dirichlet(np.ones(3))
        assert bilinear_value(u, p, q) == pytest.approx(1.0)

    def test_matches_double_loop(self):
        rng = np.random.default_rng(2)
        u = rng.random((4, 4))
        p = rng.dirichlet(np.ones(4))
        q = rng.dirichlet(np.ones(4))
        expected = sum(p[i] * q[j] * u[i, j] for i in range(4) for j in range(4))
        assert bilinear_value(u, p, q) == pytest.approx(expected, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ScenarioValueError):
            bilinear_value(np.ones((2, 2)), [1, 0, 0], [1, 0])


class TestEpsilonNeGap:
    def test_matching_pennies_uniform_is_exact_ne(self):
        u = np.array([[1.0, 0.0], [0.0, 1.0]])
        row, col = epsilon_ne_gap(u, [0.5, 0.5], [0.5, 0.5])
        assert row == pytest.approx(0.0, abs=1e-12)
        assert col == pytest.approx(0.0, abs=1e-12)

    def test_dominant_row_pure_ne(self):
        u = np.array([[0.0, 0.0], [1.0, 1.0]])  # row player minimizes: row 0 dominates
        row, col = epsilon_ne_gap(u, [1.0, 0.0], [0.3, 0.7])
        assert row == pytest.approx(0.0, abs=1e-12)
        assert col == pytest.approx(0.0, abs=1e-12)

    def test_matches_pure_deviation_search(self):
        rng = np.random.default_rng(3)
        u = rng.random((4, 4))
        p = rng.dirichlet(np.ones(4))
        q = rng.dirichlet(np.ones(4))
        value = bilinear_value(u, p, q)
        best_row = min(sum(q[j] * u[i, j] for j in range(4)) for i in range(4))
        best_col = max(sum(p[i] * u[i, j] for i in range(4)) for j in range(4))
        row, col = epsilon_ne_gap(u, p, q)
        assert row == pytest.approx(value - best_row, abs=1e-12)
        assert col == pytest.approx(best_col - value, abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(min_value=2, max_value=5), st.integers(min_value=0, max_value=10_000))
    def test_gaps_are_non_negative(self, k, seed):
        rng = np.random.default_rng(seed)
        u = rng.random((k, k))
        p = rng.dirichlet(np.ones(k))
        q = rng.dirichlet(np.ones(k))
        row, col = epsilon_ne_gap(u, p, q)
        assert row >= -1e-12
        assert col >= -1e-12


class TestGameMatrix:
    def test_rejects_out_of_range(self):
        with pytest.raises(ScenarioValueError):
            GameMatrix(np.array([[0.0, 1.5], [0.2, 0.3]]))

    def test_accepts_unit_box(self):
        GameMatrix(np.array([[0.0, 1.0], [0.5, 0.25]]))


class TestJointFrequency:
    def test_constant_joint_play(self):
        a = np.full(100, 1)
        b = np.full(100, 2)
        jf = joint_frequency(a, b, 4)
        assert jf[1, 2] == 1.0
        assert jf.sum() == pytest.approx(1.0)

    def test_independent_uniform_play(self):
        rng = np.random.default_rng(4)
        a = rng.integers(0, 2, size=200_000)
        b = rng.integers(0, 2, size=200_000)
        jf = joint_frequency(a, b, 2)
        assert np.allclose(jf, 0.25, atol=0.01)

    def test_window_selects_slice(self):
        a = np.array([0, 0, 1, 1])
        b = np.array([0, 0, 1, 1])
        jf = joint_frequency(a, b, 2, window=(2, 4))
        assert jf[1, 1] == 1.0

    def test_empty_window_rejected(self):
        a = np.array([0, 1])
        with pytest.raises(ScenarioValueError):
            joint_frequency(a, a, 2, window=(2, 2))
        with pytest.raises(ScenarioValueError):
            joint_frequency(a, a, 2, window=(0, 5))

    def test_misaligned_histories_rejected(self):
        with pytest.raises(ScenarioValueError):
            joint_frequency(np.array([0, 1]), np.array([0]), 2)
