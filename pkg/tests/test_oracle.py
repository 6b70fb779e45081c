"""Tests for the enumeration-based ground-truth solvers."""

import numpy as np
import pytest

from ppmproj import (
    RootedTree,
    ancestor_sums,
    ancestry_matrix,
    decode_prufer,
    oracle_dual_at_t,
    oracle_project,
    project,
)
from ppmproj.generate import random_instance, random_labeled_tree


def chain(q):
    return RootedTree.from_parent_array([0] + list(range(1, q)))


class TestOracleProject:
    def test_chain_hand_kkt(self):
        sol = oracle_project(chain(2), [0.5, 0.7])
        assert sol.m == pytest.approx([0.3, 0.7], abs=1e-12)
        assert sol.cost == pytest.approx(0.5, abs=1e-12)
        assert sol.active_set == frozenset()

    def test_feasible_input_zero_cost(self):
        rng = np.random.default_rng(0)
        tree, fhat = random_instance(7, rng=rng, feasible=True)
        sol = oracle_project(tree, fhat[:, 0])
        assert sol.cost <= 1e-9

    def test_single_node(self):
        sol = oracle_project(decode_prufer((), 1), [0.2])
        assert sol.m == pytest.approx([1.0], abs=1e-15)

    def test_size_refusal(self):
        tree = random_labeled_tree(15, np.random.default_rng(1))
        with pytest.raises(ValueError):
            oracle_project(tree, np.zeros(15))

    def test_kkt_certificate_fields(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            q = int(rng.integers(1, 9))
            tree = random_labeled_tree(q, rng)
            f = rng.standard_normal(q)
            sol = oracle_project(tree, f)
            assert np.all(sol.m >= -1e-9)
            assert sol.m.sum() == pytest.approx(1.0, abs=1e-9)
            u = ancestry_matrix(tree).astype(float)
            assert u @ sol.m == pytest.approx(sol.f, abs=1e-9)
            for i in sol.active_set:
                assert sol.m[i - 1] == pytest.approx(0.0, abs=1e-9)


class TestOracleDualAtT:
    def test_inactive_above_max(self):
        tree = chain(2)
        n = ancestor_sums(tree, [0.5, 0.7])
        z, lval = oracle_dual_at_t(tree, n, t=2.0)
        assert np.all(z == 0)
        assert lval == 0.0

    def test_chain_hand_solve_at_zero(self):
        tree = chain(2)
        n = ancestor_sums(tree, [0.5, 0.7])
        z, lval = oracle_dual_at_t(tree, n, t=0.0)
        assert z == pytest.approx([-0.6, -1.2], abs=1e-12)
        assert lval == pytest.approx(0.36, abs=1e-12)

    def test_agrees_with_path_evaluation(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            q = int(rng.integers(2, 9))
            tree = random_labeled_tree(q, rng)
            f = rng.standard_normal(q)
            n = ancestor_sums(tree, f)
            res = project(tree, f, keep_path=True)
            for state in res.path:
                z_oracle, _ = oracle_dual_at_t(tree, n, state.t)
                assert np.max(np.abs(state.z - z_oracle)) <= 1e-9

    def test_continuity_in_t(self):
        rng = np.random.default_rng(4)
        tree = random_labeled_tree(6, rng)
        n = ancestor_sums(tree, rng.standard_normal(6))
        ts = np.linspace(float(np.min(n)) - 2.0, float(np.max(n)) + 0.5, 120)
        zs = np.array([oracle_dual_at_t(tree, n, t)[0] for t in ts])
        step = ts[1] - ts[0]
        diffs = np.max(np.abs(np.diff(zs, axis=0)), axis=1)
        # Slopes are bounded by one, so differences are bounded by the grid step.
        assert np.all(diffs <= step * (1.0 + 1e-9))

    def test_objective_convex_in_t(self):
        rng = np.random.default_rng(5)
        tree = random_labeled_tree(5, rng)
        n = ancestor_sums(tree, rng.standard_normal(5))
        ts = np.linspace(float(np.min(n)) - 3.0, float(np.max(n)) + 1.0, 80)
        lvals = np.array([oracle_dual_at_t(tree, n, t)[1] for t in ts])
        second = np.diff(lvals, 2)
        assert np.all(second >= -1e-9)
