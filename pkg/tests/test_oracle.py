import json
import math

import numpy as np
import pytest

from polysens.core import Block, ModelError
from polysens.covariation import make_request
from polysens.divergence import KL_QP, TV, cd_values
from polysens.modelfile import fixture_path
from polysens.oracle import (
    OracleError,
    SimplexGrid,
    compositions,
    find_cd_counterexample,
    grid_minimum,
    random_suite,
    verify_cd_optimality,
    verify_phi_optimality,
)


class TestCompositions:
    def test_unweighted_count(self):
        # stars and bars: C(5 + 2, 2)
        assert len(list(compositions(5, [1, 1, 1]))) == math.comb(7, 2)

    def test_weighted(self):
        got = sorted(compositions(4, [1, 2]))
        assert got == [(0, 2), (2, 1), (4, 0)]

    def test_infeasible(self):
        assert list(compositions(3, [2])) == []


class TestSimplexGrid:
    def test_points_sum_to_one(self):
        block = Block(0, (0, 1, 2))
        vals = np.array([0.5, 0.3, 0.2])
        grid = SimplexGrid.build(block, vals, 0, 0.37, step=0.05)
        np.testing.assert_allclose(grid.points.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(grid.points[:, 0] == 0.37)
        assert grid.n_grid == math.comb(math.ceil(0.63 / 0.05) + 1, 1)

    def test_weighted_block(self):
        block = Block(0, (0, 1), (1, 2))
        grid = SimplexGrid.build(block, np.array([0.4, 0.3]), 0, 0.2, step=0.1)
        np.testing.assert_allclose(grid.points @ np.array([1.0, 2.0]), 1.0, atol=1e-12)

    def test_bad_step(self):
        with pytest.raises(ValueError):
            SimplexGrid.build(Block(0, (0, 1)), np.array([0.5, 0.5]), 0, 0.3, step=0.0)


class TestCDOptimality:
    def test_binary_block_is_forced(self, ex1):
        # with two members the completion is unique, so every scheme ties
        req = make_request(ex1.space, {"theta_Y1_0": 0.45})
        v = verify_cd_optimality(ex1, req)
        assert v.passed and v.margin == 0.0

    def test_three_state_column(self, ex2):
        v = verify_cd_optimality(ex2, make_request(ex2.space, {"theta_Y2_1|Y1=1": 0.7}), step=0.05)
        assert v.passed
        assert v.scheme_values["proportional"] <= v.scheme_values["uniform"] + 1e-12

    def test_identity_has_zero_minimum(self, ex1):
        v = verify_cd_optimality(ex1, make_request(ex1.space, {"theta_Y2_2|Y1=0": 0.3}))
        assert v.grid_min == 0.0 and v.scheme_value == 0.0 and v.passed

    def test_grid_never_beats_injected_candidates(self, ex1):
        v = verify_cd_optimality(ex1, make_request(ex1.space, {"theta_Y2_1|Y1=0": 0.2}), step=0.02)
        assert v.passed
        assert all(v.grid_min <= s + 1e-12 for s in v.scheme_values.values())

    def test_deterministic(self, ex1):
        req = make_request(ex1.space, {"theta_Y2_1|Y1=0": 0.2, "theta_Y2_0|Y1=1": 0.3})
        a, b = verify_cd_optimality(ex1, req), verify_cd_optimality(ex1, req)
        assert a.summary() == b.summary()
        np.testing.assert_array_equal(a.minimizer, b.minimizer)

    def test_point_cap(self, ex1):
        req = make_request(ex1.space, {"theta_Y2_1|Y1=0": 0.2})
        with pytest.raises(OracleError, match="cap"):
            grid_minimum(ex1, req, cd_values, step=0.05, cap=10)


class TestPhiOptimality:
    def test_kl_example(self, ex2):
        v = verify_phi_optimality(ex2, make_request(ex2.space, {"theta_Y2_1|Y1=1": 0.7}), KL_QP)
        assert v.passed

    @pytest.mark.parametrize("case", random_suite(5, seed=100), ids=lambda c: f"seed{c.seed}")
    def test_total_variation_random(self, case):
        assert verify_phi_optimality(case.model, case.req, TV, step=0.05).passed


class TestCounterexample:
    def test_shared_block_model_fails(self, ex10):
        v = find_cd_counterexample(ex10, make_request(ex10.space, {"theta_Y1_0": 0.4}), step=0.01)
        assert not v.passed
        assert v.grid_min < v.scheme_value - 1e-4
        expected = json.loads(fixture_path("shared_block_csbn.json").read_text())["expected"]["0.4"]
        assert v.scheme_values["proportional"] == pytest.approx(expected["proportional"], abs=1e-12)

    def test_multilinear_model_has_none(self, ex1):
        v = find_cd_counterexample(ex1, make_request(ex1.space, {"theta_Y2_1|Y1=0": 0.2}), step=0.02)
        assert v.passed

    def test_single_block_only(self, ex1):
        req = make_request(ex1.space, {"theta_Y2_1|Y1=0": 0.2, "theta_Y2_0|Y1=1": 0.3})
        with pytest.raises(ModelError, match="one varied block"):
            find_cd_counterexample(ex1, req)


class TestRandomSuite:
    def test_reproducible(self):
        a, b = random_suite(3, seed=7), random_suite(3, seed=7)
        for x, y in zip(a, b):
            assert x.spec == y.spec and x.req == y.req

    def test_case_seeds(self):
        assert [c.seed for c in random_suite(3, seed=7)] == [7, 8, 9]

    def test_variations_valid(self):
        for case in random_suite(20, seed=0):
            blocks = {case.model.space.block_of(v.param).id for v in case.req}
            assert len(blocks) == len(case.req)
            assert all(0 < v.value < 1 for v in case.req)
