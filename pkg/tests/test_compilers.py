import time

import numpy as np
import pytest

from conftest import brute_dbn_joint, brute_joint
from polysens.compilers import (
    BNSpec,
    DBNSpec,
    MergeGroup,
    MergeSpec,
    apply_merges,
    compile_bn,
    event_from_predicate,
    parse_event,
    unroll_dbn,
)
from polysens.core import ModelError, evaluate, is_multilinear, max_indeterminate_degree


def chain(m: int) -> BNSpec:
    names = [f"X{k}" for k in range(m)]
    parents = {names[k]: (names[k - 1],) for k in range(1, m)}
    cpts = {names[0]: {(): (0.3, 0.7)}}
    for k in range(1, m):
        cpts[names[k]] = {(0,): (0.9, 0.1), (1,): (0.25, 0.75)}
    return BNSpec(tuple((n, 2) for n in names), parents, cpts)


class TestCompileBN:
    def test_medical_counts(self, ex1):
        assert len(ex1.poly) == 12
        assert set(ex1.poly.degrees()) == {3}
        assert ex1.space.size == 20

    def test_single_binary_variable(self):
        model = compile_bn(BNSpec((("A", 2),), {}, {"A": {(): (0.25, 0.75)}}))
        assert len(model.poly) == 2 and model.poly.degrees() == [1, 1]
        assert [model.space.label(k) for k in range(2)] == ["theta_A_0", "theta_A_1"]

    @pytest.mark.parametrize("m", [1, 2, 3, 4])
    def test_chain(self, m):
        model = compile_bn(chain(m))
        assert len(model.poly) == 2**m
        assert set(model.poly.degrees()) == {m}

    def test_matches_chain_rule(self, ex1_file, ex1):
        joint = brute_joint(ex1_file.bn)
        probs = ex1.atom_probabilities()
        for atom, y in enumerate(ex1.outcomes):
            assert probs[atom] == pytest.approx(joint[y], abs=1e-15)

    def test_multilinear_and_normalized(self, ex1):
        assert is_multilinear(ex1.poly)
        assert evaluate(ex1.poly, ex1.values) == pytest.approx(1.0, abs=1e-9)

    def test_bad_column_sum(self):
        with pytest.raises(ModelError, match="sums to"):
            BNSpec((("A", 2),), {}, {"A": {(): (0.5, 0.6)}})

    def test_dangling_parent(self):
        with pytest.raises(ModelError, match="not an earlier variable"):
            BNSpec((("A", 2),), {"A": ("B",)}, {"A": {(0,): (0.5, 0.5)}})

    def test_missing_configuration(self):
        with pytest.raises(ModelError, match="lacks parent configuration"):
            BNSpec((("A", 2), ("B", 2)), {"B": ("A",)},
                   {"A": {(): (0.5, 0.5)}, "B": {(0,): (0.5, 0.5)}})


class TestMerges:
    def test_medical_counts(self, ex1, ex2):
        assert ex2.space.size == 15
        assert len(ex2.poly) == 12 and set(ex2.poly.degrees()) == {3}
        assert ex2.n_atoms == ex1.n_atoms
        assert is_multilinear(ex2.poly)

    def test_probabilities_preserved(self, ex1, ex2):
        np.testing.assert_allclose(ex2.atom_probabilities(), ex1.atom_probabilities(), atol=1e-15)

    def test_collapsed_and_weighted_blocks(self, ex2):
        shared = ex2.space.block_of("theta_Y2_12|Y1=0")
        assert shared.weights == (1, 2)
        leaf = ex2.space.block_of("theta_Y3_0|Y2=1")
        assert leaf.size == 2 and leaf.is_unweighted

    def test_empty_merge_spec(self, ex1):
        assert apply_merges(ex1, MergeSpec()) is ex1

    def test_incompatible_blocks(self):
        spec = BNSpec((("A", 2), ("B", 2)), {"B": ("A",)},
                      {"A": {(): (0.5, 0.5)}, "B": {(0,): (0.5, 0.5), (1,): (0.2, 0.8)}})
        merge = MergeSpec((MergeGroup("shared", ("theta_A_0", "theta_B_0|A=0")),))
        with pytest.raises(ModelError, match="incompatible"):
            apply_merges(compile_bn(spec), merge)

    def test_unequal_values_rejected(self, ex1):
        merge = MergeSpec((MergeGroup("bad", ("theta_Y2_0|Y1=0", "theta_Y2_0|Y1=1")),))
        with pytest.raises(ModelError, match="different values"):
            apply_merges(ex1, merge)


class TestUnroll:
    def test_size(self, dbn_file):
        start = time.perf_counter()
        model = dbn_file.compile(4)
        elapsed = time.perf_counter() - start
        assert len(model.poly) == 2**8 * 3**4 == 20736
        assert set(model.poly.degrees()) == {12}
        assert elapsed < 5.0

    def test_normalized(self, dbn):
        assert evaluate(dbn.poly, dbn.values) == pytest.approx(1.0, abs=1e-9)

    def test_horizon_one_is_first_slice(self, dbn_file):
        model = unroll_dbn(dbn_file.transition, 1)
        bn = compile_bn(dbn_file.bn)
        assert [t.exponents for t in model.poly.terms] == [t.exponents for t in bn.poly.terms]
        assert [model.space.label(k) for k in range(model.space.size)] == \
               [bn.space.label(k) for k in range(bn.space.size)]

    @pytest.mark.parametrize("horizon", [2, 3])
    def test_matches_slice_simulation(self, dbn_file, horizon):
        model = unroll_dbn(dbn_file.transition, horizon)
        joint = brute_dbn_joint(dbn_file.transition, horizon)
        probs = model.atom_probabilities()
        for atom, y in enumerate(model.outcomes):
            assert probs[atom] == pytest.approx(joint[y], abs=1e-15)

    @pytest.mark.parametrize("horizon", [2, 3, 4])
    def test_transition_degree_bound(self, dbn_file, horizon):
        model = unroll_dbn(dbn_file.transition, horizon)
        for b in model.space.blocks:
            if model.space.label(b.members[0]).startswith("that_"):
                assert max_indeterminate_degree(model.poly, b) <= horizon - 1
        assert set(model.poly.degrees()) == {3 * horizon}

    def test_bad_horizon(self, dbn_file):
        with pytest.raises(ModelError, match="horizon"):
            unroll_dbn(dbn_file.transition, 0)

    def test_event_polynomial_structure(self, dbn):
        ev = event_from_predicate(dbn, parse_event("Y1=1,Y3=0,Y2@1-3=1"))
        sub = dbn.restricted(ev)
        assert len(sub) == 3
        lab = dbn.space.resolve
        common = {lab("theta_Y1_1"): 1, lab("theta_Y2_1|Y1=1"): 1, lab("theta_Y3_0|Y1=1,Y2=1"): 1,
                  lab("that_Y1_1|Y2=1"): 3, lab("that_Y3_0|Y2=1"): 3}
        x0, x1, x2 = (lab(f"that_Y2_{k}|Y2=1,Y3=0") for k in range(3))
        rest = []
        for term in sub.terms:
            exps = term.as_dict()
            for k, e in common.items():
                assert exps.pop(k) == e
            rest.append(exps)
        assert sorted(rest, key=str) == sorted([{x1: 3}, {x1: 2, x2: 1}, {x1: 2, x0: 1}], key=str)

    def test_transition_requires_known_parent(self, ex1_file):
        with pytest.raises(ModelError, match="unknown"):
            DBNSpec(ex1_file.bn, {"Y1": ("Z",)}, {})


class TestEvents:
    def test_no_constraints(self, ex1):
        assert event_from_predicate(ex1, []) == ex1.all_atoms()

    def test_single_constraint(self, ex1):
        assert len(event_from_predicate(ex1, [("Y3", 0)])) == 6

    def test_dbn_trajectory_event(self, dbn):
        assert len(event_from_predicate(dbn, parse_event("Y1=1,Y3=0,Y2@1-3=1"))) == 3

    def test_unknown_variable(self, ex1):
        with pytest.raises(ModelError, match="unknown variable"):
            event_from_predicate(ex1, [("Y9", 0)])

    def test_value_out_of_range(self, ex1):
        with pytest.raises(ModelError, match="out of range"):
            event_from_predicate(ex1, [("Y1", 2)])

    def test_parse_event(self):
        assert parse_event("Y1=1, Y2@2-3=0,Y3@*=1") == [("Y1", 1), ("Y2@2", 0), ("Y2@3", 0), ("Y3", 1)]
        with pytest.raises(ModelError):
            parse_event("Y1==1")
