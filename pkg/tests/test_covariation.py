import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from polysens.covariation import (
    NAMED_SCHEMES,
    CovariationError,
    CovariationScheme,
    admissible_range,
    check_properties,
    covary,
    custom_linear,
    linear_coefficients,
    order_permutation,
    order_preserving,
    proportional,
    sample_blocks,
    scheme_from_name,
    uniform,
)

TABLE = {
    "proportional": dict(valid=True, impossibility_preserving=True, order_preserving=False,
                         identity_preserving=True, linear=True),
    "uniform": dict(valid=True, impossibility_preserving=False, order_preserving=False,
                    identity_preserving=False, linear=True),
    "order-preserving": dict(valid=True, impossibility_preserving=True, order_preserving=True,
                             identity_preserving=True, linear=True),
}


@st.composite
def block_variation(draw):
    r = draw(st.integers(2, 5))
    raw = draw(st.lists(st.floats(0.0, 1.0), min_size=r, max_size=r))
    assume(sum(raw) > 1e-3)
    vals = np.array(raw) / sum(raw)
    i = draw(st.integers(0, r - 1))
    assume(order_permutation(vals, i)[-1] != i)
    frac = draw(st.floats(0.0, 1.0))
    return vals, i, frac


class TestCovary:
    def test_proportional_example(self):
        np.testing.assert_allclose(covary(proportional, [0.5, 0.3, 0.2], 0, 0.6), [0.6, 0.24, 0.16], atol=1e-15)

    def test_uniform_example(self):
        np.testing.assert_allclose(covary(uniform, [0.5, 0.3, 0.2], 0, 0.6), [0.6, 0.2, 0.2], atol=1e-15)

    @pytest.mark.parametrize("scheme", [proportional, order_preserving])
    def test_identity(self, scheme):
        vals = np.array([0.2, 0.3, 0.5])
        np.testing.assert_array_equal(covary(scheme, vals, 1, 0.3), vals)

    def test_order_preserving_bounds(self):
        # ascending block, varied member second of three: cap is 1 / (3 - 1)
        assert admissible_range(order_preserving, [0.2, 0.3, 0.5], 1) == (0.0, 0.5)
        with pytest.raises(CovariationError, match="largest"):
            covary(order_preserving, [0.2, 0.3, 0.5], 2, 0.4)
        with pytest.raises(CovariationError, match="admissible range"):
            covary(order_preserving, [0.2, 0.3, 0.5], 1, 0.51)

    def test_proportional_undefined_at_one(self):
        with pytest.raises(CovariationError, match="undefined"):
            covary(proportional, [1.0, 0.0], 0, 0.5)

    def test_proportional_keeps_zero_exactly(self):
        out = covary(proportional, [0.4, 0.0, 0.6], 0, 0.7)
        assert out[1] == 0.0

    def test_single_member_block(self):
        with pytest.raises(CovariationError):
            covary(uniform, [1.0], 0, 1.0)

    def test_unordered_block_is_sorted_internally(self):
        shuffled = covary(order_preserving, [0.5, 0.2, 0.3], 1, 0.25)
        ordered = covary(order_preserving, [0.2, 0.3, 0.5], 0, 0.25)
        np.testing.assert_allclose(shuffled[[1, 2, 0]], ordered, atol=1e-15)

    def test_weighted_block(self):
        # one member stands for two entries: 0.4 + 2 * 0.3 == 1
        out = covary(proportional, [0.4, 0.3], 0, 0.2, weights=[1, 2])
        assert 0.2 + 2 * out[1] == pytest.approx(1.0, abs=1e-15)
        with pytest.raises(CovariationError, match="unweighted"):
            covary(order_preserving, [0.4, 0.3], 0, 0.2, weights=[1, 2])

    def test_custom_linear(self):
        scheme = custom_linear({"1": (-0.5, 0.5), "2": (-0.5, 0.5)})
        np.testing.assert_allclose(covary(scheme, [0.4, 0.3, 0.3], 0, 0.2), [0.2, 0.4, 0.4])
        invalid = custom_linear({"1": (0.0, 0.5), "2": (0.0, 0.5)})
        with pytest.raises(CovariationError, match="invalid block"):
            covary(invalid, [0.4, 0.3, 0.3], 0, 0.2)

    def test_custom_coefficient_range(self):
        with pytest.raises(ValueError, match="out of range"):
            CovariationScheme("custom_linear", {"a": (2.0, 0.0)})

    def test_scheme_names(self, tmp_path):
        assert scheme_from_name("order-preserving") is order_preserving
        path = tmp_path / "coef.json"
        path.write_text('{"1": [-1, 1]}')
        assert scheme_from_name(f"linear:{path}").coefficients == {"1": (-1.0, 1.0)}
        with pytest.raises(ValueError):
            scheme_from_name("bogus")


class TestLinearCoefficients:
    def test_proportional(self):
        (seg,) = linear_coefficients(proportional, [0.5, 0.3, 0.2], 0)
        assert (seg.gamma[1], seg.delta[1]) == pytest.approx((-0.6, 0.6), abs=1e-15)

    def test_uniform(self):
        (seg,) = linear_coefficients(uniform, [0.5, 0.3, 0.2], 0)
        assert (seg.gamma[2], seg.delta[2]) == pytest.approx((-0.5, 0.5), abs=1e-15)

    def test_order_preserving_breakpoint(self):
        segs = linear_coefficients(order_preserving, [0.2, 0.3, 0.5], 1)
        assert [(s.lo, s.hi) for s in segs] == [(0.0, 0.3), (0.3, 0.5)]


@settings(max_examples=200, deadline=None)
@given(block_variation(), st.sampled_from(NAMED_SCHEMES))
def test_validity_and_coefficients(case, scheme):
    vals, i, frac = case
    lo, hi = admissible_range(scheme, vals, i)
    x = lo + frac * (hi - lo)
    out = covary(scheme, vals, i, x)
    assert out.sum() == pytest.approx(1.0, abs=1e-9)
    assert out[i] == x and np.all((out >= 0) & (out <= 1))
    segs = linear_coefficients(scheme, vals, i)
    for seg in segs:
        if seg.lo - 1e-15 <= x <= seg.hi + 1e-15:
            np.testing.assert_allclose(seg(x)[np.arange(len(vals)) != i],
                                       out[np.arange(len(vals)) != i], atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(block_variation())
def test_proportional_preserves_ratios(case):
    vals, i, frac = case
    assume(vals[i] < 1.0)
    out = covary(proportional, vals, i, frac)
    pos = [j for j in range(len(vals)) if j != i and vals[j] > 1e-6]
    for j in pos:
        for k in pos:
            if out[k] > 0:
                assert out[j] / out[k] == pytest.approx(vals[j] / vals[k], rel=1e-9)


@settings(max_examples=100, deadline=None)
@given(block_variation())
def test_order_preserving_keeps_ascending(case):
    vals, i, frac = case
    vals = np.sort(vals)
    assume(order_permutation(vals, i)[-1] != i)
    lo, hi = admissible_range(order_preserving, vals, i)
    out = covary(order_preserving, vals, i, lo + frac * (hi - lo))
    assert np.all(np.diff(out[order_permutation(vals, i)]) >= -1e-12)


class TestPropertyMatrix:
    @pytest.mark.parametrize("scheme", NAMED_SCHEMES, ids=lambda s: s.name)
    def test_matches_reference_table(self, scheme):
        report = check_properties(scheme, sample_blocks(100, seed=0))
        assert report.row() == TABLE[scheme.name]
        for flag in report.flags.values():
            assert flag.holds or flag.witness is not None

    def test_samples_are_reproducible(self):
        assert sample_blocks(10, seed=3) == sample_blocks(10, seed=3)

    def test_empty_sample(self):
        with pytest.raises(ValueError):
            check_properties(proportional, [])
