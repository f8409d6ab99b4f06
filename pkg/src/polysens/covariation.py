"""Covariation schemes for a block of parameters that must sum to one.

When one member of a block is moved to a new value the others are updated
by a scheme.  Every scheme here is linear, or piecewise linear with a single
breakpoint at the original value (order preserving), so each one can also
report its coefficients ``new_j = gamma_j * x + delta_j``.

Blocks may carry integer weights (see :class:`polysens.core.Block`).  The
residual mass ``1 - w_i * x`` is then shared over the weighted remaining
members; with unit weights the formulas are the textbook ones.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import TOL, Block, ModelError, ParameterSpace

PROPORTIONAL = "proportional"
UNIFORM = "uniform"
ORDER_PRESERVING = "order_preserving"
CUSTOM_LINEAR = "custom_linear"
KINDS = (PROPORTIONAL, UNIFORM, ORDER_PRESERVING, CUSTOM_LINEAR)
PROPERTIES = ("valid", "impossibility_preserving", "order_preserving", "identity_preserving", "linear")


class CovariationError(ModelError):
    """The requested variation is undefined or inadmissible for the scheme."""


@dataclass(frozen=True)
class CovariationScheme:
    kind: str
    coefficients: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown covariation scheme {self.kind!r}")
        for label, (gamma, delta) in self.coefficients.items():
            if not (-1.0 <= gamma <= 1.0 and -1.0 <= delta <= 1.0):
                raise ValueError(f"linear coefficients for {label!r} out of range: {(gamma, delta)}")

    @property
    def name(self) -> str:
        return self.kind.replace("_", "-")

    def __str__(self) -> str:
        return self.name


proportional = CovariationScheme(PROPORTIONAL)
uniform = CovariationScheme(UNIFORM)
order_preserving = CovariationScheme(ORDER_PRESERVING)
NAMED_SCHEMES = (proportional, uniform, order_preserving)


def custom_linear(coefficients: Mapping[str, Sequence[float]]) -> CovariationScheme:
    """Scheme ``new_j = gamma_j * x + delta_j`` with coefficients keyed by label.

    For bare blocks without labels the keys are member positions (``"0"``, ``"1"``...).
    """
    return CovariationScheme(CUSTOM_LINEAR, {k: (float(g), float(d)) for k, (g, d) in coefficients.items()})


def scheme_from_name(name: str) -> CovariationScheme:
    """Parse ``proportional``, ``uniform``, ``order-preserving`` or ``linear:<file>``."""
    if name.startswith("linear:"):
        with open(name.split(":", 1)[1]) as fh:
            return custom_linear(json.load(fh))
    key = name.replace("-", "_")
    for scheme in NAMED_SCHEMES:
        if scheme.kind == key:
            return scheme
    raise ValueError(f"unknown covariation scheme {name!r}")


@dataclass(frozen=True)
class LinearSegment:
    """On ``lo <= x <= hi`` member ``j`` of the block equals ``gamma[j] * x + delta[j]``."""

    lo: float
    hi: float
    gamma: np.ndarray
    delta: np.ndarray

    def __call__(self, x: float) -> np.ndarray:
        return self.gamma * x + self.delta


def order_permutation(values: Sequence[float], i: int) -> list[int]:
    """Block positions sorted ascending by value, varied member last among ties."""
    return sorted(range(len(values)), key=lambda j: (values[j], j == i, j))


def _weights(values, weights):
    if weights is None:
        return np.ones(len(values))
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (len(values),):
        raise ModelError("weights do not match block values")
    return weights


def admissible_range(scheme: CovariationScheme, values: Sequence[float], i: int,
                     weights: Sequence[int] | None = None) -> tuple[float, float]:
    """Interval of new values the scheme accepts for member ``i``."""
    values = np.asarray(values, dtype=float)
    w = _weights(values, weights)
    r = len(values)
    if r < 2:
        raise CovariationError("a block with a single member cannot be varied")
    if not 0 <= i < r:
        raise CovariationError(f"member index {i} outside block of size {r}")
    hi = 1.0 / w[i]
    if scheme.kind == PROPORTIONAL and abs(1.0 - w[i] * values[i]) <= 0.0:
        raise CovariationError("proportional covariation is undefined when the varied parameter is 1")
    if scheme.kind == ORDER_PRESERVING:
        if not np.all(w == 1):
            raise CovariationError("order-preserving covariation needs an unweighted block")
        pos = order_permutation(values, i).index(i)
        if pos == r - 1:
            raise CovariationError("order-preserving covariation cannot vary the largest parameter")
        hi = 1.0 / (r - pos)
    return 0.0, hi


def linear_coefficients(scheme: CovariationScheme, values: Sequence[float], i: int,
                        weights: Sequence[int] | None = None,
                        labels: Sequence[str] | None = None) -> list[LinearSegment]:
    """Coefficients of the scheme on each linear piece of the admissible range.

    The varied member itself always has ``gamma = 1, delta = 0``.
    """
    values = np.asarray(values, dtype=float)
    w = _weights(values, weights)
    lo, hi = admissible_range(scheme, values, i, weights)
    r = len(values)
    others = np.arange(r) != i
    gamma = np.zeros(r)
    delta = np.zeros(r)
    gamma[i] = 1.0

    if scheme.kind == PROPORTIONAL:
        rest = 1.0 - w[i] * values[i]
        gamma[others] = -w[i] * values[others] / rest
        delta[others] = values[others] / rest
        return [LinearSegment(lo, hi, gamma, delta)]

    if scheme.kind == UNIFORM:
        mass = w[others].sum()
        gamma[others] = -w[i] / mass
        delta[others] = 1.0 / mass
        return [LinearSegment(lo, hi, gamma, delta)]

    if scheme.kind == CUSTOM_LINEAR:
        if labels is None:
            labels = [str(j) for j in range(r)]
        for j in np.flatnonzero(others):
            try:
                gamma[j], delta[j] = scheme.coefficients[labels[j]]
            except KeyError:
                raise CovariationError(f"no linear coefficients for {labels[j]!r}") from None
        return [LinearSegment(lo, hi, gamma, delta)]

    # order preserving: two pieces split at the original value
    order = order_permutation(values, i)
    pos = order.index(i)
    before, after = order[:pos], order[pos + 1:]
    t_i = values[i]
    t_max = hi
    t_suc = values[after].sum()
    segments = []
    if t_i > 0:
        g1, d1 = gamma.copy(), delta.copy()
        g1[before] = values[before] / t_i
        g1[after] = -values[after] * (1.0 - t_suc) / (t_suc * t_i)
        d1[after] = values[after] / t_suc
        segments.append(LinearSegment(0.0, t_i, g1, d1))
    g2, d2 = gamma.copy(), delta.copy()
    span = t_max - t_i
    g2[before] = -values[before] / span
    d2[before] = values[before] * t_max / span
    g2[after] = -(values[after] - t_max) / span
    d2[after] = (values[after] - t_max) * t_max / span + t_max
    segments.append(LinearSegment(t_i, t_max, g2, d2))
    return segments


def covary(scheme: CovariationScheme, values: Sequence[float], i: int, new_value: float,
           weights: Sequence[int] | None = None,
           labels: Sequence[str] | None = None) -> np.ndarray:
    """Block values after moving member ``i`` to ``new_value``."""
    values = np.asarray(values, dtype=float)
    w = _weights(values, weights)
    lo, hi = admissible_range(scheme, values, i, weights)
    if not lo - TOL <= new_value <= hi + TOL:
        raise CovariationError(
            f"new value {new_value!r} outside the admissible range [{lo}, {hi}] of the {scheme} scheme"
        )
    if scheme.kind == PROPORTIONAL:
        out = values * ((1.0 - w[i] * new_value) / (1.0 - w[i] * values[i]))
        out[i] = new_value
    elif scheme.kind == UNIFORM:
        others = np.arange(len(values)) != i
        out = np.full(len(values), (1.0 - w[i] * new_value) / w[others].sum())
        out[i] = new_value
    else:
        segments = linear_coefficients(scheme, values, i, weights, labels)
        seg = next((s for s in segments if new_value <= s.hi), segments[-1])
        out = seg(new_value)
        out[i] = new_value
    if scheme.kind == CUSTOM_LINEAR:
        total = float(np.dot(w, out))
        if abs(total - 1.0) > TOL or np.any(out < -TOL) or np.any(out > 1 + TOL):
            raise CovariationError(f"custom linear scheme produced an invalid block {out.tolist()}")
    return np.clip(out, 0.0, 1.0)


@dataclass(frozen=True)
class Variation:
    """Move indeterminate ``param`` to ``value`` (``None`` for symbolic use)."""

    param: int
    value: float | None = None


def make_request(space: ParameterSpace, varied: Mapping[int | str, float | None] | Iterable) -> tuple[Variation, ...]:
    """Build a variation request from labels or ids, one entry per block."""
    items = varied.items() if isinstance(varied, Mapping) else varied
    req = tuple(Variation(space.resolve(ref), None if v is None else float(v)) for ref, v in items)
    blocks = [space.indeterminates[v.param].block_id for v in req]
    if len(set(blocks)) != len(blocks):
        raise ModelError("variation request varies two parameters of the same block")
    return req


def block_values(space: ParameterSpace, values: np.ndarray, block: Block):
    return (values[list(block.members)], list(block.weights),
            [space.label(m) for m in block.members])


def apply_variation(space: ParameterSpace, values: np.ndarray, req: Sequence[Variation],
                    scheme: CovariationScheme) -> np.ndarray:
    """Full assignment after applying every variation of ``req`` under ``scheme``."""
    out = np.array(values, dtype=float)
    seen = set()
    for var in req:
        block = space.block_of(var.param)
        if block.id in seen:
            raise ModelError("variation request varies two parameters of the same block")
        seen.add(block.id)
        if var.value is None:
            raise ModelError(f"no new value given for {space.label(var.param)!r}")
        vals, weights, labels = block_values(space, out, block)
        new = covary(scheme, vals, block.position(var.param), var.value, weights, labels)
        out[list(block.members)] = new
    return out


# -- property checks -------------------------------------------------------

@dataclass(frozen=True)
class Flag:
    holds: bool
    witness: dict | None = None


@dataclass(frozen=True)
class PropertyReport:
    scheme: str
    flags: dict[str, Flag]

    def row(self) -> dict[str, bool]:
        return {k: self.flags[k].holds for k in PROPERTIES}


@dataclass(frozen=True)
class BlockSample:
    values: tuple[float, ...]
    index: int


def sample_blocks(n: int = 100, seed: int = 0) -> list[BlockSample]:
    """Random blocks of size 2 to 4, about a third with a zero entry.

    The varied index is never the largest member so every named scheme has a
    non-trivial admissible range.
    """
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        r = int(rng.integers(2, 5))
        vals = rng.dirichlet(np.ones(r))
        if r > 2 and rng.random() < 1 / 3:
            vals[rng.integers(r)] = 0.0
            vals /= vals.sum()
        vals = tuple(float(v) for v in vals)
        order = order_permutation(vals, -1)
        candidates = [j for j in order[:-1]]
        i = int(candidates[rng.integers(len(candidates))])
        if order_permutation(vals, i)[-1] == i:
            continue
        out.append(BlockSample(vals, i))
    return out


def _collinear(xs, ys, tol=1e-9) -> bool:
    (x0, x1, x2), (y0, y1, y2) = xs, ys
    if x2 - x0 <= 0:
        return True
    interp = y0 + (y2 - y0) * (x1 - x0) / (x2 - x0)
    return bool(np.all(np.abs(interp - y1) <= tol))


def check_properties(scheme: CovariationScheme, samples: Sequence[BlockSample],
                     grid: int = 11, tol: float = 1e-9) -> PropertyReport:
    """Check the five covariation properties over sampled blocks and variations.

    Linearity is judged piecewise, on either side of the original value.
    """
    if not samples:
        raise ValueError("property check needs at least one sample")
    witnesses: dict[str, dict | None] = {k: None for k in PROPERTIES}

    def fail(prop, **info):
        if witnesses[prop] is None:
            witnesses[prop] = info

    for s in samples:
        vals = np.array(s.values)
        i = s.index
        lo, hi = admissible_range(scheme, vals, i)
        xs = np.linspace(lo, hi, grid)
        order = order_permutation(vals, i)
        for x in xs:
            out = covary(scheme, vals, i, float(x))
            if abs(out.sum() - 1.0) > tol:
                fail("valid", block=s.values, index=i, new_value=float(x), result=out.tolist())
            zeros = [j for j in range(len(vals)) if j != i and vals[j] == 0.0]
            if any(abs(out[j]) > tol for j in zeros):
                fail("impossibility_preserving", block=s.values, index=i, new_value=float(x),
                     result=out.tolist())
            if np.any(np.diff(out[order]) < -tol):
                fail("order_preserving", block=s.values, index=i, new_value=float(x),
                     result=out.tolist())
        same = covary(scheme, vals, i, float(vals[i]))
        if np.any(np.abs(same - vals) > tol):
            fail("identity_preserving", block=s.values, index=i, result=same.tolist())
        pieces = [(lo, min(max(vals[i], lo), hi)), (min(max(vals[i], lo), hi), hi)]
        for a, b in pieces:
            pts = (a, (a + b) / 2, b)
            ys = [covary(scheme, vals, i, float(p)) for p in pts]
            if not _collinear(pts, ys, tol):
                fail("linear", block=s.values, index=i, interval=(a, b))
    flags = {k: Flag(witnesses[k] is None, witnesses[k]) for k in PROPERTIES}
    return PropertyReport(scheme.name, flags)
