"""Sensitivity functions of event probabilities under parameter variations.

The probability of an event is the sub-sum of the interpolating polynomial
over the event's atoms.  Substituting each varied parameter by its symbol
and every covaried parameter by the scheme's linear expression in that
symbol gives the sensitivity function as an explicit polynomial.  For
piecewise schemes one polynomial is produced per cell of the product of the
per-symbol pieces.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import Model, ModelError, is_multilinear
from .covariation import (
    CovariationScheme,
    LinearSegment,
    Variation,
    block_values,
    linear_coefficients,
)

Exponent = tuple[int, ...]


class MultiPoly:
    """Dense-keyed sparse polynomial in ``nvars`` real variables."""

    __slots__ = ("nvars", "coeffs")

    def __init__(self, nvars: int, coeffs: dict[Exponent, float] | None = None):
        self.nvars = nvars
        self.coeffs = {k: v for k, v in (coeffs or {}).items() if v != 0.0}

    @classmethod
    def constant(cls, nvars: int, c: float) -> MultiPoly:
        return cls(nvars, {(0,) * nvars: float(c)})

    @classmethod
    def affine(cls, nvars: int, var: int, slope: float, intercept: float) -> MultiPoly:
        e = [0] * nvars
        e[var] = 1
        return cls(nvars, {tuple(e): float(slope), (0,) * nvars: float(intercept)})

    def __add__(self, other: MultiPoly) -> MultiPoly:
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, 0.0) + v
        return MultiPoly(self.nvars, out)

    def __mul__(self, other: MultiPoly | float) -> MultiPoly:
        if not isinstance(other, MultiPoly):
            return MultiPoly(self.nvars, {k: v * other for k, v in self.coeffs.items()})
        out: dict[Exponent, float] = {}
        for k1, v1 in self.coeffs.items():
            for k2, v2 in other.coeffs.items():
                k = tuple(a + b for a, b in zip(k1, k2))
                out[k] = out.get(k, 0.0) + v1 * v2
        return MultiPoly(self.nvars, out)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> MultiPoly:
        out = MultiPoly.constant(self.nvars, 1.0)
        for _ in range(n):
            out = out * self
        return out

    def __call__(self, point: Sequence[float]) -> float:
        point = np.asarray(point, dtype=float)
        return float(sum(c * np.prod(point ** np.array(k)) for k, c in self.coeffs.items()))

    def degree(self, var: int) -> int:
        return max((k[var] for k in self.coeffs), default=0)

    @property
    def total_degree(self) -> int:
        return max((sum(k) for k in self.coeffs), default=0)

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(abs(v) <= tol for v in self.coeffs.values())

    def __repr__(self) -> str:
        terms = sorted(self.coeffs.items(), reverse=True)
        return "MultiPoly(" + " + ".join(f"{c:.6g}*x^{k}" for k, c in terms) + ")"


@dataclass(frozen=True)
class Piece:
    box: tuple[tuple[float, float], ...]
    poly: MultiPoly

    def contains(self, point: Sequence[float], tol: float = 1e-12) -> bool:
        return all(lo - tol <= x <= hi + tol for x, (lo, hi) in zip(point, self.box))


@dataclass(frozen=True)
class PiecewisePolynomial:
    """Sensitivity function: one polynomial per cell of the admissible box."""

    variables: tuple[str, ...]
    pieces: tuple[Piece, ...]

    def segment(self, point: Sequence[float]) -> int:
        if len(point) != len(self.variables):
            raise ValueError(f"expected {len(self.variables)} coordinates, got {len(point)}")
        for k, piece in enumerate(self.pieces):
            if piece.contains(point):
                return k
        raise ValueError(f"point {tuple(point)} lies outside the admissible box")

    def __call__(self, point: Sequence[float]) -> float:
        return self.pieces[self.segment(point)].poly(point)

    @property
    def box(self) -> tuple[tuple[float, float], ...]:
        return tuple((min(p.box[v][0] for p in self.pieces), max(p.box[v][1] for p in self.pieces))
                     for v in range(len(self.variables)))


@dataclass(frozen=True)
class RationalSensitivity:
    numerator: PiecewisePolynomial
    denominator: PiecewisePolynomial

    def __call__(self, point: Sequence[float]) -> float:
        den = self.denominator(point)
        if den == 0.0:
            raise ZeroDivisionError(f"observed event has probability zero at {tuple(point)}")
        return self.numerator(point) / den


@dataclass(frozen=True)
class _VariedBlock:
    label: str
    members: tuple[int, ...]
    position: int
    segments: list[LinearSegment]


def _varied_blocks(model: Model, req: Sequence[Variation], scheme: CovariationScheme,
                   values: np.ndarray) -> list[_VariedBlock]:
    space = model.space
    seen = set()
    out = []
    for var in req:
        block = space.block_of(var.param)
        if block.id in seen:
            raise ModelError("variation request varies two parameters of the same block")
        seen.add(block.id)
        vals, weights, labels = block_values(space, values, block)
        pos = block.position(var.param)
        segs = linear_coefficients(scheme, vals, pos, weights, labels)
        out.append(_VariedBlock(space.label(var.param), block.members, pos, segs))
    return out


def _grouped_terms(model: Model, event: Iterable[int], blocks: list[_VariedBlock],
                   values: np.ndarray) -> dict[tuple[Exponent, ...], float]:
    """Collapse event terms by their exponents on the varied blocks.

    Each key holds one exponent tuple per varied block; the value is the sum
    of the remaining (fixed) factors over the terms sharing that key.
    """
    where = {m: (b, s) for b, vb in enumerate(blocks) for s, m in enumerate(vb.members)}
    groups: dict[tuple[Exponent, ...], float] = {}
    for term in model.restricted(event).terms:
        key = [[0] * len(vb.members) for vb in blocks]
        rest = 1.0
        for k, e in term.exponents:
            hit = where.get(k)
            if hit is None:
                rest *= values[k] ** e
            else:
                key[hit[0]][hit[1]] = e
        key = tuple(tuple(x) for x in key)
        groups[key] = groups.get(key, 0.0) + rest
    return groups


def sensitivity_function(model: Model, event: Iterable[int], req: Sequence[Variation],
                         scheme: CovariationScheme, values: np.ndarray | None = None) -> PiecewisePolynomial:
    """Probability of ``event`` as a polynomial in the varied parameters."""
    values = model.values if values is None else np.asarray(values, dtype=float)
    blocks = _varied_blocks(model, req, scheme, values)
    groups = _grouped_terms(model, event, blocks, values)
    n = len(blocks)
    pieces = []
    for combo in itertools.product(*(vb.segments for vb in blocks)):
        affine = [
            [MultiPoly.affine(n, j, seg.gamma[s], seg.delta[s]) for s in range(len(vb.members))]
            for j, (vb, seg) in enumerate(zip(blocks, combo))
        ]
        poly = MultiPoly(n)
        for key, coeff in groups.items():
            term = MultiPoly.constant(n, coeff)
            for j, exps in enumerate(key):
                for s, e in enumerate(exps):
                    if e:
                        term = term * affine[j][s] ** e
            poly = poly + term
        pieces.append(Piece(tuple((seg.lo, seg.hi) for seg in combo), poly))
    return PiecewisePolynomial(tuple(vb.label for vb in blocks), tuple(pieces))


def posterior_sensitivity(model: Model, target: Iterable[int], observed: Iterable[int],
                          req: Sequence[Variation], scheme: CovariationScheme,
                          values: np.ndarray | None = None) -> RationalSensitivity:
    """Conditional probability of ``target`` given ``observed`` as a ratio of polynomials."""
    values = model.values if values is None else np.asarray(values, dtype=float)
    observed = frozenset(observed)
    if model.probability(observed, values) <= 0.0:
        raise ModelError("observed event has probability zero under the original parameters")
    den = sensitivity_function(model, observed, req, scheme, values)
    if all(p.poly.is_zero() for p in den.pieces):
        raise ModelError("observed event has probability zero on the whole admissible box")
    num = sensitivity_function(model, frozenset(target) & observed, req, scheme, values)
    return RationalSensitivity(num, den)


@dataclass(frozen=True)
class LinearForm:
    """``f = sum(a[j] * x[j]) + b`` on one cell of the admissible box."""

    box: tuple[tuple[float, float], ...]
    a: np.ndarray
    b: float

    def __call__(self, point: Sequence[float]) -> float:
        return float(np.dot(self.a, point) + self.b)


def _check_single_cpt(model: Model, blocks: list[_VariedBlock]) -> None:
    if not is_multilinear(model.poly):
        raise ModelError("closed forms need a multilinear model; use the general procedures")
    where = {m: b for b, vb in enumerate(blocks) for m in vb.members}
    for term in model.poly.terms:
        hit = {where[k] for k, _ in term.exponents if k in where}
        if len(hit) > 1:
            raise ModelError("varied blocks share a monomial; not a single full CPT analysis")


def _cofactors(model: Model, event: Iterable[int], blocks: list[_VariedBlock], values: np.ndarray):
    """Per varied member, the summed cofactors over the event; plus the untouched mass."""
    where = {m: (b, s) for b, vb in enumerate(blocks) for s, m in enumerate(vb.members)}
    cof = [np.zeros(len(vb.members)) for vb in blocks]
    rest = 0.0
    for term in model.restricted(event).terms:
        hit = None
        prod = 1.0
        for k, e in term.exponents:
            if k in where:
                hit = where[k]
            else:
                prod *= values[k] ** e
        if hit is None:
            rest += prod
        else:
            cof[hit[0]][hit[1]] += prod
    return cof, rest


def linear_form(model: Model, event: Iterable[int], req: Sequence[Variation],
                scheme: CovariationScheme, values: np.ndarray | None = None) -> list[LinearForm]:
    """Coefficients of the sensitivity function of a multilinear model.

    Each cofactor sum (the event mass multiplying a block member) is weighted
    by that member's scheme coefficients.  Order-preserving schemes give one
    form per cell.
    """
    values = model.values if values is None else np.asarray(values, dtype=float)
    blocks = _varied_blocks(model, req, scheme, values)
    _check_single_cpt(model, blocks)
    cof, rest = _cofactors(model, event, blocks, values)
    forms = []
    for combo in itertools.product(*(vb.segments for vb in blocks)):
        a = np.array([float(np.dot(cof[j], seg.gamma)) for j, seg in enumerate(combo)])
        b = rest + sum(float(np.dot(cof[j], seg.delta)) for j, seg in enumerate(combo))
        forms.append(LinearForm(tuple((seg.lo, seg.hi) for seg in combo), a, b))
    return forms


def proportional_linear_form(model: Model, event: Iterable[int], req: Sequence[Variation],
                             values: np.ndarray | None = None) -> LinearForm:
    """Closed-form coefficients under proportional covariation.

    ``a_j`` is the cofactor mass of the varied member minus the event mass of
    the co-varied members rescaled by ``1 / (1 - theta)``; ``b`` collects the
    latter mass plus everything untouched by the variation.
    """
    from .covariation import proportional

    values = model.values if values is None else np.asarray(values, dtype=float)
    blocks = _varied_blocks(model, req, proportional, values)
    _check_single_cpt(model, blocks)
    cof, rest = _cofactors(model, event, blocks, values)
    a = np.zeros(len(blocks))
    b = rest
    for j, vb in enumerate(blocks):
        block = model.space.block_of(vb.members[0])
        w = np.array(block.weights, dtype=float)
        theta = values[list(vb.members)]
        i = vb.position
        scale = 1.0 - w[i] * theta[i]
        mass = sum(cof[j][s] * theta[s] for s in range(len(theta)) if s != i)
        a[j] = cof[j][i] - w[i] * mass / scale
        b += mass / scale
    return LinearForm(tuple((0.0, 1.0 / model.space.block_of(vb.members[0]).weights[vb.position])
                            for vb in blocks), a, float(b))
