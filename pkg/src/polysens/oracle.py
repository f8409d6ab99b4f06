"""Brute-force checks of the covariation optimality results.

For each varied block the new value of the varied member is fixed and the
remaining mass is spread over the other members in every way allowed by a
regular grid.  Each grid point is a valid covariation; evaluating a measure
at all of them (across the product of the varied blocks) gives a reference
minimum against which a scheme is compared.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .compilers import BNSpec, compile_bn
from .core import Block, Model, ModelError, atom_values
from .covariation import (
    NAMED_SCHEMES,
    CovariationError,
    CovariationScheme,
    Variation,
    apply_variation,
    covary,
    order_permutation,
    proportional,
)
from .divergence import PHI_PRESETS, PhiFunction, cd_general, cd_values, phi_values

DEFAULT_STEP = 0.05
POINT_CAP = 10**6
TOL = 1e-9


class OracleError(ModelError):
    pass


def compositions(total: int, weights: Sequence[int]):
    """Nonnegative integer vectors ``n`` with ``sum(w * n) == total``."""
    if not weights:
        if total == 0:
            yield ()
        return
    w, rest = weights[0], weights[1:]
    if not rest:
        if total % w == 0:
            yield (total // w,)
        return
    for n in range(total // w + 1):
        for tail in compositions(total - n * w, rest):
            yield (n,) + tail


@dataclass(frozen=True)
class SimplexGrid:
    """Valid completions of one block once its varied member is fixed.

    ``points`` holds full block vectors.  The residual mass is cut into
    ``m = ceil(R / h)`` equal units so every point sums to one up to a single
    rounding.  Scheme candidates are appended after the grid proper.
    """

    block: Block
    index: int
    new_value: float
    step: float
    points: np.ndarray
    n_grid: int

    @classmethod
    def build(cls, block: Block, values: np.ndarray, index: int, new_value: float,
              step: float = DEFAULT_STEP,
              extra: Sequence[np.ndarray] = ()) -> SimplexGrid:
        if step <= 0:
            raise ValueError("grid step must be positive")
        w = list(block.weights)
        residual = 1.0 - w[index] * new_value
        if residual < -TOL:
            raise CovariationError(f"new value {new_value} leaves negative mass")
        residual = max(residual, 0.0)
        others = [j for j in range(block.size) if j != index]
        m = max(1, math.ceil(residual / step - 1e-12))
        unit = residual / m
        rows = []
        for comp in compositions(m, [w[j] for j in others]):
            row = np.empty(block.size)
            row[index] = new_value
            row[others] = np.array(comp) * unit
            rows.append(row)
        n_grid = len(rows)
        rows.extend(np.asarray(e, dtype=float) for e in extra)
        return cls(block, index, new_value, step, np.array(rows), n_grid)

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class OptimalityVerdict:
    scheme_value: float
    grid_min: float
    minimizer: np.ndarray
    margin: float
    passed: bool
    n_points: int
    scheme_values: dict

    def summary(self) -> str:
        state = "PASS" if self.passed else "FAIL"
        return (f"{state} scheme={self.scheme_value:.12g} grid_min={self.grid_min:.12g} "
                f"margin={self.margin:.3g} points={self.n_points}")


def _candidates(block: Block, values: np.ndarray, i: int, x: float) -> dict[str, np.ndarray]:
    out = {}
    vals = values[list(block.members)]
    for scheme in NAMED_SCHEMES:
        try:
            out[scheme.name] = covary(scheme, vals, i, x, block.weights)
        except CovariationError:
            pass
    return out


def _grids(model: Model, req: Sequence[Variation], values: np.ndarray, step: float):
    grids = []
    seen = set()
    for var in req:
        if var.value is None:
            raise ModelError(f"no new value for {model.space.label(var.param)!r}")
        block = model.space.block_of(var.param)
        if block.id in seen:
            raise ModelError("variation request varies two parameters of the same block")
        seen.add(block.id)
        i = block.position(var.param)
        extra = list(_candidates(block, values, i, var.value).values())
        grids.append(SimplexGrid.build(block, values, i, var.value, step, extra))
    total = math.prod(len(g) for g in grids)
    return grids, total


def grid_minimum(model: Model, req: Sequence[Variation], objective: Callable,
                 step: float = DEFAULT_STEP, values: np.ndarray | None = None,
                 cap: int = POINT_CAP, chunk: int = 20000):
    """Minimum of ``objective(p, Q)`` over the product grid; returns (min, argmin, count)."""
    values = model.values if values is None else np.asarray(values, dtype=float)
    grids, total = _grids(model, req, values, step)
    if total > cap:
        raise OracleError(f"grid has {total} points, above the cap of {cap}; use a coarser step")
    p = model.atom_probabilities(values)
    best, arg = math.inf, None
    combos = itertools.product(*(range(len(g)) for g in grids))
    while True:
        batch = list(itertools.islice(combos, chunk))
        if not batch:
            break
        assign = np.tile(values, (len(batch), 1))
        for k, g in enumerate(grids):
            sel = np.array([c[k] for c in batch])
            assign[:, list(g.block.members)] = g.points[sel]
        scores = objective(p, atom_values(model.poly, assign))
        j = int(np.argmin(scores))
        if scores[j] < best or arg is None:
            best, arg = float(scores[j]), assign[j].copy()
    return best, arg, total


def _scheme_scores(model, req, values, objective):
    p = model.atom_probabilities(values)
    out = {}
    for scheme in NAMED_SCHEMES:
        try:
            varied = apply_variation(model.space, values, req, scheme)
        except CovariationError:
            continue
        out[scheme.name] = float(objective(p, model.atom_probabilities(varied)[None, :])[0])
    return out


def _verdict(model, req, objective, step, values, scheme: CovariationScheme, tol):
    values = model.values if values is None else np.asarray(values, dtype=float)
    best, arg, n = grid_minimum(model, req, objective, step, values)
    scores = _scheme_scores(model, req, values, objective)
    if scheme.name not in scores:
        raise CovariationError(f"{scheme} scheme is not admissible for this variation")
    value = scores[scheme.name]
    margin = 0.0 if value == best else value - best
    return OptimalityVerdict(value, best, arg, margin, bool(margin <= tol), n, scores)


def verify_cd_optimality(model: Model, req: Sequence[Variation], step: float = DEFAULT_STEP,
                         values: np.ndarray | None = None, tol: float = TOL) -> OptimalityVerdict:
    """Compare the proportional CD distance with the grid minimum."""
    return _verdict(model, req, cd_values, step, values, proportional, tol)


def verify_phi_optimality(model: Model, req: Sequence[Variation], phi: PhiFunction | str,
                          step: float = DEFAULT_STEP, values: np.ndarray | None = None,
                          tol: float = TOL) -> OptimalityVerdict:
    """Compare the proportional phi-divergence with the grid minimum."""
    phi = PHI_PRESETS[phi] if isinstance(phi, str) else phi
    return _verdict(model, req, lambda p, q: phi_values(p, q, phi), step, values, proportional, tol)


def find_cd_counterexample(model: Model, req: Sequence[Variation], step: float = DEFAULT_STEP,
                           values: np.ndarray | None = None, tol: float = TOL) -> OptimalityVerdict:
    """Search for a covariation with smaller CD distance than the proportional one.

    A failed verdict documents a counterexample; its minimizer is the witness.
    Scheme values are computed through the reduced monomial set.
    """
    if len(req) != 1:
        raise ModelError("counterexample search handles one varied block")
    verdict = verify_cd_optimality(model, req, step, values, tol)
    vals = model.values if values is None else np.asarray(values, dtype=float)
    general = {}
    for scheme in NAMED_SCHEMES:
        try:
            general[scheme.name] = cd_general(model, req, scheme, values=vals).value
        except CovariationError:
            pass
    return OptimalityVerdict(verdict.scheme_value, verdict.grid_min, verdict.minimizer,
                             verdict.margin, verdict.passed, verdict.n_points, general)


# -- random models -------------------------------------------------------------

def random_bn(rng: np.random.Generator, max_vars: int = 4, max_states: int = 3) -> BNSpec:
    """Random network with Dirichlet(1, ..., 1) CPT columns.

    Variables are named ``Y1..Yn``; each picks a random subset of earlier
    variables (at most two) as parents.
    """
    n = int(rng.integers(2, max_vars + 1))
    variables = tuple((f"Y{k + 1}", int(rng.integers(2, max_states + 1))) for k in range(n))
    card = dict(variables)
    parents = {}
    cpts = {}
    for k, (name, c) in enumerate(variables):
        earlier = [v for v, _ in variables[:k]]
        size = int(rng.integers(0, min(2, len(earlier)) + 1))
        pa = tuple(sorted(rng.choice(earlier, size=size, replace=False).tolist(),
                          key=earlier.index)) if size else ()
        parents[name] = pa
        table = {}
        for config in itertools.product(*(range(card[p]) for p in pa)):
            table[config] = tuple(float(v) for v in rng.dirichlet(np.ones(c)))
        cpts[name] = table
    return BNSpec(variables, parents, cpts)


def random_variation(model: Model, rng: np.random.Generator, max_blocks: int = 3) -> tuple[Variation, ...]:
    """One variable, one to three of its CPT columns, a non-largest member each.

    New values are drawn inside the order-preserving range so every named
    scheme accepts them.
    """
    by_var: dict[str, list[Block]] = {}
    for b in model.space.blocks:
        name = model.space.label(b.members[0]).split("_")[1]
        by_var.setdefault(name, []).append(b)
    names = sorted(by_var)
    blocks = by_var[names[int(rng.integers(len(names)))]]
    k = int(rng.integers(1, min(max_blocks, len(blocks)) + 1))
    chosen = rng.choice(len(blocks), size=k, replace=False)
    req = []
    for c in sorted(chosen.tolist()):
        b = blocks[c]
        vals = model.values[list(b.members)]
        order = order_permutation(vals, -1)
        i = int(rng.choice(order[:-1]))
        pos = order_permutation(vals, i).index(i)
        if pos == b.size - 1:
            i = order[0]
            pos = order_permutation(vals, i).index(i)
        hi = 1.0 / (b.size - pos)
        x = float(rng.uniform(0.02, 0.98) * hi)
        req.append(Variation(b.members[i], x))
    return tuple(req)


@dataclass(frozen=True)
class RandomCase:
    seed: int
    spec: BNSpec
    model: Model
    req: tuple[Variation, ...]


def random_suite(n: int = 50, seed: int = 0) -> list[RandomCase]:
    """``n`` reproducible (model, variation) pairs; case ``k`` uses seed ``seed + k``."""
    out = []
    for k in range(n):
        rng = np.random.default_rng(seed + k)
        spec = random_bn(rng)
        model = compile_bn(spec)
        out.append(RandomCase(seed + k, spec, model, random_variation(model, rng)))
    return out
