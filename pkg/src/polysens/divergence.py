"""CD distance and phi-divergences between original and varied models.

Every measure comes in an atomic form, computed from the two vectors of
atomic probabilities, and in structural forms that read the answer off the
varied blocks only.  The structural forms are what makes the analysis cheap;
the atomic forms serve as their reference.  Logarithms are natural.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import Model, ModelError, is_multilinear
from .covariation import CovariationScheme, Variation, apply_variation

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PhiFunction:
    """Convex ``phi`` with ``phi(1) = 0``.

    ``func`` must accept numpy arrays and return the limit value at ``x = 0``.
    ``slope_at_infinity`` is ``lim phi(x) / x`` and prices mass that appears
    on atoms the original model deems impossible.
    """

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    slope_at_infinity: float

    def __post_init__(self):
        at_one = float(self.func(np.array([1.0]))[0])
        if abs(at_one) > 1e-12:
            raise ValueError(f"phi({self.name}) must vanish at 1, got {at_one}")
        xs = np.linspace(0.05, 5.0, 60)
        mid = self.func((xs[:-1] + xs[1:]) / 2)
        chord = (self.func(xs[:-1]) + self.func(xs[1:])) / 2
        if np.any(mid > chord + 1e-12):
            log.warning("phi function %r fails the midpoint convexity check", self.name)

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=float))


def _xlogx(x):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)


def _neglog(x):
    with np.errstate(divide="ignore"):
        return -np.log(x)


def _jeffreys(x):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 0, (x - 1.0) * np.log(np.where(x > 0, x, 1.0)), np.inf)


KL_PQ = PhiFunction("kl_pq", _neglog, 0.0)
KL_QP = PhiFunction("kl_qp", _xlogx, math.inf)
TV = PhiFunction("tv", lambda x: np.abs(x - 1.0) / 2.0, 0.5)
J = PhiFunction("j", _jeffreys, math.inf)
PHI_PRESETS = {p.name: p for p in (KL_PQ, KL_QP, TV, J)}
MEASURES = ("cd",) + tuple(PHI_PRESETS)


@dataclass(frozen=True)
class DivergenceResult:
    value: float
    witness_max: int | None = None
    witness_min: int | None = None
    breakdown: tuple = field(default=())

    def __float__(self) -> float:
        return self.value


# -- atomic forms ------------------------------------------------------------

def ratios(p, q) -> np.ndarray:
    """Elementwise ``q / p`` along the last axis with ``0/0 = 1`` and ``x/0 = inf``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = q / p
    out = np.where((p == 0) & (q == 0), 1.0, out)
    return np.where((p == 0) & (q > 0), np.inf, out)


def log_ratios(p, q) -> np.ndarray:
    """``log(q / p)`` computed as a difference of logs so tiny masses do not overflow."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(q) - np.log(p)
    out = np.where((p == 0) & (q == 0), 0.0, out)
    return np.where((p == 0) & (q > 0), np.inf, out)


def _log_spread(lr: np.ndarray) -> np.ndarray:
    hi = lr.max(axis=-1)
    lo = lr.min(axis=-1)
    with np.errstate(invalid="ignore"):
        out = hi - lo
    return np.where(hi == lo, 0.0, out)


def _ratio_spread(r: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return _log_spread(np.log(r))


def cd_values(p, q) -> np.ndarray:
    """Vectorized CD distance; ``q`` may be a batch of rows."""
    return _log_spread(log_ratios(p, q))


def _check_pair(p, q):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"distributions differ in length: {p.shape} vs {q.shape}")
    return p, q


def cd_atomic(p, q) -> DivergenceResult:
    """CD distance between two vectors of atomic probabilities."""
    p, q = _check_pair(p, q)
    if p.size == 0:
        return DivergenceResult(0.0)
    lr = log_ratios(p, q)
    # argmax/argmin return the first index, which gives lowest-atom tie breaking
    return DivergenceResult(float(_log_spread(lr)), int(np.argmax(lr)), int(np.argmin(lr)))


def phi_terms(p, q, phi: PhiFunction) -> np.ndarray:
    """Per-atom contributions ``p * phi(q / p)`` with the zero conventions."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    p, q = np.broadcast_arrays(p, q)
    out = np.zeros(q.shape)
    pos = p > 0
    with np.errstate(over="ignore"):
        out[pos] = p[pos] * phi(q[pos] / p[pos])
    born = (p == 0) & (q > 0)
    if np.any(born):
        out[born] = q[born] * phi.slope_at_infinity if phi.slope_at_infinity != 0 else 0.0
    return out


def phi_values(p, q, phi: PhiFunction) -> np.ndarray:
    return phi_terms(p, q, phi).sum(axis=-1)


def phi_divergence(p, q, phi: PhiFunction | str) -> DivergenceResult:
    """``sum p * phi(q / p)`` with ``p`` the original and ``q`` the varied distribution."""
    phi = PHI_PRESETS[phi] if isinstance(phi, str) else phi
    p, q = _check_pair(p, q)
    terms = phi_terms(p, q, phi)
    return DivergenceResult(float(math.fsum(terms)) if np.all(np.isfinite(terms)) else math.inf)


# -- structural forms ----------------------------------------------------------

def _varied(model: Model, req: Sequence[Variation], scheme: CovariationScheme | None,
            values: np.ndarray | None, varied: np.ndarray | None):
    values = model.values if values is None else np.asarray(values, dtype=float)
    if varied is None:
        if scheme is None:
            raise ValueError("either a scheme or a varied assignment is required")
        varied = apply_variation(model.space, values, req, scheme)
    return values, np.asarray(varied, dtype=float)


def _blocks(model: Model, req: Sequence[Variation]):
    blocks = [model.space.block_of(v.param) for v in req]
    if len({b.id for b in blocks}) != len(blocks):
        raise ModelError("variation request varies two parameters of the same block")
    return blocks


def _require_single_cpt(model: Model, blocks) -> None:
    if not is_multilinear(model.poly):
        raise ModelError("model is not multilinear; use cd_general")
    owner = {m: b.id for b in blocks for m in b.members}
    for term in model.poly.terms:
        if len({owner[k] for k, _ in term.exponents if k in owner}) > 1:
            raise ModelError("varied blocks share a monomial; not a single full CPT analysis")


def _member_ratios(values, varied, blocks):
    idx = [m for b in blocks for m in b.members]
    return idx, ratios(values[idx], varied[idx])


def cd_block(model: Model, req: Sequence[Variation], scheme: CovariationScheme | None = None, *,
             values: np.ndarray | None = None, varied: np.ndarray | None = None) -> DivergenceResult:
    """CD distance read off the varied blocks of a multilinear model.

    Witnesses are indeterminate ids rather than atoms.
    """
    blocks = _blocks(model, req)
    _require_single_cpt(model, blocks)
    values, varied = _varied(model, req, scheme, values, varied)
    idx, r = _member_ratios(values, varied, blocks)
    per_block = []
    start = 0
    for b in blocks:
        chunk = r[start:start + b.size]
        per_block.append((model.space.label(b.members[0]), float(chunk.max()), float(chunk.min())))
        start += b.size
    return DivergenceResult(float(_ratio_spread(r)), idx[int(np.argmax(r))], idx[int(np.argmin(r))],
                            tuple(per_block))


def cd_proportional_closed(model: Model, req: Sequence[Variation], *,
                           values: np.ndarray | None = None) -> DivergenceResult:
    """Closed-form CD distance under proportional covariation.

    Per block only two ratios matter: the varied member's own and the common
    factor applied to every other member.
    """
    blocks = _blocks(model, req)
    _require_single_cpt(model, blocks)
    values = model.values if values is None else np.asarray(values, dtype=float)
    rs = []
    for var, b in zip(req, blocks):
        if var.value is None:
            raise ModelError(f"no new value for {model.space.label(var.param)!r}")
        theta = values[var.param]
        w = b.weights[b.position(var.param)]
        if theta <= 0.0 or w * theta >= 1.0:
            raise ModelError("closed form needs the varied parameter strictly inside (0, 1)")
        rs += [var.value / theta, (1.0 - w * var.value) / (1.0 - w * theta)]
    return DivergenceResult(float(_ratio_spread(np.array(rs))))


def phi_decomposition(model: Model, req: Sequence[Variation], scheme: CovariationScheme | None,
                      phi: PhiFunction | str, *, values: np.ndarray | None = None,
                      varied: np.ndarray | None = None) -> DivergenceResult:
    """Phi-divergence as a weighted sum of block divergences.

    Each varied block contributes its own divergence times a constant: the
    total mass of the atoms through one of its entries once that entry is
    divided out (the parent-context probability for a network CPT column).
    The breakdown lists ``(label, block divergence, constant)`` per block.
    """
    phi = PHI_PRESETS[phi] if isinstance(phi, str) else phi
    blocks = _blocks(model, req)
    _require_single_cpt(model, blocks)
    values, varied = _varied(model, req, scheme, values, varied)
    owner = {m: (j, b.position(m)) for j, b in enumerate(blocks) for m in b.members}
    cof = [np.zeros(b.size) for b in blocks]
    for term in model.poly.terms:
        hit = None
        prod = 1.0
        for k, e in term.exponents:
            if k in owner:
                hit = owner[k]
            else:
                prod *= values[k] ** e
        if hit is not None:
            cof[hit[0]][hit[1]] += prod

    total = 0.0
    breakdown = []
    for j, b in enumerate(blocks):
        w = np.array(b.weights, dtype=float)
        per_entry = cof[j] / w
        const = float(per_entry[0])
        if np.any(np.abs(per_entry - const) > 1e-9 * max(1.0, abs(const))):
            raise ModelError(
                f"block of {model.space.label(b.members[0])!r} has unequal cofactor masses; "
                "the decomposition does not apply"
            )
        members = list(b.members)
        block_div = float(np.sum(w * phi_terms(values[members], varied[members], phi)))
        breakdown.append((model.space.label(b.members[0]), block_div, const))
        if const > 0.0:
            total += block_div * const
    return DivergenceResult(total, breakdown=tuple(breakdown))


# -- non-multilinear models --------------------------------------------------------

def phi_set(model: Model, block_ref: int | str) -> list[tuple[int, ...]]:
    """Distinct block-exponent vectors of the monomials that involve the block.

    This is the reduced monomial set: terms without block members are
    dropped and every other indeterminate is set to one.
    """
    block = model.space.block_of(block_ref)
    pos = {m: s for s, m in enumerate(block.members)}
    seen: dict[tuple[int, ...], None] = {}
    for term in model.poly.terms:
        alpha = [0] * block.size
        for k, e in term.exponents:
            if k in pos:
                alpha[pos[k]] = e
        if any(alpha):
            seen.setdefault(tuple(alpha), None)
    return list(seen)


def _monomial_ratios(phis: Sequence[tuple[int, ...]], old: np.ndarray, new: np.ndarray) -> np.ndarray:
    a = np.array(phis, dtype=float)
    num = np.prod(new[None, :] ** a, axis=1)
    den = np.prod(old[None, :] ** a, axis=1)
    return ratios(den, num)


def cd_general(model: Model, req: Sequence[Variation], scheme: CovariationScheme | None = None, *,
               values: np.ndarray | None = None, varied: np.ndarray | None = None) -> DivergenceResult:
    """CD distance of a one-way variation through the reduced monomial set.

    Works for any model.  Witnesses are positions in :func:`phi_set`.  When
    some atom misses the block entirely its ratio of one is included.
    """
    if len(req) != 1:
        raise ModelError("the general procedure handles one varied block at a time")
    values, varied = _varied(model, req, scheme, values, varied)
    block = model.space.block_of(req[0].param)
    phis = phi_set(model, req[0].param)
    members = list(block.members)
    r = _monomial_ratios(phis, values[members], varied[members])
    members_set = set(members)
    if any(not any(k in members_set for k, _ in t.exponents) for t in model.poly.terms):
        r_all = np.append(r, 1.0)
    else:
        r_all = r
    return DivergenceResult(float(_ratio_spread(r_all)), int(np.argmax(r)), int(np.argmin(r)),
                            tuple(zip(phis, r.tolist())))


def cd_general_proportional_closed(model: Model, req: Sequence[Variation], *,
                                   values: np.ndarray | None = None) -> DivergenceResult:
    """Proportional closed form over the reduced monomial set.

    Each monomial's ratio is ``k ** n_rest * (x / theta) ** n_own`` where
    ``k`` is the proportional factor, ``n_own`` the exponent of the varied
    parameter and ``n_rest`` that of the other block members.
    """
    if len(req) != 1:
        raise ModelError("the general procedure handles one varied block at a time")
    var = req[0]
    if var.value is None:
        raise ModelError(f"no new value for {model.space.label(var.param)!r}")
    values = model.values if values is None else np.asarray(values, dtype=float)
    block = model.space.block_of(var.param)
    i = block.position(var.param)
    w = block.weights[i]
    theta = values[var.param]
    if theta <= 0.0 or w * theta >= 1.0:
        raise ModelError("closed form needs the varied parameter strictly inside (0, 1)")
    k = (1.0 - w * var.value) / (1.0 - w * theta)
    own = var.value / theta
    vals = values[list(block.members)]
    rs = []
    for alpha in phi_set(model, var.param):
        if any(e and vals[s] == 0.0 for s, e in enumerate(alpha)):
            rs.append(1.0)  # zero before and after: 0/0
            continue
        rest = sum(e for s, e in enumerate(alpha) if s != i)
        rs.append(k ** rest * own ** alpha[i])
    members = set(block.members)
    if any(not any(m in members for m, _ in t.exponents) for t in model.poly.terms):
        rs.append(1.0)
    return DivergenceResult(float(_ratio_spread(np.array(rs))))


def measure_value(model: Model, req: Sequence[Variation], scheme: CovariationScheme,
                  measure: str, values: np.ndarray | None = None) -> DivergenceResult:
    """Dispatch by measure name, using atomic forms so any model is accepted."""
    values = model.values if values is None else np.asarray(values, dtype=float)
    varied = apply_variation(model.space, values, req, scheme)
    p = model.atom_probabilities(values)
    q = model.atom_probabilities(varied)
    if measure == "cd":
        return cd_atomic(p, q)
    if measure in PHI_PRESETS:
        return phi_divergence(p, q, PHI_PRESETS[measure])
    raise ValueError(f"unknown measure {measure!r}; choose from {', '.join(MEASURES)}")
