"""Parameter spaces, sparse atomic polynomials and events.

A model is described by its interpolating polynomial: one monomial per atom,
every coefficient equal to one.  Indeterminates are identified by dense
integer ids and grouped into blocks that must sum to one.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

log = logging.getLogger(__name__)

TOL = 1e-9


class ModelError(ValueError):
    """Raised for structurally invalid models, events or assignments."""


@dataclass(frozen=True)
class Indeterminate:
    id: int
    label: str
    block_id: int


@dataclass(frozen=True)
class Block:
    """A set of indeterminates constrained to sum to one.

    ``weights[k]`` counts how many CPT entries member ``k`` stands for.  It is
    1 everywhere except after a partial-independence merge, where a single
    indeterminate fills several entries of the same column, so the
    constraint becomes ``sum(w * theta) == 1``.
    """

    id: int
    members: tuple[int, ...]
    weights: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.members:
            raise ModelError(f"block {self.id} is empty")
        if not self.weights:
            object.__setattr__(self, "weights", (1,) * len(self.members))
        if len(self.weights) != len(self.members):
            raise ModelError(f"block {self.id}: weights do not match members")

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def is_unweighted(self) -> bool:
        return all(w == 1 for w in self.weights)

    def position(self, member: int) -> int:
        try:
            return self.members.index(member)
        except ValueError:
            raise ModelError(f"indeterminate {member} is not in block {self.id}") from None


@dataclass(frozen=True)
class ParameterSpace:
    indeterminates: tuple[Indeterminate, ...]
    blocks: tuple[Block, ...]
    _by_label: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for k, ind in enumerate(self.indeterminates):
            if ind.id != k:
                raise ModelError("indeterminate ids must be dense and ordered")
        seen: set[int] = set()
        for b, block in enumerate(self.blocks):
            if block.id != b:
                raise ModelError("block ids must be dense and ordered")
            for m in block.members:
                if m in seen:
                    raise ModelError(f"indeterminate {m} belongs to two blocks")
                if self.indeterminates[m].block_id != b:
                    raise ModelError(f"indeterminate {m} has inconsistent block id")
                seen.add(m)
        if len(seen) != len(self.indeterminates):
            raise ModelError("every indeterminate must belong to a block")
        self._by_label.update({ind.label: ind.id for ind in self.indeterminates})
        if len(self._by_label) != len(self.indeterminates):
            raise ModelError("indeterminate labels must be unique")

    @property
    def size(self) -> int:
        return len(self.indeterminates)

    def label(self, idx: int) -> str:
        return self.indeterminates[idx].label

    def resolve(self, ref: int | str) -> int:
        """Map a label or an id to an indeterminate id."""
        if isinstance(ref, (int, np.integer)):
            if not 0 <= ref < self.size:
                raise ModelError(f"unknown indeterminate id {ref}")
            return int(ref)
        try:
            return self._by_label[ref]
        except KeyError:
            raise ModelError(f"unknown parameter label {ref!r}") from None

    def block_of(self, ref: int | str) -> Block:
        return self.blocks[self.indeterminates[self.resolve(ref)].block_id]

    def check(self, values: Sequence[float], tol: float = TOL) -> np.ndarray:
        """Validate an assignment and return it as a float array."""
        values = np.asarray(values, dtype=float)
        if values.shape != (self.size,):
            raise ModelError(f"assignment has {values.shape} entries, expected {self.size}")
        if np.any(values < -tol) or np.any(values > 1 + tol):
            raise ModelError("assignment values must lie in [0, 1]")
        for block in self.blocks:
            total = sum(w * values[m] for m, w in zip(block.members, block.weights))
            if abs(total - 1.0) > tol:
                raise ModelError(
                    f"block {block.id} ({self.label(block.members[0])}, ...) sums to {total!r}"
                )
        return values


@dataclass(frozen=True)
class Monomial:
    """Sparse exponent vector, stored as sorted ``(id, degree)`` pairs."""

    exponents: tuple[tuple[int, int], ...] = ()

    @classmethod
    def from_factors(cls, factors: Iterable[int]) -> Monomial:
        counts: dict[int, int] = {}
        for f in factors:
            counts[f] = counts.get(f, 0) + 1
        return cls(tuple(sorted(counts.items())))

    @classmethod
    def from_dict(cls, exps: Mapping[int, int]) -> Monomial:
        return cls(tuple(sorted((int(k), int(v)) for k, v in exps.items() if v)))

    def as_dict(self) -> dict[int, int]:
        return dict(self.exponents)

    @property
    def degree(self) -> int:
        return sum(e for _, e in self.exponents)

    def exponent(self, idx: int) -> int:
        for k, e in self.exponents:
            if k == idx:
                return e
        return 0

    def value(self, values: Sequence[float]) -> float:
        out = 1.0
        for k, e in self.exponents:
            out *= values[k] ** e
        return out

    def substitute(self, mapping: Mapping[int, int]) -> Monomial:
        counts: dict[int, int] = {}
        for k, e in self.exponents:
            k = mapping.get(k, k)
            counts[k] = counts.get(k, 0) + e
        return Monomial.from_dict(counts)


@dataclass(frozen=True)
class Polynomial:
    """Interpolating polynomial restricted to a subset of atoms.

    ``atoms`` holds the ids of the atoms present and ``terms[k]`` the monomial
    of ``atoms[k]``.  Identical monomials of different atoms are kept apart.
    """

    atoms: tuple[int, ...]
    terms: tuple[Monomial, ...]

    def __post_init__(self):
        if len(self.atoms) != len(self.terms):
            raise ModelError("one term per atom required")

    def __len__(self) -> int:
        return len(self.terms)

    @property
    def indeterminates(self) -> set[int]:
        return {k for t in self.terms for k, _ in t.exponents}

    def degrees(self) -> list[int]:
        return [t.degree for t in self.terms]

    @cached_property
    def factor_matrix(self) -> np.ndarray:
        """Each term as a row of indeterminate ids repeated by degree.

        Rows are padded with -1; callers append a column of ones to the values.
        """
        width = max((t.degree for t in self.terms), default=0)
        out = np.full((len(self.terms), max(width, 1)), -1, dtype=np.intp)
        for r, t in enumerate(self.terms):
            c = 0
            for k, e in t.exponents:
                out[r, c:c + e] = k
                c += e
        return out


def evaluate(poly: Polynomial, values: Sequence[float], space: ParameterSpace | None = None) -> float:
    """Sum of the atomic monomials of ``poly`` at ``values``."""
    values = np.asarray(values, dtype=float)
    missing = poly.indeterminates - set(range(len(values)))
    if missing:
        raise ModelError(f"assignment has no value for indeterminates {sorted(missing)}")
    if space is not None:
        try:
            space.check(values)
        except ModelError as exc:
            log.warning("evaluating at an invalid assignment: %s", exc)
    return math.fsum(t.value(values) for t in poly.terms)


def atom_values(poly: Polynomial, values: np.ndarray) -> np.ndarray:
    """Atomic probabilities for one assignment (1-d) or a batch (2-d, rows)."""
    values = np.asarray(values, dtype=float)
    batched = values.ndim == 2
    vals = values if batched else values[None, :]
    padded = np.concatenate([vals, np.ones((vals.shape[0], 1))], axis=1)
    idx = poly.factor_matrix
    out = padded[:, idx].prod(axis=2)
    return out if batched else out[0]


def restrict(poly: Polynomial, event: Iterable[int]) -> Polynomial:
    """Sub-polynomial keeping exactly the atoms of ``event``."""
    event = set(event)
    unknown = event - set(poly.atoms)
    if unknown:
        raise ModelError(f"unknown atom ids {sorted(unknown)[:5]}")
    keep = [k for k, a in enumerate(poly.atoms) if a in event]
    return Polynomial(tuple(poly.atoms[k] for k in keep), tuple(poly.terms[k] for k in keep))


def is_multilinear(poly: Polynomial) -> bool:
    return all(e <= 1 for t in poly.terms for _, e in t.exponents)


def max_indeterminate_degree(poly: Polynomial, block: Block) -> int:
    members = set(block.members)
    return max((e for t in poly.terms for k, e in t.exponents if k in members), default=0)


@dataclass(frozen=True, eq=False)
class Model:
    """A compiled model: parameter space, polynomial and atom bookkeeping.

    ``positions`` names the coordinates of an atom (``"Y2"`` for a network,
    ``"Y2@3"`` for variable ``Y2`` at slice 3 of an unrolled dynamic
    network); ``outcomes[a]`` is the value tuple of atom ``a``.
    """

    space: ParameterSpace
    poly: Polynomial
    positions: tuple[str, ...]
    cardinalities: tuple[int, ...]
    outcomes: tuple[tuple[int, ...], ...]
    values: np.ndarray
    kind: str = "bn"

    @property
    def n_atoms(self) -> int:
        return len(self.outcomes)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def atom_probabilities(self, values: np.ndarray | None = None) -> np.ndarray:
        return atom_values(self.poly, self.values if values is None else values)

    def all_atoms(self) -> frozenset[int]:
        return frozenset(range(self.n_atoms))

    def restricted(self, event: Iterable[int]) -> Polynomial:
        return restrict(self.poly, event)

    def probability(self, event: Iterable[int], values: np.ndarray | None = None) -> float:
        return evaluate(self.restricted(event), self.values if values is None else values)
