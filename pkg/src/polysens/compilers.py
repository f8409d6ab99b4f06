"""Compile network descriptions into interpolating polynomials.

Three model families are supported: plain Bayesian networks, context-specific
networks (a network plus indeterminate merges) and stationary first-order
dynamic networks unrolled to a finite horizon.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import (
    TOL,
    Block,
    Indeterminate,
    Model,
    ModelError,
    Monomial,
    ParameterSpace,
    Polynomial,
)

Config = tuple[int, ...]


@dataclass(frozen=True)
class BNSpec:
    """Variables in topological order, parent lists and CPT columns.

    ``cpts[name][config]`` is the distribution of ``name`` given the parent
    configuration ``config`` (values listed in ``parents[name]`` order).
    """

    variables: tuple[tuple[str, int], ...]
    parents: Mapping[str, tuple[str, ...]]
    cpts: Mapping[str, Mapping[Config, tuple[float, ...]]]

    def __post_init__(self):
        seen: dict[str, int] = {}
        for name, card in self.variables:
            if name in seen:
                raise ModelError(f"duplicate variable {name!r}")
            if card < 1:
                raise ModelError(f"variable {name!r} has cardinality {card}")
            for p in self.parents.get(name, ()):
                if p not in seen:
                    raise ModelError(f"parent {p!r} of {name!r} is not an earlier variable")
            seen[name] = card
            _check_columns(name, card, [seen[p] for p in self.parents.get(name, ())],
                           self.cpts.get(name))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.variables)

    @property
    def card(self) -> dict[str, int]:
        return dict(self.variables)


@dataclass(frozen=True)
class MergeGroup:
    label: str
    members: tuple[str, ...]


@dataclass(frozen=True)
class MergeSpec:
    groups: tuple[MergeGroup, ...] = ()


@dataclass(frozen=True)
class DBNSpec:
    """Initial network for slice 1 and a two-slice transition.

    Transition parents refer to variables of the previous slice only, so the
    transition has no intra-slice edges by construction.
    """

    initial: BNSpec
    parents: Mapping[str, tuple[str, ...]]
    cpts: Mapping[str, Mapping[Config, tuple[float, ...]]]

    def __post_init__(self):
        card = self.initial.card
        for name, c in self.initial.variables:
            for p in self.parents.get(name, ()):
                if p not in card:
                    raise ModelError(f"transition parent {p!r} of {name!r} is unknown")
            _check_columns(name, c, [card[p] for p in self.parents.get(name, ())],
                           self.cpts.get(name))


def _check_columns(name, card, parent_cards, table):
    if table is None:
        raise ModelError(f"no CPT for variable {name!r}")
    for config in itertools.product(*(range(c) for c in parent_cards)):
        column = table.get(config)
        if column is None:
            raise ModelError(f"CPT of {name!r} lacks parent configuration {config}")
        if len(column) != card:
            raise ModelError(f"CPT column {name!r}{config} has {len(column)} entries, expected {card}")
        if any(v < -TOL or v > 1 + TOL for v in column):
            raise ModelError(f"CPT column {name!r}{config} has entries outside [0, 1]")
        if abs(sum(column) - 1.0) > TOL:
            raise ModelError(f"CPT column {name!r}{config} sums to {sum(column)!r}")


def param_label(prefix: str, var: str, value: int, parents: Sequence[str], config: Config) -> str:
    if not parents:
        return f"{prefix}_{var}_{value}"
    context = ",".join(f"{p}={v}" for p, v in zip(parents, config))
    return f"{prefix}_{var}_{value}|{context}"


class _SpaceBuilder:
    def __init__(self):
        self.labels: list[str] = []
        self.values: list[float] = []
        self.blocks: list[list[int]] = []

    def add_table(self, prefix, var, card, parents, parent_cards, table):
        ids = {}
        for config in itertools.product(*(range(c) for c in parent_cards)):
            members = []
            for value in range(card):
                ids[(value, config)] = len(self.labels)
                members.append(len(self.labels))
                self.labels.append(param_label(prefix, var, value, parents, config))
                self.values.append(float(table[config][value]))
            self.blocks.append(members)
        return ids

    def space(self) -> ParameterSpace:
        block_of = {m: b for b, members in enumerate(self.blocks) for m in members}
        inds = tuple(Indeterminate(k, lab, block_of[k]) for k, lab in enumerate(self.labels))
        return ParameterSpace(inds, tuple(Block(b, tuple(m)) for b, m in enumerate(self.blocks)))


def compile_bn(spec: BNSpec) -> Model:
    """One atom per joint outcome, each monomial the product of its CPT entries."""
    builder = _SpaceBuilder()
    card = spec.card
    lookups = []
    for name, c in spec.variables:
        parents = tuple(spec.parents.get(name, ()))
        ids = builder.add_table("theta", name, c, parents, [card[p] for p in parents], spec.cpts[name])
        cols = [spec.names.index(p) for p in parents]
        lookups.append((ids, cols))

    outcomes = tuple(itertools.product(*(range(c) for _, c in spec.variables)))
    terms = []
    for y in outcomes:
        factors = [ids[(y[i], tuple(y[c] for c in cols))] for i, (ids, cols) in enumerate(lookups)]
        terms.append(Monomial.from_factors(factors))
    return Model(
        space=builder.space(),
        poly=Polynomial(tuple(range(len(outcomes))), tuple(terms)),
        positions=spec.names,
        cardinalities=tuple(c for _, c in spec.variables),
        outcomes=outcomes,
        values=np.array(builder.values),
        kind="bn",
    )


def apply_merges(model: Model, merges: MergeSpec) -> Model:
    """Replace each merge group by one shared indeterminate.

    Blocks whose members become identical collapse into one block (a CSI-tree
    leaf).  A block whose members partly coincide keeps the shared member
    with a weight equal to the number of entries it covers.
    """
    if not merges.groups:
        return model
    space = model.space
    rep: dict[int, int] = {}
    new_label: dict[int, str] = {}
    for group in merges.groups:
        if len(group.members) < 2:
            raise ModelError(f"merge group {group.label!r} needs at least two members")
        ids = [space.resolve(m) for m in group.members]
        if any(k in rep for k in ids):
            raise ModelError(f"merge group {group.label!r} overlaps another group")
        vals = [model.values[k] for k in ids]
        if max(vals) - min(vals) > TOL:
            raise ModelError(f"merge group {group.label!r} joins parameters with different values {vals}")
        head = min(ids)
        for k in ids:
            rep[k] = head
        new_label[head] = group.label

    # Map old blocks through the substitution, collapsing identical ones.
    mapped_blocks: list[tuple[tuple[int, int], ...]] = []
    for block in space.blocks:
        counts: dict[int, int] = {}
        for m, w in zip(block.members, block.weights):
            r = rep.get(m, m)
            counts[r] = counts.get(r, 0) + w
        key = tuple(counts.items())
        if key not in mapped_blocks:
            mapped_blocks.append(key)
    owner: dict[int, int] = {}
    for b, key in enumerate(mapped_blocks):
        for r, _ in key:
            if r in owner:
                raise ModelError(
                    f"merges put {space.label(r)!r} into two incompatible blocks"
                )
            owner[r] = b

    survivors = sorted(owner)
    renumber = {old: new for new, old in enumerate(survivors)}
    labels = [new_label.get(old, space.label(old)) for old in survivors]
    if len(set(labels)) != len(labels):
        raise ModelError("merge labels clash with existing parameter labels")
    inds = tuple(Indeterminate(renumber[old], labels[renumber[old]], owner[old]) for old in survivors)
    blocks = tuple(
        Block(b, tuple(renumber[r] for r, _ in key), tuple(w for _, w in key))
        for b, key in enumerate(mapped_blocks)
    )
    full_map = {old: renumber[rep.get(old, old)] for old in range(space.size)}
    terms = tuple(t.substitute(full_map) for t in model.poly.terms)
    values = np.array([model.values[old] for old in survivors])
    new_space = ParameterSpace(inds, blocks)
    new_space.check(values)
    return Model(
        space=new_space,
        poly=Polynomial(model.poly.atoms, terms),
        positions=model.positions,
        cardinalities=model.cardinalities,
        outcomes=model.outcomes,
        values=values,
        kind="csbn" if model.kind == "bn" else model.kind,
    )


def unroll_dbn(spec: DBNSpec, horizon: int) -> Model:
    """Unroll a stationary dynamic network to ``horizon`` slices.

    Slices 2..T share the same transition indeterminates.  Atom coordinates
    are ordered by variable, then slice.
    """
    if horizon < 1:
        raise ModelError(f"horizon must be at least 1, got {horizon}")
    init = spec.initial
    names = init.names
    card = init.card
    builder = _SpaceBuilder()
    first = []
    for name, c in init.variables:
        parents = tuple(init.parents.get(name, ()))
        ids = builder.add_table("theta", name, c, parents, [card[p] for p in parents], init.cpts[name])
        first.append((ids, [names.index(p) for p in parents]))
    trans = []
    if horizon > 1:
        for name, c in init.variables:
            parents = tuple(spec.parents.get(name, ()))
            ids = builder.add_table("that", name, c, parents, [card[p] for p in parents], spec.cpts[name])
            trans.append((ids, [names.index(p) for p in parents]))

    positions = tuple(f"{n}@{t}" for n in names for t in range(1, horizon + 1))
    cards = tuple(card[n] for n in names for _ in range(horizon))

    def coord(var: int, t: int) -> int:
        return var * horizon + t

    outcomes = tuple(itertools.product(*(range(c) for c in cards)))
    terms = []
    for y in outcomes:
        factors = []
        for i, (ids, cols) in enumerate(first):
            factors.append(ids[(y[coord(i, 0)], tuple(y[coord(p, 0)] for p in cols))])
        for t in range(1, horizon):
            for i, (ids, cols) in enumerate(trans):
                factors.append(ids[(y[coord(i, t)], tuple(y[coord(p, t - 1)] for p in cols))])
        terms.append(Monomial.from_factors(factors))
    return Model(
        space=builder.space(),
        poly=Polynomial(tuple(range(len(outcomes))), tuple(terms)),
        positions=positions,
        cardinalities=cards,
        outcomes=outcomes,
        values=np.array(builder.values),
        kind="dbn",
    )


def _expand(model: Model, name: str) -> list[int]:
    if name in model.positions:
        return [model.positions.index(name)]
    hits = [k for k, p in enumerate(model.positions) if p.split("@")[0] == name]
    if not hits:
        raise ModelError(f"unknown variable {name!r}")
    return hits


def event_from_predicate(model: Model, constraints: Iterable[tuple[str, int]]) -> frozenset[int]:
    """Atoms satisfying every ``(position, value)`` constraint.

    A bare variable name on an unrolled model constrains every slice.
    """
    checks: list[tuple[int, int]] = []
    for name, value in constraints:
        for pos in _expand(model, name):
            if not 0 <= value < model.cardinalities[pos]:
                raise ModelError(f"value {value} out of range for {model.positions[pos]!r}")
            checks.append((pos, value))
    return frozenset(a for a, y in enumerate(model.outcomes) if all(y[p] == v for p, v in checks))


_TERM = re.compile(r"^\s*([A-Za-z_][\w]*)(?:@(\*|\d+(?:-\d+)?))?\s*=\s*(\d+)\s*$")


def parse_event(text: str | None) -> list[tuple[str, int]]:
    """Parse ``"Y1=1,Y2@1-3=1,Y3@*=0"`` into position constraints."""
    if text is None or not text.strip():
        return []
    out: list[tuple[str, int]] = []
    for part in text.split(","):
        match = _TERM.match(part)
        if not match:
            raise ModelError(f"cannot parse event term {part!r}")
        name, slices, value = match.group(1), match.group(2), int(match.group(3))
        if slices is None or slices == "*":
            out.append((name, value))
        elif "-" in slices:
            lo, hi = map(int, slices.split("-"))
            out.extend((f"{name}@{t}", value) for t in range(lo, hi + 1))
        else:
            out.append((f"{name}@{slices}", value))
    return out
