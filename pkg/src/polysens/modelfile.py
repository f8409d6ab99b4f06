"""JSON model files.

Schema::

    {
      "format": "bn" | "csbn" | "dbn",
      "variables": [{"name": "Y1", "states": 2}, ...],
      "parents": {"Y2": ["Y1"], ...},
      "cpts": {"Y1": {"": [0.6, 0.4]}, "Y2": {"Y1=0": [...], "Y1=1": [...]}},
      "merges": [{"label": "theta_Y2_12|Y1=0", "members": ["...", "..."]}],
      "transition": {"parents": {...}, "cpts": {...}},
      "horizon": 4
    }

``merges`` is required for ``csbn`` and optional for ``dbn`` (it then acts on
the first slice).  CPT keys list the parent assignment in the order of
``parents``.  Unknown top-level keys are ignored so fixtures can carry notes
and expected values.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .compilers import BNSpec, DBNSpec, MergeGroup, MergeSpec, apply_merges, compile_bn, unroll_dbn
from .core import Model, ModelError

FORMATS = ("bn", "csbn", "dbn")


class ModelFileError(ModelError):
    """Malformed model document; the message names the offending field."""


@dataclass(frozen=True)
class ModelFile:
    format: str
    bn: BNSpec
    merges: MergeSpec
    transition: DBNSpec | None = None
    horizon: int | None = None
    extra: dict | None = None

    def compile(self, horizon: int | None = None) -> Model:
        if self.format == "dbn":
            model = unroll_dbn(self.transition, horizon or self.horizon or 1)
            return _merge_first_slice(model, self.merges)
        model = compile_bn(self.bn)
        return apply_merges(model, self.merges) if self.merges.groups else model

    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "format": self.format,
            "variables": [{"name": n, "states": c} for n, c in self.bn.variables],
            "parents": {n: list(self.bn.parents.get(n, ())) for n in self.bn.names if self.bn.parents.get(n)},
            "cpts": _dump_cpts(self.bn.parents, self.bn.cpts, self.bn.names),
        }
        if self.merges.groups:
            doc["merges"] = [{"label": g.label, "members": list(g.members)} for g in self.merges.groups]
        if self.format == "dbn":
            doc["transition"] = {
                "parents": {n: list(p) for n, p in self.transition.parents.items() if p},
                "cpts": _dump_cpts(self.transition.parents, self.transition.cpts, self.bn.names),
            }
            doc["horizon"] = self.horizon
        return doc


def _merge_first_slice(model: Model, merges: MergeSpec) -> Model:
    if not merges.groups:
        return model
    merged = apply_merges(model, merges)
    return Model(merged.space, merged.poly, merged.positions, merged.cardinalities,
                 merged.outcomes, merged.values, kind="dbn")


def _dump_cpts(parents, cpts, names) -> dict[str, dict[str, list[float]]]:
    out = {}
    for name in names:
        pa = parents.get(name, ())
        out[name] = {
            ",".join(f"{p}={v}" for p, v in zip(pa, config)): list(col)
            for config, col in sorted(cpts[name].items())
        }
    return out


def _need(doc: dict, key: str, kind, where: str):
    if key not in doc:
        raise ModelFileError(f"{where}: missing field {key!r}")
    value = doc[key]
    if not isinstance(value, kind):
        raise ModelFileError(f"{where}.{key}: expected {getattr(kind, '__name__', kind)}")
    return value


_ASSIGN = re.compile(r"^\s*([A-Za-z_]\w*)\s*=\s*(\d+)\s*$")


def _parse_config(key: str, parents: tuple[str, ...], where: str) -> tuple[int, ...]:
    if not key.strip():
        if parents:
            raise ModelFileError(f"{where}: empty key but the variable has parents {list(parents)}")
        return ()
    found = {}
    for part in key.split(","):
        m = _ASSIGN.match(part)
        if not m:
            raise ModelFileError(f"{where}: cannot parse parent assignment {part!r}")
        found[m.group(1)] = int(m.group(2))
    if set(found) != set(parents):
        raise ModelFileError(f"{where}: key names {sorted(found)} but parents are {list(parents)}")
    return tuple(found[p] for p in parents)


def _parse_tables(doc: dict, names: list[str], where: str):
    raw_parents = doc.get("parents", {})
    if not isinstance(raw_parents, dict):
        raise ModelFileError(f"{where}.parents: expected an object")
    parents = {}
    for name, pa in raw_parents.items():
        if name not in names:
            raise ModelFileError(f"{where}.parents: unknown variable {name!r}")
        if not isinstance(pa, list) or not all(isinstance(p, str) for p in pa):
            raise ModelFileError(f"{where}.parents.{name}: expected a list of names")
        parents[name] = tuple(pa)
    raw_cpts = _need(doc, "cpts", dict, where)
    cpts = {}
    for name in names:
        if name not in raw_cpts:
            raise ModelFileError(f"{where}.cpts: no table for {name!r}")
        table = raw_cpts[name]
        if not isinstance(table, dict):
            raise ModelFileError(f"{where}.cpts.{name}: expected an object")
        cols = {}
        for key, col in table.items():
            at = f"{where}.cpts.{name}[{key!r}]"
            if not isinstance(col, list) or not all(isinstance(v, (int, float)) for v in col):
                raise ModelFileError(f"{at}: expected a list of numbers")
            cols[_parse_config(key, parents.get(name, ()), at)] = tuple(float(v) for v in col)
        cpts[name] = cols
    return {n: parents.get(n, ()) for n in names}, cpts


def parse_model(doc: Any) -> ModelFile:
    """Validate a decoded JSON document."""
    if not isinstance(doc, dict):
        raise ModelFileError("model document must be a JSON object")
    fmt = _need(doc, "format", str, "model")
    if fmt not in FORMATS:
        raise ModelFileError(f"model.format: {fmt!r} is not one of {FORMATS}")
    variables = []
    for k, v in enumerate(_need(doc, "variables", list, "model")):
        at = f"model.variables[{k}]"
        if not isinstance(v, dict):
            raise ModelFileError(f"{at}: expected an object")
        name = _need(v, "name", str, at)
        states = _need(v, "states", int, at)
        variables.append((name, states))
    names = [n for n, _ in variables]
    parents, cpts = _parse_tables(doc, names, "model")
    try:
        bn = BNSpec(tuple(variables), parents, cpts)
    except ModelError as exc:
        raise ModelFileError(f"model: {exc}") from None

    groups = []
    raw_merges = doc.get("merges", [])
    if fmt == "csbn" and not raw_merges:
        raise ModelFileError("model.merges: a csbn model needs at least one merge group")
    if fmt == "bn" and raw_merges:
        raise ModelFileError("model.merges: merges need format 'csbn'")
    if not isinstance(raw_merges, list):
        raise ModelFileError("model.merges: expected a list")
    for k, g in enumerate(raw_merges):
        at = f"model.merges[{k}]"
        if not isinstance(g, dict):
            raise ModelFileError(f"{at}: expected an object")
        members = _need(g, "members", list, at)
        groups.append(MergeGroup(_need(g, "label", str, at), tuple(members)))
    merges = MergeSpec(tuple(groups))

    transition = None
    horizon = None
    if fmt == "dbn":
        trans_doc = _need(doc, "transition", dict, "model")
        t_parents, t_cpts = _parse_tables(trans_doc, names, "model.transition")
        try:
            transition = DBNSpec(bn, t_parents, t_cpts)
        except ModelError as exc:
            raise ModelFileError(f"model.transition: {exc}") from None
        horizon = doc.get("horizon", 1)
        if not isinstance(horizon, int) or horizon < 1:
            raise ModelFileError("model.horizon: expected a positive integer")
    extra = {k: v for k, v in doc.items()
             if k not in ("format", "variables", "parents", "cpts", "merges", "transition", "horizon")}
    return ModelFile(fmt, bn, merges, transition, horizon, extra)


def load_model(path: str | Path) -> ModelFile:
    """Read and validate a model file, reporting JSON syntax errors by line."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        return parse_model(doc)
    except ModelFileError as exc:
        raise ModelFileError(f"{path}: {exc}") from None


def dump_model(mf: ModelFile, path: str | Path) -> None:
    Path(path).write_text(json.dumps(mf.to_dict(), indent=2) + "\n")


def fixture_path(name: str) -> Path:
    """Location of a bundled fixture such as ``medical_bn.json``."""
    return Path(__file__).parent / "fixtures" / name
