"""Command-line interface: ``polysens {compile,sensitivity,cd,divergence,verify}``.

Exit codes: 0 success, 1 usage or model-file error, 2 analysis error,
3 verification verdict differing from the expected one.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import math
import sys
from typing import Sequence

from .compilers import event_from_predicate, parse_event
from .core import Model, ModelError, is_multilinear
from .covariation import NAMED_SCHEMES, CovariationError, apply_variation, make_request, scheme_from_name
from .divergence import MEASURES, PHI_PRESETS, cd_atomic, phi_divergence
from .modelfile import ModelFileError, dump_model, load_model
from .oracle import (
    DEFAULT_STEP,
    find_cd_counterexample,
    random_suite,
    verify_cd_optimality,
    verify_phi_optimality,
)
from .sensitivity import posterior_sensitivity, sensitivity_function

log = logging.getLogger("polysens")

EXIT_OK, EXIT_USAGE, EXIT_ANALYSIS, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _no_rows(written: int):
    if not written:
        raise ModelError("no sweep point is admissible under the requested schemes")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- argument helpers ------------------------------------------------------------

def parse_vary(text: str) -> tuple[str, list[float]]:
    """``label=lo:hi:step`` or ``label=value``; labels may themselves contain ``=``."""
    label, sep, spec = text.rpartition("=")
    if not sep or not label:
        raise UsageError(f"--vary expects label=lo:hi:step or label=value, got {text!r}")
    try:
        parts = [float(p) for p in spec.split(":")]
    except ValueError:
        raise UsageError(f"--vary {text!r}: non-numeric range") from None
    if len(parts) == 1:
        return label, parts
    if len(parts) != 3:
        raise UsageError(f"--vary {text!r}: expected lo:hi:step")
    lo, hi, step = parts
    if step <= 0 or hi < lo:
        raise UsageError(f"--vary {text!r}: need lo <= hi and a positive step")
    n = int(math.floor((hi - lo) / step + 1e-9))
    return label, [round(lo + k * step, 12) for k in range(n + 1)]


def _schemes(names: Sequence[str] | None):
    if not names or "all" in names:
        return list(NAMED_SCHEMES)
    try:
        return [scheme_from_name(n) for n in names]
    except (ValueError, OSError) as exc:
        raise UsageError(str(exc)) from None


def _event(model: Model, text: str | None) -> frozenset[int]:
    atoms = event_from_predicate(model, parse_event(text))
    if not atoms:
        log.warning("event %r matches no atom; values will be zero", text)
    return atoms


def _atom_name(model: Model, atom: int | None) -> str:
    if atom is None:
        return ""
    return ";".join(f"{p}={v}" for p, v in zip(model.positions, model.outcomes[atom]))


def _load(args) -> Model:
    mf = load_model(args.model)
    return mf.compile(getattr(args, "horizon", None))


def _sweep(model: Model, args):
    if not args.vary:
        raise UsageError("at least one --vary is required")
    parsed = [parse_vary(v) for v in args.vary]
    labels = [lab for lab, _ in parsed]
    for lab in labels:
        model.space.resolve(lab)
    return labels, list(itertools.product(*(vals for _, vals in parsed)))


class _Writer:
    def __init__(self, path: str | None):
        self.fh = open(path, "w", newline="") if path else sys.stdout
        self.writer = csv.writer(self.fh, lineterminator="\n")

    def row(self, values):
        self.writer.writerow(["%.12g" % v if isinstance(v, float) else v for v in values])

    def close(self):
        if self.fh is not sys.stdout:
            self.fh.close()


# -- commands ----------------------------------------------------------------

def summarize(model: Model, event: frozenset[int] | None = None) -> dict:
    degrees = model.poly.degrees()
    out = {
        "kind": model.kind,
        "atoms": model.n_atoms,
        "terms": len(model.poly),
        "degree": max(degrees, default=0),
        "min_degree": min(degrees, default=0),
        "multilinear": is_multilinear(model.poly),
        "indeterminates": model.space.size,
        "blocks": len(model.space.blocks),
        "total_probability": round(model.probability(model.all_atoms()), 12),
    }
    if event is not None:
        sub = model.restricted(event)
        out["event"] = {
            "terms": len(sub),
            "multilinear": is_multilinear(sub),
            "probability": model.probability(event),
        }
    return out


def cmd_compile(args) -> int:
    mf = load_model(args.model)
    if args.horizon is not None and mf.format == "dbn":
        mf = type(mf)(mf.format, mf.bn, mf.merges, mf.transition, args.horizon, mf.extra)
    model = mf.compile()
    summary = summarize(model, _event(model, args.event) if args.event else None)
    if args.emit:
        dump_model(mf, args.emit)
    if args.json:
        print(json.dumps(summary, indent=2, sort_keys=True))
    else:
        for key, value in summary.items():
            print(f"{key}: {value}")
    return EXIT_OK


def cmd_sensitivity(args) -> int:
    model = _load(args)
    labels, points = _sweep(model, args)
    req = make_request(model.space, {lab: None for lab in labels})
    target = _event(model, args.event)
    out = _Writer(args.out)
    out.row(labels + ["scheme", "measure", "value", "segment"])
    skipped = written = 0
    for scheme in _schemes(args.scheme):
        try:
            if args.given:
                func = posterior_sensitivity(model, target, _event(model, args.given), req, scheme)
                measure, pieces = "posterior", func.numerator
            else:
                func = sensitivity_function(model, target, req, scheme)
                measure, pieces = "probability", func
        except CovariationError as exc:
            log.warning("skipping the %s scheme: %s", scheme, exc)
            continue
        for pt in points:
            try:
                seg = pieces.segment(pt)
            except ValueError:
                skipped += 1
                continue
            out.row(list(pt) + [scheme.name, measure, float(func(pt)), seg])
            written += 1
    out.close()
    if skipped:
        log.warning("skipped %d points outside the admissible range of a scheme", skipped)
    _no_rows(written)
    return EXIT_OK


def _divergence_rows(args, measures: Sequence[str]) -> int:
    model = _load(args)
    labels, points = _sweep(model, args)
    p = model.atom_probabilities()
    out = _Writer(args.out)
    out.row(labels + ["scheme", "measure", "value", "witness_max", "witness_min"])
    skipped = written = 0
    for scheme in _schemes(args.scheme):
        for pt in points:
            req = make_request(model.space, dict(zip(labels, pt)))
            try:
                q = model.atom_probabilities(apply_variation(model.space, model.values, req, scheme))
            except CovariationError:
                skipped += 1
                continue
            for measure in measures:
                if measure == "cd":
                    res = cd_atomic(p, q)
                    wit = [_atom_name(model, res.witness_max), _atom_name(model, res.witness_min)]
                else:
                    res = phi_divergence(p, q, PHI_PRESETS[measure])
                    wit = ["", ""]
                out.row(list(pt) + [scheme.name, measure, float(res.value)] + wit)
                written += 1
    out.close()
    if skipped:
        log.warning("skipped %d points outside the admissible range of a scheme", skipped)
    _no_rows(written)
    return EXIT_OK


def cmd_cd(args) -> int:
    return _divergence_rows(args, ["cd"])


def cmd_divergence(args) -> int:
    return _divergence_rows(args, args.measure or ["kl_pq"])


def _verdict_line(tag: str, measure: str, verdict) -> str:
    schemes = " ".join(f"{k}={v:.9g}" for k, v in verdict.scheme_values.items())
    return f"{tag} measure={measure} {verdict.summary()} [{schemes}]"


def _check(model, req, measure: str, step: float):
    if measure == "cd":
        if is_multilinear(model.poly) or len(req) != 1:
            return verify_cd_optimality(model, req, step)
        return find_cd_counterexample(model, req, step)
    return verify_phi_optimality(model, req, PHI_PRESETS[measure], step)


def cmd_verify(args) -> int:
    measures = args.measure or ["cd"]
    failures = 0
    if args.random:
        if args.model:
            raise UsageError("--random and --model are mutually exclusive")
        cases = [(f"seed={c.seed}", c.model, c.req) for c in random_suite(args.random, args.seed)]
        expect = args.expect or "pass"
    else:
        if not args.model:
            raise UsageError("verify needs --model or --random")
        model = _load(args)
        labels, points = _sweep(model, args)
        if len(points) != 1:
            raise UsageError("verify takes single values: --vary label=value")
        req = make_request(model.space, dict(zip(labels, points[0])))
        cases = [("model", model, req)]
        expect = args.expect or ("pass" if is_multilinear(model.poly) else "any")
    for tag, model, req in cases:
        for measure in measures:
            verdict = _check(model, req, measure, args.grid_step)
            print(_verdict_line(tag, measure, verdict))
            if expect != "any" and verdict.passed != (expect == "pass"):
                failures += 1
    if failures:
        print(f"{failures} verdict(s) differ from the expected outcome '{expect}'", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="polysens",
                     description="Sensitivity analysis of discrete models through their interpolating polynomials.",
                     epilog="exit codes: 0 ok, 1 usage or model file error, 2 analysis error, 3 unexpected verdict")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def model_args(p, required=True):
        p.add_argument("--model", required=required, help="JSON model file")
        p.add_argument("--horizon", type=int, help="override the horizon of a dynamic model")

    def sweep_args(p):
        p.add_argument("--vary", action="append", metavar="LABEL=LO:HI:STEP",
                       help="parameter to vary; repeat for several blocks")
        p.add_argument("--scheme", action="append",
                       help="proportional, uniform, order-preserving, linear:<file> or all (default all)")
        p.add_argument("--out", help="CSV output path (default stdout)")

    p = sub.add_parser("compile", help="compile a model and print a summary")
    model_args(p)
    p.add_argument("--event", help='restrict to an event, e.g. "Y1=1,Y2@1-3=1"')
    p.add_argument("--emit", help="write the canonical model file here")
    p.add_argument("--json", action="store_true", help="machine-readable summary")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("sensitivity", help="sweep the sensitivity function of an event")
    model_args(p)
    p.add_argument("--event", required=True, help="target event")
    p.add_argument("--given", help="observed event for a posterior sensitivity function")
    sweep_args(p)
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("cd", help="sweep the CD distance")
    model_args(p)
    sweep_args(p)
    p.set_defaults(func=cmd_cd)

    p = sub.add_parser("divergence", help="sweep phi-divergences or the CD distance")
    model_args(p)
    sweep_args(p)
    p.add_argument("--measure", action="append", choices=MEASURES)
    p.set_defaults(func=cmd_divergence)

    p = sub.add_parser("verify", help="grid-search check that proportional covariation is optimal")
    model_args(p, required=False)
    p.add_argument("--vary", action="append", metavar="LABEL=VALUE")
    p.add_argument("--measure", action="append", choices=MEASURES)
    p.add_argument("--grid-step", type=float, default=DEFAULT_STEP)
    p.add_argument("--expect", choices=("pass", "fail", "any"),
                   help="expected verdict (default pass for multilinear models, any otherwise)")
    p.add_argument("--random", type=int, metavar="N", help="verify N seeded random networks instead")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ModelFileError, OSError) as exc:
        print(f"polysens: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ModelError, ValueError, ZeroDivisionError) as exc:
        print(f"polysens: analysis error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
