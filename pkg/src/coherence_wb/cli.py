"""Command-line front end.

Exit codes: 0 ok, 1 negative result or failed validation, 2 input error,
3 undecided conversion. Every report is one JSON document on stdout (or the
``--output`` file) and records the configuration it ran with.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass

from . import convertibility as cv
from . import decoherence as dc
from . import envelope as ev
from . import jsonio as io
from . import process as pr
from .errors import (BadBasis, BadMechanism, BadPartition, BadRepresentation, DimensionLimit, InputError,
                     InvalidDecoherence, MissingAssignment, NotCPTNI, PreconditionFailed, ShapeError,
                     UnsupportedQuery, WireMismatch)
from .free_sets import CDIO, CTIO, MECH, free_set_closure_test, membership, parse_kind
from .linalg import Tolerance
from .reports import ValidationReport

EXIT_OK, EXIT_NEGATIVE, EXIT_INPUT, EXIT_UNDECIDED = 0, 1, 2, 3

_INPUT_ERRORS = (InputError, ShapeError, BadBasis, BadPartition, BadRepresentation, BadMechanism, WireMismatch,
                 DimensionLimit, UnsupportedQuery, NotCPTNI)
_NEGATIVE_ERRORS = (MissingAssignment, InvalidDecoherence, PreconditionFailed)

DEFAULTS = {"tol_eq": 1e-9, "tol_feas": 1e-7, "max_iter": 5000, "samples": 100, "seed": 0, "set": "dio"}


@dataclass
class RunConfig:
    values: dict
    sources: dict

    @classmethod
    def resolve(cls, args: argparse.Namespace, *files: dict) -> "RunConfig":
        """Flags override file ``config`` sections, which override defaults."""
        values, sources = dict(DEFAULTS), {k: "default" for k in DEFAULTS}
        for f in files:
            for k, v in (f or {}).items():
                if k not in DEFAULTS:
                    raise InputError(f"unknown config key {k!r}")
                values[k], sources[k] = v, "file"
        for k in DEFAULTS:
            v = getattr(args, k, None)
            if v is not None:
                values[k], sources[k] = v, "flag"
        try:
            values["tol_eq"], values["tol_feas"] = float(values["tol_eq"]), float(values["tol_feas"])
            values["max_iter"], values["samples"] = int(values["max_iter"]), int(values["samples"])
            values["seed"] = int(values["seed"])
        except (TypeError, ValueError):
            raise InputError("config values have the wrong type") from None
        if min(values["tol_eq"], values["tol_feas"]) <= 0 or values["max_iter"] < 1 or values["samples"] < 1:
            raise InputError("tolerances, iteration counts and sample counts must be positive")
        values["set"] = parse_kind(str(values["set"]))
        return cls(values, sources)

    @property
    def tol(self) -> Tolerance:
        return Tolerance(eq_atol=self.values["tol_eq"], psd_atol=min(1e-9, self.values["tol_eq"]),
                         feas_atol=self.values["tol_feas"])

    @property
    def solver(self) -> cv.SolverConfig:
        return cv.SolverConfig(max_iter=self.values["max_iter"], feas_atol=self.values["tol_feas"],
                               seed=self.values["seed"], tol=self.tol)

    def to_dict(self) -> dict:
        return {"values": dict(self.values), "sources": dict(self.sources)}


class Outcome(Exception):
    """Carries a finished report and its exit code out of a command."""

    def __init__(self, report: dict, code: int):
        super().__init__(report.get("error", ""))
        self.report, self.code = report, code


def _theory_report(theory: io.Theory, tol: Tolerance) -> ValidationReport:
    rep = ValidationReport(threshold=tol.eq_atol)
    for label, proc in theory.decoherence.items():
        rep.merge(dc.validate_decoherence(proc, tol), prefix=f"decoherence[{label}].")
    for label, m in theory.mechanisms.items():
        rep.merge(m.validate(tol), prefix=f"mechanism[{label}].")
    if theory.decoherence and rep.valid:
        rep.merge(dc.check_family_rule(theory.family(), tol=tol), prefix="rule.")
    return rep


def _require_valid(theory: io.Theory, cfg: RunConfig, command: str):
    rep = _theory_report(theory, cfg.tol)
    if not rep.valid:
        raise Outcome({"command": command, "error": "theory failed validation", "validation": rep.to_dict(),
                       "config": cfg.to_dict()}, EXIT_NEGATIVE)


def cmd_validate(args) -> tuple[dict, int]:
    theory = io.load_theory(args.theory)
    cfg = RunConfig.resolve(args, theory.config)
    rep = _theory_report(theory, cfg.tol)
    report = {"command": "validate", "valid": rep.valid, "validation": rep.to_dict(),
              "groups": sorted(theory.groups), "config": cfg.to_dict()}
    return report, EXIT_OK if rep.valid else EXIT_NEGATIVE


def cmd_membership(args) -> tuple[dict, int]:
    theory = io.load_theory(args.theory)
    cfg = RunConfig.resolve(args, theory.config)
    _require_valid(theory, cfg, "membership")
    f = io.load_process(args.channel, theory)
    pr.from_choi(f.choi, f.input, f.output, cfg.tol)  # rejects non-CPTNI input
    spec = theory.free_set(cfg.values["set"])
    m = membership(f, spec, cfg.tol)
    report = {"command": "membership", "set": spec.kind, "member": m.member, "residual": m.residual,
              "witness": m.witness, "residuals": m.residuals, "config": cfg.to_dict()}
    return report, EXIT_OK if m.member else EXIT_NEGATIVE


def cmd_closure(args) -> tuple[dict, int]:
    theory = io.load_theory(args.theory)
    cfg = RunConfig.resolve(args, theory.config)
    n, seed, tol = cfg.values["samples"], cfg.values["seed"], cfg.tol
    suites = {}
    if theory.decoherence:
        fam = theory.family()
        try:
            suites["decohered-closure"] = dc.closure_property_test(fam, n, seed, tol).to_dict()
        except PreconditionFailed as exc:
            suites["decohered-closure"] = {"passed": False, "error": str(exc),
                                           "validation": dc.check_family_rule(fam, tol=tol).to_dict()}
        if suites["decohered-closure"]["passed"]:
            suites["cDIO-closure"] = free_set_closure_test(theory.free_set(CDIO), samples=n, seed=seed,
                                                           tol=tol).to_dict()
            singles = [l for l in theory.decoherence if len(l) == 1]
            labels = [ev.IdempotentLabel(l, dc.DecoherenceProcess(l, theory.decoherence[l]), "dec") for l in singles]
            labels += [ev.IdempotentLabel.plain(l) for l in singles]
            suites["dp-dio-closure"] = ev.dp_dio_closure_test(n, seed, tol, labels).to_dict()
    if theory.groups:
        suites["cTIO-closure"] = free_set_closure_test(theory.free_set(CTIO), samples=n, seed=seed,
                                                       tol=tol).to_dict()
    if theory.mechanisms:
        suites["mechanism-closure"] = free_set_closure_test(theory.free_set(MECH), samples=n, seed=seed,
                                                            tol=tol).to_dict()
    if not suites:
        raise InputError("theory declares nothing to test")
    ok = all(s["passed"] for s in suites.values())
    report = {"command": "closure", "passed": ok, "suites": suites, "config": cfg.to_dict()}
    return report, EXIT_OK if ok else EXIT_NEGATIVE


_STATUS_EXIT = {cv.FEASIBLE: EXIT_OK, cv.INFEASIBLE: EXIT_NEGATIVE, cv.UNDECIDED: EXIT_UNDECIDED}


def cmd_convert(args) -> tuple[dict, int]:
    theory = io.load_theory(args.theory)
    query = io.load_json(args.query)
    if not isinstance(query, dict):
        raise InputError("query must be a JSON object")
    file_cfg = dict(query.get("config", {}))
    if "set" in query:
        file_cfg["set"] = query["set"]
    cfg = RunConfig.resolve(args, theory.config, file_cfg)
    _require_valid(theory, cfg, "convert")
    src = io.decode_resource(io._require(query, "source", "query"), theory, "source")
    tgt = io.decode_resource(io._require(query, "target", "query"), theory, "target")
    q = cv.ConversionQuery(src, tgt, theory.free_set(cfg.values["set"]), cfg.solver)
    res = cv.can_convert(q)
    report = {"command": "convert", "set": q.free.kind, "variant": src.variant, **io.encode_result(res),
              "verified": cv.verify_certificate(res, q) if res.feasible else None, "config": cfg.to_dict()}
    return report, _STATUS_EXIT[res.status]


_MONOTONES = {"l1": cv.L1_COHERENCE, "trace": cv.TRACE}


def cmd_preorder(args) -> tuple[dict, int]:
    theory = io.load_theory(args.theory)
    doc = io.load_json(args.resources)
    if isinstance(doc, list):
        doc = {"resources": doc}
    if not isinstance(doc, dict):
        raise InputError("resources file must be a list or an object with a resources list")
    file_cfg = dict(doc.get("config", {}))
    if "set" in doc:
        file_cfg["set"] = doc["set"]
    cfg = RunConfig.resolve(args, theory.config, file_cfg)
    _require_valid(theory, cfg, "preorder")
    resources = [io.decode_resource(r, theory, f"r{i}") for i, r in enumerate(doc.get("resources", []))]
    variants = sorted({r.variant for r in resources})
    if len(variants) > 1:
        raise Outcome({"command": "preorder", "error": f"mixed resource variants {variants}",
                       "config": cfg.to_dict()}, EXIT_NEGATIVE)
    graph = cv.build_preorder(resources, theory.free_set(cfg.values["set"]), cfg.solver)
    names = graph.nodes
    monotones = {}
    for key in args.monotone or []:
        monotones[key] = cv.evaluate_monotone(_MONOTONES[key], graph)
    values = next(iter(monotones.values())).values if monotones else None
    dot = graph.to_dot(values)
    if args.dot:
        io.write_atomic(args.dot, dot)
    report = {"command": "preorder", "set": cfg.values["set"], "nodes": names,
              "edges": [{"from": names[i], "to": names[j], "status": r.status, "residual": io._finite(r.residual),
                         "reason": r.reason} for (i, j), r in sorted(graph.edges.items())],
              "monotones": {k: {"values": m.values, "checked": m.checked, "violations": [list(v) for v in m.violations]}
                            for k, m in monotones.items()},
              "dot": None if args.dot else dot, "config": cfg.to_dict()}
    return report, EXIT_OK


def _common(p: argparse.ArgumentParser):
    p.add_argument("--tol-eq", dest="tol_eq", type=float, help="equality tolerance (default 1e-9)")
    p.add_argument("--tol-feas", dest="tol_feas", type=float, help="feasibility tolerance (default 1e-7)")
    p.add_argument("--max-iter", dest="max_iter", type=int, help="solver iteration budget (default 5000)")
    p.add_argument("--samples", type=int, help="property-test samples (default 100)")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--set", help="free set: mio, dio, cdio, tio, ctio or mech (default dio)")
    p.add_argument("-o", "--output", help="write the report here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coherence-wb", description="Coherence resource theory workbench.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("validate", help="check decoherence processes, mechanisms and the composition rule")
    p.add_argument("theory")
    p.set_defaults(func=cmd_validate)
    p = sub.add_parser("membership", help="test a channel against a free set")
    p.add_argument("theory")
    p.add_argument("channel")
    p.set_defaults(func=cmd_membership)
    p = sub.add_parser("closure", help="run the randomized closure suites")
    p.add_argument("theory")
    p.set_defaults(func=cmd_closure)
    p = sub.add_parser("convert", help="decide a single resource conversion")
    p.add_argument("theory")
    p.add_argument("query")
    p.set_defaults(func=cmd_convert)
    p = sub.add_parser("preorder", help="build the conversion graph of a list of resources")
    p.add_argument("theory")
    p.add_argument("resources")
    p.add_argument("--dot", help="write the graph in DOT format here")
    p.add_argument("--monotone", action="append", choices=sorted(_MONOTONES),
                   help="evaluate a monotone on the graph (repeatable)")
    p.set_defaults(func=cmd_preorder)
    for p in sub.choices.values():
        _common(p)
    return parser


def run(argv=None) -> tuple[dict, int]:
    """Parse arguments and run a command; returns the report and the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return {"error": "bad command line"}, EXIT_INPUT if exc.code else EXIT_OK
    try:
        report, code = args.func(args)
    except Outcome as out:
        report, code = out.report, out.code
    except _NEGATIVE_ERRORS as exc:
        report, code = {"command": args.command, "error": f"{type(exc).__name__}: {exc}"}, EXIT_NEGATIVE
    except (*_INPUT_ERRORS, ValueError) as exc:
        report, code = {"command": args.command, "error": f"{type(exc).__name__}: {exc}"}, EXIT_INPUT
    report["exit_code"] = code
    text = io.dump_json(report)
    if getattr(args, "output", None):
        io.write_atomic(args.output, text)
    else:
        sys.stdout.write(text)
    return report, code


def main(argv=None) -> int:
    return run(argv)[1]


if __name__ == "__main__":
    sys.exit(main())
