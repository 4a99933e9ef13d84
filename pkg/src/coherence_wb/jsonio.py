"""JSON encoding of matrices, theories, processes, resources and results.

Matrices are ``{"rows": r, "cols": c, "data": [[re, im], ...]}`` in row-major
order. Floats go through ``repr`` so every entry round-trips bit for bit.
Plain nested lists of real numbers are accepted on input as well.
"""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import convertibility as cv
from . import decoherence as dc
from . import process as pr
from .errors import InputError
from .free_sets import CDIO, CTIO, DIO, MECH, MIO, TIO, FreeSetSpec, parse_kind
from .process import AtomicSystem, QuantumProcess, SystemLabel


# matrices

def encode_matrix(m) -> dict:
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    flat = m.reshape(-1)
    return {"rows": int(m.shape[0]), "cols": int(m.shape[1]),
            "data": [[float(z.real), float(z.imag)] for z in flat]}


def decode_matrix(obj) -> np.ndarray:
    if isinstance(obj, dict):
        try:
            rows, cols, data = int(obj["rows"]), int(obj["cols"]), obj["data"]
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"matrix needs rows, cols and data: {exc}") from None
        if len(data) != rows * cols:
            raise InputError(f"matrix data has {len(data)} entries, expected {rows * cols}")
        try:
            vals = [complex(float(p[0]), float(p[1])) for p in data]
        except (TypeError, ValueError, IndexError):
            raise InputError("matrix entries must be [re, im] pairs") from None
        return np.array(vals, dtype=complex).reshape(rows, cols)
    try:
        arr = np.array(obj, dtype=complex)
    except (TypeError, ValueError):
        raise InputError("matrix must be an encoded object or a nested list of numbers") from None
    if arr.ndim != 2:
        raise InputError("matrix must be two-dimensional")
    return arr


def _require(obj: dict, key: str, where: str):
    if not isinstance(obj, dict) or key not in obj:
        raise InputError(f"{where}: missing field {key!r}")
    return obj[key]


def load_json(path: str) -> Any:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None


def dump_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=True) + "\n"


def write_atomic(path: str, text: str) -> None:
    """Write through a temporary file in the same directory, then rename."""
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# theories

@dataclass
class Theory:
    systems: dict[str, AtomicSystem]
    composites: list[SystemLabel]
    rule: str
    decoherence: dict[SystemLabel, QuantumProcess]
    groups: dict[str, dc.GroupRepresentation]
    mechanisms: dict[SystemLabel, dc.DecoherenceMechanism]
    ancillas: tuple[SystemLabel, ...] = ()
    group: str | None = None
    config: dict = field(default_factory=dict)

    def label(self, names) -> SystemLabel:
        return parse_label(names, self.systems)

    def family(self) -> dc.DecoherenceFamily:
        if not self.decoherence:
            raise InputError("theory declares no decoherence processes")
        decs = {l: dc.DecoherenceProcess(l, p) for l, p in self.decoherence.items()}
        mechs = {l: m for l, m in self.mechanisms.items() if l in decs}
        return dc.DecoherenceFamily(decs, self.rule, mechs)

    def representation(self) -> dc.GroupRepresentation:
        if not self.groups:
            raise InputError("theory declares no group representation")
        name = self.group or next(iter(self.groups))
        if name not in self.groups:
            raise InputError(f"unknown group {name!r}")
        return self.groups[name]

    def free_set(self, kind: str) -> FreeSetSpec:
        kind = parse_kind(kind)
        if kind in (MIO, DIO, CDIO):
            return FreeSetSpec(kind, self.family(), ancilla_systems=self.ancillas)
        if kind in (TIO, CTIO):
            return FreeSetSpec(kind, rep=self.representation(), ancilla_systems=self.ancillas)
        if not self.mechanisms:
            raise InputError("theory declares no decoherence mechanisms")
        return FreeSetSpec(MECH, mech=self.mechanisms, ancilla_systems=self.ancillas)


def parse_label(names, systems: dict[str, AtomicSystem]) -> SystemLabel:
    if isinstance(names, str):
        names = [names]
    try:
        return SystemLabel(tuple(systems[n] for n in names))
    except KeyError as exc:
        raise InputError(f"undeclared system {exc.args[0]!r}") from None
    except TypeError:
        raise InputError(f"bad system list {names!r}") from None


def _decoherence_entry(entry: dict, theory: Theory) -> tuple[SystemLabel, QuantumProcess]:
    where = "decoherence entry"
    sys = theory.label(_require(entry, "system", where))
    kind = entry.get("type", "dephasing")
    if kind == "dephasing":
        basis = decode_matrix(entry["basis"]) if "basis" in entry else np.eye(sys.dim)
        return sys, dc.make_dephasing(basis, sys).proc
    if kind == "block":
        return sys, dc.make_block_dephasing(_require(entry, "blocks", where), sys).proc
    if kind == "twirl":
        name = entry.get("group") or theory.group or next(iter(theory.groups), None)
        if name not in theory.groups:
            raise InputError(f"twirl refers to unknown group {name!r}")
        return sys, dc.twirl_process(theory.groups[name], sys)
    if kind == "identity":
        return sys, pr.identity(sys)
    if kind == "choi":
        return sys, QuantumProcess(sys, sys, decode_matrix(_require(entry, "choi", where)))
    if kind == "kraus":
        kraus = [decode_matrix(k) for k in _require(entry, "kraus", where)]
        return sys, pr.from_kraus(kraus, sys, sys, check=False)
    raise InputError(f"unknown decoherence type {kind!r}")


def _group_entry(entry: dict, theory: Theory) -> dc.GroupRepresentation:
    where = "group entry"
    factorize = bool(entry.get("factorize", False))
    if "generators" in entry:
        order = int(_require(entry, "order", where))
        gens = {theory.label(g["system"]): decode_matrix(g["matrix"]) for g in entry["generators"]}
        return dc.GroupRepresentation.cyclic(order, gens, factorize)
    unis = {theory.label(u["system"]): [decode_matrix(m) for m in u["matrices"]]
            for u in _require(entry, "unitaries", where)}
    n = len(next(iter(unis.values()))) if unis else 0
    elements = entry.get("elements") or [str(k) for k in range(n)]
    return dc.GroupRepresentation(tuple(elements), unis, entry.get("table"), factorize)


def _mechanism_entry(entry: dict, theory: Theory) -> dc.DecoherenceMechanism:
    where = "mechanism entry"
    sys = theory.label(_require(entry, "system", where))
    env = theory.label(_require(entry, "env", where))
    kind = entry.get("type", "choi")
    if kind == "reference_frame":
        name = entry.get("group") or theory.group or next(iter(theory.groups), None)
        if name not in theory.groups:
            raise InputError(f"mechanism refers to unknown group {name!r}")
        pointers = [decode_matrix(p) for p in _require(entry, "pointers", where)]
        return dc.make_reference_frame_mechanism(theory.groups[name], pointers, sys, env)
    if kind == "copy":
        return dc.make_copy_mechanism(sys, env)
    if kind == "choi":
        return dc.DecoherenceMechanism(sys, env, QuantumProcess(sys, sys + env, decode_matrix(entry["choi"])))
    raise InputError(f"unknown mechanism type {kind!r}")


def parse_theory(obj: Any) -> Theory:
    """Build a theory without validating its decoherence (see ``cmd_validate``)."""
    if not isinstance(obj, dict):
        raise InputError("theory must be a JSON object")
    systems = {}
    for s in _require(obj, "systems", "theory"):
        try:
            a = AtomicSystem(str(s["name"]), int(s["dim"]), bool(s.get("classical", False)))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"bad system entry {s!r}: {exc}") from None
        if a.name in systems:
            raise InputError(f"system {a.name!r} declared twice")
        systems[a.name] = a
    rule = obj.get("rule", dc.PRODUCT)
    if rule not in (dc.PRODUCT, dc.GLOBAL):
        raise InputError(f"rule must be {dc.PRODUCT!r} or {dc.GLOBAL!r}")
    theory = Theory(systems, [], rule, {}, {}, {}, group=obj.get("group"), config=dict(obj.get("config", {})))
    theory.composites = [theory.label(c) for c in obj.get("composites", [])]
    theory.ancillas = tuple(theory.label(c) for c in obj.get("ancillas", []))
    try:
        for g in obj.get("groups", []):
            theory.groups[str(_require(g, "name", "group entry"))] = _group_entry(g, theory)
        for entry in obj.get("decoherence", []):
            label, proc = _decoherence_entry(entry, theory)
            if label in theory.decoherence:
                raise InputError(f"two decoherence processes declared on {label}")
            theory.decoherence[label] = proc
        for entry in obj.get("mechanisms", []):
            m = _mechanism_entry(entry, theory)
            theory.mechanisms[m.sys] = m
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed theory: {exc}") from None
    return theory


def load_theory(path: str) -> Theory:
    return parse_theory(load_json(path))


# processes and resources

def encode_label(label: SystemLabel) -> list[str]:
    return list(label.names)


def encode_process(f: QuantumProcess) -> dict:
    return {"input": encode_label(f.input), "output": encode_label(f.output), "choi": encode_matrix(f.choi)}


def decode_process(obj: dict, systems: dict[str, AtomicSystem]) -> QuantumProcess:
    where = "process"
    inp = parse_label(_require(obj, "input", where), systems)
    out = parse_label(obj.get("output", obj["input"]), systems)
    if "choi" in obj:
        return QuantumProcess(inp, out, decode_matrix(obj["choi"]))
    if "kraus" in obj:
        return pr.from_kraus([decode_matrix(k) for k in obj["kraus"]], inp, out, check=False)
    if "unitary" in obj:
        if inp != out:
            raise InputError("a unitary process needs equal input and output")
        return pr.unitary_channel(decode_matrix(obj["unitary"]), inp)
    raise InputError("process needs one of choi, kraus or unitary")


def load_process(path: str, theory: Theory) -> QuantumProcess:
    return decode_process(load_json(path), theory.systems)


def encode_resource(r: cv.Resource) -> dict:
    out: dict = {"variant": r.variant, "label": r.label}
    if r.variant in (cv.STATE, cv.EFFECT):
        out |= {"system": encode_label(r.sys), "matrix": encode_matrix(r.operator)}
    elif r.variant == cv.MEASUREMENT:
        out |= {"system": encode_label(r.sys), "effects": [encode_matrix(e) for e in r.elements]}
    else:
        out |= {"process": encode_process(r.proc)}
    return out


def decode_resource(obj: dict, theory: Theory, default_label: str = "") -> cv.Resource:
    where = "resource"
    variant = _require(obj, "variant", where)
    label = str(obj.get("label", default_label))
    if variant == cv.PROCESS:
        return cv.Resource.process(decode_process(_require(obj, "process", where), theory.systems), label)
    sys = theory.label(_require(obj, "system", where))
    if variant == cv.STATE:
        return cv.Resource.state(decode_matrix(_require(obj, "matrix", where)), sys, label)
    if variant == cv.EFFECT:
        return cv.Resource.effect(decode_matrix(_require(obj, "matrix", where)), sys, label)
    if variant == cv.MEASUREMENT:
        return cv.Resource.measurement([decode_matrix(e) for e in _require(obj, "effects", where)], sys, label)
    raise InputError(f"unknown resource variant {variant!r}")


# results

def encode_certificate(cert) -> dict | None:
    if cert is None:
        return None
    if isinstance(cert, QuantumProcess):
        return {"kind": "process", "process": encode_process(cert)}
    if isinstance(cert, cv.MeasurementCertificate):
        p = np.asarray(cert.post, dtype=float)
        return {"kind": "measurement", "pre": encode_process(cert.pre), "memory_dim": cert.memory.dim,
                "post": {"shape": list(p.shape), "data": [float(x) for x in p.reshape(-1)]}}
    return {"kind": "comb", "pre": encode_process(cert.pre), "post": encode_process(cert.post),
            "memory_dim": cert.memory.dim, "memory_mirror": None if cert.mirror is None else encode_label(cert.mirror)}


def decode_certificate(obj: dict | None, systems: dict[str, AtomicSystem]):
    if obj is None:
        return None
    kind = _require(obj, "kind", "certificate")
    if kind == "process":
        return decode_process(obj["process"], systems)
    e = int(obj["memory_dim"])
    if kind == "measurement":
        mem = SystemLabel.of(AtomicSystem("mem", e, classical=True))
        sys = dict(systems) | {"mem": mem.factors[0]}
        post = np.array(obj["post"]["data"], dtype=float).reshape(obj["post"]["shape"])
        return cv.MeasurementCertificate(decode_process(obj["pre"], sys), post, mem)
    mem = SystemLabel.of(AtomicSystem("mem", e))
    sys = dict(systems) | {"mem": mem.factors[0]}
    mirror = None if obj.get("memory_mirror") is None else parse_label(obj["memory_mirror"], systems)
    return cv.CombCertificate(decode_process(obj["pre"], sys), decode_process(obj["post"], sys), mem, mirror)


def _finite(x: float) -> float | None:
    return float(x) if np.isfinite(x) else None


def encode_result(res: cv.FeasibilityResult) -> dict:
    return {"status": res.status, "reason": res.reason, "iterations": int(res.iterations),
            "residual": _finite(res.residual), "details": res.details,
            "certificate": encode_certificate(res.certificate)}


def decode_result(obj: dict, systems: dict[str, AtomicSystem]) -> cv.FeasibilityResult:
    r = obj.get("residual")
    return cv.FeasibilityResult(obj["status"], decode_certificate(obj.get("certificate"), systems),
                                obj.get("reason", ""), int(obj.get("iterations", 0)),
                                float("nan") if r is None else float(r), dict(obj.get("details", {})))
