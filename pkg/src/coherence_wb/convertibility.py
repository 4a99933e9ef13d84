"""Resource conversion queries and resource preorders.

A query asks whether a free process (or a free comb) turns a source
resource into a target resource. Answers are three-valued:

* ``Feasible`` carries a certificate that has been re-verified exactly,
* ``InfeasibleProven`` is only issued when a decoherence-preservation or
  closure argument rules the conversion out,
* ``Undecided`` covers everything else, including solver non-convergence.
"""
from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from . import linalg as la
from . import process as pr
from . import solver as sv
from .decoherence import DecoherenceFamily, DecoherenceProcess, GroupRepresentation, GLOBAL, PRODUCT, twirl_process
from .errors import MissingAssignment, ShapeError, UnsupportedQuery, WireMismatch
from .free_sets import (CDIO, CTIO, DIO, MECH, MIO, TIO, FreeSetSpec, cached_linear_system, is_member,
                        membership, sample_members)
from .linalg import DEFAULT_TOL, Tolerance
from .process import AtomicSystem, QuantumProcess, SystemLabel

FEASIBLE = "Feasible"
INFEASIBLE = "InfeasibleProven"
UNDECIDED = "Undecided"

STATE = "state"
EFFECT = "effect"
MEASUREMENT = "measurement"
PROCESS = "process"


@dataclass(frozen=True, eq=False)
class Resource:
    variant: str
    label: str
    sys: SystemLabel | None = None
    operator: np.ndarray | None = None
    elements: tuple[np.ndarray, ...] = ()
    proc: QuantumProcess | None = None

    @classmethod
    def state(cls, rho, sys: SystemLabel, label: str = "", tol: Tolerance = DEFAULT_TOL) -> "Resource":
        rho = la.as_matrix(rho, square=True)
        if rho.shape[0] != sys.dim:
            raise ShapeError(f"state of size {rho.shape[0]} on a system of size {sys.dim}")
        if not la.is_psd(rho, tol) or np.trace(rho).real > 1 + tol.eq_atol:
            raise ShapeError("a state must be PSD with trace at most one")
        return cls(STATE, label, sys, rho)

    @classmethod
    def effect(cls, e, sys: SystemLabel, label: str = "", tol: Tolerance = DEFAULT_TOL) -> "Resource":
        e = la.as_matrix(e, square=True)
        if e.shape[0] != sys.dim:
            raise ShapeError(f"effect of size {e.shape[0]} on a system of size {sys.dim}")
        if not (la.is_psd(e, tol) and la.is_psd(np.eye(sys.dim) - e, tol)):
            raise ShapeError("an effect must satisfy 0 <= e <= I")
        return cls(EFFECT, label, sys, e)

    @classmethod
    def measurement(cls, effects: Sequence, sys: SystemLabel, label: str = "",
                    tol: Tolerance = DEFAULT_TOL) -> "Resource":
        els = tuple(la.as_matrix(e, square=True) for e in effects)
        if not els:
            raise ShapeError("a measurement needs at least one outcome")
        for e in els:
            if e.shape[0] != sys.dim or not la.is_psd(e, tol):
                raise ShapeError("measurement elements must be PSD operators on the system")
        if not la.approx_eq(np.eye(sys.dim), sum(els), tol):
            raise ShapeError("measurement elements must sum to the identity")
        return cls(MEASUREMENT, label, sys, elements=els)

    @classmethod
    def process(cls, f: QuantumProcess, label: str = "") -> "Resource":
        return cls(PROCESS, label, proc=f)


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 5000
    feas_atol: float = 1e-7
    seed: int = 0
    memory_dim_cap: int | None = None
    restarts: int = 3
    tol: Tolerance = DEFAULT_TOL

    def __post_init__(self):
        if self.max_iter < 1 or self.feas_atol <= 0 or self.restarts < 1:
            raise ValueError("solver settings must be positive")
        if self.memory_dim_cap is not None and self.memory_dim_cap < 1:
            raise ValueError("memory_dim_cap must be positive")


@dataclass(frozen=True, eq=False)
class ConversionQuery:
    source: Resource
    target: Resource
    free: FreeSetSpec
    solver: SolverConfig = SolverConfig()

    def __post_init__(self):
        if self.source.variant != self.target.variant:
            raise WireMismatch("source and target must be the same kind of resource")


@dataclass
class MeasurementCertificate:
    pre: QuantumProcess
    post: np.ndarray  # post[j, k, e] = P(j | k, e)
    memory: SystemLabel


@dataclass
class CombCertificate:
    pre: QuantumProcess
    post: QuantumProcess
    memory: SystemLabel
    mirror: SystemLabel | None = None  # system whose decoherence the memory carries


@dataclass
class FeasibilityResult:
    status: str
    certificate: Any = None
    reason: str = ""
    iterations: int = 0
    residual: float = float("nan")
    details: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE


# decoherence seen by a free set, and memory extensions

def set_decoherence(spec: FreeSetSpec, label: SystemLabel) -> QuantumProcess:
    """The decoherence process every member of the free set commutes with on ``label``."""
    if spec.kind in (MIO, DIO, CDIO):
        return spec.fam.dec(label)
    if spec.kind in (TIO, CTIO):
        return twirl_process(spec.rep, label)
    if label in spec.mech:
        return spec.mech[label].induced
    raise MissingAssignment(f"no decoherence mechanism declared on {list(label.names)}")


def extend_with_memory(spec: FreeSetSpec, mem: SystemLabel, like: SystemLabel | None = None) -> FreeSetSpec:
    """The same free set on a theory with one more system, a memory wire.

    By default the memory is inert: identity decoherence and trivial group
    action. With ``like`` it mirrors that system, carrying a copy of its
    decoherence or representation.
    """
    if like is not None and like.dim != mem.dim:
        raise ShapeError("a mirrored memory must have the dimension of the system it mirrors")
    if spec.kind in (DIO, CDIO) and (spec.kind == DIO or spec.fam.rule == PRODUCT):
        fam = spec.fam
        own = pr.identity(mem) if like is None else QuantumProcess(mem, mem, set_decoherence(spec, like).choi)
        assignments = dict(fam.assignments)
        assignments[mem] = DecoherenceProcess(mem, own)
        if fam.rule == GLOBAL:
            for l, d in fam.assignments.items():
                assignments[l + mem] = DecoherenceProcess(l + mem, pr.parallel(d.proc, own))
        return FreeSetSpec(spec.kind, DecoherenceFamily(assignments, fam.rule), ancilla_systems=spec.ancilla_systems)
    if spec.kind == TIO or (spec.kind == CTIO and spec.rep.factorize):
        rep = spec.rep
        own = [np.eye(mem.dim)] * rep.order if like is None else list(rep.on(like))
        unis = {l: list(m) for l, m in rep.unitaries.items()}
        unis[mem] = own
        if not rep.factorize:
            for l, mats in rep.unitaries.items():
                unis[l + mem] = [np.kron(u, v) for u, v in zip(mats, own)]
        new = GroupRepresentation(rep.elements, unis, rep.table, rep.factorize)
        return FreeSetSpec(spec.kind, rep=new, ancilla_systems=spec.ancilla_systems)
    raise UnsupportedQuery(f"conversions with a memory wire are not supported for {spec.kind}"
                           + (" under the global rule" if spec.kind == CDIO else "")
                           + (" with a non-factorizing representation" if spec.kind == CTIO else ""))


def _check_kind(spec: FreeSetSpec):
    if spec.kind == MIO:
        raise UnsupportedQuery("MIO is not closed under the free operations used for conversions")


def _herm(x: np.ndarray, n: int) -> np.ndarray:
    return la.vec_to_herm(x, n)


def _solve_choi(spec: FreeSetSpec, inp: SystemLabel, out: SystemLabel, maps, cfg: SolverConfig,
                x0: np.ndarray | None = None, max_iter: int | None = None):
    """Find a causal free Choi matrix satisfying extra linear equations ``maps``."""
    n = inp.dim * out.dim
    a0, b0 = cached_linear_system(spec, inp, out)
    a1, b1 = sv.hermitian_linear_system(maps, n)
    aff = sv.AffineSet(np.vstack([a0, a1]), np.concatenate([b0, b1]))
    cone = sv.Cone(((sv.PSD, n),))
    if aff.inconsistency > 1e-9:
        return None, aff, sv.SolveResult(None, aff.inconsistency, 0, False)
    if x0 is None:
        x0 = la.herm_to_vec(np.eye(n) / out.dim)
    res = sv.solve(aff, cone, x0, max_iter=max_iter or cfg.max_iter, feas_atol=cfg.feas_atol,
                   psd_atol=cfg.tol.psd_atol)
    cert = QuantumProcess(inp, out, _herm(res.x, n)) if res.converged else None
    return cert, aff, res


def _classical_map(out: SystemLabel, pos: int, inp: SystemLabel):
    deph = pr.dephase_wire(out, pos)

    def fn(x):
        f = QuantumProcess(inp, out, x)
        return f.choi - pr.sequential(f, deph).choi
    return fn, 0.0


def _verify_process(f: QuantumProcess, spec: FreeSetSpec, tol: Tolerance) -> tuple[bool, float]:
    if not la.is_psd(f.choi, tol):
        return False, -la.min_eigenvalue(f.choi)
    if not pr.is_causal(f, tol):
        return False, pr.causality_residual(f)
    m = membership(f, spec, tol)
    return m.member, m.residual


# states

def _state_obstruction(spec, src, tgt, src_sys, tgt_sys, cfg, adjoint=False):
    apply_fn = pr.apply_adjoint if adjoint else pr.apply
    d_src, d_tgt = set_decoherence(spec, src_sys), set_decoherence(spec, tgt_sys)
    r_src = la.relative_residual(src, apply_fn(d_src, src))
    r_tgt = la.relative_residual(tgt, apply_fn(d_tgt, tgt))
    if r_src <= cfg.tol.eq_atol and r_tgt > cfg.feas_atol:
        what = "effects" if adjoint else "states"
        return FeasibilityResult(INFEASIBLE, reason=f"free maps preserve decohered {what}: the source is "
                                 f"decohered but the target is not (residual {r_tgt:.3e})", residual=r_tgt)
    return None


def can_convert_state(q: ConversionQuery) -> FeasibilityResult:
    _check_kind(q.free)
    src, tgt, cfg = q.source, q.target, q.solver
    if src.variant != STATE:
        raise WireMismatch("expected state resources")
    if abs(np.trace(src.operator) - np.trace(tgt.operator)) > cfg.feas_atol:
        return FeasibilityResult(INFEASIBLE, reason="causal maps preserve the trace", residual=float(
            abs(np.trace(src.operator) - np.trace(tgt.operator))))
    obs = _state_obstruction(q.free, src.operator, tgt.operator, src.sys, tgt.sys, cfg)
    if obs:
        return obs
    rho, sigma = src.operator, tgt.operator
    maps = [(lambda x: pr.apply(QuantumProcess(src.sys, tgt.sys, x), rho), sigma)]
    return _finish_linear(q, src.sys, tgt.sys, maps)


def can_convert_effect(q: ConversionQuery) -> FeasibilityResult:
    _check_kind(q.free)
    src, tgt, cfg = q.source, q.target, q.solver
    if src.variant != EFFECT:
        raise WireMismatch("expected effect resources")
    obs = _state_obstruction(q.free, src.operator, tgt.operator, src.sys, tgt.sys, cfg, adjoint=True)
    if obs:
        return obs
    e, e2 = src.operator, tgt.operator
    # pre-composition: f runs from the target system into the source system
    maps = [(lambda x: pr.apply_adjoint(QuantumProcess(tgt.sys, src.sys, x), e), e2)]
    return _finish_linear(q, tgt.sys, src.sys, maps)


def _linear_starts(q: ConversionQuery, inp: SystemLabel, out: SystemLabel) -> list[np.ndarray]:
    """Starting Choi matrices: the identity when types agree, the set's decoherence, then depolarizing.

    Dykstra converges slowly onto low-rank faces, so exact structured
    solutions (the identity for reflexive queries) are worth trying first.
    """
    starts = []
    if inp == out:
        starts.append(pr.identity(inp).choi)
        try:
            starts.append(set_decoherence(q.free, inp).choi)
        except MissingAssignment:
            pass
    starts.append(np.eye(inp.dim * out.dim) / out.dim)
    return starts


def _finish_linear(q: ConversionQuery, inp: SystemLabel, out: SystemLabel, maps) -> FeasibilityResult:
    cfg = q.solver
    starts = _linear_starts(q, inp, out)
    total = 0
    for k, start in enumerate(starts):
        last = k == len(starts) - 1
        budget = cfg.max_iter if last else max(50, cfg.max_iter // 20)
        cert, aff, res = _solve_choi(q.free, inp, out, maps, cfg, la.herm_to_vec(start), budget)
        total += res.iterations
        if res.x is None or cert is not None:
            break
    res.iterations = total
    if res.x is None:
        return FeasibilityResult(UNDECIDED, reason="the linear constraints admit no solution even without "
                                 "positivity; no obstruction theorem applies", residual=res.residual)
    if cert is None:
        return FeasibilityResult(UNDECIDED, reason="iteration budget exhausted", iterations=res.iterations,
                                 residual=res.residual)
    result = FeasibilityResult(FEASIBLE, cert, iterations=res.iterations)
    return _verified(result, q)


def _verified(result: FeasibilityResult, q: ConversionQuery) -> FeasibilityResult:
    ok, resid = _verify_detail(result, q)
    result.residual = resid
    if not ok:
        return FeasibilityResult(UNDECIDED, reason="certificate failed re-verification",
                                 iterations=result.iterations, residual=resid)
    return result


def _verify_detail(result: FeasibilityResult, q: ConversionQuery) -> tuple[bool, float]:
    tol = q.solver.tol
    src, tgt, cert = q.source, q.target, result.certificate
    if cert is None:
        return False, float("inf")
    if src.variant in (STATE, EFFECT):
        if not isinstance(cert, QuantumProcess):
            return False, float("inf")
        ok, r = _verify_process(cert, q.free, tol)
        if not ok:
            return False, r
        if src.variant == STATE:
            if cert.input != src.sys or cert.output != tgt.sys:
                return False, float("inf")
            r = la.relative_residual(tgt.operator, pr.apply(cert, src.operator))
        else:
            if cert.input != tgt.sys or cert.output != src.sys:
                return False, float("inf")
            r = la.relative_residual(tgt.operator, pr.apply_adjoint(cert, src.operator))
        return r <= tol.eq_atol, r
    if src.variant == MEASUREMENT:
        spec = extend_with_memory(q.free, cert.memory)
        ok, r = _verify_process(cert.pre, spec, tol)
        if not ok:
            return False, r
        if cert.pre.input != tgt.sys or cert.pre.output != src.sys + cert.memory:
            return False, float("inf")
        if cert.memory.dim > 1:
            deph = pr.dephase_wire(cert.pre.output, len(src.sys))
            r = la.relative_residual(cert.pre.choi, pr.sequential(cert.pre, deph).choi)
            if r > tol.eq_atol:
                return False, r
        p = np.asarray(cert.post, dtype=float)
        m, n, e = len(tgt.elements), len(src.elements), cert.memory.dim
        if p.shape != (m, n, e) or p.min() < -tol.eq_atol or not np.allclose(p.sum(axis=0), 1.0,
                                                                             atol=tol.eq_atol, rtol=0):
            return False, float("inf")
        got = _pulled_back(cert.pre, p, src.elements, e)
        r = max(la.relative_residual(nj, gj) for nj, gj in zip(tgt.elements, got))
        return r <= tol.eq_atol, r
    if src.variant == PROCESS:
        spec = extend_with_memory(q.free, cert.memory, cert.mirror)
        for part in (cert.pre, cert.post):
            ok, r = _verify_process(part, spec, tol)
            if not ok:
                return False, r
        try:
            comp = _comb(cert.pre, src.proc, cert.post, cert.memory)
        except WireMismatch:
            return False, float("inf")
        if comp.input != tgt.proc.input or comp.output != tgt.proc.output:
            return False, float("inf")
        r = la.relative_residual(tgt.proc.choi, comp.choi)
        return r <= tol.eq_atol, r
    return False, float("inf")


def verify_certificate(result: FeasibilityResult, q: ConversionQuery) -> bool:
    """Re-check a Feasible certificate: causal, free, and mapping source to target at eq_atol."""
    if result.status != FEASIBLE:
        return False
    try:
        return _verify_detail(result, q)[0]
    except (WireMismatch, ShapeError, MissingAssignment, UnsupportedQuery):
        return False


def compose_state_certificates(first: QuantumProcess, second: QuantumProcess) -> QuantumProcess:
    """Certificate for ``a -> c`` from certificates for ``a -> b`` and ``b -> c``."""
    return pr.sequential(first, second)


# measurements

def _memory(e: int) -> SystemLabel:
    return SystemLabel.of(AtomicSystem("mem", e, classical=True))


def _pulled_back(pre: QuantumProcess, p: np.ndarray, effects, e: int) -> list[np.ndarray]:
    m = p.shape[0]
    out = []
    for j in range(m):
        fj = sum(p[j, k, x] * np.kron(mk, _basis_proj(e, x)) for k, mk in enumerate(effects) for x in range(e))
        out.append(pr.apply_adjoint(pre, fj))
    return out


def _basis_proj(e: int, x: int) -> np.ndarray:
    b = np.zeros((e, e))
    b[x, x] = 1.0
    return b


def _memory_dims(cap: int) -> list[int]:
    dims = [1]
    d = 2
    while d <= cap:
        dims.append(d)
        d = d * 2 if d >= 2 else d + 1
    if dims[-1] != cap and cap > 1:
        dims.append(cap)
    return sorted(set(dims))


def can_convert_measurement(q: ConversionQuery, enumerate_limit: int = 256) -> FeasibilityResult:
    """Free pre-processing with a classical memory plus classical post-processing.

    For each memory size, deterministic post-processings are enumerated
    (each leaves a convex problem for the pre-processing) while their number
    stays below ``enumerate_limit``; afterwards the two halves are solved
    alternately from random starting points.
    """
    _check_kind(q.free)
    src, tgt, cfg = q.source, q.target, q.solver
    if src.variant != MEASUREMENT:
        raise WireMismatch("expected measurement resources")
    spec = q.free
    d_src, d_tgt = set_decoherence(spec, src.sys), set_decoherence(spec, tgt.sys)
    src_dec = all(la.relative_residual(mk, pr.apply_adjoint(d_src, mk)) <= cfg.tol.eq_atol for mk in src.elements)
    worst = max(la.relative_residual(nj, pr.apply_adjoint(d_tgt, nj)) for nj in tgt.elements)
    if src_dec and worst > cfg.feas_atol:
        return FeasibilityResult(INFEASIBLE, reason="every source effect is decohered, so every effect of a freely "
                                 f"simulated measurement is decohered; the target is not (residual {worst:.3e})",
                                 residual=worst)
    n, m = len(src.elements), len(tgt.elements)
    cap = cfg.memory_dim_cap or max(1, src.sys.dim * tgt.sys.dim)
    rng = np.random.default_rng(cfg.seed)
    total_iter = 0
    best_gap = float("inf")
    tried = []
    for e in _memory_dims(cap):
        mem = _memory(e)
        ext = extend_with_memory(spec, mem)
        out_label = src.sys + mem
        classical = [_classical_map(out_label, len(src.sys), tgt.sys)] if e > 1 else []
        tried.append(e)

        def pre_maps(p):
            maps = list(classical)
            for j in range(m):
                fj = sum(p[j, k, x] * np.kron(src.elements[k], _basis_proj(e, x)) for k in range(n) for x in range(e))
                maps.append((lambda x_, fj=fj: pr.apply_adjoint(QuantumProcess(tgt.sys, out_label, x_), fj),
                             tgt.elements[j]))
            return maps

        def attempt(p, x0=None, iters=None):
            nonlocal total_iter
            cert, aff, res = _solve_choi(ext, tgt.sys, out_label, pre_maps(p), cfg, x0, iters)
            total_iter += res.iterations
            if cert is not None:
                r = FeasibilityResult(FEASIBLE, MeasurementCertificate(cert, p.copy(), mem),
                                      iterations=total_iter, details={"memory_dim": e})
                r = _verified(r, q)
                if r.feasible:
                    return r, res
            return None, res

        count = m ** (n * e)
        if count <= enumerate_limit:
            for assign in itertools.product(range(m), repeat=n * e):
                p = np.zeros((m, n, e))
                for idx, j in enumerate(assign):
                    p[j, idx // e, idx % e] = 1.0
                found, res = attempt(p, iters=max(200, cfg.max_iter // 10))
                if found:
                    return found
                if res.x is not None:
                    best_gap = min(best_gap, res.residual)
        # alternate between the post-processing and the pre-processing
        for _ in range(cfg.restarts):
            pre = sample_members(ext, tgt.sys, out_label, 1, rng, cfg.tol)
            if not pre:
                continue
            pre = pre[0]
            p = sv.project_simplex(rng.random((m, n * e))).reshape(m, n, e)
            for _ in range(4):
                p = _solve_post(pre, src.elements, tgt.elements, e, cfg, p)
                found, res = attempt(p, la.herm_to_vec(pre.choi))
                if found:
                    return found
                if res.x is None:
                    continue
                best_gap = min(best_gap, res.residual)
                j = la.hermitian_part(_herm(res.x, tgt.sys.dim * out_label.dim))
                pre = QuantumProcess(tgt.sys, out_label, _project_free(ext, tgt.sys, out_label, j, cfg))
    return FeasibilityResult(UNDECIDED, reason="alternating search found no verified certificate",
                             iterations=total_iter, residual=best_gap, details={"memory_dims": tried})


def _solve_post(pre: QuantumProcess, src_effects, tgt_effects, e: int, cfg: SolverConfig,
                p0: np.ndarray) -> np.ndarray:
    """Best stochastic post-processing for a fixed pre-processing (projected onto the simplex)."""
    m, n = len(tgt_effects), len(src_effects)
    g = [[pr.apply_adjoint(pre, np.kron(mk, _basis_proj(e, x))) for x in range(e)] for mk in src_effects]
    rows, rhs = [], []
    size = m * n * e
    for j in range(m):
        block = np.zeros((2 * g[0][0].size, size))
        for k in range(n):
            for x in range(e):
                col = j * n * e + k * e + x
                v = g[k][x].reshape(-1)
                block[:, col] = np.concatenate([v.real, v.imag])
        rows.append(block)
        t = tgt_effects[j].reshape(-1)
        rhs.append(np.concatenate([t.real, t.imag]))
    norm = np.zeros((n * e, size))
    for k in range(n * e):
        for j in range(m):
            norm[k, j * n * e + k] = 1.0
    rows.append(norm)
    rhs.append(np.ones(n * e))
    aff = sv.AffineSet(np.vstack(rows), np.concatenate(rhs))
    cone = sv.Cone(((sv.NONNEG, size),))
    res = sv.solve(aff, cone, p0.reshape(-1), max_iter=max(200, cfg.max_iter // 10), feas_atol=cfg.feas_atol)
    x = res.x if res.x is not None else p0.reshape(-1)
    return sv.project_simplex(x.reshape(m, n * e)).reshape(m, n, e)


def _project_free(spec: FreeSetSpec, inp: SystemLabel, out: SystemLabel, j: np.ndarray,
                  cfg: SolverConfig) -> np.ndarray:
    """Nearest causal free Choi matrix (Dykstra projection)."""
    n = inp.dim * out.dim
    aff = sv.AffineSet(*cached_linear_system(spec, inp, out))
    y, _, _ = sv.dykstra(aff, sv.Cone(((sv.PSD, n),)), la.herm_to_vec(j), max_iter=max(100, cfg.max_iter // 20))
    return la.psd_project(_herm(aff.project(y), n))


# processes

def _comb(pre: QuantumProcess, f: QuantumProcess, post: QuantumProcess, mem: SystemLabel) -> QuantumProcess:
    return pr.compose(pre, pr.parallel(f, pr.identity(mem)), post)


def _process_obstruction(q: ConversionQuery) -> FeasibilityResult | None:
    f, g = q.source.proc, q.target.proc
    tol = q.solver.tol
    src = membership(f, q.free, tol)
    tgt = membership(g, q.free, tol)
    if src.member and tgt.residual > q.solver.feas_atol:
        return FeasibilityResult(INFEASIBLE, reason="the source is free and free combs are closed under "
                                 f"composition, but the target is not free (residual {tgt.residual:.3e} on "
                                 f"{tgt.witness})", residual=tgt.residual)
    return None


def _memory_options(spec: FreeSetSpec, c: SystemLabel, d: SystemLabel, cap: int):
    """Inert memories of growing dimension, then memories mirroring the target's wires."""
    opts = [(e, None) for e in _memory_dims(cap)]
    for like in (c, d):
        if like.is_trivial or like.dim > cap or any(m == like for _, m in opts):
            continue
        try:
            set_decoherence(spec, like)
        except MissingAssignment:
            continue
        opts.append((like.dim, like))
    return opts


def can_convert_process(q: ConversionQuery) -> FeasibilityResult:
    """Free 1-combs ``post . (f (x) 1_E) . pre`` with a memory E swept up to the cap.

    Inert memories are tried first, then memories that mirror the target's
    input or output system, which lets a comb carry coherent data past f.
    """
    _check_kind(q.free)
    if q.source.variant != PROCESS:
        raise WireMismatch("expected process resources")
    extend_with_memory(q.free, _quantum_memory(1))  # raises for unsupported kinds
    obs = _process_obstruction(q)
    if obs:
        return obs
    f, g, cfg = q.source.proc, q.target.proc, q.solver
    a, b, c, d = f.input, f.output, g.input, g.output
    cap = cfg.memory_dim_cap or max(1, c.dim * d.dim)
    rng = np.random.default_rng(cfg.seed)
    total_iter = 0
    best_gap = float("inf")
    tried = []
    for e, like in _memory_options(q.free, c, d, cap):
        mem = _quantum_memory(e)
        if (c.dim * (a + mem).dim) ** 2 > 4096 or ((b + mem).dim * d.dim) ** 2 > 4096:
            continue
        tried.append(e if like is None else f"{e}:{like}")
        ext = extend_with_memory(q.free, mem, like)
        fe = pr.parallel(f, pr.identity(mem))
        info = {"memory_dim": e, "memory_mirror": None if like is None else str(like)}

        def solve_post(pre):
            k = pr.sequential(pre, fe)
            maps = [(lambda x: pr.sequential(k, QuantumProcess(b + mem, d, x)).choi, g.choi)]
            return _solve_choi(ext, b + mem, d, maps, cfg, None, max(200, cfg.max_iter // 5))

        def solve_pre(post):
            l_ = pr.sequential(fe, post)
            maps = [(lambda x: pr.sequential(QuantumProcess(c, a + mem, x), l_).choi, g.choi)]
            return _solve_choi(ext, c, a + mem, maps, cfg, None, max(200, cfg.max_iter // 5))

        def accept(pre, post):
            r = FeasibilityResult(FEASIBLE, CombCertificate(pre, post, mem, like), iterations=total_iter,
                                  details=dict(info))
            return _verified(r, q)

        for pre in _comb_starts(ext, c, a, mem, rng, cfg):
            for _ in range(4):
                post, _, res = solve_post(pre)
                total_iter += res.iterations
                if post is not None and (r := accept(pre, post)).feasible:
                    return r
                if res.x is None:
                    break
                best_gap = min(best_gap, res.residual)
                n2 = (b + mem).dim * d.dim
                post = QuantumProcess(b + mem, d, _project_free(ext, b + mem, d, _herm(res.x, n2), cfg))
                pre2, _, res = solve_pre(post)
                total_iter += res.iterations
                if pre2 is not None and (r := accept(pre2, post)).feasible:
                    return r
                if res.x is None:
                    break
                best_gap = min(best_gap, res.residual)
                n1 = c.dim * (a + mem).dim
                pre = QuantumProcess(c, a + mem, _project_free(ext, c, a + mem, _herm(res.x, n1), cfg))
    return FeasibilityResult(UNDECIDED, reason="alternating search found no verified comb",
                             iterations=total_iter, residual=best_gap, details={"memories": tried})


def _quantum_memory(e: int) -> SystemLabel:
    return SystemLabel.of(AtomicSystem("mem", e))


def _comb_starts(spec: FreeSetSpec, c: SystemLabel, a: SystemLabel, mem: SystemLabel,
                 rng: np.random.Generator, cfg: SolverConfig) -> list[QuantumProcess]:
    """Structured first halves then random free ones.

    The structured ones feed the input straight into f (identity or
    decoherence, memory idle) or, when sizes allow, park it in the memory
    and hand f a decohered maximally mixed state.
    """
    starts = []
    if c == a:
        ancilla = pr.prepare(np.eye(mem.dim) / mem.dim, mem)
        for base in (pr.identity(a), set_decoherence(spec, a)):
            starts.append(pr.parallel(base, ancilla))
    if mem.dim == c.dim:
        try:
            sigma = pr.apply(set_decoherence(spec, a), np.eye(a.dim) / a.dim)
            park = QuantumProcess(c, mem, pr.identity(c).choi)
            starts.append(pr.parallel(pr.prepare(sigma, a), park))
        except MissingAssignment:
            pass
    starts += sample_members(spec, c, a + mem, cfg.restarts, rng, cfg.tol)
    return [s for s in starts if is_member(s, spec, cfg.tol)]


def can_convert(q: ConversionQuery) -> FeasibilityResult:
    return {STATE: can_convert_state, EFFECT: can_convert_effect, MEASUREMENT: can_convert_measurement,
            PROCESS: can_convert_process}[q.source.variant](q)


# preorders and monotones

@dataclass
class PreorderGraph:
    resources: list[Resource]
    edges: dict[tuple[int, int], FeasibilityResult] = field(default_factory=dict)

    @property
    def nodes(self) -> list[str]:
        return [r.label or f"r{i}" for i, r in enumerate(self.resources)]

    def status(self, i: int, j: int) -> str:
        return self.edges[(i, j)].status

    def feasible_edges(self) -> list[tuple[int, int]]:
        return [k for k, v in self.edges.items() if v.status == FEASIBLE]

    def transitivity_conflicts(self) -> list[tuple[int, int, int]]:
        """Triples with Feasible a->b, b->c but InfeasibleProven a->c (should be empty)."""
        bad = []
        feas = set(self.feasible_edges())
        for (a, b) in feas:
            for (b2, c) in feas:
                if b2 == b and (a, c) in self.edges and self.edges[(a, c)].status == INFEASIBLE:
                    bad.append((a, b, c))
        return bad

    def to_dot(self, values: dict[str, float] | None = None) -> str:
        """Solid edges are Feasible, dashed are Undecided, InfeasibleProven edges are omitted."""
        lines = ["digraph preorder {"]
        for name in self.nodes:
            label = name if values is None else f"{name}\\n{values.get(name, float('nan')):.4g}"
            lines.append(f'  "{name}" [label="{label}"];')
        names = self.nodes
        for (i, j), res in sorted(self.edges.items()):
            if res.status == FEASIBLE:
                lines.append(f'  "{names[i]}" -> "{names[j]}" [style=solid];')
            elif res.status == UNDECIDED:
                lines.append(f'  "{names[i]}" -> "{names[j]}" [style=dashed];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _threads() -> int:
    try:
        n = int(os.environ.get("COHERENCE_WB_THREADS", "0"))
    except ValueError:
        n = 0
    return n if n > 0 else min(4, os.cpu_count() or 1)


def _identity_certificate(r: Resource) -> Any:
    if r.variant in (STATE, EFFECT):
        return pr.identity(r.sys)
    if r.variant == MEASUREMENT:
        n = len(r.elements)
        mem = _memory(1)
        pre = pr.parallel(pr.identity(r.sys), pr.prepare(np.ones((1, 1)), mem))
        return MeasurementCertificate(pre, np.eye(n).reshape(n, n, 1), mem)
    mem = _quantum_memory(1)
    pre = pr.parallel(pr.identity(r.proc.input), pr.prepare(np.ones((1, 1)), mem))
    post = pr.parallel(pr.identity(r.proc.output), pr.discard(mem))
    return CombCertificate(pre, post, mem)


def build_preorder(resources: Sequence[Resource], free: FreeSetSpec, solver: SolverConfig = SolverConfig(),
                   threads: int | None = None) -> PreorderGraph:
    """All pairwise conversions; reflexive edges are Feasible via the identity without solving."""
    resources = list(resources)
    if len({r.variant for r in resources}) > 1:
        raise WireMismatch("a preorder needs resources of a single kind")
    graph = PreorderGraph(resources)
    for i, r in enumerate(resources):
        graph.edges[(i, i)] = FeasibilityResult(FEASIBLE, _identity_certificate(r), reason="identity",
                                                residual=0.0)
    pairs = [(i, j) for i in range(len(resources)) for j in range(len(resources)) if i != j]

    def run(pair):
        i, j = pair
        seed = int(np.random.SeedSequence([solver.seed, i, j]).generate_state(1)[0])
        cfg = SolverConfig(solver.max_iter, solver.feas_atol, seed, solver.memory_dim_cap, solver.restarts,
                           solver.tol)
        return pair, can_convert(ConversionQuery(resources[i], resources[j], free, cfg))

    workers = threads or _threads()
    if workers > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(run, pairs))
    else:
        results = [run(p) for p in pairs]
    for pair, res in sorted(results, key=lambda t: t[0]):
        graph.edges[pair] = res
    return graph


@dataclass(frozen=True)
class Monotone:
    name: str
    evaluator: Callable[[Resource], float]


@dataclass
class MonotoneReport:
    name: str
    values: dict[str, float]
    checked: int
    violations: list[tuple[str, str, float, float]]

    @property
    def ok(self) -> bool:
        return not self.violations


def evaluate_monotone(m: Monotone, graph: PreorderGraph, slack: float = 1e-9) -> MonotoneReport:
    """Check ``alpha(s) >= alpha(r)`` along every Feasible edge ``s -> r``."""
    names = graph.nodes
    vals = [float(m.evaluator(r)) for r in graph.resources]
    violations = []
    checked = 0
    for (i, j) in graph.feasible_edges():
        checked += 1
        if vals[i] < vals[j] - slack * max(1.0, abs(vals[j])):
            violations.append((names[i], names[j], vals[i], vals[j]))
    return MonotoneReport(m.name, dict(zip(names, vals)), checked, violations)


def _l1(r: Resource) -> float:
    x = r.operator if r.operator is not None else (r.proc.choi if r.proc is not None else sum(r.elements))
    return float(np.abs(x).sum() - np.abs(np.diag(x)).sum())


L1_COHERENCE = Monotone("l1-coherence", _l1)
TRACE = Monotone("trace", lambda r: float(np.trace(r.operator).real))


# separation search

@dataclass
class SearchReport:
    trials: int
    witnesses: list[tuple[QuantumProcess, float, float]]

    @property
    def found(self) -> bool:
        return bool(self.witnesses)


def separation_search(set_a: FreeSetSpec, set_b: FreeSetSpec, input: SystemLabel, output: SystemLabel | None = None,
                      trials: int = 100, seed: int | None = 0, tol: Tolerance = DEFAULT_TOL,
                      max_witnesses: int = 5) -> SearchReport:
    """Randomized search for processes in ``set_a`` but not in ``set_b``.

    Candidates are members generated for ``set_a``, random unitary
    conjugations, random channels and decoherence sandwiches; each
    witness is reported with its residual under both oracles.
    """
    output = output or input
    rng = np.random.default_rng(seed)
    witnesses = []
    pool = sample_members(set_a, input, output, max(1, trials // 2), rng, tol)
    for t in range(trials):
        kind = t % 4
        if kind == 0 and pool:
            cand = pool[t // 4 % len(pool)]
        elif kind == 1 and input == output:
            cand = pr.random_unitary_channel(input, rng)
        elif kind == 2 and set_a.kind in (MIO, DIO, CDIO):
            cand = pr.compose(set_a.fam.dec(input), pr.random_process(input, output, rng), set_a.fam.dec(output))
        else:
            cand = pr.random_process(input, output, rng)
        ma = membership(cand, set_a, tol)
        if not ma.member:
            continue
        mb = membership(cand, set_b, tol)
        if not mb.member:
            witnesses.append((cand, ma.residual, mb.residual))
            if len(witnesses) >= max_witnesses:
                break
    return SearchReport(trials, witnesses)
