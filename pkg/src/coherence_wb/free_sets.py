"""Membership oracles for the free sets MIO, DIO, cDIO, TIO, cTIO and mechanism invariance.

Every condition is an equation between two processes that are linear in the
Choi matrix of the candidate ``f``. :func:`constraints` lists those
equations for a given input/output type, so the same list drives the exact
predicates here and the feasibility solver in :mod:`convertibility`.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import linalg as la
from . import process as pr
from . import solver as sv
from .decoherence import (DecoherenceFamily, DecoherenceMechanism, GroupRepresentation,
                          random_decohered, decohered_residual)
from .errors import BadMechanism, BadRepresentation, MissingAssignment, NumericalFailure
from .linalg import DEFAULT_TOL, Tolerance
from .process import QuantumProcess, SystemLabel, TRIVIAL
from .reports import PropertyReport

MIO = "MIO"
DIO = "DIO"
CDIO = "cDIO"
TIO = "TIO"
CTIO = "cTIO"
MECH = "MechanismInvariant"
KINDS = (MIO, DIO, CDIO, TIO, CTIO, MECH)
_ALIASES = {k.lower(): k for k in KINDS} | {"mech": MECH, "mechanism": MECH}


def parse_kind(name: str) -> str:
    try:
        return _ALIASES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown free set {name!r}; expected one of {', '.join(KINDS)}") from None


@dataclass(frozen=True, eq=False)
class FreeSetSpec:
    """A free set and the data it is defined relative to.

    ``ancilla_systems`` are the witnesses ``C`` used for the complete
    variants; the trivial system is always included as well. When empty for
    cDIO or cTIO, every atomic system and every pair of distinct atomic
    systems whose composites are covered is used. For mechanism invariance
    an empty list means the single-system condition.
    """

    kind: str
    fam: DecoherenceFamily | None = None
    rep: GroupRepresentation | None = None
    mech: Mapping[SystemLabel, DecoherenceMechanism] | None = None
    ancilla_systems: tuple[SystemLabel, ...] = ()

    def __post_init__(self):
        kind = parse_kind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "ancilla_systems", tuple(self.ancilla_systems))
        if kind in (MIO, DIO, CDIO) and self.fam is None:
            raise ValueError(f"{kind} needs a decoherence family")
        if kind in (TIO, CTIO) and self.rep is None:
            raise ValueError(f"{kind} needs a group representation")
        if kind == MECH:
            if not self.mech:
                raise ValueError("mechanism invariance needs decoherence mechanisms")
            envs = {m.env for m in self.mech.values()}
            if len(envs) != 1:
                raise BadMechanism("all mechanisms must share one environment")
            object.__setattr__(self, "mech", dict(self.mech))

    @property
    def env(self) -> SystemLabel | None:
        return next(iter(self.mech.values())).env if self.mech else None

    def _atoms(self) -> list[SystemLabel]:
        labels = []
        if self.fam is not None:
            labels = self.fam.declared
        elif self.rep is not None:
            labels = self.rep.declared
        atoms = []
        for l in labels:
            for s in l.factors:
                a = SystemLabel((s,))
                if a not in atoms:
                    atoms.append(a)
        return atoms

    def _covers(self, label: SystemLabel) -> bool:
        if self.kind in (CDIO,):
            return self.fam.has(label)
        if self.kind == CTIO:
            return self.rep.has(label)
        if self.kind == MECH:
            return label in self.mech
        return True

    def ancillas_for(self, input: SystemLabel, output: SystemLabel) -> list[SystemLabel]:
        """Witness systems used for a process of the given type (trivial first)."""
        if self.kind not in (CDIO, CTIO, MECH):
            return [TRIVIAL]
        if self.ancilla_systems:
            return [TRIVIAL] + [c for c in self.ancilla_systems if not c.is_trivial]
        if self.kind == MECH:
            return [TRIVIAL]
        atoms = self._atoms()
        cands = atoms + [a + b for a, b in itertools.combinations(atoms, 2)]
        return [TRIVIAL] + [c for c in cands if self._covers(input + c) and self._covers(output + c)]


def _rep_on(rep: GroupRepresentation, label: SystemLabel, err=MissingAssignment):
    try:
        return rep.on(label)
    except MissingAssignment as exc:
        if err is MissingAssignment:
            raise
        raise err(str(exc)) from exc


def _ext(f: QuantumProcess, c: SystemLabel) -> QuantumProcess:
    return f if c.is_trivial else pr.parallel(f, pr.identity(c))


def _mechanism(spec: FreeSetSpec, label: SystemLabel) -> DecoherenceMechanism:
    if label in spec.mech:
        return spec.mech[label]
    raise MissingAssignment(f"no decoherence mechanism declared on {list(label.names)}")


Side = Callable[[QuantumProcess], QuantumProcess]


@dataclass(frozen=True)
class Constraint:
    """``lhs(f) == rhs(f)``; both sides are linear in the Choi matrix of f."""

    name: str
    lhs: Side
    rhs: Side

    def residual(self, f: QuantumProcess) -> float:
        return la.relative_residual(self.lhs(f).choi, self.rhs(f).choi)

    def difference(self, f: QuantumProcess) -> np.ndarray:
        return self.lhs(f).choi - self.rhs(f).choi


def constraints(spec: FreeSetSpec, input: SystemLabel, output: SystemLabel) -> list[Constraint]:
    """The linear equations defining membership of a process ``input -> output``."""
    kind = spec.kind
    out: list[Constraint] = []
    if kind in (MIO, DIO, CDIO):
        fam = spec.fam
        for c in spec.ancillas_for(input, output):
            d_in, d_out = fam.dec(input + c), fam.dec(output + c)
            tag = str(c)
            if kind == MIO:
                out.append(Constraint("mio", lambda f, a=d_in, b=d_out: pr.compose(a, f, b),
                                      lambda f, a=d_in: pr.sequential(a, f)))
            else:
                out.append(Constraint(f"dec[{tag}]",
                                      lambda f, c=c, b=d_out: pr.sequential_ext(f, c, b),
                                      lambda f, c=c, a=d_in: pr.ext_sequential(a, f, c)))
    elif kind in (TIO, CTIO):
        err = BadRepresentation if kind == TIO else MissingAssignment
        for c in spec.ancillas_for(input, output):
            r_in = _rep_on(spec.rep, input + c, err)
            r_out = _rep_on(spec.rep, output + c, err)
            tag = str(c)
            for g, ui, uo in zip(spec.rep.elements, r_in, r_out):
                ci, co = pr.unitary_channel(ui, input + c), pr.unitary_channel(uo, output + c)
                out.append(Constraint(f"rep[{tag}:{g}]",
                                      lambda f, c=c, co=co: pr.sequential_ext(f, c, co),
                                      lambda f, c=c, ci=ci: pr.ext_sequential(ci, f, c)))
    elif kind == MECH:
        env = spec.env
        for c in spec.ancillas_for(input, output):
            m_in, m_out = _mechanism(spec, input + c), _mechanism(spec, output + c)
            if m_in.env != env or m_out.env != env:
                raise BadMechanism("mechanisms act on different environments")
            tag = str(c)
            out.append(Constraint(f"mech[{tag}]",
                                  lambda f, c=c, mo=m_out: pr.sequential_ext(f, c, mo.proc),
                                  lambda f, c=c, mi=m_in: pr.ext_sequential(mi.proc, f, c + env)))
    else:  # pragma: no cover
        raise ValueError(kind)
    return out


@dataclass
class MembershipReport:
    member: bool
    residual: float
    witness: str | None
    residuals: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"member": self.member, "residual": self.residual, "witness": self.witness,
                "residuals": dict(self.residuals)}


def membership(f: QuantumProcess, spec: FreeSetSpec, tol: Tolerance = DEFAULT_TOL) -> MembershipReport:
    """Evaluate every defining equation; the witness is the one with the largest residual."""
    res = {c.name: c.residual(f) for c in constraints(spec, f.input, f.output)}
    worst = max(res, key=res.get) if res else None
    r = res[worst] if worst else 0.0
    return MembershipReport(r <= tol.eq_atol, r, worst, res)


def is_member(f: QuantumProcess, spec: FreeSetSpec, tol: Tolerance = DEFAULT_TOL) -> bool:
    return membership(f, spec, tol).member


def is_mio(f: QuantumProcess, fam: DecoherenceFamily, tol: Tolerance = DEFAULT_TOL,
           n_probe: int = 0, seed: int | None = 0) -> bool:
    """Decohered inputs go to decohered outputs: ``dec . f . dec == f . dec``.

    With ``n_probe > 0`` the exact answer is cross-checked on that many
    random decohered states; disagreement raises :class:`NumericalFailure`.
    """
    exact = is_member(f, FreeSetSpec(MIO, fam), tol)
    if n_probe:
        rng = np.random.default_rng(seed)
        d_in, d_out = fam.dec(f.input), fam.dec(f.output)
        probe = True
        for _ in range(n_probe):
            rho = pr.apply(d_in, la.random_density(f.din, rng))
            out = pr.apply(f, rho)
            probe &= la.approx_eq(out, pr.apply(d_out, out), Tolerance(eq_atol=max(tol.eq_atol, 1e-8),
                                                                       feas_atol=max(tol.feas_atol, 1e-8)))
        if exact and not probe:
            raise NumericalFailure("exact MIO identity holds but a probe state left the decohered set")
    return exact


def is_dio(f: QuantumProcess, fam: DecoherenceFamily, tol: Tolerance = DEFAULT_TOL) -> bool:
    return is_member(f, FreeSetSpec(DIO, fam), tol)


def is_cdio(f: QuantumProcess, spec: FreeSetSpec, tol: Tolerance = DEFAULT_TOL) -> bool:
    if spec.kind != CDIO:
        spec = FreeSetSpec(CDIO, spec.fam, ancilla_systems=spec.ancilla_systems)
    return is_member(f, spec, tol)


def is_tio(f: QuantumProcess, rep: GroupRepresentation, tol: Tolerance = DEFAULT_TOL) -> bool:
    return is_member(f, FreeSetSpec(TIO, rep=rep), tol)


def is_ctio(f: QuantumProcess, spec: FreeSetSpec, tol: Tolerance = DEFAULT_TOL) -> bool:
    if spec.kind != CTIO:
        spec = FreeSetSpec(CTIO, rep=spec.rep, ancilla_systems=spec.ancilla_systems)
    return is_member(f, spec, tol)


def is_mechanism_invariant(f: QuantumProcess, spec: FreeSetSpec, tol: Tolerance = DEFAULT_TOL) -> bool:
    return is_member(f, spec, tol)


def minimal_constraint_check(f: QuantumProcess, spec: FreeSetSpec, samples: int = 3, seed: int | None = 0,
                             tol: Tolerance = DEFAULT_TOL) -> bool:
    """Sampled form of the minimal constraint on free processes.

    For every witness system ``C`` and random decohered ``h`` on ``in C`` and
    ``h'`` on ``out C``, both ``(f (x) 1_C) . h`` and ``h' . (f (x) 1_C)`` must be
    decohered. Full-rank random ``h`` make each sample a complete test.
    """
    fam = spec.fam
    rng = np.random.default_rng(seed)
    for c in spec.ancillas_for(f.input, f.output):
        fc = _ext(f, c)
        for _ in range(samples):
            h = random_decohered(f.input + c, f.input + c, fam, rng, causal=True)
            if decohered_residual(pr.sequential(h, fc), fam) > tol.eq_atol:
                return False
            h2 = random_decohered(f.output + c, f.output + c, fam, rng, causal=True)
            if decohered_residual(pr.sequential(fc, h2), fam) > tol.eq_atol:
                return False
    return True


# affine description used by the solver and the member generator

def choi_linear_system(spec: FreeSetSpec | None, input: SystemLabel, output: SystemLabel,
                       causal: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Real linear system on the Hermitian coordinates of a Choi matrix.

    Rows encode the free-set equations and, when ``causal``, trace
    preservation.
    """
    maps = []
    if spec is not None:
        for c in constraints(spec, input, output):
            maps.append((lambda x, c=c: c.difference(QuantumProcess(input, output, x)), 0.0))
    if causal:
        maps.append((lambda x: la.partial_trace(x, [input.dim, output.dim], [0]), np.eye(input.dim)))
    return sv.hermitian_linear_system(maps, input.dim * output.dim)


_SYSTEM_CACHE: dict = {}


def _cached(kind: str, spec, input: SystemLabel, output: SystemLabel, causal: bool, build):
    key = (kind, id(spec), input, output, causal)
    hit = _SYSTEM_CACHE.get(key)
    if hit is not None and hit[0] is spec:
        return hit[1]
    value = build()
    if len(_SYSTEM_CACHE) > 512:
        _SYSTEM_CACHE.clear()
    _SYSTEM_CACHE[key] = (spec, value)
    return value


def cached_linear_system(spec: FreeSetSpec | None, input: SystemLabel, output: SystemLabel,
                         causal: bool = True) -> tuple[np.ndarray, np.ndarray]:
    return _cached("raw", spec, input, output, causal,
                   lambda: choi_linear_system(spec, input, output, causal))


def free_affine_set(spec: FreeSetSpec | None, input: SystemLabel, output: SystemLabel,
                    causal: bool = True) -> sv.AffineSet:
    return _cached("affine", spec, input, output, causal,
                   lambda: sv.AffineSet(*cached_linear_system(spec, input, output, causal)))


def _depolarizing(input: SystemLabel, output: SystemLabel) -> QuantumProcess:
    return QuantumProcess(input, output, np.eye(input.dim * output.dim) / output.dim)


def sample_members(spec: FreeSetSpec, input: SystemLabel, output: SystemLabel, count: int,
                   rng: np.random.Generator, tol: Tolerance = DEFAULT_TOL,
                   max_attempts: int | None = None) -> list[QuantumProcess]:
    """Random causal members of the free set, each verified by the exact oracle.

    Candidates come from projecting a random channel onto the affine hull of
    the free set and mixing it with the completely depolarizing channel just
    enough to restore positivity. When the depolarizing channel is not
    itself free, the projected point is pushed into the PSD cone by the
    feasibility solver instead. Constructive members (decoherence sandwiches
    for DIO, group averages for TIO) are mixed in as well.
    """
    aff = free_affine_set(spec, input, output)
    n = input.dim * output.dim
    dep = _depolarizing(input, output)
    dep_free = is_member(dep, spec, tol)
    cone = sv.Cone(((sv.PSD, n),))
    members: list[QuantumProcess] = []
    attempts = 0
    max_attempts = max_attempts or 4 * count + 10
    while len(members) < count and attempts < max_attempts:
        attempts += 1
        k = pr.random_process(input, output, rng, rank=int(rng.integers(1, n + 1)))
        cand = _constructive(spec, k, rng)
        if cand is None:
            x = aff.project(la.herm_to_vec(k.choi))
            j = la.vec_to_herm(x, n)
            lam = la.min_eigenvalue(j)
            if dep_free:
                lam0 = 1.0 / output.dim
                s = 1.0 if lam >= 0 else lam0 / (lam0 - lam)
                s *= rng.uniform(0.5, 1.0)
                j = s * j + (1 - s) * dep.choi
            else:
                res = sv.solve(aff, cone, x, max_iter=2000, psd_atol=tol.psd_atol)
                if not res.converged:
                    continue
                j = la.vec_to_herm(res.x, n)
            cand = QuantumProcess(input, output, la.hermitian_part(j))
        if pr.is_causal(cand, tol) and la.is_psd(cand.choi, tol) and is_member(cand, spec, tol):
            members.append(cand)
    return members


def _constructive(spec: FreeSetSpec, k: QuantumProcess, rng: np.random.Generator) -> QuantumProcess | None:
    """A structured member built from k, or None to fall back on projection."""
    if rng.random() < 0.5:
        return None
    if spec.kind in (DIO, MIO):
        return pr.compose(spec.fam.dec(k.input), k, spec.fam.dec(k.output))
    if spec.kind == TIO:
        cin = spec.rep.channels(k.input)
        cout = spec.rep.channels(k.output)
        inv = [spec.rep.table[i].index(_identity_index(spec.rep)) for i in range(spec.rep.order)]
        acc = sum(pr.compose(cin[inv[i]], k, cout[i]).choi for i in range(spec.rep.order))
        return QuantumProcess(k.input, k.output, acc / spec.rep.order)
    return None


def _identity_index(rep: GroupRepresentation) -> int:
    n = rep.order
    return next(e for e in range(n) if all(rep.table[e][j] == j for j in range(n)))


def sample_nonmembers(spec: FreeSetSpec, input: SystemLabel, output: SystemLabel, count: int,
                      rng: np.random.Generator, tol: Tolerance = DEFAULT_TOL) -> list[QuantumProcess]:
    """Mixtures of members with random channels that fall outside the set."""
    out = []
    members = sample_members(spec, input, output, count, rng, tol)
    for m in members:
        k = pr.random_process(input, output, rng)
        w = rng.uniform(0.05, 0.9)
        f = QuantumProcess(input, output, (1 - w) * m.choi + w * k.choi)
        if not is_member(f, spec, tol):
            out.append(f)
    return out


def free_set_closure_test(spec: FreeSetSpec, systems: Sequence[SystemLabel] | None = None,
                          samples: int = 50, seed: int | None = 0, tol: Tolerance = DEFAULT_TOL,
                          threshold: float = 1e-8) -> PropertyReport:
    """Compose sampled members in sequence and in parallel and test the composites.

    ``systems`` are the wire types members are drawn on (default: the
    declared atomic systems). Parallel composites need the free set to cover
    the composite types; where it does not the draw is counted as skipped.
    """
    rng = np.random.default_rng(seed)
    if systems is None:
        systems = spec._atoms() or list(spec.mech or [])
    systems = list(systems)
    report = PropertyReport(f"{spec.kind}-closure", samples, seed, threshold)
    pools: dict = {}

    def draw(a, b):
        key = (a, b)
        if not pools.get(key):
            pools[key] = sample_members(spec, a, b, 8, rng, tol)
            if not pools[key]:
                raise NumericalFailure(f"could not generate members on {a} -> {b}")
        pool = pools[key]
        return pool[rng.integers(len(pool))] if rng.random() < 0.5 else \
            sample_members(spec, a, b, 1, rng, tol)[0]

    for _ in range(samples):
        a, b, c = (systems[i] for i in rng.integers(len(systems), size=3))
        f, g = draw(a, b), draw(b, c)
        comp = pr.sequential(f, g)
        m = membership(comp, spec, tol)
        report.record("sequential", m.residual, f"{a}->{b}->{c}")
        a2, b2 = (systems[i] for i in rng.integers(len(systems), size=2))
        try:
            h = draw(a2, b2)
            par = pr.parallel(f, h)
            m = membership(par, spec, tol)
        except MissingAssignment:
            report.skip("parallel")
            continue
        report.record("parallel", m.residual, f"{a}{a2}->{b}{b2}")
    return report
