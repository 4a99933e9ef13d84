"""Decoherence processes, decoherence mechanisms and families of them.

A decoherence process is a causal idempotent endomorphism. A mechanism is a
process ``S -> S E`` whose system marginal is a decoherence process. A family
assigns decoherence to systems and fixes how composites are treated:

* ``product``: the decoherence of a composite is the parallel composite of
  the decoherence of its atomic factors, so every label is covered.
* ``global``: each composite carries its own declared decoherence, which must
  be compatible with the declared decoherence of its parts. Labels that were
  not declared raise :class:`MissingAssignment`.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import linalg as la
from . import process as pr
from .errors import (BadBasis, BadMechanism, BadPartition, BadRepresentation,
                     InvalidDecoherence, MissingAssignment, PreconditionFailed, WireMismatch)
from .linalg import DEFAULT_TOL, Tolerance
from .process import QuantumProcess, SystemLabel, TRIVIAL
from .reports import PropertyReport, ValidationReport

PRODUCT = "product"
GLOBAL = "global"


def validate_decoherence(proc: QuantumProcess, tol: Tolerance = DEFAULT_TOL) -> ValidationReport:
    """Causality and idempotence residuals of a candidate decoherence process."""
    if proc.input != proc.output:
        raise WireMismatch("a decoherence process must have equal input and output")
    rep = ValidationReport(threshold=tol.eq_atol)
    rep.record("causal", pr.causality_residual(proc))
    rep.record("idempotent", la.relative_residual(proc.choi, pr.sequential(proc, proc).choi))
    if not la.is_psd(proc.choi, tol):
        rep.fail("cptni", "Choi matrix not PSD")
    return rep


@dataclass(frozen=True, eq=False)
class DecoherenceProcess:
    sys: SystemLabel
    proc: QuantumProcess

    def __post_init__(self):
        if self.proc.input != self.sys or self.proc.output != self.sys:
            raise WireMismatch(f"decoherence process must be an endomorphism of {list(self.sys.names)}")

    @classmethod
    def checked(cls, proc: QuantumProcess, tol: Tolerance = DEFAULT_TOL) -> "DecoherenceProcess":
        rep = validate_decoherence(proc, tol)
        if not rep.valid:
            raise InvalidDecoherence("not a decoherence process: " + ", ".join(rep.failures))
        return cls(proc.input, proc)

    @property
    def choi(self) -> np.ndarray:
        return self.proc.choi


@dataclass(frozen=True, eq=False)
class DecoherenceMechanism:
    sys: SystemLabel
    env: SystemLabel
    proc: QuantumProcess

    def __post_init__(self):
        if self.proc.input != self.sys or self.proc.output != self.sys + self.env:
            raise BadMechanism("mechanism must map sys to sys followed by env")

    @property
    def induced(self) -> QuantumProcess:
        """The system marginal, obtained by discarding the environment."""
        n = len(self.sys)
        return pr.trace_out(self.proc, range(n, n + len(self.env)))

    def validate(self, tol: Tolerance = DEFAULT_TOL) -> ValidationReport:
        return validate_decoherence(self.induced, tol)

    def decoherence(self, tol: Tolerance = DEFAULT_TOL) -> DecoherenceProcess:
        return DecoherenceProcess.checked(self.induced, tol)


def _as_unitary(u, d: int, err=BadRepresentation, tol: float = 1e-9) -> np.ndarray:
    u = la.as_matrix(u, square=True)
    if u.shape != (d, d):
        raise err(f"expected a {d}x{d} unitary, got {u.shape}")
    if not la.approx_eq(np.eye(d), u.conj().T @ u, Tolerance(eq_atol=tol, feas_atol=max(tol, 1e-7))):
        raise err("matrix is not unitary")
    return u


def _proportional(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    """True when ``a = phase * b`` for a unit-modulus phase."""
    d = a.shape[0]
    phase = np.vdot(b, a) / d
    return abs(abs(phase) - 1.0) <= tol * 10 and la.relative_residual(a, phase * b) <= tol * 10


@dataclass(frozen=True, eq=False)
class GroupRepresentation:
    """A finite group acting by unitaries on declared systems.

    ``table[i][j]`` is the index of ``elements[i] * elements[j]``. When no
    table is given it is inferred from the matrices (up to phases). With
    ``factorize=True`` the action on a composite is the tensor product of the
    action on its atomic factors; otherwise only declared labels are covered.
    """

    elements: tuple[str, ...]
    unitaries: Mapping[SystemLabel, Sequence[np.ndarray]]
    table: tuple[tuple[int, ...], ...] | None = None
    factorize: bool = False
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        elements = tuple(str(e) for e in self.elements)
        if not elements or len(set(elements)) != len(elements):
            raise BadRepresentation("group elements must be distinct and nonempty")
        object.__setattr__(self, "elements", elements)
        n = len(elements)
        unis = {}
        for label, mats in dict(self.unitaries).items():
            mats = list(mats)
            if len(mats) != n:
                raise BadRepresentation(f"{len(mats)} unitaries for {n} group elements on {list(label.names)}")
            unis[label] = tuple(_as_unitary(m, label.dim) for m in mats)
        object.__setattr__(self, "unitaries", unis)
        table = self.table if self.table is not None else self._infer_table()
        table = tuple(tuple(int(k) for k in row) for row in table)
        if len(table) != n or any(len(r) != n for r in table) or any(not 0 <= k < n for r in table for k in r):
            raise BadRepresentation("multiplication table has the wrong shape")
        object.__setattr__(self, "table", table)
        self._verify_table()

    @classmethod
    def cyclic(cls, order: int, generators: Mapping[SystemLabel, np.ndarray],
               factorize: bool = False) -> "GroupRepresentation":
        """Z_order generated by the given unitary on each label."""
        unis = {}
        for label, g in generators.items():
            g = la.as_matrix(g, square=True)
            unis[label] = [np.linalg.matrix_power(g, k) for k in range(order)]
        table = [[(i + j) % order for j in range(order)] for i in range(order)]
        return cls(tuple(str(k) for k in range(order)), unis, table, factorize)

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def declared(self) -> list[SystemLabel]:
        return list(self.unitaries)

    def _infer_table(self):
        n = len(self.elements)
        if not self.unitaries:
            raise BadRepresentation("cannot infer a multiplication table without matrices")
        table = []
        for i in range(n):
            row = []
            for j in range(n):
                hits = [k for k in range(n) if all(
                    _proportional(mats[i] @ mats[j], mats[k], 1e-9) for mats in self.unitaries.values())]
                if not hits:
                    raise BadRepresentation(
                        f"product of elements {self.elements[i]} and {self.elements[j]} is not in the group")
                row.append(hits[0])
            table.append(row)
        return table

    def _verify_table(self):
        n = self.order
        for label, mats in self.unitaries.items():
            for i in range(n):
                for j in range(n):
                    if not _proportional(mats[i] @ mats[j], mats[self.table[i][j]], 1e-9):
                        raise BadRepresentation(
                            f"R({self.elements[i]})R({self.elements[j]}) != R({self.elements[self.table[i][j]]}) "
                            f"on {list(label.names)}")
        ident = [e for e in range(n) if all(self.table[e][j] == j for j in range(n))]
        if not ident:
            raise BadRepresentation("multiplication table has no identity element")
        e = ident[0]
        for i in range(n):
            if not any(self.table[i][j] == e for j in range(n)):
                raise BadRepresentation(f"element {self.elements[i]} has no inverse")
        for i, j, k in itertools.product(range(n), repeat=3):
            if self.table[self.table[i][j]][k] != self.table[i][self.table[j][k]]:
                raise BadRepresentation("multiplication table is not associative")

    def has(self, label: SystemLabel) -> bool:
        try:
            self.on(label)
        except MissingAssignment:
            return False
        return True

    def on(self, label: SystemLabel) -> tuple[np.ndarray, ...]:
        """Unitaries representing each group element on ``label``."""
        if label in self.unitaries:
            return self.unitaries[label]
        if label.is_trivial:
            return tuple(np.ones((1, 1), dtype=complex) for _ in self.elements)
        if label in self._cache:
            return self._cache[label]
        if self.factorize:
            parts = []
            for s in label.factors:
                single = SystemLabel((s,))
                if single not in self.unitaries:
                    raise MissingAssignment(f"no representation declared on system {s.name}")
                parts.append(self.unitaries[single])
            mats = tuple(la.tensor_all([p[k] for p in parts]) for k in range(self.order))
            self._cache[label] = mats
            return mats
        raise MissingAssignment(f"no representation declared on {list(label.names)}")

    def channels(self, label: SystemLabel) -> list[QuantumProcess]:
        return [pr.unitary_channel(u, label) for u in self.on(label)]


# constructors

def make_dephasing(basis, sys: SystemLabel, tol: Tolerance = DEFAULT_TOL) -> DecoherenceProcess:
    """Complete dephasing in the orthonormal basis given by the columns of ``basis``."""
    u = _as_unitary(basis, sys.dim, BadBasis, tol.eq_atol)
    kraus = [np.outer(u[:, i], u[:, i].conj()) for i in range(sys.dim)]
    return DecoherenceProcess(sys, pr.from_kraus(kraus, sys, sys, tol, check=False))


def computational_dephasing(sys: SystemLabel) -> DecoherenceProcess:
    return make_dephasing(np.eye(sys.dim), sys)


def make_block_dephasing(blocks: Sequence[Sequence[int]], sys: SystemLabel,
                         tol: Tolerance = DEFAULT_TOL) -> DecoherenceProcess:
    """Kill coherence between blocks of computational basis states, keep it inside each block."""
    seen: list[int] = []
    for b in blocks:
        if len(b) == 0:
            raise BadPartition("empty block")
        seen.extend(int(i) for i in b)
    if sorted(seen) != list(range(sys.dim)):
        raise BadPartition(f"blocks {blocks} do not partition range({sys.dim})")
    kraus = []
    for b in blocks:
        p = np.zeros((sys.dim, sys.dim), dtype=complex)
        for i in b:
            p[int(i), int(i)] = 1.0
        kraus.append(p)
    return DecoherenceProcess(sys, pr.from_kraus(kraus, sys, sys, tol, check=False))


def twirl_process(rep: GroupRepresentation, sys: SystemLabel) -> QuantumProcess:
    chans = rep.channels(sys)
    return QuantumProcess(sys, sys, sum(c.choi for c in chans) / len(chans))


def make_twirl(rep: GroupRepresentation, sys: SystemLabel, tol: Tolerance = DEFAULT_TOL) -> DecoherenceProcess:
    """Group average of the conjugation action on ``sys``."""
    proc = twirl_process(rep, sys)
    rep_ = validate_decoherence(proc, tol)
    if not rep_.valid:
        raise BadRepresentation("twirl is not idempotent: " + ", ".join(rep_.failures))
    return DecoherenceProcess(sys, proc)


def make_reference_frame_mechanism(rep: GroupRepresentation, pointer_states: Sequence, sys: SystemLabel,
                                   env: SystemLabel, tol: Tolerance = DEFAULT_TOL) -> DecoherenceMechanism:
    """``rho -> (1/|G|) sum_g R_g rho R_g^dag (x) s_g`` with one pointer state per element."""
    if len(pointer_states) != rep.order:
        raise BadMechanism(f"{len(pointer_states)} pointer states for a group of order {rep.order}")
    states = []
    for s in pointer_states:
        s = la.as_matrix(s, square=True)
        if s.shape[0] != env.dim:
            raise BadMechanism(f"pointer state of size {s.shape[0]} on environment of size {env.dim}")
        if not la.is_psd(s, tol) or abs(np.trace(s) - 1.0) > tol.eq_atol * 10:
            raise BadMechanism("pointer states must be normalised density matrices")
        states.append(s)
    choi = sum(np.kron(c.choi, s) for c, s in zip(rep.channels(sys), states)) / rep.order
    return DecoherenceMechanism(sys, env, QuantumProcess(sys, sys + env, choi))


def make_copy_mechanism(sys: SystemLabel, env: SystemLabel | None = None) -> DecoherenceMechanism:
    """Copy the computational basis index into the environment: ``|i> -> |i>|i>``."""
    if env is None:
        env = SystemLabel.of(pr.AtomicSystem("E_" + "".join(sys.names), sys.dim))
    if env.dim != sys.dim:
        raise BadMechanism("copy mechanism needs an environment of the same dimension")
    d = sys.dim
    v = np.zeros((d * d, d), dtype=complex)
    for i in range(d):
        v[i * d + i, i] = 1.0
    return DecoherenceMechanism(sys, env, pr.from_kraus([v], sys, sys + env, check=False))


def parallel_mechanisms(mechs: Sequence[DecoherenceMechanism]) -> DecoherenceMechanism:
    """Side-by-side mechanisms, with outputs reordered to all systems then all environments."""
    proc = pr.parallel_all(m.proc for m in mechs)
    order_sys, order_env, k = [], [], 0
    for m in mechs:
        order_sys.extend(range(k, k + len(m.sys)))
        k += len(m.sys)
        order_env.extend(range(k, k + len(m.env)))
        k += len(m.env)
    proc = pr.permute_wires(proc, range(len(proc.input)), order_sys + order_env)
    sys = sum((m.sys for m in mechs), TRIVIAL)
    env = sum((m.env for m in mechs), TRIVIAL)
    return DecoherenceMechanism(sys, env, proc)


# families

@dataclass(frozen=True, eq=False)
class DecoherenceFamily:
    assignments: Mapping[SystemLabel, DecoherenceProcess]
    rule: str = PRODUCT
    mechanisms: Mapping[SystemLabel, DecoherenceMechanism] = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.rule not in (PRODUCT, GLOBAL):
            raise ValueError(f"unknown composition rule {self.rule!r}")
        assignments = {}
        for label, d in dict(self.assignments).items():
            if isinstance(d, QuantumProcess):
                d = DecoherenceProcess(label, d)
            if d.sys != label:
                raise WireMismatch(f"assignment for {list(label.names)} acts on {list(d.sys.names)}")
            assignments[label] = d
        object.__setattr__(self, "assignments", assignments)
        object.__setattr__(self, "mechanisms", dict(self.mechanisms))

    @classmethod
    def product(cls, decs: Iterable[DecoherenceProcess], **kw) -> "DecoherenceFamily":
        return cls({d.sys: d for d in decs}, PRODUCT, **kw)

    @property
    def declared(self) -> list[SystemLabel]:
        return list(self.assignments)

    def has(self, label: SystemLabel) -> bool:
        if label in self.assignments or label.is_trivial:
            return True
        if self.rule == PRODUCT:
            return all(SystemLabel((s,)) in self.assignments for s in label.factors)
        return False

    def dec(self, label: SystemLabel) -> QuantumProcess:
        if label in self.assignments:
            return self.assignments[label].proc
        if label.is_trivial:
            return pr.identity(TRIVIAL)
        if label in self._cache:
            return self._cache[label]
        if self.rule == PRODUCT:
            parts = []
            for s in label.factors:
                single = SystemLabel((s,))
                if single not in self.assignments:
                    raise MissingAssignment(f"no decoherence assigned to system {s.name}")
                parts.append(self.assignments[single].proc)
            out = pr.parallel_all(parts)
            self._cache[label] = out
            return out
        raise MissingAssignment(f"no decoherence declared on {list(label.names)} under the global rule")

    def mechanism(self, label: SystemLabel) -> DecoherenceMechanism:
        if label in self.mechanisms:
            return self.mechanisms[label]
        raise MissingAssignment(f"no decoherence mechanism declared on {list(label.names)}")


def twirl_family(rep: GroupRepresentation, labels: Iterable[SystemLabel], rule: str = GLOBAL,
                 tol: Tolerance = DEFAULT_TOL) -> DecoherenceFamily:
    return DecoherenceFamily({l: make_twirl(rep, l, tol) for l in labels}, rule)


def decohered_residual(f: QuantumProcess, fam: DecoherenceFamily) -> float:
    g = pr.compose(fam.dec(f.input), f, fam.dec(f.output))
    return la.relative_residual(f.choi, g.choi)


def is_decohered(f: QuantumProcess, fam: DecoherenceFamily, tol: Tolerance = DEFAULT_TOL) -> bool:
    return decohered_residual(f, fam) <= tol.eq_atol


def decohere(f: QuantumProcess, fam: DecoherenceFamily) -> QuantumProcess:
    """Sandwich f between the decoherence of its input and output."""
    return pr.compose(fam.dec(f.input), f, fam.dec(f.output))


def _splits(label: SystemLabel):
    for k in range(1, len(label)):
        yield label[:k], label[k:]


def _three_way_splits(label: SystemLabel):
    n = len(label)
    for i in range(1, n):
        for j in range(i, n):
            yield label[:i], label[i:j], label[j:]


def staircase(fam: DecoherenceFamily, x: SystemLabel, y: SystemLabel, z: SystemLabel,
              mirrored: bool = False) -> QuantumProcess:
    """``(1_x (x) dec_yz) . (dec_xy (x) 1_z)``, or the other order when ``mirrored``."""
    left = pr.parallel(fam.dec(x + y), pr.identity(z))
    right = pr.parallel(pr.identity(x), fam.dec(y + z))
    return pr.sequential(right, left) if mirrored else pr.sequential(left, right)


def check_family_rule(fam: DecoherenceFamily, declared_systems: Iterable[SystemLabel] | None = None,
                      tol: Tolerance = DEFAULT_TOL) -> ValidationReport:
    """Residual of every constraint the composition rule imposes on the declared labels.

    Every assignment is validated as a decoherence process and every declared
    mechanism must induce the assigned decoherence. Product families then need
    ``dec_XY = dec_X (x) dec_Y``. Global families need, for each split of a
    declared label into declared parts,

    * ``dec_XY . (dec_X (x) 1_Y) = dec_X (x) dec_Y`` and the mirror image, and
    * for ``L = X Y Z`` with ``XY`` and ``YZ`` declared (``Y`` possibly empty),
      the staircase of partial decoherences is decohered by ``dec_L``.
    """
    labels = list(declared_systems) if declared_systems is not None else fam.declared
    rep = ValidationReport(threshold=tol.eq_atol)
    for label in labels:
        name = "".join(label.names)
        try:
            d = fam.dec(label)
        except MissingAssignment as exc:
            rep.fail(f"assigned[{name}]", str(exc))
            continue
        rep.merge(validate_decoherence(d, tol), prefix=f"def1[{name}].")
        if label in fam.mechanisms:
            m = fam.mechanisms[label]
            rep.record(f"mechanism[{name}]", la.relative_residual(d.choi, m.induced.choi))
    if not rep.valid:
        return rep

    for label in labels:
        if len(label) < 2:
            continue
        name = "".join(label.names)
        dl = fam.dec(label)
        if fam.rule == PRODUCT:
            parts = pr.parallel_all(fam.dec(label[i]) for i in range(len(label)))
            rep.record(f"product[{name}]", la.relative_residual(dl.choi, parts.choi))
            continue
        for x, y in _splits(label):
            tag = f"{''.join(x.names)}|{''.join(y.names)}"
            if not (fam.has(x) and fam.has(y)):
                rep.skipped.append(f"local[{tag}]")
                continue
            dx, dy = fam.dec(x), fam.dec(y)
            both = pr.parallel(dx, dy)
            lhs1 = pr.sequential(pr.parallel(dx, pr.identity(y)), dl)
            lhs2 = pr.sequential(pr.parallel(pr.identity(x), dy), dl)
            rep.record(f"local_left[{tag}]", la.relative_residual(both.choi, lhs1.choi))
            rep.record(f"local_right[{tag}]", la.relative_residual(both.choi, lhs2.choi))
        for x, y, z in _three_way_splits(label):
            tag = "|".join("".join(p.names) for p in (x, y, z))
            if not (fam.has(x + y) and fam.has(y + z)):
                rep.skipped.append(f"staircase[{tag}]")
                continue
            for mirrored in ((False,) if y.is_trivial else (False, True)):
                q = staircase(fam, x, y, z, mirrored)
                qq = pr.compose(dl, q, dl)
                key = f"staircase{'_mirror' if mirrored else ''}[{tag}]"
                rep.record(key, la.relative_residual(q.choi, qq.choi))
    return rep


def random_decohered(input: SystemLabel, output: SystemLabel, fam: DecoherenceFamily,
                     rng: np.random.Generator, causal: bool | None = None) -> QuantumProcess:
    if causal is None:
        causal = bool(rng.integers(2))
    return decohere(pr.random_process(input, output, rng, causal=causal), fam)


def _label_pool(fam: DecoherenceFamily) -> list[SystemLabel]:
    pool = [TRIVIAL]
    for l in fam.declared:
        if l not in pool:
            pool.append(l)
    if fam.rule == PRODUCT:
        atoms = []
        for l in fam.declared:
            for s in l.factors:
                single = SystemLabel((s,))
                if single not in atoms:
                    atoms.append(single)
        for a in atoms:
            if a not in pool:
                pool.append(a)
        for a, b in itertools.product(atoms, repeat=2):
            if a + b not in pool:
                pool.append(a + b)
    return pool


def wiring_shapes(fam: DecoherenceFamily, max_choi_dim: int = 64, staircase_ok=None):
    """Enumerate typed wirings ``f: X -> Y W``, ``g: W V -> Z`` whose boxes and result are all assigned.

    Returns a dict from composite kind to a list of ``(X, Y, W, V, Z)`` tuples.
    """
    pool = _label_pool(fam)
    has = {}

    def ok(l: SystemLabel) -> bool:
        if l not in has:
            has[l] = fam.has(l)
        return has[l]

    shapes: dict[str, list] = {"sequential": [], "parallel": [], "wire_output": [], "wire_input": [],
                               "staircase": []}
    for y, w in itertools.product(pool, repeat=2):
        yw = y + w
        if not ok(yw):
            continue
        for x in pool:
            if x.dim * yw.dim > max_choi_dim:
                continue
            for v in pool:
                wv, xv = w + v, x + v
                if not (ok(wv) and ok(xv)):
                    continue
                for z in pool:
                    yz = y + z
                    if max(wv.dim * z.dim, xv.dim * yz.dim) > max_choi_dim or not ok(yz):
                        continue
                    if y.is_trivial and v.is_trivial:
                        if w.is_trivial:
                            continue
                        kind = "sequential"
                    elif w.is_trivial:
                        kind = "parallel"
                    elif v.is_trivial:
                        kind = "wire_output"
                    elif y.is_trivial:
                        kind = "wire_input"
                    else:
                        if staircase_ok is not None and not staircase_ok(y, w, v):
                            continue
                        kind = "staircase"
                    shapes[kind].append((x, y, w, v, z))
    return shapes


def closure_property_test(fam: DecoherenceFamily, samples: int = 100, seed: int | None = 0,
                          tol: Tolerance = DEFAULT_TOL, threshold: float = 1e-8,
                          max_choi_dim: int = 64) -> PropertyReport:
    """Compose random decohered processes in every assigned wiring shape and check the result is decohered.

    Each sample draws one composite of every available kind (sequential,
    parallel, partial wiring on either side, and the two-sided staircase).
    Under the global rule a staircase through ``Y W V`` is only drawn when
    ``Y W V`` is itself declared, so that its compatibility constraint has
    been checked.
    """
    rule = check_family_rule(fam, tol=tol)
    if not rule.valid:
        raise PreconditionFailed("family violates its composition rule: " + ", ".join(rule.failures))
    if fam.rule == GLOBAL:
        def staircase_ok(y, w, v):
            return (y + w + v) in fam.assignments
    else:
        staircase_ok = None
    shapes = wiring_shapes(fam, max_choi_dim, staircase_ok)
    rng = np.random.default_rng(seed)
    report = PropertyReport("decohered-closure", samples, seed, threshold)
    for _ in range(samples):
        for kind, options in shapes.items():
            if not options:
                report.skip(kind)
                continue
            x, y, w, v, z = options[rng.integers(len(options))]
            f = random_decohered(x, y + w, fam, rng)
            g = random_decohered(w + v, z, fam, rng)
            comp = pr.wire(f, g, len(w))
            detail = "/".join("".join(l.names) or "I" for l in (x, y, w, v, z))
            report.record(kind, decohered_residual(comp, fam), detail)
    return report
