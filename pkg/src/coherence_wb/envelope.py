"""Idempotent-labelled systems: the Karoubi envelope and the decoherence-labelled theory.

A label pairs a system with a decoherence process on it. In the envelope a
process between labels must be unchanged when sandwiched between the two
idempotents; in the labelled theory any process is allowed, and the free
ones are those that commute with the labels.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import linalg as la
from . import process as pr
from . import solver as sv
from .decoherence import DecoherenceProcess, computational_dephasing, make_block_dephasing
from .errors import NumericalFailure, WireMismatch
from .linalg import DEFAULT_TOL, Tolerance
from .process import AtomicSystem, QuantumProcess, SystemLabel
from .reports import PropertyReport


@dataclass(frozen=True, eq=False)
class IdempotentLabel:
    base: SystemLabel
    idem: DecoherenceProcess
    name: str = ""

    def __post_init__(self):
        if self.idem.sys != self.base:
            raise WireMismatch(f"idempotent acts on {list(self.idem.sys.names)}, not on {list(self.base.names)}")

    @classmethod
    def checked(cls, base: SystemLabel, proc: QuantumProcess, tol: Tolerance = DEFAULT_TOL) -> "IdempotentLabel":
        return cls(base, DecoherenceProcess.checked(proc, tol))

    @classmethod
    def plain(cls, base: SystemLabel) -> "IdempotentLabel":
        """The system with the identity as its idempotent."""
        return cls(base, DecoherenceProcess(base, pr.identity(base)), "id")

    @property
    def proc(self) -> QuantumProcess:
        return self.idem.proc

    def same(self, other: "IdempotentLabel", tol: Tolerance = DEFAULT_TOL) -> bool:
        return self.base == other.base and la.approx_eq(self.proc.choi, other.proc.choi, tol)

    def __str__(self):
        return f"({self.base}, {self.name or 'idem'})"


def label_compose(a: IdempotentLabel, b: IdempotentLabel, tol: Tolerance = DEFAULT_TOL) -> IdempotentLabel:
    lab = IdempotentLabel.checked(a.base + b.base, pr.parallel(a.proc, b.proc), tol)
    return IdempotentLabel(lab.base, lab.idem, f"{a.name or 'idem'}*{b.name or 'idem'}")


def _check_types(src: IdempotentLabel, dst: IdempotentLabel, proc: QuantumProcess):
    if proc.input != src.base or proc.output != dst.base:
        raise WireMismatch(f"process {proc} does not run between {src.base} and {dst.base}")


@dataclass(frozen=True, eq=False)
class DProcess:
    """Any process between the bases of two labels."""

    src: IdempotentLabel
    dst: IdempotentLabel
    proc: QuantumProcess

    def __post_init__(self):
        _check_types(self.src, self.dst, self.proc)


@dataclass(frozen=True, eq=False)
class KProcess:
    """A process left unchanged by sandwiching between the label idempotents."""

    src: IdempotentLabel
    dst: IdempotentLabel
    proc: QuantumProcess

    def __post_init__(self):
        _check_types(self.src, self.dst, self.proc)
        r = sandwich_residual(DProcess(self.src, self.dst, self.proc))
        if r > 1e-6:
            raise ValueError(f"process is not fixed by the label idempotents (residual {r:.3e})")

    @classmethod
    def lift(cls, src: IdempotentLabel, dst: IdempotentLabel, proc: QuantumProcess) -> "KProcess":
        """Sandwich an arbitrary process into the envelope."""
        return cls(src, dst, pr.compose(src.proc, proc, dst.proc))

    def as_dprocess(self) -> DProcess:
        return DProcess(self.src, self.dst, self.proc)


def sandwich_residual(p: DProcess) -> float:
    return la.relative_residual(p.proc.choi, pr.compose(p.src.proc, p.proc, p.dst.proc).choi)


def is_k_process(p: DProcess, tol: Tolerance = DEFAULT_TOL) -> bool:
    return sandwich_residual(p) <= tol.eq_atol


def commutation_residual(p: DProcess) -> float:
    return la.relative_residual(pr.sequential(p.src.proc, p.proc).choi, pr.sequential(p.proc, p.dst.proc).choi)


def is_dp_dio(p: DProcess, tol: Tolerance = DEFAULT_TOL) -> bool:
    """``f . idem_in == idem_out . f``."""
    return commutation_residual(p) <= tol.eq_atol


def k_compose(p: KProcess, q: KProcess, tol: Tolerance = DEFAULT_TOL) -> KProcess:
    """``q . p`` (first p, then q); the middle labels must agree."""
    if not p.dst.same(q.src, tol):
        raise WireMismatch("labels do not match at the composition point")
    return KProcess(p.src, q.dst, pr.sequential(p.proc, q.proc))


def k_parallel(p: KProcess, q: KProcess, tol: Tolerance = DEFAULT_TOL) -> KProcess:
    return KProcess(label_compose(p.src, q.src, tol), label_compose(p.dst, q.dst, tol), pr.parallel(p.proc, q.proc))


def d_compose(p: DProcess, q: DProcess, tol: Tolerance = DEFAULT_TOL) -> DProcess:
    if not p.dst.same(q.src, tol):
        raise WireMismatch("labels do not match at the composition point")
    return DProcess(p.src, q.dst, pr.sequential(p.proc, q.proc))


def d_parallel(p: DProcess, q: DProcess, tol: Tolerance = DEFAULT_TOL) -> DProcess:
    return DProcess(label_compose(p.src, q.src, tol), label_compose(p.dst, q.dst, tol), pr.parallel(p.proc, q.proc))


def random_dp_dio(src: IdempotentLabel, dst: IdempotentLabel, rng: np.random.Generator,
                  tol: Tolerance = DEFAULT_TOL) -> DProcess:
    """A random causal process commuting with the labels.

    Half the draws are sandwiches of a random channel; the rest project a
    random channel onto the commuting subspace and restore positivity with
    the feasibility solver, which reaches members that are not sandwiches.
    """
    k = pr.random_process(src.base, dst.base, rng)
    if rng.random() < 0.5:
        return DProcess(src, dst, pr.compose(src.proc, k, dst.proc))
    din, dout = src.base.dim, dst.base.dim
    n = din * dout

    def diff(x):
        f = QuantumProcess(src.base, dst.base, x)
        return pr.sequential(src.proc, f).choi - pr.sequential(f, dst.proc).choi

    maps = [(diff, 0.0), (lambda x: la.partial_trace(x, [din, dout], [0]), np.eye(din))]
    aff = sv.AffineSet(*sv.hermitian_linear_system(maps, n))
    res = sv.solve(aff, sv.Cone(((sv.PSD, n),)), aff.project(la.herm_to_vec(k.choi)), max_iter=2000,
                   psd_atol=tol.psd_atol)
    if not res.converged:
        return DProcess(src, dst, pr.compose(src.proc, k, dst.proc))
    return DProcess(src, dst, QuantumProcess(src.base, dst.base, la.vec_to_herm(res.x, n)))


def default_labels() -> list[IdempotentLabel]:
    """Qubit and qutrit labels with identity, dephasing and block-dephasing idempotents."""
    q = SystemLabel.of(AtomicSystem("q", 2))
    t = SystemLabel.of(AtomicSystem("t", 3))
    return [IdempotentLabel.plain(q), IdempotentLabel(q, computational_dephasing(q), "D"),
            IdempotentLabel.plain(t), IdempotentLabel(t, computational_dephasing(t), "D"),
            IdempotentLabel(t, make_block_dephasing([[0, 1], [2]], t), "B")]


def dp_dio_closure_test(samples: int = 100, seed: int | None = 0, tol: Tolerance = DEFAULT_TOL,
                        labels: Sequence[IdempotentLabel] | None = None, threshold: float = 1e-8) -> PropertyReport:
    """Compose random commuting processes between random labels and test the composites."""
    labels = list(labels) if labels is not None else default_labels()
    rng = np.random.default_rng(seed)
    report = PropertyReport("dp-dio-closure", samples, seed, threshold)
    for _ in range(samples):
        i, j, k = rng.integers(len(labels), size=3)
        f = random_dp_dio(labels[i], labels[j], rng, tol)
        g = random_dp_dio(labels[j], labels[k], rng, tol)
        for member in (f, g):
            if not is_dp_dio(member, tol):
                raise NumericalFailure(f"generated process fails the commutation check ({commutation_residual(member):.3e})")
        report.record("sequential", commutation_residual(d_compose(f, g, tol)),
                      f"{labels[i]}->{labels[j]}->{labels[k]}")
        a, b = rng.integers(len(labels), size=2)
        h = random_dp_dio(labels[a], labels[b], rng, tol)
        par = d_parallel(f, h, tol)
        report.record("parallel", commutation_residual(par), f"{labels[i]}{labels[a]}->{labels[j]}{labels[b]}")
    return report
