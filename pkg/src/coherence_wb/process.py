"""Finite-dimensional quantum theory as a process theory.

Processes are completely positive trace non-increasing maps stored as Choi
matrices. The Choi matrix of ``f: A -> B`` is

    J = sum_ij |i><j| (x) f(|i><j|)

with the input factor on the major index, so ``J[(a, b), (a', b')]`` is the
``(b, b')`` entry of ``f(|a><a'|)``. Sequential composition goes through the
row-major superoperator ``S[(b, b'), (a, a')] = J[(a, b), (a', b')]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from . import linalg as la
from .errors import NotCPTNI, ShapeError, WireMismatch
from .linalg import DEFAULT_TOL, Tolerance


@dataclass(frozen=True)
class AtomicSystem:
    name: str
    dim: int
    classical: bool = False

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ShapeError(f"system {self.name!r} must have dim >= 1")


@dataclass(frozen=True)
class SystemLabel:
    """Ordered list of atomic systems naming a wire type; empty means no system."""

    factors: tuple[AtomicSystem, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        la.check_dimension(self.dim)

    @classmethod
    def of(cls, *systems: AtomicSystem) -> "SystemLabel":
        return cls(tuple(systems))

    @property
    def dims(self) -> list[int]:
        return [s.dim for s in self.factors]

    @property
    def dim(self) -> int:
        return math.prod(s.dim for s in self.factors)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.factors)

    @property
    def is_trivial(self) -> bool:
        return not self.factors

    def __add__(self, other: "SystemLabel") -> "SystemLabel":
        return SystemLabel(self.factors + other.factors)

    def __len__(self):
        return len(self.factors)

    def __iter__(self):
        return iter(self.factors)

    def __getitem__(self, item) -> "SystemLabel":
        if isinstance(item, slice):
            return SystemLabel(self.factors[item])
        return SystemLabel((self.factors[item],))

    def __str__(self):
        return "".join(self.names) if self.factors else "I"


TRIVIAL = SystemLabel()


def choi_to_superop(choi: np.ndarray, din: int, dout: int) -> np.ndarray:
    t = np.asarray(choi).reshape(din, dout, din, dout)
    return t.transpose(1, 3, 0, 2).reshape(dout * dout, din * din)


def superop_to_choi(sop: np.ndarray, din: int, dout: int) -> np.ndarray:
    t = np.asarray(sop).reshape(dout, dout, din, din)
    return t.transpose(2, 0, 3, 1).reshape(din * dout, din * dout)


@dataclass(frozen=True, eq=False)
class QuantumProcess:
    """A process ``input -> output`` held as its Choi matrix.

    The constructor only checks shapes; use :func:`from_choi` or
    :func:`from_kraus` to validate complete positivity and trace
    non-increase on ingestion.
    """

    input: SystemLabel
    output: SystemLabel
    choi: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = self.input.dim * self.output.dim
        la.check_dimension(n)
        c = la.as_matrix(self.choi, square=True)
        if c.shape != (n, n):
            raise ShapeError(f"Choi matrix of shape {c.shape} does not fit {self.input.dims}->{self.output.dims}")
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "choi", c)

    @property
    def din(self) -> int:
        return self.input.dim

    @property
    def dout(self) -> int:
        return self.output.dim

    @property
    def superop(self) -> np.ndarray:
        return choi_to_superop(self.choi, self.din, self.dout)

    def __matmul__(self, other: "QuantumProcess") -> "QuantumProcess":
        # self @ other == self after other
        return sequential(other, self)

    def __repr__(self):
        return f"QuantumProcess({list(self.input.names)} -> {list(self.output.names)})"


def from_superop(sop: np.ndarray, input: SystemLabel, output: SystemLabel) -> QuantumProcess:
    return QuantumProcess(input, output, superop_to_choi(sop, input.dim, output.dim))


def trace_defect(f: QuantumProcess) -> np.ndarray:
    """``I - Tr_out J``; PSD for trace non-increasing maps, zero for causal ones."""
    red = la.partial_trace(f.choi, [f.din, f.dout], keep=[0])
    return np.eye(f.din) - red.T


def is_cptni(f: QuantumProcess, tol: Tolerance = DEFAULT_TOL) -> bool:
    return la.is_psd(f.choi, tol) and la.is_psd(trace_defect(f), tol)


def is_causal(f: QuantumProcess, tol: Tolerance = DEFAULT_TOL) -> bool:
    """``discard . f == discard``: the output marginal of the Choi matrix is the identity."""
    red = la.partial_trace(f.choi, [f.din, f.dout], keep=[0])
    return la.approx_eq(np.eye(f.din), red, tol)


def causality_residual(f: QuantumProcess) -> float:
    red = la.partial_trace(f.choi, [f.din, f.dout], keep=[0])
    return la.relative_residual(np.eye(f.din), red)


def _classical_violations(f: QuantumProcess, tol: Tolerance) -> list[str]:
    bad = []
    for pos, s in enumerate(f.input.factors):
        if s.classical:
            deph = dephase_wire(f.input, pos)
            if not la.approx_eq(f.choi, sequential(deph, f).choi, tol):
                bad.append(f"input wire {s.name}")
    for pos, s in enumerate(f.output.factors):
        if s.classical:
            deph = dephase_wire(f.output, pos)
            if not la.approx_eq(f.choi, sequential(f, deph).choi, tol):
                bad.append(f"output wire {s.name}")
    return bad


def from_choi(choi, input: SystemLabel, output: SystemLabel,
              tol: Tolerance = DEFAULT_TOL, check: bool = True) -> QuantumProcess:
    f = QuantumProcess(input, output, choi)
    if check:
        if not la.is_psd(f.choi, tol):
            raise NotCPTNI("Choi matrix is not positive semidefinite")
        if not la.is_psd(trace_defect(f), tol):
            raise NotCPTNI("map increases trace")
        bad = _classical_violations(f, tol)
        if bad:
            raise NotCPTNI("not diagonal on classical " + ", ".join(bad))
    return f


def from_kraus(kraus: Sequence, input: SystemLabel, output: SystemLabel,
               tol: Tolerance = DEFAULT_TOL, check: bool = True) -> QuantumProcess:
    """Build a process from Kraus operators of shape ``(dout, din)``."""
    din, dout = input.dim, output.dim
    ks = [la.as_matrix(k) for k in kraus]
    for k in ks:
        if k.shape != (dout, din):
            raise ShapeError(f"Kraus operator of shape {k.shape}, expected {(dout, din)}")
    if check:
        s = sum((k.conj().T @ k for k in ks), np.zeros((din, din), dtype=complex))
        if not la.is_psd(np.eye(din) - s, tol):
            raise NotCPTNI("sum of K^dag K exceeds the identity")
    # column i of K is K|i>, so J = sum_k vec(K^T) vec(K^T)^dag with input major
    if ks:
        v = np.stack([k.T.reshape(-1) for k in ks], axis=1)
        choi = v @ v.conj().T
    else:
        choi = np.zeros((din * dout, din * dout), dtype=complex)
    return from_choi(choi, input, output, tol, check=check)


def unitary_channel(u, sys: SystemLabel) -> QuantumProcess:
    u = la.as_matrix(u, square=True)
    return from_kraus([u], sys, sys, check=False)


def identity(sys: SystemLabel) -> QuantumProcess:
    d = sys.dim
    v = np.eye(d).reshape(-1)
    return QuantumProcess(sys, sys, np.outer(v, v))


def discard(sys: SystemLabel) -> QuantumProcess:
    return QuantumProcess(sys, TRIVIAL, np.eye(sys.dim))


def prepare(rho, sys: SystemLabel) -> QuantumProcess:
    return QuantumProcess(TRIVIAL, sys, la.as_matrix(rho, square=True))


def effect(e, sys: SystemLabel) -> QuantumProcess:
    # Tr(e |i><j|) = e[j, i]
    return QuantumProcess(sys, TRIVIAL, la.as_matrix(e, square=True).T)


def scalar(p: float) -> QuantumProcess:
    return QuantumProcess(TRIVIAL, TRIVIAL, np.array([[p]], dtype=complex))


def as_state(f: QuantumProcess) -> np.ndarray:
    if not f.input.is_trivial:
        raise WireMismatch("process has a non-trivial input")
    return np.array(f.choi)


def as_effect(f: QuantumProcess) -> np.ndarray:
    if not f.output.is_trivial:
        raise WireMismatch("process has a non-trivial output")
    return np.array(f.choi).T


def sequential(f: QuantumProcess, g: QuantumProcess) -> QuantumProcess:
    """``g . f``: first f, then g."""
    if f.output != g.input:
        raise WireMismatch(f"cannot plug {list(f.output.names)} into {list(g.input.names)}")
    return from_superop(g.superop @ f.superop, f.input, g.output)


def sequential_ext(f: QuantumProcess, c: SystemLabel, g: QuantumProcess) -> QuantumProcess:
    """``g . (f (x) id_c)`` without building the identity factor."""
    if c.is_trivial:
        return sequential(f, g)
    if f.output + c != g.input:
        raise WireMismatch(f"cannot plug {list((f.output + c).names)} into {list(g.input.names)}")
    x, y, k, z = f.din, f.dout, c.dim, g.dout
    la.check_dimension(x * k * z)
    jf = f.choi.reshape(x, y, x, y)
    jg = g.choi.reshape(y, k, z, y, k, z)
    j = np.tensordot(jf, jg, axes=([1, 3], [0, 3]))  # a b | c z d e
    j = j.transpose(0, 2, 3, 1, 4, 5).reshape(x * k * z, x * k * z)
    return QuantumProcess(f.input + c, g.output, j)


def ext_sequential(a: QuantumProcess, f: QuantumProcess, c: SystemLabel) -> QuantumProcess:
    """``(f (x) id_c) . a`` without building the identity factor."""
    if c.is_trivial:
        return sequential(a, f)
    if a.output != f.input + c:
        raise WireMismatch(f"cannot plug {list(a.output.names)} into {list((f.input + c).names)}")
    w, x, y, k = a.din, f.din, f.dout, c.dim
    la.check_dimension(w * y * k)
    ja = a.choi.reshape(w, x, k, w, x, k)
    jf = f.choi.reshape(x, y, x, y)
    j = np.tensordot(ja, jf, axes=([1, 4], [0, 2]))  # w c v d | y t
    j = j.transpose(0, 4, 1, 2, 5, 3).reshape(w * y * k, w * y * k)
    return QuantumProcess(a.input, f.output + c, j)


def compose(*procs: QuantumProcess) -> QuantumProcess:
    """Sequential composition in diagram order: ``compose(f, g, h) == h . g . f``."""
    return reduce(sequential, procs)


def parallel(f: QuantumProcess, g: QuantumProcess) -> QuantumProcess:
    a, b = f.din, f.dout
    c, d = g.din, g.dout
    la.check_dimension(a * b * c * d)
    jf = f.choi.reshape(a, b, a, b)
    jg = g.choi.reshape(c, d, c, d)
    j = np.einsum("abxy,cdzw->acbdxzyw", jf, jg).reshape(a * b * c * d, a * b * c * d)
    return QuantumProcess(f.input + g.input, f.output + g.output, j)


def parallel_all(procs: Iterable[QuantumProcess]) -> QuantumProcess:
    return reduce(parallel, procs, scalar(1.0))


def wire(f: QuantumProcess, g: QuantumProcess, n: int) -> QuantumProcess:
    """Feed the last ``n`` output factors of f into the first ``n`` inputs of g.

    With ``f: A -> B C`` and ``g: C D -> E`` the result is
    ``(id_B (x) g) . (f (x) id_D): A D -> B E``. ``n == 0`` is the parallel
    composite and full overlap with no spare wires is sequential composition.
    """
    if n < 0 or n > len(f.output) or n > len(g.input):
        raise WireMismatch(f"cannot connect {n} wires")
    k = len(f.output) - n
    b, c = f.output[:k], f.output[k:]
    if c != g.input[:n]:
        raise WireMismatch(f"wire types {list(c.names)} and {list(g.input[:n].names)} differ")
    d = g.input[n:]
    return sequential(parallel(f, identity(d)), parallel(identity(b), g))


def apply(f: QuantumProcess, rho) -> np.ndarray:
    rho = la.as_matrix(rho, square=True)
    if rho.shape[0] != f.din:
        raise WireMismatch(f"state of size {rho.shape[0]} on input of size {f.din}")
    return (f.superop @ rho.reshape(-1)).reshape(f.dout, f.dout)


def apply_adjoint(f: QuantumProcess, e) -> np.ndarray:
    """Heisenberg picture: the effect ``e . f`` on the input, as an operator."""
    e = la.as_matrix(e, square=True)
    if e.shape[0] != f.dout:
        raise WireMismatch(f"effect of size {e.shape[0]} on output of size {f.dout}")
    return (f.superop.conj().T @ e.reshape(-1)).reshape(f.din, f.din)


def trace_out(f: QuantumProcess, positions: Iterable[int]) -> QuantumProcess:
    """Discard the listed output factors."""
    positions = set(positions)
    nin, nout = len(f.input), len(f.output)
    keep = list(range(nin)) + [nin + i for i in range(nout) if i not in positions]
    dims = f.input.dims + f.output.dims
    out = SystemLabel(tuple(s for i, s in enumerate(f.output.factors) if i not in positions))
    if not dims:
        return f
    return QuantumProcess(f.input, out, la.partial_trace(f.choi, dims, keep))


def _check_perm(perm: Sequence[int], n: int) -> list[int]:
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(n)):
        raise ShapeError(f"{perm} is not a permutation of {n} factors")
    return perm


def permute_wires(f: QuantumProcess, perm_in: Sequence[int], perm_out: Sequence[int]) -> QuantumProcess:
    """Reorder wires: new input factor k is old input factor ``perm_in[k]`` (same for outputs)."""
    nin, nout = len(f.input), len(f.output)
    pin, pout = _check_perm(perm_in, nin), _check_perm(perm_out, nout)
    dims = f.input.dims + f.output.dims
    n = nin + nout
    if n == 0:
        return f
    axes = pin + [nin + p for p in pout]
    t = f.choi.reshape(dims + dims).transpose(axes + [n + a for a in axes])
    new_in = SystemLabel(tuple(f.input.factors[p] for p in pin))
    new_out = SystemLabel(tuple(f.output.factors[p] for p in pout))
    size = new_in.dim * new_out.dim
    return QuantumProcess(new_in, new_out, t.reshape(size, size))


def swap(a: SystemLabel, b: SystemLabel) -> QuantumProcess:
    """Wire crossing ``a b -> b a``."""
    ident = identity(a + b)
    na, nb = len(a), len(b)
    return permute_wires(ident, list(range(na + nb)), list(range(na, na + nb)) + list(range(na)))


def dephase_wire(sys: SystemLabel, pos: int) -> QuantumProcess:
    """Computational-basis dephasing of factor ``pos``, identity on the rest."""
    parts = []
    for i, s in enumerate(sys.factors):
        single = SystemLabel((s,))
        if i == pos:
            kraus = [np.diag(np.eye(s.dim)[k]) for k in range(s.dim)]
            parts.append(from_kraus(kraus, single, single, check=False))
        else:
            parts.append(identity(single))
    return parallel_all(parts)


def random_kraus(din: int, dout: int, rng: np.random.Generator, rank: int | None = None) -> list[np.ndarray]:
    """Gaussian Kraus operators normalised to a trace-preserving map."""
    rank = rank or din * dout
    # fewer than din/dout operators cannot be trace preserving
    rank = max(rank, -(-din // dout))
    ks =rng.standard_normal((rank, dout, din)) + 1j * rng.standard_normal((rank, dout, din))
    s = np.einsum("kji,kjl->il", ks.conj(), ks)
    w, v = np.linalg.eigh(s)
    inv_sqrt = (v / np.sqrt(w)) @ v.conj().T
    return [k @ inv_sqrt for k in ks]


def random_process(input: SystemLabel, output: SystemLabel, rng: np.random.Generator,
                   causal: bool = True, rank: int | None = None) -> QuantumProcess:
    """Random CPTNI map from Gaussian Kraus operators.

    With ``causal=False`` the map is scaled down by a random factor in
    ``[0.3, 1]`` so that it is trace non-increasing but (almost surely) not
    causal.
    """
    ks = random_kraus(input.dim, output.dim, rng, rank)
    if not causal:
        scale = np.sqrt(rng.uniform(0.3, 1.0))
        ks = [k * scale for k in ks]
    return from_kraus(ks, input, output, check=False)


def random_unitary_channel(sys: SystemLabel, rng: np.random.Generator) -> QuantumProcess:
    return unitary_channel(la.random_unitary(sys.dim, rng), sys)
