"""Dense complex linear algebra with explicit tolerance semantics.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Kronecker products
put the left factor on the major (slow) index, and every reshape in the package
uses row-major (C) order.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionLimit, NumericalFailure, ShapeError

_MAX_DIM = 4096


def max_dimension() -> int:
    return _MAX_DIM


def set_max_dimension(n: int) -> int:
    """Change the composite-dimension cap; returns the previous value."""
    global _MAX_DIM
    if n < 1:
        raise ValueError("dimension cap must be positive")
    old, _MAX_DIM = _MAX_DIM, int(n)
    return old


def check_dimension(d: int) -> None:
    if d > _MAX_DIM:
        raise DimensionLimit(f"composite dimension {d} exceeds cap {_MAX_DIM}")


@dataclass(frozen=True)
class Tolerance:
    """Numerical tolerances.

    :param eq_atol: relative Frobenius tolerance for matrix equality (with an
        absolute floor: norms below one are treated as one).
    :param psd_atol: how far below zero the smallest eigenvalue may sit.
    :param feas_atol: residual accepted by the feasibility solver.
    """

    eq_atol: float = 1e-9
    psd_atol: float = 1e-9
    feas_atol: float = 1e-7

    def __post_init__(self):
        for name in ("eq_atol", "psd_atol", "feas_atol"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be strictly positive, got {v}")
        if self.feas_atol < self.eq_atol:
            raise ValueError("feas_atol must be at least eq_atol")


DEFAULT_TOL = Tolerance()


def as_matrix(m, *, square: bool = False) -> np.ndarray:
    """Coerce to a finite 2-d complex array."""
    a = np.asarray(m, dtype=complex)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2:
        raise ShapeError(f"expected a matrix, got array of shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ShapeError("matrix has non-finite entries")
    if square and a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got {a.shape}")
    return a


def tensor_product(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    check_dimension(a.shape[0] * b.shape[0])
    check_dimension(a.shape[1] * b.shape[1])
    return np.kron(a, b)


def tensor_all(mats: Iterable) -> np.ndarray:
    return reduce(tensor_product, mats, np.ones((1, 1), dtype=complex))


def partial_trace(m, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Trace out every factor not listed in ``keep``.

    Kept factors stay in their original order. An empty ``keep`` returns the
    1x1 matrix ``[[Tr m]]``.
    """
    m = as_matrix(m, square=True)
    dims = [int(d) for d in dims]
    if int(np.prod(dims, dtype=np.int64)) != m.shape[0]:
        raise ShapeError(f"dims {dims} do not match matrix of size {m.shape[0]}")
    keep = sorted(set(keep))
    n = len(dims)
    if any(k < 0 or k >= n for k in keep):
        raise ShapeError(f"keep indices {keep} out of range for {n} factors")
    t = m.reshape(dims + dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    if 2 * n > len(letters):
        raise ShapeError("too many tensor factors")
    row = list(letters[:n])
    col = [letters[n + i] if i in keep else row[i] for i in range(n)]
    out = [row[i] for i in keep] + [col[i] for i in keep]
    res = np.einsum("".join(row + col) + "->" + "".join(out), t)
    dk = int(np.prod([dims[i] for i in keep], dtype=np.int64))
    return np.asarray(res).reshape(dk, dk)


def hermitian_part(m) -> np.ndarray:
    m = as_matrix(m, square=True)
    return 0.5 * (m + m.conj().T)


def is_hermitian(m, tol: Tolerance = DEFAULT_TOL) -> bool:
    m = as_matrix(m, square=True)
    return approx_eq(m, m.conj().T, tol)


def min_eigenvalue(m) -> float:
    h = hermitian_part(m)
    try:
        return float(np.linalg.eigvalsh(h)[0])
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise NumericalFailure(str(exc)) from exc


def is_psd(m, tol: Tolerance = DEFAULT_TOL) -> bool:
    m = as_matrix(m, square=True)
    return is_hermitian(m, tol) and min_eigenvalue(m) >= -tol.psd_atol


def psd_project(m) -> np.ndarray:
    """Nearest PSD matrix in Frobenius norm (clip negative eigenvalues)."""
    h = hermitian_part(m)
    try:
        w, v = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(str(exc)) from exc
    w = np.clip(w, 0.0, None)
    out = (v * w) @ v.conj().T
    return 0.5 * (out + out.conj().T)


def frobenius(m) -> float:
    return float(np.linalg.norm(np.asarray(m)))


def relative_residual(a, b) -> float:
    """``||a - b||_F / max(1, ||a||_F)``, the quantity compared against eq_atol."""
    a, b = as_matrix(a), as_matrix(b)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    return frobenius(a - b) / max(1.0, frobenius(a))


def approx_eq(a, b, tol: Tolerance = DEFAULT_TOL) -> bool:
    return relative_residual(a, b) <= tol.eq_atol


# Isometric real parametrisation of Hermitian matrices. Frobenius geometry on
# matrices equals Euclidean geometry on the vectors, so projections commute
# with the change of variables.

def hermitian_basis(n: int) -> np.ndarray:
    """Orthonormal (Frobenius) basis of n x n Hermitian matrices, shape (n*n, n, n)."""
    basis = np.zeros((n * n, n, n), dtype=complex)
    k = 0
    for i in range(n):
        basis[k, i, i] = 1.0
        k += 1
    s = 1.0 / np.sqrt(2.0)
    for i in range(n):
        for j in range(i + 1, n):
            basis[k, i, j] = basis[k, j, i] = s
            k += 1
            basis[k, i, j] = 1j * s
            basis[k, j, i] = -1j * s
            k += 1
    return basis


def herm_to_vec(h) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    n = h.shape[0]
    iu = np.triu_indices(n, 1)
    off = h[iu] * np.sqrt(2.0)
    out = np.empty(n * n)
    out[:n] = np.real(np.diag(h))
    out[n::2] = off.real
    out[n + 1::2] = off.imag
    return out


def vec_to_herm(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    h = np.zeros((n, n), dtype=complex)
    h[np.diag_indices(n)] = x[:n]
    iu = np.triu_indices(n, 1)
    vals = (x[n::2] + 1j * x[n + 1::2]) / np.sqrt(2.0)
    h[iu] = vals
    h[(iu[1], iu[0])] = vals.conj()
    return h


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real
