"""Convex feasibility by cyclic Dykstra projections.

Variables are real vectors. A problem is an affine set ``{x : A x = b}``
intersected with a product of cones, each block either the PSD cone of
Hermitian matrices (in the isometric parametrisation of
:func:`linalg.herm_to_vec`) or the nonnegative orthant.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import linalg as la

PSD = "psd"
NONNEG = "nonneg"


class AffineSet:
    """``{x : A x = b}`` kept as an orthonormal row basis ``Q`` with ``Q x = c``."""

    def __init__(self, a: np.ndarray, b: np.ndarray, rcond: float = 1e-11):
        a = np.atleast_2d(np.asarray(a, dtype=float))
        b = np.asarray(b, dtype=float).reshape(-1)
        self.dim = a.shape[1]
        if a.shape[0] == 0:
            self.q = np.zeros((0, self.dim))
            self.c = np.zeros(0)
            self.inconsistency = 0.0
            return
        if a.shape[0] > 4 * a.shape[1]:
            # tall systems: eigenvectors of the Gram matrix span the row space far more cheaply;
            # squared singular values below ~1e-12 relative are numerically zero there
            w, v = np.linalg.eigh(a.T @ a)
            keep = w > max(rcond, 1e-12) * max(1.0, w[-1])
            self.q = v[:, keep].T
            self.c = (self.q @ (a.T @ b)) / w[keep]
        else:
            u, s, vt = np.linalg.svd(a, full_matrices=False)
            keep = s > rcond * max(1.0, s[0] if s.size else 0.0)
            self.q = vt[keep]
            self.c = (u[:, keep].T @ b) / s[keep]
        x0 = self.q.T @ self.c
        self.inconsistency = float(np.linalg.norm(a @ x0 - b) / max(1.0, np.linalg.norm(b)))

    @property
    def rank(self) -> int:
        return self.q.shape[0]

    def project(self, x: np.ndarray) -> np.ndarray:
        return x - self.q.T @ (self.q @ x - self.c)

    def violation(self, x: np.ndarray) -> float:
        return float(np.linalg.norm(self.q @ x - self.c))

    def restrict(self, t: np.ndarray) -> "AffineSet":
        """Pull back along ``x = t @ m``."""
        return AffineSet(self.q @ t, self.c)


@dataclass(frozen=True)
class Cone:
    """Product of cone blocks: ``(PSD, n)`` for n x n Hermitian, ``(NONNEG, k)`` for k reals."""

    blocks: tuple[tuple[str, int], ...]

    @property
    def sizes(self) -> list[int]:
        return [n * n if kind == PSD else n for kind, n in self.blocks]

    @property
    def dim(self) -> int:
        return sum(self.sizes)

    def split(self, x: np.ndarray) -> list[np.ndarray]:
        out, k = [], 0
        for s in self.sizes:
            out.append(x[k:k + s])
            k += s
        return out

    def project(self, x: np.ndarray) -> np.ndarray:
        parts = []
        for (kind, n), xi in zip(self.blocks, self.split(x)):
            if kind == PSD:
                parts.append(la.herm_to_vec(la.psd_project(la.vec_to_herm(xi, n))))
            else:
                parts.append(np.clip(xi, 0.0, None))
        return np.concatenate(parts) if parts else x

    def violation(self, x: np.ndarray) -> float:
        """How far outside the cone: worst negative eigenvalue or entry."""
        worst = 0.0
        for (kind, n), xi in zip(self.blocks, self.split(x)):
            if kind == PSD:
                worst = max(worst, -la.min_eigenvalue(la.vec_to_herm(xi, n)))
            elif xi.size:
                worst = max(worst, -float(xi.min()))
        return worst


@dataclass
class SolveResult:
    x: np.ndarray | None
    residual: float
    iterations: int
    converged: bool
    polished: bool = False


def dykstra(affine: AffineSet, cone: Cone, x0: np.ndarray, max_iter: int = 5000,
            tol: float = 1e-9, check_every: int = 10) -> tuple[np.ndarray, float, int]:
    """Cyclic Dykstra between an affine set and a cone.

    Only the cone step needs a correction term because the affine projection
    is linear up to translation. Returns the last cone iterate, the gap
    between the two iterates and the iteration count.
    """
    y = np.array(x0, dtype=float)
    p = np.zeros_like(y)
    gap = np.inf
    for it in range(1, max_iter + 1):
        x = affine.project(y)
        y = cone.project(x + p)
        p = x + p - y
        if it % check_every == 0 or it == max_iter:
            gap = affine.violation(y)
            if gap <= tol:
                return y, gap, it
    return y, gap, max_iter


def _psd_face_polish(affine: AffineSet, cone: Cone, y: np.ndarray, psd_atol: float,
                     eq_tol: float) -> np.ndarray | None:
    """Move ``y`` onto the affine set inside the face of the cone it approximately lies on.

    Each PSD block ``X`` is written ``V M V^dag`` with ``V`` spanning the
    eigenvectors of ``X`` above a threshold, nonnegative blocks keep their
    support, and the minimum-norm correction to the reduced variables is
    solved exactly. Several thresholds are tried from aggressive to none.
    """
    parts = cone.split(y)
    for thresh in (1e-4, 1e-6, 1e-8, 1e-10, 0.0):
        cols, m0 = [], []
        offset = 0
        for (kind, n), xi in zip(cone.blocks, parts):
            size = n * n if kind == PSD else n
            if kind == PSD:
                h = la.vec_to_herm(xi, n)
                w, v = np.linalg.eigh(h)
                top = max(w[-1], 1e-300) if w.size else 1.0
                keep = w > thresh * top if thresh > 0 else np.ones_like(w, dtype=bool)
                vk = v[:, keep]
                r = vk.shape[1]
                # columns: herm_to_vec(V B V^dag) for each reduced basis element B
                basis = la.hermitian_basis(r)
                t = np.zeros((cone.dim, r * r))
                for k in range(r * r):
                    t[offset:offset + size, k] = la.herm_to_vec(vk @ basis[k] @ vk.conj().T)
                cols.append(t)
                m0.append(la.herm_to_vec(vk.conj().T @ h @ vk))
            else:
                keep = xi > thresh * max(xi.max(initial=0.0), 1e-300) if thresh > 0 else np.ones(n, dtype=bool)
                t = np.zeros((cone.dim, int(keep.sum())))
                idx = np.flatnonzero(keep)
                t[offset + idx, np.arange(idx.size)] = 1.0
                cols.append(t)
                m0.append(xi[keep])
            offset += size
        t = np.hstack(cols)
        m0 = np.concatenate(m0)
        sub = affine.restrict(t)
        if sub.inconsistency > eq_tol:
            continue
        m = sub.project(m0)
        x = t @ m
        if cone.violation(x) <= psd_atol and affine.violation(x) <= eq_tol:
            return x
    return None


def solve(affine: AffineSet, cone: Cone, x0: np.ndarray | None = None, max_iter: int = 5000,
          feas_atol: float = 1e-7, psd_atol: float = 1e-9, eq_tol: float = 1e-11,
          rng: np.random.Generator | None = None) -> SolveResult:
    """Find a point of the intersection, polished to ``eq_tol`` on the affine constraints.

    ``converged`` means a polished point was produced. Otherwise ``x`` is the
    last cone iterate and ``residual`` its distance to the affine set.
    """
    if affine.inconsistency > eq_tol:
        return SolveResult(None, affine.inconsistency, 0, False)
    if x0 is None:
        x0 = np.zeros(cone.dim)
    y = np.asarray(x0, dtype=float)
    iterations = 0
    best = None
    # restarting Dykstra lets the polish try successively cleaner iterates
    budget = max(1, max_iter)
    chunk = min(budget, 200)
    while iterations < budget:
        step = min(chunk, budget - iterations)
        y, gap, used = dykstra(affine, cone, y, step, tol=feas_atol * 1e-3)
        iterations += used
        best = (y, gap)
        if gap <= feas_atol:
            x = _psd_face_polish(affine, cone, y, psd_atol, eq_tol)
            if x is not None:
                return SolveResult(x, affine.violation(x), iterations, True, True)
        chunk = min(chunk * 2, 2000)
    y, gap = best
    x = _psd_face_polish(affine, cone, y, psd_atol, eq_tol) if gap <= 1e-3 else None
    if x is not None:
        return SolveResult(x, affine.violation(x), iterations, True, True)
    return SolveResult(y, float(gap), iterations, False)


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of each column of ``v`` onto the probability simplex."""
    v = np.atleast_2d(np.asarray(v, dtype=float))
    n = v.shape[0]
    u = -np.sort(-v, axis=0)
    css = np.cumsum(u, axis=0) - 1.0
    ind = np.arange(1, n + 1)[:, None]
    cond = u - css / ind > 0
    rho = n - 1 - np.argmax(cond[::-1], axis=0)
    theta = css[rho, np.arange(v.shape[1])] / (rho + 1)
    return np.clip(v - theta, 0.0, None)


LinearMap = Callable[[np.ndarray], np.ndarray]


def hermitian_linear_system(maps: Sequence[tuple[LinearMap, np.ndarray]], n: int) -> tuple[np.ndarray, np.ndarray]:
    """Real matrix form of ``L_k(X) = B_k`` over n x n Hermitian ``X``.

    Each ``L_k`` is complex linear; rows are the real and imaginary parts of
    ``vec L_k(E_j)`` for the Hermitian basis ``E_j``. A scalar target is
    broadcast over the image.
    """
    basis = la.hermitian_basis(n)
    rows_a, rows_b = [], []
    for fn, target in maps:
        images = np.stack([np.asarray(fn(e)).reshape(-1) for e in basis], axis=1)
        t = np.broadcast_to(np.asarray(target, dtype=complex), (images.shape[0],)).reshape(-1) \
            if np.ndim(target) == 0 else np.asarray(target, dtype=complex).reshape(-1)
        rows_a.append(np.vstack([images.real, images.imag]))
        rows_b.append(np.concatenate([t.real, t.imag]))
    if not rows_a:
        return np.zeros((0, n * n)), np.zeros(0)
    return np.vstack(rows_a), np.concatenate(rows_b)
