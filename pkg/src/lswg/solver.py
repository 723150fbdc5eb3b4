"""Jacobi-preconditioned conjugate gradients and a sparse LDL^T direct solve."""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message, x=None, report=None):
        super().__init__(message)
        self.x = x
        self.report = report


@dataclass
class SolveReport:
    method: str
    iterations: int
    residual: float  # ||A x - F|| / ||F||
    wall_time: float
    converged: bool = True


def cg_solve(A, F, tol: float = 1e-12, max_iter: Optional[int] = None,
             preconditioner: str | Callable | None = "jacobi", x0=None,
             callback: Optional[Callable] = None, raise_on_failure: bool = True):
    """Preconditioned CG; stops once ||r|| <= tol * ||F||.

    ``preconditioner`` is ``"jacobi"``, ``None`` or a callable r -> M^{-1} r.
    ``callback(k, x)`` is invoked after every iteration.
    """
    t0 = time.perf_counter()
    F = np.asarray(F, dtype=float)
    n = len(F)
    max_iter = 50 * n if max_iter is None else max_iter
    if preconditioner == "jacobi":
        d = A.diagonal() if sp.issparse(A) else np.diag(A)
        if np.any(d <= 0):
            raise NotPositiveDefiniteError("matrix not positive definite: non-positive diagonal")
        inv_d = 1.0 / d
        apply_m = lambda r: inv_d * r  # noqa: E731
    elif preconditioner is None:
        apply_m = lambda r: r  # noqa: E731
    else:
        apply_m = preconditioner

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    fnorm = np.linalg.norm(F)
    if fnorm == 0.0:
        return np.zeros(n), SolveReport("cg", 0, 0.0, time.perf_counter() - t0)
    r = F - A @ x
    z = apply_m(r)
    p = z.copy()
    rz = r @ z
    it = 0
    res = np.linalg.norm(r) / fnorm
    while res > tol and it < max_iter:
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            raise NotPositiveDefiniteError(f"matrix not positive definite (p^T A p = {pAp:.3e})")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        it += 1
        if callback is not None:
            callback(it, x)
        res = np.linalg.norm(r) / fnorm
        if res <= tol:
            break
        z = apply_m(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    # report the true residual, not the recursively updated one
    res = np.linalg.norm(F - A @ x) / fnorm
    report = SolveReport("cg", it, float(res), time.perf_counter() - t0, converged=it < max_iter or res <= tol)
    if not report.converged and raise_on_failure:
        raise ConvergenceError(f"CG did not converge in {max_iter} iterations (residual {res:.3e})",
                               x=x, report=report)
    return x, report


class SparseLDLT:
    """Symmetric sparse factorization A = P^T L D L^T P with D > 0 checked.

    SuperLU is run with a symmetric fill-reducing ordering and diagonal
    pivoting only; for symmetric input that is an LDL^T factorization, and a
    non-positive pivot certifies that A is not positive definite.
    """

    def __init__(self, A):
        A = sp.csc_matrix(A)
        try:
            self.lu = splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                           options={"SymmetricMode": True})
        except RuntimeError as exc:
            raise NotPositiveDefiniteError(f"factorization breakdown: {exc}") from exc
        if not np.array_equal(self.lu.perm_r, self.lu.perm_c):
            raise NotPositiveDefiniteError("factorization needed off-diagonal pivoting")
        pivots = self.lu.U.diagonal()
        if not np.all(pivots > 0):
            raise NotPositiveDefiniteError(
                f"matrix not positive definite (min pivot {pivots.min():.3e})")
        self.pivots = pivots

    def solve(self, F) -> np.ndarray:
        return self.lu.solve(np.asarray(F, dtype=float))


def is_positive_definite(A) -> bool:
    try:
        SparseLDLT(A)
    except NotPositiveDefiniteError:
        return False
    return True


def direct_solve(A, F, report: bool = False):
    t0 = time.perf_counter()
    F = np.asarray(F, dtype=float)
    x = SparseLDLT(A).solve(F)
    if not report:
        return x
    fnorm = np.linalg.norm(F)
    res = np.linalg.norm(F - A @ x) / fnorm if fnorm > 0 else 0.0
    return x, SolveReport("direct", 1, float(res), time.perf_counter() - t0)


def a_norm(A, x) -> float:
    return float(np.sqrt(max(x @ (A @ x), 0.0)))
