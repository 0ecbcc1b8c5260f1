"""Tridiagonal line solves and a Krylov solver for shifted operators.

The split schemes only ever need ``(I + c A_ii) w = r``, which decouples into
independent tridiagonal systems along grid lines in direction ``i``.  The
unsplit weighted scheme needs the coupled ``(I + c A) v = r``, solved by
conjugate residual iteration.

``call_counts`` records how many line-block and coupled solves have run, so
tests can check which kind of solve a time step used.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .grid import StaggeredField, staggered_inner_product
from .operator import GradDivOperator

PIVOT_TOL = 1e-14

call_counts: Counter = Counter()


class SingularSystemError(ArithmeticError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message, residual, iterations):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class TridiagonalFactor:
    """Thomas elimination coefficients for a batch of tridiagonal matrices.

    Axis 0 runs along the system; any further axes are independent systems.
    """

    sub: np.ndarray
    inv_pivot: np.ndarray
    sup_scaled: np.ndarray

    def solve(self, rhs) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        n = rhs.shape[0]
        y = np.empty_like(rhs)
        y[0] = rhs[0] * self.inv_pivot[0]
        for i in range(1, n):
            y[i] = (rhs[i] - self.sub[i - 1] * y[i - 1]) * self.inv_pivot[i]
        for i in range(n - 2, -1, -1):
            y[i] -= self.sup_scaled[i] * y[i + 1]
        return y


def factor_tridiagonal(sub, diag, sup) -> TridiagonalFactor:
    """Forward elimination without pivoting.

    ``diag`` has length ``n`` along axis 0, ``sub`` and ``sup`` length ``n - 1``.
    """
    diag = np.asarray(diag, dtype=float)
    sub = np.asarray(sub, dtype=float)
    sup = np.asarray(sup, dtype=float)
    n = diag.shape[0]
    if sub.shape[0] != n - 1 or sup.shape[0] != n - 1:
        raise ValueError("off-diagonals must have one entry fewer than the diagonal")
    inv_pivot = np.empty_like(diag)
    sup_scaled = np.empty_like(sup)
    pivot = diag[0]
    for i in range(n):
        if i > 0:
            pivot = diag[i] - sub[i - 1] * sup_scaled[i - 1]
        if np.any(np.abs(pivot) < PIVOT_TOL):
            raise SingularSystemError(f"pivot below {PIVOT_TOL} at row {i}")
        inv_pivot[i] = 1.0 / pivot
        if i < n - 1:
            sup_scaled[i] = sup[i] * inv_pivot[i]
    return TridiagonalFactor(sub, inv_pivot, sup_scaled)


def thomas_solve(sub, diag, sup, rhs) -> np.ndarray:
    """Solve a tridiagonal system (or a batch of them along trailing axes)."""
    return factor_tridiagonal(sub, diag, sup).solve(rhs)


def _block_coefficients(op: GradDivOperator, component: int, c: float):
    """Tridiagonal coefficients of ``I + c A_ii`` along lines of direction ``i``.

    Returned arrays are oriented with the line direction first.
    """
    g = op.grid
    if component == 1:
        k = op.k  # (nx, ny): face i sits between cells i-1 and i along x
        w = c / g.hx ** 2
    elif component == 2:
        k = op.k.T
        w = c / g.hy ** 2
    else:
        raise ValueError(f"component must be 1 or 2, got {component}")
    diag = 1.0 + w * (k[:-1] + k[1:])
    off = -w * k[1:-1]
    return off, diag, off


def shifted_block_factor(op: GradDivOperator, component: int, c: float) -> TridiagonalFactor:
    key = (component, float(c))
    fac = op._line_cache.get(key)
    if fac is None:
        if len(op._line_cache) > 32:
            op._line_cache.clear()
        fac = factor_tridiagonal(*_block_coefficients(op, component, c))
        op._line_cache[key] = fac
    return fac


def solve_shifted_diag_block(op: GradDivOperator, component: int, c: float, rhs: np.ndarray) -> np.ndarray:
    """Solve ``(I + c A_ii) w = rhs`` for one component array.

    Component 1 is solved along x-lines (one per cell row ``j``), component 2
    along y-lines (one per cell column ``i``).
    """
    if c < 0:
        raise ValueError(f"shift must be nonnegative, got {c}")
    call_counts["line_block"] += 1
    rhs = np.asarray(rhs, dtype=float)
    if c == 0:
        return rhs.copy()
    fac = shifted_block_factor(op, component, c)
    if component == 1:
        return fac.solve(rhs)
    return fac.solve(rhs.T).T


def cg_solve_shifted(op: GradDivOperator, c: float, rhs: StaggeredField, tol: float = 1e-10,
                     maxit: int = 10000, x0: StaggeredField | None = None,
                     residuals: list | None = None) -> StaggeredField:
    """Solve the coupled system ``(I + c A) v = rhs`` iteratively.

    Stops once ``||(I + c A) v - rhs|| <= tol ||rhs||``.  If ``residuals`` is
    given, the residual norm of every iterate is appended to it.
    """
    if c < 0:
        raise ValueError(f"shift must be nonnegative, got {c}")
    call_counts["coupled"] += 1
    g = op.grid
    matvec = op.shifted_matvec_flat(c)
    x = conjugate_residual_flat(matvec, rhs.to_vector(), tol, maxit,
                                None if x0 is None else x0.to_vector(), residuals)
    if residuals is not None:
        scale = np.sqrt(g.cell_area)
        residuals[:] = [r * scale for r in residuals]
    return StaggeredField.from_vector(g, x)


def _dot(a, b) -> float:
    # einsum keeps a fixed summation order, unlike threaded BLAS dot
    return float(np.einsum("i,i->", a, b))


def conjugate_residual_flat(matvec, b: np.ndarray, tol: float = 1e-10, maxit: int = 10000,
                            x0: np.ndarray | None = None, residuals: list | None = None) -> np.ndarray:
    """Conjugate residual iteration on flat vectors; ``matvec(x, out)`` fills ``out``."""
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    bnorm = np.sqrt(_dot(b, b))
    if bnorm == 0.0:
        return np.zeros_like(b)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = np.empty_like(b)
    if x0 is None:
        r[:] = b
    else:
        matvec(x, r)
        np.subtract(b, r, out=r)
    rnorm = np.sqrt(_dot(r, r))
    if residuals is not None:
        residuals.append(rnorm)
    if rnorm <= tol * bnorm:
        return x
    ar = matvec(r, np.empty_like(b))
    rar = _dot(r, ar)
    p = r.copy()
    ap = ar.copy()
    for _ in range(maxit):
        alpha = rar / _dot(ap, ap)
        x += alpha * p
        r -= alpha * ap
        rnorm = np.sqrt(_dot(r, r))
        if residuals is not None:
            residuals.append(rnorm)
        if rnorm <= tol * bnorm:
            return x
        matvec(r, ar)
        rar_new = _dot(r, ar)
        beta = rar_new / rar
        rar = rar_new
        p *= beta
        p += r
        ap *= beta
        ap += ar
    res = rnorm / bnorm
    raise ConvergenceError(f"no convergence to {tol:g} in {maxit} iterations (relative residual {res:.3e})",
                           res, maxit)


def conjugate_residual(matvec, rhs: StaggeredField, tol: float = 1e-10, maxit: int = 10000,
                       x0: StaggeredField | None = None, residuals: list | None = None) -> StaggeredField:
    """Conjugate residual iteration for a symmetric positive definite ``matvec``.

    Same Krylov space and cost as CG (one product per iteration), but each
    iterate minimizes the residual norm, so residuals never increase.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    bnorm = np.sqrt(staggered_inner_product(rhs, rhs))
    if bnorm == 0.0:
        return StaggeredField.zeros(rhs.grid)
    if x0 is None:
        x = StaggeredField.zeros(rhs.grid)
        r = rhs.copy()
    else:
        x = x0.copy()
        r = rhs - matvec(x)
    rnorm = np.sqrt(staggered_inner_product(r, r))
    if residuals is not None:
        residuals.append(rnorm)
    if rnorm <= tol * bnorm:
        return x
    ar = matvec(r)
    rar = staggered_inner_product(r, ar)
    p, ap = r, ar
    for _ in range(maxit):
        alpha = rar / staggered_inner_product(ap, ap)
        x = x + alpha * p
        r = r - alpha * ap
        rnorm = np.sqrt(staggered_inner_product(r, r))
        if residuals is not None:
            residuals.append(rnorm)
        if rnorm <= tol * bnorm:
            return x
        ar = matvec(r)
        rar_new = staggered_inner_product(r, ar)
        beta = rar_new / rar
        rar = rar_new
        p = r + beta * p
        ap = ar + beta * ap
    res = rnorm / bnorm
    raise ConvergenceError(f"no convergence to {tol:g} in {maxit} iterations (relative residual {res:.3e})",
                           res, maxit)
