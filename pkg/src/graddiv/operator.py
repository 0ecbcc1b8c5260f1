"""Matrix-free discrete grad-div operator on a MAC grid.

The operator is ``A v = -grad(k div v)`` with divergence at cell centres and
the gradient taken back to interior faces.  Written as ``A = G^T K G`` (with
``G`` the divergence), it is symmetric and positive semidefinite for any
``k >= 0`` and its quadratic form is exactly ``sum k (div v)^2 hx hy``.

Block structure follows the component ordering (1, 2): ``A_ij`` maps
component ``j`` to component ``i``, so the strictly lower part is ``L = A_21``
and the strictly upper part is ``U = A_12 = L^*``.
"""

from __future__ import annotations

import enum

import numpy as np

from .grid import CenteredField, MacGrid, StaggeredField, staggered_inner_product

DENSE_DOF_CAP = 2500


class OperatorPart(enum.Enum):
    FULL = "A"
    A11 = "A11"
    A12 = "A12"
    A21 = "A21"
    A22 = "A22"
    D = "D"
    L = "L"
    U = "U"
    A1 = "A1"
    A2 = "A2"
    R = "R"

    @classmethod
    def block(cls, i: int, j: int) -> "OperatorPart":
        if i not in (1, 2) or j not in (1, 2):
            raise ValueError(f"block indices must be 1 or 2, got ({i}, {j})")
        return cls(f"A{i}{j}")


def discrete_divergence(v: StaggeredField) -> CenteredField:
    return CenteredField(v.grid, _div1(v.u1, v.grid) + _div2(v.u2, v.grid))


def _div1(u1, g: MacGrid) -> np.ndarray:
    """d(u1)/dx at cell centres, boundary faces zero."""
    out = np.empty((g.nx, g.ny))
    out[0] = u1[0]
    out[1:-1] = u1[1:] - u1[:-1]
    out[-1] = -u1[-1]
    return out / g.hx


def _div2(u2, g: MacGrid) -> np.ndarray:
    out = np.empty((g.nx, g.ny))
    out[:, 0] = u2[:, 0]
    out[:, 1:-1] = u2[:, 1:] - u2[:, :-1]
    out[:, -1] = -u2[:, -1]
    return out / g.hy


def _neg_grad1(w, g: MacGrid) -> np.ndarray:
    return -(w[1:] - w[:-1]) / g.hx


def _neg_grad2(w, g: MacGrid) -> np.ndarray:
    return -(w[:, 1:] - w[:, :-1]) / g.hy


class GradDivOperator:
    """``-grad(k div .)`` with ``k`` sampled at cell centroids.

    Parameters
    ----------
    grid : MacGrid
    k : float or array of shape ``(nx, ny)``
        Nonnegative coefficient.  A scalar means a constant coefficient.
    """

    def __init__(self, grid: MacGrid, k=1.0):
        kv = np.broadcast_to(np.asarray(k, dtype=float), (grid.nx, grid.ny)).copy()
        if not np.all(np.isfinite(kv)):
            raise ValueError("coefficient k must be finite")
        if np.any(kv < 0):
            raise ValueError(f"coefficient k must be nonnegative, min is {kv.min()}")
        kv.setflags(write=False)
        self.grid = grid
        self.k = kv
        # line factorizations keyed by (component, shift); filled by linear_solvers
        self._line_cache: dict = {}

    @property
    def k_field(self) -> CenteredField:
        return CenteredField(self.grid, self.k)

    def norm_estimate(self) -> float:
        """Upper bound on the spectral norm of A."""
        g = self.grid
        return float(self.k.max() * 4.0 * (1.0 / g.hx ** 2 + 1.0 / g.hy ** 2))

    def block(self, i: int, j: int, uj: np.ndarray) -> np.ndarray:
        """``A_ij`` on a raw component-``j`` array; returns a component-``i`` array."""
        g = self.grid
        div = _div1(uj, g) if j == 1 else _div2(uj, g)
        w = self.k * div
        return _neg_grad1(w, g) if i == 1 else _neg_grad2(w, g)

    def _full(self, v: StaggeredField) -> StaggeredField:
        g = self.grid
        w = self.k * (_div1(v.u1, g) + _div2(v.u2, g))
        return StaggeredField(g, _neg_grad1(w, g), _neg_grad2(w, g))

    def apply(self, part: OperatorPart, v: StaggeredField, sigma: float = 0.5, tau: float = 1.0) -> StaggeredField:
        """Apply one operator part to ``v``.

        ``sigma`` and ``tau`` are only used for ``OperatorPart.R``, the
        three-level operator ``R = (I + tau sigma A)/2 + sigma^2 tau^2 A1 A2``.
        """
        if v.grid != self.grid:
            raise ValueError("field and operator live on different grids")
        g = self.grid
        z1 = np.zeros(g.shape1)
        z2 = np.zeros(g.shape2)
        if part is OperatorPart.FULL:
            return self._full(v)
        if part is OperatorPart.A11:
            return StaggeredField(g, self.block(1, 1, v.u1), z2)
        if part is OperatorPart.A12:
            return StaggeredField(g, self.block(1, 2, v.u2), z2)
        if part is OperatorPart.A21:
            return StaggeredField(g, z1, self.block(2, 1, v.u1))
        if part is OperatorPart.A22:
            return StaggeredField(g, z1, self.block(2, 2, v.u2))
        if part is OperatorPart.D:
            return StaggeredField(g, self.block(1, 1, v.u1), self.block(2, 2, v.u2))
        if part is OperatorPart.L:
            return StaggeredField(g, z1, self.block(2, 1, v.u1))
        if part is OperatorPart.U:
            return StaggeredField(g, self.block(1, 2, v.u2), z2)
        if part is OperatorPart.A1:
            return StaggeredField(g, 0.5 * self.block(1, 1, v.u1),
                                  self.block(2, 1, v.u1) + 0.5 * self.block(2, 2, v.u2))
        if part is OperatorPart.A2:
            return StaggeredField(g, self.block(1, 2, v.u2) + 0.5 * self.block(1, 1, v.u1),
                                  0.5 * self.block(2, 2, v.u2))
        if part is OperatorPart.R:
            st = sigma * tau
            a1a2 = self.apply(OperatorPart.A1, self.apply(OperatorPart.A2, v))
            return 0.5 * (v + st * self._full(v)) + (st * st) * a1a2
        raise ValueError(f"unknown operator part {part!r}")

    def shifted_matvec_flat(self, c: float):
        """Return ``f(x, out)`` computing ``out = x + c A x`` on flat DOF vectors.

        Work arrays are allocated once; the closure is meant for tight solver
        loops and is not thread-safe.
        """
        g = self.grid
        n1 = g.shape1[0] * g.shape1[1]
        div = np.empty((g.nx, g.ny))
        tmp = np.empty((g.nx, g.ny))
        k = self.k
        ihx, ihy = 1.0 / g.hx, 1.0 / g.hy
        cx, cy = c * ihx, c * ihy

        def matvec(x, out):
            u1 = x[:n1].reshape(g.shape1)
            u2 = x[n1:].reshape(g.shape2)
            div[0] = u1[0]
            np.subtract(u1[1:], u1[:-1], out=div[1:-1])
            np.negative(u1[-1], out=div[-1])
            np.multiply(div, ihx, out=div)
            tmp[:, 0] = u2[:, 0]
            np.subtract(u2[:, 1:], u2[:, :-1], out=tmp[:, 1:-1])
            np.negative(u2[:, -1], out=tmp[:, -1])
            np.multiply(tmp, ihy, out=tmp)
            np.add(div, tmp, out=div)
            np.multiply(div, k, out=div)
            o1 = out[:n1].reshape(g.shape1)
            o2 = out[n1:].reshape(g.shape2)
            np.subtract(div[:-1], div[1:], out=o1)
            o1 *= cx
            np.subtract(div[:, :-1], div[:, 1:], out=o2)
            o2 *= cy
            out += x
            return out

        return matvec

    def __call__(self, v: StaggeredField) -> StaggeredField:
        return self._full(v)

    def quadratic_form(self, part: OperatorPart, v: StaggeredField, sigma: float = 0.5, tau: float = 1.0) -> float:
        """``(part v, v)``; a seminorm squared for self-adjoint parts."""
        return staggered_inner_product(self.apply(part, v, sigma, tau), v)

    def energy(self, v: StaggeredField) -> float:
        """``|v|_A^2`` evaluated as ``sum k (div v)^2 hx hy``; never negative."""
        div = discrete_divergence(v).values
        return float(np.sum(self.k * div * div) * self.grid.cell_area)

    def assemble_dense(self, part: OperatorPart, sigma: float = 0.5, tau: float = 1.0,
                       cap: int = DENSE_DOF_CAP) -> np.ndarray:
        """Dense matrix of ``part``, one column per unit field.  Test oracle only."""
        n = self.grid.n_dofs
        if n > cap:
            raise ValueError(f"{n} DOFs exceeds the dense assembly cap of {cap}")
        mat = np.empty((n, n))
        for c in range(n):
            mat[:, c] = self.apply(part, StaggeredField.unit(self.grid, c), sigma, tau).to_vector()
        return mat
