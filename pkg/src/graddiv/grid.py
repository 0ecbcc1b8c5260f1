"""Uniform MAC staggered grid, face/cell field storage and discrete norms.

Component 1 of a staggered field lives on the interior x-normal faces and
component 2 on the interior y-normal faces.  Boundary normal faces carry the
no-penetration condition u.n = 0 and are never stored, so every stored value
is a genuine unknown.

Arrays are indexed ``[ix, iy]``.  ``u1[i - 1, j]`` is the face at
``x = i * hx`` in cell row ``j`` (``i = 1..nx-1``) and ``u2[i, j - 1]`` is the
face at ``y = j * hy`` in cell column ``i`` (``j = 1..ny-1``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class GridMismatchError(ValueError):
    """Raised when fields defined on different grids are combined."""


@dataclass(frozen=True)
class MacGrid:
    nx: int
    ny: int
    hx: float
    hy: float

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError(f"need at least 2 cells per direction, got {self.nx}x{self.ny}")
        if not (self.hx > 0 and self.hy > 0):
            raise ValueError("grid spacings must be positive")

    @property
    def lx(self) -> float:
        return self.nx * self.hx

    @property
    def ly(self) -> float:
        return self.ny * self.hy

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def shape1(self) -> tuple[int, int]:
        return (self.nx - 1, self.ny)

    @property
    def shape2(self) -> tuple[int, int]:
        return (self.nx, self.ny - 1)

    @property
    def n_dofs(self) -> int:
        return (self.nx - 1) * self.ny + self.nx * (self.ny - 1)

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    def face_coords1(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates of the stored x-normal faces, each of shape ``shape1``."""
        x = np.arange(1, self.nx) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def face_coords2(self) -> tuple[np.ndarray, np.ndarray]:
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = np.arange(1, self.ny) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")


def build_grid(nx: int, ny: int, lx: float = 1.0, ly: float = 1.0) -> MacGrid:
    """Grid of ``nx`` by ``ny`` cells covering ``[0, lx] x [0, ly]``."""
    if int(nx) != nx or int(ny) != ny:
        raise ValueError("cell counts must be integers")
    if not (lx > 0 and ly > 0):
        raise ValueError(f"domain lengths must be positive, got {lx}, {ly}")
    if nx < 2 or ny < 2:
        raise ValueError(f"need at least 2 cells per direction, got {nx}x{ny}")
    return MacGrid(int(nx), int(ny), lx / nx, ly / ny)


class StaggeredField:
    """Discrete vector field on the interior faces of a :class:`MacGrid`.

    Supports ``+``, ``-``, negation and multiplication by scalars; each
    operation returns a new field.
    """

    __slots__ = ("grid", "u1", "u2")

    def __init__(self, grid: MacGrid, u1, u2):
        u1 = np.asarray(u1, dtype=float)
        u2 = np.asarray(u2, dtype=float)
        if u1.shape != grid.shape1 or u2.shape != grid.shape2:
            raise ValueError(
                f"component shapes {u1.shape}, {u2.shape} do not match grid "
                f"({grid.shape1}, {grid.shape2})"
            )
        self.grid = grid
        self.u1 = u1
        self.u2 = u2

    @classmethod
    def zeros(cls, grid: MacGrid) -> "StaggeredField":
        return cls(grid, np.zeros(grid.shape1), np.zeros(grid.shape2))

    @classmethod
    def random(cls, grid: MacGrid, rng: np.random.Generator) -> "StaggeredField":
        """Uniform values in [-1, 1] on every stored face."""
        return cls(grid, rng.uniform(-1.0, 1.0, grid.shape1), rng.uniform(-1.0, 1.0, grid.shape2))

    @classmethod
    def from_vector(cls, grid: MacGrid, vec) -> "StaggeredField":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (grid.n_dofs,):
            raise ValueError(f"expected flat vector of length {grid.n_dofs}, got {vec.shape}")
        n1 = grid.shape1[0] * grid.shape1[1]
        return cls(grid, vec[:n1].reshape(grid.shape1), vec[n1:].reshape(grid.shape2))

    @classmethod
    def unit(cls, grid: MacGrid, index: int) -> "StaggeredField":
        vec = np.zeros(grid.n_dofs)
        vec[index] = 1.0
        return cls.from_vector(grid, vec)

    def to_vector(self) -> np.ndarray:
        """Flat copy: component 1 row-major, then component 2 row-major."""
        return np.concatenate([self.u1.ravel(), self.u2.ravel()])

    def copy(self) -> "StaggeredField":
        return StaggeredField(self.grid, self.u1.copy(), self.u2.copy())

    def component(self, i: int) -> np.ndarray:
        if i == 1:
            return self.u1
        if i == 2:
            return self.u2
        raise ValueError(f"component must be 1 or 2, got {i}")

    def _check(self, other: "StaggeredField"):
        if self.grid != other.grid:
            raise GridMismatchError(f"{self.grid} vs {other.grid}")

    def __add__(self, other):
        self._check(other)
        return StaggeredField(self.grid, self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other):
        self._check(other)
        return StaggeredField(self.grid, self.u1 - other.u1, self.u2 - other.u2)

    def __neg__(self):
        return StaggeredField(self.grid, -self.u1, -self.u2)

    def __mul__(self, scalar):
        return StaggeredField(self.grid, scalar * self.u1, scalar * self.u2)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return StaggeredField(self.grid, self.u1 / scalar, self.u2 / scalar)

    def max_abs(self) -> float:
        return float(max(np.abs(self.u1).max(), np.abs(self.u2).max()))

    def __repr__(self):
        return f"StaggeredField({self.grid.nx}x{self.grid.ny}, max|v|={self.max_abs():.3g})"


@dataclass(frozen=True, eq=False)
class CenteredField:
    """Cell-centred values: shape ``(nx, ny)`` for scalars, ``(nx, ny, 2)`` for vectors."""

    grid: MacGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape[:2] != (self.grid.nx, self.grid.ny) or vals.ndim not in (2, 3):
            raise ValueError(f"values of shape {vals.shape} do not fit a {self.grid.nx}x{self.grid.ny} grid")
        object.__setattr__(self, "values", vals)

    def __sub__(self, other):
        if self.grid != other.grid:
            raise GridMismatchError(f"{self.grid} vs {other.grid}")
        return CenteredField(self.grid, self.values - other.values)


def staggered_inner_product(a: StaggeredField, b: StaggeredField) -> float:
    """Discrete L2 inner product, both components, weighted by the cell area."""
    if a.grid != b.grid:
        raise GridMismatchError(f"{a.grid} vs {b.grid}")
    # numpy pairwise summation rather than BLAS dot: the order is fixed, so
    # results do not depend on the BLAS thread count
    s = np.sum(a.u1 * b.u1) + np.sum(a.u2 * b.u2)
    return float(s * a.grid.cell_area)


def staggered_norm(a: StaggeredField) -> float:
    return float(np.sqrt(staggered_inner_product(a, a)))


def pad_components(v: StaggeredField) -> tuple[np.ndarray, np.ndarray]:
    """Both components with the zero boundary faces re-attached.

    Returns arrays of shape ``(nx + 1, ny)`` and ``(nx, ny + 1)``.
    """
    g = v.grid
    p1 = np.zeros((g.nx + 1, g.ny))
    p1[1:-1] = v.u1
    p2 = np.zeros((g.nx, g.ny + 1))
    p2[:, 1:-1] = v.u2
    return p1, p2


def interpolate_to_centers(v: StaggeredField) -> CenteredField:
    """Average the two faces of each cell, per component."""
    p1, p2 = pad_components(v)
    c1 = 0.5 * (p1[1:] + p1[:-1])
    c2 = 0.5 * (p2[:, 1:] + p2[:, :-1])
    return CenteredField(v.grid, np.stack([c1, c2], axis=-1))


def centered_l2_norm(e: CenteredField) -> float:
    """sqrt(sum |e|^2 hx hy) over cells; vector entries contribute all components."""
    return float(np.sqrt(np.sum(e.values ** 2) * e.grid.cell_area))
