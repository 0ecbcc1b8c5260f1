"""Manufactured solution on the unit square.

    u(x, t) = (sin t, cos t) * sin(pi x1) sin(pi x2)

It satisfies u.n = 0 on the boundary.  With a constant coefficient ``k`` the
matching source is ``f = du/dt - k grad(div u)``:

    f1 = cos t s1 s2 - k pi^2 (-sin t s1 s2 + cos t c1 c2)
    f2 = -sin t s1 s2 - k pi^2 (sin t c1 c2 - cos t s1 s2)

where ``si = sin(pi xi)`` and ``ci = cos(pi xi)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import CenteredField, MacGrid, StaggeredField, centered_l2_norm, interpolate_to_centers

ERROR_REFERENCES = ("faces", "analytic")


def exact_solution(x1, x2, t):
    """Point values of both components."""
    s = np.sin(np.pi * x1) * np.sin(np.pi * x2)
    return np.sin(t) * s, np.cos(t) * s


def source_term(x1, x2, t, k=1.0):
    pi2 = k * np.pi ** 2
    ss = np.sin(np.pi * x1) * np.sin(np.pi * x2)
    cc = np.cos(np.pi * x1) * np.cos(np.pi * x2)
    st, ct = np.sin(t), np.cos(t)
    f1 = ct * ss - pi2 * (-st * ss + ct * cc)
    f2 = -st * ss - pi2 * (st * cc - ct * ss)
    return f1, f2


@dataclass(frozen=True)
class ManufacturedCase:
    """The benchmark problem with constant coefficient ``k_value``."""

    k_value: float = 1.0

    def check_grid(self, grid: MacGrid):
        if not (np.isclose(grid.lx, 1.0) and np.isclose(grid.ly, 1.0)):
            raise ValueError(f"manufactured case lives on the unit square, got {grid.lx} x {grid.ly}")

    def exact_on_faces(self, t: float, grid: MacGrid) -> StaggeredField:
        x1, y1 = grid.face_coords1()
        x2, y2 = grid.face_coords2()
        return StaggeredField(grid, exact_solution(x1, y1, t)[0], exact_solution(x2, y2, t)[1])

    def source_on_faces(self, t: float, grid: MacGrid) -> StaggeredField:
        x1, y1 = grid.face_coords1()
        x2, y2 = grid.face_coords2()
        return StaggeredField(grid, source_term(x1, y1, t, self.k_value)[0],
                              source_term(x2, y2, t, self.k_value)[1])

    def exact_at_centers(self, t: float, grid: MacGrid) -> CenteredField:
        xc, yc = grid.cell_centers()
        return CenteredField(grid, np.stack(exact_solution(xc, yc, t), axis=-1))

    def source(self, grid: MacGrid):
        """Time-dependent source sampler ``t -> StaggeredField`` for the time loop."""
        return lambda t: self.source_on_faces(t, grid)

    def measure_error(self, v: StaggeredField, t: float, reference: str = "faces") -> float:
        """Centroid L2 error of ``v`` at time ``t`` over both components.

        With ``reference="faces"`` the exact solution is sampled on the same
        faces and both fields are averaged to centroids, so the measurement
        adds no interpolation error of its own.  ``reference="analytic"``
        compares the interpolated numerical field with point values of the
        exact solution at the centroids.
        """
        if reference == "faces":
            diff = interpolate_to_centers(v - self.exact_on_faces(t, v.grid))
        elif reference == "analytic":
            diff = interpolate_to_centers(v) - self.exact_at_centers(t, v.grid)
        else:
            raise ValueError(f"error reference must be one of {ERROR_REFERENCES}, got {reference!r}")
        return centered_l2_norm(diff)

    def interpolation_error(self, t: float, grid: MacGrid) -> float:
        """Face-to-centroid averaging error of the exact field; O(h^2)."""
        return self.measure_error(self.exact_on_faces(t, grid), t, reference="analytic")
