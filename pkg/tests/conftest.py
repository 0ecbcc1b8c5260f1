import numpy as np
import pytest

from graddiv import StaggeredField, build_grid
from graddiv.operator import GradDivOperator

ACCEPTANCE_RESULTS = {}


def dense_divergence(grid):
    """Cell-by-face divergence matrix built by explicit loops (flat DOF order
    of ``StaggeredField.to_vector``)."""
    nx, ny, hx, hy = grid.nx, grid.ny, grid.hx, grid.hy
    n1 = (nx - 1) * ny
    G = np.zeros((nx * ny, grid.n_dofs))
    for i in range(nx):
        for j in range(ny):
            row = i * ny + j
            # east face i+1 and west face i of the cell; boundary faces absent
            if i + 1 <= nx - 1:
                G[row, i * ny + j] += 1.0 / hx
            if i >= 1:
                G[row, (i - 1) * ny + j] -= 1.0 / hx
            if j + 1 <= ny - 1:
                G[row, n1 + i * (ny - 1) + j] += 1.0 / hy
            if j >= 1:
                G[row, n1 + i * (ny - 1) + j - 1] -= 1.0 / hy
    return G


class DenseOracle:
    """Dense grad-div matrices from the loop-built divergence: A = G^T K G."""

    def __init__(self, grid, k):
        self.grid = grid
        self.G = dense_divergence(grid)
        kv = np.broadcast_to(np.asarray(k, float), (grid.nx, grid.ny)).ravel()
        self.A = self.G.T @ np.diag(kv) @ self.G
        n1 = (grid.nx - 1) * grid.ny
        self.n1 = n1
        A = self.A
        self.D = np.zeros_like(A)
        self.D[:n1, :n1] = A[:n1, :n1]
        self.D[n1:, n1:] = A[n1:, n1:]
        self.L = np.zeros_like(A)
        self.L[n1:, :n1] = A[n1:, :n1]
        self.U = np.zeros_like(A)
        self.U[:n1, n1:] = A[:n1, n1:]
        self.A1 = self.L + self.D / 2
        self.A2 = self.U + self.D / 2
        self.I = np.eye(A.shape[0])

    def block(self, i, j):
        out = np.zeros_like(self.A)
        r = slice(0, self.n1) if i == 1 else slice(self.n1, None)
        c = slice(0, self.n1) if j == 1 else slice(self.n1, None)
        out[r, c] = self.A[r, c]
        return out

    def R(self, sigma, tau):
        st = sigma * tau
        return 0.5 * (self.I + st * self.A) + st * st * self.A1 @ self.A2

    def B(self, scheme, sigma, tau):
        I = self.I
        if scheme == "theta":
            return I + sigma * tau * self.A
        if scheme == "jacobi":
            return I + sigma * tau * self.D
        if scheme == "gauss_seidel":
            return I + tau * (self.L + self.D)
        if scheme in ("alt_triangular", "three_level"):
            return (I + sigma * tau * self.A1) @ (I + sigma * tau * self.A2)
        raise ValueError(scheme)

    def C(self, scheme, sigma, tau):
        I, A = self.I, self.A
        if scheme in ("theta", "three_level"):
            return I + (sigma - 0.5) * tau * A
        if scheme == "jacobi":
            return I + sigma * tau * self.D - tau / 2 * A
        if scheme == "gauss_seidel":
            return I + tau / 2 * self.D
        if scheme == "alt_triangular":
            return I + (sigma - 0.5) * tau * A + (sigma * tau) ** 2 * self.A1 @ self.A2
        raise ValueError(scheme)

    def step(self, scheme, sigma, tau, v, psi, v_prev=None):
        """Dense realization of one step in canonical form."""
        rhs = tau * (psi - self.A @ v)
        if scheme == "three_level":
            rhs = rhs + (sigma * tau) ** 2 * self.A1 @ self.A2 @ (v - v_prev)
        return v + np.linalg.solve(self.B(scheme, sigma, tau), rhs)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def grid4():
    return build_grid(4, 4, 1.0, 1.0)


@pytest.fixture
def op4(grid4):
    return GradDivOperator(grid4, 1.0)


def random_field(grid, rng):
    return StaggeredField.random(grid, rng)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {key}: {detail}")
