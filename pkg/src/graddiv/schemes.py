"""Time stepping for dv/dt + A v = phi(t).

Five schemes, all written in the two-level canonical form
``B (v^{n+1} - v^n) / tau + A v^n = psi^n`` or its three-level extension:

* ``theta``          B = I + sigma tau A (coupled, solved iteratively)
* ``jacobi``         B = I + sigma tau D
* ``gauss_seidel``   B = I + tau (L + D)
* ``alt_triangular`` B = (I + sigma tau A1)(I + sigma tau A2)
* ``three_level``    alternating-triangular with the history correction
                     ``- sigma^2 tau^2 A1 A2 (v^n - v^{n-1}) / tau``

Apart from ``theta``, every implicit solve is a set of independent
tridiagonal line solves.
"""

from __future__ import annotations

import enum
import logging
import time
import warnings
from dataclasses import dataclass
from typing import Callable

from . import linear_solvers
from .grid import StaggeredField
from .operator import GradDivOperator, OperatorPart

log = logging.getLogger(__name__)

Source = Callable[[float], StaggeredField]


class Scheme(enum.Enum):
    THETA = "theta"
    JACOBI = "jacobi"
    GAUSS_SEIDEL = "gauss_seidel"
    ALT_TRIANGULAR = "alt_triangular"
    THREE_LEVEL = "three_level"

    @classmethod
    def parse(cls, name: str) -> "Scheme":
        key = name.strip().lower().replace("-", "_")
        key = SCHEME_ALIASES.get(key, key)
        try:
            return cls(key)
        except ValueError:
            valid = sorted({s.value for s in cls} | set(SCHEME_ALIASES))
            raise ValueError(f"unknown scheme {name!r}; choose from {', '.join(valid)}") from None


SCHEME_ALIASES = {
    "cn": "theta",
    "crank_nicolson": "theta",
    "weighted": "theta",
    "j": "jacobi",
    "block_jacobi": "jacobi",
    "gs": "gauss_seidel",
    "block_gauss_seidel": "gauss_seidel",
    "at": "alt_triangular",
    "alternating_triangular": "alt_triangular",
    "3l": "three_level",
    "3_level": "three_level",
    "three_level_at": "three_level",
}

# smallest sigma for which the energy estimate is proven (d = 2)
STABLE_SIGMA = {
    Scheme.THETA: 0.5,
    Scheme.JACOBI: 1.0,
    Scheme.ALT_TRIANGULAR: 0.5,
    Scheme.THREE_LEVEL: 0.5,
}


class StabilityWarning(UserWarning):
    pass


class StepError(RuntimeError):
    def __init__(self, step: int, cause: Exception):
        super().__init__(f"step {step} failed: {cause}")
        self.step = step
        self.cause = cause


class BootstrapError(RuntimeError):
    pass


@dataclass(frozen=True)
class SchemeConfig:
    scheme: Scheme
    sigma: float
    tau: float
    T: float
    monitor: bool = False
    solver_tol: float = 1e-10

    def __post_init__(self):
        if isinstance(self.scheme, str):
            object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        if not self.tau > 0:
            raise ValueError(f"time step must be positive, got {self.tau}")
        if self.T < 0:
            raise ValueError(f"final time must be nonnegative, got {self.T}")
        if not self.solver_tol > 0:
            raise ValueError("solver tolerance must be positive")
        n = round(self.T / self.tau)
        if abs(n * self.tau - self.T) > 1e-12 * self.T:
            raise ValueError(f"T = {self.T} is not an integer multiple of tau = {self.tau}")
        threshold = STABLE_SIGMA.get(self.scheme)
        if threshold is not None and self.sigma < threshold:
            warnings.warn(
                f"{self.scheme.value} with sigma = {self.sigma} is below {threshold}; "
                "unconditional stability is not guaranteed",
                StabilityWarning,
                stacklevel=3,
            )

    @property
    def n_steps(self) -> int:
        return round(self.T / self.tau)

    def source_time(self, n: int) -> float:
        """Time at which the source is sampled for step ``n -> n + 1``."""
        t = n * self.tau
        if self.scheme is Scheme.GAUSS_SEIDEL:
            return t + self.tau
        return t + self.sigma * self.tau


@dataclass
class TimeState:
    n: int
    t: float
    v_curr: StaggeredField
    v_prev: StaggeredField | None = None


# -- implicit building blocks ------------------------------------------------

def solve_lower(op: GradDivOperator, c: float, r: StaggeredField) -> StaggeredField:
    """``(I + c A1) y = r`` with ``A1 = L + D/2``: component 1, then component 2."""
    y1 = linear_solvers.solve_shifted_diag_block(op, 1, 0.5 * c, r.u1)
    y2 = linear_solvers.solve_shifted_diag_block(op, 2, 0.5 * c, r.u2 - c * op.block(2, 1, y1))
    return StaggeredField(op.grid, y1, y2)


def solve_upper(op: GradDivOperator, c: float, r: StaggeredField) -> StaggeredField:
    """``(I + c A2) z = r`` with ``A2 = U + D/2``: component 2, then component 1."""
    z2 = linear_solvers.solve_shifted_diag_block(op, 2, 0.5 * c, r.u2)
    z1 = linear_solvers.solve_shifted_diag_block(op, 1, 0.5 * c, r.u1 - c * op.block(1, 2, z2))
    return StaggeredField(op.grid, z1, z2)


# -- single steps ------------------------------------------------------------

def step_theta(state: TimeState, op: GradDivOperator, config: SchemeConfig, psi: StaggeredField) -> StaggeredField:
    s, tau = config.sigma, config.tau
    v = state.v_curr
    rhs = v - ((1.0 - s) * tau) * op(v) + tau * psi
    return linear_solvers.cg_solve_shifted(op, s * tau, rhs, tol=config.solver_tol, x0=v)


def step_block_jacobi(state: TimeState, op: GradDivOperator, config: SchemeConfig,
                      psi: StaggeredField) -> StaggeredField:
    c = config.sigma * config.tau
    tau = config.tau
    v = state.v_curr
    av = op(v)
    r1 = v.u1 + c * op.block(1, 1, v.u1) + tau * (psi.u1 - av.u1)
    r2 = v.u2 + c * op.block(2, 2, v.u2) + tau * (psi.u2 - av.u2)
    # the two components are independent
    return StaggeredField(op.grid,
                          linear_solvers.solve_shifted_diag_block(op, 1, c, r1),
                          linear_solvers.solve_shifted_diag_block(op, 2, c, r2))


def step_block_gauss_seidel(state: TimeState, op: GradDivOperator, config: SchemeConfig,
                            psi: StaggeredField) -> StaggeredField:
    tau = config.tau
    v = state.v_curr
    y1 = linear_solvers.solve_shifted_diag_block(
        op, 1, tau, v.u1 - tau * op.block(1, 2, v.u2) + tau * psi.u1)
    y2 = linear_solvers.solve_shifted_diag_block(
        op, 2, tau, v.u2 + tau * (psi.u2 - op.block(2, 1, y1)))
    return StaggeredField(op.grid, y1, y2)


def step_alt_triangular(state: TimeState, op: GradDivOperator, config: SchemeConfig,
                        psi: StaggeredField) -> StaggeredField:
    tau = config.tau
    v = state.v_curr
    r = tau * (psi - op(v))
    c = config.sigma * tau
    return v + solve_upper(op, c, solve_lower(op, c, r))


def step_three_level_at(state: TimeState, op: GradDivOperator, config: SchemeConfig,
                        psi: StaggeredField) -> StaggeredField:
    if state.v_prev is None:
        raise BootstrapError("three-level step needs v^{n-1}; bootstrap with one alternating-triangular step")
    tau = config.tau
    c = config.sigma * tau
    v = state.v_curr
    dv = v - state.v_prev
    r = tau * (psi - op(v)) + (c * c) * op.apply(OperatorPart.A1, op.apply(OperatorPart.A2, dv))
    return v + solve_upper(op, c, solve_lower(op, c, r))


STEPPERS = {
    Scheme.THETA: step_theta,
    Scheme.JACOBI: step_block_jacobi,
    Scheme.GAUSS_SEIDEL: step_block_gauss_seidel,
    Scheme.ALT_TRIANGULAR: step_alt_triangular,
    Scheme.THREE_LEVEL: step_three_level_at,
}


@dataclass
class LoopResult:
    steps: int
    wall_time: float
    ledger: object = None


def run_time_loop(op: GradDivOperator, config: SchemeConfig, source: Source | None, v0: StaggeredField,
                  monitor=None) -> tuple[StaggeredField, LoopResult]:
    """Advance ``v0`` over ``config.n_steps`` steps.

    ``source`` maps a time to the source field; ``None`` means no forcing.
    The three-level scheme takes its first step with the two-level
    alternating-triangular scheme at the same sigma.  If ``config.monitor``
    is set and no monitor is passed, a :class:`StabilityMonitor` is created.
    """
    if monitor is None and config.monitor:
        from .stability_monitor import StabilityMonitor

        monitor = StabilityMonitor(op, config)
    zero = StaggeredField.zeros(op.grid)
    state = TimeState(0, 0.0, v0, None)
    if monitor is not None:
        monitor.start(v0)
    start = time.perf_counter()
    for n in range(config.n_steps):
        psi = source(config.source_time(n)) if source is not None else zero
        step_scheme = config.scheme
        if config.scheme is Scheme.THREE_LEVEL and state.v_prev is None:
            step_scheme = Scheme.ALT_TRIANGULAR
        try:
            v_next = STEPPERS[step_scheme](state, op, config, psi)
        except Exception as exc:
            raise StepError(n, exc) from exc
        if monitor is not None:
            monitor.observe(n, state.v_prev, state.v_curr, v_next, psi, step_scheme)
        state = TimeState(n + 1, (n + 1) * config.tau, v_next, state.v_curr)
        if config.scheme is not Scheme.THREE_LEVEL:
            state.v_prev = None
    wall = time.perf_counter() - start
    log.debug("%s: %d steps in %.2fs", config.scheme.value, config.n_steps, wall)
    ledger = monitor.ledger if monitor is not None else None
    return state.v_curr, LoopResult(config.n_steps, wall, ledger)
