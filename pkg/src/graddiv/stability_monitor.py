"""Runtime checks of the discrete energy estimates.

Every two-level scheme here has the form ``B (v^{n+1} - v^n)/tau + A v^n = psi``
with a symmetric ``C = B_0 - (tau/2) A`` (``B_0`` the symmetric part of ``B``).
When ``C > 0`` each step satisfies

    tau ||w||_C^2 + |v^{n+1}|_A^2 - |v^n|_A^2 <= tau ||psi||_{C^-1}^2,
    w = (v^{n+1} - v^n) / tau.

For the three-level scheme ``C = I + (sigma - 1/2) tau A`` and the history
term adds ``tau ||w||_S^2`` on both sides, with ``S = sigma^2 tau^2 A1 A2``:

    tau ||w^{n+1}||_C^2 + |v^{n+1}|_A^2 + tau ||w^{n+1}||_S^2
        <= |v^n|_A^2 + tau ||w^n||_S^2 + tau ||psi||_{C^-1}^2.

``||w||_S^2`` equals ``sigma^2 tau^2 ||A2 w||^2``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import StaggeredField, staggered_inner_product, staggered_norm
from .linear_solvers import ConvergenceError, conjugate_residual
from .operator import GradDivOperator, OperatorPart
from .schemes import Scheme, SchemeConfig

MONITOR_DOF_CAP = 20000
MONITOR_TOL = 1e-9
INNER_TOL = 1e-10

LEDGER_COLUMNS = ("n", "t", "A_seminorm_sq", "C_norm_w_sq", "R_norm_w_sq", "rhs_budget", "pass")


def apply_C(scheme: Scheme, op: GradDivOperator, sigma: float, tau: float, v: StaggeredField) -> StaggeredField:
    """Energy operator ``C`` of a scheme applied to ``v``."""
    scheme = Scheme(scheme)
    if scheme in (Scheme.THETA, Scheme.THREE_LEVEL):
        return v + ((sigma - 0.5) * tau) * op(v)
    if scheme is Scheme.JACOBI:
        return v + (sigma * tau) * op.apply(OperatorPart.D, v) - (0.5 * tau) * op(v)
    if scheme is Scheme.GAUSS_SEIDEL:
        return v + (0.5 * tau) * op.apply(OperatorPart.D, v)
    if scheme is Scheme.ALT_TRIANGULAR:
        st = sigma * tau
        a1a2 = op.apply(OperatorPart.A1, op.apply(OperatorPart.A2, v))
        return v + ((sigma - 0.5) * tau) * op(v) + (st * st) * a1a2
    raise ValueError(f"no energy operator for {scheme!r}")


def history_norm_sq(op: GradDivOperator, sigma: float, tau: float, w: StaggeredField) -> float:
    """``||w||_S^2 = sigma^2 tau^2 ||A2 w||^2`` for the three-level history term."""
    a2w = op.apply(OperatorPart.A2, w)
    return (sigma * tau) ** 2 * staggered_inner_product(a2w, a2w)


def _c_is_identity(scheme: Scheme, sigma: float) -> bool:
    return scheme in (Scheme.THETA, Scheme.THREE_LEVEL) and sigma == 0.5


def dual_norm_sq(scheme: Scheme, op: GradDivOperator, sigma: float, tau: float, psi: StaggeredField,
                 tol: float = INNER_TOL) -> float:
    """``||psi||_{C^-1}^2 = (psi, C^-1 psi)`` via an inner Krylov solve with ``C``."""
    if _c_is_identity(scheme, sigma):
        return staggered_inner_product(psi, psi)
    z = conjugate_residual(lambda x: apply_C(scheme, op, sigma, tau, x), psi, tol=tol, maxit=5000)
    return staggered_inner_product(psi, z)


@dataclass
class StepCheck:
    passed: bool | None  # None: inconclusive
    lhs: float
    rhs: float
    a_seminorm_sq: float
    c_norm_w_sq: float
    r_norm_w_sq: float | None
    rhs_term: float | None

    @property
    def residual(self) -> float:
        return self.lhs - self.rhs


def check_step_inequality(scheme: Scheme, op: GradDivOperator, sigma: float, tau: float,
                          v_n: StaggeredField, v_next: StaggeredField, psi: StaggeredField | None = None,
                          v_prev: StaggeredField | None = None, tol: float = MONITOR_TOL,
                          dof_cap: int = MONITOR_DOF_CAP) -> StepCheck:
    """Check the per-step energy inequality for one step ``v_n -> v_next``.

    The step passes when ``lhs - rhs <= tol (1 + rhs + |v_n|_A^2)``; the
    ``|v_n|_A^2`` term scales the allowance to the rounding level of the
    energies being differenced.  Above ``dof_cap`` DOFs the ``C^-1`` solve is
    skipped and only steps with zero forcing can be decided.
    """
    scheme = Scheme(scheme)
    w = (v_next - v_n) / tau
    e_n = op.energy(v_n)
    e_next = op.energy(v_next)
    c_term = tau * staggered_inner_product(apply_C(scheme, op, sigma, tau, w), w)
    lhs = c_term + e_next - e_n
    r_next = None
    if scheme is Scheme.THREE_LEVEL:
        if v_prev is None:
            raise ValueError("three-level check needs v^{n-1}")
        w_prev = (v_n - v_prev) / tau
        r_next = tau * history_norm_sq(op, sigma, tau, w)
        lhs += r_next - tau * history_norm_sq(op, sigma, tau, w_prev)

    forced = psi is not None and psi.max_abs() > 0.0
    rhs_term = 0.0
    if forced:
        if op.grid.n_dofs > dof_cap:
            rhs_term = None
        else:
            try:
                rhs_term = tau * dual_norm_sq(scheme, op, sigma, tau, psi)
            except ConvergenceError:
                rhs_term = None
    if rhs_term is None:
        return StepCheck(None, lhs, float("nan"), e_next, c_term, r_next, None)
    passed = lhs - rhs_term <= tol * (1.0 + rhs_term + e_n)
    return StepCheck(bool(passed), lhs, rhs_term, e_next, c_term, r_next, rhs_term)


@dataclass
class LedgerRow:
    n: int
    t: float
    A_seminorm_sq: float
    C_norm_w_sq: float | None = None
    R_norm_w_sq: float | None = None
    rhs_budget: float | None = None
    passed: bool | None = None


@dataclass
class EnergyLedger:
    scheme: str
    sigma: float
    tau: float
    rows: list = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        """True when no step failed; inconclusive steps do not count as failures."""
        return not any(r.passed is False for r in self.rows)

    @property
    def n_checked(self) -> int:
        return sum(r.passed is not None for r in self.rows)

    def failures(self) -> list:
        return [r for r in self.rows if r.passed is False]

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(LEDGER_COLUMNS)
            for r in self.rows:
                writer.writerow([r.n, repr(r.t), _fmt(r.A_seminorm_sq), _fmt(r.C_norm_w_sq),
                                 _fmt(r.R_norm_w_sq), _fmt(r.rhs_budget),
                                 "" if r.passed is None else int(r.passed)])
        return path

    @classmethod
    def from_csv(cls, path, scheme="", sigma=float("nan"), tau=float("nan")) -> "EnergyLedger":
        ledger = cls(scheme, sigma, tau)
        with Path(path).open(newline="") as fh:
            for rec in csv.DictReader(fh):
                ledger.rows.append(LedgerRow(
                    int(rec["n"]), float(rec["t"]), float(rec["A_seminorm_sq"]),
                    _parse(rec["C_norm_w_sq"]), _parse(rec["R_norm_w_sq"]), _parse(rec["rhs_budget"]),
                    None if rec["pass"] == "" else bool(int(rec["pass"])),
                ))
        return ledger


def _fmt(x):
    return "" if x is None else repr(float(x))


def _parse(s):
    return None if s == "" else float(s)


class StabilityMonitor:
    """Observer for :func:`graddiv.schemes.run_time_loop` that fills an :class:`EnergyLedger`.

    Besides the per-step inequality it tracks, for two-level schemes, the
    square-norm bound

        ||v^{n+1}||_C^2 <= 2 ||v^0||_C^2 + 2 t^{n+1} (|v^0|_A^2 + budget_n)

    where ``budget_n`` is the accumulated ``sum tau ||psi^k||_{C^-1}^2``.
    """

    def __init__(self, op: GradDivOperator, config: SchemeConfig, tol: float = MONITOR_TOL,
                 dof_cap: int = MONITOR_DOF_CAP):
        self.op = op
        self.config = config
        self.tol = tol
        self.dof_cap = dof_cap
        self.ledger = EnergyLedger(config.scheme.value, config.sigma, config.tau)
        self.norm_bound_violations = 0
        self._budget = 0.0
        self._budget_known = True
        self._v0 = None

    def start(self, v0: StaggeredField):
        self._v0 = v0
        self._budget = 0.0
        self._budget_known = True
        self.ledger.rows.append(LedgerRow(0, 0.0, self.op.energy(v0), rhs_budget=0.0))

    def observe(self, n: int, v_prev, v_n, v_next, psi, scheme: Scheme):
        cfg = self.config
        check = check_step_inequality(scheme, self.op, cfg.sigma, cfg.tau, v_n, v_next, psi,
                                      v_prev=v_prev, tol=self.tol, dof_cap=self.dof_cap)
        if check.rhs_term is None:
            self._budget_known = False
        else:
            self._budget += check.rhs_term
        budget = self._budget if self._budget_known else None
        t_next = (n + 1) * cfg.tau
        r_next = check.r_norm_w_sq
        if cfg.scheme is Scheme.THREE_LEVEL and r_next is None:
            # bootstrap step: the three-level functional starts at n = 1
            r_next = cfg.tau * history_norm_sq(self.op, cfg.sigma, cfg.tau, (v_next - v_n) / cfg.tau)
        self.ledger.rows.append(LedgerRow(n + 1, t_next, check.a_seminorm_sq, check.c_norm_w_sq,
                                          r_next, budget, check.passed))
        if scheme is not Scheme.THREE_LEVEL and budget is not None:
            self._check_norm_bound(scheme, v_next, t_next, budget)

    def _check_norm_bound(self, scheme, v_next, t_next, budget):
        cfg, op = self.config, self.op
        lhs = staggered_inner_product(apply_C(scheme, op, cfg.sigma, cfg.tau, v_next), v_next)
        v0 = self._v0
        c0 = staggered_inner_product(apply_C(scheme, op, cfg.sigma, cfg.tau, v0), v0)
        bound = 2.0 * c0 + 2.0 * t_next * (op.energy(v0) + budget)
        if lhs > bound + self.tol * (1.0 + bound):
            self.norm_bound_violations += 1


@dataclass
class HypothesisReport:
    trials: int
    seed: int
    symmetry: float = 0.0
    nonnegativity: float = 0.0
    block_bound: float = 0.0
    lu_adjoint: float = 0.0
    split_adjoint: float = 0.0
    quadratic_identity: float = 0.0

    def passed(self, rel_tol: float = 1e-12) -> bool:
        return all(getattr(self, name) <= rel_tol for name in self.PROPERTIES)

    PROPERTIES = ("symmetry", "nonnegativity", "block_bound", "lu_adjoint", "split_adjoint",
                  "quadratic_identity")


def verify_operator_hypotheses(op: GradDivOperator, trials: int = 100, seed: int = 0) -> HypothesisReport:
    """Seeded random-field checks of the operator assumptions.

    Each entry of the report is the largest violation seen, relative to
    ``||A||_est ||v|| ||w||`` (zero means the property held exactly).  The
    block bound is ``(Av, v) <= 2 (Dv, v)``.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    rng = np.random.default_rng(seed)
    rep = HypothesisReport(trials, seed)
    scale_a = op.norm_estimate()
    for _ in range(trials):
        v = StaggeredField.random(op.grid, rng)
        w = StaggeredField.random(op.grid, rng)
        nv, nw = staggered_norm(v), staggered_norm(w)
        s_vw = scale_a * nv * nw
        s_vv = scale_a * nv * nv
        if s_vv == 0.0:
            continue
        av = op(v)
        avv = staggered_inner_product(av, v)
        rep.symmetry = max(rep.symmetry, abs(staggered_inner_product(av, w) - staggered_inner_product(v, op(w))) / s_vw)
        rep.nonnegativity = max(rep.nonnegativity, -avv / s_vv)
        dvv = op.quadratic_form(OperatorPart.D, v)
        rep.block_bound = max(rep.block_bound, (avv - 2.0 * dvv) / s_vv)
        lu = staggered_inner_product(op.apply(OperatorPart.L, v), w) - staggered_inner_product(v, op.apply(OperatorPart.U, w))
        rep.lu_adjoint = max(rep.lu_adjoint, abs(lu) / s_vw)
        sp = staggered_inner_product(op.apply(OperatorPart.A1, v), w) - staggered_inner_product(v, op.apply(OperatorPart.A2, w))
        rep.split_adjoint = max(rep.split_adjoint, abs(sp) / s_vw)
        rep.quadratic_identity = max(rep.quadratic_identity, abs(avv - op.energy(v)) / s_vv)
    return rep
