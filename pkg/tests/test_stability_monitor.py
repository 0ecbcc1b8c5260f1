import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import DenseOracle
from graddiv import GradDivOperator, ManufacturedCase, Scheme, SchemeConfig, StaggeredField, build_grid
from graddiv import StabilityMonitor, apply_C, check_step_inequality, run_time_loop, verify_operator_hypotheses
from graddiv import stability_monitor
from graddiv.grid import staggered_inner_product
from graddiv.linear_solvers import ConvergenceError
from graddiv.schemes import STEPPERS, TimeState
from graddiv.stability_monitor import LEDGER_COLUMNS, EnergyLedger

ALL = [s.value for s in Scheme]
GUARANTEED_SIGMA = {"theta": 0.5, "jacobi": 1.0, "gauss_seidel": 1.0, "alt_triangular": 0.5, "three_level": 0.5}


def homogeneous_run(scheme, tau, n_steps, grid, k, rng, sigma=None):
    sigma = GUARANTEED_SIGMA[scheme] if sigma is None else sigma
    op = GradDivOperator(grid, k)
    cfg = SchemeConfig(Scheme(scheme), sigma, tau, n_steps * tau, monitor=True, solver_tol=1e-12)
    v, info = run_time_loop(op, cfg, None, StaggeredField.random(grid, rng))
    return info.ledger


def functional(ledger, scheme):
    """|v^n|_A^2, plus tau ||w^n||_S^2 for the three-level scheme (defined from n = 1)."""
    rows = ledger.rows
    if scheme == "three_level":
        return np.array([r.A_seminorm_sq + r.R_norm_w_sq for r in rows[1:]])
    return np.array([r.A_seminorm_sq for r in rows])


# -- energy operator C ---------------------------------------------------------

@pytest.mark.parametrize("scheme", ALL)
@pytest.mark.parametrize("sigma, tau", [(0.5, 0.1), (1.0, 0.3), (0.8, 2.0)])
def test_apply_C_matches_dense(rng, scheme, sigma, tau):
    g = build_grid(4, 4)
    kv = rng.uniform(0, 2, (4, 4))
    op = GradDivOperator(g, kv)
    C = DenseOracle(g, kv).C(scheme, sigma, tau)
    for _ in range(3):
        v = rng.uniform(-1, 1, g.n_dofs)
        got = apply_C(Scheme(scheme), op, sigma, tau, StaggeredField.from_vector(g, v)).to_vector()
        assert np.linalg.norm(got - C @ v) <= 1e-12 * np.linalg.norm(C @ v)


def test_apply_C_crank_nicolson_is_identity(rng, grid4, op4):
    v = StaggeredField.random(grid4, rng)
    assert np.array_equal(apply_C(Scheme.THETA, op4, 0.5, 0.7, v).to_vector(), v.to_vector())


@settings(max_examples=40, deadline=None)
@given(scheme=st.sampled_from(ALL), log_tau=st.floats(-3, 3), seed=st.integers(0, 2 ** 32 - 1))
def test_C_dominates_identity(scheme, log_tau, seed):
    rng = np.random.default_rng(seed)
    g = build_grid(5, 4)
    op = GradDivOperator(g, rng.uniform(0, 2, (5, 4)))
    tau = 10.0 ** log_tau
    v = StaggeredField.random(g, rng)
    cv = staggered_inner_product(apply_C(Scheme(scheme), op, GUARANTEED_SIGMA[scheme], tau, v), v)
    vv = staggered_inner_product(v, v)
    assert cv >= vv - 1e-12 * max(1.0, abs(cv))


# -- single-step inequality ------------------------------------------------------

def test_crank_nicolson_energy_identity(rng):
    # with psi = 0 and C = I: |v+|_A^2 - |v|_A^2 = -2 tau ||w||^2
    g = build_grid(8, 8)
    op = GradDivOperator(g, rng.uniform(0.5, 1.5, (8, 8)))
    tau = 0.05
    cfg = SchemeConfig(Scheme.THETA, 0.5, tau, tau, solver_tol=1e-14)
    v = StaggeredField.random(g, rng)
    v1 = STEPPERS[Scheme.THETA](TimeState(0, 0.0, v), op, cfg, StaggeredField.zeros(g))
    w = (v1 - v) / tau
    delta = op.energy(v1) - op.energy(v)
    assert delta == pytest.approx(-2 * tau * staggered_inner_product(w, w), rel=1e-10)
    check = check_step_inequality(Scheme.THETA, op, 0.5, tau, v, v1)
    assert check.passed


@pytest.mark.parametrize("tau", [1e-3, 1.0, 1e3])
def test_gauss_seidel_homogeneous_step_passes(rng, tau):
    g = build_grid(8, 8)
    op = GradDivOperator(g, 1.0)
    cfg = SchemeConfig(Scheme.GAUSS_SEIDEL, 1.0, tau, tau)
    v = StaggeredField.random(g, rng)
    v1 = STEPPERS[Scheme.GAUSS_SEIDEL](TimeState(0, 0.0, v), op, cfg, StaggeredField.zeros(g))
    check = check_step_inequality(Scheme.GAUSS_SEIDEL, op, 1.0, tau, v, v1)
    assert check.passed and check.lhs <= 1e-9 * (1 + op.energy(v))
    assert op.energy(v1) <= op.energy(v)


def test_inequality_flags_a_wrong_step(rng):
    g = build_grid(6, 6)
    op = GradDivOperator(g, 1.0)
    v = StaggeredField.random(g, rng)
    check = check_step_inequality(Scheme.GAUSS_SEIDEL, op, 1.0, 0.1, v, 2.0 * v)
    assert check.passed is False and check.residual > 0


def test_forced_step_within_budget(rng):
    g = build_grid(8, 8)
    op = GradDivOperator(g, 1.0)
    tau = 0.2
    cfg = SchemeConfig(Scheme.ALT_TRIANGULAR, 0.5, tau, tau)
    v, psi = StaggeredField.random(g, rng), 50.0 * StaggeredField.random(g, rng)
    v1 = STEPPERS[Scheme.ALT_TRIANGULAR](TimeState(0, 0.0, v), op, cfg, psi)
    check = check_step_inequality(Scheme.ALT_TRIANGULAR, op, 0.5, tau, v, v1, psi)
    assert check.passed and check.rhs_term > 0


def test_three_level_check_needs_history(rng, grid4, op4):
    v = StaggeredField.random(grid4, rng)
    with pytest.raises(ValueError):
        check_step_inequality(Scheme.THREE_LEVEL, op4, 0.5, 0.1, v, v)


def test_forced_step_above_cap_is_inconclusive(rng):
    g = build_grid(6, 6)
    op = GradDivOperator(g, 1.0)
    v, psi = StaggeredField.random(g, rng), StaggeredField.random(g, rng)
    check = check_step_inequality(Scheme.JACOBI, op, 1.0, 0.1, v, v, psi, dof_cap=10)
    assert check.passed is None
    homogeneous = check_step_inequality(Scheme.JACOBI, op, 1.0, 0.1, v, v, None, dof_cap=10)
    assert homogeneous.passed is True


def test_inner_solve_failure_is_inconclusive(rng, monkeypatch):
    def failing(*args, **kwargs):
        raise ConvergenceError("no luck", 1.0, 5)

    monkeypatch.setattr(stability_monitor, "dual_norm_sq", failing)
    g = build_grid(4, 4)
    op = GradDivOperator(g, 1.0)
    v, psi = StaggeredField.random(g, rng), StaggeredField.random(g, rng)
    assert check_step_inequality(Scheme.JACOBI, op, 1.0, 0.1, v, v, psi).passed is None


# -- homogeneous witnesses -----------------------------------------------------------

@pytest.mark.parametrize("scheme", ALL)
@pytest.mark.parametrize("tau", [0.01, 1.0, 100.0])
def test_homogeneous_functional_non_increasing(rng, scheme, tau):
    g = build_grid(10, 10)
    ledger = homogeneous_run(scheme, tau, 8, g, rng.uniform(0, 2, (10, 10)), rng)
    assert ledger.all_passed and ledger.n_checked == 8
    f = functional(ledger, scheme)
    assert np.all(np.diff(f) <= 1e-12 * max(1.0, f[0]))


# -- monitored manufactured runs -----------------------------------------------------

def manufactured_run(scheme, sigma, tau, T, nx, **kw):
    g = build_grid(nx, nx)
    op = GradDivOperator(g, 1.0)
    case = ManufacturedCase()
    cfg = SchemeConfig(Scheme(scheme), sigma, tau, T, monitor=True)
    monitor = StabilityMonitor(op, cfg, **kw)
    _, info = run_time_loop(op, cfg, case.source(g), case.exact_on_faces(0.0, g), monitor)
    return monitor, info.ledger


def test_jacobi_manufactured_trajectory_passes():
    _, ledger = manufactured_run("jacobi", 1.0, 0.05, 1.0, 32)
    assert ledger.n_checked == 20 and ledger.all_passed


def test_norm_bound_along_theta_trajectory():
    monitor, ledger = manufactured_run("theta", 0.5, 0.1, 2.0, 12)
    assert ledger.all_passed
    assert monitor.norm_bound_violations == 0
    budgets = [r.rhs_budget for r in ledger.rows]
    assert budgets[0] == 0.0 and all(b >= a for a, b in zip(budgets, budgets[1:]))


def test_monitor_above_cap_records_without_deciding():
    _, ledger = manufactured_run("gauss_seidel", 1.0, 0.1, 0.5, 8, dof_cap=10)
    assert ledger.n_checked == 0 and ledger.all_passed
    assert all(r.rhs_budget is None for r in ledger.rows[1:])
    assert len(ledger.rows) == 6


def test_ledger_csv_roundtrip(tmp_path):
    _, ledger = manufactured_run("three_level", 0.5, 0.1, 0.5, 8)
    path = ledger.to_csv(tmp_path / "ledger.csv")
    assert path.read_text().splitlines()[0] == ",".join(LEDGER_COLUMNS)
    back = EnergyLedger.from_csv(path, ledger.scheme, ledger.sigma, ledger.tau)
    assert back == ledger
    assert back.rows[0].passed is None and back.rows[-1].passed is True


# -- operator hypotheses ------------------------------------------------------------

def test_hypotheses_zero_coefficient():
    rep = verify_operator_hypotheses(GradDivOperator(build_grid(6, 6), 0.0), trials=10)
    assert all(getattr(rep, p) == 0.0 for p in rep.PROPERTIES)


def test_hypotheses_unit_coefficient():
    rep = verify_operator_hypotheses(GradDivOperator(build_grid(8, 8), 1.0), trials=100, seed=3)
    assert rep.passed(1e-12)


def test_hypotheses_block_bound_random_coefficient(rng):
    rep = verify_operator_hypotheses(GradDivOperator(build_grid(6, 6), rng.uniform(0, 5, (6, 6))), trials=50)
    assert rep.block_bound <= 1e-14
    assert rep.passed(1e-12)


def test_hypotheses_reject_zero_trials(op4):
    with pytest.raises(ValueError):
        verify_operator_hypotheses(op4, trials=0)


@settings(max_examples=25, deadline=None)
@given(nx=st.integers(2, 9), ny=st.integers(2, 9), seed=st.integers(0, 2 ** 32 - 1))
def test_hypotheses_hold_on_random_grids(nx, ny, seed):
    rng = np.random.default_rng(seed)
    op = GradDivOperator(build_grid(nx, ny, rng.uniform(0.5, 2), rng.uniform(0.5, 2)), rng.uniform(0, 3, (nx, ny)))
    assert verify_operator_hypotheses(op, trials=5, seed=seed).passed(1e-12)
