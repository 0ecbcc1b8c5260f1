"""Benchmark runs on the manufactured problem: single runs, tau sweeps, reports."""

from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .grid import build_grid
from .mms import ERROR_REFERENCES, ManufacturedCase
from .operator import GradDivOperator
from .schemes import Scheme, SchemeConfig, run_time_loop

JOBS_ENV = "GRADDIV_JOBS"

# Discrete error norm at T = 10 on a 200 x 200 grid, k = 1 (reference values).
REFERENCE_TAUS = (0.1, 0.05, 0.025, 0.0125, 0.00625)
REFERENCE_ERRORS = {
    "J": (0.144, 0.103, 0.066, 0.039, 0.021),
    "GS": (0.2, 0.129, 0.075, 0.041, 0.021),
    "AT": (0.185, 0.067, 0.023, 0.008, 2.7e-3),
    "3-level": (0.01, 1.9e-3, 3e-4, 5.7e-5, 1.4e-5),
    "CN": (6e-4, 1.6e-4, 4.6e-5, 1.9e-5, 1.2e-5),
}
REFERENCE_SCHEMES = {
    "J": (Scheme.JACOBI, 1.0),
    "GS": (Scheme.GAUSS_SEIDEL, 1.0),
    "AT": (Scheme.ALT_TRIANGULAR, 0.5),
    "3-level": (Scheme.THREE_LEVEL, 0.5),
    "CN": (Scheme.THETA, 0.5),
}


@dataclass(frozen=True)
class RunConfig:
    scheme: str = "alt_triangular"
    sigma: float = 0.5
    tau: float = 0.1
    T: float = 10.0
    nx: int = 200
    k: float = 1.0
    monitor: bool = False
    out: str | None = None
    halvings: int = 4
    error_reference: str = "faces"
    solver_tol: float = 1e-10

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme).value)
        if self.nx < 2:
            raise ValueError(f"nx must be at least 2, got {self.nx}")
        if self.k < 0:
            raise ValueError(f"k must be nonnegative, got {self.k}")
        if self.halvings < 0:
            raise ValueError("halvings must be nonnegative")
        if self.error_reference not in ERROR_REFERENCES:
            raise ValueError(f"error_reference must be one of {ERROR_REFERENCES}")

    def scheme_config(self) -> SchemeConfig:
        return SchemeConfig(Scheme(self.scheme), self.sigma, self.tau, self.T, self.monitor, self.solver_tol)

    @classmethod
    def from_mapping(cls, values: dict) -> "RunConfig":
        """Build from string or typed values; unknown keys are an error."""
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            name = key.strip().replace("-", "_")
            name = CONFIG_ALIASES.get(name, name)
            if name not in known:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[name] = _coerce(name, raw)
        return cls(**kwargs)


CONFIG_ALIASES = {"sweep_halvings": "halvings", "t": "T", "reference": "error_reference"}


def _coerce(name, raw):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    if name in ("nx", "halvings"):
        return int(raw)
    if name in ("sigma", "tau", "T", "k", "solver_tol"):
        return float(raw)
    if name == "monitor":
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"monitor must be a boolean, got {raw!r}")
    if name == "out":
        return raw or None
    return raw


def read_config_file(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


@dataclass
class RunReport:
    config: RunConfig
    error: float
    wall_time: float
    steps: int
    monitor_passed: bool | None = None
    ledger_path: str | None = None


REPORT_COLUMNS = ("scheme", "sigma", "tau", "T", "nx", "k", "error_reference", "steps", "error",
                  "wall_time", "monitor_passed")


def run_single(config: RunConfig) -> RunReport:
    """Run the manufactured problem and measure the error at ``T``."""
    grid = build_grid(config.nx, config.nx, 1.0, 1.0)
    op = GradDivOperator(grid, config.k)
    case = ManufacturedCase(config.k)
    sc = config.scheme_config()
    v0 = case.exact_on_faces(0.0, grid)
    start = time.perf_counter()
    v, info = run_time_loop(op, sc, case.source(grid), v0)
    wall = time.perf_counter() - start
    error = case.measure_error(v, sc.n_steps * sc.tau, config.error_reference)
    report = RunReport(config, error, wall, info.steps)
    if info.ledger is not None:
        report.monitor_passed = info.ledger.all_passed
        if config.out:
            out = Path(config.out)
            out.mkdir(parents=True, exist_ok=True)
            path = out / f"{config.scheme}_sigma{config.sigma:g}_tau{config.tau:g}_ledger.csv"
            info.ledger.to_csv(path)
            report.ledger_path = str(path)
    return report


def write_report_csv(reports, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for r in reports:
            c = r.config
            writer.writerow([c.scheme, repr(c.sigma), repr(c.tau), repr(c.T), c.nx, repr(c.k), c.error_reference,
                             r.steps, repr(r.error), repr(r.wall_time),
                             "" if r.monitor_passed is None else int(r.monitor_passed)])
    return path


def read_report_csv(path) -> list:
    reports = []
    with Path(path).open(newline="") as fh:
        for rec in csv.DictReader(fh):
            cfg = RunConfig(scheme=rec["scheme"], sigma=float(rec["sigma"]), tau=float(rec["tau"]),
                            T=float(rec["T"]), nx=int(rec["nx"]), k=float(rec["k"]),
                            error_reference=rec["error_reference"])
            mp = rec["monitor_passed"]
            reports.append(RunReport(cfg, float(rec["error"]), float(rec["wall_time"]), int(rec["steps"]),
                                     None if mp == "" else bool(int(mp))))
    return reports


def observed_orders(errors) -> list:
    """``log2(e_k / e_{k+1})`` between successive halvings of tau."""
    return [math.log2(a / b) if a > 0 and b > 0 else float("nan") for a, b in zip(errors, errors[1:])]


@dataclass
class SweepReport:
    base: RunConfig
    runs: list = field(default_factory=list)

    @property
    def taus(self) -> list:
        return [r.config.tau for r in self.runs]

    @property
    def errors(self) -> list:
        return [r.error for r in self.runs]

    @property
    def orders(self) -> list:
        return observed_orders(self.errors)

    def to_markdown(self) -> str:
        lines = [f"| tau | error ({self.base.scheme}, sigma={self.base.sigma:g}) | order |",
                 "|---|---|---|"]
        orders = [None] + self.orders
        for r, p in zip(self.runs, orders):
            lines.append(f"| {r.config.tau:.6g} | {r.error:.6g} | {'' if p is None else f'{p:.6g}'} |")
        return "\n".join(lines) + "\n"

    def to_csv(self, path) -> Path:
        return write_report_csv(self.runs, path)

    @classmethod
    def from_csv(cls, path) -> "SweepReport":
        runs = read_report_csv(path)
        if not runs:
            raise ValueError(f"{path} holds no runs")
        return cls(replace(runs[0].config), runs)


def _jobs(jobs):
    if jobs is None:
        jobs = int(os.environ.get(JOBS_ENV, "1"))
    return max(1, jobs)


def _run_many(configs, jobs):
    jobs = _jobs(jobs)
    if jobs == 1 or len(configs) == 1:
        return [run_single(c) for c in configs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_single, configs))


def sweep_configs(base: RunConfig, n_halvings: int) -> list:
    if n_halvings < 1:
        raise ValueError("a sweep needs at least one halving")
    return [replace(base, tau=base.tau / 2 ** i) for i in range(n_halvings + 1)]


def run_sweep(base: RunConfig, n_halvings: int | None = None, jobs: int | None = None) -> SweepReport:
    """Run ``base`` at tau, tau/2, ..., tau/2**n_halvings."""
    n = base.halvings if n_halvings is None else n_halvings
    return SweepReport(base, _run_many(sweep_configs(base, n), jobs))


def run_reference_table(nx: int = 200, T: float = 10.0, tau0: float = 0.1, n_halvings: int = 4,
               labels=tuple(REFERENCE_SCHEMES), jobs: int | None = None, **overrides) -> dict:
    """Sweeps for the reference scheme/sigma combinations, keyed by column label."""
    out = {}
    for label in labels:
        scheme, sigma = REFERENCE_SCHEMES[label]
        base = RunConfig(scheme=scheme.value, sigma=sigma, tau=tau0, T=T, nx=nx, halvings=n_halvings, **overrides)
        out[label] = run_sweep(base, n_halvings, jobs)
    return out


def table_markdown(sweeps: dict, with_reference: bool = True) -> str:
    """Errors side by side in the layout of the reference table.

    When ``with_reference`` is set and the taus match the reference ones,
    each cell also shows the reference value in brackets.
    """
    labels = list(sweeps)
    taus = next(iter(sweeps.values())).taus
    compare = with_reference and len(taus) == len(REFERENCE_TAUS) and all(
        math.isclose(a, b) for a, b in zip(taus, REFERENCE_TAUS))
    head = "| tau | " + " | ".join(labels) + " |"
    lines = [head, "|" + "---|" * (len(labels) + 1)]
    for i, tau in enumerate(taus):
        cells = []
        for lab in labels:
            cell = f"{sweeps[lab].errors[i]:.6g}"
            if compare and lab in REFERENCE_ERRORS:
                cell += f" ({REFERENCE_ERRORS[lab][i]:g})"
            cells.append(cell)
        lines.append(f"| {tau:g} | " + " | ".join(cells) + " |")
    lines.append("")
    lines.append("| orders | " + " | ".join(labels) + " |")
    lines.append("|" + "---|" * (len(labels) + 1))
    for i in range(len(taus) - 1):
        lines.append(f"| {taus[i]:g}->{taus[i + 1]:g} | "
                     + " | ".join(f"{sweeps[lab].orders[i]:.3f}" for lab in labels) + " |")
    return "\n".join(lines) + "\n"


def config_dict(config: RunConfig) -> dict:
    return asdict(config)
