"""Sweeps over configurations, Monte Carlo trials, exponent regression and
result files."""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from . import __version__
from .bounds import achievability_vs_bound, classify_regime, cutset_bound
from .errors import ConfigurationError, InsufficientDataError
from .netgen import NetworkConfig, generate_instance
from .schemes import SCHEMES, run_scheme

log = logging.getLogger(__name__)

VERSION = f"covertnet-{__version__}"


@dataclass(frozen=True)
class SweepSpec:
    """Grid of configurations and trials.

    The window follows ``l = n**l_beta`` when ``l_beta`` is set, else the
    fixed ``l``. A ``gamma`` entry of ``None`` means ``kappa/2 + gamma_offset``.
    """

    n_values: tuple[float, ...] = (2.0**10, 2.0**12, 2.0**14)
    kappas: tuple[float, ...] = (0.5,)
    alphas: tuple[float, ...] = (3.5,)
    deltas: tuple[float, ...] = (0.05,)
    gammas: tuple[float | None, ...] = (None,)
    gamma_offset: float = 0.0
    l: float | None = None
    l_beta: float | None = 1.0
    trials: int = 1
    schemes: tuple[str, ...] = SCHEMES
    seed: int = 0
    c_b: float = 3.0 * math.sqrt(2.0)
    bound: bool = True
    out: str | None = None

    def __post_init__(self) -> None:
        for name in ("n_values", "kappas", "alphas", "deltas", "gammas", "schemes"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.trials < 1:
            raise ConfigurationError("trials must be at least 1")
        if not self.n_values:
            raise ConfigurationError("n_values must not be empty")
        if (self.l is None) == (self.l_beta is None):
            raise ConfigurationError("give exactly one of l and l_beta")
        unknown = set(self.schemes) - set(SCHEMES)
        if unknown:
            raise ConfigurationError(f"unknown schemes {sorted(unknown)}")

    def configs(self) -> list[NetworkConfig]:
        out = []
        grid = itertools.product(self.kappas, self.alphas, self.deltas, self.gammas, self.n_values)
        for kappa, alpha, delta, gamma, n in grid:
            g = kappa / 2.0 + self.gamma_offset if gamma is None else gamma
            out.append(NetworkConfig(
                n=float(n), kappa=kappa, alpha=alpha, delta=delta, gamma=g,
                l=float(self.l) if self.l is not None else 1.0, l_beta=self.l_beta,
                seed=self.seed, c_b=self.c_b,
            ))
        return out

    def to_dict(self) -> dict[str, Any]:
        return {f.name: (list(v) if isinstance(v := getattr(self, f.name), tuple) else v) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "SweepSpec":
        names = {f.name for f in fields(cls)}
        extra = set(d) - names
        if extra:
            raise ConfigurationError(f"unknown sweep fields {sorted(extra)}")
        return cls(**dict(d))

    @classmethod
    def load(cls, path: str | Path) -> "SweepSpec":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read sweep spec {path}: {exc}") from exc


def run_trial(config: NetworkConfig, trial: int, schemes: Sequence[str], bound: bool = True) -> list[dict[str, Any]]:
    """All requested schemes on one sampled instance, one row per scheme."""
    inst = generate_instance(config, trial)
    results = [run_scheme(s, config, inst) for s in schemes]
    cb = cutset_bound(config) if bound else None
    if cb is not None:
        achievability_vs_bound(results, cb)
    cfg = config.to_dict()
    rows = []
    for r in results:
        cov = r.covertness.summary()
        rows.append({
            "version": VERSION,
            "trial": trial,
            "scheme": r.scheme,
            "n": config.n,
            "n_l": inst.n_l,
            "n_w": inst.n_w,
            "throughput": r.throughput,
            "rate": r.rate,
            "outage": r.outage,
            "served": r.served,
            "worst_kl": cov["worst_kl"],
            "violations": cov["violations"],
            "covert": cov["passed"],
            "bound_total": cb.total if cb is not None else None,
            "config": cfg,
        })
    return rows


def _run_task(task: tuple[NetworkConfig, int, tuple[str, ...], bool]) -> list[dict[str, Any]]:
    return run_trial(*task)


def run_sweep(spec: SweepSpec, jobs: int = 1) -> list[dict[str, Any]]:
    """Rows for every (configuration, trial, scheme), in grid order."""
    tasks = [(cfg, t, spec.schemes, spec.bound) for cfg in spec.configs() for t in range(spec.trials)]
    log.info("sweep: %d configurations x %d trials", len(tasks) // spec.trials, spec.trials)
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_task, tasks))
    else:
        chunks = [_run_task(t) for t in tasks]
    return [row for chunk in chunks for row in chunk]


# -- regression ---------------------------------------------------------------

@dataclass(frozen=True)
class RegressionResult:
    exponent: float
    stderr: float
    theory: float | None
    tolerance: float
    n_values: tuple[float, ...] = field(default_factory=tuple)
    means: tuple[float, ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        if self.theory is None:
            return True
        return abs(self.exponent - self.theory) <= self.tolerance

    def to_dict(self) -> dict[str, Any]:
        return {**asdict(self), "passed": self.passed}


def trial_means(table: Iterable[Mapping[str, Any]] | Mapping[float, Sequence[float]], quantity: str = "throughput",
                **where: Any) -> dict[float, float]:
    """Mean of ``quantity`` per n, over rows matching ``where``."""
    if isinstance(table, Mapping):
        return {float(n): float(np.mean(v)) for n, v in table.items()}
    groups: dict[float, list[float]] = {}
    for row in table:
        if all(row.get(k) == v for k, v in where.items()):
            groups.setdefault(float(row["n"]), []).append(float(row[quantity]))
    return {n: float(np.mean(v)) for n, v in groups.items()}


def fit_exponent(table: Iterable[Mapping[str, Any]] | Mapping[float, Sequence[float]], quantity: str = "throughput",
                 *, theory: float | None = None, tolerance: float = 0.15, **where: Any) -> RegressionResult:
    """Least-squares slope of log(mean quantity) against log n.

    Points with non-positive means are dropped; at least three must remain.
    """
    means = trial_means(table, quantity, **where)
    pts = sorted((n, m) for n, m in means.items() if m > 0 and math.isfinite(m))
    if len(pts) < 3:
        raise InsufficientDataError(f"need 3 positive points for a fit, got {len(pts)} of {len(means)}")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    fit = stats.linregress(x, y)
    return RegressionResult(
        exponent=float(fit.slope),
        stderr=float(fit.stderr),
        theory=theory,
        tolerance=tolerance,
        n_values=tuple(p[0] for p in pts),
        means=tuple(p[1] for p in pts),
    )


def theory_exponent(config: NetworkConfig) -> float:
    return classify_regime(config).exponent


# -- persistence --------------------------------------------------------------

CSV_FIELDS = ("version", "trial", "scheme", "n", "n_l", "n_w", "throughput", "rate", "outage", "served",
              "worst_kl", "violations", "covert", "bound_total")


def to_json(rows: Sequence[Mapping[str, Any]], spec: SweepSpec | None = None) -> str:
    doc = {"version": VERSION, "spec": spec.to_dict() if spec else None, "rows": list(rows)}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def to_csv(rows: Sequence[Mapping[str, Any]]) -> str:
    cfg_keys = sorted({k for r in rows for k in r.get("config", {})})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([*CSV_FIELDS, *(f"config.{k}" for k in cfg_keys)])
    for r in rows:
        cfg = r.get("config", {})
        w.writerow([r.get(k) for k in CSV_FIELDS] + [cfg.get(k) for k in cfg_keys])
    return buf.getvalue()


def write_results(rows: Sequence[Mapping[str, Any]], path: str | Path, fmt: str = "json",
                  spec: SweepSpec | None = None) -> Path:
    if fmt not in ("json", "csv"):
        raise ConfigurationError(f"unknown format {fmt!r}")
    p = Path(path)
    p.write_text(to_json(rows, spec) if fmt == "json" else to_csv(rows))
    return p


# -- invariant self-check ---------------------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    detail: str = ""


def verify_invariants(config: NetworkConfig, trials: int = 2) -> list[Check]:
    """Quick structural and covertness checks on small sampled instances."""
    from .bounds import kl_square_identity, rayleigh_magnitude
    from .netgen import build_cell_grid
    from .preserve import build_regions, build_expanded_regions
    from .route import route_instance
    from .schemes import build_mimo_schedule, hc_exponent_recursion

    checks: list[Check] = []
    for t in range(trials):
        inst = generate_instance(config, t)
        grid = build_cell_grid(inst, config.n)
        checks.append(Check(f"partition[{t}]", int(grid.counts.sum()) == inst.n_l))
        used = np.bincount(inst.pairs.ravel(), minlength=inst.n_l)
        expect = np.ones(inst.n_l, dtype=np.int64)
        if inst.unpaired >= 0:
            expect[inst.unpaired] = 0
        checks.append(Check(f"pairing[{t}]", bool(np.array_equal(used, expect))))
        regions = build_regions(inst.wardens, config, grid)
        expanded = build_expanded_regions(regions, grid)
        plan = route_instance(inst, grid, expanded, regions.width_cells)
        forb = expanded.forbidden
        adjacent = clear = ends = True
        for k, p in enumerate(plan.paths):
            if k in plan.outage:
                continue
            i, j = p % grid.dim, p // grid.dim
            adjacent &= bool(np.all(np.abs(np.diff(i)) + np.abs(np.diff(j)) == 1))
            clear &= not bool(forb[p].any())
            s, d = inst.pairs[k]
            ends &= int(p[0]) == int(grid.cell_of[s]) and int(p[-1]) == int(grid.cell_of[d])
        checks.append(Check(f"paths-adjacent[{t}]", adjacent))
        checks.append(Check(f"paths-avoid-regions[{t}]", clear))
        checks.append(Check(f"paths-endpoints[{t}]", ends))
        total = sum(len(p) for p in plan.paths)
        checks.append(Check(f"load-conservation[{t}]", int(plan.load.sum()) == total))
        results = [run_scheme(s, config, inst, check=False) for s in SCHEMES]
        for r in results:
            checks.append(Check(f"covert-{r.scheme}[{t}]", r.covertness.ok, f"worst KL {r.covertness.worst_bound:.4g}"))
        cb = cutset_bound(config)
        worst = max(r.throughput for r in results)
        checks.append(Check(f"cutset-dominance[{t}]", worst <= cb.total, f"max T {worst:.4g} vs bound {cb.total:.4g}"))
    for gp in (1.25, 1.5):
        b = hc_exponent_recursion(0.0, gp, 200)[-1]
        checks.append(Check(f"hc-fixed-point[{gp}]", abs(b - (2.0 - gp)) <= 1e-6, f"b={b:.8f}"))
    # gamma_p = 1 is a neutral fixed point: 1 - b_k = 1/(k + 1)
    b = hc_exponent_recursion(0.0, 1.0, 200)[-1]
    checks.append(Check("hc-neutral-point[1.0]", abs(b - 200.0 / 201.0) <= 1e-9, f"b={b:.8f}"))
    raw, sq = kl_square_identity(rayleigh_magnitude(1.5), rayleigh_magnitude(1.0))
    checks.append(Check("kl-square-identity", abs(raw - sq) <= 1e-3, f"{raw:.6g} vs {sq:.6g}"))
    sched = build_mimo_schedule(64, 4096, 512)
    lo, hi = sched.window_counts()
    blo, bhi = sched.bounds()
    checks.append(Check("mimo-window", blo <= lo and hi <= bhi, f"[{lo}, {hi}] within [{blo}, {bhi}]"))
    return checks
