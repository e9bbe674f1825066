"""Parameter sweeps over N for fixed p or p = N^(-beta), emitted as CSV rows."""

from __future__ import annotations

import csv
import dataclasses
import datetime
import hashlib
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import __version__
from ._rng import derive_seed
from .analytics import (AnalyticContext, h_correction, lower_bound_T, normalizer,
                        pp_optimize, regular_upper_bound)
from .designs import ConstructionError, Family, generate, optimal_params
from .simulate import mc_expected_tests, mc_family_expected_tests

MODES = ("beta_sweep", "fixed_p_sweep")
PILOT_TRIALS = 100
CI_Z = 1.96
CI_FRACTION = 0.01

COLUMNS = [
    "mode", "beta", "N", "p", "family", "L", "M", "status",
    "lower_bound", "lower_ratio", "upper_bound", "upper_ratio", "H", "H_in_window",
    "pp_M", "pp_K", "pp_ratio",
    "trials", "designs", "mc_mean", "mc_se", "mc_ratio", "mc_ratio_se",
]


@dataclass(frozen=True)
class ExperimentSpec:
    mode: str = "beta_sweep"
    beta: float = 0.25
    p: float | None = None
    n_grid: tuple = (4096,)
    families: tuple = ("rr6",)
    trials: int | None = None
    design_samples: int = 4
    max_trials: int = 20000
    mc_max_n: int = 1 << 16
    pp_analytic: bool = True
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        grid = tuple(int(n) for n in self.n_grid)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 1:
            raise ValueError("n_grid must be non-empty, positive and strictly increasing")
        object.__setattr__(self, "n_grid", grid)
        fams = tuple(Family.parse(f).value for f in self.families)
        object.__setattr__(self, "families", fams)
        if self.mode == "beta_sweep":
            if not 0.0 <= self.beta < 1.0:
                raise ValueError("beta must lie in [0, 1)")
            if self.beta == 0.0 and self.p is None:
                raise ValueError("beta = 0 needs a fixed p")
        elif self.p is None or not 0.0 < self.p < 1.0:
            raise ValueError("fixed_p_sweep needs p in (0, 1)")
        if self.trials is not None and self.trials < 1:
            raise ValueError("trials must be positive")
        if self.design_samples < 1 or self.workers < 1:
            raise ValueError("design_samples and workers must be positive")

    def p_for(self, n):
        if self.mode == "fixed_p_sweep" or self.beta == 0.0:
            return float(self.p)
        return float(n) ** (-self.beta)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["n_grid"] = list(self.n_grid)
        d["families"] = list(self.families)
        return d

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown experiment keys: {sorted(extra)}")
        data = dict(data)
        for key in ("n_grid", "families"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)

    def digest(self):
        # workers does not change results, so it stays out of the hash
        d = self.to_dict()
        d.pop("workers")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def _make_runner(family, params, ctx, seed, design_samples):
    # the girth-6 design is deterministic given the seed, so build it once
    if family is Family.REGULAR_REGULAR_GIRTH6:
        design = generate(params.with_seed(derive_seed(seed, 0)))
        return lambda trials: mc_expected_tests(design, ctx, trials, derive_seed(seed, 1))
    return lambda trials: mc_family_expected_tests(params, ctx, design_samples, trials, seed)


def _adaptive_trials(run, scale, cap):
    """Trials per design so the 95% CI half-width is under 1% of ``scale``."""
    pilot = run(PILOT_TRIALS)
    if not math.isfinite(pilot.std_error) or pilot.std_error == 0.0:
        return PILOT_TRIALS
    # se scales like 1/sqrt(trials per design) when design spread is small
    need = PILOT_TRIALS * (CI_Z * pilot.std_error / (CI_FRACTION * scale)) ** 2
    return int(min(cap, max(PILOT_TRIALS, math.ceil(need))))


def _row(spec, n, family_name):
    family = Family.parse(family_name)
    p = spec.p_for(n)
    ctx = AnalyticContext(p)
    row = dict.fromkeys(COLUMNS, "")
    row.update(mode=spec.mode, beta=spec.beta if spec.mode == "beta_sweep" else "",
               N=n, p=p, family=family.value, status="ok")
    try:
        params = optimal_params(n, p, family)
    except ValueError as exc:
        row["status"] = f"infeasible: {exc}"
        return row
    scale = normalizer(n, ctx)
    row.update(L=params.tests_per_variable, M=params.n_tests)
    lb_c, floor = lower_bound_T(n, ctx)
    lower = max(lb_c, floor)
    row.update(lower_bound=lower, lower_ratio=lower / scale)
    if family is not Family.POISSON_POISSON:
        ub = regular_upper_bound(n, ctx)
        h, inside = h_correction(n, ctx, ub)
        row.update(upper_bound=ub, upper_ratio=ub / scale, H=h, H_in_window=int(inside))
    elif spec.pp_analytic:
        m_opt, k_opt, r_opt = pp_optimize(n, ctx)
        row.update(pp_M=m_opt, pp_K=k_opt, pp_ratio=r_opt)
    if n > spec.mc_max_n:
        return row
    seed = derive_seed(spec.seed, n, list(Family).index(family))
    samples = 1 if family is Family.REGULAR_REGULAR_GIRTH6 else spec.design_samples
    try:
        run = _make_runner(family, params, ctx, seed, samples)
        trials = spec.trials or _adaptive_trials(run, scale, spec.max_trials)
        est = run(trials)
    except ConstructionError as exc:
        row["status"] = f"infeasible: {exc}"
        return row
    row.update(trials=trials, designs=est.n_designs, mc_mean=est.mean, mc_se=est.std_error,
               mc_ratio=est.mean / scale, mc_ratio_se=est.std_error / scale)
    return row


def run_experiment(spec: ExperimentSpec):
    """Rows in spec order: for each N in the grid, one row per family."""
    jobs = [(n, f) for n in spec.n_grid for f in spec.families]
    if spec.workers == 1:
        return [_row(spec, n, f) for n, f in jobs]
    with ThreadPoolExecutor(max_workers=spec.workers) as pool:
        return list(pool.map(lambda job: _row(spec, *job), jobs))


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render_csv(spec, rows, timestamp=None):
    stamp = timestamp or datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    buf = io.StringIO()
    buf.write(f"# grouptest {__version__} seed={spec.seed} spec_sha256={spec.digest()} "
              f"created={stamp}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in COLUMNS])
    return buf.getvalue()


def render_json(spec, rows):
    return json.dumps({"version": __version__, "spec": spec.to_dict(),
                       "spec_sha256": spec.digest(), "rows": rows}, indent=2)
