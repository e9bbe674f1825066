"""Acceptance battery: twelve numbered checks with their tolerances and time budgets."""

from __future__ import annotations

import math
import tempfile
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._rng import make_rng
from .analytics import (LN2, LN2_SQ, AnalyticContext, U_of_p, bound_B, c_of_p, h_correction,
                        normalizer, pp_expected_u0, pp_optimize, pp_ratio,
                        regular_upper_bound)
from .core import PoolDesign, degree_profile, four_cycle_counts, girth_at_least_6
from .decode import decode_two_stage
from .designs import (ConstructionError, Family, gen_regular_regular_girth6, girth_condition,
                      optimal_params)
from .experiment import ExperimentSpec, render_csv, run_experiment
from .simulate import exhaustive_expected_tests, mc_family_expected_tests, mc_joint_expected_tests

P_GRID = (1e-2, 1e-3, 1e-4)


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    elapsed: float
    budget: float | None

    def as_dict(self):
        return {"number": self.number, "name": self.name, "passed": self.passed,
                "detail": self.detail, "elapsed_s": round(self.elapsed, 3), "budget_s": self.budget}


def format_result(r):
    return f"[{'PASS' if r.passed else 'FAIL'}] {r.number:2d} {r.name}: {r.detail} ({r.elapsed:.2f}s)"


class _Floor:
    """Collects every exact E[T] computed by criteria 1-3 for the entropy check."""

    def __init__(self):
        self.items = []

    def add(self, label, n, p, mean_t):
        self.items.append((label, n, p, mean_t))


# -- 1: exactness of B on girth-6 designs ---------------------------------------------

def girth6_battery(seed, count=200):
    """Seeded girth-6 designs with N <= 16 and assorted (L, M), plus a p per design."""
    out = []
    k = 0
    while len(out) < count:
        rng = make_rng(seed, 1, k)
        k += 1
        n = int(rng.integers(3, 17))
        l = int(rng.integers(1, 4))
        m = int(rng.integers(max(l, 2), 13))
        p = float(rng.uniform(0.05, 0.95))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            try:
                d = gen_regular_regular_girth6(n, l, m, seed=k, max_restarts=3)
            except ConstructionError:
                continue
        out.append((d, p))
    return out


def check_1(seed, floor):
    worst = 0.0
    bad = 0
    designs = girth6_battery(seed)
    for d, p in designs:
        ex = exhaustive_expected_tests(d, p)
        floor.add("girth6", d.n_variables, p, ex.mean)
        err = abs(ex.mean_u0 - bound_B(d, p))
        worst = max(worst, err / d.n_variables)
        bad += not (girth_at_least_6(d) and err <= 1e-12 * d.n_variables)
    return bad == 0, f"{len(designs)} designs, {bad} failures, max |E|U0|-B|/N = {worst:.2e}"


# -- 2: FKG gap on arbitrary designs --------------------------------------------------

def arbitrary_battery(seed, count=200):
    """Random designs with N <= 14; every other one gets a forced 4-cycle."""
    out = []
    for k in range(count):
        rng = make_rng(seed, 2, k)
        n = int(rng.integers(2, 15))
        m = int(rng.integers(2, 9))
        c = rng.random((n, m)) < rng.uniform(0.1, 0.6)
        if k % 2 == 0:
            i, j = rng.choice(n, 2, replace=False)
            a, b = rng.choice(m, 2, replace=False)
            c[[i, i, j, j], [a, b, a, b]] = True
        pools = [np.flatnonzero(c[:, a]).tolist() for a in range(m)]
        out.append((PoolDesign(n, pools), float(rng.uniform(0.1, 0.9))))
    return out


def check_2(seed, floor):
    neg = 0
    flat = []
    with_cycles = 0
    worst = math.inf
    for d, p in arbitrary_battery(seed):
        ex = exhaustive_expected_tests(d, p)
        floor.add("arbitrary", d.n_variables, p, ex.mean)
        gap = ex.mean_u0 - bound_B(d, p)
        neg += gap < -1e-12
        if four_cycle_counts(d)[0].any():
            with_cycles += 1
            worst = min(worst, gap)
            if not gap > 1e-6:
                flat.append(gap)
    ok = neg == 0 and not flat
    return ok, (f"200 designs ({with_cycles} with 4-cycles): {neg} negative gaps, "
                f"{len(flat)} cycle designs with gap <= 1e-6, min cycle gap {worst:.3e}")


# -- 3: hand examples -------------------------------------------------------------------

def check_3(seed, floor):
    d = PoolDesign(3, [[0, 1], [1, 2]])
    t1 = decode_two_stage(d, [1, 0, 0]).total_tests
    t2 = decode_two_stage(d, [1, 1, 0]).total_tests
    twin = PoolDesign(2, [[0, 1], [0, 1]])
    ex = exhaustive_expected_tests(twin, 0.5)
    gap = ex.mean_u0 - bound_B(twin, 0.5)
    for design in (d, twin):
        floor.add("hand", design.n_variables, 0.5, exhaustive_expected_tests(design, 0.5).mean)
    ok = t1 == 2 and t2 == 5 and gap == 0.25
    return ok, f"T(100)={t1}, T(110)={t2}, gap={gap!r}"


# -- 4, 5: small-p expansions of U and c ---------------------------------------------

def claim1_deviations():
    return [U_of_p(p)[0] * LN2_SQ / p - 1.0 for p in P_GRID]


def check_4(seed, floor):
    dev = claim1_deviations()
    factors = [abs(a) / abs(b) for a, b in zip(dev, dev[1:])]
    ok = all(5.0 <= f <= 20.0 for f in factors)
    return ok, f"deviations {[f'{x:.3e}' for x in dev]}, shrink factors {[f'{f:.2f}' for f in factors]}"


def c1_residuals():
    out = []
    for p in P_GRID:
        lead = p * abs(math.log(p)) / LN2_SQ
        sub = (1.0 - 2.0 * abs(math.log(LN2))) * p / LN2_SQ
        out.append((c_of_p(p) - lead - sub) / p)
    return out


def check_5(seed, floor):
    res = c1_residuals()
    mags = [abs(x) for x in res]
    ok = all(b < a for a, b in zip(mags, mags[1:]))
    return ok, f"residuals {[f'{x:.4e}' for x in res]}"


# -- 6: regular upper bound along beta = 1/4 ------------------------------------------

def theorem3_trend(beta=0.25, exponents=(12, 16, 20, 24)):
    rows = []
    for e in exponents:
        n = 2 ** e
        p = n ** -beta
        ub = regular_upper_bound(n, p)
        params = optimal_params(n, p, Family.REGULAR_REGULAR_GIRTH6)
        h, _ = h_correction(n, p, ub)
        rows.append((n, ub / normalizer(n, p), h, params.tests_per_variable))
    return rows


def check_6(seed, floor):
    rows = theorem3_trend()
    ratios = [r for _, r, _, _ in rows]
    decreasing = all(b < a for a, b in zip(ratios, ratios[1:]))
    in_range = 2.08 <= ratios[-1] <= 3.0
    h_ok = all(h <= 2.0 for _, _, h, l in rows if l >= 4)
    detail = ", ".join(f"N=2^{int(math.log2(n))}: ratio {r:.4f} H {h:.4f} L {l}"
                       for n, r, h, l in rows)
    return decreasing and in_range and h_ok, detail


# -- 7: girth-6 generator at N = 4096 --------------------------------------------------

def check_7(seed, floor):
    n, p = 4096, 2.0 ** -4
    params = optimal_params(n, p, Family.REGULAR_REGULAR_GIRTH6)
    l, m = params.tests_per_variable, params.n_tests
    feas = girth_condition(n, l, m)
    try:
        d = gen_regular_regular_girth6(n, l, m, seed=seed, max_restarts=10)
    except ConstructionError as exc:
        return False, str(exc)
    var_deg, test_deg = degree_profile(d)
    ok = feas.satisfied and girth_at_least_6(d) and bool(np.all(var_deg == l))
    return ok, (f"L={l} M={m} feasible={feas.satisfied} (need M>={feas.required:.1f}), "
                f"girth>=6={girth_at_least_6(d)}, test degrees {test_deg.min()}..{test_deg.max()}")


# -- 8: closed-form Poisson-Poisson U0 vs joint Monte Carlo ------------------------------

def pp_tuples(seed, count=20):
    out = []
    for k in range(count):
        rng = make_rng(seed, 8, k)
        n = int(rng.integers(2, 11))
        m = int(rng.integers(1, 7))
        kk = float(rng.uniform(0.2, n))
        p = float(rng.uniform(0.05, 0.6))
        out.append((n, m, kk, p))
    return out


def check_8(seed, floor, samples=10 ** 6):
    worst = 0.0
    bad = 0
    for j, (n, m, k, p) in enumerate(pp_tuples(seed)):
        exact = pp_expected_u0(n, p, m, k)
        est, se = mc_joint_expected_tests(n, m, k / n, p, samples, seed=j + 1000 * seed)
        z = abs(est.mean_u0 - exact) / se if se > 0 else (0.0 if est.mean_u0 == exact else math.inf)
        worst = max(worst, z)
        bad += z > 4.0
    return bad == 0, f"20 tuples x {samples} joint samples, {bad} beyond 4 sigma, max |z| = {worst:.2f}"


# -- 9: Poisson-Poisson optimum at N = 1e9, p = 1e-3 -------------------------------------

def check_9(seed, floor):
    n, p = 10 ** 9, 1e-3
    ctx = AnalyticContext(p)
    m, k, ratio = pp_optimize(n, ctx)
    scale = normalizer(n, ctx)
    e = math.e
    # local grid around the optimum plus a coarse global one
    ms = np.unique(np.concatenate([
        np.round(m * np.linspace(0.9, 1.1, 41)), np.round(np.geomspace(0.25, 4.0, 33) * e * scale)]))
    ks = np.concatenate([k * np.linspace(0.8, 1.2, 41), np.geomspace(0.1, 10.0, 33) / p])
    grid_best = min(float(np.min(pp_ratio(n, ctx, int(mm), ks))) for mm in ms)
    checks = {
        "ratio": e * 0.95 <= ratio <= e * 1.05,
        "M": e * 0.9 <= m / scale <= e * 1.1,
        "Kp": 0.9 <= k * p <= 1.1,
        "grid": grid_best >= ratio - 1e-9,
    }
    detail = (f"ratio*={ratio:.5f} (e={e:.5f}), M*/Np|log p|={m / scale:.4f}, K*p={k * p:.4f}, "
              f"grid min={grid_best:.6f}; failing: {[c for c, v in checks.items() if not v] or 'none'}")
    return all(checks.values()), detail


# -- 10: regular-Poisson below e -----------------------------------------------------------

def check_10(seed, floor, design_samples=8, trials=512):
    n, p = 2 ** 14, 2.0 ** -5
    params = optimal_params(n, p, Family.REGULAR_POISSON)
    est = mc_family_expected_tests(params, p, design_samples, trials, seed)
    scale = normalizer(n, p)
    ratio, se = est.mean / scale, est.std_error / scale
    margin = (math.e - ratio) / se
    return margin > 3.0, f"ratio {ratio:.4f} +- {se:.4f}, (e - ratio)/se = {margin:.1f}"


# -- 11: entropy floor ----------------------------------------------------------------------

def check_11(seed, floor):
    if not floor.items:
        for c in (check_1, check_2, check_3):
            c(seed, floor)
    worst = math.inf
    bad = 0
    for _, n, p, mean_t in floor.items:
        info = -n * p * math.log2(p)
        worst = min(worst, mean_t - info)
        bad += mean_t < info
    return bad == 0, f"{len(floor.items)} exact E[T] values, {bad} below floor, min slack {worst:.4f}"


# -- 12: experiment determinism ---------------------------------------------------------------

def check_12(seed, floor):
    spec = ExperimentSpec(mode="beta_sweep", beta=0.25, n_grid=(256, 1024, 4096),
                          families=("rr6", "rp", "pp"), trials=400, design_samples=3, seed=seed)
    texts = []
    for workers in (1, 3):
        s = ExperimentSpec.from_dict({**spec.to_dict(), "workers": workers})
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "run.csv"
            path.write_text(render_csv(s, run_experiment(s)))
            texts.append(path.read_bytes())
    body = [t.split(b"\n", 1)[1] for t in texts]
    ok = body[0] == body[1] and texts[0].startswith(b"#")
    n_rows = body[0].count(b"\n") - 1
    return ok, f"{n_rows} rows, identical bodies across reruns (workers 1 vs 3): {body[0] == body[1]}"


CRITERIA = {
    1: ("B exact on girth-6 designs", check_1, 60.0),
    2: ("FKG gap on arbitrary designs", check_2, 60.0),
    3: ("hand-example regression", check_3, None),
    4: ("U(p) small-p trend", check_4, 1.0),
    5: ("c(p) expansion residual", check_5, 1.0),
    6: ("regular upper bound trend", check_6, 1.0),
    7: ("girth-6 generator at N=4096", check_7, 30.0),
    8: ("Poisson-Poisson U0 closed form", check_8, 300.0),
    9: ("Poisson-Poisson optimum", check_9, 60.0),
    10: ("regular-Poisson below e", check_10, 600.0),
    11: ("entropy floor", check_11, None),
    12: ("experiment determinism", check_12, None),
}


def run_criterion(number, seed=0, floor=None):
    name, func, budget = CRITERIA[number]
    floor = floor if floor is not None else _Floor()
    t0 = time.perf_counter()
    try:
        ok, detail = func(seed, floor)
    except Exception as exc:  # a crash is a failed criterion, not a crashed battery
        ok, detail = False, f"raised {type(exc).__name__}: {exc}"
    elapsed = time.perf_counter() - t0
    if budget is not None and elapsed > budget:
        ok = False
        detail += f"; over time budget {budget:.0f}s"
    return CriterionResult(number, name, bool(ok), detail, elapsed, budget)


def run_battery(only=None, seed=0, report=None):
    floor = _Floor()
    results = []
    for number in sorted(CRITERIA):
        if only and number not in only:
            continue
        r = run_criterion(number, seed or 0, floor)
        if report:
            report(r)
        results.append(r)
    return results
