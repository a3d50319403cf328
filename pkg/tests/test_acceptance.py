"""Acceptance criteria, one test per criterion, each at its stated tolerance.

Every test appends one PASS/FAIL line to the terminal summary.
"""
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from vlsrate.consensus_lift import build_matrices, detailed_balance_residual, lift
from vlsrate.graph_core import FAMILIES, graph_stats
from vlsrate.rate_lab import (
    ExperimentConfig,
    cost_is_monotone,
    count_increases,
    figure_rows,
    loglog_slope,
    run_experiment,
)
from vlsrate.spectral_analysis import (
    dirichlet_form,
    dirichlet_gap,
    eig_reversible,
    gershgorin_floor,
    limit_matrix,
    theorem2_gap,
)
from vlsrate.vls_engine import StopRule, init_state, run

from conftest import ACCEPTANCE_LINES, make_instance

pytestmark = pytest.mark.slow

ETA_N = [8, 16, 32, 64]
ETA_B = [0.05, 0.1, 0.3, 0.6, 0.9]

# trajectories from criteria 1 and 6, checked again by criterion 8
_SEEN = []


def report(num, ok, detail):
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _bounds_hold(traj, b):
    e = traj.extrema
    s = 1e-12
    return (b**3 * (1 - s) <= min(e["x_min"], e["y_min"]) and max(e["x_max"], e["y_max"]) <= b**-3 * (1 + s)
            and b**2 * (1 - s) <= min(e["u_min"], e["v_min"]) and max(e["u_max"], e["v_max"]) <= b**-2 * (1 + s))


@pytest.fixture(scope="module")
def lift_runs():
    out = []
    t0 = time.perf_counter()
    for family in FAMILIES:
        for k in range(20):
            n = (4, 8, 16)[k % 3]
            b = (0.3, 0.5)[k % 2]
            inst = make_instance(family, n, b, 1000 + k)
            traj = run(init_state(inst, seed=2000 + k), inst, StopRule(max_iters=101, cost_tol=None))
            out.append((inst, traj))
    return out, t0


def test_criterion_1_lifting(lift_runs):
    runs, t0 = lift_runs
    worst = 0.0
    steps = 0
    for inst, traj in runs:
        # 100 steps t = 1..100; state 0 pairs x_0 with an independent y_0
        for cur, nxt in zip(traj.states[1:-1], traj.states[2:]):
            snap = build_matrices(cur, inst)
            u1, _ = lift(nxt, inst)
            worst = max(worst, float(np.abs(u1 - snap.P @ snap.u).max()))
            steps += 1
        _SEEN.append((traj, inst))
    elapsed = time.perf_counter() - t0
    report(1, worst <= 1e-10 and elapsed < 30 and steps == 100 * len(runs),
           f"max |u_(t+1) - P_t u_t| = {worst:.2e} over {len(runs)} runs x 100 steps, {elapsed:.1f}s")


def test_criterion_2_reversibility(lift_runs):
    runs, _ = lift_runs
    worst = 0.0
    for inst, traj in runs:
        for s in traj.states[1:-1]:
            snap = build_matrices(s, inst)
            worst = max(worst, detailed_balance_residual(snap.P, snap.pi))
    report(2, worst <= 1e-12, f"max |pi_i P_ij - pi_j P_ji| = {worst:.2e}")


def test_criterion_3_bound_chain():
    t0 = time.perf_counter()
    bvals = (0.1, 0.3, 0.5, 0.9)
    checked = 0
    fails = []
    rho_err = 0.0
    for family in FAMILIES:
        for n in (4, 8, 16, 32):
            for k in range(100):
                b = bvals[k % 4]
                inst = make_instance(family, n, b, 10_000 * n + k)
                delta, _ = graph_stats(inst.graph)
                P, pi = limit_matrix(inst)
                w, _ = eig_reversible(P, pi)
                lam2, lamn = w[1], w[-1]
                gap = theorem2_gap(n, delta, b)
                analytic, _ = gershgorin_floor(P, delta, b)
                rho = max(lam2, -lamn)
                # rho against the spectrum of P - 1 pi computed independently
                ref = np.abs(np.linalg.eigvals(P - np.outer(np.ones(n), pi))).max()
                rho_err = max(rho_err, abs(rho - ref))
                ok = (1 - lam2 > gap and lamn > analytic and np.diag(P).min() >= b**8 / delta
                      and abs(rho - ref) <= 1e-10)
                if not ok:
                    fails.append((family, n, b, k))
                checked += 1
    elapsed = time.perf_counter() - t0
    report(3, not fails and elapsed < 120,
           f"{checked} instances, {len(fails)} violations, max |rho - rho_ref| = {rho_err:.1e}, {elapsed:.1f}s")


def test_criterion_4_variational():
    rng = np.random.default_rng(4)
    worst = 0.0
    below = 0
    count = 0
    for family in FAMILIES:
        for n in (4, 8, 16):
            inst = make_instance(family, n, 0.3, 40 + n)
            P, pi = limit_matrix(inst)
            w, Z = eig_reversible(P, pi)
            _, raw = dirichlet_gap(P, pi, eig=(w, Z))
            worst = max(worst, abs(raw - 2 * (1 - w[1])))
            for _ in range(100):
                x = rng.normal(size=n)
                x -= pi @ x
                x /= math.sqrt(pi @ (x * x))
                if dirichlet_form(P, pi, x) < raw - 1e-12:
                    below += 1
            count += 1
    report(4, worst <= 1e-8 and below == 0,
           f"|raw - 2(1 - lambda2)| <= {worst:.1e} on {count} chains, {below} of {100 * count} random vectors below")


@pytest.fixture(scope="module")
def eta_records():
    t0 = time.perf_counter()
    recs = {}
    for family in FAMILIES:
        recs[family] = run_experiment(ExperimentConfig(family, ETA_N, [0.3], trials=50))
    recs["b_sweep"] = run_experiment(ExperimentConfig("line", [32], ETA_B, trials=50))
    return recs, time.perf_counter() - t0


def test_criterion_5_rate_vs_spectrum(eta_records):
    recs, _ = eta_records
    pool = [r for f in ("line", "grid2d", "grid3d") for r in recs[f] if r.n <= 32 and r.converged]
    pool += [r for r in recs["b_sweep"] if r.converged]
    long_tail = [r for r in pool if r.tail_start >= 10 * r.n**2]
    excess_long = max((r.gamma_est - r.rho_limit for r in long_tail), default=float("nan"))
    excess_all = max(r.gamma_est - r.rho_limit for r in pool)
    ok = bool(long_tail) and excess_long <= 0.01 and excess_all <= 0.05
    report(5, ok, f"{len(long_tail)} long-tail trials: max(gamma - rho) = {excess_long:.2e} (<= 0.01); "
                  f"all {len(pool)} converged: {excess_all:.2e} (<= 0.05)")


def test_criterion_6_complete_graph():
    worst_l2 = worst_p = worst_cost = 0.0
    for k in range(20):
        n = (3, 5, 8, 16)[k % 4]
        inst = make_instance("complete", n, (0.1, 0.3, 0.5, 0.9)[k % 4], 600 + k)
        P, pi = limit_matrix(inst)
        w, _ = eig_reversible(P, pi)
        worst_l2 = max(worst_l2, abs(w[1]))
        a2 = inst.alpha**2
        worst_p = max(worst_p, float(np.abs(P - a2[None, :] / a2.sum()).max()))
        traj = run(init_state(inst, seed=700 + k), inst, StopRule(max_iters=2, cost_tol=None))
        worst_cost = max(worst_cost, traj.final_cost)
        _SEEN.append((traj, inst))
    report(6, worst_l2 <= 1e-10 and worst_p <= 1e-12 and worst_cost < 1e-20,
           f"|lambda2| <= {worst_l2:.1e}, |P - alpha^2/sum| <= {worst_p:.1e}, cost after 2 iters <= {worst_cost:.1e}")


def test_criterion_7_figure_shape(eta_records):
    recs, elapsed = eta_records
    slopes = {}
    for family in FAMILIES:
        rows = figure_rows(recs[family], "eta_vs_n")
        slopes[family] = loglog_slope([r["n"] for r in rows], [r["eta_max"] for r in rows])
    brows = figure_rows(recs["b_sweep"], "eta_vs_b")
    eta_b = [r["eta_max"] for r in brows]
    inversions = count_increases(eta_b)
    ok = (1.5 <= slopes["line"] <= 2.5
          and all(slopes[f] < slopes["line"] for f in FAMILIES if f != "line")
          and inversions <= 1 and elapsed < 600)
    slope_txt = ", ".join(f"{f} {s:.2f}" for f, s in slopes.items())
    report(7, ok, f"slopes: {slope_txt}; eta_max vs b {[f'{e:.3g}' for e in eta_b]} "
                  f"({inversions} inversion); {elapsed:.0f}s")


def test_criterion_8_invariants(eta_records):
    recs, _ = eta_records
    trials = [r for rs in recs.values() for r in rs]
    bad_trials = [r for r in trials if not (r.cost_monotone and r.bounds_ok)]
    errors = [r for r in trials if r.status.startswith("error")]
    bad_runs = [1 for traj, inst in _SEEN
                if not (cost_is_monotone(traj.costs, inst.values) and _bounds_hold(traj, inst.b))]
    total = len(trials) + len(_SEEN)
    ok = not bad_trials and not errors and not bad_runs and len(_SEEN) == 120
    report(8, ok, f"{total} runs checked, {len(bad_trials) + len(bad_runs)} violations, {len(errors)} errors")


def _cli(*args, cwd):
    res = subprocess.run([sys.executable, "-m", "vlsrate.cli", *args], capture_output=True, cwd=cwd)
    assert res.returncode == 0, res.stderr.decode()
    return res.stdout


def test_criterion_9_determinism(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"family": "grid2d", "n_values": [4, 8], "b_values": [0.3, 0.5], "trials": 3, "seed": 11}')
    commands = [
        ("simulate", "--family", "line", "--n", "8", "--seed", "5", "--max-iters", "500"),
        ("simulate", "--family", "star", "--n", "6", "--max-iters", "200", "--snapshot-at", "50",
         "--snapshot-out", "snap.json"),
        ("spectrum", "--family", "grid3d", "--n", "8", "--b", "0.4", "--seed", "9"),
        ("bound", "--n", "32", "--delta", "32", "--b", "0.3"),
        ("experiment", "--config", str(cfg), "--out", "rec.csv"),
        ("experiment", "--config", str(cfg), "--out", "rec2.csv", "--workers", "2"),
        ("figure", "--records", "rec.csv", "--figure", "eta_vs_b"),
    ]
    diffs = []
    for cmd in commands:
        outs = []
        for rep in range(2):
            d = tmp_path / f"run{rep}"
            d.mkdir(exist_ok=True)
            if cmd[0] == "figure":
                (d / "rec.csv").write_bytes((tmp_path / "run0" / "rec.csv").read_bytes())
            stdout = _cli(*cmd, cwd=d)
            files = {p.name: p.read_bytes() for p in sorted(d.iterdir())}
            outs.append((stdout, files))
        if outs[0] != outs[1]:
            diffs.append(cmd[0])
    same_workers = (tmp_path / "run0" / "rec.csv").read_bytes() == (tmp_path / "run0" / "rec2.csv").read_bytes()
    report(9, not diffs and same_workers,
           f"{len(commands)} CLI commands rerun, {len(diffs)} differ; serial vs 2 workers identical: {same_workers}")
