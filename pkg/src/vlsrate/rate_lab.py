"""Monte Carlo estimation of the asymptotic rate and the eta = 1/(1 - gamma) sweeps.

Each trial samples an instance and an initialization, runs VLS until the
relative spread of ``u`` drops below ``rate_tol`` (or ``max_iters``), and fits
the tail rate of the error sequence:

* converged runs use ``||u_t - u*||_2`` with ``u*`` the final consensus value;
  samples within ``ERROR_FLOOR_FACTOR * rate_tol`` (relative) of the end are
  dropped because ``u*`` itself is only known to about ``rate_tol``;
* runs cut off by ``max_iters`` have no usable ``u*`` and fall back to the
  distance of ``u_t`` from its ``pi_t``-weighted mean, which decays at the
  same asymptotic rate.

The fitted window is at least ``tail_window`` iterations and grows to the last
half of the usable error sequence, so slow chains get long windows.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .consensus_lift import fill_u_errors
from .errors import InsufficientTailError, InvalidInputError, NumericalError
from .graph_core import FAMILIES, generate_family
from .rank1_instance import check_b, sample_instance
from .spectral_analysis import eig_reversible, limit_matrix, theorem2_bound
from .vls_engine import StopRule, init_state, run

ERROR_FLOOR_FACTOR = 1e4
UNDERFLOW_FLOOR = 1e-300
CONVERGED_COST = 1e-18
STALL_ITERS = 1000
# slack for summation rounding when checking the recorded cost sequence
COST_REL_SLACK = 1e-9


@dataclass(frozen=True)
class ExperimentConfig:
    family: str
    n_values: list = field(default_factory=lambda: [8, 16, 32])
    b_values: list = field(default_factory=lambda: [0.3])
    trials: int = 50
    seed: int = 0
    max_iters: int = 10**6
    tail_window: int = 20
    rate_tol: float = 1e-12

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidInputError(f"unknown family {self.family!r}")
        if self.trials < 1:
            raise InvalidInputError("trials must be >= 1")
        if self.tail_window < 2:
            raise InvalidInputError("tail_window must be >= 2")
        if not self.n_values or not self.b_values:
            raise InvalidInputError("n_values and b_values must be non-empty")
        for b in self.b_values:
            check_b(b)
        if any(int(n) < 1 for n in self.n_values):
            raise InvalidInputError("n_values must be positive")
        if not 0 < self.rate_tol < 1:
            raise InvalidInputError("rate_tol must lie in (0, 1)")
        if self.max_iters < 1:
            raise InvalidInputError("max_iters must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise InvalidInputError(f"unknown config keys: {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise InvalidInputError(f"bad config: {exc}") from None

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"{path}: not valid JSON ({exc})") from None
        return cls.from_dict(d)


@dataclass(frozen=True)
class TrialRecord:
    family: str
    n: int
    b: float
    trial: int
    seed: int
    gamma_est: float
    eta: float
    rho_limit: float
    theorem2_bound: float
    delta: int
    iters: int
    final_cost: float
    converged: bool
    status: str
    estimator: str
    tail_start: int
    tail_end: int
    cost_monotone: bool
    bounds_ok: bool


RECORD_COLUMNS = [f.name for f in fields(TrialRecord)]


def usable_prefix(errors, floor: float) -> np.ndarray:
    """Leading run of ``errors`` strictly above ``floor``."""
    errors = np.asarray(errors, dtype=np.float64)
    below = np.flatnonzero(~(errors > max(floor, UNDERFLOW_FLOOR)))
    return errors if below.size == 0 else errors[: below[0]]


def estimate_gamma(errors, tail_window: int, floor: float = UNDERFLOW_FLOOR) -> float:
    """Geometric mean of ``e_{t+1} / e_t`` over the last ``tail_window`` ratios
    of the leading segment above ``floor``, clamped to ``[0, 1)``."""
    seg = usable_prefix(errors, floor)
    if tail_window < 1 or seg.size - 1 < tail_window:
        raise InsufficientTailError(
            f"{max(seg.size - 1, 0)} usable ratios, need {tail_window}"
        )
    log_ratio = math.log(seg[-1]) - math.log(seg[-1 - tail_window])
    gamma = math.exp(log_ratio / tail_window)
    return min(max(gamma, 0.0), math.nextafter(1.0, 0.0))


def trial_seed(cfg_seed: int, family: str, n: int, b: float, trial: int) -> np.random.SeedSequence:
    b_bits = int(np.float64(b).view(np.uint64))
    return np.random.SeedSequence([int(cfg_seed), FAMILIES.index(family), int(n), b_bits, int(trial)])


def _bounds_ok(ext: dict, b: float) -> bool:
    slack = 1e-12
    xy = (b**3 * (1 - slack), b**-3 * (1 + slack))
    uv = (b**2 * (1 - slack), b**-2 * (1 + slack))
    return (xy[0] <= min(ext["x_min"], ext["y_min"]) and max(ext["x_max"], ext["y_max"]) <= xy[1]
            and uv[0] <= min(ext["u_min"], ext["v_min"]) and max(ext["u_max"], ext["v_max"]) <= uv[1])


def cost_rounding_error(costs, values) -> np.ndarray:
    """Bound on the rounding error of each computed cost.

    Each residual ``x_i y_j - M_ij`` near the fit carries an absolute error of
    about ``delta = 4 u max|M|``; summing ``(r + delta)^2 - r^2`` over ``m``
    entries gives ``2 delta sqrt(m c) + m delta^2``.
    """
    values = np.asarray(values, dtype=np.float64)
    m = values.size
    delta = 4.0 * (np.finfo(np.float64).eps / 2) * float(np.abs(values).max())
    c = np.maximum(np.asarray(costs, dtype=np.float64), 0.0)
    return 2.0 * delta * np.sqrt(m * c) + m * delta * delta


def cost_is_monotone(costs, values) -> bool:
    """Non-increasing up to the rounding error of each evaluation."""
    costs = np.asarray(costs, dtype=np.float64)
    if costs.size < 2:
        return True
    err = cost_rounding_error(costs, values)
    rise = np.diff(costs) - COST_REL_SLACK * costs[:-1] - err[:-1] - err[1:]
    return bool(rise.max() <= 0.0)


def run_trial(family: str, n: int, b: float, trial: int, cfg: ExperimentConfig, graph=None) -> TrialRecord:
    ss = trial_seed(cfg.seed, family, n, b, trial)
    inst_seed, init_seed = (int(s) for s in ss.generate_state(2, dtype=np.uint64))
    graph = graph if graph is not None else generate_family(family, n)
    inst = sample_instance(graph, b, inst_seed)
    traj = run(init_state(inst, seed=init_seed), inst,
               StopRule(max_iters=cfg.max_iters, cost_tol=None, u_consensus_tol=cfg.rate_tol,
                        stall_iters=STALL_ITERS),
               stride=None)
    converged = traj.status in ("u_consensus_tol", "stalled") and traj.final_cost < CONVERGED_COST
    if traj.status in ("u_consensus_tol", "stalled"):
        errors = fill_u_errors(traj, inst)
        # u* is only as good as the final iterate's own spread
        resid = max(errors[-1], cfg.rate_tol * abs(traj.u_mean[-1]) * math.sqrt(n))
        floor = ERROR_FLOOR_FACTOR * resid
        estimator = "u_error"
    else:
        errors, floor, estimator = traj.disagreement, UNDERFLOW_FLOOR, "disagreement"

    seg = usable_prefix(errors, floor)
    window = min(max(cfg.tail_window, (seg.size - 1) // 2), seg.size - 1)
    status = traj.status
    try:
        gamma = estimate_gamma(seg, max(window, cfg.tail_window))
        tail = (seg.size - 1 - window, seg.size - 1)
    except InsufficientTailError:
        gamma, tail, status = 0.0, (0, max(seg.size - 1, 0)), "insufficient_tail"

    P, pi = limit_matrix(inst)
    try:
        w, _ = eig_reversible(P, pi)
        rho = 0.0 if n == 1 else max(float(w[1]), -float(w[-1]))
    except NumericalError as exc:
        rho, status = float("nan"), f"error:{type(exc).__name__}"
    bound = theorem2_bound(n, graph.max_degree, b)[0] if n >= 2 else float("nan")
    return TrialRecord(
        family=family, n=int(n), b=float(b), trial=int(trial), seed=inst_seed,
        gamma_est=gamma, eta=1.0 / (1.0 - gamma), rho_limit=rho, theorem2_bound=bound,
        delta=graph.max_degree,
        iters=traj.t_final, final_cost=traj.final_cost, converged=converged, status=status,
        estimator=estimator, tail_start=int(tail[0]), tail_end=int(tail[1]),
        cost_monotone=cost_is_monotone(traj.costs, inst.values), bounds_ok=_bounds_ok(traj.extrema, b),
    )


def _failed_record(family, n, b, trial, exc) -> TrialRecord:
    nan = float("nan")
    return TrialRecord(family, int(n), float(b), int(trial), -1, nan, nan, nan, nan, 0, 0, nan,
                       False, f"error:{type(exc).__name__}", "", 0, 0, False, False)


def _run_cell(args) -> list[TrialRecord]:
    cfg, n, b = args
    graph = generate_family(cfg.family, n)
    out = []
    for k in range(cfg.trials):
        try:
            out.append(run_trial(cfg.family, n, b, k, cfg, graph))
        except (NumericalError, AssertionError, FloatingPointError) as exc:
            out.append(_failed_record(cfg.family, n, b, k, exc))
    return out


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> list[TrialRecord]:
    # surface dimension errors before spending time on other cells
    for n in cfg.n_values:
        generate_family(cfg.family, n)
    cells = [(cfg, int(n), float(b)) for n in cfg.n_values for b in cfg.b_values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_cell, cells))
    else:
        chunks = [_run_cell(c) for c in cells]
    records = [r for chunk in chunks for r in chunk]
    records.sort(key=lambda r: (FAMILIES.index(r.family), r.n, r.b, r.trial))
    return records


def _fmt(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_COLUMNS)
    for r in records:
        d = asdict(r)
        w.writerow([_fmt(d[c]) for c in RECORD_COLUMNS])
    return buf.getvalue()


def parse_records(text: str) -> list[TrialRecord]:
    types = {f.name: f.type for f in fields(TrialRecord)}
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        try:
            kw = {}
            for k in RECORD_COLUMNS:
                typ = types[k]
                if typ == "bool":
                    kw[k] = row[k] == "1"
                elif typ == "int":
                    kw[k] = int(row[k])
                elif typ == "float":
                    kw[k] = float(row[k])
                else:
                    kw[k] = row[k]
        except (KeyError, ValueError) as exc:
            raise InvalidInputError(f"malformed record row: {exc}") from None
        out.append(TrialRecord(**kw))
    return out


def summarize(records) -> list[dict]:
    """Per ``(family, n, b)`` cell: max / mean / median eta and the spectral
    and closed-form counterparts ``1/(1 - rho)`` and ``1/(1 - bound)``."""
    cells: dict = {}
    for r in records:
        cells.setdefault((r.family, r.n, r.b), []).append(r)
    out = []
    for (family, n, b), rs in sorted(cells.items(), key=lambda kv: (FAMILIES.index(kv[0][0]),) + kv[0][1:]):
        eta = np.array([r.eta for r in rs if not math.isnan(r.eta)])
        if eta.size == 0:
            raise InvalidInputError(f"cell ({family}, n={n}, b={b}) has no usable trial")
        rho = np.array([r.rho_limit for r in rs if not math.isnan(r.rho_limit)])
        out.append({
            "family": family, "n": n, "b": b, "trials": len(rs),
            "converged": sum(r.converged for r in rs),
            "eta_max": float(eta.max()), "eta_mean": float(eta.mean()),
            "eta_median": float(np.median(eta)),
            "eta_spec": float((1.0 / (1.0 - rho)).max()) if rho.size else float("nan"),
            "eta_bound": (n * (n - 1) * rs[0].delta / b**12) if n >= 2 else float("nan"),
        })
    return out


FIGURES = ("eta_vs_n", "eta_vs_b")
FIGURE_COLUMNS = ["family", "x", "n", "b", "trials", "converged", "eta_max", "eta_mean",
                  "eta_median", "eta_spec", "eta_bound"]


def figure_rows(records, figure: str) -> list[dict]:
    if figure not in FIGURES:
        raise InvalidInputError(f"unknown figure {figure!r}; expected one of {FIGURES}")
    if not records:
        raise InvalidInputError("no records to aggregate")
    axis, other = ("n", "b") if figure == "eta_vs_n" else ("b", "n")
    rows = [dict(row, x=row[axis]) for row in summarize(records)]
    rows.sort(key=lambda r: (FAMILIES.index(r["family"]), r[other], r["x"]))
    return rows


def emit_figure_data(records, figure: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIGURE_COLUMNS)
    for row in figure_rows(records, figure):
        w.writerow([_fmt(row[c]) for c in FIGURE_COLUMNS])
    return buf.getvalue()


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    lx, ly = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    return float(np.polyfit(lx, ly, 1)[0])


def count_increases(values) -> int:
    v = np.asarray(values, float)
    return int(np.sum(np.diff(v) > 0))
