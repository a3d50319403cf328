"""Vertex Least Squares: alternating scalar least squares on rows, then columns.

:func:`step` is the plain numpy reference. :func:`run` drives the compiled
loop in :mod:`vlsrate._kernels`, which performs the same arithmetic in the same
order and additionally records per-iteration diagnostics.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import InvalidInputError
from .rank1_instance import RankOneInstance, frobenius_error

STATUS_NAMES = {
    _kernels.COST_TOL: "cost_tol",
    _kernels.U_TOL: "u_consensus_tol",
    _kernels.MAX_ITERS: "max_iters",
    _kernels.STALLED: "stalled",
}


@dataclass(frozen=True, eq=False)
class VlsState:
    t: int
    x: np.ndarray
    y: np.ndarray


@dataclass(frozen=True)
class StopRule:
    """Stop when any active rule fires.

    ``u_consensus_tol`` is relative: stop once ``max(u) - min(u) <= tol * mean(u)``.
    ``stall_iters`` stops a run that has gone that many iterations without
    lowering its best cost, which is how a run that reached a floating-point
    fixed point ends.
    """

    max_iters: int = 10**6
    cost_tol: float | None = 1e-16
    u_consensus_tol: float | None = None
    stall_iters: int | None = None

    def __post_init__(self):
        if self.max_iters is None or self.max_iters < 0:
            raise InvalidInputError("max_iters must be a nonnegative integer")


@dataclass(eq=False)
class Trajectory:
    """Per-iteration diagnostics for ``t = 0..t_final`` plus sampled states.

    ``u_mean[t]`` and ``u_css[t]`` are the mean and centered sum of squares of
    ``u_t = x_t / alpha``; together they give ``||u_t - c 1||`` for any ``c``
    without storing every iterate. ``disagreement[t]`` is the distance of
    ``u_t`` from its ``pi_t``-weighted mean.
    """

    states: list
    costs: np.ndarray
    u_mean: np.ndarray
    u_css: np.ndarray
    disagreement: np.ndarray
    status: str
    stride: int | None
    extrema: dict
    u_errors: np.ndarray | None = field(default=None)

    @property
    def t_final(self) -> int:
        return self.states[-1].t

    @property
    def final(self) -> VlsState:
        return self.states[-1]

    @property
    def final_cost(self) -> float:
        return float(self.costs[-1])


def init_state(inst: RankOneInstance, seed: int | None = None, x0=None, y0=None) -> VlsState:
    """Either explicit ``(x0, y0)`` in ``[b, 1/b]`` or uniform draws from ``seed``."""
    lo, hi = inst.b, 1.0 / inst.b
    if x0 is None and y0 is None:
        if seed is None:
            raise InvalidInputError("give a seed or an explicit initialization")
        rng = np.random.default_rng(seed)
        x0 = rng.uniform(lo, hi, inst.n)
        y0 = rng.uniform(lo, hi, inst.n)
    elif x0 is None or y0 is None:
        raise InvalidInputError("explicit initialization needs both x0 and y0")
    x0 = np.array(x0, dtype=np.float64)
    y0 = np.array(y0, dtype=np.float64)
    if x0.shape != (inst.n,) or y0.shape != (inst.n,):
        raise InvalidInputError(f"initial vectors must have length {inst.n}")
    if min(x0.min(), y0.min()) < lo or max(x0.max(), y0.max()) > hi:
        raise InvalidInputError(f"initialization must lie in [b, 1/b] = [{lo}, {hi}]")
    return VlsState(0, x0, y0)


def step(state: VlsState, inst: RankOneInstance) -> VlsState:
    g = inst.graph
    rows, cols, vals = g.rows, g.cols, inst.values
    y = state.y
    den = np.bincount(rows, weights=y[cols] * y[cols], minlength=inst.n)
    assert np.all(den > 0), "row denominator vanished"
    x = np.bincount(rows, weights=vals * y[cols], minlength=inst.n) / den
    den = np.bincount(cols, weights=x[rows] * x[rows], minlength=inst.n)
    assert np.all(den > 0), "column denominator vanished"
    y = np.bincount(cols, weights=vals * x[rows], minlength=inst.n) / den
    return VlsState(state.t + 1, x, y)


def run(state: VlsState, inst: RankOneInstance, stop: StopRule | None = None,
        stride: int | None = 1, chunk: int = 1 << 16) -> Trajectory:
    """Iterate :func:`step` until a rule in ``stop`` fires.

    States are kept every ``stride`` iterations (``None`` keeps only the first
    and last); the final state is always kept.
    """
    stop = stop or StopRule()
    if stride is not None and stride < 1:
        raise InvalidInputError("stride must be >= 1 or None")
    step_len = stride if stride is not None else chunk
    g = inst.graph
    x = state.x.astype(np.float64, copy=True)
    y = state.y.astype(np.float64, copy=True)
    ext = np.array([np.inf, -np.inf] * 4)
    cost_tol = -1.0 if stop.cost_tol is None else float(stop.cost_tol)
    u_tol = -1.0 if stop.u_consensus_tol is None else float(stop.u_consensus_tol)
    stall = 0 if stop.stall_iters is None else int(stop.stall_iters)
    track = np.array([np.inf, 0.0])

    parts: list[list[np.ndarray]] = [[], [], [], []]
    states = [VlsState(state.t, x.copy(), y.copy())]
    t = state.t
    while True:
        bufs = [np.empty(step_len + 1) for _ in range(4)]
        k, status = _kernels.advance(
            g.rows, g.cols, inst.values, inst.alpha, inst.beta, x, y,
            t, step_len, stop.max_iters, cost_tol, u_tol, stall, *bufs, ext, track,
        )
        keep = k if status == _kernels.RUNNING else k + 1
        for p, buf in zip(parts, bufs):
            p.append(buf[:keep])
        t += k
        if status != _kernels.RUNNING:
            break
        if stride is not None and t % stride == 0:
            states.append(VlsState(t, x.copy(), y.copy()))
    if states[-1].t != t:
        states.append(VlsState(t, x.copy(), y.copy()))
    costs, u_mean, u_css, dis = (np.concatenate(p) for p in parts)
    extrema = dict(zip(("x_min", "x_max", "y_min", "y_max", "u_min", "u_max", "v_min", "v_max"),
                       ext.tolist()))
    return Trajectory(states, costs, u_mean, u_css, dis, STATUS_NAMES[status], stride, extrema)


def trajectory_csv(traj: Trajectory, inst: RankOneInstance) -> str:
    """Rows ``t, cost, frobenius_error, u_error`` at every sampled state."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "cost", "frobenius_error", "u_error"])
    t0 = traj.states[0].t
    for s in traj.states:
        k = s.t - t0
        u_err = "" if traj.u_errors is None else repr(float(traj.u_errors[k]))
        w.writerow([s.t, repr(float(traj.costs[k])), repr(frobenius_error(s.x, s.y, inst)), u_err])
    return buf.getvalue()
