"""Consensus form of VLS: ``u = x / alpha``, ``v = y / beta`` and ``u_{t+1} = P_t u_t``.

Timing convention: ``P_t = B_t C_t`` is built from the pair ``(x_t, y_t)`` held
by state ``t``, where ``y_t`` is the column update computed from ``x_t``. Then
``C_t u_t = 1 / v_t`` and ``B_t (1 / v_t) = u_{t+1}`` exactly. The initial
``y_0`` is drawn independently of ``x_0``, so the identity is checked from
``t = 1`` on unless the initialization is itself consistent.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .rank1_instance import RankOneInstance
from .vls_engine import Trajectory, VlsState


@dataclass(frozen=True, eq=False)
class ConsensusSnapshot:
    t: int
    u: np.ndarray
    v: np.ndarray
    B: np.ndarray
    C: np.ndarray
    P: np.ndarray
    pi_hat: np.ndarray
    pi: np.ndarray

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "n": int(self.u.size),
            "u": self.u.tolist(),
            "v": self.v.tolist(),
            "pi": self.pi.tolist(),
            "P": self.P.ravel().tolist(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"


def lift(state: VlsState, inst: RankOneInstance) -> tuple[np.ndarray, np.ndarray]:
    return state.x / inst.alpha, state.y / inst.beta


def build_matrices(state: VlsState, inst: RankOneInstance) -> ConsensusSnapshot:
    A = inst.graph.adjacency
    y2 = state.y * state.y
    ax = inst.alpha * state.x
    B = A * y2
    B /= B.sum(axis=1, keepdims=True)
    # C is column node -> row node
    C = A.T * ax
    C /= C.sum(axis=1, keepdims=True)
    P = B @ C
    pi_hat = ax * (A @ y2)
    u, v = lift(state, inst)
    return ConsensusSnapshot(state.t, u, v, B, C, P, pi_hat, pi_hat / pi_hat.sum())


def transition_closed_form(state: VlsState, inst: RankOneInstance) -> np.ndarray:
    """Entrywise formula for ``P_t``, written without forming ``B_t`` or ``C_t``.

    ``p_ij = a_j x_j / r_i * sum_l y_l^2 A_il A_jl / s_l`` with
    ``r_i = sum_{k~i} y_k^2`` and ``s_l = sum_{k~l} a_k x_k``.
    """
    A = inst.graph.adjacency
    y2 = state.y ** 2
    ax = inst.alpha * state.x
    r = A @ y2
    s = A.T @ ax
    inner = np.einsum("il,jl,l->ij", A, A, y2 / s)
    return inner * ax[None, :] / r[:, None]


def detailed_balance_residual(P: np.ndarray, pi: np.ndarray) -> float:
    F = pi[:, None] * P
    return float(np.abs(F - F.T).max())


def stochasticity_residual(M: np.ndarray) -> float:
    return float(np.abs(M.sum(axis=1) - 1.0).max())


def verify_dynamics(traj: Trajectory, inst: RankOneInstance, start: int = 1) -> float:
    """Max over recorded ``t >= start`` of ``||u_{t+1} - P_t u_t||_inf``."""
    if traj.stride != 1:
        raise InvalidInputError("verify_dynamics needs a trajectory recorded with stride 1")
    worst = 0.0
    for cur, nxt in zip(traj.states[:-1], traj.states[1:]):
        if cur.t < start:
            continue
        snap = build_matrices(cur, inst)
        u_next, _ = lift(nxt, inst)
        worst = max(worst, float(np.abs(u_next - snap.P @ snap.u).max()))
    return worst


def consensus_value(traj: Trajectory) -> float:
    return float(traj.u_mean[-1])


def fill_u_errors(traj: Trajectory, inst: RankOneInstance, c: float | None = None) -> np.ndarray:
    """Set ``traj.u_errors[t] = ||u_t - c 1||_2`` for every iteration.

    ``c`` defaults to the mean of the final ``u``, i.e. the consensus value
    reached at the end of the run.
    """
    if c is None:
        c = consensus_value(traj)
    d = traj.u_mean - c
    traj.u_errors = np.sqrt(traj.u_css + inst.n * d * d)
    return traj.u_errors
