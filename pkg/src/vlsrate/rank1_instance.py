"""Rank-one completion problems ``M = alpha beta^T`` on a revealed graph.

Randomness comes from numpy's ``default_rng`` (PCG64), which is bit-for-bit
reproducible across platforms for a given 64-bit seed.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DisconnectedGraphError, InvalidInputError
from .graph_core import RevealedGraph, is_connected


def check_b(b: float) -> float:
    b = float(b)
    if not 0.0 < b < 1.0:
        raise InvalidInputError(f"b must lie in (0, 1), got {b}")
    return b


@dataclass(frozen=True, eq=False)
class RankOneInstance:
    alpha: np.ndarray
    beta: np.ndarray
    b: float
    graph: RevealedGraph
    seed: int | None = None
    # M_ij on graph.edges, in edge order; fixed at construction.
    values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        check_b(self.b)
        alpha = np.array(self.alpha, dtype=np.float64)
        beta = np.array(self.beta, dtype=np.float64)
        n = self.graph.n
        if alpha.shape != (n,) or beta.shape != (n,):
            raise InvalidInputError(f"alpha and beta must have length {n}")
        lo, hi = self.b, 1.0 / self.b
        if alpha.min() < lo or alpha.max() > hi or beta.min() < lo or beta.max() > hi:
            raise InvalidInputError(f"factors must lie in [b, 1/b] = [{lo}, {hi}]")
        alpha.flags.writeable = False
        beta.flags.writeable = False
        values = alpha[self.graph.rows] * beta[self.graph.cols]
        values.flags.writeable = False
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def revealed(self) -> dict[tuple[int, int], float]:
        return {e: float(v) for e, v in zip(self.graph.edges, self.values)}

    @property
    def matrix(self) -> np.ndarray:
        return np.outer(self.alpha, self.beta)

    def masked_matrix(self) -> np.ndarray:
        """Dense ``n x n`` matrix holding M_ij on revealed entries, 0 elsewhere."""
        Mm = np.zeros((self.n, self.n))
        Mm[self.graph.rows, self.graph.cols] = self.values
        return Mm


def sample_instance(graph: RevealedGraph, b: float, seed: int) -> RankOneInstance:
    """Draw alpha then beta i.i.d. uniform on ``[b, 1/b]``."""
    b = check_b(b)
    if not is_connected(graph):
        raise DisconnectedGraphError("instances require a connected revealed graph")
    rng = np.random.default_rng(seed)
    alpha = rng.uniform(b, 1.0 / b, graph.n)
    beta = rng.uniform(b, 1.0 / b, graph.n)
    return RankOneInstance(alpha, beta, b, graph, seed=seed)


def project_revealed(x, y, inst: RankOneInstance) -> float:
    """Least-squares cost over revealed entries."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    r = x[inst.graph.rows] * y[inst.graph.cols] - inst.values
    return float(r @ r)


def frobenius_error(x, y, inst: RankOneInstance) -> float:
    """``||x y^T - M||_F / n`` over every entry, revealed or not."""
    D = np.outer(x, y) - inst.matrix
    return float(np.linalg.norm(D) / inst.n)


def instance_to_dict(inst: RankOneInstance) -> dict:
    return {
        "n": inst.n,
        "b": inst.b,
        "seed": inst.seed,
        "family": inst.graph.family,
        "alpha": inst.alpha.tolist(),
        "beta": inst.beta.tolist(),
        "edges": [[i + 1, j + 1] for i, j in inst.graph.edges],
    }


def instance_from_dict(d: dict) -> RankOneInstance:
    try:
        graph = RevealedGraph(
            int(d["n"]),
            tuple((int(i) - 1, int(j) - 1) for i, j in d["edges"]),
            family=d.get("family", "custom"),
        )
        return RankOneInstance(d["alpha"], d["beta"], float(d["b"]), graph, seed=d.get("seed"))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidInputError):
            raise
        raise InvalidInputError(f"malformed instance: {exc}") from None


def save_instance(inst: RankOneInstance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst), indent=1) + "\n")


def load_instance(path) -> RankOneInstance:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: not valid JSON ({exc})") from None
    return instance_from_dict(d)
