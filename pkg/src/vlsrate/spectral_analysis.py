"""Spectrum of the limiting consensus matrix and the closed-form rate bounds.

For a reversible ``P`` with stationary ``pi`` the conjugate
``S = D^{1/2} P D^{-1/2}``, ``D = diag(pi)``, is symmetric, so the spectrum is
obtained with a cyclic Jacobi sweep on ``S``. Eigenvectors of ``P`` are
``D^{-1/2}`` times those of ``S`` and come out orthonormal in the
``pi``-weighted inner product.
"""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels
from .consensus_lift import build_matrices, detailed_balance_residual
from .errors import InvalidInputError, NoConvergenceError, NotReversibleError
from .graph_core import graph_stats
from .rank1_instance import RankOneInstance, check_b
from .vls_engine import VlsState

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


def limit_matrix(inst: RankOneInstance, scale: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """``(P, pi)`` at the fixed point ``x = scale * alpha``, ``y = beta / scale``.

    Every scale gives the same matrix; ``scale`` exists to check that.
    """
    if scale <= 0:
        raise InvalidInputError("scale must be positive")
    snap = build_matrices(VlsState(0, scale * inst.alpha, inst.beta / scale), inst)
    return snap.P, snap.pi


def eig_reversible(P: np.ndarray, pi: np.ndarray, tol: float = JACOBI_TOL,
                   max_sweeps: int = JACOBI_MAX_SWEEPS,
                   reversibility_tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and ``pi``-orthonormal eigenvectors (columns)."""
    P = np.asarray(P, dtype=np.float64)
    pi = np.asarray(pi, dtype=np.float64)
    res = detailed_balance_residual(P, pi)
    if res > reversibility_tol:
        raise NotReversibleError(f"detailed-balance residual {res:.3e} exceeds {reversibility_tol:.0e}")
    h = np.sqrt(pi)
    S = h[:, None] * P / h[None, :]
    S = 0.5 * (S + S.T)
    w, V, sweeps = _kernels.jacobi_eigh(S.copy(), tol, max_sweeps)
    if sweeps < 0:
        raise NoConvergenceError(f"Jacobi did not reach off-diagonal norm {tol:g} in {max_sweeps} sweeps")
    order = np.argsort(-w, kind="stable")
    Z = V[:, order] / h[:, None]
    return w[order], Z


def symmetrization_defect(P: np.ndarray, pi: np.ndarray) -> float:
    h = np.sqrt(pi)
    S = h[:, None] * P / h[None, :]
    return float(np.abs(S - S.T).max())


def dirichlet_form(P: np.ndarray, pi: np.ndarray, x: np.ndarray) -> float:
    """``sum_ij pi_i p_ij (x_i - x_j)^2``."""
    diff = x[:, None] - x[None, :]
    return float(np.sum(pi[:, None] * P * diff * diff))


def dirichlet_gap(P: np.ndarray, pi: np.ndarray, eig=None) -> tuple[float, float]:
    """Minimum of the Dirichlet form over ``pi``-mean-zero, ``pi``-unit vectors.

    Returns ``(gap, raw)``: ``raw`` is the form at the second eigenvector and
    ``gap = raw / 2``, which equals ``1 - lambda_2``.
    """
    if len(pi) < 2:
        return 1.0, 2.0
    _, Z = eig if eig is not None else eig_reversible(P, pi)
    z = Z[:, 1]
    z = z - pi @ z
    z = z / np.sqrt(pi @ (z * z))
    raw = dirichlet_form(P, pi, z)
    return raw / 2.0, raw


def theorem2_bound(n: int, delta: int, b: float) -> tuple[float, float]:
    """``(1 - b^12 / (n (n-1) delta), 1 - b^12 / n^3)``."""
    b = check_b(b)
    if n < 2 or delta < 1:
        raise InvalidInputError("need n >= 2 and delta >= 1")
    bound = 1.0 - b**12 / (n * (n - 1) * delta)
    weaker = 1.0 - b**12 / n**3
    if delta <= n:
        assert bound <= weaker
    return bound, weaker


def theorem2_gap(n: int, delta: int, b: float) -> float:
    """``b^12 / (n (n-1) delta)``, i.e. one minus the bound, without cancellation.

    For small ``b`` the bound itself rounds to 1.0 in double precision.
    """
    b = check_b(b)
    if n < 2 or delta < 1:
        raise InvalidInputError("need n >= 2 and delta >= 1")
    return b**12 / (n * (n - 1) * delta)


def gershgorin_floor(P: np.ndarray, delta: int, b: float) -> tuple[float, float]:
    """``(analytic, empirical) = (-1 + b^8 / delta, -1 + min_i P_ii)``."""
    b = check_b(b)
    analytic = -1.0 + b**8 / delta
    empirical = -1.0 + float(np.diag(P).min())
    assert empirical >= analytic, "diagonal of P below b^8 / delta"
    return analytic, empirical


@dataclass(frozen=True)
class SpectralReport:
    n: int
    family: str
    b: float
    delta: int
    diameter: int
    lambda2: float
    lambda_n: float
    rho: float
    dirichlet_gap: float
    dirichlet_raw: float
    theorem2_bound: float
    gershgorin_floor: float
    diag_min: float


REPORT_COLUMNS = ["n", "family", "b", "delta", "diameter", "lambda2", "lambda_n", "rho",
                  "dirichlet_gap", "theorem2_bound", "gershgorin_floor", "diag_min"]


def spectral_report(inst: RankOneInstance) -> SpectralReport:
    """Spectrum of the limit matrix with every bound. For ``n = 1`` there is
    no non-principal eigenvalue; ``lambda2``, ``lambda_n`` and ``rho`` are 0
    and the rate bound is undefined (nan)."""
    delta, diam = graph_stats(inst.graph)
    P, pi = limit_matrix(inst)
    w, Z = eig_reversible(P, pi)
    if inst.n == 1:
        lam2 = lam_n = 0.0
        bound = float("nan")
    else:
        lam2, lam_n = float(w[1]), float(w[-1])
        bound = theorem2_bound(inst.n, delta, inst.b)[0]
    gap, raw = dirichlet_gap(P, pi, eig=(w, Z))
    analytic, _ = gershgorin_floor(P, delta, inst.b)
    return SpectralReport(
        n=inst.n, family=inst.graph.family, b=inst.b, delta=delta, diameter=diam,
        lambda2=lam2, lambda_n=lam_n, rho=max(lam2, -lam_n),
        dirichlet_gap=gap, dirichlet_raw=raw, theorem2_bound=bound,
        gershgorin_floor=analytic, diag_min=float(np.diag(P).min()),
    )


def reports_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in reports:
        d = asdict(r)
        w.writerow([repr(d[c]) if isinstance(d[c], float) else d[c] for c in REPORT_COLUMNS])
    return buf.getvalue()
