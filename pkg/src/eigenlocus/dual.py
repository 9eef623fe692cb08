"""Wolfe-dual QP: maximize 1'psi - psi'Q psi / 2 subject to psi'y = 0, psi >= 0.

The solver is a pairwise (SMO) ascent with second-order working-set
selection.  Every pair update keeps ``psi'y`` fixed and never decreases the
objective.  Whenever the pairwise iteration reaches a checkpoint tolerance, or
a scheduled iteration count, the current support is handed to an active-set
Newton step that solves the bordered KKT system exactly; the polished point is kept only if it is
feasible, at least as good, and meets the requested tolerance.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve
from scipy.optimize import linprog

from .kernels import GramMatrix, check_labels

# floor on the pair curvature; lets the iteration move along flat directions
TAU = 1e-12


@dataclass
class DualProblem:
    gram: GramMatrix
    labels: np.ndarray
    C: float

    def __post_init__(self):
        self.labels = check_labels(self.labels)
        if not np.array_equal(self.labels, self.gram.labels):
            raise ValueError("labels do not match the Gram matrix")
        eps = self.gram.epsilon
        if math.isinf(self.C):
            if eps != 0:
                raise ValueError("C = inf requires epsilon = 0")
        elif not (self.C > 0 and eps > 0 and abs(self.C * eps - 1.0) <= 1e-12):
            raise ValueError(f"C={self.C} inconsistent with epsilon={eps}")

    @classmethod
    def from_gram(cls, gram: GramMatrix) -> "DualProblem":
        return cls(gram=gram, labels=gram.labels, C=gram.C)

    @property
    def Q(self) -> np.ndarray:
        return self.gram.entries

    def objective(self, psi) -> float:
        return float(psi.sum() - 0.5 * psi @ self.Q @ psi)


@dataclass
class DualSolution:
    psi: np.ndarray
    objective: float
    kkt_stationarity: float
    kkt_feasibility: float
    iterations: int
    converged: bool
    lambda0: float = 0.0
    unbounded: bool = False
    history: list[float] | None = field(default=None, repr=False)

    def xi(self, C: float) -> np.ndarray:
        """Slack recovered from stationarity in xi: psi / C, or zero when C is infinite."""
        if math.isinf(C):
            return np.zeros_like(self.psi)
        return self.psi / C


@dataclass
class ExtremeSet:
    indices: np.ndarray
    side1: np.ndarray
    side2: np.ndarray
    threshold: float

    @property
    def l1(self) -> int:
        return len(self.side1)

    @property
    def l2(self) -> int:
        return len(self.side2)

    @property
    def l(self) -> int:
        return len(self.indices)


def _scores(G, y):
    # -y_i G_i: equals the multiplier lambda0 on every active coordinate at optimum
    return -y * G


def _violation(psi, G, y) -> tuple[float, int, float, int]:
    score = _scores(G, y)
    up = (y > 0) | (psi > 0)
    low = (y < 0) | (psi > 0)
    s_up = np.where(up, score, -np.inf)
    s_low = np.where(low, score, np.inf)
    i = int(np.argmax(s_up))
    j = int(np.argmin(s_low))
    return float(s_up[i]), i, float(s_low[j]), j


def _gap(psi, G, y) -> float:
    m, _, M, _ = _violation(psi, G, y)
    return m - M


def _newton_polish(Q, y, psi, G, max_rounds=60):
    """Primal-dual active-set iteration warm-started from ``psi``.

    The support guess is ``{i : psi_i - mu_i / Q_ii > 0}`` where ``mu`` is the
    multiplier of ``psi_i >= 0``; each round solves the bordered KKT system on
    the guess.  Returns ``(psi, G)`` on a fixed point with ``psi >= 0`` and
    ``mu >= 0`` (up to rounding), else ``None``.
    """
    n = len(y)
    # a zero diagonal (kernel image of the origin) would otherwise divide by zero
    diag = np.maximum(np.diag(Q), TAU)
    active = psi > 0
    if not active.any():
        return None
    lam0 = float(np.mean(_scores(G, y)[active]))
    mu = G + lam0 * y
    prev = None
    for _ in range(max_rounds):
        free = (psi - mu / diag) > 0
        if not (free & (y > 0)).any() or not (free & (y < 0)).any():
            return None
        if prev is not None and np.array_equal(free, prev):
            break
        prev = free
        idx = np.flatnonzero(free)
        k = len(idx)
        A = np.empty((k + 1, k + 1))
        A[:k, :k] = Q[np.ix_(idx, idx)]
        A[:k, k] = y[idx]
        A[k, :k] = y[idx]
        A[k, k] = 0.0
        rhs = np.append(np.ones(k), 0.0)
        with warnings.catch_warnings():
            warnings.simplefilter("error", LinAlgWarning)
            try:
                lu = lu_factor(A, check_finite=False)
            except (LinAlgWarning, np.linalg.LinAlgError, ValueError):
                return None
        sol = lu_solve(lu, rhs, check_finite=False)
        # a few rounds of iterative refinement recover digits lost when psi is large
        for _ in range(3):
            sol += lu_solve(lu, rhs - A @ sol, check_finite=False)
        if not np.all(np.isfinite(sol)):
            return None
        psi = np.zeros(n)
        psi[idx] = sol[:k]
        lam0 = sol[k]
        G = Q @ psi - 1.0
        mu = G + lam0 * y
        mu[idx] = 0.0
    if np.any(psi < 0):
        return None
    return psi, G


def dual_unbounded(Q, y, rtol: float = 1e-10) -> bool:
    """True if some d >= 0 with y'd = 0, 1'd = 1 lies in the null space of Q.

    Along such a ray the objective grows without bound: this happens exactly
    when epsilon = 0 and the two classes cannot be separated in feature space.
    """
    lam, V = np.linalg.eigh(Q)
    top = max(float(lam[-1]), 0.0)
    if top == 0.0:
        U = np.empty((len(y), 0))
    else:
        U = V[:, lam > rtol * top]
    if U.shape[1] >= len(y):
        return False
    n = len(y)
    A_eq = np.vstack([U.T, y, np.ones(n)])
    b_eq = np.zeros(A_eq.shape[0])
    b_eq[-1] = 1.0
    res = linprog(np.zeros(n), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    return res.status == 0


def _threshold(Q, psi, tol):
    # Q psi - 1 cannot be evaluated more accurately than the rounding noise of
    # its largest partial sums, so the tolerance is floored at that level
    noise = 64.0 * np.finfo(float).eps * float(np.max(np.abs(Q) @ psi, initial=0.0))
    return max(tol, noise)


def solve_dual(p: DualProblem, tol: float = 1e-8, max_iter: int = 100_000,
               record: bool = False) -> DualSolution:
    if tol <= 0:
        raise ValueError("tol must be positive")
    Q = p.Q
    y = p.labels
    n = len(y)
    diag = np.diag(Q).copy()
    psi = np.zeros(n)
    G = -np.ones(n)
    obj = 0.0
    history = [obj] if record else None
    checkpoint = max(tol, 1e-1)
    # ill-conditioned Q can stall the pairwise ascent far from any checkpoint,
    # so the polish is also attempted on a geometric iteration schedule
    next_try = 50
    converged = False
    unbounded = False
    probe_ray = p.gram.epsilon == 0
    it = 0

    while True:
        m, i, M, _ = _violation(psi, G, y)
        gap = m - M
        scheduled = it >= next_try
        if gap <= checkpoint or scheduled:
            if scheduled:
                next_try *= 2
            polished = _newton_polish(Q, y, psi, G)
            if polished is not None:
                cand, Gc = polished
                cand_obj = float(cand.sum() - 0.5 * cand @ (Gc + 1.0))
                if _gap(cand, Gc, y) <= _threshold(Q, cand, tol) and cand_obj >= obj:
                    psi, G, obj = cand, Gc, cand_obj
                    if record:
                        history.append(obj)
                    converged = True
                    break
            if gap <= _threshold(Q, psi, tol):
                converged = True
                break
            if probe_ray:
                probe_ray = False
                if dual_unbounded(Q, y):
                    unbounded = True
                    break
            if gap <= checkpoint:
                checkpoint = max(tol, checkpoint * 0.1)
        if it >= max_iter:
            break
        it += 1

        score = _scores(G, y)
        low = (y < 0) | (psi > 0)
        b = m - score
        cand_mask = low & (b > 0)
        curv = diag[i] + diag - 2.0 * y[i] * y * Q[i]
        a = np.maximum(curv, TAU)
        gain = np.where(cand_mask, b * b / a, -np.inf)
        j = int(np.argmax(gain))
        step = b[j] / a[j]
        if y[i] < 0:
            step = min(step, psi[i])
        if y[j] > 0:
            step = min(step, psi[j])
        psi[i] += y[i] * step
        psi[j] -= y[j] * step
        if y[i] < 0 and psi[i] < 0:
            psi[i] = 0.0
        if y[j] > 0 and psi[j] < 0:
            psi[j] = 0.0
        G += (y[i] * step) * Q[i] - (y[j] * step) * Q[j]
        obj += step * b[j] - 0.5 * step * step * curv[j]
        if record:
            history.append(obj)

    psi = np.maximum(psi, 0.0)
    obj = p.objective(psi)
    stat, feas, lam0 = _stationarity(Q, y, psi)
    return DualSolution(psi=psi, objective=obj, kkt_stationarity=stat,
                        kkt_feasibility=feas, iterations=it, converged=converged,
                        lambda0=lam0, unbounded=unbounded, history=history)


def _stationarity(Q, y, psi):
    active = psi > 0
    feas = float(abs(psi @ y))
    if not active.any():
        return math.nan, feas, math.nan
    r = 1.0 - Q[active] @ psi
    lam0 = float(np.mean(y[active] * r))
    stat = float(np.max(np.abs(r - lam0 * y[active])))
    return stat, feas, lam0


def kkt_residuals(p: DualProblem, s: DualSolution) -> tuple[float, float, float]:
    """(stationarity, feasibility, complementarity) of a candidate dual point."""
    Q, y, psi = p.Q, p.labels, np.asarray(s.psi, dtype=float)
    if psi.shape != y.shape:
        raise ValueError("shape mismatch between psi and labels")
    active = psi > 0
    if not active.any():
        raise ValueError("empty active set")
    stat, feas, lam0 = _stationarity(Q, y, psi)
    inactive = ~active
    if inactive.any():
        Qpsi = Q[inactive] @ psi
        comp = float(np.max(np.maximum(0.0, 1.0 - lam0 * y[inactive] - Qpsi)))
    else:
        comp = 0.0
    return stat, feas, comp


def extract_extreme_set(s: DualSolution, labels, threshold: float = 1e-6) -> ExtremeSet:
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    psi = np.asarray(s.psi, dtype=float)
    y = np.asarray(labels, dtype=float)
    top = psi.max(initial=0.0)
    if top <= 0:
        warnings.warn("all scale factors vanish; extreme set is empty", stacklevel=2)
        empty = np.array([], dtype=int)
        return ExtremeSet(empty, empty, empty, threshold)
    idx = np.flatnonzero(psi > threshold * top)
    return ExtremeSet(indices=idx, side1=idx[y[idx] > 0], side2=idx[y[idx] < 0],
                      threshold=threshold)


def lagrangian_relation_check(p: DualProblem, s: DualSolution) -> float:
    """Distance between psi and the inverse-form solution on its active block.

    On the active set A the scale factors must equal
    ``Q_AA^{-1} (1 - lambda0 y_A)`` with ``lambda0`` fixed by ``y_A' psi_A = 0``.
    Returns the infinity-norm gap; ``inf`` (with a warning) if the block is singular.
    """
    if p.gram.epsilon <= 0:
        raise ValueError("relation needs an invertible Q (epsilon > 0)")
    psi = np.asarray(s.psi, dtype=float)
    A = np.flatnonzero(psi > 0)
    if A.size == 0:
        raise ValueError("empty active set")
    Q_AA = p.Q[np.ix_(A, A)]
    yA = p.labels[A]
    try:
        u = np.linalg.solve(Q_AA, np.ones(A.size))
        v = np.linalg.solve(Q_AA, yA)
    except np.linalg.LinAlgError:
        warnings.warn("active-set block is singular", stacklevel=2)
        return math.inf
    lam0 = float(yA @ u) / float(yA @ v)
    target = u - lam0 * v
    return float(np.max(np.abs(psi[A] - target)))
