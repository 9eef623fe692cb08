"""Reproducing kernels, label-signed Gram matrices and small eigen-utilities."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

FAMILIES = ("linear", "poly2", "gaussian")
GAMMA_BAND = (0.01, 0.1)
DEFAULT_GAMMA = 0.05
DEFAULT_C = 50.0


class ConvergenceError(RuntimeError):
    """An iterative routine hit its iteration cap before meeting tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus its (only) parameter.

    ``linear``  k(s, x) = s.x
    ``poly2``   k(s, x) = (s.x + 1)^2
    ``gaussian`` k(s, x) = exp(-gamma |s - x|^2)
    """

    family: str = "linear"
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        if self.family == "gaussian":
            if not self.gamma > 0:
                raise ValueError("gaussian kernel needs gamma > 0")
            lo, hi = GAMMA_BAND
            if not lo <= self.gamma <= hi:
                warnings.warn(
                    f"gamma={self.gamma} lies outside the recommended band [{lo}, {hi}]",
                    stacklevel=2,
                )

    def to_dict(self) -> dict:
        d = {"family": self.family}
        if self.family == "gaussian":
            d["gamma"] = self.gamma
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(family=d["family"], gamma=float(d.get("gamma", DEFAULT_GAMMA)))


def eval_kernel(spec: KernelSpec, s, x) -> float:
    s = np.asarray(s, dtype=float)
    x = np.asarray(x, dtype=float)
    if s.shape != x.shape or s.ndim != 1:
        raise ValueError(f"dimension mismatch: {s.shape} vs {x.shape}")
    return float(kernel_matrix(spec, s[None, :], x[None, :])[0, 0])


def kernel_matrix(spec: KernelSpec, A, B) -> np.ndarray:
    """Kernel values k(A[i], B[j]) for row-stacked point sets."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    if spec.family == "gaussian":
        sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
        # cancellation can push tiny distances negative
        np.maximum(sq, 0.0, out=sq)
        return np.exp(-spec.gamma * sq)
    inner = A @ B.T
    if spec.family == "poly2":
        return (inner + 1.0) ** 2
    return inner


def symmetric_kernel_matrix(spec: KernelSpec, X) -> np.ndarray:
    """k(X[i], X[j]) with exact symmetry and exact zero self-distance."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if spec.family == "gaussian":
        diff = X[:, None, :] - X[None, :, :] if len(X) <= 512 else None
        if diff is not None:
            K = np.exp(-spec.gamma * np.einsum("ijk,ijk->ij", diff, diff))
        else:
            K = kernel_matrix(spec, X, X)
            np.fill_diagonal(K, 1.0)
    else:
        K = kernel_matrix(spec, X, X)
    upper = np.triu(K)
    return upper + np.triu(K, 1).T


def default_epsilon(n: int, d: int) -> float:
    """Ridge term: 1/C with C = 50 when there are more samples than features, else 0."""
    return 1.0 / DEFAULT_C if n > d else 0.0


def epsilon_from_C(C: float) -> float:
    if C is None or math.isinf(C):
        return 0.0
    if C <= 0:
        raise ValueError("C must be positive")
    return 1.0 / C


@dataclass
class GramMatrix:
    """Q = eps I + D_y K D_y over a labelled training set."""

    entries: np.ndarray
    epsilon: float
    labels: np.ndarray
    kernel: KernelSpec = field(default_factory=KernelSpec)
    K: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def C(self) -> float:
        return math.inf if self.epsilon == 0 else 1.0 / self.epsilon


def check_labels(y) -> np.ndarray:
    y = np.asarray(y, dtype=float).ravel()
    if y.size == 0:
        raise ValueError("empty sample set")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be +1 or -1")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise ValueError("need at least one sample from each class")
    return y


def build_gram(X, y, spec: KernelSpec, epsilon: float) -> GramMatrix:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = check_labels(y)
    if X.shape[0] != y.size:
        raise ValueError(f"{X.shape[0]} samples but {y.size} labels")
    if X.shape[0] < 2:
        raise ValueError("need at least two samples")
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    K = symmetric_kernel_matrix(spec, X)
    Q = (y[:, None] * K) * y[None, :]
    Q[np.diag_indices_from(Q)] += epsilon
    return GramMatrix(entries=Q, epsilon=float(epsilon), labels=y, kernel=spec, K=K)


def principal_eigpair(q, tol: float = 1e-10, max_iter: int = 10_000):
    """Dominant eigenpair of a symmetric matrix by power iteration.

    Returns ``(lambda1, v)`` with ``|Qv - lambda1 v| <= tol * |lambda1|``.
    The start vector is drawn from a fixed-seed generator so the result is
    deterministic and almost surely not orthogonal to the dominant eigenvector.
    """
    Q = q.entries if isinstance(q, GramMatrix) else np.asarray(q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValueError("matrix must be square")
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = Q.shape[0]
    v = np.random.default_rng(0).standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    resid = math.inf
    for _ in range(max_iter):
        w = Q @ v
        lam = float(v @ w)
        resid = float(np.linalg.norm(w - lam * v))
        if resid <= tol * abs(lam) or (lam == 0.0 and resid == 0.0):
            return lam, v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0, v
        v = w / norm
    raise ConvergenceError("power iteration did not converge", resid / max(abs(lam), 1e-300))


def principal_axes_identity_check(q, x) -> float:
    """|x'Qx - sum_i lambda_i (v_i'x)^2| over the full eigendecomposition of Q."""
    Q = np.asarray(q, dtype=float)
    x = np.asarray(x, dtype=float).ravel()
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] != x.size:
        raise ValueError("shape mismatch")
    lam, V = np.linalg.eigh(Q)
    coords = V.T @ x
    return float(abs(x @ Q @ x - np.sum(lam * coords**2)))
