"""Residuals of the balance and energy identities of a trained model.

Every inner product between the sides ``kappa1 = sum_{y=+1} psi_i k_{x_i}`` and
``kappa2 = sum_{y=-1} psi_i k_{x_i}`` is taken through the kernel matrix of the
extreme points, so the checks hold for kernels with infinite feature maps.
Residuals are relative to ``|kappa|^2`` unless stated otherwise.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .kernels import ConvergenceError, GramMatrix, principal_eigpair
from .model import Eigenlocus

# fields checked against a tolerance on converged models; the rest are diagnostics
ASSERTED = ("dual_equilibrium", "eigenenergy_identity", "class1_energy", "class2_energy",
            "energy_split", "cosine_balance_1", "cosine_balance_2")


@dataclass
class SideProducts:
    k11: float
    k12: float
    k22: float
    sum1: float
    sum2: float
    target1: float
    target2: float

    @property
    def norm_sq(self) -> float:
        return self.k11 - 2.0 * self.k12 + self.k22


def side_products(m: Eigenlocus) -> SideProducts:
    pos = m.labels > 0
    neg = ~pos
    p1, p2 = m.psi[pos], m.psi[neg]
    K = m.K
    k11 = float(p1 @ K[np.ix_(pos, pos)] @ p1)
    k12 = float(p1 @ K[np.ix_(pos, neg)] @ p2)
    k22 = float(p2 @ K[np.ix_(neg, neg)] @ p2)
    t = m.psi * (1.0 - m.xi)
    return SideProducts(k11=k11, k12=k12, k22=k22, sum1=float(p1.sum()), sum2=float(p2.sum()),
                        target1=float(t[pos].sum()), target2=float(t[neg].sum()))


def _rel(value: float, scale: float) -> float:
    return abs(value) / scale if scale > 0 else abs(value)


def check_dual_equilibrium(m: Eigenlocus) -> float:
    """|sum psi over side 1 - sum psi over side 2| / sum psi."""
    pos = m.labels > 0
    return abs(float(m.psi[pos].sum() - m.psi[~pos].sum())) / float(m.psi.sum())


def check_primal_equilibrium(m: Eigenlocus) -> float:
    """|(sum_i k_{x_i}) . kappa| / (|kappa| sum_i |k_{x_i}|)."""
    K = m.K
    total = float(np.sum(K @ m.weights))
    norm = float(np.sqrt(max(m.weights @ K @ m.weights, 0.0)))
    lengths = float(np.sum(np.sqrt(np.maximum(np.diag(K), 0.0))))
    return _rel(total, norm * lengths)


def check_eigenenergy_identity(m: Eigenlocus) -> float:
    """|kappa|^2 against sum psi_i (1 - xi_i)."""
    sp = side_products(m)
    return _rel(sp.norm_sq - (sp.target1 + sp.target2), sp.norm_sq)


def check_class_energy_split(m: Eigenlocus) -> tuple[float, float]:
    """Per-side energies: kappa1 . kappa against sum_1 psi (1 - xi - kappa0) and
    |kappa2|^2 - kappa2 . kappa1 against sum_2 psi (1 - xi + kappa0)."""
    sp = side_products(m)
    r1 = (sp.k11 - sp.k12) - (sp.target1 - m.kappa0 * sp.sum1)
    r2 = (sp.k22 - sp.k12) - (sp.target2 + m.kappa0 * sp.sum2)
    return _rel(r1, sp.norm_sq), _rel(r2, sp.norm_sq)


def check_energy_split(m: Eigenlocus) -> float:
    """Both per-side energies must add back up to |kappa|^2."""
    sp = side_products(m)
    total = (sp.target1 - m.kappa0 * sp.sum1) + (sp.target2 + m.kappa0 * sp.sum2)
    return _rel(total - sp.norm_sq, sp.norm_sq)


def check_cosine_balance(m: Eigenlocus) -> tuple[float, float, float]:
    """Each side's energy corrected by delta(y) against half of |kappa|^2.

    Returns ``(balance1, balance2, side_norm_gap)`` with
    ``side_norm_gap = | |kappa1| - |kappa2| | / |kappa|``.
    """
    sp = side_products(m)
    half = 0.5 * sp.norm_sq
    dy = m.delta_y
    b1 = (sp.k11 - sp.k12 + dy * sp.sum1) - half
    b2 = (sp.k22 - sp.k12 - dy * sp.sum2) - half
    norm = np.sqrt(max(sp.norm_sq, 0.0))
    gap = abs(np.sqrt(max(sp.k11, 0.0)) - np.sqrt(max(sp.k22, 0.0)))
    return _rel(b1, sp.norm_sq), _rel(b2, sp.norm_sq), float(_rel(gap, norm))


def active_block(m: Eigenlocus) -> np.ndarray:
    """Q restricted to the extreme points, rebuilt from the model."""
    Q = (m.labels[:, None] * m.K) * m.labels[None, :]
    eps = 0.0 if np.isinf(m.C) else 1.0 / m.C
    return Q + eps * np.eye(m.l)


def dominant_eigenvalue(q) -> tuple[float, np.ndarray]:
    """Power iteration, falling back to a dense solve when the spectral gap is tiny."""
    Q = q.entries if isinstance(q, GramMatrix) else np.asarray(q, dtype=float)
    try:
        return principal_eigpair(Q)
    except ConvergenceError:
        lam, V = np.linalg.eigh(Q)
        return float(lam[-1]), V[:, -1]


def check_eigen_relation(m: Eigenlocus, gram: GramMatrix | None = None,
                         lambda1: float | None = None, v=None) -> float:
    """|psi - (Q psi) / lambda1| / |psi| over the extreme set (diagnostic only).

    ``lambda1`` defaults to the dominant eigenvalue of ``gram`` if given,
    else of the extreme-point block.  ``v`` is accepted for symmetry with
    the eigen-solver output and is not needed for the residual.
    """
    Q_AA = active_block(m)
    if lambda1 is None:
        lambda1, _ = dominant_eigenvalue(gram if gram is not None else Q_AA)
    r = m.psi - (Q_AA @ m.psi) / lambda1
    return float(np.linalg.norm(r) / np.linalg.norm(m.psi))


@dataclass
class EquilibriumReport:
    dual_equilibrium: float
    primal_equilibrium: float
    eigenenergy_identity: float
    class1_energy: float
    class2_energy: float
    energy_split: float
    cosine_balance_1: float
    cosine_balance_2: float
    eigen_relation: float
    side_norm_gap: float
    delta_y: float
    lambda1: float
    kappa_norm_sq: float
    c1: float
    c2: float

    def to_dict(self) -> dict:
        return asdict(self)

    def asserted(self) -> dict:
        return {k: getattr(self, k) for k in ASSERTED}

    def worst_asserted(self) -> float:
        return max(self.asserted().values())


def full_report(m: Eigenlocus, gram: GramMatrix | None = None) -> EquilibriumReport:
    sp = side_products(m)
    c1_res, c2_res = check_class_energy_split(m)
    b1, b2, gap = check_cosine_balance(m)
    lam1, _ = dominant_eigenvalue(gram if gram is not None else active_block(m))
    return EquilibriumReport(
        dual_equilibrium=check_dual_equilibrium(m),
        primal_equilibrium=check_primal_equilibrium(m),
        eigenenergy_identity=check_eigenenergy_identity(m),
        class1_energy=c1_res,
        class2_energy=c2_res,
        energy_split=check_energy_split(m),
        cosine_balance_1=b1,
        cosine_balance_2=b2,
        eigen_relation=check_eigen_relation(m, lambda1=lam1),
        side_norm_gap=gap,
        delta_y=m.delta_y,
        lambda1=float(lam1),
        kappa_norm_sq=sp.norm_sq,
        c1=-sp.k12,
        c2=-sp.k12,
    )
