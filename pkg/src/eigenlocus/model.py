"""The trained classifier: eigenaxis assembly, offset, discriminant, level sets, I/O.

A model keeps only its extreme points (samples with positive scale factor).
The discriminant is ``d(s) = sum_i y_i psi_i k(x_i, s) + kappa0`` with the
offset taken from the mean extreme-point kernel image and the mean target
``y_i (1 - xi_i)`` over the extreme set.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from skimage.measure import find_contours

from .dual import DualProblem, DualSolution, ExtremeSet, extract_extreme_set, solve_dual
from .kernels import (GramMatrix, KernelSpec, build_gram, check_labels, default_epsilon,
                      epsilon_from_C, kernel_matrix, symmetric_kernel_matrix)

MODEL_FORMAT = "eigenlocus-model"
MODEL_VERSION = 1


class ModelFormatError(ValueError):
    """A model file is malformed or has an unsupported version."""


@dataclass
class Eigenlocus:
    kernel: KernelSpec
    extreme_points: np.ndarray
    labels: np.ndarray
    psi: np.ndarray
    xi: np.ndarray
    C: float
    kappa0: float = 0.0
    _K: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.extreme_points = np.atleast_2d(np.asarray(self.extreme_points, dtype=float))
        self.labels = np.asarray(self.labels, dtype=float).ravel()
        self.psi = np.asarray(self.psi, dtype=float).ravel()
        self.xi = np.asarray(self.xi, dtype=float).ravel()
        l = len(self.psi)
        if not (self.extreme_points.shape[0] == len(self.labels) == len(self.xi) == l):
            raise ValueError("extreme points, labels, psi and xi differ in length")
        if l == 0 or np.any(self.psi <= 0):
            raise ValueError("scale factors must all be positive")
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise ValueError("labels must be +1 or -1")
        if self.l1 == 0 or self.l2 == 0:
            raise ValueError("extreme set is one-sided; decision boundary undefined")

    @property
    def dim(self) -> int:
        return self.extreme_points.shape[1]

    @property
    def l1(self) -> int:
        return int(np.sum(self.labels > 0))

    @property
    def l2(self) -> int:
        return int(np.sum(self.labels < 0))

    @property
    def l(self) -> int:
        return len(self.psi)

    @property
    def weights(self) -> np.ndarray:
        """Signed coefficients y_i psi_i of kappa in the kernel expansion."""
        return self.labels * self.psi

    @property
    def K(self) -> np.ndarray:
        """Kernel matrix over the extreme points (cached)."""
        if self._K is None:
            self._K = symmetric_kernel_matrix(self.kernel, self.extreme_points)
        return self._K

    @property
    def delta_y(self) -> float:
        """Mean target (1/l) sum y_i (1 - xi_i) over the extreme set."""
        return float(np.mean(self.labels * (1.0 - self.xi)))

    def kernel_images(self, S) -> np.ndarray:
        S = np.atleast_2d(np.asarray(S, dtype=float))
        if S.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: model has {self.dim}, got {S.shape[1]}")
        return kernel_matrix(self.kernel, S, self.extreme_points)


def assemble_eigenaxis(X, y, dual: DualSolution, extreme: ExtremeSet, kernel: KernelSpec,
                       C: float) -> Eigenlocus:
    """Keep the extreme points with their scale factors and fill in the offset."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if extreme.l1 == 0 or extreme.l2 == 0:
        raise ValueError("extreme set is one-sided; decision boundary undefined")
    idx = extreme.indices
    psi = np.asarray(dual.psi, dtype=float)[idx]
    xi = dual.xi(C)[idx]
    m = Eigenlocus(kernel=kernel, extreme_points=X[idx], labels=y[idx], psi=psi, xi=xi, C=C)
    m.kappa0 = compute_locus_offset(m)
    return m


def compute_locus_offset(m: Eigenlocus) -> float:
    """kappa0 = (1/l) sum y_i (1 - xi_i) - ((1/l) sum_i k_{x_i}) . kappa."""
    mean_image_dot_kappa = float(np.mean(m.K @ m.weights))
    return m.delta_y - mean_image_dot_kappa


def discriminant_value(m: Eigenlocus, s):
    """d(s) for one point (returns float) or a stack of points (returns array)."""
    s = np.asarray(s, dtype=float)
    vals = m.kernel_images(s) @ m.weights + m.kappa0
    return float(vals[0]) if s.ndim == 1 else vals


def discriminant_centered(m: Eigenlocus, s):
    """Same function written around the mean extreme-point image:
    ``(k_s - (1/l) sum k_{x_i}) . kappa + (1/l) sum y_i (1 - xi_i)``."""
    s = np.asarray(s, dtype=float)
    centre = float(np.mean(m.K @ m.weights))
    vals = (m.kernel_images(s) @ m.weights - centre) + m.delta_y
    return float(vals[0]) if s.ndim == 1 else vals


def classify(m: Eigenlocus, s):
    """+1 where d(s) >= 0 (ties go to +1), else -1."""
    d = discriminant_value(m, s)
    if np.ndim(d) == 0:
        return 1 if d >= 0 else -1
    return np.where(d >= 0, 1, -1)


@dataclass
class TrainingRun:
    model: Eigenlocus | None
    gram: GramMatrix
    solution: DualSolution
    extreme: ExtremeSet

    @property
    def converged(self) -> bool:
        return self.solution.converged


def fit(X, y, kernel: KernelSpec, C: float | None = None, tol: float = 1e-8,
        max_iter: int = 100_000, threshold: float = 1e-6) -> TrainingRun:
    """Full pipeline keeping the intermediate objects.

    ``C=None`` picks the default ridge for the sample/feature counts.
    ``model`` is None if the extreme set ends up one-sided.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = check_labels(y)
    eps = default_epsilon(*X.shape) if C is None else epsilon_from_C(C)
    gram = build_gram(X, y, kernel, eps)
    problem = DualProblem.from_gram(gram)
    sol = solve_dual(problem, tol=tol, max_iter=max_iter)
    ext = extract_extreme_set(sol, y, threshold)
    model = None
    if ext.l1 and ext.l2:
        model = assemble_eigenaxis(X, y, sol, ext, kernel, problem.C)
    return TrainingRun(model=model, gram=gram, solution=sol, extreme=ext)


def train(X, y, kernel: KernelSpec, C: float | None = None, **kw) -> Eigenlocus:
    run = fit(X, y, kernel, C, **kw)
    if run.model is None:
        raise ValueError("extreme set is one-sided; decision boundary undefined")
    return run.model


# level sets ------------------------------------------------------------------

@dataclass
class LevelSetTrace:
    level: float
    segments: list[np.ndarray]
    bounds: tuple[float, float, float, float]
    resolution: int
    tolerance: float

    @property
    def empty(self) -> bool:
        return len(self.segments) == 0

    @property
    def vertices(self) -> np.ndarray:
        if self.empty:
            return np.empty((0, 2))
        return np.vstack(self.segments)


def default_bounds(X, pad_std: float = 3.0) -> tuple[float, float, float, float]:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    lo, hi = X.min(0), X.max(0)
    sd = X.std(0) if len(X) > 1 else np.ones(X.shape[1])
    sd = np.where(sd > 0, sd, 1.0)
    return (float(lo[0] - pad_std * sd[0]), float(hi[0] + pad_std * sd[0]),
            float(lo[1] - pad_std * sd[1]), float(hi[1] + pad_std * sd[1]))


def grid_values(f, bounds, resolution: int):
    """Evaluate a vectorized ``f((m, 2) array) -> (m,)`` on a regular grid (x index first)."""
    x0, x1, y0, y1 = bounds
    xs = np.linspace(x0, x1, resolution)
    ys = np.linspace(y0, y1, resolution)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    # chunked so cross-kernels stay small for large extreme sets
    vals = np.concatenate([np.asarray(f(pts[k:k + 8192]), dtype=float).ravel()
                           for k in range(0, len(pts), 8192)])
    return xs, ys, vals.reshape(resolution, resolution)


def evaluate_grid(m: Eigenlocus, bounds, resolution: int):
    return grid_values(lambda P: discriminant_value(m, P), bounds, resolution)


def trace_function(f, bounds, resolution: int = 256,
                   levels=(-1.0, 0.0, 1.0)) -> list[LevelSetTrace]:
    """Marching-squares contours of a vectorized 2-D function at each level.

    ``tolerance`` is the largest change of f across one grid edge; a
    linearly interpolated vertex is never further than that from its level.
    """
    if resolution < 16:
        raise ValueError("resolution must be at least 16")
    bounds = tuple(float(b) for b in bounds)
    if len(bounds) != 4 or not (bounds[1] > bounds[0] and bounds[3] > bounds[2]):
        raise ValueError("bounds must be (xmin, xmax, ymin, ymax) with positive extent")
    xs, ys, Z = grid_values(f, bounds, resolution)
    tol = float(max(np.abs(np.diff(Z, axis=0)).max(), np.abs(np.diff(Z, axis=1)).max()))
    hx, hy = xs[1] - xs[0], ys[1] - ys[0]
    traces = []
    for level in levels:
        segs = [np.column_stack([xs[0] + c[:, 0] * hx, ys[0] + c[:, 1] * hy])
                for c in find_contours(Z, level)]
        traces.append(LevelSetTrace(level=float(level), segments=segs, bounds=bounds,
                                    resolution=resolution, tolerance=tol))
    return traces


def trace_level_sets(m: Eigenlocus, bounds=None, resolution: int = 256,
                     levels=(-1.0, 0.0, 1.0)) -> list[LevelSetTrace]:
    """Boundary and decision borders of a 2-D model (see ``trace_function``)."""
    if m.dim != 2:
        raise ValueError("level tracing needs a 2-D model")
    if bounds is None:
        bounds = default_bounds(m.extreme_points)
    return trace_function(lambda P: discriminant_value(m, P), bounds, resolution, levels)


# multiclass --------------------------------------------------------------------

@dataclass
class MulticlassModel:
    classes: np.ndarray
    models: list[Eigenlocus]

    @property
    def M(self) -> int:
        return len(self.classes)


def train_multiclass(X, labels, kernel: KernelSpec, C: float | None = None,
                     classes=None, **kw) -> MulticlassModel:
    """One model per class, trained with that class as +1 against all others."""
    labels = np.asarray(labels).ravel()
    found = np.unique(labels)
    classes = found if classes is None else np.asarray(classes)
    if len(classes) < 2:
        raise ValueError("need at least two classes")
    missing = [c for c in classes if c not in found]
    if missing:
        raise ValueError(f"classes without samples: {missing}")
    models = [train(X, np.where(labels == c, 1.0, -1.0), kernel, C, **kw) for c in classes]
    return MulticlassModel(classes=classes, models=models)


def classify_multiclass(mm: MulticlassModel, s):
    """Class with the largest discriminant; ties go to the lowest index."""
    s = np.asarray(s, dtype=float)
    D = np.column_stack([np.atleast_1d(discriminant_value(m, s)) for m in mm.models])
    pick = mm.classes[np.argmax(D, axis=1)]
    return pick[0] if s.ndim == 1 else pick


# serialization ------------------------------------------------------------------

def model_to_dict(m: Eigenlocus) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kernel": {"family": m.kernel.family, "gamma": m.kernel.gamma},
        "C": "inf" if math.isinf(m.C) else m.C,
        "kappa0": m.kappa0,
        "extreme_points": m.extreme_points.tolist(),
        "labels": m.labels.tolist(),
        "psi": m.psi.tolist(),
        "xi": m.xi.tolist(),
    }


def model_from_dict(d: dict) -> Eigenlocus:
    if not isinstance(d, dict) or d.get("format") != MODEL_FORMAT:
        raise ModelFormatError("not an eigenlocus model document")
    if d.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version {d.get('version')!r}")
    try:
        kern = d["kernel"]
        C = math.inf if d["C"] == "inf" else float(d["C"])
        return Eigenlocus(
            kernel=KernelSpec(family=kern["family"], gamma=float(kern["gamma"])),
            extreme_points=np.array(d["extreme_points"], dtype=float),
            labels=np.array(d["labels"], dtype=float),
            psi=np.array(d["psi"], dtype=float),
            xi=np.array(d["xi"], dtype=float),
            C=C,
            kappa0=float(d["kappa0"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model: {exc}") from exc


def save_model(m: Eigenlocus, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(m), fh)


def load_model(path) -> Eigenlocus:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})") from exc
    return model_from_dict(d)
