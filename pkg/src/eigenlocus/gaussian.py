"""Two-class Gaussian data, the closed-form likelihood-ratio oracle and Monte Carlo rates.

Random streams come from numpy's PCG64 generator.  A dataset seed is fed to a
``SeedSequence`` which is spawned into one child stream per class, so class
draws are independent and reproducible regardless of the other class size.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

RNG_ALGORITHM = "PCG64 (numpy default_rng), SeedSequence.spawn per class"


@dataclass(frozen=True)
class GaussianClassSpec:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise ValueError(f"covariance shape {cov.shape} does not match mean of length {mean.size}")
        if not np.array_equal(cov, cov.T):
            raise ValueError("covariance must be symmetric")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise ValueError("covariance is not positive definite") from None
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "_chol", chol)

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def cholesky(self) -> np.ndarray:
        return self._chol

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal((n, self.dim))
        return self.mean + z @ self._chol.T

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "covariance": self.covariance.tolist()}


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    seed: int | list[int] | None
    n_per_class: tuple[int, int]

    def __len__(self):
        return len(self.y)


def _class_streams(seed) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2)]


def sample_dataset(spec1: GaussianClassSpec, spec2: GaussianClassSpec, n1: int, n2: int,
                   seed) -> Dataset:
    """``n1`` draws labelled +1 from ``spec1`` stacked over ``n2`` draws labelled -1."""
    if spec1.dim != spec2.dim:
        raise ValueError("class specs have different dimensions")
    if n1 < 0 or n2 < 0:
        raise ValueError("class sizes must be nonnegative")
    r1, r2 = _class_streams(seed)
    X = np.vstack([spec1.draw(n1, r1), spec2.draw(n2, r2)])
    y = np.concatenate([np.ones(n1), -np.ones(n2)])
    return Dataset(X=X, y=y, seed=seed, n_per_class=(n1, n2))


@dataclass
class BayesTerms:
    """Pieces of the oracle discriminant.

    ``d(x) = s1 . x - s2 . x + const`` where ``s1 = (P1 - P2) x`` is the
    quadratic projection and ``s2 = 2 (P1 m1 - P2 m2)`` the linear one,
    with ``P`` the precision matrices.
    """

    value: np.ndarray
    quadratic_projection: np.ndarray
    linear_projection: np.ndarray
    constant: float


def _precision_and_logdet(spec: GaussianClassSpec):
    L = spec.cholesky
    inv_L = np.linalg.inv(L)
    P = inv_L.T @ inv_L
    return P, 2.0 * float(np.sum(np.log(np.diag(L))))


def bayes_terms(spec1: GaussianClassSpec, spec2: GaussianClassSpec, X) -> BayesTerms:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != spec1.dim or spec1.dim != spec2.dim:
        raise ValueError("dimension mismatch")
    P1, ld1 = _precision_and_logdet(spec1)
    P2, ld2 = _precision_and_logdet(spec2)
    m1, m2 = spec1.mean, spec2.mean
    s1 = X @ (P1 - P2)
    s2 = 2.0 * (P1 @ m1 - P2 @ m2)
    const = float(m1 @ P1 @ m1 - m2 @ P2 @ m2 + ld1 - ld2)
    value = np.einsum("ij,ij->i", s1, X) - X @ s2 + const
    return BayesTerms(value=value, quadratic_projection=s1, linear_projection=s2,
                      constant=const)


def bayes_discriminant(spec1: GaussianClassSpec, spec2: GaussianClassSpec, x):
    """Twice the negative log-likelihood ratio ln p1(x) - ln p2(x).

    ``d(x) = (x-m1)'P1(x-m1) + ln|S1| - (x-m2)'P2(x-m2) - ln|S2|``;
    class +1 is chosen when ``d <= 0``.  Returns a scalar for a single point.
    """
    x = np.asarray(x, dtype=float)
    vals = bayes_terms(spec1, spec2, x).value
    return float(vals[0]) if x.ndim == 1 else vals


def bayes_classifier(spec1: GaussianClassSpec, spec2: GaussianClassSpec):
    def label(X):
        return np.where(bayes_terms(spec1, spec2, X).value <= 0, 1.0, -1.0)
    return label


def trace_bayes_boundary(spec1: GaussianClassSpec, spec2: GaussianClassSpec, bounds,
                         resolution: int = 256):
    """Zero level set of the oracle discriminant for 2-D specs."""
    from .model import trace_function
    if spec1.dim != 2 or spec2.dim != 2:
        raise ValueError("boundary tracing needs 2-D specs")
    return trace_function(lambda P: bayes_terms(spec1, spec2, P).value, bounds, resolution,
                          levels=(0.0,))[0]


def estimate_error_rate(classifier, spec1: GaussianClassSpec, spec2: GaussianClassSpec,
                        n_test: int, seed: int) -> tuple[float, float]:
    """Misclassification rate on a fresh balanced draw and its binomial std.

    ``classifier`` maps an (m, d) array to labels in {+1, -1}.
    """
    if n_test < 1000:
        raise ValueError("n_test must be at least 1000")
    n1 = n_test // 2
    test = sample_dataset(spec1, spec2, n1, n_test - n1, seed)
    pred = np.asarray(classifier(test.X), dtype=float)
    rate = float(np.mean(pred != test.y))
    return rate, math.sqrt(rate * (1.0 - rate) / n_test)


def extreme_fraction(model, n_train: int) -> float:
    if n_train <= 0:
        raise ValueError("n_train must be positive")
    return len(model.psi) / n_train


def save_csv(ds: Dataset, path) -> None:
    d = ds.X.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{k + 1}" for k in range(d)] + ["label"])
        for row, lab in zip(ds.X, ds.y):
            w.writerow([repr(float(v)) for v in row] + [int(lab)])


def load_csv(path) -> Dataset:
    """Read a ``features..., label`` CSV; a non-numeric first row is treated as a header."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ValueError(f"{path}: empty file")
    try:
        [float(v) for v in rows[0]]
    except ValueError:
        rows = rows[1:]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    width = len(rows[0])
    if width < 2 or any(len(r) != width for r in rows):
        raise ValueError(f"{path}: ragged or too few columns")
    data = np.array(rows, dtype=float)
    X, y = data[:, :-1], data[:, -1]
    n1 = int(np.sum(y > 0))
    return Dataset(X=X, y=y, seed=None, n_per_class=(n1, len(y) - n1))
