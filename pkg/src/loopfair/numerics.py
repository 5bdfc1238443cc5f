"""Seeded randomness and the numerical kernels: normal CDF, logistic fitting.

All stochastic draws in the toolkit go through :class:`SeededRng`, a
counter-based (Philox) generator whose sub-streams are derived from an
index path, so the draw sequence for a given (seed, path) is identical on
every platform and independent of execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError

_SQRT2 = math.sqrt(2.0)


class SeededRng:
    """Deterministic random stream addressed by (seed, index path).

    Sub-streams are derived with :meth:`substream`; derivation is injective
    over index tuples (numpy SeedSequence spawn keys), so per-trial,
    per-user, per-year streams never collide and never depend on the order
    in which they are created.
    """

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        if not (0 <= int(seed) < 2**64):
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self.path = tuple(int(p) for p in path)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.Philox(ss))

    def substream(self, *indices: int) -> "SeededRng":
        """Derive an independent child stream for the given index path."""
        return SeededRng(self.seed, self.path + tuple(indices))

    def uniform(self, size=None):
        """Uniform draw(s) on [0, 1)."""
        return self._gen.random(size)

    def __repr__(self):  # pragma: no cover
        return f"SeededRng(seed={self.seed}, path={self.path})"


def std_normal_cdf(t: float) -> float:
    """CDF of the standard normal distribution, accurate to machine precision."""
    if not math.isfinite(t):
        raise DomainError(f"std_normal_cdf requires finite input, got {t}")
    return 0.5 * (1.0 + math.erf(t / _SQRT2))


def bernoulli(p: float, rng: SeededRng) -> int:
    """Draw 1 with probability p, else 0."""
    if not (0.0 <= p <= 1.0):
        raise DomainError(f"bernoulli probability must be in [0,1], got {p}")
    return int(rng.uniform() < p)


def categorical(weights, rng: SeededRng) -> int:
    """Draw an index with the given probabilities (must sum to 1)."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise DomainError("categorical weights must be a nonempty vector")
    if np.any(w < 0):
        raise DomainError(f"categorical weights must be nonnegative, got {w.tolist()}")
    total = float(w.sum())
    if abs(total - 1.0) > 1e-9:
        raise DomainError(f"categorical weights must sum to 1, got {total}")
    u = rng.uniform()
    cum = np.cumsum(w)
    cum[-1] = 1.0  # guard against round-off at the top
    return int(np.searchsorted(cum, u, side="right"))


def categorical_many(weights, n: int, rng: SeededRng) -> np.ndarray:
    """Vectorized categorical: n independent index draws from one stream."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or abs(float(w.sum()) - 1.0) > 1e-9:
        raise DomainError("categorical weights must be nonnegative and sum to 1")
    u = rng.uniform(n)
    cum = np.cumsum(w)
    cum[-1] = 1.0
    return np.searchsorted(cum, u, side="right").astype(np.int64)


@dataclass(frozen=True)
class LogitModel:
    """Fitted (or hand-set) logistic coefficients with optional intercept."""

    weights: np.ndarray
    intercept: float = 0.0
    l2_lambda: float = 0.0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if not np.all(np.isfinite(w)) or not math.isfinite(self.intercept):
            raise DomainError("LogitModel coefficients must be finite")
        if self.l2_lambda < 0:
            raise DomainError("l2_lambda must be nonnegative")


def logit_score(model: LogitModel, features) -> float:
    """Linear predictor: intercept + <weights, features>. No clipping."""
    f = np.asarray(features, dtype=float)
    if f.shape != model.weights.shape:
        raise DomainError(
            f"feature dimension {f.shape} does not match weights {model.weights.shape}"
        )
    return float(model.intercept + model.weights @ f)


def _sigmoid(z):
    # tanh form avoids overflow for large |z|
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def logit_gradient(weights_with_intercept, features, labels, l2_lambda=0.0):
    """Gradient of the ridge-penalized negative log-likelihood.

    The coefficient vector is [intercept, w_1, ..., w_d]; the intercept is
    not penalized. Exposed so the fit can be validated against finite
    differences.
    """
    X = np.column_stack([np.ones(len(features)), np.asarray(features, dtype=float)])
    y = np.asarray(labels, dtype=float)
    w = np.asarray(weights_with_intercept, dtype=float)
    mu = _sigmoid(X @ w)
    g = X.T @ (mu - y)
    g[1:] += l2_lambda * w[1:]
    return g


def fit_logit(features, labels, l2_lambda: float = 1e-4, fit_intercept: bool = True,
              tol: float = 1e-8, max_iter: int = 100) -> LogitModel:
    """L2-regularized logistic regression by damped Newton (IRLS).

    Stops when the gradient max-norm drops below `tol` or after `max_iter`
    Newton steps. The penalized objective is non-increasing across
    iterations (step halving enforces it).
    """
    X0 = np.asarray(features, dtype=float)
    if X0.ndim == 1:
        X0 = X0[:, None]
    y = np.asarray(labels, dtype=float)
    if X0.shape[0] < 1 or X0.shape[0] != y.shape[0]:
        raise DomainError("features and labels must be nonempty with equal length")
    if not (np.all(np.isfinite(X0)) and np.all(np.isfinite(y))):
        raise DomainError("non-finite entries in training data")
    if not np.all((y == 0) | (y == 1)):
        raise DomainError("labels must be 0/1")
    if l2_lambda < 0:
        raise DomainError("l2_lambda must be nonnegative")

    n, d = X0.shape
    if fit_intercept:
        X = np.column_stack([np.ones(n), X0])
    else:
        X = X0
    p = X.shape[1]
    pen = np.full(p, l2_lambda)
    if fit_intercept:
        pen[0] = 0.0

    w = np.zeros(p)

    def objective(w):
        z = X @ w
        core = float(np.sum(np.logaddexp(0.0, z) - y * z))
        return core + 0.5 * float(pen @ (w * w))

    obj = objective(w)
    for _ in range(max_iter):
        z = X @ w
        mu = _sigmoid(z)
        grad = X.T @ (mu - y) + pen * w
        if np.max(np.abs(grad)) <= tol:
            break
        s = mu * (1.0 - mu)
        H = (X.T * s) @ X + np.diag(pen)
        try:
            cond = np.linalg.cond(H)
            if not np.isfinite(cond) or cond > 1e12:
                raise NumericError(
                    f"Hessian ill-conditioned even after regularization "
                    f"(cond={cond:.3e}, lambda={l2_lambda})"
                )
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"singular Hessian: {exc}") from exc
        # damped step: halve until the penalized objective does not increase
        t = 1.0
        for _ in range(50):
            cand = w - t * step
            cand_obj = objective(cand)
            if cand_obj <= obj + 1e-12:
                break
            t *= 0.5
        w = w - t * step
        new_obj = objective(w)
        assert new_obj <= obj + 1e-9, "Newton objective increased"
        obj = new_obj

    if fit_intercept:
        return LogitModel(weights=w[1:], intercept=float(w[0]), l2_lambda=l2_lambda)
    return LogitModel(weights=w, intercept=0.0, l2_lambda=l2_lambda)
