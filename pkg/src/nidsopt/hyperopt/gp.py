"""Bayesian optimization with a Gaussian-process surrogate and expected
improvement."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..data import DataError
from .random_search import distinct_samples
from .space import SearchSpace
from .trace import Evaluator, OptimizationTrace

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_erf = np.vectorize(math.erf, otypes=[float])

# finite spaces up to this size may be enumerated to find unevaluated points
_ENUMERABLE = 100_000
# candidate length scales: median heuristic times 2**k for these k
_LS_GRID = np.arange(1.0, -12.5, -0.5)
# further halvings tried when no grid scale interpolates
_MAX_SHRINK = 40


def norm_cdf(z):
    return 0.5 * (1.0 + _erf(np.asarray(z, dtype=np.float64) / _SQRT2))


def norm_pdf(z):
    z = np.asarray(z, dtype=np.float64)
    return _INV_SQRT_2PI * np.exp(-0.5 * z * z)


def median_length_scale(X: np.ndarray) -> float:
    """Median pairwise distance between distinct observed points (1.0 if none)."""
    if len(X) < 2:
        return 1.0
    diff = X[:, None, :] - X[None, :, :]
    d = np.sqrt((diff ** 2).sum(axis=-1))[np.triu_indices(len(X), k=1)]
    d = d[d > 0]
    return float(np.median(d)) if len(d) else 1.0


def _sq_dist(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=-1)


def se_kernel(A: np.ndarray, B: np.ndarray, length_scale: float) -> np.ndarray:
    return np.exp(-0.5 * _sq_dist(A, B) / length_scale ** 2)


@dataclass(frozen=True)
class GpState:
    """Fitted GP on standardized scores.

    Squared-exponential kernel with unit signal variance; ``jitter`` is the
    diagonal noise that made the kernel matrix factorizable.

    Without an explicit ``length_scale`` one is chosen from a geometric grid
    around the median heuristic by maximum marginal likelihood (signal
    variance profiled out). Fits whose jitter pulls the posterior mean more
    than ``interp_tol`` off an observed score are skipped, and fits whose
    mean leaves ``[min - 3 sd, max + 3 sd]`` of two neighbouring scores at
    their midpoint lose to any that do not. The median heuristic alone is
    overconfident: its mean can swing far outside neighbouring observations
    while sigma stays tiny.
    """

    X: np.ndarray
    y: np.ndarray
    length_scale: float
    jitter: float
    y_mean: float
    y_std: float
    chol: np.ndarray | None
    alpha: np.ndarray | None

    @classmethod
    def fit(cls, X, y, length_scale: float | None = None, jitter: float = 1e-6,
            max_jitter: float = 1e-2, interp_tol: float = 1e-4) -> "GpState":
        X = np.asarray(X, dtype=np.float64).reshape(len(y), -1) if len(y) else np.zeros((0, 1))
        y = np.asarray(y, dtype=np.float64)
        if len(y) == 0:
            return cls(X, y, length_scale or 1.0, jitter, 0.0, 1.0, None, None)
        if length_scale is not None:
            return cls._factor(X, y, length_scale, jitter, max_jitter)
        base = median_length_scale(X)
        sq = _sq_dist(X, X)
        best, error, fallback = None, None, None
        scales = base * 2.0 ** _LS_GRID
        pairs = gabriel_pairs(sq)
        chosen = _batched_choice(X, y, sq, pairs, scales, jitter, interp_tol)
        if chosen is not None:
            best = cls._factor(X, y, chosen, jitter, max_jitter, sq)
        else:
            best_key = (False, -np.inf)
            for ls in scales:
                try:
                    state = cls._factor(X, y, ls, jitter, max_jitter, sq)
                except DataError as exc:
                    error = exc
                    continue
                if fallback is None or state.interpolation_error() < fallback.interpolation_error():
                    fallback = state
                if state.interpolation_error() > interp_tol:
                    continue
                key = (state.midpoints_bounded(pairs), state.log_marginal_likelihood())
                if key > best_key:
                    best, best_key = state, key
        ls = base * 2.0 ** _LS_GRID[-1]
        for _ in range(_MAX_SHRINK if best is None else 0):
            ls /= 2.0
            try:
                state = cls._factor(X, y, ls, jitter, max_jitter, sq)
            except DataError as exc:
                error = exc
                continue
            if fallback is None or state.interpolation_error() < fallback.interpolation_error():
                fallback = state
            if state.interpolation_error() <= interp_tol:
                best = state
                break
        if best is None:
            best = fallback
        if best is None:
            raise error
        return best

    @classmethod
    def _factor(cls, X, y, ls, jitter, max_jitter, sq=None) -> "GpState":
        mean = float(y.mean())
        std = float(y.std())
        if std == 0:
            std = 1.0
        ys = (y - mean) / std
        K = np.exp(-0.5 * (_sq_dist(X, X) if sq is None else sq) / ls ** 2)
        j = jitter
        while True:
            try:
                L = np.linalg.cholesky(K + j * np.eye(len(X)))
                break
            except np.linalg.LinAlgError:
                j *= 10.0
                if j > max_jitter * (1 + 1e-9):
                    raise DataError("GP kernel matrix not positive definite after jitter escalation")
        alpha = np.linalg.solve(L.T, np.linalg.solve(L, ys))
        return cls(X, y, ls, j, mean, std, L, alpha)

    def log_marginal_likelihood(self) -> float:
        """Log evidence of the standardized scores with the signal variance
        at its maximum-likelihood value, constants dropped."""
        if self.alpha is None:
            return 0.0
        n = len(self.y)
        ys = (self.y - self.y_mean) / self.y_std
        s2 = max(float(ys @ self.alpha) / n, 1e-300)
        return -0.5 * n * math.log(s2) - float(np.log(np.diag(self.chol)).sum())

    def midpoints_bounded(self, pairs) -> bool:
        """Whether the mean at each pair's midpoint stays within the pair's
        score range widened by three posterior standard deviations."""
        if self.alpha is None or len(pairs) == 0:
            return True
        i, j = pairs[:, 0], pairs[:, 1]
        mu, sd = gp_posterior(self, (self.X[i] + self.X[j]) / 2)
        lo = np.minimum(self.y[i], self.y[j]) - 3 * sd
        hi = np.maximum(self.y[i], self.y[j]) + 3 * sd
        slack = 1e-9 * self.y_std
        return bool(np.all((mu >= lo - slack) & (mu <= hi + slack)))

    def interpolation_error(self) -> float:
        """Largest ``|mu - y|`` over the observations.

        ``(K + jI) alpha = y_s`` gives ``K alpha - y_s = -j alpha`` exactly.
        """
        if self.alpha is None:
            return 0.0
        return float(self.y_std * self.jitter * np.abs(self.alpha).max())


def gabriel_pairs(sq: np.ndarray) -> np.ndarray:
    """Index pairs ``(i, j)``, ``i < j``, with no third point inside the ball
    whose diameter is the segment between them; in 1-D these are the adjacent
    points. ``sq`` holds squared pairwise distances."""
    n = len(sq)
    if n < 2:
        return np.zeros((0, 2), dtype=np.int64)
    inside = sq[:, None, :] + sq[None, :, :] <= sq[:, :, None]
    idx = np.arange(n)
    inside &= (idx[None, None, :] != idx[:, None, None]) & (idx[None, None, :] != idx[None, :, None])
    i, j = np.nonzero(~inside.any(axis=2))
    keep = i < j
    return np.stack([i[keep], j[keep]], axis=1)


def _batched_choice(X, y, sq, pairs, scales, jitter, interp_tol):
    """Length scale with the best profiled marginal likelihood, preferring
    scales whose midpoint means stay bounded (see ``midpoints_bounded``).

    Returns None when some grid matrix needs more than the base jitter or
    no scale meets ``interp_tol``; the caller then fits one scale at a time.
    """
    std = float(y.std()) or 1.0
    ys = (y - y.mean()) / std
    n = len(y)
    K = np.exp(-0.5 * sq[None] / scales[:, None, None] ** 2) + jitter * np.eye(n)
    try:
        L = np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        return None
    alpha = np.linalg.solve(K, np.broadcast_to(ys, (len(scales), n))[..., None])[..., 0]
    ok = std * jitter * np.abs(alpha).max(axis=1) <= interp_tol
    if not ok.any():
        return None
    s2 = np.maximum((alpha @ ys) / n, 1e-300)
    logdet = np.log(np.diagonal(L, axis1=1, axis2=2)).sum(axis=1)
    lml = np.where(ok, -0.5 * n * np.log(s2) - logdet, -np.inf)
    order = [int(k) for k in np.argsort(-lml, kind="stable") if ok[k]]
    if len(pairs):
        i, j = pairs[:, 0], pairs[:, 1]
        sq_mid = _sq_dist(X, (X[i] + X[j]) / 2)
        lo = np.minimum(ys[i], ys[j])
        hi = np.maximum(ys[i], ys[j])
        for k in order:
            Ks = np.exp(-0.5 * sq_mid / scales[k] ** 2)
            mu = Ks.T @ alpha[k]
            v = np.linalg.solve(L[k], Ks)
            sd = np.sqrt(np.clip(1.0 - (v * v).sum(axis=0), 0.0, None))
            if np.all((mu >= lo - 3 * sd - 1e-9) & (mu <= hi + 3 * sd + 1e-9)):
                return float(scales[k])
    return float(scales[order[0]])


def gp_posterior(state: GpState, query) -> tuple:
    """Posterior mean and standard deviation in the original score units.

    ``query`` may be a single encoded candidate or a matrix of them; the
    return values are scalars or arrays accordingly.
    """
    Q = np.asarray(query, dtype=np.float64)
    single = Q.ndim == 1
    Q = Q.reshape(1, -1) if single else Q
    if state.chol is None:
        mu = np.zeros(len(Q))
        sd = np.ones(len(Q))
    else:
        Ks = se_kernel(state.X, Q, state.length_scale)
        mu_s = Ks.T @ state.alpha
        v = np.linalg.solve(state.chol, Ks)
        var = np.clip(1.0 - (v * v).sum(axis=0), 0.0, None)
        mu = state.y_mean + state.y_std * mu_s
        sd = state.y_std * np.sqrt(var)
    if single:
        return float(mu[0]), float(sd[0])
    return mu, sd


def expected_improvement(mu, sigma, best_score):
    """Closed-form EI for maximization: improvement is ``mu - best_score``."""
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(sigma < 0):
        raise DataError("sigma must be non-negative")
    imp = mu - best_score
    safe = np.where(sigma > 0, sigma, 1.0)
    # tiny sigma sends z to +-inf, where cdf/pdf saturate correctly
    with np.errstate(over="ignore"):
        z = imp / safe
        ei = np.where(sigma > 0, imp * norm_cdf(z) + sigma * norm_pdf(z), np.maximum(imp, 0.0))
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei


def unevaluated_pool(space: SearchSpace, ev: Evaluator, pool: list) -> list:
    """Drop already-evaluated candidates; on a small finite space fall back to
    enumerating the unevaluated remainder when the pool is spent."""
    fresh = [c for c in pool if not ev.seen(c)]
    if fresh or ev.exhausted_space:
        return fresh or pool
    if space.size <= _ENUMERABLE:
        return [c for c in space.enumerate() if not ev.seen(c)]
    return pool


def _dedupe(space, pool):
    seen, out = set(), []
    for c in pool:
        k = space.key(c)
        if k not in seen:
            seen.add(k)
            out.append(c)
    return out


def propose_gp(space: SearchSpace, state: GpState, pool: list, best_score: float) -> dict:
    """Pool member with the highest EI (first one on ties)."""
    Q = np.stack([space.normalized(c) for c in pool])
    mu, sd = gp_posterior(state, Q)
    ei = expected_improvement(mu, sd, best_score)
    return pool[int(np.argmax(ei))]


def bo_gp_optimize(space: SearchSpace, objective, budget: int, seed: int = 0,
                   init_points: int = 5, pool_size: int = 256) -> OptimizationTrace:
    """GP-EI loop: random initial design, then refit and maximize EI over a
    random candidate pool each step.

    Already-evaluated candidates are removed from the pool so that budget is
    not spent on memo hits while unexplored candidates remain.
    """
    init_points = min(init_points, space.size)
    if budget < init_points:
        raise DataError(f"budget {budget} below the initial design size {init_points}")
    ev = Evaluator(space, objective, budget)
    rng = np.random.default_rng(seed)
    for c in distinct_samples(space, rng, init_points):
        ev(c)
    while ev.remaining > 0:
        observed = list(ev.memo.items())
        X = np.stack([space.normalized(dict(zip(space.names, k))) for k, _ in observed])
        y = np.array([s for _, s in observed])
        state = GpState.fit(X, y)
        pool = _dedupe(space, space.sample_many(rng, pool_size))
        pool = unevaluated_pool(space, ev, pool)
        ev(propose_gp(space, state, pool, float(y.max())))
    return ev.trace("bo-gp", seed)
