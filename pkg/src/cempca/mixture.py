"""Gaussian mixture machinery: densities, E/C/M steps, EM, CEM, and K-means."""

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.special import logsumexp

from .errors import (EmptyClusterError, InvalidInputError, NumericalError,
                     SingularMatrixError)

COV_MODELS = ("full", "diagonal", "spherical", "spherical-tied")

_LOG_2PI = float(np.log(2.0 * np.pi))
_COV_EPS = 1e-6


@dataclass
class MixtureParams:
    """Weights, means, and per-cluster covariances of a Gaussian mixture."""

    weights: np.ndarray          # (g,)
    means: np.ndarray            # (g, p)
    covariances: np.ndarray      # (g, p, p), each SPD after regularization
    model: str = "full"

    @property
    def g(self):
        return self.weights.shape[0]

    @property
    def p(self):
        return self.means.shape[1]


@dataclass
class Partition:
    """Hard assignment of n rows to g clusters."""

    assignments: np.ndarray      # (n,) ints in [0, g)
    g: int

    @property
    def n(self):
        return self.assignments.shape[0]

    def one_hot(self):
        Z = np.zeros((self.n, self.g))
        Z[np.arange(self.n), self.assignments] = 1.0
        return Z

    def counts(self):
        return np.bincount(self.assignments, minlength=self.g)


@dataclass
class FitResult:
    """Return envelope shared by all fitting routines.

    objective_trace holds the per-iteration objective of the method that
    produced it: within-cluster sum of squares for K-means, log-likelihood
    for the mixture fits, and the three-term joint objective for the
    alternating embedding fit (non-increasing there).
    """

    partition: Partition
    params: Optional[MixtureParams]
    objective_trace: list
    iterations: int
    seed: int
    restart_index: int
    wall_time: float
    bundle: "object" = None      # EmbeddingBundle when the method produces one
    step_trace: Optional[list] = None


def derive_seed(seed, restart):
    """Counter-based per-restart seed, stable as the restart count grows."""
    return np.random.SeedSequence(entropy=int(seed), spawn_key=(int(restart),))


def restart_rng(seed, restart):
    return np.random.default_rng(derive_seed(seed, restart))


def child_seed(seed, restart):
    """Integer seed for a nested fit inside restart `restart`."""
    return int(derive_seed(seed, restart).generate_state(1)[0])


def _converged(prev, cur, tol):
    return abs(cur - prev) <= tol * (1.0 + abs(prev))


def log_gaussian(x, mean, cov):
    """Log density of x under a Gaussian with the given mean and SPD covariance."""
    x = np.asarray(x, dtype=float)
    return float(log_gaussian_rows(x[None, :], mean, cov)[0])


def log_gaussian_rows(X, mean, cov):
    """Row-wise Gaussian log density, computed through a Cholesky factor."""
    X = np.asarray(X, dtype=float)
    cov = np.asarray(cov, dtype=float)
    p = X.shape[1]
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise SingularMatrixError("covariance is not positive-definite") from None
    diff = (X - np.asarray(mean, dtype=float)).T
    sol = scipy.linalg.solve_triangular(L, diff, lower=True)
    maha = np.sum(sol * sol, axis=0)
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    return -0.5 * (p * _LOG_2PI + logdet + maha)


def log_joint(X, params):
    """Matrix of log pi_k + log phi_k(x_i), one column per component."""
    X = np.asarray(X, dtype=float)
    cols = [np.log(params.weights[k])
            + log_gaussian_rows(X, params.means[k], params.covariances[k])
            for k in range(params.g)]
    return np.stack(cols, axis=1)


def e_step(X, params):
    """Posterior cluster probabilities per row, stabilized via log-sum-exp."""
    lp = log_joint(X, params)
    top = lp.max(axis=1)
    bad = ~np.isfinite(top)
    if np.any(bad):
        raise NumericalError(
            f"all components degenerate for row {int(np.where(bad)[0][0])}")
    resp = np.exp(lp - top[:, None])
    resp /= resp.sum(axis=1, keepdims=True)
    return resp


def c_step(resp):
    """MAP hard assignment: argmax responsibility per row, lowest index on ties."""
    resp = np.asarray(resp, dtype=float)
    return Partition(assignments=np.argmax(resp, axis=1), g=resp.shape[1])


def m_step(X, weights, model="full"):
    """Weighted parameter update for soft responsibilities or one-hot weights.

    Covariances are the weighted scatter divided by the column weight sum,
    ridge-regularized with eps * (trace / p) * I (eps = 1e-6), then
    constrained to the requested family. The ridge scale is floored at a
    thousandth of the mean feature variance of X: a cluster whose points
    coincide (a singleton, or a representation pulled onto its centroid)
    would otherwise shrink its covariance below floating-point resolution
    and poison every later Mahalanobis term.
    """
    X = np.asarray(X, dtype=float)
    W = np.asarray(weights, dtype=float)
    if model not in COV_MODELS:
        raise InvalidInputError(f"unknown covariance model {model!r}")
    n, p = X.shape
    g = W.shape[1]
    totals = W.sum(axis=0)
    for k in range(g):
        if totals[k] <= 0.0:
            raise EmptyClusterError(k)
    pi = totals / n
    means = (W.T @ X) / totals[:, None]
    floor = max(1e-3 * float(np.mean(np.var(X, axis=0))), 1e-12)
    covs = np.empty((g, p, p))
    for k in range(g):
        diff = X - means[k]
        cov = (diff * W[:, k:k + 1]).T @ diff / totals[k]
        cov = 0.5 * (cov + cov.T)
        t = max(float(np.trace(cov)) / p, floor)
        covs[k] = cov + _COV_EPS * t * np.eye(p)
    if model == "diagonal":
        for k in range(g):
            covs[k] = np.diag(np.diag(covs[k]))
    elif model == "spherical":
        for k in range(g):
            covs[k] = (np.trace(covs[k]) / p) * np.eye(p)
    elif model == "spherical-tied":
        lam = float(np.sum(totals * np.trace(covs, axis1=1, axis2=2) / p)) / n
        covs = np.repeat((lam * np.eye(p))[None, :, :], g, axis=0)
    return MixtureParams(weights=pi, means=means, covariances=covs, model=model)


def complete_log_likelihood(X, partition, params):
    """Sum over rows of log pi_{z_i} + log phi_{z_i}(x_i)."""
    lp = log_joint(X, params)
    return float(lp[np.arange(lp.shape[0]), partition.assignments].sum())


def log_likelihood(X, params):
    """Observed-data log-likelihood: row-wise log-sum-exp over components."""
    return float(logsumexp(log_joint(X, params), axis=1).sum())


# ---------------------------------------------------------------------------
# K-means


def _seed_centers(X, g, rng, init):
    n = X.shape[0]
    if init == "plusplus":
        centers = np.empty((g, X.shape[1]))
        centers[0] = X[rng.integers(n)]
        for k in range(1, g):
            d2 = np.min(((X[:, None, :] - centers[None, :k, :]) ** 2).sum(axis=2),
                        axis=1)
            total = d2.sum()
            if total > 0:
                centers[k] = X[rng.choice(n, p=d2 / total)]
            else:
                centers[k] = X[rng.integers(n)]
        return centers
    if init == "random-partition":
        assign = rng.integers(0, g, n)
        for k, i in enumerate(rng.permutation(n)[:g]):
            assign[i] = k
        return np.vstack([X[assign == k].mean(axis=0) for k in range(g)])
    raise InvalidInputError(f"unknown init {init!r}")


def lloyd(X, centers, max_iter=100, tol=1e-6):
    """Lloyd rounds from the given centers until assignments stabilize.

    Returns (assignments, centers, wcss_trace, iterations). Empty clusters
    are reseeded with the point farthest from its own centroid (which then
    becomes that cluster's center, so the objective cannot increase).
    """
    X = np.asarray(X, dtype=float)
    centers = np.array(centers, dtype=float)
    n = X.shape[0]
    g = centers.shape[0]
    trace = []
    prev_assign = None
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = np.argmin(d2, axis=1)
        taken = set()
        for k in range(g):
            if np.any(assign == k):
                continue
            own = d2[np.arange(n), assign].copy()
            own[list(taken)] = -np.inf
            far = int(np.argmax(own))
            assign[far] = k
            centers[k] = X[far]
            d2[:, k] = ((X - centers[k]) ** 2).sum(axis=1)
            taken.add(far)
        wcss = float(((X - centers[assign]) ** 2).sum())
        trace.append(wcss)
        centers = np.vstack([X[assign == k].mean(axis=0) for k in range(g)])
        if prev_assign is not None and np.array_equal(assign, prev_assign):
            break
        if len(trace) >= 2 and _converged(trace[-2], trace[-1], tol):
            prev_assign = assign
            break
        prev_assign = assign
    wcss = float(((X - centers[assign]) ** 2).sum())
    trace.append(wcss)
    return assign, centers, trace, iterations


def _kmeans_params(X, partition, wcss):
    n, p = X.shape
    counts = partition.counts()
    means = np.vstack([X[partition.assignments == k].mean(axis=0)
                       for k in range(partition.g)])
    lam = wcss / (n * p)
    if lam <= 0.0:
        lam = max(float(np.mean(np.var(X, axis=0))), 1e-12) * _COV_EPS
    covs = np.repeat((lam * np.eye(p))[None, :, :], partition.g, axis=0)
    return MixtureParams(weights=counts / n, means=means, covariances=covs,
                         model="spherical-tied")


def kmeans(X, g, max_iter=100, tol=1e-6, restarts=1, seed=0, init="plusplus"):
    """Lloyd's algorithm, best of `restarts` runs by within-cluster sum of squares."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if g < 1:
        raise InvalidInputError("g must be >= 1")
    if n < g:
        raise InvalidInputError(f"need at least g={g} rows, got {n}")
    start = time.perf_counter()
    best = None
    for r in range(restarts):
        rng = restart_rng(seed, r)
        centers = _seed_centers(X, g, rng, init)
        assign, centers, trace, iters = lloyd(X, centers, max_iter=max_iter, tol=tol)
        if best is None or trace[-1] < best.objective_trace[-1]:
            part = Partition(assignments=assign, g=g)
            best = FitResult(partition=part,
                             params=_kmeans_params(X, part, trace[-1]),
                             objective_trace=trace, iterations=iters,
                             seed=int(seed), restart_index=r, wall_time=0.0)
    best.wall_time = time.perf_counter() - start
    return best


# ---------------------------------------------------------------------------
# EM and CEM


def em_gmm(X, g, max_iter=100, tol=1e-6, restarts=1, seed=0, model="full"):
    """Fit a Gaussian mixture by EM, initialized from a K-means partition.

    Keeps the restart with the highest observed-data log-likelihood; the
    final hard partition applies the MAP rule to the last E-step.
    """
    X = np.asarray(X, dtype=float)
    _check_fit_args(X, g)
    start = time.perf_counter()
    best = None
    last_error = None
    for r in range(restarts):
        km = kmeans(X, g, max_iter=max_iter, seed=child_seed(seed, r))
        try:
            params = m_step(X, km.partition.one_hot(), model)
            trace = [log_likelihood(X, params)]
            iterations = 0
            for _ in range(max_iter):
                iterations += 1
                resp = e_step(X, params)
                params = m_step(X, resp, model)
                trace.append(log_likelihood(X, params))
                if _converged(trace[-2], trace[-1], tol):
                    break
            partition = c_step(e_step(X, params))
        except (EmptyClusterError, SingularMatrixError, NumericalError) as exc:
            last_error = exc
            continue
        if best is None or trace[-1] > best.objective_trace[-1]:
            best = FitResult(partition=partition, params=params,
                             objective_trace=trace, iterations=iterations,
                             seed=int(seed), restart_index=r, wall_time=0.0)
    if best is None:
        raise NumericalError(f"all {restarts} restarts failed: {last_error}")
    best.wall_time = time.perf_counter() - start
    return best


def _repair_empty(assign, lp, g):
    """Seize the lowest-density points for clusters that came out empty."""
    present = np.bincount(assign, minlength=g)
    empties = np.where(present == 0)[0]
    if empties.size == 0:
        return assign
    density = logsumexp(lp, axis=1)
    order = np.argsort(density, kind="stable")
    assign = assign.copy()
    used = 0
    for k in empties:
        while used < order.size:
            i = order[used]
            used += 1
            donor = assign[i]
            if np.bincount(assign, minlength=g)[donor] > 1:
                assign[i] = k
                break
    return assign


def cem_refine(X, partition, params, max_iter=100, tol=1e-6, model="full"):
    """Run E/C/M rounds from a warm state until the partition stabilizes.

    Returns (partition, params, complete-log-likelihood trace, iterations).
    The trace is non-decreasing up to the covariance regularization slack.
    """
    X = np.asarray(X, dtype=float)
    trace = [complete_log_likelihood(X, partition, params)]
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        lp = log_joint(X, params)
        assign = _repair_empty(np.argmax(lp, axis=1), lp, partition.g)
        new_part = Partition(assignments=assign, g=partition.g)
        params = m_step(X, new_part.one_hot(), model)
        trace.append(complete_log_likelihood(X, new_part, params))
        unchanged = np.array_equal(new_part.assignments, partition.assignments)
        partition = new_part
        if unchanged or _converged(trace[-2], trace[-1], tol):
            break
    return partition, params, trace, iterations


def cem(X, g, max_iter=100, tol=1e-6, restarts=1, seed=0, model="full"):
    """Hard-assignment EM: a classification step between E and M.

    Maximizes the complete-data log-likelihood; empty clusters are repaired
    by reseeding them with the lowest-density point. Best restart by final
    complete-data log-likelihood.
    """
    X = np.asarray(X, dtype=float)
    _check_fit_args(X, g)
    start = time.perf_counter()
    best = None
    last_error = None
    for r in range(restarts):
        km = kmeans(X, g, max_iter=max_iter, seed=child_seed(seed, r))
        try:
            params = m_step(X, km.partition.one_hot(), model)
            partition, params, trace, iterations = cem_refine(
                X, km.partition, params, max_iter=max_iter, tol=tol, model=model)
        except (EmptyClusterError, SingularMatrixError, NumericalError) as exc:
            last_error = exc
            continue
        if best is None or trace[-1] > best.objective_trace[-1]:
            best = FitResult(partition=partition, params=params,
                             objective_trace=trace, iterations=iterations,
                             seed=int(seed), restart_index=r, wall_time=0.0)
    if best is None:
        raise NumericalError(f"all {restarts} restarts failed: {last_error}")
    best.wall_time = time.perf_counter() - start
    return best


def _check_fit_args(X, g):
    if g < 1:
        raise InvalidInputError("g must be >= 1")
    if X.shape[0] < g:
        raise InvalidInputError(f"need at least g={g} rows, got {X.shape[0]}")
