"""Sequential and joint reference methods: K-means on principal components,
and the clustered low-rank factorization baseline."""

import time
from dataclasses import replace

import numpy as np

from . import mixture
from .cempca import EmbeddingBundle
from .errors import InvalidInputError
from .linalg import fix_signs, thin_svd
from .mixture import FitResult, Partition


def kmeans_pca(X, g, p_used, weighted=True, restarts=10, seed=0,
               max_iter=100, tol=1e-6):
    """K-means on the leading principal-component scores.

    Scores are singular-value weighted by default; weighted=False clusters
    the unit-scale orthonormal basis columns instead (ablation).
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if not 1 <= p_used <= min(n - 1, d):
        raise InvalidInputError(f"p_used must be in [1, {min(n - 1, d)}], got {p_used}")
    Xc = X - X.mean(axis=0)
    U, s, _ = thin_svd(Xc)
    B = U[:, :p_used]
    scores = B * s[:p_used] if weighted else B
    km = mixture.kmeans(scores, g, max_iter=max_iter, tol=tol,
                        restarts=restarts, seed=seed)
    bundle = EmbeddingBundle(B=B, Q=Xc.T @ B, M=scores)
    return replace(km, bundle=bundle)


def _procrustes_loadings(G):
    # maximize Tr(Q^T G) over orthonormal-column Q: polar factor of G
    U, _, V = thin_svd(G)
    return U @ V.T


def reduced_kmeans(X, g, p, restarts=10, seed=0, max_iter=100, tol=1e-6,
                   record_history=False):
    """Alternating fit of the clustered factorization || X - Z S Q^T ||^2.

    Given the partition and centroids, Q is the polar factor of X^T (Z S);
    given Q, warm-started Lloyd rounds on the scores X Q refit Z and S.
    Both half-steps minimize their block, so the objective never increases.
    Best of `restarts` runs by final objective.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if n < g:
        raise InvalidInputError(f"need at least g={g} rows, got {n}")
    if not 1 <= p <= min(n - 1, d):
        raise InvalidInputError(f"p must be in [1, {min(n - 1, d)}], got {p}")
    start = time.perf_counter()
    _, _, V0 = thin_svd(X - X.mean(axis=0))
    best = None
    for r in range(restarts):
        Q = V0[:, :p]
        scores = X @ Q
        # seed exactly like kmeans restart r so the p = d case reproduces
        # the plain K-means partition for equal seeds
        rng = mixture.restart_rng(seed, r)
        centers = mixture._seed_centers(scores, g, rng, "plusplus")
        assign, centers, _, _ = mixture.lloyd(scores, centers,
                                              max_iter=max_iter, tol=tol)
        S = centers
        trace = [_rkm_objective(X, assign, S, Q)]
        history = [] if record_history else None
        iterations = 0
        for _ in range(max_iter):
            iterations += 1
            Q = _procrustes_loadings(X.T @ _expand(assign, S, g))
            scores = X @ Q
            centers = np.vstack([scores[assign == k].mean(axis=0) for k in range(g)])
            assign, centers, _, _ = mixture.lloyd(scores, centers,
                                                  max_iter=max_iter, tol=tol)
            S = centers
            trace.append(_rkm_objective(X, assign, S, Q))
            if record_history:
                history.append({"Q": Q.copy(), "S": S.copy(),
                                "assignments": assign.copy()})
            if mixture._converged(trace[-2], trace[-1], tol):
                break
        if best is None or trace[-1] < best.objective_trace[-1]:
            part = Partition(assignments=assign, g=g)
            bundle = _rkm_bundle(X, Q, part, S)
            best = FitResult(partition=part, params=None, objective_trace=trace,
                             iterations=iterations, seed=int(seed),
                             restart_index=r, wall_time=0.0, bundle=bundle,
                             step_trace=history)
    best.wall_time = time.perf_counter() - start
    return best


def _expand(assign, S, g):
    return S[assign]


def _rkm_objective(X, assign, S, Q):
    resid = X - S[assign] @ Q.T
    return float(np.sum(resid * resid))


def _rkm_bundle(X, Q, partition, S):
    scores = X @ Q
    B, R = np.linalg.qr(scores)
    B = fix_signs(B)
    return EmbeddingBundle(B=B, Q=Q, M=S[partition.assignments])
