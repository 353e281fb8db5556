"""Dataset ingestion, standardization, synthetic generators, and graph smoothing."""

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import DataError, InvalidInputError, ParseError

FCPS_SHAPES = ("atom", "chainlink", "hepta", "lsun3d", "tetra")
FCPS_CLASS_COUNTS = {"atom": 2, "chainlink": 2, "hepta": 7, "lsun3d": 4, "tetra": 4}
FCPS_DEFAULT_SIZES = {"atom": 800, "chainlink": 1000, "hepta": 212, "lsun3d": 404, "tetra": 400}

# seed-stream tags so different generators never share a random stream
_GEN_TAGS = {"chang": 0, "atom": 1, "chainlink": 2, "hepta": 3, "lsun3d": 4, "tetra": 5}


@dataclass
class LabeledDataset:
    """A numeric data matrix with optional integer class labels."""

    X: np.ndarray
    labels: Optional[np.ndarray]
    name: str = ""

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    @property
    def n_classes(self):
        if self.labels is None or self.labels.size == 0:
            return 0
        return int(self.labels.max()) + 1


@dataclass
class NeighborGraph:
    """Row-normalized directed k-nearest-neighbor weight matrix."""

    W: sp.csr_matrix
    k: int


def load_csv(path, label_column=None, has_header=True):
    """Load a numeric CSV dataset.

    label_column selects a column by zero-based index or, when the file
    has a header, by name. That column is removed from the features and
    re-encoded as integer labels in order of first appearance.
    """
    try:
        with open(path, newline="") as fh:
            raw = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    if not raw:
        raise ParseError(f"{path} is empty")

    header = None
    offset = 1
    if has_header:
        header = [c.strip() for c in raw[0]]
        raw = raw[1:]
        offset = 2
        if not raw:
            raise ParseError(f"{path} has a header but no data rows")

    ncol = len(raw[0])
    label_idx = None
    if label_column is not None:
        if isinstance(label_column, str):
            if header is None:
                raise InvalidInputError("label column by name requires a header")
            if label_column not in header:
                raise InvalidInputError(f"no column named {label_column!r} in header")
            label_idx = header.index(label_column)
        else:
            label_idx = int(label_column)
            if not 0 <= label_idx < ncol:
                raise InvalidInputError(f"label column index {label_idx} out of range")

    features = []
    label_values = []
    for i, row in enumerate(raw):
        if len(row) != ncol:
            raise ParseError(f"ragged row: expected {ncol} cells, got {len(row)}",
                             row=i + offset, column=len(row) + 1)
        vals = []
        for j, cell in enumerate(row):
            if j == label_idx:
                label_values.append(cell.strip())
                continue
            try:
                vals.append(float(cell))
            except ValueError:
                raise ParseError(f"cannot parse {cell.strip()!r} as a number",
                                 row=i + offset, column=j + 1) from None
        features.append(vals)

    X = np.asarray(features, dtype=float)
    labels = None
    if label_idx is not None:
        labels = _encode_labels(label_values)
    return LabeledDataset(X=X, labels=labels, name=str(path))


def _encode_labels(values):
    # canonical 0..K-1 integer labels pass through; anything else is
    # re-encoded in order of first appearance
    try:
        ints = [int(v) for v in values]
    except ValueError:
        ints = None
    if ints is not None and set(ints) == set(range(max(ints) + 1)) and min(ints) >= 0:
        return np.asarray(ints, dtype=int)
    seen = {}
    return np.asarray([seen.setdefault(v, len(seen)) for v in values], dtype=int)


def save_csv(dataset, path):
    """Write a dataset as CSV with an x0..x{d-1} header and a trailing label column."""
    cols = [f"x{j}" for j in range(dataset.d)]
    if dataset.labels is not None:
        cols.append("label")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for i in range(dataset.n):
            row = [repr(float(v)) for v in dataset.X[i]]
            if dataset.labels is not None:
                row.append(str(int(dataset.labels[i])))
            writer.writerow(row)


def standardize(X):
    """Center each column and scale to unit sample variance (ddof=1).

    Zero-variance columns are centered but left unscaled.
    """
    X = np.asarray(X, dtype=float)
    if X.shape[0] < 2:
        raise InvalidInputError("standardize needs at least 2 rows")
    mu = X.mean(axis=0)
    sd = X.std(axis=0, ddof=1)
    sd = np.where(sd > 0, sd, 1.0)
    return (X - mu) / sd


def _split_counts(n, g):
    counts = [n // g] * g
    for i in range(n - sum(counts)):
        counts[i] += 1
    return counts


def _chang_covariance():
    # Two strongly correlated variable blocks (1-8 and 9-15) with weak
    # cross-block ties. One within-block contrast direction is squeezed
    # far below the 0.1 eigenvalue shared by all other contrasts, so the
    # class offset placed along it stays in the last principal component
    # of the mixed data (0.004 * (1 + 9) = 0.04 < 0.1).
    C = np.full((15, 15), 0.1)
    C[:8, :8] = 0.9
    C[8:, 8:] = 0.9
    np.fill_diagonal(C, 1.0)
    v = np.zeros(15)
    v[0], v[1] = 1.0, -1.0
    v /= np.sqrt(2.0)
    lam_v = 0.004
    return C - (0.1 - lam_v) * np.outer(v, v), v, lam_v


def gen_chang(n=1000, seed=0):
    """Two 15-dimensional Gaussian classes whose separation hides in a
    trailing principal component.

    The leading two components carry block variance only; the class mean
    offset lies along the within-class direction of smallest variance
    (6 sigma apart), so a plane through the last component separates the
    classes while the leading-component plane does not.
    """
    if n % 2 != 0 or n < 4:
        raise InvalidInputError("n must be even and >= 4")
    cov, v, lam_v = _chang_covariance()
    rng = np.random.default_rng(np.random.SeedSequence((_GEN_TAGS["chang"], int(seed))))
    L = np.linalg.cholesky(cov)
    X = rng.standard_normal((n, 15)) @ L.T
    offset = 3.0 * np.sqrt(lam_v) * v
    m = n // 2
    X[:m] -= offset
    X[m:] += offset
    labels = np.repeat([0, 1], m)
    return LabeledDataset(X=X, labels=labels, name="chang")


def _gen_atom(rng, counts):
    core = rng.standard_normal((counts[0], 3)) * 0.1
    u = rng.standard_normal((counts[1], 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    shell = u * (1.0 + 0.02 * rng.standard_normal((counts[1], 1)))
    return np.vstack([core, shell])


def _gen_chainlink(rng, counts):
    # two interlocked rings of radius 1 in perpendicular planes, centers
    # one radius apart; closest approach between the circles is 1.0
    t1 = rng.uniform(0.0, 2.0 * np.pi, counts[0])
    t2 = rng.uniform(0.0, 2.0 * np.pi, counts[1])
    ring1 = np.stack([np.cos(t1), np.sin(t1), np.zeros_like(t1)], axis=1)
    ring2 = np.stack([1.0 + np.cos(t2), np.zeros_like(t2), np.sin(t2)], axis=1)
    ring1 += rng.standard_normal(ring1.shape) * 0.05
    ring2 += rng.standard_normal(ring2.shape) * 0.05
    return np.vstack([ring1, ring2])


def _gen_hepta(rng, counts):
    centers = np.vstack([[0.0, 0.0, 0.0], 3.0 * np.eye(3), -3.0 * np.eye(3)])
    return np.vstack([centers[k] + rng.standard_normal((counts[k], 3)) * 0.3
                      for k in range(7)])


def _gen_lsun3d(rng, counts):
    bar_x = np.stack([rng.uniform(0.0, 3.0, counts[0]),
                      rng.normal(0.0, 0.1, counts[0]),
                      rng.normal(0.0, 0.1, counts[0])], axis=1)
    bar_y = np.stack([rng.normal(0.0, 0.1, counts[1]),
                      rng.uniform(1.0, 4.0, counts[1]),
                      rng.normal(0.0, 0.1, counts[1])], axis=1)
    ball_a = np.array([4.0, 4.0, 0.0]) + rng.standard_normal((counts[2], 3)) * 0.25
    ball_b = np.array([4.0, 4.0, 2.5]) + rng.standard_normal((counts[3], 3)) * 0.25
    return np.vstack([bar_x, bar_y, ball_a, ball_b])


def _gen_tetra(rng, counts):
    vertices = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]],
                        dtype=float) / np.sqrt(3.0)
    return np.vstack([vertices[k] + rng.standard_normal((counts[k], 3)) * 0.22
                      for k in range(4)])


_FCPS_BUILDERS = {
    "atom": _gen_atom,
    "chainlink": _gen_chainlink,
    "hepta": _gen_hepta,
    "lsun3d": _gen_lsun3d,
    "tetra": _gen_tetra,
}


def gen_fcps(shape, n=None, seed=0):
    """Generate a 3-d benchmark point cloud of the named topology.

    atom: dense ball inside a hollow sphere shell; chainlink: two
    interlocked rings; hepta: seven well-separated blobs; lsun3d: two
    perpendicular bars plus two balls; tetra: four tangent blobs at
    tetrahedron vertices.
    """
    if shape not in _FCPS_BUILDERS:
        raise InvalidInputError(f"unknown shape {shape!r}; choose from {FCPS_SHAPES}")
    g = FCPS_CLASS_COUNTS[shape]
    if n is None:
        n = FCPS_DEFAULT_SIZES[shape]
    if n < 10 * g:
        raise InvalidInputError(f"{shape} needs n >= {10 * g}, got {n}")
    counts = _split_counts(n, g)
    rng = np.random.default_rng(np.random.SeedSequence((_GEN_TAGS[shape], int(seed))))
    X = _FCPS_BUILDERS[shape](rng, counts)
    labels = np.repeat(np.arange(g), counts)
    return LabeledDataset(X=X, labels=labels, name=shape)


def knn_graph(X, k):
    """Directed k-nearest-neighbor graph with Gaussian kernel weights.

    W[i, j] = exp(-||x_i - x_j||^2) for the k nearest neighbors j of i
    (Euclidean, ties broken by lowest index), zero elsewhere and on the
    diagonal; each row is then scaled to sum to one. A row-constant
    kernel shift keeps exp in range and cancels in the normalization.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if not 1 <= k <= n - 1:
        raise InvalidInputError(f"k must be in [1, {n - 1}], got {k}")
    sq = np.sum(X * X, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, np.inf)
    idx = np.argsort(d2, axis=1, kind="stable")[:, :k]
    rows = np.repeat(np.arange(n), k)
    neigh = d2[np.arange(n)[:, None], idx]
    w = np.exp(-(neigh - neigh.min(axis=1, keepdims=True)))
    w /= w.sum(axis=1, keepdims=True)
    W = sp.csr_matrix((w.ravel(), (rows, idx.ravel())), shape=(n, n))
    return NeighborGraph(W=W, k=k)


def smooth(X, graph, m):
    """Neighborhood averaging applied m times: returns W^m X."""
    X = np.asarray(X, dtype=float)
    m = int(m)
    if m < 0:
        raise InvalidInputError("smoothing power must be >= 0")
    if graph.W.shape[0] != X.shape[0]:
        raise InvalidInputError(
            f"graph has {graph.W.shape[0]} rows but X has {X.shape[0]}")
    out = X.copy()
    for _ in range(m):
        out = graph.W @ out
    return out
