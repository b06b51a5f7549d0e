"""Codebook learning over word-vector space.

The codebook is a set of k centroids fitted with Lloyd's algorithm from a
k-means++ start.  Nearest-centroid search is exact brute force: with the
small codebooks used here (k in the tens) an approximate index would cost
more than it saves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DataFormatError, DimensionMismatchError

_CODEBOOK_MAGIC = "vlawe-codebook/1"

# Points per distance-matrix block; bounds memory while keeping BLAS-sized work.
_ASSIGN_CHUNK = 8192


@dataclass
class Codebook:
    """k centroids of dimension d plus the training run's metadata."""

    centroids: np.ndarray
    inertia: float
    iterations_run: int
    seed: int
    inertia_history: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.centroids = np.ascontiguousarray(self.centroids, dtype=np.float64)
        if self.centroids.ndim != 2:
            raise ValueError("centroids must be a 2-D (k, d) array")
        if not np.all(np.isfinite(self.centroids)):
            raise ValueError("centroids contain non-finite values")

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def dimension(self) -> int:
        return self.centroids.shape[1]


@dataclass
class CodebookTrainingSet:
    """Vectors used to fit a codebook.

    `dedup_mode` records how the vectors were collected from a corpus:
    one vector per distinct word ("unique-types") or one per token
    occurrence ("all-tokens").
    """

    vectors: np.ndarray
    dedup_mode: str = "unique-types"


def _check_training_matrix(X: np.ndarray, k: int) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("training vectors must form a 2-D (n, d) array")
    if not np.all(np.isfinite(X)):
        raise ValueError("training vectors contain non-finite values")
    if k < 1:
        raise ValueError("k must be a positive integer")
    if X.shape[0] < k:
        raise ValueError(f"need at least k={k} vectors, got {X.shape[0]}")
    return X


def _kmeanspp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Seed centroids: first uniform, then proportional to squared distance."""
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]), dtype=np.float64)
    centers[0] = X[rng.integers(n)]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            # all remaining mass sits on already-chosen points
            idx = rng.integers(n)
        centers[j] = X[idx]
        d2 = np.minimum(d2, ((X - centers[j]) ** 2).sum(axis=1))
    return centers


def _label_points(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0], dtype=np.int64)
    for start in range(0, X.shape[0], _ASSIGN_CHUNK):
        block = X[start:start + _ASSIGN_CHUNK]
        out[start:start + _ASSIGN_CHUNK] = np.argmin(
            cdist(block, centroids, "sqeuclidean"), axis=1
        )
    return out


def _repair_empty_clusters(X, centroids, labels, counts):
    """Give each empty cluster the point farthest from its current centroid.

    Points that are the sole member of their cluster are not eligible, so the
    repair never creates a new empty cluster.  Deterministic: empty clusters
    are filled in ascending index order, ties on distance go to the lowest
    point index.
    """
    dist = ((X - centroids[labels]) ** 2).sum(axis=1)
    for empty in np.flatnonzero(counts == 0):
        eligible = counts[labels] > 1
        candidates = np.where(eligible, dist, -np.inf)
        donor = int(np.argmax(candidates))
        counts[labels[donor]] -= 1
        labels[donor] = empty
        counts[empty] = 1
        dist[donor] = 0.0
    return labels, counts


def train_codebook(
    data,
    k: int,
    max_iters: int = 100,
    rel_tolerance: float = 1e-4,
    seed: int = 0,
) -> Codebook:
    """Fit k centroids with Lloyd's algorithm from a k-means++ start.

    Each centroid is the arithmetic mean of the vectors assigned to it.
    Iteration stops when assignments are stable, when the relative inertia
    improvement drops below `rel_tolerance`, or after `max_iters` passes.
    Deterministic for a given seed.
    """
    X = data.vectors if isinstance(data, CodebookTrainingSet) else data
    X = _check_training_matrix(np.asarray(X), k)
    rng = np.random.default_rng(seed)
    centroids = _kmeanspp_init(X, k, rng)

    labels = None
    history: list[float] = []
    iterations = 0
    for _ in range(max_iters):
        new_labels = _label_points(X, centroids)
        counts = np.bincount(new_labels, minlength=k)
        if counts.min() == 0:
            new_labels, counts = _repair_empty_clusters(X, centroids, new_labels, counts)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        iterations += 1

        sums = np.zeros((k, X.shape[1]), dtype=np.float64)
        np.add.at(sums, labels, X)
        centroids = sums / counts[:, None]

        inertia = float(((X - centroids[labels]) ** 2).sum())
        history.append(inertia)
        if len(history) >= 2:
            prev = history[-2]
            if prev - inertia < rel_tolerance * prev:
                break

    return Codebook(
        centroids=centroids,
        inertia=history[-1] if history else 0.0,
        iterations_run=iterations,
        seed=seed,
        inertia_history=history,
    )


def assign(x, cb: Codebook) -> int:
    """Index of the nearest centroid (0-based); ties go to the lowest index."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (cb.dimension,):
        raise DimensionMismatchError(
            f"vector has shape {x.shape}, codebook dimension is {cb.dimension}"
        )
    return int(np.argmin(((cb.centroids - x) ** 2).sum(axis=1)))


def assign_many(X, cb: Codebook) -> np.ndarray:
    """Vectorized `assign` over the rows of an (n, d) matrix."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != cb.dimension:
        raise DimensionMismatchError(
            f"matrix has shape {X.shape}, codebook dimension is {cb.dimension}"
        )
    return _label_points(X, cb.centroids)


def save_codebook(cb: Codebook, path) -> None:
    """Serialize to an .npz archive; round-trips centroid values bit-exactly."""
    with open(path, "wb") as fh:
        np.savez(
            fh,
            magic=np.array(_CODEBOOK_MAGIC),
            k=np.array(cb.k),
            d=np.array(cb.dimension),
            seed=np.array(cb.seed),
            iterations_run=np.array(cb.iterations_run),
            inertia=np.array(cb.inertia),
            inertia_history=np.array(cb.inertia_history, dtype=np.float64),
            centroids=cb.centroids,
        )


def load_codebook(path) -> Codebook:
    try:
        with np.load(path, allow_pickle=False) as data:
            if "magic" not in data or str(data["magic"]) != _CODEBOOK_MAGIC:
                raise DataFormatError(path, "not a codebook file (bad magic)")
            k = int(data["k"])
            d = int(data["d"])
            centroids = data["centroids"]
            if centroids.shape != (k, d):
                raise DataFormatError(
                    path,
                    f"centroid matrix has shape {centroids.shape}, header says ({k}, {d})",
                )
            return Codebook(
                centroids=centroids,
                inertia=float(data["inertia"]),
                iterations_run=int(data["iterations_run"]),
                seed=int(data["seed"]),
                inertia_history=list(data["inertia_history"]),
            )
    except DataFormatError:
        raise
    except Exception as exc:  # truncated zip, wrong format, bad header...
        raise DataFormatError(path, f"corrupt codebook file ({exc})") from exc
