"""Document encoders.

The main representation stacks, per codebook cluster, the summed residuals
between the document's word vectors and the cluster centroid, then applies
a signed power transform and L2 normalization.  Baseline encoders (mean of
word vectors, bag-of-words counts, cluster-occupancy histogram) and a PCA
compaction step live here as well.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .codebook import Codebook, assign_many
from .embeddings import EmbeddingTable, TokenizedDocument, resolve
from .errors import DataFormatError, DimensionMismatchError


@dataclass
class EncoderConfig:
    """Normalization settings: signed-power exponent and optional L2 step."""

    alpha: float = 0.5
    l2_normalize: bool = True

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")


@dataclass
class DocumentEmbedding:
    """A k*d residual embedding plus provenance and OOV diagnostics."""

    values: np.ndarray
    k: int
    d: int
    normalized: bool
    source_id: str = ""
    n_tokens: int = 0
    n_oov: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.k * self.d,):
            raise ValueError(
                f"embedding has {self.values.shape} values, expected ({self.k * self.d},)"
            )


def encode_raw(doc_vectors, cb: Codebook) -> np.ndarray:
    """Sum residuals x - mu per nearest cluster; concatenate in cluster order.

    Clusters with no assigned vectors contribute a zero block.  An empty
    vector list yields the zero vector of length k*d.
    """
    X = np.asarray(doc_vectors, dtype=np.float64)
    if X.size == 0:
        return np.zeros(cb.k * cb.dimension)
    if X.ndim != 2 or X.shape[1] != cb.dimension:
        raise DimensionMismatchError(
            f"document vectors have shape {X.shape}, codebook dimension is {cb.dimension}"
        )
    labels = assign_many(X, cb)
    blocks = np.zeros((cb.k, cb.dimension))
    np.add.at(blocks, labels, X - cb.centroids[labels])
    return blocks.ravel()


def power_normalize(v, alpha: float) -> np.ndarray:
    """Componentwise z -> sign(z) * |z|**alpha; alpha=1 is the identity."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.abs(v) ** alpha


def l2_normalize(v) -> np.ndarray:
    """v / ||v||_2; the zero vector is returned unchanged."""
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v)
    if norm > 0.0:
        return v / norm
    return v.copy()


def encode(
    doc: TokenizedDocument,
    table: EmbeddingTable,
    cb: Codebook,
    cfg: EncoderConfig | None = None,
) -> DocumentEmbedding:
    """Full pipeline: resolve -> residual sums -> power norm -> optional L2."""
    cfg = cfg or EncoderConfig()
    if table.dimension != cb.dimension:
        raise DimensionMismatchError(
            f"table dimension {table.dimension} != codebook dimension {cb.dimension}"
        )
    resolved, vectors = resolve(doc, table)
    phi = power_normalize(encode_raw(vectors, cb), cfg.alpha)
    if cfg.l2_normalize:
        phi = l2_normalize(phi)
    return DocumentEmbedding(
        values=phi,
        k=cb.k,
        d=cb.dimension,
        normalized=cfg.l2_normalize,
        source_id=doc.source_id,
        n_tokens=len(resolved.known_tokens),
        n_oov=resolved.oov_count,
    )


# ---------------------------------------------------------------------------
# PCA compaction
# ---------------------------------------------------------------------------

@dataclass
class PcaProjection:
    """Mean-centered projection onto the top-m principal directions."""

    mean: np.ndarray
    components: np.ndarray  # (m, D), orthonormal rows
    explained_variance: np.ndarray  # (m,), decreasing


def fit_pca(embeddings, m: int) -> PcaProjection:
    """Fit on the given embeddings only (callers keep test data out)."""
    X = np.asarray(embeddings, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("embeddings must form a 2-D (n, D) array")
    n, dim = X.shape
    if n < 2:
        raise ValueError("PCA needs at least 2 embeddings")
    if not 1 <= m <= min(n, dim):
        raise ValueError(f"m={m} must lie in [1, min(n={n}, D={dim})]")
    mean = X.mean(axis=0)
    Xc = X - mean
    if n >= dim:
        cov = Xc.T @ Xc / (n - 1)
        evals, evecs = np.linalg.eigh(cov)
        components = evecs[:, ::-1][:, :m].T
        variance = np.maximum(evals[::-1][:m], 0.0)
    else:
        _, s, vt = np.linalg.svd(Xc, full_matrices=False)
        components = vt[:m]
        variance = s[:m] ** 2 / (n - 1)
    # fix the sign of each direction so refits are reproducible
    components = components.copy()
    for row in components:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    return PcaProjection(mean=mean, components=components, explained_variance=variance)


def apply_pca(proj: PcaProjection, v) -> np.ndarray:
    """Project a vector (D,) or matrix (n, D) into the m-dimensional space."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != proj.mean.shape[0]:
        raise DimensionMismatchError(
            f"input dimension {v.shape[-1]} != projection dimension {proj.mean.shape[0]}"
        )
    return (v - proj.mean) @ proj.components.T


# ---------------------------------------------------------------------------
# Baseline encoders
# ---------------------------------------------------------------------------

def encode_mean_baseline(doc: TokenizedDocument, table: EmbeddingTable) -> np.ndarray:
    """Arithmetic mean of the resolved word vectors; zero when all tokens are OOV."""
    _, vectors = resolve(doc, table)
    if vectors.shape[0] == 0:
        return np.zeros(table.dimension)
    return vectors.mean(axis=0)


def build_bow_vocabulary(token_docs) -> dict[str, int]:
    """Term -> column index over the given documents, in sorted term order."""
    terms = sorted({t for tokens in token_docs for t in tokens})
    return {t: i for i, t in enumerate(terms)}


def encode_bow_baseline(token_docs, vocabulary: dict[str, int]) -> sp.csr_matrix:
    """Sparse term-frequency matrix; terms outside the vocabulary are ignored."""
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for tokens in token_docs:
        counts: dict[int, float] = {}
        for t in tokens:
            col = vocabulary.get(t)
            if col is not None:
                counts[col] = counts.get(col, 0.0) + 1.0
        for col in sorted(counts):
            indices.append(col)
            data.append(counts[col])
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.array(data), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
        shape=(len(indptr) - 1, len(vocabulary)),
    )


def encode_histogram(doc_vectors, cb: Codebook) -> np.ndarray:
    """Counts of document vectors assigned to each cluster (length k)."""
    X = np.asarray(doc_vectors, dtype=np.float64)
    if X.size == 0:
        return np.zeros(cb.k)
    labels = assign_many(X, cb)
    return np.bincount(labels, minlength=cb.k).astype(np.float64)


# ---------------------------------------------------------------------------
# Embedding dump files
# ---------------------------------------------------------------------------

def write_embedding_dump(path, ids, matrix, meta: dict) -> None:
    """One `doc_id v1 ... vD` line per document plus a JSON sidecar header.

    Floats are written with 17 significant digits so the dump round-trips
    float64 values exactly.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != len(ids):
        raise ValueError("matrix must be (n_docs, D) aligned with ids")
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id, row in zip(ids, matrix):
            fh.write(str(doc_id) + " " + " ".join(f"{x:.17g}" for x in row) + "\n")
    header = dict(meta)
    header["count"] = int(matrix.shape[0])
    header["dim"] = int(matrix.shape[1])
    with open(_sidecar_path(path), "w", encoding="utf-8") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_embedding_dump(path):
    """Inverse of `write_embedding_dump`: returns (ids, matrix, meta)."""
    sidecar = _sidecar_path(path)
    if not os.path.exists(sidecar):
        raise DataFormatError(sidecar, "missing dump sidecar header")
    with open(sidecar, encoding="utf-8") as fh:
        meta = json.load(fh)
    ids: list[str] = []
    rows: list[np.ndarray] = []
    dim = int(meta["dim"])
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != dim + 1:
                raise DataFormatError(
                    path, f"expected {dim} values, found {len(fields) - 1}", lineno
                )
            try:
                rows.append(np.array([float(x) for x in fields[1:]]))
            except ValueError:
                raise DataFormatError(path, "non-numeric value", lineno) from None
            ids.append(fields[0])
    if len(ids) != int(meta["count"]):
        raise DataFormatError(path, f"expected {meta['count']} rows, found {len(ids)}")
    matrix = np.vstack(rows) if rows else np.empty((0, dim))
    return ids, matrix, meta


def _sidecar_path(path) -> str:
    return str(path) + ".meta.json"
