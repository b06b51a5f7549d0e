"""Corpus ingestion, cross-validation, metrics and the experiment pipeline.

Corpora arrive in a unified TSV format (one document per line:
`doc_id<TAB>label[,label...]<TAB>train|test|-<TAB>text`).  Evaluation uses
the predefined split when one exists and stratified 10-fold
cross-validation otherwise; the score is micro-averaged F1 for multilabel
tasks and plain accuracy for everything else.
"""

from __future__ import annotations

import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import classifier as clf
from .codebook import Codebook, train_codebook
from .embeddings import EmbeddingTable, tokenize, resolve
from .encoder import (
    apply_pca,
    build_bow_vocabulary,
    encode_bow_baseline,
    encode_histogram,
    encode_raw,
    fit_pca,
    l2_normalize,
    power_normalize,
)
from .errors import DataFormatError

_TASK_KINDS = ("binary", "multiclass", "multilabel")
_ENCODER_KINDS = ("vlawe", "mean", "bow", "histogram")
_CODEBOOK_SCOPES = ("per-fold", "shared")
_DEDUP_MODES = ("unique-types", "all-tokens")

# stream ids for sub-seed derivation
_STREAM_FOLDS = 1
_STREAM_KMEANS = 2
_STREAM_SVM = 3
_SHARED_FOLD = 10_000  # pseudo fold index for the shared codebook


def derive_seed(root_seed: int, *path: int) -> int:
    """Stable sub-seed for (root, stream, index...) tuples."""
    return int(np.random.SeedSequence((root_seed, *path)).generate_state(1)[0])


# ---------------------------------------------------------------------------
# Corpus
# ---------------------------------------------------------------------------

@dataclass
class LabeledCorpus:
    task_kind: str
    doc_ids: list[str]
    texts: list[str]
    labels: list[tuple[str, ...]]  # aligned with doc_ids
    train_ids: list[str] | None = None
    test_ids: list[str] | None = None

    @property
    def has_split(self) -> bool:
        return self.train_ids is not None

    def __len__(self) -> int:
        return len(self.doc_ids)

    def positions(self, ids) -> list[int]:
        index = {doc_id: i for i, doc_id in enumerate(self.doc_ids)}
        return [index[i] for i in ids]


def load_corpus(path, task_kind: str) -> LabeledCorpus:
    """Parse the unified corpus TSV; see the module docstring for the format."""
    if task_kind not in _TASK_KINDS:
        raise ValueError(f"task_kind must be one of {_TASK_KINDS}, got {task_kind!r}")
    doc_ids: list[str] = []
    texts: list[str] = []
    labels: list[tuple[str, ...]] = []
    hints: list[str] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise DataFormatError(
                    path, f"expected 4 tab-separated fields, found {len(parts)}", lineno
                )
            doc_id, label_field, hint, text = parts
            if not doc_id:
                raise DataFormatError(path, "empty document id", lineno)
            if doc_id in seen:
                raise DataFormatError(path, f"duplicate document id {doc_id!r}", lineno)
            if hint not in ("train", "test", "-"):
                raise DataFormatError(
                    path, f"split hint must be train, test or -, got {hint!r}", lineno
                )
            label_tuple = tuple(dict.fromkeys(x for x in label_field.split(",") if x))
            if task_kind != "multilabel" and len(label_tuple) != 1:
                raise DataFormatError(
                    path,
                    f"{task_kind} task needs exactly one label per document, "
                    f"got {len(label_tuple)}",
                    lineno,
                )
            seen.add(doc_id)
            doc_ids.append(doc_id)
            texts.append(text)
            labels.append(label_tuple)
            hints.append(hint)
    if not doc_ids:
        raise DataFormatError(path, "no documents found")
    if task_kind == "binary":
        distinct = {l[0] for l in labels}
        if len(distinct) > 2:
            raise DataFormatError(path, f"binary task but {len(distinct)} classes present")
    train_ids = test_ids = None
    if any(h != "-" for h in hints):
        train_ids = [i for i, h in zip(doc_ids, hints) if h == "train"]
        test_ids = [i for i, h in zip(doc_ids, hints) if h == "test"]
    return LabeledCorpus(
        task_kind=task_kind,
        doc_ids=doc_ids,
        texts=texts,
        labels=labels,
        train_ids=train_ids,
        test_ids=test_ids,
    )


def make_folds(corpus: LabeledCorpus, n_folds: int, seed: int = 0):
    """Stratified folds as (train_ids, test_ids) pairs; deterministic per seed.

    Stratification keys on the full label tuple.  If any class has fewer
    members than n_folds, stratification is abandoned for a plain shuffled
    round-robin split (with a warning).  Overall fold sizes differ by at
    most one either way.
    """
    if corpus.has_split:
        raise ValueError("corpus has a predefined split; folds are not applicable")
    if n_folds < 2:
        raise ValueError("n_folds must be at least 2")
    n = len(corpus)
    if n_folds > n:
        raise ValueError(f"n_folds={n_folds} exceeds corpus size {n}")
    rng = np.random.default_rng(seed)

    by_class: dict[tuple[str, ...], list[int]] = {}
    for i, label in enumerate(corpus.labels):
        by_class.setdefault(label, []).append(i)

    fold_of = np.empty(n, dtype=np.int64)
    if min(len(v) for v in by_class.values()) < n_folds:
        warnings.warn(
            f"a class has fewer than {n_folds} members; falling back to "
            "unstratified folds",
            stacklevel=2,
        )
        order = rng.permutation(n)
        fold_of[order] = np.arange(n) % n_folds
    else:
        cursor = 0
        for label in sorted(by_class):
            members = np.array(by_class[label])
            members = members[rng.permutation(len(members))]
            for j, idx in enumerate(members):
                fold_of[idx] = (cursor + j) % n_folds
            cursor = (cursor + len(members)) % n_folds

    folds = []
    for f in range(n_folds):
        test_ids = [corpus.doc_ids[i] for i in range(n) if fold_of[i] == f]
        train_ids = [corpus.doc_ids[i] for i in range(n) if fold_of[i] != f]
        folds.append((train_ids, test_ids))
    return folds


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def accuracy(pred, gold) -> float:
    """Fraction of exactly-equal predictions."""
    pred = list(pred)
    gold = list(gold)
    if not pred:
        raise ValueError("cannot score an empty prediction list")
    if len(pred) != len(gold):
        raise ValueError(f"{len(pred)} predictions vs {len(gold)} gold labels")
    return sum(p == g for p, g in zip(pred, gold)) / len(pred)


def micro_f1(pred, gold) -> float:
    """F1 over TP/FP/FN pooled across all (document, label) pairs; 0 if P+R=0."""
    pred = [set(p) for p in pred]
    gold = [set(g) for g in gold]
    if not pred:
        raise ValueError("cannot score an empty prediction list")
    if len(pred) != len(gold):
        raise ValueError(f"{len(pred)} predictions vs {len(gold)} gold label sets")
    tp = fp = fn = 0
    for p, g in zip(pred, gold):
        tp += len(p & g)
        fp += len(p - g)
        fn += len(g - p)
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


# ---------------------------------------------------------------------------
# Experiment pipeline
# ---------------------------------------------------------------------------

@dataclass
class ExperimentSpec:
    """Fully-resolved configuration of one evaluation run."""

    embedding_path: str = ""
    corpus_path: str = ""
    k: int = 10
    alpha: float = 0.5
    C: float = 1.0
    pca_dim: int | None = None
    n_folds: int = 10
    seed: int = 0
    encoder_kind: str = "vlawe"
    codebook_scope: str = "per-fold"
    dedup_mode: str = "unique-types"
    svm_tolerance: float = 1e-3
    svm_max_iters: int = 1000
    jobs: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.C <= 0:
            raise ValueError("C must be positive")
        if self.pca_dim is not None and self.pca_dim < 1:
            raise ValueError("pca_dim must be positive when set")
        if self.encoder_kind not in _ENCODER_KINDS:
            raise ValueError(f"encoder_kind must be one of {_ENCODER_KINDS}")
        if self.codebook_scope not in _CODEBOOK_SCOPES:
            raise ValueError(f"codebook_scope must be one of {_CODEBOOK_SCOPES}")
        if self.dedup_mode not in _DEDUP_MODES:
            raise ValueError(f"dedup_mode must be one of {_DEDUP_MODES}")
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")

    def as_dict(self) -> dict:
        return {
            "embedding_path": self.embedding_path,
            "corpus_path": self.corpus_path,
            "k": self.k,
            "alpha": self.alpha,
            "C": self.C,
            "pca_dim": self.pca_dim,
            "n_folds": self.n_folds,
            "seed": self.seed,
            "encoder_kind": self.encoder_kind,
            "codebook_scope": self.codebook_scope,
            "dedup_mode": self.dedup_mode,
            "svm_tolerance": self.svm_tolerance,
            "svm_max_iters": self.svm_max_iters,
            "jobs": self.jobs,
        }


@dataclass
class FoldArtifacts:
    """Models fitted inside one fold, for leakage and determinism checks."""

    codebook: Codebook | None
    pca: object | None
    model: clf.ClassifierModel


@dataclass
class EvalReport:
    metric_name: str
    value: float
    per_fold: list[float] | None
    config_echo: dict
    fold_seconds: list[float] = field(default_factory=list, repr=False)
    fold_artifacts: list[FoldArtifacts] | None = field(default=None, repr=False)


def _needs_codebook(encoder_kind: str) -> bool:
    return encoder_kind in ("vlawe", "histogram")


@dataclass
class _PipelineData:
    """Per-document token lists and resolved vectors, computed once per run."""

    task_kind: str
    doc_ids: list[str]
    token_lists: list[list[str]]
    vectors: list[np.ndarray]
    labels: list[tuple[str, ...]]
    dim: int


def _prepare(corpus: LabeledCorpus, table: EmbeddingTable) -> _PipelineData:
    token_lists = []
    vectors = []
    for doc_id, text in zip(corpus.doc_ids, corpus.texts):
        doc, vecs = resolve(tokenize(text, source_id=doc_id), table)
        token_lists.append(doc.tokens)
        vectors.append(vecs)
    return _PipelineData(
        task_kind=corpus.task_kind,
        doc_ids=corpus.doc_ids,
        token_lists=token_lists,
        vectors=vectors,
        labels=corpus.labels,
        dim=table.dimension,
    )


def _codebook_vectors(data: _PipelineData, table: EmbeddingTable, positions, dedup_mode):
    if dedup_mode == "unique-types":
        types = sorted({t for i in positions for t in data.token_lists[i] if t in table})
        return table.matrix_for(types)
    rows = [data.vectors[i] for i in positions if data.vectors[i].shape[0]]
    if not rows:
        return np.empty((0, data.dim))
    return np.vstack(rows)


def _encode_positions(data: _PipelineData, positions, spec, cb, bow_vocab):
    kind = spec.encoder_kind
    if kind == "bow":
        return encode_bow_baseline([data.token_lists[i] for i in positions], bow_vocab)
    rows = []
    for i in positions:
        vecs = data.vectors[i]
        if kind == "vlawe":
            row = l2_normalize(power_normalize(encode_raw(vecs, cb), spec.alpha))
        elif kind == "mean":
            row = vecs.mean(axis=0) if vecs.shape[0] else np.zeros(data.dim)
        else:  # histogram
            row = encode_histogram(vecs, cb)
        rows.append(row)
    return np.vstack(rows)


def _fit_and_score(data: _PipelineData, table, spec, fold_idx, train_pos, test_pos,
                   shared_cb, collect_artifacts):
    cb = None
    if _needs_codebook(spec.encoder_kind):
        if shared_cb is not None:
            cb = shared_cb
        else:
            cb = train_codebook(
                _codebook_vectors(data, table, train_pos, spec.dedup_mode),
                spec.k,
                seed=derive_seed(spec.seed, _STREAM_KMEANS, fold_idx),
            )
    bow_vocab = None
    if spec.encoder_kind == "bow":
        bow_vocab = build_bow_vocabulary([data.token_lists[i] for i in train_pos])

    X_train = _encode_positions(data, train_pos, spec, cb, bow_vocab)
    X_test = _encode_positions(data, test_pos, spec, cb, bow_vocab)

    pca = None
    if spec.pca_dim is not None:
        pca = fit_pca(X_train, spec.pca_dim)
        X_train = apply_pca(pca, X_train)
        X_test = apply_pca(pca, X_test)

    mode = {
        "binary": "binary",
        "multiclass": "multiclass-ovr",
        "multilabel": "multilabel-ovr",
    }[data.task_kind]
    cfg = clf.ClassifierConfig(
        C=spec.C,
        tolerance=spec.svm_tolerance,
        max_iters=spec.svm_max_iters,
        seed=derive_seed(spec.seed, _STREAM_SVM, fold_idx),
    )
    if mode == "multilabel-ovr":
        y_train = [data.labels[i] for i in train_pos]
        gold = [data.labels[i] for i in test_pos]
    else:
        y_train = [data.labels[i][0] for i in train_pos]
        gold = [data.labels[i][0] for i in test_pos]

    model = clf.train(X_train, y_train, cfg, mode=mode)
    preds = clf.predict(model, X_test)
    if mode == "multilabel-ovr":
        metric = micro_f1(preds, gold)
    else:
        metric = accuracy(preds, gold)

    artifacts = FoldArtifacts(codebook=cb, pca=pca, model=model) if collect_artifacts else None
    return metric, artifacts


_FOLD_CTX: dict | None = None


def _set_fold_context(ctx: dict) -> None:
    global _FOLD_CTX
    _FOLD_CTX = ctx


def _run_fold_by_index(fold_idx: int):
    ctx = _FOLD_CTX
    started = time.perf_counter()
    train_pos, test_pos = ctx["folds"][fold_idx]
    metric, artifacts = _fit_and_score(
        ctx["data"],
        ctx["table"],
        ctx["spec"],
        fold_idx,
        train_pos,
        test_pos,
        ctx["shared_cb"],
        ctx["collect_artifacts"],
    )
    return metric, time.perf_counter() - started, artifacts


def run_experiment(
    corpus: LabeledCorpus,
    table: EmbeddingTable,
    spec: ExperimentSpec,
    collect_artifacts: bool = False,
) -> EvalReport:
    """Run the full pipeline and report the mean metric.

    Per fold (or once, on a predefined split): fit the codebook on the
    training documents' vectors, encode both sides, optionally fit PCA on
    the training embeddings, train the classifier, and score the test
    documents.  Everything that is fitted sees training data only, except
    the codebook in "shared" scope, which is fitted once on the whole
    corpus vocabulary before the folds run.
    """
    if spec.encoder_kind == "bow" and spec.pca_dim is not None:
        raise ValueError("PCA is not supported for the sparse bow encoder")
    if spec.pca_dim is not None:
        feature_dim = {"vlawe": spec.k * table.dimension, "mean": table.dimension,
                       "histogram": spec.k}[spec.encoder_kind]
        if spec.pca_dim > feature_dim:
            raise ValueError(
                f"pca_dim={spec.pca_dim} exceeds feature dimension {feature_dim}"
            )

    data = _prepare(corpus, table)

    if corpus.has_split:
        id_folds = [(corpus.train_ids, corpus.test_ids)]
        predefined = True
    else:
        id_folds = make_folds(corpus, spec.n_folds, seed=derive_seed(spec.seed, _STREAM_FOLDS))
        predefined = False
    folds = [
        (corpus.positions(train_ids), corpus.positions(test_ids))
        for train_ids, test_ids in id_folds
    ]
    for train_pos, test_pos in folds:
        if not train_pos or not test_pos:
            raise ValueError("every fold needs at least one train and one test document")

    shared_cb = None
    if spec.codebook_scope == "shared" and _needs_codebook(spec.encoder_kind):
        all_positions = list(range(len(corpus)))
        shared_cb = train_codebook(
            _codebook_vectors(data, table, all_positions, spec.dedup_mode),
            spec.k,
            seed=derive_seed(spec.seed, _STREAM_KMEANS, _SHARED_FOLD),
        )

    ctx = {
        "data": data,
        "table": table,
        "spec": spec,
        "folds": folds,
        "shared_cb": shared_cb,
        "collect_artifacts": collect_artifacts,
    }
    if spec.jobs > 1 and len(folds) > 1:
        workers = min(spec.jobs, len(folds))
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_set_fold_context, initargs=(ctx,)
        ) as pool:
            results = list(pool.map(_run_fold_by_index, range(len(folds))))
    else:
        _set_fold_context(ctx)
        results = [_run_fold_by_index(i) for i in range(len(folds))]

    metrics = [r[0] for r in results]
    seconds = [r[1] for r in results]
    artifacts = [r[2] for r in results] if collect_artifacts else None

    echo = spec.as_dict()
    echo["task_kind"] = corpus.task_kind
    echo["n_documents"] = len(corpus)
    echo["embedding_dim"] = table.dimension
    echo["split"] = "predefined" if predefined else f"{len(folds)}-fold-cv"

    return EvalReport(
        metric_name="micro_f1" if corpus.task_kind == "multilabel" else "accuracy",
        value=float(np.mean(metrics)),
        per_fold=None if predefined else [float(m) for m in metrics],
        config_echo=echo,
        fold_seconds=seconds,
        fold_artifacts=artifacts,
    )


# ---------------------------------------------------------------------------
# Report serialization
# ---------------------------------------------------------------------------

def format_report(report: EvalReport, include_timings: bool = False) -> str:
    """Deterministic key-value text rendering of a report.

    Timings are excluded unless requested so that identical runs produce
    byte-identical files.
    """
    lines = ["vlawe-report/1"]
    lines.append(f"metric: {report.metric_name}")
    lines.append(f"value: {report.value!r}")
    if report.per_fold is not None:
        lines.append(f"folds: {len(report.per_fold)}")
        lines.append("fold_values: " + " ".join(repr(v) for v in report.per_fold))
    for key in sorted(report.config_echo):
        lines.append(f"config.{key}: {report.config_echo[key]}")
    if include_timings and report.fold_seconds:
        lines.append("fold_seconds: " + " ".join(f"{s:.3f}" for s in report.fold_seconds))
        lines.append(f"total_seconds: {sum(report.fold_seconds):.3f}")
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> dict:
    """Parse `format_report` output back into a flat dict (values as strings)."""
    out: dict[str, str] = {}
    for line in text.splitlines()[1:]:
        if not line.strip():
            continue
        key, _, value = line.partition(": ")
        out[key] = value
    return out
