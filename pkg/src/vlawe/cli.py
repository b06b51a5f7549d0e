"""Command-line entry points.

Subcommands: `codebook` (fit and save a codebook), `encode` (dump document
embeddings), `eval` (cross-validated or split evaluation), `sweep-k`
(evaluate over a range of codebook sizes), `make-synth` (generate the
synthetic benchmark corpus).

Exit codes: 0 on success, 1 for usage errors, 2 for data errors (unreadable
or malformed files, dimension mismatches, invalid configurations).  Output
files are byte-identical for identical inputs and flags; timings go to
stderr only.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from .codebook import load_codebook, save_codebook, train_codebook
from .embeddings import load_table, resolve, tokenize, write_table
from .encoder import encode_histogram, encode_raw, l2_normalize, power_normalize, write_embedding_dump
from .errors import VlaweError
from .evaluation import ExperimentSpec, format_report, load_corpus, run_experiment
from .synthetic import make_sentiment_data, write_corpus_tsv

_ENV_EMBEDDINGS = "VLAWE_EMBEDDINGS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; the contract here is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _infer_task(path) -> str:
    """Guess the task kind from the label column; parse errors are deferred."""
    distinct: set[str] = set()
    multi = False
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                return "multiclass"
            labels = [x for x in parts[1].split(",") if x]
            if len(labels) > 1:
                multi = True
            distinct.update(labels)
    if multi:
        return "multilabel"
    return "binary" if len(distinct) == 2 else "multiclass"


def _embeddings_path(args) -> str:
    path = args.embeddings or os.environ.get(_ENV_EMBEDDINGS, "")
    if not path:
        raise UsageError(
            f"no embedding table: pass --embeddings or set {_ENV_EMBEDDINGS}"
        )
    return path


def _load_corpus_arg(args):
    task = args.task if args.task != "auto" else _infer_task(args.corpus)
    return load_corpus(args.corpus, task)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--embeddings",
        default=None,
        help=f"word embedding table in text format (default: ${_ENV_EMBEDDINGS})",
    )
    parser.add_argument("--dim", type=int, default=None, help="expected embedding dimension")


def _add_corpus(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--corpus", required=True, help="corpus TSV file")
    parser.add_argument(
        "--task",
        choices=("auto", "binary", "multiclass", "multilabel"),
        default="auto",
        help="task kind (default: inferred from the label column)",
    )


def _add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--alpha", type=float, default=0.5, help="power normalization exponent")
    parser.add_argument("--c", dest="C", type=float, default=1.0, help="SVM regularization C")
    parser.add_argument("--pca-dim", type=int, default=None, help="project embeddings to this dimension")
    parser.add_argument("--folds", type=int, default=10, help="cross-validation folds")
    parser.add_argument("--seed", type=int, default=0, help="root random seed")
    parser.add_argument(
        "--encoder",
        choices=("vlawe", "mean", "bow", "histogram"),
        default="vlawe",
        help="document encoder",
    )
    parser.add_argument(
        "--codebook-scope",
        choices=("per-fold", "shared"),
        default="per-fold",
        help="fit the codebook inside each fold or once on the whole corpus",
    )
    parser.add_argument(
        "--dedup-mode",
        choices=("unique-types", "all-tokens"),
        default="unique-types",
        help="codebook training set: unique word types or every token occurrence",
    )
    parser.add_argument("--jobs", type=int, default=1, help="parallel fold workers")


def _spec_from_args(args, k) -> ExperimentSpec:
    return ExperimentSpec(
        embedding_path=_embeddings_path(args),
        corpus_path=args.corpus,
        k=k,
        alpha=args.alpha,
        C=args.C,
        pca_dim=args.pca_dim,
        n_folds=args.folds,
        seed=args.seed,
        encoder_kind=args.encoder,
        codebook_scope=args.codebook_scope,
        dedup_mode=args.dedup_mode,
        jobs=args.jobs,
    )


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_codebook(args) -> int:
    table = load_table(_embeddings_path(args), expected_dim=args.dim)
    if args.corpus:
        corpus = _load_corpus_arg(args)
        if args.dedup_mode == "unique-types":
            types = sorted(
                {t for text in corpus.texts for t in tokenize(text).tokens if t in table}
            )
            vectors = table.matrix_for(types)
        else:
            rows = []
            for text in corpus.texts:
                _, vecs = resolve(tokenize(text), table)
                if vecs.shape[0]:
                    rows.append(vecs)
            vectors = np.vstack(rows) if rows else np.empty((0, table.dimension))
    else:
        vectors = np.array([table.get(w) for w in table.words()])
    started = time.perf_counter()
    cb = train_codebook(vectors, args.k, max_iters=args.max_iters,
                        rel_tolerance=args.tol, seed=args.seed)
    save_codebook(cb, args.out)
    print(f"fit k={cb.k} d={cb.dimension} on {vectors.shape[0]} vectors "
          f"in {time.perf_counter() - started:.2f}s", file=sys.stderr)
    print(f"codebook written to {args.out} "
          f"(inertia {cb.inertia!r}, {cb.iterations_run} iterations)")
    return 0


def _cmd_encode(args) -> int:
    if args.encoder == "bow":
        raise UsageError("the bow encoder is sparse and cannot be dumped as dense text")
    table = load_table(_embeddings_path(args), expected_dim=args.dim)
    corpus = _load_corpus_arg(args)
    cb = None
    if args.encoder in ("vlawe", "histogram"):
        if not args.codebook:
            raise UsageError(f"--codebook is required for the {args.encoder} encoder")
        cb = load_codebook(args.codebook)
    rows = []
    started = time.perf_counter()
    for doc_id, text in zip(corpus.doc_ids, corpus.texts):
        _, vecs = resolve(tokenize(text, source_id=doc_id), table)
        if args.encoder == "vlawe":
            row = power_normalize(encode_raw(vecs, cb), args.alpha)
            if not args.no_l2:
                row = l2_normalize(row)
        elif args.encoder == "mean":
            row = vecs.mean(axis=0) if vecs.shape[0] else np.zeros(table.dimension)
        else:
            row = encode_histogram(vecs, cb)
        rows.append(row)
    matrix = np.vstack(rows)
    meta = {
        "encoder": args.encoder,
        "alpha": args.alpha,
        "l2": not args.no_l2,
        "codebook": args.codebook or "",
        "corpus": args.corpus,
    }
    write_embedding_dump(args.out, corpus.doc_ids, matrix, meta)
    print(f"encoded {len(rows)} documents in {time.perf_counter() - started:.2f}s",
          file=sys.stderr)
    print(f"{matrix.shape[0]} x {matrix.shape[1]} embeddings written to {args.out}")
    return 0


def _cmd_eval(args) -> int:
    spec = _spec_from_args(args, args.k)
    table = load_table(spec.embedding_path, expected_dim=args.dim)
    corpus = _load_corpus_arg(args)
    started = time.perf_counter()
    report = run_experiment(corpus, table, spec)
    elapsed = time.perf_counter() - started
    text = format_report(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)
    per_fold = " ".join(f"{s:.2f}s" for s in report.fold_seconds)
    print(f"total {elapsed:.2f}s (folds: {per_fold})", file=sys.stderr)
    return 0


def _cmd_sweep_k(args) -> int:
    if args.k_min < 1 or args.k_max < args.k_min or args.k_step < 1:
        raise UsageError("need 1 <= k-min <= k-max and k-step >= 1")
    ks = list(range(args.k_min, args.k_max + 1, args.k_step))
    lines = ["k,metric,stddev"]
    for k in ks:
        spec = _spec_from_args(args, k)
        table = load_table(spec.embedding_path, expected_dim=args.dim)
        corpus = _load_corpus_arg(args)
        started = time.perf_counter()
        report = run_experiment(corpus, table, spec)
        fold_std = float(np.std(report.per_fold)) if report.per_fold else 0.0
        lines.append(f"{k},{report.value!r},{fold_std!r}")
        print(f"k={k}: {report.metric_name}={report.value:.4f} "
              f"({time.perf_counter() - started:.2f}s)", file=sys.stderr)
    text = "\n".join(lines) + "\n"
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(text)
    sys.stdout.write(text)
    return 0


def _cmd_make_synth(args) -> int:
    table, corpus = make_sentiment_data(
        n_docs=args.docs, dim=args.synth_dim, n_topics=args.topics, seed=args.seed
    )
    write_table(table, args.out_embeddings)
    write_corpus_tsv(corpus, args.out_corpus)
    print(f"wrote {len(corpus)} documents to {args.out_corpus} and "
          f"{table.vocabulary_size} x {table.dimension} vectors to {args.out_embeddings}")
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="vlawe", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("codebook", parents=[], help="fit a k-means codebook over word vectors")
    _add_common(p)
    p.add_argument("--corpus", default=None, help="restrict vocabulary to this corpus TSV")
    p.add_argument("--task", choices=("auto", "binary", "multiclass", "multilabel"),
                   default="auto")
    p.add_argument("--k", type=int, default=10, help="number of clusters")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-4, help="relative inertia tolerance")
    p.add_argument("--dedup-mode", choices=("unique-types", "all-tokens"),
                   default="unique-types")
    p.add_argument("--out", default="codebook.npz")
    p.set_defaults(func=_cmd_codebook)

    p = sub.add_parser("encode", help="encode documents and dump them as text")
    _add_common(p)
    _add_corpus(p)
    p.add_argument("--codebook", default=None, help="codebook file from the codebook command")
    p.add_argument("--encoder", choices=("vlawe", "mean", "bow", "histogram"),
                   default="vlawe")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--no-l2", action="store_true", help="skip final L2 normalization")
    p.add_argument("--out", default="embeddings.txt")
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("eval", help="run a cross-validated or split evaluation")
    _add_common(p)
    _add_corpus(p)
    p.add_argument("--k", type=int, default=10, help="codebook size")
    _add_experiment_flags(p)
    p.add_argument("--out", default="eval-report.txt")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep-k", help="evaluate across a range of codebook sizes")
    _add_common(p)
    _add_corpus(p)
    p.add_argument("--k-min", type=int, default=2)
    p.add_argument("--k-max", type=int, default=30)
    p.add_argument("--k-step", type=int, default=2)
    _add_experiment_flags(p)
    p.add_argument("--out", default="sweep.csv")
    p.set_defaults(func=_cmd_sweep_k)

    p = sub.add_parser("make-synth", help="generate a synthetic corpus and embedding table")
    p.add_argument("--docs", type=int, default=2400)
    p.add_argument("--synth-dim", type=int, default=300)
    p.add_argument("--topics", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-corpus", default="synth-corpus.tsv")
    p.add_argument("--out-embeddings", default="synth-embeddings.txt")
    p.set_defaults(func=_cmd_make_synth)

    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"vlawe: error: {exc}", file=sys.stderr)
        return 1
    except (VlaweError, ValueError, OSError) as exc:
        print(f"vlawe: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
