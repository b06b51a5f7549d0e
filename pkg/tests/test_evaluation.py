import warnings
from collections import Counter

import numpy as np
import pytest

from vlawe.embeddings import EmbeddingTable
from vlawe.errors import DataFormatError
from vlawe.evaluation import (
    ExperimentSpec,
    LabeledCorpus,
    accuracy,
    derive_seed,
    format_report,
    load_corpus,
    make_folds,
    micro_f1,
    parse_report,
    run_experiment,
)

# ---------------------------------------------------------------------------
# Corpus parsing
# ---------------------------------------------------------------------------

def _corpus_file(tmp_path, lines, name="corpus.tsv"):
    path = tmp_path / name
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


def test_load_corpus_basic(tmp_path):
    path = _corpus_file(
        tmp_path,
        [
            "d1\tpos\t-\tgreat movie",
            "d2\tneg\t-\tterrible movie",
            "",
            "d3\tpos\t-\tloved it",
        ],
    )
    corpus = load_corpus(path, "binary")
    assert corpus.doc_ids == ["d1", "d2", "d3"]
    assert corpus.labels == [("pos",), ("neg",), ("pos",)]
    assert corpus.texts[1] == "terrible movie"
    assert not corpus.has_split
    assert len(corpus) == 3


def test_load_corpus_multilabel_and_duplicate_labels(tmp_path):
    path = _corpus_file(tmp_path, ["d1\tearn,acq,earn\t-\tx", "d2\tgrain\t-\ty"])
    corpus = load_corpus(path, "multilabel")
    assert corpus.labels[0] == ("earn", "acq")
    assert corpus.labels[1] == ("grain",)


def test_load_corpus_detects_predefined_split(tmp_path):
    path = _corpus_file(
        tmp_path,
        ["d1\ta\ttrain\tx", "d2\tb\ttest\ty", "d3\ta\ttrain\tz", "d4\tb\t-\tw"],
    )
    corpus = load_corpus(path, "multiclass")
    assert corpus.has_split
    assert corpus.train_ids == ["d1", "d3"]
    assert corpus.test_ids == ["d2"]


def test_load_corpus_field_count_error_reports_line(tmp_path):
    path = _corpus_file(tmp_path, ["d1\tpos\t-\tok", "d2\tpos\tmissing text"])
    with pytest.raises(DataFormatError) as err:
        load_corpus(path, "binary")
    assert ":2:" in str(err.value)


def test_load_corpus_duplicate_id(tmp_path):
    path = _corpus_file(tmp_path, ["d1\ta\t-\tx", "d1\tb\t-\ty"])
    with pytest.raises(DataFormatError, match="duplicate"):
        load_corpus(path, "multiclass")


def test_load_corpus_bad_hint(tmp_path):
    path = _corpus_file(tmp_path, ["d1\ta\tdev\tx"])
    with pytest.raises(DataFormatError, match="hint"):
        load_corpus(path, "multiclass")


def test_load_corpus_multiple_labels_on_single_label_task(tmp_path):
    path = _corpus_file(tmp_path, ["d1\ta,b\t-\tx"])
    with pytest.raises(DataFormatError, match="exactly one label"):
        load_corpus(path, "multiclass")


def test_load_corpus_binary_with_three_classes(tmp_path):
    path = _corpus_file(tmp_path, ["d1\ta\t-\tx", "d2\tb\t-\ty", "d3\tc\t-\tz"])
    with pytest.raises(DataFormatError, match="classes"):
        load_corpus(path, "binary")


def test_load_corpus_empty_file(tmp_path):
    path = _corpus_file(tmp_path, [])
    with pytest.raises(DataFormatError, match="no documents"):
        load_corpus(path, "binary")


def test_load_corpus_rejects_unknown_task():
    with pytest.raises(ValueError, match="task_kind"):
        load_corpus("whatever.tsv", "ranking")


# ---------------------------------------------------------------------------
# Folds
# ---------------------------------------------------------------------------

def _flat_corpus(n, labels):
    return LabeledCorpus(
        task_kind="multiclass",
        doc_ids=[f"d{i}" for i in range(n)],
        texts=["x"] * n,
        labels=[(labels[i % len(labels)],) for i in range(n)],
    )


def test_make_folds_partitions_and_balances():
    corpus = _flat_corpus(47, ["a", "b", "c"])
    folds = make_folds(corpus, 5, seed=1)
    assert len(folds) == 5
    all_test = [i for _, test in folds for i in test]
    assert sorted(all_test) == sorted(corpus.doc_ids)  # exact partition
    sizes = [len(test) for _, test in folds]
    assert max(sizes) - min(sizes) <= 1
    for train, test in folds:
        assert set(train) | set(test) == set(corpus.doc_ids)
        assert not set(train) & set(test)


def test_make_folds_stratifies_each_class():
    corpus = _flat_corpus(60, ["a", "b", "c"])
    label_of = dict(zip(corpus.doc_ids, corpus.labels))
    folds = make_folds(corpus, 4, seed=0)
    for _, test in folds:
        counts = Counter(label_of[i][0] for i in test)
        assert max(counts.values()) - min(counts.values()) <= 1


def test_make_folds_deterministic_and_seed_sensitive():
    corpus = _flat_corpus(40, ["a", "b"])
    f1 = make_folds(corpus, 5, seed=3)
    f2 = make_folds(corpus, 5, seed=3)
    f3 = make_folds(corpus, 5, seed=4)
    assert f1 == f2
    assert f1 != f3


def test_make_folds_falls_back_when_class_too_small():
    corpus = _flat_corpus(21, ["a"] * 20 + ["rare"])
    with pytest.warns(UserWarning, match="fewer than"):
        folds = make_folds(corpus, 5, seed=0)
    all_test = [i for _, test in folds for i in test]
    assert sorted(all_test) == sorted(corpus.doc_ids)


def test_make_folds_rejects_predefined_split():
    corpus = LabeledCorpus(
        task_kind="binary",
        doc_ids=["a", "b"],
        texts=["x", "y"],
        labels=[("p",), ("n",)],
        train_ids=["a"],
        test_ids=["b"],
    )
    with pytest.raises(ValueError, match="predefined"):
        make_folds(corpus, 2)


def test_make_folds_validates_n_folds():
    corpus = _flat_corpus(10, ["a", "b"])
    with pytest.raises(ValueError):
        make_folds(corpus, 1)
    with pytest.raises(ValueError, match="exceeds"):
        make_folds(corpus, 11)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def test_accuracy_basic():
    assert accuracy(["a", "b", "a"], ["a", "b", "b"]) == pytest.approx(2 / 3)
    assert accuracy(["a"], ["a"]) == 1.0
    with pytest.raises(ValueError):
        accuracy([], [])
    with pytest.raises(ValueError):
        accuracy(["a"], ["a", "b"])


def test_micro_f1_pooled_counts():
    # TP=2, FP=1, FN=1 pooled over documents -> 2*2 / (2*2 + 1 + 1) = 2/3
    pred = [{"a"}, {"b", "x"}, set()]
    gold = [{"a"}, {"b"}, {"c"}]
    assert micro_f1(pred, gold) == 2 / 3


def test_micro_f1_equals_accuracy_on_singletons():
    rng = np.random.default_rng(61)
    labels = ["a", "b", "c", "d"]
    for _ in range(20):
        n = int(rng.integers(1, 30))
        pred = [labels[i] for i in rng.integers(0, 4, size=n)]
        gold = [labels[i] for i in rng.integers(0, 4, size=n)]
        assert micro_f1([{p} for p in pred], [{g} for g in gold]) == accuracy(pred, gold)


def test_micro_f1_zero_denominator():
    assert micro_f1([set(), set()], [set(), set()]) == 0.0


def test_derive_seed_stable_and_path_sensitive():
    assert derive_seed(0, 1, 2) == derive_seed(0, 1, 2)
    assert derive_seed(0, 1, 2) != derive_seed(0, 2, 1)
    assert derive_seed(0, 1) != derive_seed(1, 1)


# ---------------------------------------------------------------------------
# Experiment pipeline
# ---------------------------------------------------------------------------

def _separable_setup(n_docs=40, with_split=False):
    words = ["good", "bad", "blah", "meh"]
    vectors = np.array([[4.0, 0.0], [-4.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    table = EmbeddingTable(words, vectors)
    doc_ids, texts, labels = [], [], []
    for i in range(n_docs):
        pos = i % 2 == 0
        doc_ids.append(f"d{i}")
        texts.append(("good" if pos else "bad") + " blah meh blah")
        labels.append(("pos" if pos else "neg",))
    kwargs = {}
    if with_split:
        kwargs = {
            "train_ids": doc_ids[: n_docs // 2],
            "test_ids": doc_ids[n_docs // 2:],
        }
    corpus = LabeledCorpus(
        task_kind="binary", doc_ids=doc_ids, texts=texts, labels=labels, **kwargs
    )
    return table, corpus


def test_run_experiment_separable_corpus_is_perfect():
    table, corpus = _separable_setup()
    for kind in ("vlawe", "mean", "bow"):
        spec = ExperimentSpec(k=2, encoder_kind=kind, n_folds=4, seed=0)
        report = run_experiment(corpus, table, spec)
        assert report.metric_name == "accuracy"
        assert report.value == 1.0, kind
        assert len(report.per_fold) == 4


def test_run_experiment_residuals_survive_cluster_merging():
    # When k-means happens to place the two class-bearing words in one
    # cluster, occupancy counts become identical across classes, but the
    # residuals inside that cluster still point in opposite directions.
    table, corpus = _separable_setup()
    hist = run_experiment(
        corpus, table, ExperimentSpec(k=2, encoder_kind="histogram", n_folds=4, seed=0)
    )
    vlawe = run_experiment(
        corpus, table, ExperimentSpec(k=2, encoder_kind="vlawe", n_folds=4, seed=0)
    )
    assert vlawe.value == 1.0
    assert hist.value <= vlawe.value


def test_run_experiment_predefined_split():
    table, corpus = _separable_setup(with_split=True)
    report = run_experiment(corpus, table, ExperimentSpec(k=2, seed=0))
    assert report.per_fold is None
    assert report.value == 1.0
    assert report.config_echo["split"] == "predefined"


def test_run_experiment_is_deterministic():
    table, corpus = _separable_setup()
    spec = ExperimentSpec(k=2, n_folds=4, seed=7)
    r1 = run_experiment(corpus, table, spec)
    r2 = run_experiment(corpus, table, spec)
    assert r1.value == r2.value
    assert r1.per_fold == r2.per_fold


def test_run_experiment_jobs_do_not_change_results():
    table, corpus = _separable_setup()
    r1 = run_experiment(corpus, table, ExperimentSpec(k=2, n_folds=4, seed=1, jobs=1))
    r2 = run_experiment(corpus, table, ExperimentSpec(k=2, n_folds=4, seed=1, jobs=2))
    assert r1.value == r2.value
    assert r1.per_fold == r2.per_fold


def test_run_experiment_shared_codebook_scope():
    table, corpus = _separable_setup()
    spec = ExperimentSpec(k=2, n_folds=4, seed=0, codebook_scope="shared")
    report = run_experiment(corpus, table, spec, collect_artifacts=True)
    first = report.fold_artifacts[0].codebook
    for art in report.fold_artifacts[1:]:
        np.testing.assert_array_equal(art.codebook.centroids, first.centroids)


def test_run_experiment_per_fold_codebooks_differ_from_shared():
    table, corpus = _separable_setup()
    spec = ExperimentSpec(k=2, n_folds=4, seed=0, codebook_scope="per-fold")
    report = run_experiment(corpus, table, spec, collect_artifacts=True)
    assert report.fold_artifacts[0].codebook is not report.fold_artifacts[1].codebook


def test_run_experiment_with_pca():
    table, corpus = _separable_setup()
    spec = ExperimentSpec(k=2, n_folds=4, seed=0, pca_dim=2)
    report = run_experiment(corpus, table, spec, collect_artifacts=True)
    assert report.value == 1.0
    assert report.fold_artifacts[0].pca.components.shape == (2, 4)


def test_run_experiment_validates_pca_configuration():
    table, corpus = _separable_setup()
    with pytest.raises(ValueError, match="bow"):
        run_experiment(corpus, table, ExperimentSpec(encoder_kind="bow", pca_dim=2))
    with pytest.raises(ValueError, match="exceeds"):
        run_experiment(corpus, table, ExperimentSpec(k=2, pca_dim=5, n_folds=4))


def test_run_experiment_multiclass_and_multilabel():
    words = ["alpha", "beta", "gamma", "pad"]
    vectors = np.array([[4.0, 0.0], [-4.0, 0.0], [0.0, 4.0], [0.1, 0.1]])
    table = EmbeddingTable(words, vectors)
    n = 30
    doc_ids = [f"d{i}" for i in range(n)]
    texts = [["alpha pad", "beta pad", "gamma pad"][i % 3] for i in range(n)]
    mc = LabeledCorpus(
        task_kind="multiclass",
        doc_ids=doc_ids,
        texts=texts,
        labels=[(("a", "b", "c")[i % 3],) for i in range(n)],
    )
    rep = run_experiment(mc, table, ExperimentSpec(k=2, n_folds=3, seed=0))
    assert rep.metric_name == "accuracy"
    assert rep.value == 1.0

    ml = LabeledCorpus(
        task_kind="multilabel",
        doc_ids=doc_ids,
        texts=[["alpha pad", "beta pad", "alpha beta"][i % 3] for i in range(n)],
        labels=[(("a",), ("b",), ("a", "b"))[i % 3] for i in range(n)],
    )
    rep = run_experiment(ml, table, ExperimentSpec(encoder_kind="bow", n_folds=3, seed=0))
    assert rep.metric_name == "micro_f1"
    assert rep.value == 1.0


def test_run_experiment_errors_on_empty_fold_side():
    table, corpus = _separable_setup(with_split=True)
    corpus.test_ids.clear()
    with pytest.raises(ValueError, match="at least one"):
        run_experiment(corpus, table, ExperimentSpec(k=2))


def test_test_fold_contents_do_not_affect_fitted_state():
    table, corpus = _separable_setup()
    spec = ExperimentSpec(k=2, n_folds=4, seed=5)
    base = run_experiment(corpus, table, spec, collect_artifacts=True)

    fold_ids = make_folds(corpus, 4, seed=derive_seed(5, 1))
    tampered_texts = list(corpus.texts)
    target_fold = 2
    pos = corpus.positions(fold_ids[target_fold][1])
    for p in pos:
        tampered_texts[p] = "meh meh blah"
    tampered = LabeledCorpus(
        task_kind="binary",
        doc_ids=corpus.doc_ids,
        texts=tampered_texts,
        labels=corpus.labels,
    )
    other = run_experiment(tampered, table, spec, collect_artifacts=True)

    a = base.fold_artifacts[target_fold]
    b = other.fold_artifacts[target_fold]
    np.testing.assert_array_equal(a.codebook.centroids, b.codebook.centroids)
    np.testing.assert_array_equal(a.model.weights, b.model.weights)
    np.testing.assert_array_equal(a.model.biases, b.model.biases)


def test_experiment_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(k=0)
    with pytest.raises(ValueError):
        ExperimentSpec(alpha=1.5)
    with pytest.raises(ValueError):
        ExperimentSpec(C=0.0)
    with pytest.raises(ValueError):
        ExperimentSpec(encoder_kind="transformer")
    with pytest.raises(ValueError):
        ExperimentSpec(codebook_scope="global")
    with pytest.raises(ValueError):
        ExperimentSpec(dedup_mode="sometimes")
    with pytest.raises(ValueError):
        ExperimentSpec(jobs=0)
    with pytest.raises(ValueError):
        ExperimentSpec(pca_dim=0)


def test_format_report_roundtrip_and_stability():
    table, corpus = _separable_setup()
    spec = ExperimentSpec(k=2, n_folds=4, seed=0)
    r1 = run_experiment(corpus, table, spec)
    r2 = run_experiment(corpus, table, spec)
    t1, t2 = format_report(r1), format_report(r2)
    assert t1 == t2  # byte-identical for identical runs
    assert "fold_seconds" not in t1  # timings stay out of deterministic output
    parsed = parse_report(t1)
    assert parsed["metric"] == "accuracy"
    assert float(parsed["value"]) == r1.value
    assert parsed["config.k"] == "2"
    with_timings = format_report(r1, include_timings=True)
    assert "fold_seconds" in with_timings
