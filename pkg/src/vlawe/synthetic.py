"""Synthetic sentiment corpus with a matching embedding table.

Generates a vocabulary whose geometry mirrors what pre-trained vectors
look like on review text: content words scatter widely and cluster by
topic, frequent filler words appear everywhere, and a compact group of
polarity-bearing words sits in its own region of the space, offset
positively or negatively along one direction.  Documents are bags of
topic and filler words plus a few polarity words matching the document's
label, with a small flip probability so the task is not separable.

The point of the construction: a document's mean vector mixes the
polarity offset with the projections of every content word onto the
polarity direction, and with a vocabulary larger than the dimension that
interference cannot be removed by any linear model.  Residual aggregation
against a codebook isolates the polarity words in their own cluster
block, where their residuals carry the offset and nothing else, and it
does so for any codebook size because the polarity region is compact and
far from the rest of the vocabulary.  That gives the end-to-end tests a
corpus where the gap between the two encoders is real, insensitive to k,
and stable across seeds.
"""

from __future__ import annotations

import numpy as np

from .embeddings import EmbeddingTable
from .evaluation import LabeledCorpus


def _zipf_weights(n: int, exponent: float = 1.1) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1) ** exponent
    return w / w.sum()


def make_sentiment_data(
    n_docs: int = 2400,
    dim: int = 300,
    n_topics: int = 8,
    words_per_topic: int = 150,
    n_filler: int = 150,
    n_polarity: int = 40,
    topic_scale: float = 1.0,
    word_jitter: float = 1.5,
    polarity_jitter: float = 0.8,
    polarity_offset: float = 2.2,
    isolation_sigma: float = 6.0,
    doc_len_range: tuple[int, int] = (18, 32),
    polarity_tokens_range: tuple[int, int] = (2, 5),
    filler_fraction: float = 0.45,
    flip_prob: float = 0.08,
    oov_prob: float = 0.02,
    seed: int = 0,
) -> tuple[EmbeddingTable, LabeledCorpus]:
    """Build (embedding table, binary corpus); deterministic per seed.

    `isolation_sigma` places the polarity-word region this many content
    standard deviations away from the content words, which is what keeps
    the polarity words in a single shared cluster at any codebook size.
    """
    if n_docs < 2 or n_docs % 2:
        raise ValueError("n_docs must be an even number >= 2")
    rng = np.random.default_rng(seed)

    words: list[str] = []
    vectors: list[np.ndarray] = []

    centers = rng.normal(0.0, topic_scale, size=(n_topics, dim))
    topic_words: list[list[str]] = []
    for t in range(n_topics):
        group = []
        for i in range(words_per_topic):
            word = f"t{t}w{i}"
            group.append(word)
            words.append(word)
            vectors.append(centers[t] + rng.normal(0.0, word_jitter, size=dim))
        topic_words.append(group)

    filler_words = [f"f{i}" for i in range(n_filler)]
    for word in filler_words:
        words.append(word)
        vectors.append(rng.normal(0.0, word_jitter, size=dim))

    # compact polarity region, far from the content words; words come in
    # antonym pairs that share a base vector and differ only by the offset,
    # so any sub-clustering of the region keeps the two polarities balanced
    # and their residuals keep the offset
    away = rng.normal(0.0, 1.0, size=dim)
    away /= np.linalg.norm(away)
    content_radius = np.sqrt((topic_scale**2 + word_jitter**2) * dim)
    region_center = isolation_sigma * content_radius * away
    direction = rng.normal(0.0, 1.0, size=dim)
    direction -= (direction @ away) * away
    direction /= np.linalg.norm(direction)
    pos_words = [f"p{i}" for i in range(n_polarity)]
    neg_words = [f"q{i}" for i in range(n_polarity)]
    pair_jitter = 0.25
    for pos_word, neg_word in zip(pos_words, neg_words):
        base = region_center + rng.normal(0.0, polarity_jitter, size=dim)
        words.append(pos_word)
        vectors.append(base + polarity_offset * direction
                       + rng.normal(0.0, pair_jitter, size=dim))
        words.append(neg_word)
        vectors.append(base - polarity_offset * direction
                       + rng.normal(0.0, pair_jitter, size=dim))

    table = EmbeddingTable(words, np.array(vectors))

    filler_p = _zipf_weights(n_filler)
    lo, hi = doc_len_range
    plo, phi = polarity_tokens_range

    doc_ids: list[str] = []
    texts: list[str] = []
    labels: list[tuple[str, ...]] = []
    half = n_docs // 2
    label_seq = ["pos"] * half + ["neg"] * half
    order = rng.permutation(n_docs)
    oov_counter = 0
    for i in range(n_docs):
        label = label_seq[order[i]]
        length = int(rng.integers(lo, hi + 1))
        n_pol = min(int(rng.integers(plo, phi + 1)), length)
        topic = int(rng.integers(n_topics))
        tokens: list[str] = []
        for _ in range(n_pol):
            polarity = label if rng.random() >= flip_prob else (
                "neg" if label == "pos" else "pos"
            )
            pool = pos_words if polarity == "pos" else neg_words
            tokens.append(pool[int(rng.integers(n_polarity))])
        for _ in range(length - n_pol):
            if rng.random() < filler_fraction:
                tokens.append(filler_words[int(rng.choice(n_filler, p=filler_p))])
            else:
                tokens.append(topic_words[topic][int(rng.integers(words_per_topic))])
        for j in range(length):
            if rng.random() < oov_prob:
                tokens[j] = f"zz{oov_counter}"
                oov_counter += 1
        tokens = [tokens[j] for j in rng.permutation(length)]
        doc_ids.append(f"doc{i:05d}")
        texts.append(" ".join(tokens))
        labels.append((label,))

    corpus = LabeledCorpus(
        task_kind="binary", doc_ids=doc_ids, texts=texts, labels=labels
    )
    return table, corpus


def write_corpus_tsv(corpus: LabeledCorpus, path) -> None:
    """Write a corpus in the standard TSV format (split hints included)."""
    train = set(corpus.train_ids or ())
    test = set(corpus.test_ids or ())
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id, label, text in zip(corpus.doc_ids, corpus.labels, corpus.texts):
            hint = "train" if doc_id in train else "test" if doc_id in test else "-"
            fh.write(f"{doc_id}\t{','.join(label)}\t{hint}\t{text}\n")
