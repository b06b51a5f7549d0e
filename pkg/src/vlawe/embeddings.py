"""Pre-trained word-embedding tables and tokenization.

The table format is the plain-text one used by common pre-trained vector
distributions: one word per line followed by its components, all
whitespace-separated.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

import numpy as np

from .errors import DataFormatError

# Maximal runs of alphanumeric characters; underscores count as separators.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class EmbeddingTable:
    """Immutable word -> d-dimensional vector map.

    The vector matrix is stored read-only so the table can be shared freely
    across worker processes and threads after loading.
    """

    def __init__(self, words, vectors, duplicates_skipped: int = 0):
        vectors = np.ascontiguousarray(vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise ValueError("vectors must be a 2-D array of shape (n_words, d)")
        if len(words) != vectors.shape[0]:
            raise ValueError(
                f"{len(words)} words but {vectors.shape[0]} vector rows"
            )
        index = {}
        for i, word in enumerate(words):
            if word in index:
                raise ValueError(f"duplicate word in table: {word!r}")
            index[word] = i
        vectors.setflags(write=False)
        self._index = index
        self._vectors = vectors
        self.duplicates_skipped = duplicates_skipped

    @property
    def dimension(self) -> int:
        return self._vectors.shape[1]

    @property
    def vocabulary_size(self) -> int:
        return len(self._index)

    def __contains__(self, word: str) -> bool:
        return word in self._index

    def __len__(self) -> int:
        return len(self._index)

    def get(self, word: str) -> np.ndarray:
        """Vector for `word` (read-only view). KeyError if absent."""
        return self._vectors[self._index[word]]

    def words(self) -> list[str]:
        return list(self._index)

    def matrix_for(self, words) -> np.ndarray:
        """Stack vectors for `words` (all must be present) into an (n, d) matrix."""
        rows = [self._index[w] for w in words]
        if not rows:
            return np.empty((0, self.dimension), dtype=np.float64)
        return self._vectors[rows]


@dataclass
class TokenizedDocument:
    """A document as an ordered token list, optionally resolved against a table.

    `known_tokens` is None until `resolve` has been applied; afterwards it is
    the order-preserving sublist of `tokens` present in the table.
    """

    tokens: list[str]
    source_id: str = ""
    known_tokens: list[str] | None = None

    @property
    def oov_count(self) -> int:
        if self.known_tokens is None:
            raise ValueError("document has not been resolved against a table")
        return len(self.tokens) - len(self.known_tokens)


def tokenize(text: str, source_id: str = "") -> TokenizedDocument:
    """Lowercase and split on maximal runs of non-alphanumeric characters."""
    return TokenizedDocument(tokens=_TOKEN_RE.findall(text.lower()), source_id=source_id)


def resolve(doc: TokenizedDocument, table: EmbeddingTable):
    """Look up each token; drop out-of-vocabulary tokens.

    Returns `(resolved_doc, vectors)` where `vectors` is an
    (len(known_tokens), d) matrix aligned 1:1 with `known_tokens`.
    Idempotent: resolving an already-resolved document gives the same result.
    """
    known = [t for t in doc.tokens if t in table]
    return replace(doc, known_tokens=known), table.matrix_for(known)


def load_table(path, expected_dim: int | None = None) -> EmbeddingTable:
    """Parse a whitespace-separated text embedding file into a table.

    Each line is `word v1 ... vd`.  The dimension is taken from
    `expected_dim` when given, otherwise inferred from the first line.
    Lines with extra leading fields are treated as multi-token words (some
    distributed vector files contain them); the last d fields must always
    parse as numbers.  Duplicate words keep their first occurrence and are
    counted in `table.duplicates_skipped`.

    Raises DataFormatError (with the line number) on rows with too few
    components, non-numeric components, or an empty file.
    """
    if expected_dim is not None and expected_dim < 1:
        raise ValueError("expected_dim must be a positive integer")
    words: list[str] = []
    rows: list[np.ndarray] = []
    seen: set[str] = set()
    duplicates = 0
    dim = expected_dim
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = line.split()
            if not fields:
                continue
            if dim is None:
                dim = len(fields) - 1
                if dim < 1:
                    raise DataFormatError(path, "line has no vector components", lineno)
            if len(fields) < dim + 1:
                raise DataFormatError(
                    path,
                    f"expected {dim} vector components, found {len(fields) - 1}",
                    lineno,
                )
            word = " ".join(fields[: len(fields) - dim])
            try:
                vec = np.array([float(x) for x in fields[len(fields) - dim:]])
            except ValueError:
                raise DataFormatError(path, "non-numeric vector component", lineno) from None
            if word in seen:
                duplicates += 1
                continue
            seen.add(word)
            words.append(word)
            rows.append(vec)
    if not words:
        raise DataFormatError(path, "no embedding rows found")
    return EmbeddingTable(words, np.vstack(rows), duplicates_skipped=duplicates)


def write_table(table: EmbeddingTable, path) -> None:
    """Write a table back to the text format read by `load_table`."""
    with open(path, "w", encoding="utf-8") as fh:
        for word in table.words():
            vec = table.get(word)
            fh.write(word + " " + " ".join(f"{x:.17g}" for x in vec) + "\n")
