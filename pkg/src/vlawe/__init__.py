"""Document embeddings from aggregated word-vector residuals.

Pipeline: cluster the word vectors of a corpus vocabulary with k-means,
represent each document by the concatenated per-cluster sums of
(word vector - centroid) residuals, apply signed power and L2
normalization, and classify with a linear max-margin model.
"""

from .codebook import Codebook, CodebookTrainingSet, assign, assign_many, load_codebook, save_codebook, train_codebook
from .classifier import ClassifierConfig, ClassifierModel, decision_scores, load_model, predict, save_model, train
from .embeddings import EmbeddingTable, TokenizedDocument, load_table, resolve, tokenize, write_table
from .encoder import (
    DocumentEmbedding,
    EncoderConfig,
    PcaProjection,
    apply_pca,
    encode,
    encode_mean_baseline,
    encode_raw,
    fit_pca,
    l2_normalize,
    power_normalize,
)
from .errors import DataFormatError, DimensionMismatchError, VlaweError
from .evaluation import (
    EvalReport,
    ExperimentSpec,
    LabeledCorpus,
    accuracy,
    derive_seed,
    format_report,
    load_corpus,
    make_folds,
    micro_f1,
    run_experiment,
)
from .synthetic import make_sentiment_data, write_corpus_tsv

__version__ = "0.1.0"

__all__ = [
    "Codebook",
    "CodebookTrainingSet",
    "ClassifierConfig",
    "ClassifierModel",
    "DataFormatError",
    "DimensionMismatchError",
    "DocumentEmbedding",
    "EmbeddingTable",
    "EncoderConfig",
    "EvalReport",
    "ExperimentSpec",
    "LabeledCorpus",
    "PcaProjection",
    "TokenizedDocument",
    "VlaweError",
    "accuracy",
    "apply_pca",
    "assign",
    "assign_many",
    "decision_scores",
    "derive_seed",
    "encode",
    "encode_mean_baseline",
    "encode_raw",
    "fit_pca",
    "format_report",
    "l2_normalize",
    "load_codebook",
    "load_corpus",
    "load_model",
    "load_table",
    "make_folds",
    "make_sentiment_data",
    "micro_f1",
    "power_normalize",
    "predict",
    "resolve",
    "run_experiment",
    "save_codebook",
    "save_model",
    "tokenize",
    "train",
    "train_codebook",
    "write_corpus_tsv",
    "write_table",
]
