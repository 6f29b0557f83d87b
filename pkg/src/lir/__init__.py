"""Language information removal for multilingual embeddings.

Fit per-language identity components (the leading right singular vectors of
a language's embedding matrix), remove them from embeddings by projection,
and measure the effect with retrieval, transfer-classification, and PCA
harnesses.
"""

from .core import (
    ComponentBasis,
    EmbeddingRecord,
    EvalReport,
    LanguageMatrix,
    RetrievalDataset,
    SvdResult,
    TransferReport,
    check_collection,
    corpus_fingerprint,
)
from .errors import (
    ConfigError,
    CorruptBasis,
    DatasetError,
    DegenerateLabels,
    DimensionError,
    DuplicateKey,
    FormatError,
    InvalidMatrix,
    InvalidVector,
    LanguageMismatch,
    LirError,
    MissingBasis,
    NoRelevantError,
    NumericalFailure,
    ParseError,
    RankError,
    TruncatedFile,
    ZeroVectorError,
)
from .evaluation import (
    LogisticConfig,
    RankedList,
    average_precision,
    evaluate_retrieval,
    evaluate_transfer,
    export_projection,
    logistic_loss,
    predict_logistic,
    rank_candidates,
    train_logistic,
)
from .linalg import jacobi_eigh, pca_project, project_out, project_out_scaled, svd
from .removal import (
    BatchRemoval,
    RemovalMode,
    fit_components,
    fit_decomposition,
    remove,
    remove_batch,
)
from .synth import SynthConfig, SynthResult, generate

__version__ = "0.1.0"

__all__ = [
    "BatchRemoval",
    "ComponentBasis",
    "ConfigError",
    "CorruptBasis",
    "DatasetError",
    "DegenerateLabels",
    "DimensionError",
    "DuplicateKey",
    "EmbeddingRecord",
    "EvalReport",
    "FormatError",
    "InvalidMatrix",
    "InvalidVector",
    "LanguageMatrix",
    "LanguageMismatch",
    "LirError",
    "LogisticConfig",
    "MissingBasis",
    "NoRelevantError",
    "NumericalFailure",
    "ParseError",
    "RankError",
    "RankedList",
    "RemovalMode",
    "RetrievalDataset",
    "SvdResult",
    "SynthConfig",
    "SynthResult",
    "TransferReport",
    "TruncatedFile",
    "ZeroVectorError",
    "average_precision",
    "check_collection",
    "corpus_fingerprint",
    "evaluate_retrieval",
    "evaluate_transfer",
    "export_projection",
    "fit_components",
    "fit_decomposition",
    "generate",
    "jacobi_eigh",
    "logistic_loss",
    "pca_project",
    "predict_logistic",
    "project_out",
    "project_out_scaled",
    "rank_candidates",
    "remove",
    "remove_batch",
    "svd",
    "train_logistic",
]
