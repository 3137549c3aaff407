"""Python interface to the case-encoder core.

Files are exchanged as text in the same formats the command-line tool uses
(article spec JSON, case JSON lines, weights CSV, run and qrels TSV); dense
data such as embeddings and weight matrices are NumPy arrays.
"""

from ._caseencoder import (
    CaseEncError,
    DivergenceError,
    Model,
    NoPositiveError,
    ParseError,
    Trainer,
    ValidationError,
    __version__,
    bcl_loss,
    bm25_scores,
    class_partition,
    count_branches,
    expand_articles,
    generate_corpus,
    ndcg_at_k,
    pca2d,
    relevance_weights,
    tokenize,
)

__all__ = [
    "CaseEncError",
    "DivergenceError",
    "Model",
    "NoPositiveError",
    "ParseError",
    "Trainer",
    "ValidationError",
    "__version__",
    "bcl_loss",
    "bm25_scores",
    "class_partition",
    "count_branches",
    "expand_articles",
    "generate_corpus",
    "ndcg_at_k",
    "pca2d",
    "relevance_weights",
    "tokenize",
]
