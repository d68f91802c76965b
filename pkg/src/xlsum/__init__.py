"""Non-neural stages of a cross-lingual abstractive summarization pipeline.

Embedding alignment, corpus construction, a character-level language model,
beam-hypothesis reranking and Table-style evaluation reports.
"""

__version__ = "0.1.0"

from xlsum.errors import (
    FormatError,
    HypothesisFormatError,
    LexiconFormatError,
    ModelFormatError,
    ModelVersionError,
    VecFormatError,
)

__all__ = [
    "__version__",
    "FormatError",
    "HypothesisFormatError",
    "LexiconFormatError",
    "ModelFormatError",
    "ModelVersionError",
    "VecFormatError",
]
