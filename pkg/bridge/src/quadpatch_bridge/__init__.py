"""Array bindings over quadpatch token sequences plus a toy training demo."""

from .tokens import TokenBatch, batch_sequences, load_batch, sequence_arrays, tokenize
from .toy import (
    SIDE,
    TOKEN_BUDGET,
    TokenSegmenter,
    ToyResult,
    adaptive_config,
    combined_loss,
    encode_adaptive,
    encode_uniform,
    evaluate,
    shapes_corpus,
    toy_example,
)

__version__ = "0.1.0"

__all__ = [
    "SIDE",
    "TOKEN_BUDGET",
    "TokenBatch",
    "TokenSegmenter",
    "ToyResult",
    "adaptive_config",
    "batch_sequences",
    "combined_loss",
    "encode_adaptive",
    "encode_uniform",
    "evaluate",
    "load_batch",
    "sequence_arrays",
    "shapes_corpus",
    "tokenize",
    "toy_example",
]
