"""MOS regression heads (FCN, CNN, concat and BATCH fusion) over pooled embeddings."""

from ._batchmos import (
    BHATTACHARYYA_EPSILON,
    ClipLabel,
    ConfigError,
    CorruptionError,
    DataConsistencyError,
    DimensionError,
    DivergenceError,
    DomainError,
    EmbeddingTable,
    Error,
    FormatError,
    IoError,
    Model,
    ValidationError,
    bhattacharyya_distance,
    evaluate,
    gate,
    load_labels,
    predict,
    read_embeddings,
    softmax,
    synth,
    train,
    write_embeddings,
    write_labels,
)

__version__ = "0.1.0"
