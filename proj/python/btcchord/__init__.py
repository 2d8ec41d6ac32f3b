"""Chord recognition with a bi-directional transformer: python surface."""

from ._core import (
    BtcError,
    Model,
    canonical_chord,
    chord_index,
    evaluate,
    index_chord,
    param_count,
    positional_encoding,
    synth_dataset,
    transpose_chord,
    vocab_size,
    wcsr,
)

__all__ = [
    "BtcError",
    "Model",
    "canonical_chord",
    "chord_index",
    "evaluate",
    "index_chord",
    "param_count",
    "positional_encoding",
    "synth_dataset",
    "transpose_chord",
    "vocab_size",
    "wcsr",
]
