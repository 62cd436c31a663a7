"""Reverse-dictionary and crossword answering with LSTM gloss encoders."""

from .corpus import CrosswordClue, DefinitionPair, clean_crosswords, load_definitions
from .embeddings import PretrainedTable, load_pretrained, rank_by_cosine
from .encoder import DefinitionModel, EncoderMode
from .errors import ConfigError, DataError, NonFiniteLossError
from .evaluator import evaluate, format_summary, rank_of_correct
from .objective import LossKind, batch_loss, finite_diff_check
from .tokenizer import MergeTable, WordVocab, learn_bpe, segment_word
from .trainer import Checkpoint, TrainConfig, load_checkpoint, save_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "Checkpoint",
    "ConfigError",
    "CrosswordClue",
    "DataError",
    "DefinitionModel",
    "DefinitionPair",
    "EncoderMode",
    "LossKind",
    "MergeTable",
    "NonFiniteLossError",
    "PretrainedTable",
    "TrainConfig",
    "WordVocab",
    "batch_loss",
    "clean_crosswords",
    "evaluate",
    "finite_diff_check",
    "format_summary",
    "learn_bpe",
    "load_checkpoint",
    "load_definitions",
    "load_pretrained",
    "rank_by_cosine",
    "rank_of_correct",
    "save_checkpoint",
    "segment_word",
    "train",
    "__version__",
]
