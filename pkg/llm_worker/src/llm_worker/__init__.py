"""Scoring-service worker backed by a causal language model."""

from .adapter import LMAdapter, PromptTooLongError, ValueHead
from .checkpoint import build_tiny_checkpoint, build_word_tokenizer, default_words
from .worker import WorkerCore, WorkerServer, serve

__version__ = "0.1.0"

__all__ = [
    "LMAdapter",
    "PromptTooLongError",
    "ValueHead",
    "WorkerCore",
    "WorkerServer",
    "build_tiny_checkpoint",
    "build_word_tokenizer",
    "default_words",
    "serve",
]
