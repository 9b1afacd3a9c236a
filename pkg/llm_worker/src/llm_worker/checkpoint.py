"""Tiny local causal-LM checkpoints for CPU-only conformance runs.

The default checkpoint is a randomly initialized two-layer GPT-2 with a
word-level tokenizer over the textual environment's English vocabulary; it is
deterministic given the seed. Any Hugging Face causal-LM directory works in
its place for real experiments.
"""
from __future__ import annotations

from importlib import resources
from pathlib import Path

import torch
from tokenizers import Tokenizer
from tokenizers.models import WordLevel
from tokenizers.pre_tokenizers import Punctuation, Sequence, Whitespace
from transformers import GPT2Config, GPT2LMHeadModel, PreTrainedTokenizerFast

UNK_TOKEN = "<unk>"


def default_words() -> list[str]:
    text = resources.files("llm_worker").joinpath("data/vocab_words.txt").read_text("utf-8")
    return [line for line in text.splitlines() if line]


def build_word_tokenizer(words: list[str]) -> PreTrainedTokenizerFast:
    if UNK_TOKEN not in words:
        words = [UNK_TOKEN, *words]
    vocab = {w: i for i, w in enumerate(words)}
    model = WordLevel(vocab=vocab, unk_token=UNK_TOKEN)
    tokenizer = Tokenizer(model)
    tokenizer.pre_tokenizer = Sequence([Whitespace(), Punctuation()])
    return PreTrainedTokenizerFast(
        tokenizer_object=tokenizer,
        unk_token=UNK_TOKEN,
        pad_token=UNK_TOKEN,
    )


def build_tiny_checkpoint(
    out_dir: str | Path,
    seed: int = 0,
    n_embd: int = 32,
    n_layer: int = 2,
    n_head: int = 2,
    n_positions: int = 512,
) -> Path:
    """Write a deterministic tiny model + tokenizer in Hugging Face layout."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    words = default_words()
    tokenizer = build_word_tokenizer(words)
    config = GPT2Config(
        vocab_size=len(tokenizer),
        n_embd=n_embd,
        n_layer=n_layer,
        n_head=n_head,
        n_positions=n_positions,
        bos_token_id=0,
        eos_token_id=0,
    )
    torch.manual_seed(seed)
    model = GPT2LMHeadModel(config)
    model.save_pretrained(out)
    tokenizer.save_pretrained(out)
    return out
