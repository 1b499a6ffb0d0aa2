"""Transformer encoding with the pooling rules the linker's representations
expect.

Names: run the surrounding sentence (mentions) or the bare name (entities)
through the encoder, take the lowest-layer vectors of the name's sub-words,
and max-pool. Contexts: grow a sentence window symmetrically around the
mention's sentence (or take the leading description sub-words) up to the
sub-word budget and use the top-layer first-position vector.

"Lowest layer" defaults to the first transformer block's output, which is
contextual while staying lowest; set lowest_layer="embeddings" for the
static embedding reading.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .pooling import AlignmentError, build_window, max_pool, span_token_indices


@dataclass(frozen=True)
class BridgeConfig:
    model: str = "bert-base-multilingual-cased"
    max_subwords: int = 512
    lowest_layer: str = "first_block"  # first_block | embeddings
    batch_size: int = 16
    device: str = "cpu"

    def __post_init__(self):
        if self.lowest_layer not in ("first_block", "embeddings"):
            raise ValueError(f"unknown lowest_layer {self.lowest_layer!r}")
        if self.max_subwords < 8 or self.batch_size < 1:
            raise ValueError("max_subwords must be >= 8 and batch_size >= 1")


class TransformerBridge:
    def __init__(self, model, tokenizer, cfg: BridgeConfig):
        model_limit = getattr(model.config, "max_position_embeddings", cfg.max_subwords)
        if cfg.max_subwords > model_limit:
            raise ValueError(f"max_subwords {cfg.max_subwords} exceeds the "
                             f"encoder limit {model_limit}")
        self.model = model.to(cfg.device).eval()
        self.tokenizer = tokenizer
        self.cfg = cfg
        self.max_input_len = 0  # largest forward input seen, for budget audits

    @classmethod
    def from_pretrained(cls, cfg: BridgeConfig) -> "TransformerBridge":
        from transformers import AutoModel, AutoTokenizer

        model = AutoModel.from_pretrained(cfg.model)
        tokenizer = AutoTokenizer.from_pretrained(cfg.model, use_fast=True)
        return cls(model, tokenizer, cfg)

    @property
    def dim(self) -> int:
        return int(self.model.config.hidden_size)

    # -- forward ------------------------------------------------------------

    def _forward(self, ids_lists: list[list[int]]):
        """Padded batch forward. Returns (last_hidden, lowest, lengths) as
        numpy arrays of shape (n, maxlen, dim)."""
        pad_id = self.tokenizer.pad_token_id or 0
        n = len(ids_lists)
        maxlen = max(len(ids) for ids in ids_lists)
        self.max_input_len = max(self.max_input_len, maxlen)
        input_ids = torch.full((n, maxlen), pad_id, dtype=torch.long)
        attention = torch.zeros((n, maxlen), dtype=torch.long)
        for i, ids in enumerate(ids_lists):
            input_ids[i, :len(ids)] = torch.tensor(ids, dtype=torch.long)
            attention[i, :len(ids)] = 1
        with torch.no_grad():
            out = self.model(input_ids=input_ids.to(self.cfg.device),
                             attention_mask=attention.to(self.cfg.device),
                             output_hidden_states=True)
        layer = 1 if self.cfg.lowest_layer == "first_block" else 0
        last = out.last_hidden_state.cpu().numpy().astype(np.float32)
        lowest = out.hidden_states[layer].cpu().numpy().astype(np.float32)
        return last, lowest, [len(ids) for ids in ids_lists]

    # -- input builders (public so budgets are testable) ---------------------

    def _sentence_ids(self, text: str) -> list[int]:
        return self.tokenizer(text, add_special_tokens=False)["input_ids"]

    def window_ids(self, sentences: list[str], center: int) -> list[int]:
        """[CLS] + symmetric window around the center sentence + [SEP],
        within the max_subwords budget."""
        token_lists = [self._sentence_ids(s) for s in sentences]
        budget = self.cfg.max_subwords - 2
        window = build_window(token_lists, center, budget)
        return [self.tokenizer.cls_token_id] + window + [self.tokenizer.sep_token_id]

    def description_ids(self, text: str) -> list[int]:
        """[CLS] + first max_subwords-2 description sub-words + [SEP]."""
        ids = self._sentence_ids(text)[:self.cfg.max_subwords - 2]
        return [self.tokenizer.cls_token_id] + ids + [self.tokenizer.sep_token_id]

    def _name_encoding(self, text: str, sentence: str | None):
        """(input ids, sub-word positions of the name) for one name."""
        if sentence is None:
            enc = self.tokenizer(text, truncation=True,
                                 max_length=self.cfg.max_subwords,
                                 return_special_tokens_mask=True)
            span = [i for i, m in enumerate(enc["special_tokens_mask"]) if not m]
            if not span:
                raise AlignmentError(f"name {text!r} yields no sub-words")
            return enc["input_ids"], span
        start = sentence.find(text)
        if start < 0:
            raise AlignmentError(f"surface {text!r} not found in its sentence")
        enc = self.tokenizer(sentence, truncation=True,
                             max_length=self.cfg.max_subwords,
                             return_offsets_mapping=True)
        span = span_token_indices(enc["offset_mapping"], start, start + len(text))
        if not span:
            raise AlignmentError(f"surface {text!r} has no aligned sub-words "
                                 "(possibly truncated away)")
        return enc["input_ids"], span

    # -- single-item encoders -------------------------------------------------

    def encode_name(self, text: str, sentence: str | None = None) -> np.ndarray:
        """Max-pooled lowest-layer sub-word vectors of the name, computed in
        sentence context for mentions and from the bare name for entities."""
        if not text:
            return np.zeros(self.dim, dtype=np.float32)
        ids, span = self._name_encoding(text, sentence)
        _, lowest, _ = self._forward([ids])
        return max_pool(lowest[0][span])

    def encode_mention_context(self, sentences: list[str], center: int) -> np.ndarray:
        if not sentences or not any(s for s in sentences):
            return np.zeros(self.dim, dtype=np.float32)
        ids = self.window_ids(sentences, center)
        last, _, _ = self._forward([ids])
        return last[0][0]

    def encode_description(self, text: str) -> np.ndarray:
        if not text:
            return np.zeros(self.dim, dtype=np.float32)
        last, _, _ = self._forward([self.description_ids(text)])
        return last[0][0]

    # -- batched encoders ------------------------------------------------------

    def encode_names(self, items: list[tuple[str, str | None]]) -> list[np.ndarray]:
        """Batched encode_name over (text, sentence-or-None) pairs."""
        prepared = []
        for text, sentence in items:
            if not text:
                prepared.append(None)
            else:
                prepared.append(self._name_encoding(text, sentence))
        out: list[np.ndarray] = [None] * len(items)
        todo = [i for i, p in enumerate(prepared) if p is not None]
        for chunk_start in range(0, len(todo), self.cfg.batch_size):
            chunk = todo[chunk_start:chunk_start + self.cfg.batch_size]
            _, lowest, _ = self._forward([prepared[i][0] for i in chunk])
            for row, i in enumerate(chunk):
                out[i] = max_pool(lowest[row][prepared[i][1]])
        for i, p in enumerate(prepared):
            if p is None:
                out[i] = np.zeros(self.dim, dtype=np.float32)
        return out

    def encode_cls_batch(self, ids_lists: list[list[int] | None]) -> list[np.ndarray]:
        """Batched top-layer first-position vectors; None entries yield
        zero vectors."""
        out: list[np.ndarray] = [None] * len(ids_lists)
        todo = [i for i, ids in enumerate(ids_lists) if ids is not None]
        for chunk_start in range(0, len(todo), self.cfg.batch_size):
            chunk = todo[chunk_start:chunk_start + self.cfg.batch_size]
            last, _, _ = self._forward([ids_lists[i] for i in chunk])
            for row, i in enumerate(chunk):
                out[i] = last[row][0]
        for i, ids in enumerate(ids_lists):
            if ids is None:
                out[i] = np.zeros(self.dim, dtype=np.float32)
        return out
