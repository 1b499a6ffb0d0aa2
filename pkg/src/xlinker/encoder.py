"""Type vocabularies, representation bundles, and the hash test encoder.

The trigram hash encoder stands in for a multilingual sentence encoder: it
projects byte trigrams into a signed random direction each, so surface
similarity survives as cosine similarity while needing no model weights.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .data import Dataset, Entity, KnowledgeBase, Mention
from .errors import ConfigError, DataError
from .store import EmbeddingStore

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK = 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True)
class TypeVocab:
    tags: tuple[str, ...]  # index = position
    min_count: int

    def __len__(self) -> int:
        return len(self.tags)

    def index(self, tag: str) -> int | None:
        try:
            return self.tags.index(tag)
        except ValueError:
            return None


@dataclass(frozen=True)
class RepresentationBundle:
    name_vec: np.ndarray
    context_vec: np.ndarray
    type_vec: np.ndarray


def build_type_vocab(ds: Dataset, kb: KnowledgeBase,
                     min_count: int = 100) -> tuple[TypeVocab, TypeVocab]:
    """Tag vocabularies counted over training mentions and their gold
    entities' types; a tag is kept only when its count exceeds min_count.
    """
    m_counts: Counter[str] = Counter()
    e_counts: Counter[str] = Counter()
    for m in ds.mentions:
        m_counts[m.mention_type] += 1
        if not m.is_nil():
            for t in kb.get(m.gold).types:
                e_counts[t] += 1
    m_tags = tuple(sorted(t for t, c in m_counts.items() if c > min_count))
    e_tags = tuple(sorted(t for t, c in e_counts.items() if c > min_count))
    return TypeVocab(m_tags, min_count), TypeVocab(e_tags, min_count)


def type_onehot(tags: list[str] | tuple[str, ...], vocab: TypeVocab) -> np.ndarray:
    vec = np.zeros(len(vocab), dtype=np.float32)
    for tag in tags:
        idx = vocab.index(tag)
        if idx is not None:
            vec[idx] = 1.0
    return vec


def _splitmix(h: int) -> int:
    h ^= h >> 33
    h = (h * 0xFF51AFD7ED558CCD) & _MASK
    h ^= h >> 33
    return h


def trigram_encode(text: str, dim: int, seed: int) -> np.ndarray:
    """Sign-hash byte trigrams of the text into a dim vector, L2-normalized.

    Pure function of (text, dim, seed); empty text gives the zero vector.
    """
    if dim < 8:
        raise ConfigError(f"test encoder dim must be >= 8, got {dim}")
    data = text.encode("utf-8")
    acc = np.zeros(dim, dtype=np.float64)
    if not data:
        return acc.astype(np.float32)
    padded = b"\x02" + data + b"\x03"
    seed_state = _FNV_OFFSET
    for b in (seed & _MASK).to_bytes(8, "little"):
        seed_state = ((seed_state ^ b) * _FNV_PRIME) & _MASK
    for i in range(len(padded) - 2):
        h = seed_state
        for b in padded[i:i + 3]:
            h = ((h ^ b) * _FNV_PRIME) & _MASK
        h = _splitmix(h)
        idx = h % dim
        acc[idx] += 1.0 if (h >> 63) == 0 else -1.0
    norm = float(np.linalg.norm(acc))
    if norm > 0.0:
        acc /= norm
    return acc.astype(np.float32)


# ---------------------------------------------------------------------------
# Store key conventions and bundle assembly

def mention_name_key(mention_id: str) -> str:
    return f"m:{mention_id}:name"


def mention_ctx_key(mention_id: str) -> str:
    return f"m:{mention_id}:ctx"


def entity_name_key(entity_id: str) -> str:
    return f"e:{entity_id}:name"


def entity_ctx_key(entity_id: str) -> str:
    return f"e:{entity_id}:ctx"


def mention_context_text(m: Mention) -> str:
    """Local context string encoded as m_ctx: sentence plus window."""
    return " ".join([m.sentence, *m.context_window])


def assemble_mention(m: Mention, store: EmbeddingStore, vocab: TypeVocab) -> RepresentationBundle:
    name = store.require(mention_name_key(m.id))
    ctx = store.require(mention_ctx_key(m.id))
    return RepresentationBundle(name, ctx, type_onehot([m.mention_type], vocab))


def assemble_entity(e: Entity, store: EmbeddingStore, vocab: TypeVocab) -> RepresentationBundle:
    name = store.require(entity_name_key(e.id))
    ctx = store.get(entity_ctx_key(e.id))
    if ctx is None:
        if e.description:
            raise DataError(f"embedding store is missing key {entity_ctx_key(e.id)!r}")
        ctx = np.zeros(store.dim, dtype=np.float32)
    return RepresentationBundle(name, ctx, type_onehot(e.types, vocab))


def encode_corpus(ds: Dataset, kb: KnowledgeBase, dim: int, seed: int) -> EmbeddingStore:
    """Run the test encoder over every mention and KB entity."""
    records: dict[str, np.ndarray] = {}
    for m in ds.mentions:
        records[mention_name_key(m.id)] = trigram_encode(m.surface, dim, seed)
        records[mention_ctx_key(m.id)] = trigram_encode(mention_context_text(m), dim, seed)
    for e in kb.entities.values():
        records[entity_name_key(e.id)] = trigram_encode(e.name, dim, seed)
        records[entity_ctx_key(e.id)] = trigram_encode(e.description, dim, seed)
    return EmbeddingStore(dim, records)
