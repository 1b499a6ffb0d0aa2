"""Corpus and knowledge-base types, JSONL I/O, splits and reductions.

Mentions link to entities in an English KB or to the NIL marker. All values
are immutable after construction; reductions return new Dataset objects.
"""
from __future__ import annotations

import hashlib
import json
import math
import random
import re
from collections import Counter
from dataclasses import dataclass, field

from .errors import ConfigError, DataError

NIL = "NIL"

_WS = re.compile(r"\s+")


def normalize_surface(s: str) -> str:
    """Case-fold and collapse runs of whitespace to single spaces."""
    return _WS.sub(" ", s.strip()).casefold()


@dataclass(frozen=True)
class Mention:
    id: str
    doc_id: str
    language: str
    surface: str
    sentence: str
    context_window: tuple[str, ...]
    mention_type: str
    gold: str  # entity id or NIL

    def is_nil(self) -> bool:
        return self.gold == NIL


@dataclass(frozen=True)
class Entity:
    id: str
    name: str
    description: str = ""
    types: tuple[str, ...] = ()
    wiki_title: str | None = None
    in_kb: bool = True


class KnowledgeBase:
    """Entity collection with exact/normalized name and wiki-title indexes."""

    def __init__(self, entities: list[Entity] | dict[str, Entity], ref: str = "kb"):
        if isinstance(entities, dict):
            entities = list(entities.values())
        self.ref = ref
        self.entities: dict[str, Entity] = {}
        self.name_index: dict[str, tuple[str, ...]] = {}
        self.title_index: dict[str, str] = {}
        name_acc: dict[str, list[str]] = {}
        for e in entities:
            if e.id in self.entities:
                raise DataError(f"duplicate entity id {e.id!r}")
            if not e.name:
                raise DataError(f"entity {e.id!r} has empty name")
            self.entities[e.id] = e
            name_acc.setdefault(e.name, []).append(e.id)
            norm = normalize_surface(e.name)
            if norm != e.name:
                name_acc.setdefault(norm, []).append(e.id)
            if e.wiki_title is not None:
                self.title_index[e.wiki_title] = e.id
        self.name_index = {k: tuple(sorted(set(v))) for k, v in name_acc.items()}

    def __contains__(self, entity_id: str) -> bool:
        return entity_id in self.entities

    def __len__(self) -> int:
        return len(self.entities)

    def get(self, entity_id: str) -> Entity:
        try:
            return self.entities[entity_id]
        except KeyError:
            raise DataError(f"unknown entity id {entity_id!r}") from None

    def by_name(self, name: str) -> tuple[str, ...]:
        hit = self.name_index.get(name)
        if hit:
            return hit
        return self.name_index.get(normalize_surface(name), ())

    def by_title(self, title: str) -> str | None:
        return self.title_index.get(title)


@dataclass(frozen=True)
class Dataset:
    mentions: tuple[Mention, ...]
    kb_ref: str = "kb"
    # doc_id -> mention ids, in corpus order; partitions the mention set
    documents: dict[str, tuple[str, ...]] = field(default_factory=dict)

    @staticmethod
    def from_mentions(mentions: list[Mention], kb_ref: str = "kb") -> "Dataset":
        seen = set()
        docs: dict[str, list[str]] = {}
        for m in mentions:
            if m.id in seen:
                raise DataError(f"duplicate mention id {m.id!r}")
            seen.add(m.id)
            docs.setdefault(m.doc_id, []).append(m.id)
        return Dataset(
            mentions=tuple(mentions),
            kb_ref=kb_ref,
            documents={d: tuple(ids) for d, ids in docs.items()},
        )

    def __len__(self) -> int:
        return len(self.mentions)

    def non_nil(self) -> tuple[Mention, ...]:
        return tuple(m for m in self.mentions if not m.is_nil())

    def subset(self, mention_ids: set[str]) -> "Dataset":
        kept = [m for m in self.mentions if m.id in mention_ids]
        return Dataset.from_mentions(kept, self.kb_ref)

    def by_id(self) -> dict[str, Mention]:
        return {m.id: m for m in self.mentions}


@dataclass(frozen=True)
class PopularityTable:
    counts: dict[str, int]

    def get(self, entity_id: str) -> int:
        return self.counts.get(entity_id, 0)

    def total(self) -> int:
        return sum(self.counts.values())


# ---------------------------------------------------------------------------
# JSONL I/O

_MENTION_FIELDS = (
    "id", "doc_id", "language", "surface", "sentence",
    "context_window", "mention_type", "gold",
)
_ENTITY_FIELDS = ("id", "name", "description", "types", "wiki_title", "in_kb")


def mention_to_json(m: Mention) -> dict:
    return {
        "id": m.id,
        "doc_id": m.doc_id,
        "language": m.language,
        "surface": m.surface,
        "sentence": m.sentence,
        "context_window": list(m.context_window),
        "mention_type": m.mention_type,
        "gold": m.gold,
    }


def entity_to_json(e: Entity) -> dict:
    return {
        "id": e.id,
        "name": e.name,
        "description": e.description,
        "types": list(e.types),
        "wiki_title": e.wiki_title,
        "in_kb": e.in_kb,
    }


def _jsonl_lines(path: str):
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None


def load_entities(path: str, ref: str = "kb") -> KnowledgeBase:
    entities = []
    for lineno, obj in _jsonl_lines(path):
        missing = [k for k in _ENTITY_FIELDS if k not in obj]
        if missing:
            raise DataError(f"{path}:{lineno}: entity missing fields {missing}")
        entities.append(Entity(
            id=obj["id"],
            name=obj["name"],
            description=obj["description"] or "",
            types=tuple(obj["types"]),
            wiki_title=obj["wiki_title"],
            in_kb=bool(obj["in_kb"]),
        ))
    return KnowledgeBase(entities, ref=ref)


def load_mentions(path: str, kb: KnowledgeBase) -> Dataset:
    """Load a mention JSONL file, enforcing referential integrity against kb."""
    mentions = []
    for lineno, obj in _jsonl_lines(path):
        missing = [k for k in _MENTION_FIELDS if k not in obj]
        if missing:
            raise DataError(f"{path}:{lineno}: mention missing fields {missing}")
        m = Mention(
            id=obj["id"],
            doc_id=obj["doc_id"],
            language=obj["language"],
            surface=obj["surface"],
            sentence=obj["sentence"],
            context_window=tuple(obj["context_window"]),
            mention_type=obj["mention_type"],
            gold=obj["gold"],
        )
        if m.surface not in m.sentence:
            raise DataError(
                f"{path}:{lineno}: surface {m.surface!r} not a substring of its sentence"
            )
        if m.gold != NIL and m.gold not in kb:
            raise DataError(f"{path}:{lineno}: gold id {m.gold!r} not present in KB")
        mentions.append(m)
    return Dataset.from_mentions(mentions, kb_ref=kb.ref)


def save_mentions(ds: Dataset, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for m in ds.mentions:
            f.write(json.dumps(mention_to_json(m), ensure_ascii=False, sort_keys=True))
            f.write("\n")


def save_entities(kb: KnowledgeBase, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for eid in sorted(kb.entities):
            f.write(json.dumps(entity_to_json(kb.entities[eid]),
                               ensure_ascii=False, sort_keys=True))
            f.write("\n")


# ---------------------------------------------------------------------------
# Splits and reductions.  All reductions keep whole documents or whole
# entities, never fractions of either, and retain NIL mentions.

def _check_fraction(fraction: float) -> None:
    if not (0.0 < fraction < 1.0):
        raise ConfigError(f"fraction must be in the open interval (0,1), got {fraction}")


def split_by_document(ds: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Partition documents at random; the second part gets ceil(fraction*|docs|)."""
    _check_fraction(fraction)
    docs = sorted(ds.documents)
    if len(docs) < 2:
        raise DataError("need at least 2 documents to split")
    rng = random.Random(seed)
    shuffled = docs[:]
    rng.shuffle(shuffled)
    n_second = math.ceil(len(docs) * fraction)
    second_docs = set(shuffled[:n_second])
    first_ids = {mid for d in docs if d not in second_docs for mid in ds.documents[d]}
    second_ids = {mid for d in second_docs for mid in ds.documents[d]}
    return ds.subset(first_ids), ds.subset(second_ids)


def _doc_hash_unit(doc_id: str, seed: int) -> float:
    """Deterministic per-document draw in [0,1), stable across runs."""
    h = hashlib.blake2b(doc_id.encode("utf-8"), digest_size=8,
                        key=str(seed).encode("utf-8")).digest()
    return int.from_bytes(h, "little") / 2.0**64


def reduce_random(ds: Dataset, fraction: float, seed: int) -> Dataset:
    """Keep each document independently with probability `fraction`.

    Hash-threshold selection keeps ~fraction of mentions, is deterministic per
    seed, and is idempotent: every kept document passes the threshold again.
    """
    _check_fraction(fraction)
    kept_docs = [d for d in ds.documents if _doc_hash_unit(d, seed) < fraction]
    kept = {mid for d in kept_docs for mid in ds.documents[d]}
    return ds.subset(kept)


def reduce_tail(ds: Dataset, fraction: float) -> Dataset:
    """Keep mentions of the least frequent gold entities, whole entities at a
    time, while the kept non-NIL count stays within fraction of the total.
    Ties on frequency break by entity id; NIL mentions are always retained.
    """
    _check_fraction(fraction)
    if not ds.mentions:
        raise DataError("cannot reduce an empty dataset")
    counts = Counter(m.gold for m in ds.mentions if not m.is_nil())
    target = fraction * sum(counts.values())
    kept_entities: set[str] = set()
    cum = 0
    for eid in sorted(counts, key=lambda e: (counts[e], e)):
        if cum + counts[eid] > target:
            break
        kept_entities.add(eid)
        cum += counts[eid]
    kept = {m.id for m in ds.mentions if m.is_nil() or m.gold in kept_entities}
    return ds.subset(kept)


def reduce_by_entity_cap(ds: Dataset, n: int) -> Dataset:
    """Keep mentions whose gold entity has at most n mentions in ds."""
    if n < 1:
        raise ConfigError(f"entity cap must be >= 1, got {n}")
    counts = Counter(m.gold for m in ds.mentions if not m.is_nil())
    kept = {m.id for m in ds.mentions if m.is_nil() or counts[m.gold] <= n}
    return ds.subset(kept)


def remove_eval_entities(train: Dataset, eval_ds: Dataset) -> Dataset:
    """Drop training mentions whose gold entity occurs as a gold in eval_ds."""
    eval_golds = {m.gold for m in eval_ds.mentions if not m.is_nil()}
    kept = {m.id for m in train.mentions if m.is_nil() or m.gold not in eval_golds}
    return train.subset(kept)


def popularity_counts(ds: Dataset) -> PopularityTable:
    """Count gold non-NIL links per entity."""
    return PopularityTable(dict(Counter(m.gold for m in ds.mentions if not m.is_nil())))


def concat_datasets(parts: list[Dataset], kb_ref: str | None = None) -> Dataset:
    mentions: list[Mention] = []
    for p in parts:
        mentions.extend(p.mentions)
    ref = kb_ref or (parts[0].kb_ref if parts else "kb")
    return Dataset.from_mentions(mentions, kb_ref=ref)
