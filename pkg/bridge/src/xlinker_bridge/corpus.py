"""Minimal readers for the mention/entity JSONL interchange schema."""
from __future__ import annotations

import json
from dataclasses import dataclass


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class MentionRec:
    id: str
    surface: str
    sentence: str
    context_window: tuple[str, ...]


@dataclass(frozen=True)
class EntityRec:
    id: str
    name: str
    description: str


def _lines(path: str):
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None


def read_mentions(path: str) -> list[MentionRec]:
    out = []
    for lineno, obj in _lines(path):
        try:
            out.append(MentionRec(obj["id"], obj["surface"], obj["sentence"],
                                  tuple(obj["context_window"])))
        except KeyError as exc:
            raise CorpusError(f"{path}:{lineno}: mention missing field {exc}") from None
    return out


def read_entities(path: str) -> list[EntityRec]:
    out = []
    for lineno, obj in _lines(path):
        try:
            out.append(EntityRec(obj["id"], obj["name"], obj["description"] or ""))
        except KeyError as exc:
            raise CorpusError(f"{path}:{lineno}: entity missing field {exc}") from None
    return out
