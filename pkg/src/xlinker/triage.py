"""Candidate generation: alias-count priors, top-k retrieval, KB expansion.

The prior table maps normalized surfaces to P(entity | surface) estimated
from anchor counts. Candidate retrieval takes the top-k prior entries; the
two-step expansion spreads l slots over those entries proportionally and
pulls KB entities through a title -> name -> mention-surface fallback chain.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

from .data import Dataset, KnowledgeBase, Mention, normalize_surface
from .errors import ConfigError, DataError


@dataclass(frozen=True)
class TriageConfig:
    k: int = 10  # top prior entries per surface
    l: int = 200  # expanded KB entity budget
    normalize: bool = True  # case-fold + whitespace-collapse surfaces

    def __post_init__(self):
        if self.k < 1 or self.l < 1:
            raise ConfigError(f"k and l must be >= 1, got k={self.k} l={self.l}")
        if self.l < self.k:
            raise ConfigError(f"l must be >= k, got k={self.k} l={self.l}")


@dataclass(frozen=True)
class PriorTable:
    # normalized surface -> ((target id, probability), ...) sorted descending
    table: dict[str, tuple[tuple[str, float], ...]]
    normalize: bool = True

    def row(self, surface: str) -> tuple[tuple[str, float], ...]:
        key = normalize_surface(surface) if self.normalize else surface
        return self.table.get(key, ())


@dataclass(frozen=True)
class CandidateSet:
    mention_id: str
    candidates: tuple[tuple[str, float], ...]  # (entity id, prior), descending

    def ids(self) -> tuple[str, ...]:
        return tuple(eid for eid, _ in self.candidates)

    def __len__(self) -> int:
        return len(self.candidates)


def build_prior(anchors, cfg: TriageConfig = TriageConfig()) -> PriorTable:
    """Estimate P(target | surface) from (surface, target_id, count) rows."""
    acc: dict[str, dict[str, int]] = {}
    for surface, target, count in anchors:
        if count < 0:
            raise DataError(f"negative anchor count for ({surface!r}, {target!r})")
        if count == 0:
            continue
        key = normalize_surface(surface) if cfg.normalize else surface
        acc.setdefault(key, {})
        acc[key][target] = acc[key].get(target, 0) + count
    table: dict[str, tuple[tuple[str, float], ...]] = {}
    for key, row in acc.items():
        total = sum(row.values())
        entries = [(tid, c / total) for tid, c in row.items()]
        entries.sort(key=lambda e: (-e[1], e[0]))
        table[key] = tuple(entries)
    return PriorTable(table, normalize=cfg.normalize)


def candidates(m: Mention, prior: PriorTable, cfg: TriageConfig) -> CandidateSet:
    """Top-k prior entries for the mention surface; unseen surface -> empty
    (the mention will fall out as NIL downstream)."""
    row = prior.row(m.surface)
    return CandidateSet(m.id, row[:cfg.k])


def _largest_remainder(weights: list[float], total_slots: int) -> list[int]:
    """Integer slot allocation proportional to weights, summing exactly."""
    wsum = sum(weights)
    if wsum <= 0:
        quotas = [total_slots / len(weights)] * len(weights)
    else:
        quotas = [total_slots * w / wsum for w in weights]
    floors = [int(q) for q in quotas]
    rest = total_slots - sum(floors)
    order = sorted(range(len(weights)),
                   key=lambda i: (-(quotas[i] - floors[i]), -weights[i], i))
    for i in order[:rest]:
        floors[i] += 1
    return floors


def allocate_slots(cands: CandidateSet, l: int) -> list[int]:
    """Slot budget per candidate title, proportional to prior; sums to l."""
    if not cands.candidates:
        return []
    return _largest_remainder([p for _, p in cands.candidates], l)


def expand_kb(cands: CandidateSet, kb: KnowledgeBase, m: Mention,
              cfg: TriageConfig) -> CandidateSet:
    """Two-step expansion: spread l slots over the candidate titles, then for
    each title pull KB entities by wiki title, else by name; if nothing at
    all matched, query the mention surface as a last resort.
    """
    if not cands.candidates:
        return CandidateSet(m.id, ())
    budgets = allocate_slots(cands, cfg.l)
    found: dict[str, float] = {}
    for (title, prior_p), budget in zip(cands.candidates, budgets):
        if budget == 0:
            continue
        hit = kb.by_title(title)
        ids = (hit,) if hit is not None else kb.by_name(title)
        for eid in ids[:budget]:
            if found.get(eid, -1.0) < prior_p:
                found[eid] = prior_p
    if not found:
        top_prior = cands.candidates[0][1]
        for eid in kb.by_name(m.surface)[:cfg.l]:
            found[eid] = top_prior
    entries = sorted(found.items(), key=lambda e: (-e[1], e[0]))
    return CandidateSet(m.id, tuple(entries[:cfg.l]))


def save_prior(prior: PriorTable, path: str) -> None:
    obj = {
        "normalize": prior.normalize,
        "table": {s: [[eid, p] for eid, p in row] for s, row in sorted(prior.table.items())},
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, sort_keys=True, ensure_ascii=False, indent=1)
        f.write("\n")


def load_prior(path: str) -> PriorTable:
    with open(path, "r", encoding="utf-8") as f:
        try:
            obj = json.load(f)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: malformed prior file ({exc.msg})") from None
    table = {s: tuple((eid, float(p)) for eid, p in row)
             for s, row in obj["table"].items()}
    return PriorTable(table, normalize=bool(obj["normalize"]))


def save_candidates(cands: list[CandidateSet], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for cs in cands:
            obj = {"mention_id": cs.mention_id,
                   "candidates": [{"entity_id": e, "prior": p} for e, p in cs.candidates]}
            f.write(json.dumps(obj, sort_keys=True, ensure_ascii=False))
            f.write("\n")


def load_candidates(path: str) -> dict[str, CandidateSet]:
    out: dict[str, CandidateSet] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
            cs = CandidateSet(obj["mention_id"],
                              tuple((c["entity_id"], float(c["prior"]))
                                    for c in obj["candidates"]))
            if cs.mention_id in out:
                raise DataError(f"{path}:{lineno}: duplicate mention id {cs.mention_id!r}")
            out[cs.mention_id] = cs
    return out


def triage_recall(cands_by_mention: dict[str, CandidateSet], ds: Dataset) -> float:
    """Fraction of non-NIL mentions whose gold id is among their candidates.
    Vacuously 1.0 when the dataset has no gold links."""
    non_nil = ds.non_nil()
    if not non_nil:
        return 1.0
    hits = 0
    for m in non_nil:
        cs = cands_by_mention.get(m.id)
        if cs is not None and m.gold in cs.ids():
            hits += 1
    return hits / len(non_nil)
