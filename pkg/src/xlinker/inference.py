"""Candidate scoring, NIL thresholding, and popularity re-ranking."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import NIL, Dataset, KnowledgeBase, PopularityTable
from .encoder import TypeVocab
from .errors import DataError
from .nn import BranchMask, RankerParams, forward_batch
from .ranker import BundleIndex
from .store import EmbeddingStore
from .triage import CandidateSet


@dataclass(frozen=True)
class Prediction:
    mention_id: str
    predicted: str  # entity id or NIL
    score: float
    ranked: tuple[tuple[str, float], ...]  # (entity id, score), descending


def _sort_ranked(pairs) -> tuple[tuple[str, float], ...]:
    return tuple(sorted(pairs, key=lambda e: (-e[1], e[0])))


def score_candidates(m, cands: CandidateSet, kb: KnowledgeBase, store: EmbeddingStore,
                     vocabs: tuple[TypeVocab, TypeVocab], params: RankerParams,
                     mask: BranchMask) -> tuple[tuple[str, float], ...]:
    """Infer-mode score for each candidate entity, sorted descending with
    ties broken by entity id."""
    if not cands.candidates:
        return ()
    index = BundleIndex([m], list(cands.ids()), kb, store, vocabs)
    rows = list(range(len(cands.candidates)))
    x_name, x_ctx, x_type = index.pair_rows([0] * len(rows), rows)
    scores = forward_batch(params, mask, x_name, x_ctx, x_type)
    return _sort_ranked(zip(cands.ids(), (float(s) for s in scores)))


def predict(mention_id: str, ranked, threshold: float) -> Prediction:
    """Top entity unless the list is empty or its score falls below the
    threshold (strict comparison), in which case NIL."""
    ranked = tuple(ranked)
    if not ranked or ranked[0][1] < threshold:
        top_score = ranked[0][1] if ranked else 0.0
        return Prediction(mention_id, NIL, float(top_score), ranked)
    eid, score = ranked[0]
    return Prediction(mention_id, eid, float(score), ranked)


def rerank_popularity(pred: Prediction, pop: PopularityTable, top_n: int = 10) -> Prediction:
    """Swap the prediction for the most popular entity among the top top_n
    ranked candidates. Ties fall back to model score, then entity id; NIL
    predictions pass through unchanged."""
    if pred.predicted == NIL or not pred.ranked:
        return pred
    window = pred.ranked[:top_n]
    eid, score = min(window, key=lambda e: (-pop.get(e[0]), -e[1], e[0]))
    return Prediction(pred.mention_id, eid, float(score), pred.ranked)


def predict_dataset(ds: Dataset, cands_by_mention: dict[str, CandidateSet],
                    kb: KnowledgeBase, store: EmbeddingStore,
                    vocabs: tuple[TypeVocab, TypeVocab], params: RankerParams,
                    mask: BranchMask, threshold: float,
                    rerank_pop: PopularityTable | None = None,
                    rerank_top_n: int = 10) -> list[Prediction]:
    """Score and threshold every mention in one batched pass."""
    mentions = list(ds.mentions)
    entity_ids = sorted({eid for m in mentions
                         for eid in cands_by_mention.get(m.id, CandidateSet(m.id, ())).ids()})
    index = BundleIndex(mentions, entity_ids, kb, store, vocabs)
    m_rows, e_rows, spans = [], [], []
    for m in mentions:
        cands = cands_by_mention.get(m.id)
        ids = cands.ids() if cands else ()
        spans.append((len(m_rows), ids))
        m_rows.extend([index.m_row[m.id]] * len(ids))
        e_rows.extend(index.e_row[e] for e in ids)
    if m_rows:
        x_name, x_ctx, x_type = index.pair_rows(m_rows, e_rows)
        scores = forward_batch(params, mask, x_name, x_ctx, x_type)
    else:
        scores = np.zeros(0)
    preds = []
    for m, (start, ids) in zip(mentions, spans):
        ranked = _sort_ranked(zip(ids, (float(s) for s in scores[start:start + len(ids)])))
        p = predict(m.id, ranked, threshold)
        if rerank_pop is not None:
            p = rerank_popularity(p, rerank_pop, rerank_top_n)
        preds.append(p)
    return preds


def save_predictions(preds: list[Prediction], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for p in preds:
            obj = {
                "mention_id": p.mention_id,
                "predicted": p.predicted,
                "score": p.score,
                "ranked": [{"entity_id": e, "score": s} for e, s in p.ranked],
            }
            f.write(json.dumps(obj, ensure_ascii=False, sort_keys=True))
            f.write("\n")


def load_predictions(path: str) -> list[Prediction]:
    preds = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
            preds.append(Prediction(
                mention_id=obj["mention_id"],
                predicted=obj["predicted"],
                score=float(obj["score"]),
                ranked=tuple((r["entity_id"], float(r["score"])) for r in obj["ranked"]),
            ))
    return preds
