"""Linking metrics: precision, recall, F1 over non-NIL links, and
micro-average as whole-set accuracy including correct NILs.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

from .data import NIL, Dataset
from .errors import DataError
from .inference import Prediction


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f1: float
    micro_avg: float
    n_mentions: int
    n_gold_links: int
    n_pred_links: int
    n_correct_links: int
    n_correct_nils: int

    def counts(self) -> dict[str, int]:
        return {
            "n_mentions": self.n_mentions,
            "n_gold_links": self.n_gold_links,
            "n_pred_links": self.n_pred_links,
            "n_correct_links": self.n_correct_links,
            "n_correct_nils": self.n_correct_nils,
        }


def evaluate(preds: list[Prediction], gold: Dataset) -> EvalReport:
    """Score predictions against gold labels.

    Precision and recall cover non-NIL links only; the micro-average counts
    correct links plus correct NILs over all mentions. When both link
    denominators are zero the respective metric is vacuously 1.0; when only
    its own denominator is zero it is 0.0.
    """
    gold_by_id = gold.by_id()
    pred_by_id: dict[str, Prediction] = {}
    for p in preds:
        if p.mention_id in pred_by_id:
            raise DataError(f"duplicate prediction for mention {p.mention_id!r}")
        pred_by_id[p.mention_id] = p
    for mid in gold_by_id:
        if mid not in pred_by_id:
            raise DataError(f"missing prediction for mention {mid!r}")
    for mid in pred_by_id:
        if mid not in gold_by_id:
            raise DataError(f"prediction for unknown mention {mid!r}")

    n_gold_links = sum(1 for m in gold.mentions if not m.is_nil())
    n_pred_links = sum(1 for p in preds if p.predicted != NIL)
    n_correct_links = sum(1 for p in preds
                          if p.predicted != NIL and p.predicted == gold_by_id[p.mention_id].gold)
    n_correct_nils = sum(1 for p in preds
                         if p.predicted == NIL and gold_by_id[p.mention_id].gold == NIL)

    if n_pred_links == 0:
        precision = 1.0 if n_gold_links == 0 else 0.0
    else:
        precision = n_correct_links / n_pred_links
    if n_gold_links == 0:
        recall = 1.0 if n_pred_links == 0 else 0.0
    else:
        recall = n_correct_links / n_gold_links
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    n = len(gold.mentions)
    micro = (n_correct_links + n_correct_nils) / n if n else 1.0
    return EvalReport(precision, recall, f1, micro, n, n_gold_links,
                      n_pred_links, n_correct_links, n_correct_nils)


def report_to_json(report: EvalReport) -> str:
    obj = {
        "micro_avg": report.micro_avg,
        "precision": report.precision,
        "recall": report.recall,
        "f1": report.f1,
        "counts": report.counts(),
    }
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def report_table(rows: dict[str, EvalReport]) -> str:
    """Aligned text table, one row per label: avg., prec., recall, F1."""
    header = f"{'':<12} {'avg.':>7} {'prec.':>7} {'recall':>7} {'F1':>7}"
    lines = [header]
    for label, r in rows.items():
        lines.append(f"{label:<12} {r.micro_avg:>7.3f} {r.precision:>7.3f} "
                     f"{r.recall:>7.3f} {r.f1:>7.3f}")
    return "\n".join(lines) + "\n"
