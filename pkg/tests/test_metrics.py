import random

import pytest

from xlinker.data import NIL
from xlinker.errors import DataError
from xlinker.inference import Prediction
from xlinker.metrics import evaluate, report_table, report_to_json

from conftest import make_dataset


def preds_for(golds, predicted):
    return [Prediction(f"m{i:04d}", p, 0.5, ()) for i, p in enumerate(predicted)]


class TestEvaluate:
    def test_all_correct(self):
        golds = ["eA", NIL, "eB"]
        ds = make_dataset(golds)
        report = evaluate(preds_for(golds, golds), ds)
        assert (report.precision, report.recall, report.f1, report.micro_avg) == \
            (1.0, 1.0, 1.0, 1.0)

    def test_hand_counted_mixed(self):
        ds = make_dataset(["eA", NIL])
        report = evaluate(preds_for(None, ["eA", "eB"]), ds)
        assert report.precision == 0.5
        assert report.recall == 1.0
        assert report.f1 == pytest.approx(2 / 3)
        assert report.micro_avg == 0.5

    def test_all_nil_predictions(self):
        ds = make_dataset(["eA", "eB", NIL, NIL, NIL])
        report = evaluate(preds_for(None, [NIL] * 5), ds)
        assert report.recall == 0.0
        assert report.precision == 0.0  # no predicted links while gold links exist
        assert report.micro_avg == 3 / 5  # the gold NIL fraction

    def test_vacuous_all_nil_both(self):
        ds = make_dataset([NIL, NIL])
        report = evaluate(preds_for(None, [NIL, NIL]), ds)
        assert report.precision == 1.0 and report.recall == 1.0
        assert report.f1 == 1.0 and report.micro_avg == 1.0

    def test_pred_links_without_gold_links(self):
        ds = make_dataset([NIL, NIL])
        report = evaluate(preds_for(None, ["eA", NIL]), ds)
        assert report.precision == 0.0
        assert report.recall == 0.0
        assert report.f1 == 0.0
        assert report.micro_avg == 0.5

    def test_missing_prediction_names_id(self):
        ds = make_dataset(["eA", "eB"])
        with pytest.raises(DataError, match="m0001"):
            evaluate([Prediction("m0000", "eA", 0.5, ())], ds)

    def test_extra_prediction_rejected(self):
        ds = make_dataset(["eA"])
        preds = [Prediction("m0000", "eA", 0.5, ()),
                 Prediction("mXXXX", "eA", 0.5, ())]
        with pytest.raises(DataError, match="mXXXX"):
            evaluate(preds, ds)

    def test_matches_counting_oracle_on_random_sets(self):
        rnd = random.Random(17)
        for _ in range(1000):
            n = rnd.randrange(1, 30)
            ents = [f"e{j}" for j in range(5)]
            golds = [rnd.choice(ents + [NIL, NIL]) for _ in range(n)]
            predicted = [rnd.choice(ents + [NIL, NIL]) for _ in range(n)]
            ds = make_dataset(golds)
            report = evaluate(preds_for(None, predicted), ds)

            # independent brute-force counting
            gold_links = sum(1 for g in golds if g != NIL)
            pred_links = sum(1 for p in predicted if p != NIL)
            correct = sum(1 for g, p in zip(golds, predicted)
                          if p != NIL and p == g)
            correct_nils = sum(1 for g, p in zip(golds, predicted)
                               if p == NIL and g == NIL)
            if pred_links == 0:
                precision = 1.0 if gold_links == 0 else 0.0
            else:
                precision = correct / pred_links
            if gold_links == 0:
                recall = 1.0 if pred_links == 0 else 0.0
            else:
                recall = correct / gold_links
            f1 = (2 * precision * recall / (precision + recall)
                  if precision + recall > 0 else 0.0)
            micro = (correct + correct_nils) / n

            assert report.precision == precision
            assert report.recall == recall
            assert report.f1 == f1
            assert report.micro_avg == micro
            assert report.n_gold_links == gold_links
            assert report.n_pred_links == pred_links

    def test_metrics_bounded(self):
        rnd = random.Random(23)
        for _ in range(200):
            n = rnd.randrange(1, 15)
            golds = [rnd.choice(["eA", "eB", NIL]) for _ in range(n)]
            predicted = [rnd.choice(["eA", "eB", "eC", NIL]) for _ in range(n)]
            r = evaluate(preds_for(None, predicted), make_dataset(golds))
            for v in (r.precision, r.recall, r.f1, r.micro_avg):
                assert 0.0 <= v <= 1.0
            assert (r.micro_avg == 1.0) == (golds == predicted)


class TestReports:
    def test_json_and_table_render(self):
        ds = make_dataset(["eA", NIL])
        report = evaluate(preds_for(None, ["eA", NIL]), ds)
        js = report_to_json(report)
        assert '"micro_avg"' in js
        table = report_table({"en": report})
        assert "avg." in table and "prec." in table and "en" in table
