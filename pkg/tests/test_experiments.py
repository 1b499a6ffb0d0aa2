import pytest

from xlinker.errors import ConfigError
from xlinker.experiments import (ExperimentSpec, Reduction, RerankSpec, grid,
                                 registry_from_synth, run)
from xlinker.nn import BranchMask
from xlinker.ranker import LayerSizes, TrainConfig
from xlinker.synth import SynthConfig

SYNTH = SynthConfig(n_entities=40, n_mentions=240, languages=("aa", "bb"),
                    nil_rate=0.1, name_noise=0.1, context_informativeness=0.7,
                    doc_size=8, seed=21)
TRAIN = TrainConfig(lr=1e-3, epochs=5, dropout=0.0, n_negatives=4, batch_size=16,
                    layers=LayerSizes((24,), (16,), (8,), (16,)), seed=0)


@pytest.fixture(scope="module")
def registry():
    return registry_from_synth(SYNTH, dim=32, n_name_pairs=100)


class TestSpecParsing:
    def test_from_json_roundtrip(self):
        spec = ExperimentSpec.from_json({
            "name": "zs", "train_languages": ["aa"], "eval_languages": ["bb"],
            "mask": "name,context", "reduction": {"kind": "cap", "cap": 5},
            "rerank": {"kind": "popularity", "source": "all"},
            "threshold": 0.0, "seeds": [1, 2],
        })
        assert spec.mask == BranchMask(True, True, False)
        assert spec.reduction == Reduction("cap", None, 5)
        assert spec.rerank.source == "all"
        assert spec.seeds == (1, 2)

    def test_bad_reduction_rejected(self):
        with pytest.raises(ConfigError):
            Reduction("halve")
        with pytest.raises(ConfigError):
            Reduction("random")  # fraction missing

    def test_unknown_language_rejected(self, registry):
        spec = ExperimentSpec("x", ("zz",), ("aa",), seeds=(0,))
        with pytest.raises(ConfigError, match="zz"):
            run(spec, registry, TRAIN)


class TestRun:
    def test_emits_language_and_all_rows(self, registry):
        spec = ExperimentSpec("multi", ("aa", "bb"), ("aa", "bb"), seeds=(0,))
        res = run(spec, registry, TRAIN)
        assert set(res.means) == {"aa", "bb", "all"}
        assert ("aa", 0) in res.per_seed and ("all", 0) in res.per_seed

    def test_single_eval_language_all_equals_language(self, registry):
        spec = ExperimentSpec("mono", ("aa",), ("aa",), seeds=(0,))
        res = run(spec, registry, TRAIN)
        assert res.per_seed[("aa", 0)] == res.per_seed[("all", 0)]

    def test_zero_shot_runs_without_eval_training_data(self, registry):
        spec = ExperimentSpec("zs", ("aa",), ("bb",), seeds=(0,))
        res = run(spec, registry, TRAIN)
        assert 0.0 <= res.mean_f1("bb") <= 1.0

    def test_rerank_changes_predictions_not_params(self, registry):
        base = ExperimentSpec("base", ("aa",), ("aa",), seeds=(0, 1))
        rer = ExperimentSpec("rer", ("aa",), ("aa",),
                             rerank=RerankSpec("popularity", "train"), seeds=(0, 1))
        a = run(base, registry, TRAIN)
        b = run(rer, registry, TRAIN)
        assert a.checkpoint_hashes == b.checkpoint_hashes

    def test_deterministic_across_reruns(self, registry):
        spec = ExperimentSpec("mono", ("aa",), ("aa",), seeds=(0,))
        a = run(spec, registry, TRAIN)
        b = run(spec, registry, TRAIN)
        assert a.means == b.means
        assert a.checkpoint_hashes == b.checkpoint_hashes

    def test_reductions_apply(self, registry):
        spec = ExperimentSpec("cap", ("aa",), ("aa",),
                              reduction=Reduction("cap", cap=1), seeds=(0,))
        res = run(spec, registry, TRAIN)
        assert ("aa", 0) in res.per_seed


class TestGrid:
    def test_matrix_shape(self, registry):
        specs = [ExperimentSpec("t-aa", ("aa",), ("aa", "bb"), seeds=(0,)),
                 ExperimentSpec("t-bb", ("bb",), ("aa", "bb"), seeds=(0,))]
        report = grid(specs, registry, TRAIN)
        assert set(report.f1_matrix) == {"aa", "bb", "all"}
        for row in report.f1_matrix.values():
            assert set(row) == {"t-aa", "t-bb"}
        csv = report.to_csv()
        assert csv.splitlines()[0] == "experiment,label,micro_avg,precision,recall,f1"
        assert "t-aa" in report.to_markdown()

    def test_diagonal_equals_mono_run(self, registry):
        specs = [ExperimentSpec("t-aa", ("aa",), ("aa",), seeds=(0,))]
        report = grid(specs, registry, TRAIN)
        mono = run(specs[0], registry, TRAIN)
        assert report.f1_matrix["aa"]["t-aa"] == mono.mean_f1("aa")

    def test_empty_grid(self, registry):
        report = grid([], registry, TRAIN)
        assert report.results == {} and report.f1_matrix == {}
        assert report.to_markdown() == "(empty grid)\n"
