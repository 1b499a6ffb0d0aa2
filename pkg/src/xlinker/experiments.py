"""Config-driven experiment harness: mono/multi training, zero-shot
language-transfer grids, branch ablations, training-set reductions, and
popularity re-ranking, averaged over seeds.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

from .data import (Dataset, KnowledgeBase, PopularityTable, concat_datasets,
                   popularity_counts, reduce_by_entity_cap, reduce_random,
                   reduce_tail, remove_eval_entities, split_by_document)
from .encoder import TypeVocab, build_type_vocab, encode_corpus, trigram_encode
from .errors import ConfigError
from .inference import predict_dataset
from .metrics import EvalReport, evaluate
from .nn import BranchMask
from .ranker import TrainConfig, checkpoint_bytes, train
from .store import EmbeddingStore
from .synth import SynthConfig, SynthWorld, load_name_pairs
from .triage import CandidateSet, PriorTable, TriageConfig, build_prior, candidates


@dataclass(frozen=True)
class Reduction:
    kind: str = "none"  # none | random | tail | cap | cap_unseen
    fraction: float | None = None
    cap: int | None = None

    def __post_init__(self):
        if self.kind not in ("none", "random", "tail", "cap", "cap_unseen"):
            raise ConfigError(f"unknown reduction kind {self.kind!r}")
        if self.kind in ("random", "tail") and self.fraction is None:
            raise ConfigError(f"reduction {self.kind!r} needs a fraction")
        if self.kind in ("cap", "cap_unseen") and self.cap is None:
            raise ConfigError(f"reduction {self.kind!r} needs a cap")


@dataclass(frozen=True)
class RerankSpec:
    kind: str = "none"  # none | popularity
    source: str = "train"  # train | all
    top_n: int = 10

    def __post_init__(self):
        if self.kind not in ("none", "popularity"):
            raise ConfigError(f"unknown rerank kind {self.kind!r}")
        if self.source not in ("train", "all"):
            raise ConfigError(f"unknown popularity source {self.source!r}")


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    train_languages: tuple[str, ...]
    eval_languages: tuple[str, ...]
    mask: BranchMask = field(default_factory=BranchMask)
    reduction: Reduction = field(default_factory=Reduction)
    aux_language: str | None = None  # registry-provided name pairs
    aux_pairs_path: str | None = None  # or an explicit TSV corpus
    rerank: RerankSpec = field(default_factory=RerankSpec)
    threshold: float = -1.0
    seeds: tuple[int, ...] = (0, 1, 2)

    def __post_init__(self):
        if not self.train_languages or not self.eval_languages:
            raise ConfigError("train and eval language lists must be non-empty")
        object.__setattr__(self, "train_languages", tuple(self.train_languages))
        object.__setattr__(self, "eval_languages", tuple(self.eval_languages))
        object.__setattr__(self, "seeds", tuple(self.seeds))

    @staticmethod
    def from_json(obj: dict) -> "ExperimentSpec":
        red = obj.get("reduction", {})
        rer = obj.get("rerank", {})
        return ExperimentSpec(
            name=obj["name"],
            train_languages=tuple(obj["train_languages"]),
            eval_languages=tuple(obj["eval_languages"]),
            mask=BranchMask.parse(obj.get("mask", "name,context,type")),
            reduction=Reduction(red.get("kind", "none"), red.get("fraction"),
                                red.get("cap")),
            aux_language=obj.get("aux_language"),
            aux_pairs_path=obj.get("aux_pairs_path"),
            rerank=RerankSpec(rer.get("kind", "none"), rer.get("source", "train"),
                              rer.get("top_n", 10)),
            threshold=float(obj.get("threshold", -1.0)),
            seeds=tuple(obj.get("seeds", (0, 1, 2))),
        )


@dataclass
class LanguageData:
    train: Dataset
    dev: Dataset
    name_pairs: list[tuple[str, str]]


@dataclass
class DataRegistry:
    """Everything an experiment needs, keyed by language."""

    kb: KnowledgeBase
    languages: dict[str, LanguageData]
    store: EmbeddingStore
    prior: PriorTable
    triage_cfg: TriageConfig
    cands: dict[str, CandidateSet]  # mention id -> candidates
    encode_fn: object  # text -> vector, for aux name pairs
    vocab_min_count: int = 0

    def language(self, tag: str) -> LanguageData:
        try:
            return self.languages[tag]
        except KeyError:
            raise ConfigError(f"unknown language key {tag!r}") from None


def registry_from_synth(synth_cfg: SynthConfig, dim: int = 64, encoder_seed: int = 7,
                        triage_cfg: TriageConfig = TriageConfig(),
                        dev_fraction: float = 0.2, split_seed: int = 13,
                        vocab_min_count: int = 0,
                        n_name_pairs: int = 2000) -> DataRegistry:
    """Generate a full synthetic registry: datasets, embeddings, prior,
    candidates, and per-language name-pair corpora."""
    world = SynthWorld(synth_cfg)
    kb = world.kb()
    datasets = world.datasets()
    languages = {}
    for tag, ds in datasets.items():
        train_ds, dev_ds = split_by_document(ds, dev_fraction, split_seed)
        languages[tag] = LanguageData(train_ds, dev_ds,
                                      world.name_pairs(tag, n_name_pairs))
    full = concat_datasets(list(datasets.values()))
    store = encode_corpus(full, kb, dim, encoder_seed)
    prior = build_prior(world.anchors(), triage_cfg)
    cands = {m.id: candidates(m, prior, triage_cfg) for m in full.mentions}
    return DataRegistry(
        kb=kb, languages=languages, store=store, prior=prior,
        triage_cfg=triage_cfg, cands=cands,
        encode_fn=lambda text: trigram_encode(text, dim, encoder_seed),
        vocab_min_count=vocab_min_count,
    )


def _reduced_train(spec: ExperimentSpec, registry: DataRegistry, seed: int) -> Dataset:
    train_ds = concat_datasets([registry.language(t).train for t in spec.train_languages])
    red = spec.reduction
    if red.kind == "random":
        return reduce_random(train_ds, red.fraction, seed)
    if red.kind == "tail":
        return reduce_tail(train_ds, red.fraction)
    if red.kind == "cap":
        return reduce_by_entity_cap(train_ds, red.cap)
    if red.kind == "cap_unseen":
        capped = reduce_by_entity_cap(train_ds, red.cap)
        eval_all = concat_datasets([registry.language(t).dev for t in spec.eval_languages])
        return remove_eval_entities(capped, eval_all)
    return train_ds


def _aux_pairs(spec: ExperimentSpec, registry: DataRegistry):
    if spec.aux_pairs_path is not None:
        return load_name_pairs(spec.aux_pairs_path)
    if spec.aux_language is not None:
        return registry.language(spec.aux_language).name_pairs
    return None


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    per_seed: dict[tuple[str, int], EvalReport]  # (label, seed) -> report
    means: dict[str, dict[str, float]]  # label -> metric means over seeds
    checkpoint_hashes: dict[int, str]  # seed -> sha256 of trained params

    def mean_f1(self, label: str) -> float:
        return self.means[label]["f1"]


def run(spec: ExperimentSpec, registry: DataRegistry,
        train_cfg: TrainConfig) -> ExperimentResult:
    """Train/evaluate one experiment cell per seed and average the metrics."""
    from .ranker import AuxConfig

    per_seed: dict[tuple[str, int], EvalReport] = {}
    hashes: dict[int, str] = {}
    aux_pairs = _aux_pairs(spec, registry)
    for seed in spec.seeds:
        train_ds = _reduced_train(spec, registry, seed)
        vocabs = build_type_vocab(train_ds, registry.kb, registry.vocab_min_count)
        cfg = replace(train_cfg, seed=seed)
        if aux_pairs is not None and cfg.aux is None:
            cfg = replace(cfg, aux=AuxConfig())
        if aux_pairs is None and cfg.aux is not None:
            cfg = replace(cfg, aux=None)
        result = train(train_ds, registry.kb, registry.cands, registry.store,
                       vocabs, cfg, spec.mask, aux_pairs=aux_pairs,
                       encode_fn=registry.encode_fn)
        hashes[seed] = hashlib.sha256(checkpoint_bytes(result.params)).hexdigest()

        rerank_pop: PopularityTable | None = None
        if spec.rerank.kind == "popularity":
            if spec.rerank.source == "train":
                rerank_pop = popularity_counts(train_ds)
            else:
                rerank_pop = popularity_counts(concat_datasets(
                    [ld.train for ld in registry.languages.values()]))

        all_preds = []
        all_gold = []
        for tag in spec.eval_languages:
            dev = registry.language(tag).dev
            preds = predict_dataset(dev, registry.cands, registry.kb, registry.store,
                                    vocabs, result.params, spec.mask, spec.threshold,
                                    rerank_pop, spec.rerank.top_n)
            per_seed[(tag, seed)] = evaluate(preds, dev)
            all_preds.extend(preds)
            all_gold.append(dev)
        per_seed[("all", seed)] = evaluate(all_preds, concat_datasets(all_gold))

    labels = list(spec.eval_languages) + ["all"]
    means = {}
    for label in labels:
        reports = [per_seed[(label, s)] for s in spec.seeds]
        means[label] = {
            "micro_avg": sum(r.micro_avg for r in reports) / len(reports),
            "precision": sum(r.precision for r in reports) / len(reports),
            "recall": sum(r.recall for r in reports) / len(reports),
            "f1": sum(r.f1 for r in reports) / len(reports),
        }
    return ExperimentResult(spec, per_seed, means, hashes)


@dataclass
class GridReport:
    results: dict[str, ExperimentResult]  # spec name -> result
    f1_matrix: dict[str, dict[str, float]]  # eval label -> spec name -> mean F1

    def to_csv(self) -> str:
        lines = ["experiment,label,micro_avg,precision,recall,f1"]
        for name, res in self.results.items():
            for label, m in res.means.items():
                lines.append(f"{name},{label},{m['micro_avg']!r},{m['precision']!r},"
                             f"{m['recall']!r},{m['f1']!r}")
        return "\n".join(lines) + "\n"

    def to_markdown(self) -> str:
        if not self.results:
            return "(empty grid)\n"
        cols = list(self.results)
        lines = ["| eval \\ train | " + " | ".join(cols) + " |",
                 "|---" * (len(cols) + 1) + "|"]
        for label, row in self.f1_matrix.items():
            cells = [f"{row[c]:.3f}" if c in row else "" for c in cols]
            lines.append(f"| {label} | " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"


def grid(specs: list[ExperimentSpec], registry: DataRegistry,
         train_cfg: TrainConfig) -> GridReport:
    """Run every spec and cross-tabulate mean F1 (rows: eval sets,
    columns: experiments)."""
    results = {}
    matrix: dict[str, dict[str, float]] = {}
    for spec in specs:
        res = run(spec, registry, train_cfg)
        results[spec.name] = res
        for label, m in res.means.items():
            matrix.setdefault(label, {})[spec.name] = m["f1"]
    return GridReport(results, matrix)
