"""FastAPI service wrapping the linking pipeline.

Each endpoint runs one pipeline operation on server-side files, writes its
artifact plus a run manifest, and returns a summary. The CLI is a thin
client of this API.
"""
from __future__ import annotations

import os

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .. import __version__
from ..data import (NIL, Dataset, Mention, load_entities, load_mentions,
                    popularity_counts, save_entities, save_mentions)
from ..encoder import (TypeVocab, build_type_vocab, encode_corpus, entity_ctx_key,
                       entity_name_key, mention_context_text, mention_ctx_key,
                       mention_name_key, trigram_encode, type_onehot)
from ..errors import ConfigError, DataError, NumericError, XLinkerError
from ..experiments import (ExperimentSpec, Reduction, RerankSpec, TriageConfig,
                           grid, registry_from_synth)
from ..inference import (Prediction, load_predictions, predict, predict_dataset,
                         save_predictions)
from ..manifest import write_manifest
from ..metrics import evaluate, report_table, report_to_json
from ..nn import BranchMask, forward_batch
from ..ranker import (AuxConfig, LayerSizes, TrainConfig, load_checkpoint,
                      save_checkpoint, save_trace, train)
from ..store import EmbeddingStore, store_read, store_write
from ..synth import (SynthConfig, SynthWorld, load_name_pairs, save_anchors,
                     save_name_pairs)
from ..triage import (CandidateSet, build_prior, candidates, expand_kb,
                      load_candidates, load_prior, save_candidates, save_prior,
                      triage_recall)
from . import schemas as s

# Loaded-artifact cache keyed by (kind, path, mtime_ns, size); small FIFO.
_CACHE: dict[tuple, object] = {}
_CACHE_MAX = 16


def _cached(kind: str, path: str, loader):
    try:
        st = os.stat(path)
    except FileNotFoundError:
        raise DataError(f"no such file: {path}") from None
    key = (kind, os.path.abspath(path), st.st_mtime_ns, st.st_size)
    if key not in _CACHE:
        if len(_CACHE) >= _CACHE_MAX:
            _CACHE.pop(next(iter(_CACHE)))
        _CACHE[key] = loader(path)
    return _CACHE[key]


def _load_kb(path: str):
    return _cached("kb", path, load_entities)


def _load_store(path: str) -> EmbeddingStore:
    return _cached("store", path, store_read)


def _load_ckpt(path: str):
    return _cached("ckpt", path, load_checkpoint)


def _synth_config(p: s.SynthParams) -> SynthConfig:
    return SynthConfig(
        n_entities=p.n_entities, n_mentions=p.n_mentions,
        languages=tuple(p.languages), nil_rate=p.nil_rate,
        zipf_exponent=p.zipf_exponent, name_noise=p.name_noise,
        context_informativeness=p.context_informativeness, seed=p.seed,
        name_ambiguity=p.name_ambiguity, partial_rate=p.partial_rate,
        alias_pollution=p.alias_pollution, doc_size=p.doc_size,
    )


def _train_config(p: s.TrainParams, aux: AuxConfig | None, seed: int | None = None) -> TrainConfig:
    return TrainConfig(
        lr=p.lr, epochs=p.epochs, dropout=p.dropout, margin=p.margin,
        n_negatives=p.n_negatives, batch_size=p.batch_size,
        layers=LayerSizes(tuple(p.layers.name), tuple(p.layers.context),
                          tuple(p.layers.type), tuple(p.layers.final)),
        aux=aux, seed=p.seed if seed is None else seed,
    )


def _triage_config(p: s.TriageParams) -> TriageConfig:
    return TriageConfig(k=p.k, l=p.l, normalize=p.normalize)


def create_app() -> FastAPI:
    app = FastAPI(title="xlinker", version=__version__,
                  description="Cross-language entity linking pipeline service")

    @app.exception_handler(XLinkerError)
    async def xlinker_error(_req: Request, exc: XLinkerError):
        return JSONResponse(status_code=400,
                            content={"code": exc.code, "message": str(exc)})

    @app.exception_handler(RequestValidationError)
    async def validation_error(_req: Request, exc: RequestValidationError):
        return JSONResponse(status_code=422,
                            content={"code": "config", "message": str(exc.errors())})

    @app.exception_handler(OSError)
    async def os_error(_req: Request, exc: OSError):
        return JSONResponse(status_code=400,
                            content={"code": "data", "message": str(exc)})

    @app.get("/v1/health", response_model=s.HealthResponse)
    def health():
        return s.HealthResponse(status="ok", version=__version__)

    @app.post("/v1/synth", response_model=s.SynthResponse)
    def synth(req: s.SynthRequest):
        cfg = _synth_config(req.config)
        world = SynthWorld(cfg)
        os.makedirs(req.out_dir, exist_ok=True)
        kb_path = os.path.join(req.out_dir, "kb.jsonl")
        save_entities(world.kb(), kb_path)
        mention_paths = {}
        for lang, ds in world.datasets().items():
            p = os.path.join(req.out_dir, f"mentions-{lang}.jsonl")
            save_mentions(ds, p)
            mention_paths[lang] = p
        anchors_path = os.path.join(req.out_dir, "anchors.tsv")
        save_anchors(world.anchors(), anchors_path)
        pair_paths = {}
        if req.n_name_pairs > 0:
            for lang in cfg.languages:
                p = os.path.join(req.out_dir, f"name-pairs-{lang}.tsv")
                save_name_pairs(world.name_pairs(lang, req.n_name_pairs), p)
                pair_paths[lang] = p
        manifest_path = os.path.join(req.out_dir, "synth.manifest.json")
        outputs = [kb_path, anchors_path, *mention_paths.values(), *pair_paths.values()]
        write_manifest(manifest_path, "synth", req.model_dump(), [], outputs)
        return s.SynthResponse(kb_path=kb_path, mention_paths=mention_paths,
                               anchors_path=anchors_path, name_pair_paths=pair_paths,
                               manifest_path=manifest_path)

    @app.post("/v1/ingest", response_model=s.IngestResponse)
    def ingest(req: s.IngestRequest):
        kb = _load_kb(req.kb_path)
        ds = load_mentions(req.mentions_path, kb)
        save_mentions(ds, req.out_path)
        manifest_path = req.out_path + ".manifest.json"
        write_manifest(manifest_path, "ingest", req.model_dump(),
                       [req.mentions_path, req.kb_path], [req.out_path])
        return s.IngestResponse(out_path=req.out_path, n_mentions=len(ds),
                                n_documents=len(ds.documents),
                                n_nil=sum(1 for m in ds.mentions if m.is_nil()),
                                manifest_path=manifest_path)

    @app.post("/v1/build-prior", response_model=s.BuildPriorResponse)
    def build_prior_op(req: s.BuildPriorRequest):
        from ..synth import load_anchors

        anchors = load_anchors(req.anchors_path)
        prior = build_prior(anchors, _triage_config(req.triage))
        save_prior(prior, req.out_path)
        manifest_path = req.out_path + ".manifest.json"
        write_manifest(manifest_path, "build-prior", req.model_dump(),
                       [req.anchors_path], [req.out_path])
        return s.BuildPriorResponse(out_path=req.out_path,
                                    n_surfaces=len(prior.table),
                                    manifest_path=manifest_path)

    @app.post("/v1/triage", response_model=s.TriageResponse)
    def triage_op(req: s.TriageRequest):
        kb = _load_kb(req.kb_path)
        ds = load_mentions(req.mentions_path, kb)
        prior = load_prior(req.prior_path)
        cfg = _triage_config(req.triage)
        sets = []
        for m in ds.mentions:
            cs = candidates(m, prior, cfg)
            if req.expand:
                cs = expand_kb(cs, kb, m, cfg)
            sets.append(cs)
        save_candidates(sets, req.out_path)
        by_mention = {cs.mention_id: cs for cs in sets}
        recall = triage_recall(by_mention, ds)
        mean_sz = sum(len(cs) for cs in sets) / len(sets) if sets else 0.0
        manifest_path = req.out_path + ".manifest.json"
        write_manifest(manifest_path, "triage", req.model_dump(),
                       [req.mentions_path, req.kb_path, req.prior_path],
                       [req.out_path])
        return s.TriageResponse(out_path=req.out_path, recall=recall,
                                mean_candidates=mean_sz, manifest_path=manifest_path)

    @app.post("/v1/encode-test", response_model=s.EncodeTestResponse)
    def encode_test(req: s.EncodeTestRequest):
        kb = _load_kb(req.kb_path)
        ds = load_mentions(req.mentions_path, kb)
        store = encode_corpus(ds, kb, req.dim, req.seed)
        store_write(store, req.out_path)
        manifest_path = req.out_path + ".manifest.json"
        write_manifest(manifest_path, "encode-test", req.model_dump(),
                       [req.mentions_path, req.kb_path], [req.out_path])
        return s.EncodeTestResponse(out_path=req.out_path, dim=store.dim,
                                    n_records=len(store), manifest_path=manifest_path)

    @app.post("/v1/train", response_model=s.TrainResponse)
    def train_op(req: s.TrainRequest):
        kb = _load_kb(req.kb_path)
        ds = load_mentions(req.mentions_path, kb)
        cands = load_candidates(req.candidates_path)
        store = _load_store(req.store_path)
        mask = BranchMask.parse(req.mask)
        aux_cfg = None
        aux_pairs = None
        if req.aux is not None:
            aux_cfg = AuxConfig(pairs_path=req.aux.pairs_path,
                                subset_k=req.aux.subset_k,
                                n_negatives=req.aux.n_negatives)
            aux_pairs = load_name_pairs(req.aux.pairs_path)
        cfg = _train_config(req.train, aux_cfg)
        vocabs = build_type_vocab(ds, kb, req.vocab_min_count)
        encode_fn = lambda text: trigram_encode(text, store.dim, req.encoder_seed)
        result = train(ds, kb, cands, store, vocabs, cfg, mask,
                       aux_pairs=aux_pairs, encode_fn=encode_fn)
        meta = {
            "mask": mask.as_str(),
            "dim": store.dim,
            "encoder_seed": req.encoder_seed,
            "vocab_min_count": req.vocab_min_count,
            "vocab_mention": list(vocabs[0].tags),
            "vocab_entity": list(vocabs[1].tags),
            "train": req.train.model_dump(),
        }
        save_checkpoint(result.params, req.out_checkpoint, meta)
        outputs = [req.out_checkpoint, req.out_checkpoint + ".meta.json"]
        if req.out_trace:
            save_trace(result.trace, req.out_trace)
            outputs.append(req.out_trace)
        manifest_path = req.out_checkpoint + ".manifest.json"
        inputs = [req.mentions_path, req.kb_path, req.candidates_path, req.store_path]
        if req.aux is not None:
            inputs.append(req.aux.pairs_path)
        write_manifest(manifest_path, "train", req.model_dump(), inputs, outputs)
        n_trainable = sum(1 for m in ds.mentions if not m.is_nil()
                          and m.id in cands
                          and any(e != m.gold for e in cands[m.id].ids()))
        return s.TrainResponse(checkpoint_path=req.out_checkpoint,
                               trace_path=req.out_trace, n_trainable=n_trainable,
                               first_loss=result.trace[0][1],
                               final_loss=result.trace[-1][1],
                               manifest_path=manifest_path)

    def _vocabs_from_meta(meta: dict) -> tuple[TypeVocab, TypeVocab]:
        mc = int(meta.get("vocab_min_count", 100))
        return (TypeVocab(tuple(meta["vocab_mention"]), mc),
                TypeVocab(tuple(meta["vocab_entity"]), mc))

    @app.post("/v1/predict", response_model=s.PredictResponse)
    def predict_op(req: s.PredictRequest):
        kb = _load_kb(req.kb_path)
        ds = load_mentions(req.mentions_path, kb)
        cands = load_candidates(req.candidates_path)
        store = _load_store(req.store_path)
        params, meta = _load_ckpt(req.checkpoint_path)
        if not meta:
            raise DataError(f"missing checkpoint meta {req.checkpoint_path}.meta.json")
        if int(meta["dim"]) != store.dim:
            raise NumericError(f"store dim {store.dim} does not match "
                               f"checkpoint dim {meta['dim']}")
        mask = BranchMask.parse(meta["mask"])
        vocabs = _vocabs_from_meta(meta)
        pop = None
        inputs = [req.mentions_path, req.kb_path, req.candidates_path,
                  req.store_path, req.checkpoint_path]
        if req.rerank.kind == "popularity":
            if not req.rerank.popularity_from:
                raise ConfigError("popularity rerank needs rerank.popularity_from")
            pop_ds = load_mentions(req.rerank.popularity_from, kb)
            pop = popularity_counts(pop_ds)
            inputs.append(req.rerank.popularity_from)
        preds = predict_dataset(ds, cands, kb, store, vocabs, params, mask,
                                req.threshold, pop, req.rerank.top_n)
        save_predictions(preds, req.out_path)
        manifest_path = req.out_path + ".manifest.json"
        write_manifest(manifest_path, "predict", req.model_dump(), inputs,
                       [req.out_path])
        return s.PredictResponse(out_path=req.out_path, n_mentions=len(preds),
                                 n_nil=sum(1 for p in preds if p.predicted == NIL),
                                 manifest_path=manifest_path)

    @app.post("/v1/evaluate", response_model=s.EvaluateResponse)
    def evaluate_op(req: s.EvaluateRequest):
        kb = _load_kb(req.kb_path)
        gold = load_mentions(req.mentions_path, kb)
        preds = load_predictions(req.predictions_path)
        report = evaluate(preds, gold)
        table = report_table({"eval": report})
        out_path = None
        manifest_path = None
        if req.out_path:
            with open(req.out_path, "w", encoding="utf-8") as f:
                f.write(report_to_json(report))
            out_path = req.out_path
            manifest_path = req.out_path + ".manifest.json"
            write_manifest(manifest_path, "evaluate", req.model_dump(),
                           [req.predictions_path, req.mentions_path, req.kb_path],
                           [req.out_path])
        return s.EvaluateResponse(micro_avg=report.micro_avg,
                                  precision=report.precision, recall=report.recall,
                                  f1=report.f1, counts=report.counts(), table=table,
                                  out_path=out_path, manifest_path=manifest_path)

    @app.post("/v1/experiment", response_model=s.ExperimentResponse)
    def experiment_op(req: s.ExperimentRequest):
        synth_cfg = _synth_config(req.synth)
        reg = registry_from_synth(
            synth_cfg, dim=req.registry.dim, encoder_seed=req.registry.encoder_seed,
            triage_cfg=_triage_config(req.registry.triage),
            dev_fraction=req.registry.dev_fraction, split_seed=req.registry.split_seed,
            vocab_min_count=req.registry.vocab_min_count,
            n_name_pairs=req.registry.n_name_pairs)
        specs = [ExperimentSpec(
            name=sp.name, train_languages=tuple(sp.train_languages),
            eval_languages=tuple(sp.eval_languages), mask=BranchMask.parse(sp.mask),
            reduction=Reduction(sp.reduction.kind, sp.reduction.fraction,
                                sp.reduction.cap),
            aux_language=sp.aux_language, aux_pairs_path=sp.aux_pairs_path,
            rerank=RerankSpec(sp.rerank.kind, sp.rerank.source, sp.rerank.top_n),
            threshold=sp.threshold, seeds=tuple(sp.seeds),
        ) for sp in req.specs]
        train_cfg = _train_config(req.train, None)
        report = grid(specs, reg, train_cfg)
        os.makedirs(req.out_dir, exist_ok=True)
        csv_path = os.path.join(req.out_dir, "experiments.csv")
        md_path = os.path.join(req.out_dir, "experiments.md")
        with open(csv_path, "w", encoding="utf-8") as f:
            f.write(report.to_csv())
        with open(md_path, "w", encoding="utf-8") as f:
            f.write(report.to_markdown())
        manifest_path = os.path.join(req.out_dir, "experiments.manifest.json")
        write_manifest(manifest_path, "experiment", req.model_dump(), [],
                       [csv_path, md_path])
        means = {name: res.means for name, res in report.results.items()}
        return s.ExperimentResponse(csv_path=csv_path, markdown_path=md_path,
                                    f1_matrix=report.f1_matrix, means=means,
                                    manifest_path=manifest_path)

    @app.post("/v1/link", response_model=s.LinkResponse)
    def link(req: s.LinkRequest):
        kb = _load_kb(req.kb_path)
        prior = load_prior(req.prior_path)
        params, meta = _load_ckpt(req.checkpoint_path)
        if not meta:
            raise DataError(f"missing checkpoint meta {req.checkpoint_path}.meta.json")
        mask = BranchMask.parse(meta["mask"])
        vocabs = _vocabs_from_meta(meta)
        dim = int(meta["dim"])
        enc_seed = int(meta["encoder_seed"])
        m = Mention(id=req.mention.id, doc_id=req.mention.doc_id,
                    language=req.mention.language, surface=req.mention.surface,
                    sentence=req.mention.sentence or req.mention.surface,
                    context_window=tuple(req.mention.context_window),
                    mention_type=req.mention.mention_type, gold=NIL)
        cfg = TriageConfig(k=req.k, l=max(req.k, 200), normalize=prior.normalize)
        cs = candidates(m, prior, cfg)
        priors = dict(cs.candidates)
        m_name = trigram_encode(m.surface, dim, enc_seed)
        m_ctx = trigram_encode(mention_context_text(m), dim, enc_seed)
        m_type = type_onehot([m.mention_type], vocabs[0])
        rows_n, rows_c, rows_t = [], [], []
        ids = []
        for eid in cs.ids():
            e = kb.get(eid)
            rows_n.append(np.concatenate([m_name, trigram_encode(e.name, dim, enc_seed)]))
            rows_c.append(np.concatenate([m_ctx, trigram_encode(e.description, dim, enc_seed)]))
            rows_t.append(np.concatenate([m_type, type_onehot(e.types, vocabs[1])]))
            ids.append(eid)
        if ids:
            scores = forward_batch(params, mask, np.asarray(rows_n), np.asarray(rows_c),
                                   np.asarray(rows_t))
            ranked = sorted(zip(ids, (float(x) for x in scores)),
                            key=lambda e: (-e[1], e[0]))
        else:
            ranked = []
        pred = predict(m.id, ranked, req.threshold)
        return s.LinkResponse(
            predicted=pred.predicted, score=pred.score,
            ranked=[s.RankedEntity(entity_id=e, name=kb.get(e).name, score=sc,
                                   prior=priors.get(e, 0.0)) for e, sc in ranked])

    return app


app = create_app()
