"""Command-line client for the linking service.

Every subcommand drives the service API: against a remote server when
--server is given, otherwise against an in-process application instance
(no network, same code path). Exit codes: 0 ok, 2 config error, 3 data
error, 4 numeric failure, 1 anything else.
"""
from __future__ import annotations

import asyncio
import json
import sys

import click
import httpx

_EXIT_BY_CODE = {"config": 2, "data": 3, "numeric": 4}


class Client:
    """POSTs to a remote server when given one, else to an in-process
    application instance over an ASGI transport (same code path, no network).
    """

    def __init__(self, server: str | None):
        self._server = server
        self._app = None
        if server is None:
            from .service import app

            self._app = app

    def _request(self, path: str, payload: dict) -> httpx.Response:
        if self._server:
            with httpx.Client(base_url=self._server, timeout=None) as client:
                return client.post(path, json=payload)

        async def go():
            transport = httpx.ASGITransport(app=self._app)
            async with httpx.AsyncClient(transport=transport, timeout=None,
                                         base_url="http://xlinker.internal") as client:
                return await client.post(path, json=payload)

        return asyncio.run(go())

    def post(self, path: str, payload: dict) -> dict:
        try:
            resp = self._request(path, payload)
        except httpx.HTTPError as exc:
            _fail("transport", f"request to {path} failed: {exc}", 1)
        except Exception as exc:  # unexpected server-side failure, in-process
            _fail("error", f"{type(exc).__name__}: {exc}", 1)
        if resp.status_code != 200:
            try:
                body = resp.json()
                code = body.get("code", "error")
                message = body.get("message", resp.text)
            except ValueError:
                code, message = "error", resp.text
            _fail(code, message, _EXIT_BY_CODE.get(code, 1))
        return resp.json()


def _fail(code: str, message: str, exit_code: int):
    message = " ".join(str(message).split())
    print(f'xlinker: error code={code} message="{message}"', file=sys.stderr)
    sys.exit(exit_code)


def _emit(obj: dict) -> None:
    print(json.dumps(obj, sort_keys=True))


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            cfg = json.load(f)
    except FileNotFoundError:
        _fail("config", f"config file not found: {path}", 2)
    except json.JSONDecodeError as exc:
        _fail("config", f"malformed config file {path}: {exc.msg}", 2)
    if not isinstance(cfg, dict):
        _fail("config", f"config file {path} must hold a JSON object", 2)
    return cfg


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if value is None:
            continue
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


@click.group()
@click.option("--server", default=None, help="Remote service URL; default runs in-process.")
@click.option("--config", "config_path", default=None, type=click.Path(),
              help="JSON config file with per-command defaults.")
@click.pass_context
def main(ctx, server, config_path):
    """Cross-language entity linking pipeline."""
    ctx.ensure_object(dict)
    ctx.obj["config"] = _load_config(config_path)
    ctx.obj["client"] = Client(server)


def _section(ctx, name: str) -> dict:
    return dict(ctx.obj["config"].get(name, {}))


@main.command()
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None)
@click.option("--n-entities", type=int, default=None)
@click.option("--n-mentions", type=int, default=None)
@click.option("--languages", default=None, help="Comma-separated language tags.")
@click.option("--nil-rate", type=float, default=None)
@click.option("--zipf-exponent", type=float, default=None)
@click.option("--name-noise", type=float, default=None)
@click.option("--context-informativeness", type=float, default=None)
@click.option("--name-ambiguity", type=float, default=None)
@click.option("--partial-rate", type=float, default=None)
@click.option("--alias-pollution", type=float, default=None)
@click.option("--name-pairs", "n_name_pairs", type=int, default=None,
              help="Also emit this many name pairs per language.")
@click.pass_context
def synth(ctx, out_dir, seed, n_entities, n_mentions, languages, nil_rate,
          zipf_exponent, name_noise, context_informativeness, name_ambiguity,
          partial_rate, alias_pollution, n_name_pairs):
    """Generate a synthetic corpus, KB, anchors, and name pairs."""
    cfg = _merge(_section(ctx, "synth"), {
        "n_entities": n_entities, "n_mentions": n_mentions,
        "languages": languages.split(",") if languages else None,
        "nil_rate": nil_rate, "zipf_exponent": zipf_exponent,
        "name_noise": name_noise,
        "context_informativeness": context_informativeness,
        "name_ambiguity": name_ambiguity, "partial_rate": partial_rate,
        "alias_pollution": alias_pollution, "seed": seed,
    })
    payload = {"out_dir": out_dir, "config": cfg}
    if n_name_pairs is not None:
        payload["n_name_pairs"] = n_name_pairs
    _emit(ctx.obj["client"].post("/v1/synth", payload))


@main.command()
@click.option("--mentions", "mentions_path", required=True, type=click.Path())
@click.option("--kb", "kb_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def ingest(ctx, mentions_path, kb_path, out_path):
    """Validate a mention corpus against a KB and write it back canonically."""
    _emit(ctx.obj["client"].post("/v1/ingest", {
        "mentions_path": mentions_path, "kb_path": kb_path, "out_path": out_path}))


@main.command("build-prior")
@click.option("--anchors", "anchors_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--k", type=int, default=None)
@click.option("--l", type=int, default=None)
@click.option("--raw-surfaces", is_flag=True, default=False,
              help="Skip case-fold/whitespace normalization.")
@click.pass_context
def build_prior(ctx, anchors_path, out_path, k, l, raw_surfaces):
    """Estimate P(entity | surface) from anchor counts."""
    triage_cfg = _merge(_section(ctx, "triage"),
                        {"k": k, "l": l,
                         "normalize": False if raw_surfaces else None})
    _emit(ctx.obj["client"].post("/v1/build-prior", {
        "anchors_path": anchors_path, "out_path": out_path, "triage": triage_cfg}))


@main.command()
@click.option("--mentions", "mentions_path", required=True, type=click.Path())
@click.option("--kb", "kb_path", required=True, type=click.Path())
@click.option("--prior", "prior_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--k", type=int, default=None)
@click.option("--l", type=int, default=None)
@click.option("--expand", is_flag=True, default=False,
              help="Two-step KB expansion over candidate titles.")
@click.pass_context
def triage(ctx, mentions_path, kb_path, prior_path, out_path, k, l, expand):
    """Produce top-k candidate sets per mention."""
    triage_cfg = _merge(_section(ctx, "triage"), {"k": k, "l": l})
    _emit(ctx.obj["client"].post("/v1/triage", {
        "mentions_path": mentions_path, "kb_path": kb_path,
        "prior_path": prior_path, "out_path": out_path,
        "triage": triage_cfg, "expand": expand}))


@main.command("encode-test")
@click.option("--mentions", "mentions_path", required=True, type=click.Path())
@click.option("--kb", "kb_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--dim", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.pass_context
def encode_test(ctx, mentions_path, kb_path, out_path, dim, seed):
    """Run the deterministic trigram test encoder into an embedding store."""
    cfg = _merge(_section(ctx, "encode"), {"dim": dim, "seed": seed})
    payload = {"mentions_path": mentions_path, "kb_path": kb_path,
               "out_path": out_path, **cfg}
    _emit(ctx.obj["client"].post("/v1/encode-test", payload))


@main.command()
@click.option("--mentions", "mentions_path", required=True, type=click.Path())
@click.option("--kb", "kb_path", required=True, type=click.Path())
@click.option("--candidates", "candidates_path", required=True, type=click.Path())
@click.option("--store", "store_path", required=True, type=click.Path())
@click.option("--out", "out_checkpoint", required=True, type=click.Path())
@click.option("--trace", "out_trace", default=None, type=click.Path())
@click.option("--seed", type=int, default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--lr", type=float, default=None)
@click.option("--dropout", type=float, default=None)
@click.option("--margin", type=float, default=None)
@click.option("--n-negatives", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--mask", default=None, help="Enabled branches, e.g. name,context,type.")
@click.option("--aux-pairs", "aux_pairs", default=None, type=click.Path(),
              help="Name-pair TSV enabling the auxiliary objective.")
@click.option("--encoder-seed", type=int, default=None)
@click.option("--vocab-min-count", type=int, default=None)
@click.pass_context
def train(ctx, mentions_path, kb_path, candidates_path, store_path, out_checkpoint,
          out_trace, seed, epochs, lr, dropout, margin, n_negatives, batch_size,
          mask, aux_pairs, encoder_seed, vocab_min_count):
    """Train the pairwise ranker on triage candidates."""
    section = _section(ctx, "train")
    train_cfg = _merge(section.get("train", {}), {
        "seed": seed, "epochs": epochs, "lr": lr, "dropout": dropout,
        "margin": margin, "n_negatives": n_negatives, "batch_size": batch_size})
    payload = _merge(section, {
        "mentions_path": mentions_path, "kb_path": kb_path,
        "candidates_path": candidates_path, "store_path": store_path,
        "out_checkpoint": out_checkpoint, "out_trace": out_trace,
        "train": train_cfg, "mask": mask, "encoder_seed": encoder_seed,
        "vocab_min_count": vocab_min_count})
    if aux_pairs:
        payload["aux"] = _merge(section.get("aux", {}), {"pairs_path": aux_pairs})
    _emit(ctx.obj["client"].post("/v1/train", payload))


@main.command()
@click.option("--mentions", "mentions_path", required=True, type=click.Path())
@click.option("--kb", "kb_path", required=True, type=click.Path())
@click.option("--candidates", "candidates_path", required=True, type=click.Path())
@click.option("--store", "store_path", required=True, type=click.Path())
@click.option("--checkpoint", "checkpoint_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--threshold", type=float, default=None)
@click.option("--rerank", type=click.Choice(["none", "popularity"]), default=None)
@click.option("--popularity-from", default=None, type=click.Path(),
              help="Mentions JSONL whose gold counts form the popularity table.")
@click.option("--top-n", type=int, default=None)
@click.pass_context
def predict(ctx, mentions_path, kb_path, candidates_path, store_path,
            checkpoint_path, out_path, threshold, rerank, popularity_from, top_n):
    """Score candidates, apply the NIL threshold, optionally re-rank."""
    section = _section(ctx, "predict")
    rerank_over = {k: v for k, v in
                   (("kind", rerank), ("popularity_from", popularity_from),
                    ("top_n", top_n)) if v is not None}
    payload = _merge(section, {
        "mentions_path": mentions_path, "kb_path": kb_path,
        "candidates_path": candidates_path, "store_path": store_path,
        "checkpoint_path": checkpoint_path, "out_path": out_path,
        "threshold": threshold,
        "rerank": rerank_over or None})
    _emit(ctx.obj["client"].post("/v1/predict", payload))


@main.command()
@click.option("--predictions", "predictions_path", required=True, type=click.Path())
@click.option("--mentions", "mentions_path", required=True, type=click.Path())
@click.option("--kb", "kb_path", required=True, type=click.Path())
@click.option("--out", "out_path", default=None, type=click.Path())
@click.pass_context
def evaluate(ctx, predictions_path, mentions_path, kb_path, out_path):
    """Score predictions: precision, recall, F1, micro-average."""
    resp = ctx.obj["client"].post("/v1/evaluate", {
        "predictions_path": predictions_path, "mentions_path": mentions_path,
        "kb_path": kb_path, "out_path": out_path})
    table = resp.pop("table", "")
    _emit(resp)
    if table:
        print(table, end="")


@main.command()
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.pass_context
def experiment(ctx, out_dir):
    """Run the experiment grid defined in the config file."""
    section = _section(ctx, "experiment")
    if not section.get("specs"):
        _fail("config", "config file must define experiment.specs", 2)
    payload = _merge(section, {"out_dir": out_dir})
    _emit(ctx.obj["client"].post("/v1/experiment", payload))


@main.command()
@click.option("--kb", "kb_path", required=True, type=click.Path())
@click.option("--prior", "prior_path", required=True, type=click.Path())
@click.option("--checkpoint", "checkpoint_path", required=True, type=click.Path())
@click.option("--surface", required=True)
@click.option("--sentence", default=None)
@click.option("--context", "context_window", multiple=True)
@click.option("--mention-type", default="PER")
@click.option("--language", default="xx")
@click.option("--k", type=int, default=10)
@click.option("--threshold", type=float, default=-1.0)
@click.pass_context
def link(ctx, kb_path, prior_path, checkpoint_path, surface, sentence,
         context_window, mention_type, language, k, threshold):
    """Link one ad-hoc mention and print the ranked entities."""
    _emit(ctx.obj["client"].post("/v1/link", {
        "kb_path": kb_path, "prior_path": prior_path,
        "checkpoint_path": checkpoint_path,
        "mention": {"surface": surface, "sentence": sentence or surface,
                    "context_window": list(context_window),
                    "mention_type": mention_type, "language": language},
        "k": k, "threshold": threshold}))


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(host, port):
    """Run the pipeline service."""
    import uvicorn

    from .service import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
