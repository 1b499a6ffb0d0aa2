"""Export mention and entity embeddings into the binary store format."""
from __future__ import annotations

from .corpus import read_entities, read_mentions
from .encoder import TransformerBridge
from .storefmt import write_store


def export_store(mentions_path: str, kb_path: str, out_path: str,
                 bridge: TransformerBridge) -> dict:
    """Write keys m:<id>:name|ctx and e:<id>:name|ctx for every mention and
    entity; empty descriptions get zero context vectors."""
    mentions = read_mentions(mentions_path)
    entities = read_entities(kb_path)
    records = {}

    name_vecs = bridge.encode_names([(m.surface, m.sentence) for m in mentions])
    ctx_ids = []
    for m in mentions:
        window = list(m.context_window)
        center = len(window) // 2
        sentences = window[:center] + [m.sentence] + window[center:]
        ctx_ids.append(bridge.window_ids(sentences, center))
    ctx_vecs = bridge.encode_cls_batch(ctx_ids)
    for m, nv, cv in zip(mentions, name_vecs, ctx_vecs):
        records[f"m:{m.id}:name"] = nv
        records[f"m:{m.id}:ctx"] = cv

    ename_vecs = bridge.encode_names([(e.name, None) for e in entities])
    edesc_ids = [bridge.description_ids(e.description) if e.description else None
                 for e in entities]
    edesc_vecs = bridge.encode_cls_batch(edesc_ids)
    for e, nv, cv in zip(entities, ename_vecs, edesc_vecs):
        records[f"e:{e.id}:name"] = nv
        records[f"e:{e.id}:ctx"] = cv

    write_store(records, bridge.dim, out_path)
    return {
        "out_path": out_path,
        "dim": bridge.dim,
        "n_records": len(records),
        "n_mentions": len(mentions),
        "n_entities": len(entities),
        "max_input_len": bridge.max_input_len,
    }
