"""Bridge CLI: export transformer embeddings for a corpus and KB."""
from __future__ import annotations

import json
import sys

import click

from .encoder import BridgeConfig, TransformerBridge
from .export import export_store


@click.group()
def main():
    """Multilingual transformer embeddings in the linker's store format."""


@main.command()
@click.option("--model", default="bert-base-multilingual-cased",
              help="Pretrained encoder identifier.")
@click.option("--mentions", "mentions_path", required=True, type=click.Path(exists=True))
@click.option("--kb", "kb_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--max-subwords", type=int, default=512)
@click.option("--pooling", type=click.Choice(["first_block", "embeddings"]),
              default="first_block", help="Which lowest layer feeds name pooling.")
@click.option("--batch-size", type=int, default=16)
@click.option("--device", default="cpu")
def export(model, mentions_path, kb_path, out_path, max_subwords, pooling,
           batch_size, device):
    """Encode every mention and entity into a binary embedding store."""
    try:
        cfg = BridgeConfig(model=model, max_subwords=max_subwords,
                           lowest_layer=pooling, batch_size=batch_size,
                           device=device)
        bridge = TransformerBridge.from_pretrained(cfg)
        stats = export_store(mentions_path, kb_path, out_path, bridge)
    except Exception as exc:
        print(f'bridge: error message="{exc}"', file=sys.stderr)
        sys.exit(1)
    print(json.dumps(stats, sort_keys=True))


if __name__ == "__main__":
    main()
