"""Run manifests: config hash plus input/output file hashes, written next to
every artifact so identical reruns are verifiable by hash comparison."""
from __future__ import annotations

import hashlib
import json


def file_sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(obj) -> str:
    canon = json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def write_manifest(path: str, op: str, config, inputs: list[str],
                   outputs: list[str]) -> dict:
    manifest = {
        "op": op,
        "config_hash": config_hash(config),
        "config": config,
        "inputs": {p: file_sha256(p) for p in sorted(inputs)},
        "outputs": {p: file_sha256(p) for p in sorted(outputs)},
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, sort_keys=True, indent=1, ensure_ascii=False)
        f.write("\n")
    return manifest
