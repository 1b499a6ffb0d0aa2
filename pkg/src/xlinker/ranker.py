"""Pairwise hinge-loss training of the scoring network.

Each training example pairs a mention with its gold entity and up to n
negatively sampled triage candidates; the loss pushes the gold score above
the best negative by a margin. Training is single-threaded and fully
deterministic per seed. The auxiliary phase trains the name branch plus a
disposable matching head on cross-language name pairs before each main
epoch.
"""
from __future__ import annotations

import json
import random
import struct
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, KnowledgeBase, Mention
from .encoder import RepresentationBundle, TypeVocab, assemble_entity, assemble_mention
from .errors import ConfigError, DataError, NumericError
from .nn import (Adam, Affine, BranchMask, RankerParams, backward_batch,
                 forward_batch, init_segment, matcher_backward, matcher_forward)
from .store import EmbeddingStore
from .triage import CandidateSet

CHECKPOINT_MAGIC = b"XLPR"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class LayerSizes:
    name: tuple[int, ...] = (512,)
    context: tuple[int, ...] = (512,)
    type: tuple[int, ...] = (64,)
    final: tuple[int, ...] = (512, 256)

    def __post_init__(self):
        for branch in ("name", "context", "type", "final"):
            sizes = getattr(self, branch)
            if isinstance(sizes, int):
                object.__setattr__(self, branch, (sizes,))
            elif not isinstance(sizes, tuple):
                object.__setattr__(self, branch, tuple(sizes))
            if any(s < 1 for s in getattr(self, branch)):
                raise ConfigError(f"{branch} layer sizes must be positive")


@dataclass(frozen=True)
class AuxConfig:
    pairs_path: str | None = None
    subset_k: int = 50000
    n_negatives: int = 9

    def __post_init__(self):
        if self.subset_k < 1 or self.n_negatives < 1:
            raise ConfigError("aux subset_k and n_negatives must be >= 1")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    epochs: int = 250
    dropout: float = 0.2
    margin: float = 0.5
    n_negatives: int = 9
    batch_size: int = 32
    layers: LayerSizes = field(default_factory=LayerSizes)
    aux: AuxConfig | None = None
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if not (0.0 <= self.dropout < 1.0):
            raise ConfigError(f"dropout must be in [0,1), got {self.dropout}")
        if self.margin <= 0:
            raise ConfigError(f"margin must be > 0, got {self.margin}")
        if self.n_negatives < 1:
            raise ConfigError(f"n_negatives must be >= 1, got {self.n_negatives}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")


@dataclass(frozen=True)
class RankerDims:
    store_dim: int
    n_mention_types: int
    n_entity_types: int

    @property
    def name_in(self) -> int:
        return 2 * self.store_dim

    @property
    def context_in(self) -> int:
        return 2 * self.store_dim

    @property
    def type_in(self) -> int:
        return self.n_mention_types + self.n_entity_types


def init_params(cfg: TrainConfig, dims: RankerDims, seed: int) -> RankerParams:
    """Fan-in-scaled uniform weights, zero biases, deterministic per seed."""
    if dims.store_dim < 1:
        raise NumericError(f"store dim must be >= 1, got {dims.store_dim}")
    rng = np.random.default_rng(seed)
    name_layers = init_segment(rng, dims.name_in, cfg.layers.name)
    context_layers = init_segment(rng, dims.context_in, cfg.layers.context)
    type_layers = init_segment(rng, dims.type_in, cfg.layers.type)
    branch_out = cfg.layers.name[-1] + cfg.layers.context[-1] + cfg.layers.type[-1]
    final_layers = init_segment(rng, branch_out, cfg.layers.final + (1,))
    matcher = init_segment(rng, cfg.layers.name[-1], (1,))[0]
    return RankerParams(name_layers, context_layers, type_layers, final_layers, matcher)


def pair_input(mb: RepresentationBundle, eb: RepresentationBundle):
    x_name = np.concatenate([mb.name_vec, eb.name_vec])[None, :]
    x_ctx = np.concatenate([mb.context_vec, eb.context_vec])[None, :]
    x_type = np.concatenate([mb.type_vec, eb.type_vec])[None, :]
    return x_name, x_ctx, x_type


def forward(mb: RepresentationBundle, eb: RepresentationBundle, params: RankerParams,
            mask: BranchMask, mode: str = "infer", dropout_p: float = 0.0,
            rng: np.random.Generator | None = None) -> float:
    """Score one mention/entity pair. Train mode applies inverted dropout at
    every hidden layer; infer mode is deterministic."""
    x_name, x_ctx, x_type = pair_input(mb, eb)
    p = dropout_p if mode == "train" else 0.0
    scores = forward_batch(params, mask, x_name, x_ctx, x_type, p,
                           rng if mode == "train" else None)
    return float(scores[0])


def hinge_loss(pos: float, negs, margin: float) -> float:
    if len(negs) == 0:
        raise DataError("hinge loss needs at least one negative score")
    return max(0.0, margin - (pos - max(negs)))


def grad(batch, params: RankerParams, cfg: TrainConfig, mask: BranchMask,
         dropout_rng: np.random.Generator | None = None):
    """Gradients of the mean batch hinge loss for every parameter.

    batch: list of (mention bundle, gold bundle, [negative bundles]).
    Dropout applies only when a dropout_rng is supplied. Returns
    (grads dict, mean loss).
    """
    rows_n, rows_c, rows_t = [], [], []
    spans = []  # (pos row, first neg row, n negs)
    for mb, eb_pos, eb_negs in batch:
        if not eb_negs:
            raise DataError("each training example needs at least one negative")
        start = len(rows_n)
        for eb in (eb_pos, *eb_negs):
            xn, xc, xt = pair_input(mb, eb)
            rows_n.append(xn[0])
            rows_c.append(xc[0])
            rows_t.append(xt[0])
        spans.append((start, start + 1, len(eb_negs)))
    x_name = np.asarray(rows_n, dtype=np.float64)
    x_ctx = np.asarray(rows_c, dtype=np.float64)
    x_type = np.asarray(rows_t, dtype=np.float64)
    p = cfg.dropout if dropout_rng is not None else 0.0
    scores, cache = forward_batch(params, mask, x_name, x_ctx, x_type, p,
                                  dropout_rng, want_cache=True)
    dscores = np.zeros_like(scores)
    total = 0.0
    inv_b = 1.0 / len(batch)
    for pos_row, neg_start, n_negs in spans:
        neg_scores = scores[neg_start:neg_start + n_negs]
        j = int(np.argmax(neg_scores))
        loss = cfg.margin - (scores[pos_row] - neg_scores[j])
        if loss > 0.0:
            total += loss
            dscores[pos_row] -= inv_b
            dscores[neg_start + j] += inv_b
    grads = backward_batch(params, mask, cache, dscores)
    return grads, total * inv_b


def batch_loss(batch, params: RankerParams, cfg: TrainConfig, mask: BranchMask) -> float:
    """Mean batch hinge loss, forward only (no dropout); the independent
    counterpart of grad() for finite-difference checks."""
    total = 0.0
    for mb, eb_pos, eb_negs in batch:
        if not eb_negs:
            raise DataError("each training example needs at least one negative")
        rows = [pair_input(mb, eb) for eb in (eb_pos, *eb_negs)]
        x_name = np.vstack([r[0] for r in rows])
        x_ctx = np.vstack([r[1] for r in rows])
        x_type = np.vstack([r[2] for r in rows])
        scores = forward_batch(params, mask, x_name, x_ctx, x_type)
        total += max(0.0, cfg.margin - (scores[0] - float(np.max(scores[1:]))))
    return total / len(batch)


def sample_negatives(m: Mention, cands: CandidateSet, n: int, rng: random.Random) -> list[str]:
    """Up to n non-gold candidate entities, sampled without replacement."""
    pool = [eid for eid in cands.ids() if eid != m.gold]
    if len(pool) <= n:
        return pool
    return rng.sample(pool, n)


# ---------------------------------------------------------------------------
# Bundle indexing: dense matrices over mentions/entities for fast batching

class BundleIndex:
    """Mention-side and entity-side input rows, indexable by id."""

    def __init__(self, mentions, entity_ids, kb: KnowledgeBase,
                 store: EmbeddingStore, vocabs: tuple[TypeVocab, TypeVocab]):
        m_vocab, e_vocab = vocabs
        self.m_row = {m.id: i for i, m in enumerate(mentions)}
        self.e_row = {eid: i for i, eid in enumerate(entity_ids)}
        m_bundles = [assemble_mention(m, store, m_vocab) for m in mentions]
        e_bundles = [assemble_entity(kb.get(eid), store, e_vocab) for eid in entity_ids]

        def stack(bundles, attr, width):
            if not bundles:
                return np.zeros((0, width))
            return np.stack([getattr(b, attr) for b in bundles]).astype(np.float64)

        self.m_name = stack(m_bundles, "name_vec", store.dim)
        self.m_ctx = stack(m_bundles, "context_vec", store.dim)
        self.m_type = stack(m_bundles, "type_vec", len(m_vocab))
        self.e_name = stack(e_bundles, "name_vec", store.dim)
        self.e_ctx = stack(e_bundles, "context_vec", store.dim)
        self.e_type = stack(e_bundles, "type_vec", len(e_vocab))

    def pair_rows(self, mention_rows, entity_rows):
        mi = np.asarray(mention_rows, dtype=np.intp)
        ei = np.asarray(entity_rows, dtype=np.intp)
        x_name = np.hstack([self.m_name[mi], self.e_name[ei]])
        x_ctx = np.hstack([self.m_ctx[mi], self.e_ctx[ei]])
        x_type = np.hstack([self.m_type[mi], self.e_type[ei]])
        return x_name, x_ctx, x_type


# ---------------------------------------------------------------------------
# Training

@dataclass
class TrainResult:
    params: RankerParams
    trace: list[tuple[int, float, float | None]]  # (epoch, main loss, aux loss)


def _batched_grad(params, mask, index: BundleIndex, examples, margin,
                  dropout_p, dropout_rng):
    """One forward/backward over a minibatch of (m_row, pos_row, [neg_rows])."""
    m_rows, e_rows, spans = [], [], []
    for m_row, pos_row, neg_rows in examples:
        start = len(m_rows)
        m_rows.extend([m_row] * (1 + len(neg_rows)))
        e_rows.append(pos_row)
        e_rows.extend(neg_rows)
        spans.append((start, start + 1, len(neg_rows)))
    x_name, x_ctx, x_type = index.pair_rows(m_rows, e_rows)
    scores, cache = forward_batch(params, mask, x_name, x_ctx, x_type,
                                  dropout_p, dropout_rng, want_cache=True)
    dscores = np.zeros_like(scores)
    total = 0.0
    inv_b = 1.0 / len(examples)
    for pos_row, neg_start, n_negs in spans:
        neg_scores = scores[neg_start:neg_start + n_negs]
        j = int(np.argmax(neg_scores))
        loss = margin - (scores[pos_row] - neg_scores[j])
        if loss > 0.0:
            total += loss
            dscores[pos_row] -= inv_b
            dscores[neg_start + j] += inv_b
    grads = backward_batch(params, mask, cache, dscores)
    return grads, total


def train(train_ds: Dataset, kb: KnowledgeBase, cands_by_mention: dict[str, CandidateSet],
          store: EmbeddingStore, vocabs: tuple[TypeVocab, TypeVocab],
          cfg: TrainConfig, mask: BranchMask = BranchMask(),
          aux_pairs: list[tuple[str, str]] | None = None,
          encode_fn=None) -> TrainResult:
    """Mini-batched pairwise training over non-NIL mentions.

    NIL mentions carry no positive entity and are excluded; mentions whose
    candidate set has no non-gold entry are skipped. When cfg.aux is set, an
    auxiliary name-matching epoch runs before each main epoch.
    """
    m_vocab, e_vocab = vocabs
    trainable = []
    for m in train_ds.mentions:
        if m.is_nil():
            continue
        cands = cands_by_mention.get(m.id)
        if cands is None or not any(eid != m.gold for eid in cands.ids()):
            continue
        trainable.append((m, cands))
    if not trainable:
        raise DataError("no trainable mentions: all NIL or no non-gold candidates")

    entity_ids = sorted({m.gold for m, _ in trainable}
                        | {eid for _, cs in trainable for eid in cs.ids()})
    index = BundleIndex([m for m, _ in trainable], entity_ids, kb, store, vocabs)

    dims = RankerDims(store.dim, len(m_vocab), len(e_vocab))
    params = init_params(cfg, dims, cfg.seed)
    tensors = params.tensors()
    main_opt = Adam([n for n in tensors if not n.startswith("matcher.")], lr=cfg.lr)
    aux_opt = Adam([n for n in tensors if n.startswith(("name.", "matcher."))], lr=cfg.lr)

    if cfg.aux is not None and aux_pairs is None:
        if cfg.aux.pairs_path is None:
            raise ConfigError("aux training configured without pairs")
        from .synth import load_name_pairs

        aux_pairs = load_name_pairs(cfg.aux.pairs_path)
    if cfg.aux is not None and encode_fn is None:
        raise ConfigError("aux training needs an encode_fn for name pairs")

    shuffle_rng = random.Random(f"{cfg.seed}:shuffle")
    neg_rng = random.Random(f"{cfg.seed}:negatives")
    aux_rng = random.Random(f"{cfg.seed}:aux")
    dropout_rng = np.random.default_rng([cfg.seed & 0xFFFFFFFF, 0xD20])

    aux_cache: dict[str, np.ndarray] = {}
    trace: list[tuple[int, float, float | None]] = []
    order = list(range(len(trainable)))
    for epoch in range(cfg.epochs):
        aux_loss = None
        if cfg.aux is not None and aux_pairs:
            aux_loss = train_aux_epoch(aux_pairs, params, cfg, encode_fn, aux_rng,
                                       aux_opt, dropout_rng, aux_cache)
        shuffle_rng.shuffle(order)
        total = 0.0
        count = 0
        for start in range(0, len(order), cfg.batch_size):
            chunk = order[start:start + cfg.batch_size]
            examples = []
            for i in chunk:
                m, cands = trainable[i]
                negs = sample_negatives(m, cands, cfg.n_negatives, neg_rng)
                examples.append((index.m_row[m.id], index.e_row[m.gold],
                                 [index.e_row[e] for e in negs]))
            drop_rng = dropout_rng if cfg.dropout > 0 else None
            grads, batch_total = _batched_grad(params, mask, index, examples,
                                               cfg.margin, cfg.dropout, drop_rng)
            main_opt.step(tensors, grads)
            total += batch_total
            count += len(examples)
        trace.append((epoch, total / count, aux_loss))
    return TrainResult(params, trace)


def train_aux_epoch(pairs: list[tuple[str, str]], params: RankerParams,
                    cfg: TrainConfig, encode_fn, rng: random.Random,
                    opt: Adam, dropout_rng, cache: dict[str, np.ndarray]) -> float:
    """One pass of the name-matching objective over a sampled pair subset.

    Scores concat(enc(source), enc(candidate)) through the name branch and
    the matching head; negatives are other pairs' English names. Only name
    branch and matching head parameters update; the head itself never takes
    part in entity scoring.
    """
    assert cfg.aux is not None
    k = min(cfg.aux.subset_k, len(pairs))
    subset = rng.sample(range(len(pairs)), k)

    def enc(text: str) -> np.ndarray:
        vec = cache.get(text)
        if vec is None:
            vec = np.asarray(encode_fn(text), dtype=np.float64)
            cache[text] = vec
        return vec

    tensors = params.tensors()
    total = 0.0
    count = 0
    for start in range(0, len(subset), cfg.batch_size):
        chunk = subset[start:start + cfg.batch_size]
        rows = []
        spans = []
        for i in chunk:
            src, pos_name = pairs[i]
            src_vec = enc(src)
            row_start = len(rows)
            rows.append(np.concatenate([src_vec, enc(pos_name)]))
            for _ in range(cfg.aux.n_negatives):
                while True:
                    j = rng.randrange(len(pairs))
                    if j != i:
                        break
                rows.append(np.concatenate([src_vec, enc(pairs[j][1])]))
            spans.append((row_start, row_start + 1, cfg.aux.n_negatives))
        x = np.asarray(rows, dtype=np.float64)
        drop = dropout_rng if cfg.dropout > 0 else None
        scores, fwd_cache = matcher_forward(params, x, cfg.dropout, drop, want_cache=True)
        dscores = np.zeros_like(scores)
        inv_b = 1.0 / len(chunk)
        for pos_row, neg_start, n_negs in spans:
            neg_scores = scores[neg_start:neg_start + n_negs]
            j = int(np.argmax(neg_scores))
            loss = cfg.margin - (scores[pos_row] - neg_scores[j])
            if loss > 0.0:
                total += loss
                dscores[pos_row] -= inv_b
                dscores[neg_start + j] += inv_b
        grads = matcher_backward(params, fwd_cache, dscores)
        opt.step(tensors, grads)
        count += len(chunk)
    return total / count if count else 0.0


# ---------------------------------------------------------------------------
# Checkpoints and traces

def checkpoint_bytes(params: RankerParams) -> bytes:
    tensors = params.tensors()
    names = sorted(tensors, key=lambda n: n.encode("utf-8"))
    chunks = [CHECKPOINT_MAGIC, struct.pack("<IQ", CHECKPOINT_VERSION, len(names))]
    for name in names:
        nb = name.encode("utf-8")
        t = tensors[name]
        shape = t.shape if t.ndim else (1,)
        chunks.append(struct.pack("<H", len(nb)))
        chunks.append(nb)
        chunks.append(struct.pack("<B", len(shape)))
        chunks.append(struct.pack(f"<{len(shape)}I", *shape))
        chunks.append(np.ascontiguousarray(t, dtype="<f4").tobytes())
    return b"".join(chunks)


def save_checkpoint(params: RankerParams, path: str, meta: dict | None = None) -> None:
    with open(path, "wb") as f:
        f.write(checkpoint_bytes(params))
    if meta is not None:
        with open(path + ".meta.json", "w", encoding="utf-8") as f:
            json.dump(meta, f, sort_keys=True, indent=1)
            f.write("\n")


def load_checkpoint(path: str) -> tuple[RankerParams, dict]:
    with open(path, "rb") as f:
        head = f.read(4)
        if head != CHECKPOINT_MAGIC:
            raise DataError(f"{path}: bad magic {head!r}, expected {CHECKPOINT_MAGIC!r}")
        meta_bytes = f.read(12)
        if len(meta_bytes) != 12:
            raise DataError(f"{path}: truncated header")
        version, count = struct.unpack("<IQ", meta_bytes)
        if version != CHECKPOINT_VERSION:
            raise DataError(f"{path}: unsupported checkpoint version {version}")
        tensors: dict[str, np.ndarray] = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<H", f.read(2))
            name = f.read(nlen).decode("utf-8")
            if name in tensors:
                raise DataError(f"{path}: duplicate tensor {name!r}")
            (rank,) = struct.unpack("<B", f.read(1))
            shape = struct.unpack(f"<{rank}I", f.read(4 * rank))
            n_items = int(np.prod(shape)) if shape else 1
            payload = f.read(4 * n_items)
            if len(payload) != 4 * n_items:
                raise DataError(f"{path}: truncated tensor {name!r}")
            tensors[name] = np.frombuffer(payload, dtype="<f4").reshape(shape).astype(np.float64)

    def seg(prefix: str) -> list[Affine]:
        layers = []
        i = 0
        while f"{prefix}.{i}.w" in tensors:
            layers.append(Affine(tensors[f"{prefix}.{i}.w"], tensors[f"{prefix}.{i}.b"]))
            i += 1
        if not layers:
            raise DataError(f"{path}: checkpoint is missing segment {prefix!r}")
        return layers

    params = RankerParams(seg("name"), seg("context"), seg("type"), seg("final"),
                          seg("matcher")[0])
    meta = {}
    try:
        with open(path + ".meta.json", "r", encoding="utf-8") as f:
            meta = json.load(f)
    except FileNotFoundError:
        pass
    return params, meta


def save_trace(trace, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("epoch,main_loss,aux_loss\n")
        for epoch, main_loss, aux_loss in trace:
            aux = "" if aux_loss is None else repr(float(aux_loss))
            f.write(f"{epoch},{float(main_loss)!r},{aux}\n")
