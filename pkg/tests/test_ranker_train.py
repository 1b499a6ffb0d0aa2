import numpy as np
import pytest

from xlinker.data import Dataset
from xlinker.encoder import build_type_vocab, encode_corpus, trigram_encode
from xlinker.errors import DataError
from xlinker.nn import BranchMask
from xlinker.ranker import (AuxConfig, LayerSizes, TrainConfig, load_checkpoint,
                            save_checkpoint, save_trace, train)
from xlinker.triage import CandidateSet

from conftest import make_dataset, make_entity, make_kb, make_mention

CFG = TrainConfig(lr=1e-3, epochs=6, dropout=0.0, n_negatives=3, batch_size=8,
                  layers=LayerSizes((16,), (12,), (8,), (16,)), seed=0)


def separable_setup(n_entities=20, n_mentions=120, seed=4):
    """Mentions whose surface is the gold entity's name; candidates are the
    gold plus a few random others, so nearest-name wins."""
    import random

    rnd = random.Random(seed)
    kb = make_kb(n_entities, description="some words")
    ents = sorted(kb.entities)
    mentions = []
    cands = {}
    for i in range(n_mentions):
        gold = rnd.choice(ents)
        m = make_mention(i, gold, doc=f"d{i // 10}", surface=kb.get(gold).name)
        mentions.append(m)
        others = rnd.sample([e for e in ents if e != gold], 4)
        entries = [(gold, 0.5)] + [(e, 0.125) for e in others]
        cands[m.id] = CandidateSet(m.id, tuple(sorted(entries, key=lambda x: (-x[1], x[0]))))
    ds = Dataset.from_mentions(mentions)
    store = encode_corpus(ds, kb, 32, 5)
    vocabs = build_type_vocab(ds, kb, 0)
    return ds, kb, cands, store, vocabs


class TestTrain:
    def test_separable_loss_collapses(self):
        ds, kb, cands, store, vocabs = separable_setup()
        cfg = TrainConfig(lr=1e-3, epochs=25, dropout=0.0, n_negatives=3,
                          batch_size=8, layers=CFG.layers, seed=0)
        result = train(ds, kb, cands, store, vocabs, cfg, BranchMask())
        first = result.trace[0][1]
        last = result.trace[-1][1]
        assert last < 0.05 * first

    def test_trace_deterministic_per_seed(self):
        ds, kb, cands, store, vocabs = separable_setup()
        a = train(ds, kb, cands, store, vocabs, CFG, BranchMask())
        b = train(ds, kb, cands, store, vocabs, CFG, BranchMask())
        assert a.trace == b.trace
        for name, t in a.params.tensors().items():
            assert np.array_equal(t, b.params.tensors()[name])

    def test_different_seed_changes_params(self):
        ds, kb, cands, store, vocabs = separable_setup()
        import dataclasses

        a = train(ds, kb, cands, store, vocabs, CFG, BranchMask())
        b = train(ds, kb, cands, store, vocabs,
                  dataclasses.replace(CFG, seed=1), BranchMask())
        assert any(not np.array_equal(t, b.params.tensors()[n])
                   for n, t in a.params.tensors().items())

    def test_name_only_mask_leaves_other_branches_at_init(self):
        ds, kb, cands, store, vocabs = separable_setup()
        from xlinker.ranker import RankerDims, init_params

        mask = BranchMask(use_name=True, use_context=False, use_type=False)
        result = train(ds, kb, cands, store, vocabs, CFG, mask)
        dims = RankerDims(store.dim, len(vocabs[0]), len(vocabs[1]))
        fresh = init_params(CFG, dims, CFG.seed)
        for prefix in ("context.", "type."):
            for name, t in result.params.tensors().items():
                if name.startswith(prefix):
                    assert np.array_equal(t, fresh.tensors()[name])

    def test_all_nil_rejected(self):
        ds = make_dataset(["NIL"] * 6)
        kb = make_kb(2)
        store = encode_corpus(ds, kb, 16, 1)
        vocabs = build_type_vocab(ds, kb, 0)
        with pytest.raises(DataError, match="no trainable"):
            train(ds, kb, {}, store, vocabs, CFG, BranchMask())

    def test_mentions_without_non_gold_candidates_skipped(self):
        ds = make_dataset(["e000", "e001"])
        kb = make_kb(4)
        cands = {
            "m0000": CandidateSet("m0000", (("e000", 1.0),)),  # gold only: skip
            "m0001": CandidateSet("m0001", (("e001", 0.6), ("e002", 0.4))),
        }
        store = encode_corpus(ds, kb, 16, 1)
        vocabs = build_type_vocab(ds, kb, 0)
        result = train(ds, kb, cands, store, vocabs, CFG, BranchMask())
        assert result.trace  # trains on the single usable mention


class TestAuxEpoch:
    def aux_setup(self):
        ds, kb, cands, store, vocabs = separable_setup()
        pairs = [(f"da {kb.get(e).name}", kb.get(e).name) for e in sorted(kb.entities)]
        pairs *= 4
        encode_fn = lambda text: trigram_encode(text, store.dim, 5)
        cfg = TrainConfig(lr=1e-3, epochs=4, dropout=0.0, n_negatives=3, batch_size=8,
                          layers=CFG.layers, seed=0,
                          aux=AuxConfig(subset_k=40, n_negatives=3))
        return ds, kb, cands, store, vocabs, pairs, encode_fn, cfg

    def test_aux_loss_decreases(self):
        ds, kb, cands, store, vocabs, pairs, encode_fn, cfg = self.aux_setup()
        import dataclasses

        cfg = dataclasses.replace(cfg, epochs=12)
        result = train(ds, kb, cands, store, vocabs, cfg, BranchMask(),
                       aux_pairs=pairs, encode_fn=encode_fn)
        aux_losses = [a for _, _, a in result.trace]
        assert all(a is not None for a in aux_losses)
        assert aux_losses[-1] < aux_losses[0]

    def test_context_type_final_untouched_by_aux(self):
        # aux-only epochs: zero main epochs is not allowed, so freeze by
        # running main with an unrelated mask? Instead compare against a
        # no-aux run: context/type/final tensors must be identical because
        # aux updates only name branch and matcher head.
        ds, kb, cands, store, vocabs, pairs, encode_fn, cfg = self.aux_setup()
        import dataclasses

        with_aux = train(ds, kb, cands, store, vocabs, cfg, BranchMask(),
                         aux_pairs=pairs, encode_fn=encode_fn)
        without = train(ds, kb, cands, store, vocabs,
                        dataclasses.replace(cfg, aux=None), BranchMask())
        diff_name = [n for n, t in with_aux.params.tensors().items()
                     if n.startswith("name.")
                     and not np.array_equal(t, without.params.tensors()[n])]
        assert diff_name  # aux really changed the name branch
        # matcher trained only under aux
        assert not np.array_equal(with_aux.params.matcher.w, without.params.matcher.w)

    def test_matcher_never_used_in_scoring(self):
        # scoring path is independent of matcher weights
        from xlinker.inference import score_candidates

        ds, kb, cands, store, vocabs, pairs, encode_fn, cfg = self.aux_setup()
        result = train(ds, kb, cands, store, vocabs, cfg, BranchMask(),
                       aux_pairs=pairs, encode_fn=encode_fn)
        m = ds.mentions[0]
        before = score_candidates(m, cands[m.id], kb, store, vocabs,
                                  result.params, BranchMask())
        result.params.matcher.w += 123.0
        after = score_candidates(m, cands[m.id], kb, store, vocabs,
                                 result.params, BranchMask())
        assert before == after


class TestCheckpoint:
    def test_roundtrip(self, tmp_path):
        ds, kb, cands, store, vocabs = separable_setup(n_mentions=40)
        result = train(ds, kb, cands, store, vocabs, CFG, BranchMask())
        path = tmp_path / "model.ckpt"
        save_checkpoint(result.params, str(path), {"mask": "name,context,type"})
        params, meta = load_checkpoint(str(path))
        assert meta["mask"] == "name,context,type"
        for name, t in result.params.tensors().items():
            assert np.allclose(t, params.tensors()[name], atol=1e-6)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"JUNKJUNKJUNK")
        with pytest.raises(DataError, match="magic"):
            load_checkpoint(str(path))

    def test_trace_csv(self, tmp_path):
        path = tmp_path / "trace.csv"
        save_trace([(0, 0.5, None), (1, 0.25, 0.125)], str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == "epoch,main_loss,aux_loss"
        assert lines[1] == "0,0.5,"
        assert lines[2] == "1,0.25,0.125"
