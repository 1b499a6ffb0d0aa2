import numpy as np
import pytest

from xlinker.data import Dataset
from xlinker.encoder import (TypeVocab, assemble_entity, assemble_mention,
                             build_type_vocab, encode_corpus, entity_ctx_key,
                             entity_name_key, trigram_encode, type_onehot)
from xlinker.errors import ConfigError, DataError
from xlinker.store import EmbeddingStore

from conftest import make_dataset, make_entity, make_kb, make_mention


class TestTypeVocab:
    def test_strictly_more_than_min_count(self):
        golds = ["e000"] * 101 + ["e001"] * 100
        ds = make_dataset(golds,
                          mtype="PER")  # PER appears 201 times
        # entity types: e000 "ta" x101, e001 "tb" x100
        kb = make_kb(2)
        kb.entities["e000"] = make_entity(0, types=("ta",))
        kb.entities["e001"] = make_entity(1, types=("tb",))
        m_vocab, e_vocab = build_type_vocab(ds, kb, min_count=100)
        assert "PER" in m_vocab.tags
        assert e_vocab.tags == ("ta",)  # 101 > 100 kept, 100 == 100 dropped

    def test_empty_dataset(self):
        m_vocab, e_vocab = build_type_vocab(Dataset.from_mentions([]), make_kb(1))
        assert len(m_vocab) == 0 and len(e_vocab) == 0

    def test_onehot(self):
        vocab = TypeVocab(("GPE", "ORG", "PER"), 0)
        assert type_onehot(["ORG"], vocab).tolist() == [0.0, 1.0, 0.0]
        assert type_onehot(["UNSEEN"], vocab).tolist() == [0.0, 0.0, 0.0]
        assert type_onehot(["PER", "GPE"], vocab).tolist() == [1.0, 0.0, 1.0]


class TestTrigramEncode:
    def test_pure_function(self):
        a = trigram_encode("Oficina de la Presidencia", 64, 7)
        b = trigram_encode("Oficina de la Presidencia", 64, 7)
        assert np.array_equal(a, b)
        assert a.dtype == np.float32

    def test_identical_strings_cosine_one(self):
        a = trigram_encode("President of Mexico", 32, 3)
        assert float(a @ a) == pytest.approx(1.0, abs=1e-6)

    def test_empty_string_zero_vector(self):
        assert not trigram_encode("", 16, 0).any()

    def test_dim_below_8_rejected(self):
        with pytest.raises(ConfigError):
            trigram_encode("x", 7, 0)

    def test_seed_changes_projection(self):
        a = trigram_encode("some name", 32, 1)
        b = trigram_encode("some name", 32, 2)
        assert not np.array_equal(a, b)

    def test_shared_trigrams_raise_cosine(self, rng):
        # statistical oracle: pairs sharing >=50% of trigrams score higher
        # on average than trigram-disjoint pairs
        import random

        rnd = random.Random(77)
        alpha = "abcdefghijklmnop"
        beta = "qrstuvwxyz012345"

        def word(pool, n):
            return "".join(rnd.choice(pool) for _ in range(n))

        sim_cos, dis_cos = [], []
        for _ in range(1000):
            base = word(alpha, 12)
            overlapping = base[:8] + word(alpha, 4)  # shares a long prefix
            disjoint = word(beta, 12)
            va = trigram_encode(base, 64, 5)
            vb = trigram_encode(overlapping, 64, 5)
            vc = trigram_encode(disjoint, 64, 5)
            sim_cos.append(float(va @ vb))
            dis_cos.append(float(va @ vc))
        assert np.mean(sim_cos) > np.mean(dis_cos) + 0.2


class TestAssemble:
    def make_store(self, dim=16):
        ds = make_dataset(["e000"], window=("w1", "w2"))
        kb = make_kb(2, description="desc words")
        return ds, kb, encode_corpus(ds, kb, dim, 3)

    def test_bundle_shapes(self):
        ds, kb, store = self.make_store()
        m_vocab = TypeVocab(("PER",), 0)
        e_vocab = TypeVocab(("person", "x"), 0)
        mb = assemble_mention(ds.mentions[0], store, m_vocab)
        eb = assemble_entity(kb.get("e000"), store, e_vocab)
        assert mb.name_vec.shape == (16,) and mb.context_vec.shape == (16,)
        assert mb.type_vec.shape == (1,)
        assert eb.type_vec.shape == (2,)

    def test_entity_empty_description_zero_context(self):
        ds = make_dataset(["e000"])
        kb = make_kb(1, description="")
        store = encode_corpus(ds, kb, 16, 3)
        eb = assemble_entity(kb.get("e000"), store, TypeVocab((), 0))
        assert not eb.context_vec.any()

    def test_missing_name_key_names_key(self):
        kb = make_kb(1)
        store = EmbeddingStore(8, {})
        with pytest.raises(DataError, match=entity_name_key("e000")):
            assemble_entity(kb.get("e000"), store, TypeVocab((), 0))

    def test_missing_ctx_for_described_entity_errors(self):
        kb = make_kb(1, description="has text")
        store = EmbeddingStore(8, {entity_name_key("e000"): np.zeros(8, np.float32)})
        with pytest.raises(DataError, match=entity_ctx_key("e000")):
            assemble_entity(kb.get("e000"), store, TypeVocab((), 0))

    def test_corpus_key_count(self):
        ds = make_dataset(["e000", "e001", "NIL"])
        kb = make_kb(4, description="words here")
        store = encode_corpus(ds, kb, 16, 3)
        assert len(store) == 2 * len(ds.mentions) + 2 * len(kb)
