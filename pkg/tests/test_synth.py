import json

import pytest

from xlinker.data import NIL, mention_to_json
from xlinker.errors import ConfigError
from xlinker.synth import SynthConfig, SynthWorld, synth_generate


def serialize(datasets):
    return json.dumps({lang: [mention_to_json(m) for m in ds.mentions]
                       for lang, ds in datasets.items()}, sort_keys=True)


class TestSynthGenerate:
    def test_exact_nil_count(self):
        datasets, _ = synth_generate(SynthConfig(n_entities=50, n_mentions=1000,
                                                 languages=("aa",), nil_rate=0.2, seed=1))
        nils = sum(1 for m in datasets["aa"].mentions if m.gold == NIL)
        assert nils == 200

    def test_seed_repeat_byte_identical(self):
        cfg = SynthConfig(n_entities=40, n_mentions=300, languages=("aa", "bb"), seed=9)
        a, kb_a = synth_generate(cfg)
        b, kb_b = synth_generate(cfg)
        assert serialize(a) == serialize(b)
        assert sorted(kb_a.entities) == sorted(kb_b.entities)
        assert all(kb_a.entities[i] == kb_b.entities[i] for i in kb_a.entities)

    def test_zipf_head_mass(self):
        datasets, _ = synth_generate(SynthConfig(n_entities=100, n_mentions=2000,
                                                 languages=("aa",), nil_rate=0.0,
                                                 zipf_exponent=1.1, seed=4))
        from collections import Counter

        counts = Counter(m.gold for m in datasets["aa"].mentions)
        head = {f"e{i:05d}" for i in range(10)}
        head_mass = sum(c for e, c in counts.items() if e in head)
        assert head_mass > 0.5 * sum(counts.values())

    def test_gold_ids_resolve_in_kb(self):
        datasets, kb = synth_generate(SynthConfig(n_entities=30, n_mentions=200,
                                                  languages=("aa",), seed=3))
        for m in datasets["aa"].mentions:
            assert m.gold == NIL or m.gold in kb

    def test_surface_in_sentence(self):
        datasets, _ = synth_generate(SynthConfig(n_entities=30, n_mentions=200,
                                                 languages=("aa",), seed=3))
        for m in datasets["aa"].mentions:
            assert m.surface in m.sentence

    def test_invalid_rates_rejected(self):
        with pytest.raises(ConfigError):
            SynthConfig(nil_rate=1.0)
        with pytest.raises(ConfigError):
            SynthConfig(zipf_exponent=0.0)
        with pytest.raises(ConfigError):
            SynthConfig(name_noise=-0.1)
        with pytest.raises(ConfigError):
            SynthConfig(languages=("aa", "aa"))


class TestAnchorsAndPairs:
    def test_anchor_targets_resolve(self):
        cfg = SynthConfig(n_entities=30, n_mentions=100, languages=("aa",), seed=3)
        world = SynthWorld(cfg)
        kb = world.kb()
        rows = world.anchors()
        assert rows
        assert all(target in kb and count >= 1 for _, target, count in rows)

    def test_plain_name_is_anchored_for_every_entity(self):
        cfg = SynthConfig(n_entities=30, n_mentions=100, languages=("aa",), seed=3)
        world = SynthWorld(cfg)
        anchored = {(surface, target) for surface, target, _ in world.anchors()}
        for e in world.kb().entities.values():
            assert (e.name, e.id) in anchored

    def test_name_pairs_deterministic_and_noisy(self):
        cfg = SynthConfig(n_entities=30, n_mentions=100, languages=("aa",),
                          name_noise=0.3, seed=3)
        world = SynthWorld(cfg)
        a = world.name_pairs("aa", 200)
        b = world.name_pairs("aa", 200)
        assert a == b
        names = {e.name for e in world.kb().entities.values()}
        assert all(en in names for _, en in a)
        assert any(src != en for src, en in a)

    def test_twins_share_name_types_description(self):
        cfg = SynthConfig(n_entities=40, n_mentions=100, languages=("aa",),
                          name_ambiguity=0.5, seed=3)
        world = SynthWorld(cfg)
        assert world.twin_groups
        for a, b in world.twin_groups:
            ea, eb = world.entities[a], world.entities[b]
            assert ea.name == eb.name
            assert ea.types == eb.types
            assert ea.description == eb.description
            assert ea.id != eb.id

    def test_twin_preference_shifts_language_probs(self):
        cfg = SynthConfig(n_entities=40, n_mentions=100, languages=("aa", "bb"),
                          name_ambiguity=0.5, seed=3)
        world = SynthWorld(cfg)
        for a, b in world.twin_groups:
            pa, pb = world.lang_probs["aa"][a], world.lang_probs["aa"][b]
            assert max(pa, pb) > 4 * min(pa, pb)
