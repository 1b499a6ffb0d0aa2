"""Deterministic synthetic multilingual corpus generator.

Entities get cluster-themed two-word names ("Zuvora Kemlin"), token-bearing
descriptions, and type tags. Mentions sample entities from a Zipf
distribution; surfaces are noisy transforms of the entity name (character
substitutions and per-language affix decoration at rate name_noise, plus a
theme-word-only partial form), contexts embed description tokens with
probability context_informativeness, and a fixed share of mentions get
unmatchable surfaces with gold=NIL.

The anchor corpus covers plain and decorated name forms per language, so
triage misses come only from character substitutions. Optional same-name
twin entities (name_ambiguity) carry language-dependent popularity skew,
which is what popularity re-ranking experiments exercise.
"""
from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field

from .data import NIL, Dataset, Entity, KnowledgeBase, Mention, normalize_surface
from .errors import ConfigError

_SYLLABLES = [c + v for c in "bdklmnrstvz" for v in "aeiou"]
_TYPE_TAGS = ("person", "organization", "location", "facility", "product")
_NER_TAGS = ("PER", "ORG", "GPE", "FAC", "PRD")
_CLUSTER_SIZE = 10

# Twin-group popularity: the preferred twin takes this share of group mass;
# this fraction of groups share one preference across languages, the rest
# prefer a per-language twin.
_TWIN_PREF_SHARE = 0.85
_TWIN_GLOBAL_FRACTION = 0.6


@dataclass(frozen=True)
class SynthConfig:
    n_entities: int = 200
    n_mentions: int = 1000  # per language
    languages: tuple[str, ...] = ("xx",)
    nil_rate: float = 0.2
    zipf_exponent: float = 1.1
    name_noise: float = 0.1
    context_informativeness: float = 0.5
    seed: int = 0
    # extensions past the core knobs; see README
    name_ambiguity: float = 0.0  # fraction of entities paired into same-name twins
    partial_rate: float = 0.15  # mentions whose surface is the theme word only
    alias_pollution: float = 0.1  # weight of cluster siblings in full-name alias rows
    doc_size: int = 25

    def __post_init__(self):
        if self.n_entities < 2 or self.n_mentions < 1:
            raise ConfigError("need n_entities >= 2 and n_mentions >= 1")
        for name in ("nil_rate", "name_noise", "context_informativeness",
                     "name_ambiguity", "partial_rate", "alias_pollution"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0) or (name == "nil_rate" and v == 1.0):
                raise ConfigError(f"{name} out of range: {v}")
        if self.zipf_exponent <= 0:
            raise ConfigError(f"zipf_exponent must be > 0, got {self.zipf_exponent}")
        if not self.languages or len(set(self.languages)) != len(self.languages):
            raise ConfigError("languages must be a non-empty list of unique tags")
        if self.doc_size < 1:
            raise ConfigError("doc_size must be >= 1")
        object.__setattr__(self, "languages", tuple(self.languages))


def _hash_pick(seed: int, label: str, n: int) -> int:
    h = hashlib.blake2b(f"{seed}:{label}".encode(), digest_size=8).digest()
    return int.from_bytes(h, "little") % n


def _word(rng: random.Random, n_syl: int) -> str:
    return "".join(rng.choice(_SYLLABLES) for _ in range(n_syl))


class SynthWorld:
    """Everything derived deterministically from a SynthConfig: entities,
    twin groups, per-language sampling weights, decoration pools."""

    def __init__(self, cfg: SynthConfig):
        self.cfg = cfg
        rng = random.Random(f"{cfg.seed}:world")

        n_clusters = -(-cfg.n_entities // _CLUSTER_SIZE)
        themes: list[str] = []
        seen = set()
        while len(themes) < n_clusters:
            w = _word(rng, 3).capitalize()
            if w not in seen:
                seen.add(w)
                themes.append(w)

        self.twin_groups: list[tuple[int, int]] = []
        n_groups = int(cfg.name_ambiguity * cfg.n_entities / 2)
        for g in range(n_groups):
            self.twin_groups.append((2 * g, 2 * g + 1))
        twin_of = {b: a for a, b in self.twin_groups}

        entities: list[Entity] = []
        uniq_seen = set()
        for i in range(cfg.n_entities):
            theme = themes[i // _CLUSTER_SIZE]
            while True:
                unique = _word(rng, 2 + rng.randrange(2)).capitalize()
                if (theme, unique) not in uniq_seen:
                    uniq_seen.add((theme, unique))
                    break
            name = f"{theme} {unique}"
            primary = rng.randrange(len(_TYPE_TAGS))
            types = [_TYPE_TAGS[primary]]
            if rng.random() < 0.4:
                types.append(_TYPE_TAGS[(primary + 1 + rng.randrange(3)) % len(_TYPE_TAGS)])
            desc_tokens = [f"{_word(rng, 3)}{i:03d}" for _ in range(3)]
            filler = [_word(rng, 2) for _ in range(8)]
            entities.append(Entity(
                id=f"e{i:05d}",
                name=name,
                description=" ".join(desc_tokens + filler),
                types=tuple(types),
                wiki_title=None,
                in_kb=True,
            ))
        # twins are indistinguishable records: same name, types, description;
        # only annotation preference (popularity) separates them
        fixed = []
        for i, e in enumerate(entities):
            if i in twin_of:
                a = entities[twin_of[i]]
                e = Entity(id=e.id, name=a.name, description=a.description,
                           types=a.types, wiki_title=None, in_kb=True)
            fixed.append(e)
        self.entities = fixed
        self.themes = themes
        self.filler_vocab = [_word(rng, 2) for _ in range(120)]

        base = [1.0 / (r + 1) ** cfg.zipf_exponent for r in range(cfg.n_entities)]
        total = sum(base)
        self.base_probs = [p / total for p in base]
        self.lang_probs = {la: self._language_probs(la) for la in cfg.languages}

        self.decorations = {la: self._decoration_pool(la) for la in cfg.languages}

    def _language_probs(self, language: str) -> list[float]:
        probs = self.base_probs[:]
        for g, (a, b) in enumerate(self.twin_groups):
            mass = probs[a] + probs[b]
            if _hash_pick(self.cfg.seed, f"twinmode:{g}", 100) < _TWIN_GLOBAL_FRACTION * 100:
                pick = _hash_pick(self.cfg.seed, f"twinpick:{g}", 2)
            else:
                pick = _hash_pick(self.cfg.seed, f"twinpick:{g}:{language}", 2)
            pref, other = (a, b) if pick == 0 else (b, a)
            probs[pref] = _TWIN_PREF_SHARE * mass
            probs[other] = (1.0 - _TWIN_PREF_SHARE) * mass
        return probs

    def _decoration_pool(self, language: str) -> tuple[list[str], list[str]]:
        rng = random.Random(f"{self.cfg.seed}:deco:{language}")
        prefixes = [_word(rng, 1 + rng.randrange(2)) for _ in range(3)]
        suffixes = [_word(rng, 1 + rng.randrange(2)) for _ in range(3)]
        return prefixes, suffixes

    def kb(self) -> KnowledgeBase:
        return KnowledgeBase(self.entities, ref=f"synth-{self.cfg.seed}")

    # -- surface noise ------------------------------------------------------

    def _decorate(self, surface: str, language: str, rng: random.Random) -> str:
        prefixes, suffixes = self.decorations[language]
        if rng.random() < 0.5:
            return f"{rng.choice(prefixes)} {surface}"
        return f"{surface} {rng.choice(suffixes)}"

    def _substitute(self, surface: str, rng: random.Random) -> str:
        pos = rng.randrange(len(surface))
        ch = rng.choice("abcdefghijklmnopqrstuvwxyz")
        return surface[:pos] + ch + surface[pos + 1:]

    def noisy_surface(self, entity: Entity, language: str, rng: random.Random) -> str:
        cfg = self.cfg
        surface = entity.name
        if rng.random() < cfg.partial_rate:
            surface = surface.split(" ")[0]
        if rng.random() < cfg.name_noise:
            surface = self._substitute(surface, rng)
        if rng.random() < cfg.name_noise:
            surface = self._decorate(surface, language, rng)
        return surface

    # -- mention corpus -----------------------------------------------------

    def datasets(self) -> dict[str, Dataset]:
        return {la: self._language_dataset(la) for la in self.cfg.languages}

    def _sentence(self, surface: str, rng: random.Random, extra: list[str]) -> str:
        pre = [rng.choice(self.filler_vocab) for _ in range(2 + rng.randrange(3))]
        post = [rng.choice(self.filler_vocab) for _ in range(2 + rng.randrange(3))]
        return " ".join(pre + [surface] + extra + post)

    def _filler_sentence(self, rng: random.Random, extra: list[str]) -> str:
        words = [rng.choice(self.filler_vocab) for _ in range(5 + rng.randrange(4))]
        return " ".join(words + extra)

    def _language_dataset(self, language: str) -> Dataset:
        cfg = self.cfg
        rng = random.Random(f"{cfg.seed}:mentions:{language}")
        n = cfg.n_mentions
        nil_count = round(cfg.nil_rate * n)
        nil_slots = set(rng.sample(range(n), nil_count))
        population = list(range(cfg.n_entities))
        weights = self.lang_probs[language]
        mentions: list[Mention] = []
        for i in range(n):
            doc_id = f"{language}-d{i // cfg.doc_size:04d}"
            mid = f"{language}-m{i:05d}"
            if i in nil_slots:
                surface = "zq" + _word(rng, 2) + str(i)
                sentence = self._sentence(surface, rng, [])
                window = (self._filler_sentence(rng, []),
                          self._filler_sentence(rng, []))
                mentions.append(Mention(
                    id=mid, doc_id=doc_id, language=language, surface=surface,
                    sentence=sentence, context_window=window,
                    mention_type=rng.choice(_NER_TAGS), gold=NIL,
                ))
                continue
            idx = rng.choices(population, weights=weights, k=1)[0]
            entity = self.entities[idx]
            surface = self.noisy_surface(entity, language, rng)
            informative = rng.random() < cfg.context_informativeness
            desc_tokens = entity.description.split(" ")[:3]
            extra = [rng.choice(desc_tokens) for _ in range(2)] if informative else []
            sentence = self._sentence(surface, rng, extra)
            window = (self._filler_sentence(rng, extra if informative else []),
                      self._filler_sentence(rng, []))
            ner = _NER_TAGS[_TYPE_TAGS.index(entity.types[0])]
            mentions.append(Mention(
                id=mid, doc_id=doc_id, language=language, surface=surface,
                sentence=sentence, context_window=window,
                mention_type=ner, gold=entity.id,
            ))
        return Dataset.from_mentions(mentions, kb_ref=f"synth-{cfg.seed}")

    # -- anchor corpus ------------------------------------------------------

    def anchors(self) -> list[tuple[str, str, int]]:
        """Alias anchor counts: plain and decorated full names plus theme
        words per language. Full-name rows are lightly polluted with cluster
        siblings so candidate sets stay ambiguous, as real alias tables are.
        """
        cfg = self.cfg
        rows: list[tuple[str, str, int]] = []
        clusters: dict[str, list[int]] = {}
        for i, e in enumerate(self.entities):
            clusters.setdefault(e.name.split(" ")[0], []).append(i)
        for language in cfg.languages:
            probs = self.lang_probs[language]
            prefixes, suffixes = self.decorations[language]
            for i, e in enumerate(self.entities):
                theme = e.name.split(" ")[0]
                own = 1 + round(1000 * probs[i])
                forms = [e.name] + [f"{p} {e.name}" for p in prefixes] \
                    + [f"{e.name} {s}" for s in suffixes]
                theme_forms = [theme] + [f"{p} {theme}" for p in prefixes] \
                    + [f"{theme} {s}" for s in suffixes]
                for fi, form in enumerate(forms):
                    c = own if fi == 0 else max(1, own // 4)
                    rows.append((form, e.id, c))
                    if cfg.alias_pollution <= 0:
                        continue
                    for j in clusters[theme]:
                        if j == i:
                            continue
                        sib = 1 + round(cfg.alias_pollution * 1000 * probs[j])
                        rows.append((form, self.entities[j].id,
                                     sib if fi == 0 else max(1, sib // 4)))
                for fi, form in enumerate(theme_forms):
                    c = 1 + round(400 * probs[i])
                    rows.append((form, e.id, c if fi == 0 else max(1, c // 4)))
        return rows

    # -- auxiliary name-pair corpus ------------------------------------------

    def name_pairs(self, language: str, n_pairs: int, salt: int = 0) -> list[tuple[str, str]]:
        """Cross-language name-match pairs: (noisy language form, plain name).

        Decoration is applied at a fixed 0.5 rate so the pair corpus
        systematically exhibits the language's affixes; substitutions follow
        name_noise as in the mention corpus.
        """
        if language not in self.cfg.languages:
            raise ConfigError(f"unknown language {language!r}")
        rng = random.Random(f"{self.cfg.seed}:pairs:{language}:{salt}")
        pairs = []
        for _ in range(n_pairs):
            e = self.entities[rng.randrange(len(self.entities))]
            src = e.name
            if rng.random() < self.cfg.name_noise:
                src = self._substitute(src, rng)
            if rng.random() < 0.5:
                src = self._decorate(src, language, rng)
            pairs.append((src, e.name))
        return pairs


def synth_generate(cfg: SynthConfig) -> tuple[dict[str, Dataset], KnowledgeBase]:
    world = SynthWorld(cfg)
    return world.datasets(), world.kb()


def save_anchors(rows: list[tuple[str, str, int]], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for surface, target, count in rows:
            f.write(f"{surface}\t{target}\t{count}\n")


def load_anchors(path: str) -> list[tuple[str, str, int]]:
    from .errors import DataError

    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 tab-separated fields")
            try:
                count = int(parts[2])
            except ValueError:
                raise DataError(f"{path}:{lineno}: count is not an integer") from None
            rows.append((parts[0], parts[1], count))
    return rows


def save_name_pairs(pairs: list[tuple[str, str]], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for src, en in pairs:
            f.write(f"{src}\t{en}\n")


def load_name_pairs(path: str) -> list[tuple[str, str]]:
    from .errors import DataError

    pairs = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 tab-separated fields")
            pairs.append((parts[0], parts[1]))
    return pairs
