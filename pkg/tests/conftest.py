import numpy as np
import pytest

from xlinker.data import NIL, Dataset, Entity, KnowledgeBase, Mention


def make_entity(i, name=None, types=("person",), description="", wiki_title=None):
    return Entity(id=f"e{i:03d}", name=name or f"Name {i:03d}",
                  description=description, types=tuple(types),
                  wiki_title=wiki_title)


def make_kb(n=5, **kwargs):
    return KnowledgeBase([make_entity(i, **kwargs) for i in range(n)])


def make_mention(i, gold, doc="d0", surface=None, mtype="PER", language="xx",
                 sentence=None, window=()):
    surface = surface if surface is not None else f"name {i}"
    return Mention(id=f"m{i:04d}", doc_id=doc, language=language,
                   surface=surface, sentence=sentence or f"lead {surface} tail",
                   context_window=tuple(window), mention_type=mtype, gold=gold)


def make_dataset(golds, docs_of=None, **kwargs):
    """Dataset from a gold-label list; docs_of maps index -> doc id."""
    mentions = []
    for i, gold in enumerate(golds):
        doc = docs_of(i) if docs_of else f"d{i // 4}"
        mentions.append(make_mention(i, gold, doc=doc, **kwargs))
    return Dataset.from_mentions(mentions)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
