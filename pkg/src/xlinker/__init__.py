"""Cross-language entity linking toolkit.

Pipeline: alias-table triage proposes candidate entities per mention, a
three-branch neural ranker scores mention/entity pairs over name, context,
and type representations, and a score threshold marks NIL mentions.
Includes a synthetic corpus generator, popularity re-ranking, and an
experiment harness for mono/multi/zero-shot settings.
"""

__version__ = "0.1.0"
