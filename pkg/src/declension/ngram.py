"""Count-based article+noun baseline with backoff to the lemma and then to
the identity."""
from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .corpus import DEFAULT_INVENTORY, NounInstance

MODEL_TYPE = "ngram-backoff"

PAIR, LEMMA, IDENTITY = "Pair", "Lemma", "Identity"


def _nested():
    return defaultdict(lambda: defaultdict(int))


@dataclass
class BackoffInflector:
    # pair tables are keyed (lowercased article, lemma)
    pair_counts: dict = field(default_factory=dict)
    lemma_counts: dict = field(default_factory=dict)
    case_pair_counts: dict = field(default_factory=dict)
    inventory: tuple = DEFAULT_INVENTORY

    def to_json(self) -> str:
        def pairs(table):
            out = {}
            for (article, lemma), counts in table.items():
                out.setdefault(article, {})[lemma] = dict(counts)
            return out

        doc = {
            "type": MODEL_TYPE,
            "inventory": list(self.inventory),
            "pair_counts": pairs(self.pair_counts),
            "lemma_counts": {k: dict(v) for k, v in self.lemma_counts.items()},
            "case_pair_counts": pairs(self.case_pair_counts),
        }
        return json.dumps(doc, sort_keys=True, ensure_ascii=False, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "BackoffInflector":
        doc = json.loads(text)
        if doc.get("type") != MODEL_TYPE:
            raise ValueError(f"not an n-gram model file (type={doc.get('type')!r})")

        def pairs(nested):
            return {(article, lemma): dict(counts)
                    for article, by_lemma in nested.items()
                    for lemma, counts in by_lemma.items()}

        return cls(pairs(doc["pair_counts"]),
                   {k: dict(v) for k, v in doc["lemma_counts"].items()},
                   pairs(doc["case_pair_counts"]),
                   tuple(doc["inventory"]))


def train_ngram(instances: Iterable[NounInstance],
                inventory: Sequence[str] = DEFAULT_INVENTORY) -> BackoffInflector:
    """Count forms and cases per (article, lemma) and per lemma.

    Articles are lowercased; instances without an article only feed the
    lemma table.
    """
    pair, lemma_t, case_t = _nested(), _nested(), _nested()
    for inst in instances:
        lemma_t[inst.lemma][inst.form] += 1
        if inst.article is None:
            continue
        key = (inst.article.lower(), inst.lemma)
        pair[key][inst.form] += 1
        case_t[key][inst.case] += 1
    freeze = lambda t: {k: dict(v) for k, v in t.items()}
    return BackoffInflector(freeze(pair), freeze(lemma_t), freeze(case_t), tuple(inventory))


def _best_form(counts: dict) -> str:
    # highest count, then lexicographically smallest form
    return min(counts, key=lambda form: (-counts[form], form))


def predict_ngram(model: BackoffInflector, article: str | None, lemma: str
                  ) -> tuple[str, str]:
    if not lemma:
        raise ValueError("lemma must be non-empty")
    if article is not None:
        counts = model.pair_counts.get((article.lower(), lemma))
        if counts:
            return _best_form(counts), PAIR
    counts = model.lemma_counts.get(lemma)
    if counts:
        return _best_form(counts), LEMMA
    return lemma, IDENTITY


def predict_case_ngram(model: BackoffInflector, article: str | None, lemma: str
                       ) -> str | None:
    if not lemma:
        raise ValueError("lemma must be non-empty")
    if article is None:
        return None
    counts = model.case_pair_counts.get((article.lower(), lemma))
    if not counts:
        return None
    order = {case: k for k, case in enumerate(model.inventory)}
    return min(counts, key=lambda c: (-counts[c], order.get(c, len(order)), c))
