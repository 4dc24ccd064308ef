"""Word-level metrics: Levenshtein distance, sentence BLEU and the
aggregate evaluation report."""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

from .corpus import NounInstance, Sentence

NONE_LABEL = "none"


def levenshtein(a: Sequence, b: Sequence) -> int:
    """Unit-cost edit distance (insert, delete, substitute) over two rows."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def _ngrams(words, n):
    return Counter(tuple(words[k:k + n]) for k in range(len(words) - n + 1))


def sentence_bleu(candidate: Sequence[str], reference: Sequence[str],
                  max_order: int = 4) -> float:
    """Single-reference BLEU without smoothing.

    Orders run from 1 to ``min(max_order, len(candidate))``; any zero
    precision among them makes the score 0.  An empty candidate scores 0.
    """
    if not reference:
        raise ValueError("reference must be non-empty")
    c, r = len(candidate), len(reference)
    if c == 0:
        return 0.0
    orders = min(max_order, c)
    log_sum = 0.0
    for n in range(1, orders + 1):
        cand = _ngrams(candidate, n)
        ref = _ngrams(reference, n)
        hits = sum(min(count, ref[g]) for g, count in cand.items())
        if hits == 0:
            return 0.0
        log_sum += math.log(hits / (c - n + 1))
    bp = 1.0 if c >= r else math.exp(1.0 - r / c)
    return bp * math.exp(log_sum / orders)


def reconstruct_sentence(s: Sentence, predictions: Mapping[int, str]) -> list[str]:
    words = s.forms
    for idx, form in predictions.items():
        if not 0 <= idx < len(words):
            raise IndexError(f"prediction index {idx} outside sentence {s.sent_id!r}")
        words[idx] = form
    return words


@dataclass
class EvalReport:
    avg_bleu: float
    word_accuracy: float
    mean_norm_edit: float
    char_accuracy: float
    per_case: dict
    case_confusion: list
    case_labels: list
    n_instances: int
    n_sentences: int

    @property
    def case_accuracy(self) -> float:
        hits = sum(self.case_confusion[k][k] for k in range(len(self.case_confusion)))
        return hits / self.n_instances

    def as_dict(self) -> dict:
        return {
            "avg_bleu": self.avg_bleu,
            "word_accuracy": self.word_accuracy,
            "mean_norm_edit": self.mean_norm_edit,
            "char_accuracy": self.char_accuracy,
            "per_case": self.per_case,
            "case_confusion": self.case_confusion,
            "case_labels": self.case_labels,
            "n_instances": self.n_instances,
            "n_sentences": self.n_sentences,
        }

    def to_json(self) -> str:
        return dump_json(self.as_dict()) + "\n"


def dump_json(obj, indent: int = 2, _level: int = 0) -> str:
    """Sorted-key JSON with floats written to 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise ValueError("non-finite float in report")
        text = format(obj, ".17g")
        return text if any(ch in text for ch in ".en") else text + ".0"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k), ensure_ascii=False)}: "
                 f"{dump_json(obj[k], indent, _level + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dump_json(v) for v in obj) + "]"
        items = [pad + dump_json(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def evaluate(instances: Sequence[NounInstance], predictions: Sequence[str],
             predicted_cases: Sequence[str | None], sentences: Mapping[str, Sentence],
             inventory: Sequence[str]) -> EvalReport:
    """Aggregate metrics over aligned instances and predictions.

    Sums run in (sentence id, token index) order, so the result does not
    depend on the order the instances are passed in.
    """
    if not (len(instances) == len(predictions) == len(predicted_cases)):
        raise ValueError(f"alignment mismatch: {len(instances)} instances, "
                         f"{len(predictions)} forms, {len(predicted_cases)} cases")
    if not instances:
        raise ValueError("empty evaluation set")
    inventory = list(inventory)
    col = {case: k for k, case in enumerate(inventory)}
    confusion = [[0] * (len(inventory) + 1) for _ in inventory]

    rows = sorted(zip(instances, predictions, predicted_cases),
                  key=lambda r: (r[0].sent_id, r[0].target_index))
    exact = 0
    edit_sum = 0.0
    by_case = {}
    by_sentence = {}
    for inst, pred, pcase in rows:
        if inst.case not in col:
            raise ValueError(f"gold case {inst.case!r} not in inventory {inventory}")
        hit = pred == inst.form
        norm = levenshtein(pred, inst.form) / max(len(pred), len(inst.form), 1)
        exact += hit
        edit_sum += norm
        stats = by_case.setdefault(inst.case, [0, 0, 0.0])
        stats[0] += 1
        stats[1] += hit
        stats[2] += norm
        confusion[col[inst.case]][col.get(pcase, len(inventory))] += 1
        by_sentence.setdefault(inst.sent_id, {})[inst.target_index] = pred

    bleu_sum = 0.0
    for sent_id in sorted(by_sentence):
        s = sentences[sent_id]
        bleu_sum += sentence_bleu(reconstruct_sentence(s, by_sentence[sent_id]), s.forms)

    n = len(rows)
    mean_edit = edit_sum / n
    per_case = {case: {"count": c, "word_accuracy": h / c, "mean_norm_edit": e / c}
                for case, (c, h, e) in by_case.items()}
    return EvalReport(
        avg_bleu=bleu_sum / len(by_sentence),
        word_accuracy=exact / n,
        mean_norm_edit=mean_edit,
        char_accuracy=1.0 - mean_edit,
        per_case=per_case,
        case_confusion=confusion,
        case_labels=inventory + [NONE_LABEL],
        n_instances=n,
        n_sentences=len(by_sentence),
    )
