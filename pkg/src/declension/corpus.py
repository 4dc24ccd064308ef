"""CoNLL-U ingestion, noun-instance extraction, dataset splits and the
character alphabet."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .numerics import Prng

DEFAULT_INVENTORY = ("Nom", "Gen", "Acc", "Dat")
CASE_NAMES = {
    "Nom": "Nominative",
    "Gen": "Genitive",
    "Acc": "Accusative",
    "Dat": "Dative",
    "Voc": "Vocative",
}
DEFAULT_RATIOS = (0.09, 0.01, 0.90)
DEFAULT_BOUNDS = (5, 40)

PAD, BOS, EOS, UNK, SEP = range(5)
RESERVED = ("<pad>", "<bos>", "<eos>", "<unk>", "<sep>")


class ConlluError(ValueError):
    """Malformed CoNLL-U input; carries the 1-based line number."""

    def __init__(self, message, lineno=None, line=None):
        self.lineno = lineno
        self.line = line
        if lineno is not None:
            message = f"line {lineno}: {message}: {line!r}"
        super().__init__(message)


def check_inventory(inventory: Sequence[str]) -> tuple[str, ...]:
    inventory = tuple(inventory)
    if not inventory:
        raise ValueError("case inventory is empty")
    if len(set(inventory)) != len(inventory):
        raise ValueError(f"duplicate case in inventory {inventory}")
    return inventory


@dataclass(frozen=True)
class Token:
    id: int
    form: str
    lemma: str
    upos: str
    feats: dict = field(default_factory=dict)
    head: int = 0
    deprel: str = "_"


@dataclass(frozen=True)
class Sentence:
    sent_id: str
    tokens: tuple
    text: str | None = None

    @property
    def forms(self) -> list[str]:
        return [t.form for t in self.tokens]

    def __len__(self):
        return len(self.tokens)


@dataclass(frozen=True)
class NounInstance:
    sent_id: str
    target_index: int  # 0-based position in Sentence.tokens
    article_index: int | None
    article: str | None  # surface form of the article token
    case: str
    number: str
    gender: str
    lemma: str
    form: str


def _parse_feats(col, lineno, line):
    if col == "_":
        return {}
    feats = {}
    for item in col.split("|"):
        name, sep, value = item.partition("=")
        if not sep or not name or not value:
            raise ConlluError(f"bad feature {item!r}", lineno, line)
        feats[name] = value
    return feats


def _finish(tokens, meta, start_line, counter):
    sent_id = meta.get("sent_id") or f"s{counter}"
    for k, tok in enumerate(tokens, 1):
        if tok.id != k:
            raise ConlluError(f"token ids must run 1..n, got {tok.id} at position {k}",
                              start_line, sent_id)
        if tok.head > len(tokens):
            raise ConlluError(f"head {tok.head} of token {tok.id} is not a token id",
                              start_line, sent_id)
    return Sentence(sent_id, tuple(tokens), meta.get("text"))


def parse_conllu(text: str) -> list[Sentence]:
    """Parse CoNLL-U text into sentences.

    Multi-word token ranges (``1-2``) and empty nodes (``1.1``) are skipped.
    Raises :class:`ConlluError` on malformed token lines.
    """
    sentences = []
    tokens, meta = [], {}
    start = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            if tokens:
                sentences.append(_finish(tokens, meta, start, len(sentences) + 1))
            tokens, meta, start = [], {}, None
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].partition("=")
            if sep and key.strip() in ("sent_id", "text"):
                meta[key.strip()] = value.strip()
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ConlluError(f"expected 10 columns, found {len(cols)}", lineno, line)
        if start is None:
            start = lineno
        tid = cols[0]
        if "-" in tid or "." in tid:
            continue
        try:
            tok_id = int(tid)
            head = int(cols[6])
        except ValueError:
            raise ConlluError("unparseable id or head", lineno, line) from None
        if tok_id < 1 or head < 0 or head == tok_id:
            raise ConlluError("invalid id/head", lineno, line)
        if not cols[1] or not cols[2]:
            raise ConlluError("empty form or lemma", lineno, line)
        tokens.append(Token(tok_id, cols[1], cols[2], cols[3],
                            _parse_feats(cols[5], lineno, line), head, cols[7]))
    if tokens:
        sentences.append(_finish(tokens, meta, start, len(sentences) + 1))
    return sentences


def read_conllu(path) -> list[Sentence]:
    with open(path, encoding="utf-8") as fh:
        return parse_conllu(fh.read())


def to_conllu(sentences: Iterable[Sentence]) -> str:
    """Serialise the supported column subset (XPOS, DEPS, MISC become ``_``)."""
    out = []
    for s in sentences:
        out.append(f"# sent_id = {s.sent_id}")
        if s.text is not None:
            out.append(f"# text = {s.text}")
        for t in s.tokens:
            feats = "|".join(f"{k}={v}" for k, v in sorted(t.feats.items())) or "_"
            out.append("\t".join([str(t.id), t.form, t.lemma, t.upos, "_", feats,
                                  str(t.head), t.deprel, "_", "_"]))
        out.append("")
    return "\n".join(out) + ("\n" if out else "")


def extract_instances(s: Sentence, inventory: Sequence[str] = DEFAULT_INVENTORY
                      ) -> list[NounInstance]:
    inventory = set(inventory)
    found = []
    for idx, tok in enumerate(s.tokens):
        case = tok.feats.get("Case")
        if tok.upos != "NOUN" or case not in inventory:
            continue
        article = None
        for j in range(idx - 1, -1, -1):
            cand = s.tokens[j]
            if cand.deprel == "det" and cand.head == tok.id:
                article = j
                break
        found.append(NounInstance(
            sent_id=s.sent_id,
            target_index=idx,
            article_index=article,
            article=None if article is None else s.tokens[article].form,
            case=case,
            number=tok.feats.get("Number", "Unknown"),
            gender=tok.feats.get("Gender", "Unknown"),
            lemma=tok.lemma,
            form=tok.form,
        ))
    return found


@dataclass(frozen=True)
class DatasetSplit:
    seed: int
    ratios: tuple
    bounds: tuple
    train: tuple
    dev: tuple
    test: tuple

    def to_json(self) -> str:
        doc = {
            "seed": self.seed,
            "ratios": list(self.ratios),
            "bounds": list(self.bounds),
            "train": list(self.train),
            "dev": list(self.dev),
            "test": list(self.test),
        }
        return json.dumps(doc, sort_keys=True, ensure_ascii=False, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "DatasetSplit":
        doc = json.loads(text)
        try:
            return cls(int(doc["seed"]), tuple(doc["ratios"]), tuple(doc["bounds"]),
                       tuple(doc["train"]), tuple(doc["dev"]), tuple(doc["test"]))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed split manifest: {exc}") from None

    def part(self, name: str) -> tuple:
        if name not in ("train", "dev", "test"):
            raise ValueError(f"unknown split {name!r}; expected train, dev or test")
        return getattr(self, name)


def split_corpus(sentences: Sequence[Sentence], seed: int,
                 ratios=DEFAULT_RATIOS, len_bounds=DEFAULT_BOUNDS,
                 inventory: Sequence[str] = DEFAULT_INVENTORY) -> DatasetSplit:
    """Filter, shuffle with SplitMix64/Fisher-Yates, and cut into train/dev/test."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three non-negative fractions summing to 1, got {ratios}")
    lo, hi = (int(v) for v in len_bounds)
    if lo > hi:
        raise ValueError(f"length bounds out of order: {lo} > {hi}")
    if not 0 <= seed <= (1 << 64) - 1:
        raise ValueError("seed must fit in 64 unsigned bits")

    ids = [s.sent_id for s in sentences
           if lo <= len(s) <= hi and extract_instances(s, inventory)]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate sentence ids in corpus")
    n = len(ids)
    if n == 0:
        raise ValueError("empty corpus after filtering")
    Prng(seed).shuffle(ids)
    # the epsilon absorbs representation error such as 0.29 * 100 = 28.999...
    n_train = math.floor(ratios[0] * n + 1e-9)
    n_dev = math.floor(ratios[1] * n + 1e-9)
    return DatasetSplit(seed, ratios, (lo, hi), tuple(ids[:n_train]),
                        tuple(ids[n_train:n_train + n_dev]), tuple(ids[n_train + n_dev:]))


class Alphabet:
    """Character <-> index map; indices 0..4 are PAD, BOS, EOS, UNK, SEP."""

    def __init__(self, chars: Iterable[str]):
        chars = sorted(set(chars))
        for ch in chars:
            if len(ch) != 1:
                raise ValueError(f"alphabet entries must be single characters, got {ch!r}")
        self.chars = tuple(chars)
        self.index = {ch: k + len(RESERVED) for k, ch in enumerate(self.chars)}

    def __len__(self):
        return len(RESERVED) + len(self.chars)

    def __eq__(self, other):
        return isinstance(other, Alphabet) and self.chars == other.chars

    def __repr__(self):
        return f"Alphabet({''.join(self.chars)!r})"

    def encode_char(self, ch: str) -> int:
        return self.index.get(ch, UNK)

    def encode(self, text: str) -> list[int]:
        return [self.index.get(ch, UNK) for ch in text]

    def decode_index(self, k: int) -> str:
        if k < len(RESERVED):
            return RESERVED[k]
        return self.chars[k - len(RESERVED)]

    def decode(self, ids: Iterable[int]) -> str:
        """Characters for real indices; reserved symbols are dropped."""
        return "".join(self.chars[k - len(RESERVED)] for k in ids if k >= len(RESERVED))


def build_alphabet(train_sentences: Sequence[Sentence]) -> Alphabet:
    if not train_sentences:
        raise ValueError("cannot build an alphabet from an empty training split")
    chars = set()
    for s in train_sentences:
        for t in s.tokens:
            chars.update(t.form)
            chars.update(t.lemma)
    return Alphabet(chars)


def encode_parts(left: Sequence[str], lemma: str, right: Sequence[str],
                 alphabet: Alphabet) -> list[int]:
    ids = [BOS]
    for k, word in enumerate(left):
        if k:
            ids.append(SEP)
        ids.extend(alphabet.encode(word))
    ids.append(SEP)
    ids.extend(alphabet.encode(lemma))
    ids.append(SEP)
    for k, word in enumerate(right):
        if k:
            ids.append(SEP)
        ids.extend(alphabet.encode(word))
    ids.append(EOS)
    return ids


def encode_instance(inst: NounInstance, s: Sentence, alphabet: Alphabet,
                    window: int) -> tuple[list[int], list[int]]:
    if window < 0:
        raise ValueError("window must be >= 0")
    forms = s.forms
    i = inst.target_index
    left = forms[max(0, i - window):i]
    right = forms[i + 1:i + 1 + window]
    return (encode_parts(left, inst.lemma, right, alphabet),
            alphabet.encode(inst.form) + [EOS])


def sentences_by_id(sentences: Iterable[Sentence]) -> Mapping[str, Sentence]:
    table = {}
    for s in sentences:
        if s.sent_id in table:
            raise ValueError(f"duplicate sentence id {s.sent_id!r}")
        table[s.sent_id] = s
    return table
