"""Command-line interface: split, train, train-ngram, evaluate, predict, gradcheck.

Exit codes: 0 success, 1 verification or metric failure, 2 usage or I/O error.
Option precedence: command-line flag, then ``--config`` JSON file, then the
built-in default.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from collections import Counter
from dataclasses import fields

from . import corpus, model, ngram
from .evaluation import dump_json, evaluate

log = logging.getLogger("declension")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
GRADCHECK_TOLERANCE = 1e-4

DEFAULTS = {
    "seed": 0,
    "train_ratio": corpus.DEFAULT_RATIOS[0],
    "dev_ratio": corpus.DEFAULT_RATIOS[1],
    "test_ratio": corpus.DEFAULT_RATIOS[2],
    "min_len": corpus.DEFAULT_BOUNDS[0],
    "max_len": corpus.DEFAULT_BOUNDS[1],
    "inventory": list(corpus.DEFAULT_INVENTORY),
}
DEFAULTS.update({f.name: f.default for f in fields(model.TrainConfig)})


class UsageError(Exception):
    pass


class Settings:
    """Resolves an option from flags, then the config file, then defaults."""

    def __init__(self, args, config: dict):
        self.args = args
        self.config = config

    def __getitem__(self, name):
        value = getattr(self.args, name, None)
        if value is not None:
            return value
        if name in self.config:
            return self.config[name]
        return DEFAULTS[name]

    def inventory(self) -> tuple:
        value = self["inventory"]
        if isinstance(value, str):
            value = [v.strip() for v in value.split(",") if v.strip()]
        return corpus.check_inventory(value)

    def train_config(self) -> model.TrainConfig:
        return model.TrainConfig(**{f.name: self[f.name] for f in fields(model.TrainConfig)})


def _load_config(path):
    if path is None:
        return {}
    _require_files([path])
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    unknown = sorted(set(doc) - set(DEFAULTS))
    if unknown:
        raise UsageError(f"unknown config keys in {path}: {', '.join(unknown)}")
    return doc


def _require_files(paths):
    for path in paths:
        if not os.path.isfile(path):
            raise UsageError(f"no such file: {path}")


def _write(path, data, mode="w"):
    kwargs = {} if "b" in mode else {"encoding": "utf-8", "newline": "\n"}
    with open(path, mode, **kwargs) as fh:
        fh.write(data)


def _say(args, *parts):
    if not args.quiet:
        print(*parts)


def load_treebanks(paths) -> list:
    _require_files(paths)
    sentences = []
    for path in paths:
        try:
            sentences.extend(corpus.read_conllu(path))
        except corpus.ConlluError as exc:
            raise UsageError(f"{path}: {exc}") from None
    corpus.sentences_by_id(sentences)  # rejects duplicate ids
    return sentences


def _load_manifest(path) -> corpus.DatasetSplit:
    _require_files([path])
    with open(path, encoding="utf-8") as fh:
        return corpus.DatasetSplit.from_json(fh.read())


def _split_sentences(table, split, name):
    missing = [k for k in split.part(name) if k not in table]
    if missing:
        raise UsageError(f"manifest references {len(missing)} sentence ids absent from the "
                         f"treebank (first: {missing[0]!r}); wrong treebank for this manifest?")
    return [table[k] for k in split.part(name)]


def _instances(sentences, inventory):
    return [inst for s in sentences for inst in corpus.extract_instances(s, inventory)]


# --- commands ----------------------------------------------------------------

def cmd_split(args, st: Settings) -> int:
    sentences = load_treebanks(args.treebanks)
    inventory = st.inventory()
    ratios = (st["train_ratio"], st["dev_ratio"], st["test_ratio"])
    split = corpus.split_corpus(sentences, st["seed"], ratios,
                                (st["min_len"], st["max_len"]), inventory)
    _write(args.out, split.to_json())
    table = corpus.sentences_by_id(sentences)
    for name in ("train", "dev", "test"):
        cases = Counter(i.case for i in _instances(_split_sentences(table, split, name), inventory))
        per_case = " ".join(f"{c}={cases.get(c, 0)}" for c in inventory)
        _say(args, f"{name}: {len(split.part(name))} sentences, {per_case}")
    return EXIT_OK


def _training_data(args, st):
    sentences = load_treebanks(args.treebanks)
    split = _load_manifest(args.manifest)
    table = corpus.sentences_by_id(sentences)
    return table, split, _split_sentences(table, split, "train")


def cmd_train(args, st: Settings) -> int:
    cfg = st.train_config()
    inventory = st.inventory()
    table, split, train_sents = _training_data(args, st)
    train_insts = _instances(train_sents, inventory)
    if not train_insts:
        raise UsageError("training split holds no noun instances; enlarge the corpus or "
                         "the train ratio")
    alphabet = corpus.build_alphabet(train_sents)
    dev_insts = _instances(_split_sentences(table, split, "dev"), inventory)
    train_ex = model.make_examples(train_insts, table, alphabet, inventory, cfg)
    dev_ex = model.make_examples(dev_insts, table, alphabet, inventory, cfg)

    def progress(entry):
        log.info("epoch %d  loss %.4f  dev acc %.3f", entry["epoch"], entry["train_loss"],
                 entry["dev_accuracy"])

    result = model.train(cfg, train_ex, dev_ex, len(alphabet), len(inventory), progress)
    model.save_model(result.params, alphabet, inventory, args.model_out)
    if args.history_out:
        _write(args.history_out, dump_json(result.history_doc()) + "\n")
    _say(args, f"trained {len(result.history)} epochs on {len(train_ex)} instances; "
               f"best epoch {result.best_epoch} (dev accuracy {result.best_dev_accuracy:.4f})")
    return EXIT_OK


def cmd_train_ngram(args, st: Settings) -> int:
    inventory = st.inventory()
    _, _, train_sents = _training_data(args, st)
    train_insts = _instances(train_sents, inventory)
    if not train_insts:
        log.warning("training split holds no noun instances; writing an empty model")
    m = ngram.train_ngram(train_insts, inventory)
    _write(args.model_out, m.to_json())
    _say(args, f"n-gram model: {len(m.pair_counts)} pairs, {len(m.lemma_counts)} lemmas")
    return EXIT_OK


def _load_any_model(path):
    _require_files([path])
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] == model.MAGIC:
        return "lstm", model.parse_model(data)
    try:
        return "ngram", ngram.BackoffInflector.from_json(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError) as exc:
        raise UsageError(f"{path} is neither a DCLN model nor an n-gram model ({exc})") from None


def cmd_evaluate(args, st: Settings) -> int:
    kind, loaded = _load_any_model(args.model)
    table, split, train_sents = _training_data(args, st)
    inventory = loaded[2] if kind == "lstm" else loaded.inventory
    eval_sents = _split_sentences(table, split, args.split)
    insts = _instances(eval_sents, inventory)
    if not insts:
        raise UsageError(f"empty evaluation set: split {args.split!r} has no noun instances")

    if args.oracle:
        forms = [i.form for i in insts]
        cases = [i.case for i in insts]
    elif kind == "lstm":
        params, alphabet, _ = loaded
        if not train_sents or corpus.build_alphabet(train_sents) != alphabet:
            raise UsageError("model alphabet does not match the training split of this "
                             "corpus and manifest")
        cfg = st.train_config()
        forms, cases = [], []
        for ex in model.make_examples(insts, table, alphabet, inventory, cfg):
            ids, probs = model.predict(params, ex.input_ids, ex.max_len)
            forms.append(alphabet.decode(ids))
            cases.append(inventory[int(probs.argmax())])
    else:
        forms = [ngram.predict_ngram(loaded, i.article, i.lemma)[0] for i in insts]
        cases = [ngram.predict_case_ngram(loaded, i.article, i.lemma) for i in insts]

    report = evaluate(insts, forms, cases, table, inventory)
    _write(args.report_out, report.to_json())
    _say(args, f"{args.split}: n={report.n_instances} word_accuracy={report.word_accuracy:.4f} "
               f"avg_bleu={report.avg_bleu:.4f} mean_norm_edit={report.mean_norm_edit:.4f} "
               f"case_accuracy={report.case_accuracy:.4f}")
    return EXIT_OK


def cmd_predict(args, st: Settings) -> int:
    if not args.lemma:
        raise UsageError("--lemma must be a non-empty word")
    kind, loaded = _load_any_model(args.model)
    if kind == "ngram":
        form, level = ngram.predict_ngram(loaded, args.article, args.lemma)
        case = ngram.predict_case_ngram(loaded, args.article, args.lemma)
        print(f"{form}\t{level}\t{case or '-'}")
        return EXIT_OK

    params, alphabet, inventory = loaded
    left = list(args.left or []) + ([args.article] if args.article else [])
    right = list(args.right or [])
    unknown = sorted({ch for w in left + right + [args.lemma] for ch in w} - set(alphabet.chars))
    if unknown:
        log.warning("characters outside the model alphabet map to UNK: %s", "".join(unknown))
    ids = corpus.encode_parts(left, args.lemma, right, alphabet)
    cfg = st.train_config()
    out, probs = model.predict(params, ids, cfg.max_len(len(args.lemma)))
    best = int(probs.argmax())
    print(f"{alphabet.decode(out)}\t{inventory[best]}\t{probs[best]:.4f}")
    return EXIT_OK


def cmd_gradcheck(args, st: Settings) -> int:
    err = model.gradient_check(seed=st["seed"], corrupt=args.corrupt)
    ok = err < GRADCHECK_TOLERANCE
    print(f"max relative error: {err:.6e} ({'pass' if ok else 'FAIL'})")
    return EXIT_OK if ok else EXIT_FAIL


# --- parser ------------------------------------------------------------------

def _common():
    # also accepted after the subcommand name; SUPPRESS keeps the top-level value
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=argparse.SUPPRESS, help="JSON file of option values")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="64-bit unsigned seed")
    p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)
    return p


def _train_flags(p):
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", dest="learning_rate", type=float)
    p.add_argument("--d-e", dest="d_e", type=int)
    p.add_argument("--d-h", dest="d_h", type=int)
    p.add_argument("--clip-norm", dest="clip_norm", type=float)
    p.add_argument("--lambda-case", dest="lambda_case", type=float)
    p.add_argument("--patience", type=int)


def _corpus_flags(p, treebanks=True):
    if treebanks:
        p.add_argument("treebanks", nargs="+", help="CoNLL-U files")
    p.add_argument("--inventory", help="comma-separated UD case values, e.g. Nom,Gen,Acc,Dat")
    p.add_argument("--window", type=int, help="context words on each side")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="declension", description=__doc__.splitlines()[0],
                                     parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", parents=[common], help="write a train/dev/test manifest")
    _corpus_flags(p)
    p.add_argument("--out", required=True, help="manifest JSON path")
    p.add_argument("--train", dest="train_ratio", type=float)
    p.add_argument("--dev", dest="dev_ratio", type=float)
    p.add_argument("--test", dest="test_ratio", type=float)
    p.add_argument("--min-len", dest="min_len", type=int)
    p.add_argument("--max-len", dest="max_len", type=int)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", parents=[common], help="train the character LSTM")
    _corpus_flags(p)
    _train_flags(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--model-out", required=True)
    p.add_argument("--history-out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("train-ngram", parents=[common], help="train the n-gram baseline")
    _corpus_flags(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--model-out", required=True)
    p.set_defaults(func=cmd_train_ngram)

    p = sub.add_parser("evaluate", parents=[common], help="score a model on one split")
    _corpus_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="test", choices=("train", "dev", "test"))
    p.add_argument("--report-out", required=True)
    p.add_argument("--oracle", action="store_true", help="score gold forms (upper bound)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", parents=[common], help="inflect one lemma")
    _corpus_flags(p, treebanks=False)
    p.add_argument("--model", required=True)
    p.add_argument("--lemma", required=True)
    p.add_argument("--article")
    p.add_argument("--left", nargs="*", help="context words before the article")
    p.add_argument("--right", nargs="*", help="context words after the noun")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("gradcheck", parents=[common], help="BPTT vs finite differences")
    p.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    # not set_defaults(): the parent actions are shared with every subparser
    for name, default in (("config", None), ("seed", None), ("quiet", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s: %(message)s", stream=sys.stderr, force=True)
    try:
        st = Settings(args, _load_config(args.config))
        return args.func(args, st)
    except (UsageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
