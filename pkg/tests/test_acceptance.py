"""One test per acceptance criterion; each records a PASS/FAIL line with its tolerance."""
import math
import random
import time

import numpy as np

from declension import corpus, model, ngram
from declension.cli import main
from declension.evaluation import levenshtein, sentence_bleu
from declension.numerics import cross_entropy, softmax

from conftest import synthetic_corpus
from test_evaluation import naive_levenshtein

GRAD_TOL = 1e-4
GRAD_BUDGET_S = 30.0
BLEU_EXPECTED, BLEU_TOL = 0.7165, 1e-4
OVERFIT_TARGET = 0.95
OVERFIT_BUDGET_S = 300.0
NORM_TOL = 1e-12


def test_c1_gradient_correctness(criterion, capsys):
    start = time.perf_counter()
    errors = []
    codes = []
    for seed in range(10):
        codes.append(main(["gradcheck", "--seed", str(seed)]))
        errors.append(model.gradient_check(seed))
    elapsed = time.perf_counter() - start
    capsys.readouterr()
    worst = max(errors)
    criterion("1 gradient check", codes == [0] * 10 and worst < GRAD_TOL
              and elapsed < GRAD_BUDGET_S,
              f"10 seeds, max rel err {worst:.2e} < {GRAD_TOL:g}, {elapsed:.2f}s < {GRAD_BUDGET_S:g}s")


def test_c2_metric_oracles(criterion):
    rng = random.Random(2024)
    mismatches = 0
    for _ in range(1000):
        a = "".join(rng.choice("αβγδ") for _ in range(rng.randint(0, 8)))
        b = "".join(rng.choice("αβγδ") for _ in range(rng.randint(0, 8)))
        mismatches += levenshtein(a, b) != naive_levenshtein(a, b)
    bleu = sentence_bleu(["the", "cat", "sat"], ["the", "cat", "sat", "down"])
    vocab = [f"w{k}" for k in range(50)]
    identity = all(sentence_bleu(s, s) == 1.0 for s in
                   ([rng.choice(vocab) for _ in range(rng.randint(1, 30))] for _ in range(100)))
    criterion("2 metric oracles", mismatches == 0 and abs(bleu - BLEU_EXPECTED) <= BLEU_TOL
              and identity,
              f"levenshtein {mismatches}/1000 mismatches; BLEU {bleu:.6f} vs "
              f"{BLEU_EXPECTED} +- {BLEU_TOL:g}; BLEU(x,x)=1 on 100 sentences: {identity}")


def test_c3_split_fidelity(criterion):
    sents = synthetic_corpus(100)
    ids = {s.sent_id for s in sents}
    sizes = (0, 0, 0)
    ok = True
    for seed in range(5):
        a = corpus.split_corpus(sents, seed, (0.09, 0.01, 0.90))
        b = corpus.split_corpus(sents, seed, (0.09, 0.01, 0.90))
        sizes = (len(a.train), len(a.dev), len(a.test))
        parts = [set(a.train), set(a.dev), set(a.test)]
        ok &= sizes == (9, 1, 90)
        ok &= a.to_json() == b.to_json()
        ok &= set().union(*parts) == ids and sum(map(len, parts)) == len(ids)
    criterion("3 split fidelity", ok, f"sizes {sizes} == (9, 1, 90); partition and "
              "determinism over 5 seeds")


def test_c4_overfit(criterion, fixture_sentences):
    table = corpus.sentences_by_id(fixture_sentences)
    insts = [i for s in fixture_sentences for i in corpus.extract_instances(s)][:20]
    used = [table[k] for k in dict.fromkeys(i.sent_id for i in insts)]
    alphabet = corpus.build_alphabet(used)
    cfg = model.TrainConfig()
    inventory = corpus.DEFAULT_INVENTORY
    examples = model.make_examples(insts, table, alphabet, inventory, cfg)

    start = time.perf_counter()
    result = model.train(cfg, examples, examples, len(alphabet), len(inventory))
    elapsed = time.perf_counter() - start
    words = cases = 0
    for ex in examples:
        ids, probs = model.predict(result.params, ex.input_ids, ex.max_len)
        words += ids == ex.target_ids[:-1].tolist()
        cases += int(probs.argmax()) == ex.case
    word_acc, case_acc = words / len(examples), cases / len(examples)
    criterion("4 overfit", word_acc >= OVERFIT_TARGET and case_acc >= OVERFIT_TARGET
              and len(result.history) <= 500 and elapsed < OVERFIT_BUDGET_S,
              f"20 instances, word acc {word_acc:.3f} and case acc {case_acc:.3f} >= "
              f"{OVERFIT_TARGET}, {len(result.history)} epochs <= 500, "
              f"{elapsed:.0f}s < {OVERFIT_BUDGET_S:g}s")


def test_c5_baseline_sanity(criterion, fixture_sentences):
    table = corpus.sentences_by_id(fixture_sentences)
    pick = lambda part: [i for k in part for i in corpus.extract_instances(table[k])]
    n_seen = hits = 0
    n_unseen = misses = 0
    novel = corpus.NounInstance("x", 0, None, "η", "Nom", "Sing", "Fem", "ζυγαριά", "ζυγαριά")
    for seed in range(5):
        split = corpus.split_corpus(fixture_sentences, seed, (0.5, 0.0, 0.5), (1, 100))
        train, test = pick(split.train), pick(split.test)
        m = ngram.train_ngram(train)
        seen = [i for i in test if i.article and (i.article.lower(), i.lemma) in m.pair_counts]
        n_seen += len(seen)
        hits += sum(ngram.predict_ngram(m, i.article, i.lemma) == (i.form, ngram.PAIR)
                    for i in seen)
        unseen = [i for i in test if i.lemma not in m.lemma_counts] + [novel]
        n_unseen += len(unseen)
        misses += sum(ngram.predict_ngram(m, i.article, i.lemma) != (i.lemma, ngram.IDENTITY)
                      for i in unseen)
    criterion("5 baseline sanity", n_seen > 0 and hits == n_seen and misses == 0,
              f"seen-pair accuracy {hits}/{n_seen} == 100% over 5 splits; identity backoff "
              f"on {n_unseen - misses}/{n_unseen} unseen lemmas")


def _pipeline(workdir, treebank):
    manifest, model_path, report = (workdir / n for n in ("split.json", "m.bin", "r.json"))
    codes = [
        main(["--quiet", "--seed", "11", "split", treebank, "--out", str(manifest),
              "--train", "0.3", "--dev", "0.1", "--test", "0.6"]),
        main(["--quiet", "--seed", "11", "train", treebank, "--manifest", str(manifest),
              "--model-out", str(model_path), "--epochs", "3"]),
        main(["--quiet", "evaluate", treebank, "--model", str(model_path), "--manifest",
              str(manifest), "--report-out", str(report)]),
    ]
    return codes, [p.read_bytes() for p in (manifest, model_path, report)]


def test_c6_determinism(criterion, tmp_path, fixture_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    codes_a, files_a = _pipeline(tmp_path / "a", fixture_path)
    codes_b, files_b = _pipeline(tmp_path / "b", fixture_path)
    same = [x == y for x, y in zip(files_a, files_b)]
    criterion("6 end-to-end determinism", codes_a == codes_b == [0, 0, 0] and all(same),
              f"manifest/model/report byte-identical: {same}")


def test_c7_numerical_invariants(criterion):
    rng = np.random.default_rng(7)
    worst_sum = 0.0
    argmax_ok = True
    p = model.init_params(model.Prng(3), 10, 4, 3, 6)
    for _ in range(1000):
        z = rng.normal(scale=5.0, size=rng.integers(1, 40))
        worst_sum = max(worst_sum, abs(softmax(z).sum() - 1.0))
        h = rng.normal(size=6)
        before = model.classify_case(p, h)
        worst_sum = max(worst_sum, abs(before.sum() - 1.0))
        q = p.copy()
        q.b_case += rng.normal(scale=50.0)
        argmax_ok &= int(model.classify_case(q, h).argmax()) == int(before.argmax())
    ce_err = max(abs(cross_entropy(np.full(v, 1.0 / v), 0) - math.log(v)) for v in range(1, 200))
    criterion("7 numerical invariants", worst_sum <= NORM_TOL and argmax_ok and ce_err <= NORM_TOL,
              f"softmax sum deviation {worst_sum:.1e} <= {NORM_TOL:g}; shift-invariant argmax "
              f"on 1000 vectors: {argmax_ok}; |CE(uniform) - ln V| {ce_err:.1e} <= {NORM_TOL:g}")


def test_c8_serialization(criterion, tmp_path, fixture_sentences):
    table = corpus.sentences_by_id(fixture_sentences)
    alphabet = corpus.build_alphabet(fixture_sentences)
    inventory = corpus.DEFAULT_INVENTORY
    insts = [i for s in fixture_sentences for i in corpus.extract_instances(s)][:50]
    cfg = model.TrainConfig(d_e=8, d_h=16)
    examples = model.make_examples(insts, table, alphabet, inventory, cfg)
    params = model.init_params(model.Prng(8), len(alphabet), len(inventory), 8, 16)
    path = tmp_path / "m.bin"
    model.save_model(params, alphabet, inventory, path)
    loaded, alphabet2, inventory2 = model.load_model(path)
    same = sum(model.predict(params, ex.input_ids, ex.max_len)[0]
               == model.predict(loaded, ex.input_ids, ex.max_len)[0]
               and np.array_equal(model.predict(params, ex.input_ids, ex.max_len)[1],
                                  model.predict(loaded, ex.input_ids, ex.max_len)[1])
               for ex in examples)

    data = path.read_bytes()
    bad_inputs = {
        "magic": b"XXXX" + data[4:],
        "version": data[:4] + (999).to_bytes(4, "little") + data[8:],
        "truncated": data[: len(data) // 2],
        "empty": b"",
        "trailing": data + b"\x00\x01",
    }
    rejected = {}
    for name, blob in bad_inputs.items():
        try:
            model.parse_model(blob)
            rejected[name] = False
        except model.ModelFormatError:
            rejected[name] = True
    ok = (same == len(examples) == 50 and alphabet2 == alphabet and inventory2 == inventory
          and all(rejected.values()))
    criterion("8 serialization", ok, f"identical predictions {same}/50; corrupted files "
              f"rejected with a format error: {rejected}")
