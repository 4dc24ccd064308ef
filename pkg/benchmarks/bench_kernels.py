"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--d-h 128] [--repeat 3]

Times one training step (BPTT + Adam) and one greedy decode on fixture
instances, and checks the two backends agree bit for bit.
"""
import argparse
import time
from importlib import resources

from declension import corpus, kernels, model


def load_examples(cfg, n):
    sents = corpus.read_conllu(str(resources.files("declension") / "data" / "fixture.conllu"))
    table = corpus.sentences_by_id(sents)
    insts = [i for s in sents for i in corpus.extract_instances(s)][:n]
    alphabet = corpus.build_alphabet(sents)
    return model.make_examples(insts, table, alphabet, corpus.DEFAULT_INVENTORY, cfg), len(alphabet)


def run(examples, params, repeat):
    best_step = best_decode = float("inf")
    digest = []
    for _ in range(repeat):
        p = params.copy()
        adam = model.AdamState.like(p)
        t0 = time.perf_counter()
        for ex in examples:
            loss, grads = model.backward(p, ex)
            model.adam_update(p, grads, adam, 1e-3, 5.0)
            digest.append(loss)
        t1 = time.perf_counter()
        for ex in examples:
            digest.append(tuple(model.predict(p, ex.input_ids, ex.max_len)[0]))
        t2 = time.perf_counter()
        best_step = min(best_step, (t1 - t0) / len(examples))
        best_decode = min(best_decode, (t2 - t1) / len(examples))
    return best_step, best_decode, digest


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--d-e", type=int, default=32)
    ap.add_argument("--d-h", type=int, default=128)
    ap.add_argument("--instances", type=int, default=10)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    cfg = model.TrainConfig(d_e=args.d_e, d_h=args.d_h)
    examples, A = load_examples(cfg, args.instances)
    params = model.init_params(model.Prng(0), A, 4, args.d_e, args.d_h)
    names = kernels.available()
    print(f"d_e={args.d_e} d_h={args.d_h} alphabet={A} instances={len(examples)}")
    results = {}
    for name in names:
        kernels.use(name)
        results[name] = run(examples, params, args.repeat if name == "cython" else 1)
        step, decode, _ = results[name]
        print(f"{name:>7}: train step {step * 1e3:9.2f} ms/instance, "
              f"decode {decode * 1e3:8.2f} ms/instance")
    if len(results) == 2:
        c, p = results["cython"], results["python"]
        print(f"speedup: train {p[0] / c[0]:.0f}x, decode {p[1] / c[1]:.0f}x")
        n = len(p[2])
        print("bit-identical:", c[2][:n] == p[2])


if __name__ == "__main__":
    main()
