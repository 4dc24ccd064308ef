"""Character-level LSTM inflector.

One LSTM reads ``BOS left-context SEP lemma SEP right-context EOS``; a
softmax head on its final hidden state predicts the case, and the same
LSTM then continues from that state to spell the inflected form one
character at a time.  Training is per-instance Adam on the joint loss
with exact gradients from full backpropagation through time.
"""
from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass, field, fields
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .corpus import BOS, EOS, PAD, SEP, Alphabet, NounInstance, encode_instance
from .numerics import Prng, finite_diff_grad, init_uniform

log = logging.getLogger(__name__)

TENSOR_NAMES = ("E", "W", "b", "V", "b_v", "U_case", "b_case")
MAGIC = b"DCLN"
FORMAT_VERSION = 1
SUPPORTED_VERSIONS = (FORMAT_VERSION,)


class ModelFormatError(ValueError):
    pass


@dataclass
class LstmParams:
    E: np.ndarray       # alphabet x d_e
    W: np.ndarray       # 4*d_h x (d_e + d_h), gate rows [i, f, g, o]
    b: np.ndarray       # 4*d_h
    V: np.ndarray       # alphabet x d_h
    b_v: np.ndarray     # alphabet
    U_case: np.ndarray  # cases x d_h
    b_case: np.ndarray  # cases

    def __post_init__(self):
        for name in TENSOR_NAMES:
            setattr(self, name, np.ascontiguousarray(getattr(self, name), dtype=np.float64))
        self.validate()

    @property
    def d_e(self) -> int:
        return self.E.shape[1]

    @property
    def d_h(self) -> int:
        return self.V.shape[1]

    @property
    def alphabet_size(self) -> int:
        return self.E.shape[0]

    @property
    def n_cases(self) -> int:
        return self.U_case.shape[0]

    def tensors(self) -> list[np.ndarray]:
        return [getattr(self, name) for name in TENSOR_NAMES]

    def validate(self):
        A, de = self.E.shape
        dh = self.V.shape[1] if self.V.ndim == 2 else -1
        C = self.U_case.shape[0] if self.U_case.ndim == 2 else -1
        expected = {
            "E": (A, de), "W": (4 * dh, de + dh), "b": (4 * dh,), "V": (A, dh),
            "b_v": (A,), "U_case": (C, dh), "b_case": (C,),
        }
        for name, shape in expected.items():
            got = getattr(self, name).shape
            if got != shape:
                raise ValueError(f"tensor {name} has shape {got}, expected {shape}")
        for name in TENSOR_NAMES:
            if not np.isfinite(getattr(self, name)).all():
                raise ValueError(f"tensor {name} contains non-finite values")

    def copy(self) -> "LstmParams":
        return LstmParams(*(t.copy() for t in self.tensors()))

    def zeros_like(self) -> "LstmParams":
        return LstmParams(*(np.zeros_like(t) for t in self.tensors()))


@dataclass(frozen=True)
class LstmState:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, d_h: int) -> "LstmState":
        return cls(np.zeros(d_h), np.zeros(d_h))


@dataclass
class TrainConfig:
    seed: int = 0
    epochs: int = 500
    learning_rate: float = 1e-3
    d_e: int = 32
    d_h: int = 128
    window: int = 3
    clip_norm: float = 5.0
    lambda_case: float = 0.5
    patience: int = 5
    # decode budget = factor * len(lemma) + extra
    max_decode_factor: int = 2
    max_decode_extra: int = 8

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name in ("seed", "window"):
                if value < 0:
                    raise ValueError(f"{f.name} must be >= 0")
            elif f.name == "lambda_case":
                if value < 0:
                    raise ValueError("lambda_case must be >= 0")
            elif not value > 0:
                raise ValueError(f"{f.name} must be positive, got {value!r}")

    def max_len(self, lemma_len: int) -> int:
        return self.max_decode_factor * lemma_len + self.max_decode_extra


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def like(cls, p: LstmParams) -> "AdamState":
        return cls([np.zeros_like(t) for t in p.tensors()],
                   [np.zeros_like(t) for t in p.tensors()])


@dataclass(frozen=True)
class Example:
    """An encoded instance: input/target index arrays plus the gold case index."""

    input_ids: np.ndarray
    target_ids: np.ndarray
    case: int
    max_len: int

    @classmethod
    def make(cls, input_ids, target_ids, case: int, max_len: int | None = None) -> "Example":
        inp = np.ascontiguousarray(input_ids, dtype=np.int64)
        tgt = np.ascontiguousarray(target_ids, dtype=np.int64)
        if inp.size == 0:
            raise ValueError("empty input sequence")
        if tgt.size == 0 or tgt[-1] != EOS:
            raise ValueError("target must end with EOS")
        return cls(inp, tgt, case, max_len if max_len is not None else 2 * len(tgt) + 8)


def make_examples(instances: Sequence[NounInstance], sentences, alphabet: Alphabet,
                  inventory: Sequence[str], cfg: TrainConfig) -> list[Example]:
    index = {case: k for k, case in enumerate(inventory)}
    out = []
    for inst in instances:
        inp, tgt = encode_instance(inst, sentences[inst.sent_id], alphabet, cfg.window)
        out.append(Example.make(inp, tgt, index[inst.case], cfg.max_len(len(inst.lemma))))
    return out


def init_params(prng: Prng, alphabet_size: int, n_cases: int, d_e: int, d_h: int
                ) -> LstmParams:
    E = init_uniform(prng, (alphabet_size, d_e), d_e)
    W = init_uniform(prng, (4 * d_h, d_e + d_h), d_e + d_h)
    b = np.zeros(4 * d_h)
    b[d_h:2 * d_h] = 1.0  # forget gate
    V = init_uniform(prng, (alphabet_size, d_h), d_h)
    U = init_uniform(prng, (n_cases, d_h), d_h)
    return LstmParams(E, W, b, V, np.zeros(alphabet_size), U, np.zeros(n_cases))


def lstm_step(p: LstmParams, x_index: int, s: LstmState) -> LstmState:
    if not 0 <= x_index < p.alphabet_size:
        raise IndexError(f"symbol index {x_index} outside alphabet of size {p.alphabet_size}")
    h, c = kernels.lstm_step(p.E, p.W, p.b, int(x_index),
                             np.ascontiguousarray(s.h, dtype=np.float64),
                             np.ascontiguousarray(s.c, dtype=np.float64))
    return LstmState(h, c)


def _check_ids(p, ids):
    ids = np.ascontiguousarray(ids, dtype=np.int64)
    if ids.size == 0:
        raise ValueError("cannot encode an empty sequence")
    if ids.min() < 0 or ids.max() >= p.alphabet_size:
        raise IndexError("symbol index outside alphabet")
    return ids


def encode_sequence(p: LstmParams, input_ids) -> tuple[LstmState, list[LstmState]]:
    ids = _check_ids(p, input_ids)
    H, C = kernels.encode(p.E, p.W, p.b, ids)
    trace = [LstmState(H[k], C[k]) for k in range(len(ids))]
    return trace[-1], trace


def classify_case(p: LstmParams, final_h) -> np.ndarray:
    h = np.ascontiguousarray(final_h, dtype=np.float64)
    if h.shape != (p.d_h,):
        raise ValueError(f"hidden vector has shape {h.shape}, expected ({p.d_h},)")
    return kernels.head_probs(p.U_case, p.b_case, h)


def _decode_mask(size: int) -> np.ndarray:
    mask = np.zeros(size, dtype=np.uint8)
    mask[[PAD, BOS, SEP]] = 1
    return mask


def decode_form(p: LstmParams, enc_final: LstmState, alphabet: Alphabet | None,
                max_len: int) -> list[int]:
    """Greedy decoding from the encoder state; EOS is not included."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    if alphabet is not None and len(alphabet) != p.alphabet_size:
        raise ValueError("alphabet does not match the model")
    return kernels.decode_greedy(p.E, p.W, p.b, p.V, p.b_v,
                                 np.ascontiguousarray(enc_final.h, dtype=np.float64),
                                 np.ascontiguousarray(enc_final.c, dtype=np.float64),
                                 BOS, EOS, int(max_len), _decode_mask(p.alphabet_size))


def predict(p: LstmParams, input_ids, max_len: int) -> tuple[list[int], np.ndarray]:
    """Decoded form indices and case distribution for one encoded input."""
    final, _ = encode_sequence(p, input_ids)
    return decode_form(p, final, None, max_len), classify_case(p, final.h)


def instance_loss(p: LstmParams, ex: Example, gold_case: int | None = None,
                  lambda_case: float = 0.5) -> float:
    gold = ex.case if gold_case is None else gold_case
    return kernels.loss_grad(*p.tensors(), ex.input_ids, ex.target_ids, gold,
                             float(lambda_case), BOS)


def backward(p: LstmParams, ex: Example, gold_case: int | None = None,
             lambda_case: float = 0.5) -> tuple[float, LstmParams]:
    """Loss and its exact gradient by full backpropagation through time."""
    gold = ex.case if gold_case is None else gold_case
    grads = p.zeros_like()
    loss = kernels.loss_grad(*p.tensors(), ex.input_ids, ex.target_ids, gold,
                             float(lambda_case), BOS, tuple(grads.tensors()))
    return loss, grads


def global_norm(tensors: Sequence[np.ndarray]) -> float:
    acc = 0.0
    for t in tensors:
        acc = kernels.sumsq(t.reshape(-1), acc)
    return math.sqrt(acc)


def adam_update(p: LstmParams, grads: LstmParams, state: AdamState, lr: float,
                clip_norm: float) -> float:
    """Clip by global norm, then one bias-corrected Adam step in place.

    Returns the pre-clipping gradient norm.
    """
    norm = global_norm(grads.tensors())
    if not math.isfinite(norm):
        raise FloatingPointError("non-finite gradient; aborting training")
    scale = clip_norm / norm if norm > clip_norm else 1.0
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for param, g, m, v in zip(p.tensors(), grads.tensors(), state.m, state.v):
        kernels.adam(param.reshape(-1), g.reshape(-1), m.reshape(-1), v.reshape(-1),
                     lr, scale, state.beta1, state.beta2, state.eps, bc1, bc2)
    return norm


def exact_match_accuracy(p: LstmParams, examples: Sequence[Example]) -> float:
    if not examples:
        return 0.0
    hits = 0
    for ex in examples:
        final, _ = encode_sequence(p, ex.input_ids)
        hits += decode_form(p, final, None, ex.max_len) == ex.target_ids[:-1].tolist()
    return hits / len(examples)


@dataclass
class TrainResult:
    params: LstmParams
    history: list = field(default_factory=list)
    best_epoch: int = 0
    best_dev_accuracy: float = 0.0

    def history_doc(self) -> dict:
        return {"history": self.history, "best_epoch": self.best_epoch,
                "best_dev_accuracy": self.best_dev_accuracy}


def train(cfg: TrainConfig, train_examples: Sequence[Example],
          dev_examples: Sequence[Example], alphabet_size: int, n_cases: int,
          on_epoch: Callable[[dict], None] | None = None) -> TrainResult:
    """Per-instance Adam with early stopping on dev exact-match accuracy.

    An epoch counts as an improvement when dev accuracy rises, or stays
    equal while the mean dev loss falls; otherwise exact-match accuracy sits
    at zero for many early epochs and ``patience`` would end training before
    anything is learned.  With no dev examples the training set is monitored.
    """
    if not train_examples:
        raise ValueError("empty training set: nothing to train on")
    prng = Prng(cfg.seed)
    params = init_params(prng, alphabet_size, n_cases, cfg.d_e, cfg.d_h)
    adam = AdamState.like(params)
    monitor = list(dev_examples) if dev_examples else list(train_examples)

    result = TrainResult(params.copy())
    best = (-1.0, math.inf)
    order = list(range(len(train_examples)))
    stale = 0
    for epoch in range(1, cfg.epochs + 1):
        prng.shuffle(order)
        total = 0.0
        for k in order:
            loss, grads = backward(params, train_examples[k], None, cfg.lambda_case)
            total += loss
            adam_update(params, grads, adam, cfg.learning_rate, cfg.clip_norm)
        acc = exact_match_accuracy(params, monitor)
        dev_loss = 0.0
        for ex in monitor:
            dev_loss += instance_loss(params, ex, None, cfg.lambda_case)
        dev_loss /= len(monitor)
        entry = {"epoch": epoch, "train_loss": total / len(order),
                 "dev_accuracy": acc, "dev_loss": dev_loss}
        result.history.append(entry)
        if on_epoch is not None:
            on_epoch(entry)
        if acc > best[0] or (acc == best[0] and dev_loss < best[1]):
            best = (acc, dev_loss)
            result.params = params.copy()
            result.best_epoch = epoch
            result.best_dev_accuracy = acc
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                log.info("early stop at epoch %d (best %d)", epoch, result.best_epoch)
                break
    return result


# --- model files -----------------------------------------------------------

def _pack_str(text: str) -> bytes:
    raw = text.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def model_bytes(p: LstmParams, alphabet: Alphabet, inventory: Sequence[str]) -> bytes:
    if len(alphabet) != p.alphabet_size or len(inventory) != p.n_cases:
        raise ValueError("alphabet/inventory sizes do not match the parameters")
    out = [MAGIC, struct.pack("<I", FORMAT_VERSION)]
    out.append(struct.pack("<I", len(alphabet.chars)))
    out.extend(struct.pack("<I", ord(ch)) for ch in alphabet.chars)
    out.append(struct.pack("<I", len(inventory)))
    out.extend(_pack_str(case) for case in inventory)
    out.append(struct.pack("<II", p.d_e, p.d_h))
    out.append(struct.pack("<I", len(TENSOR_NAMES)))
    for name in TENSOR_NAMES:
        t = getattr(p, name)
        out.append(_pack_str(name))
        out.append(struct.pack("<I", t.ndim))
        out.append(struct.pack(f"<{t.ndim}I", *t.shape))
        out.append(t.astype("<f8").tobytes(order="C"))
    return b"".join(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ModelFormatError(f"truncated model file (needed {n} bytes at offset {self.pos})")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def text(self) -> str:
        try:
            return self.take(self.u32()).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ModelFormatError(f"bad UTF-8 in model file: {exc}") from None


def parse_model(data: bytes) -> tuple[LstmParams, Alphabet, tuple[str, ...]]:
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise ModelFormatError("bad magic: not a DCLN model file")
    version = r.u32()
    if version not in SUPPORTED_VERSIONS:
        raise ModelFormatError(f"unsupported model version {version}; "
                               f"supported versions: {list(SUPPORTED_VERSIONS)}")
    try:
        chars = [chr(r.u32()) for _ in range(r.u32())]
    except (ValueError, OverflowError):
        raise ModelFormatError("invalid codepoint in alphabet") from None
    alphabet = Alphabet(chars)
    if list(alphabet.chars) != chars:
        raise ModelFormatError("alphabet is not sorted and duplicate-free")
    inventory = tuple(r.text() for _ in range(r.u32()))
    d_e, d_h = r.u32(), r.u32()
    count = r.u32()
    if count != len(TENSOR_NAMES):
        raise ModelFormatError(f"expected {len(TENSOR_NAMES)} tensors, found {count}")
    tensors = {}
    for expected in TENSOR_NAMES:
        name = r.text()
        if name != expected:
            raise ModelFormatError(f"expected tensor {expected!r}, found {name!r}")
        rank = r.u32()
        if rank not in (1, 2):
            raise ModelFormatError(f"tensor {name} has unsupported rank {rank}")
        shape = struct.unpack(f"<{rank}I", r.take(4 * rank))
        n = math.prod(shape)
        tensors[name] = np.frombuffer(r.take(8 * n), dtype="<f8").astype(np.float64).reshape(shape)
    if r.pos != len(data):
        raise ModelFormatError(f"{len(data) - r.pos} trailing bytes after tensor table")
    try:
        params = LstmParams(**tensors)
    except ValueError as exc:
        raise ModelFormatError(f"inconsistent tensor shapes: {exc}") from None
    if (params.d_e, params.d_h) != (d_e, d_h):
        raise ModelFormatError(f"recorded dims ({d_e}, {d_h}) disagree with tensors "
                               f"({params.d_e}, {params.d_h})")
    if params.alphabet_size != len(alphabet) or params.n_cases != len(inventory):
        raise ModelFormatError("tensor shapes disagree with alphabet or inventory size")
    return params, alphabet, inventory


def save_model(p: LstmParams, alphabet: Alphabet, inventory: Sequence[str], path) -> None:
    with open(path, "wb") as fh:
        fh.write(model_bytes(p, alphabet, inventory))


def load_model(path) -> tuple[LstmParams, Alphabet, tuple[str, ...]]:
    with open(path, "rb") as fh:
        return parse_model(fh.read())


# --- gradient check ----------------------------------------------------------

def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


def gradient_check(seed: int = 0, d_e: int = 3, d_h: int = 4, alphabet_size: int = 8,
                   n_cases: int = 4, input_len: int = 5, target_len: int = 4,
                   lambda_case: float = 0.5, eps: float = 1e-5,
                   corrupt: bool = False) -> float:
    """Max relative error between BPTT and central differences on a random tiny model.

    ``corrupt`` perturbs one analytic gradient entry, to prove the harness
    can fail.
    """
    prng = Prng(seed)
    tensors = [init_uniform(prng, shape, 1) for shape in (
        (alphabet_size, d_e), (4 * d_h, d_e + d_h), (4 * d_h,), (alphabet_size, d_h),
        (alphabet_size,), (n_cases, d_h), (n_cases,))]
    p = LstmParams(*tensors)
    inp = [BOS] + [prng.below(alphabet_size) for _ in range(input_len - 2)] + [EOS]
    tgt = [5 + prng.below(alphabet_size - 5) for _ in range(target_len - 1)] + [EOS]
    ex = Example.make(inp, tgt, prng.below(n_cases))

    _, grads = backward(p, ex, None, lambda_case)
    if corrupt:
        grads.W[0, 0] += 0.1
    worst = 0.0
    for name in TENSOR_NAMES:
        target = getattr(p, name)
        fd = finite_diff_grad(lambda _: instance_loss(p, ex, None, lambda_case), target, eps)
        worst = max(worst, relative_error(getattr(grads, name), fd))
    return worst
