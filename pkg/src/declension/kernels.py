"""Backend selection for the LSTM hot loops.

The compiled extension (``_ckernels``) is used when it was built; otherwise
the pure-Python twin takes over.  Both produce identical floats, the
fallback is roughly a hundred times slower.
"""
import importlib

_BACKENDS = {"cython": "declension._ckernels", "python": "declension._pykernels"}

try:
    _impl = importlib.import_module(_BACKENDS["cython"])
    BACKEND = "cython"
except ImportError:  # extension not built
    _impl = importlib.import_module(_BACKENDS["python"])
    BACKEND = "python"


def available():
    """Names of the backends importable in this environment."""
    names = []
    for name, mod in _BACKENDS.items():
        try:
            importlib.import_module(mod)
        except ImportError:
            continue
        names.append(name)
    return names


def use(name):
    """Switch the active backend; returns the previous name."""
    global _impl, BACKEND
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; choose from {sorted(_BACKENDS)}")
    previous = BACKEND
    _impl = importlib.import_module(_BACKENDS[name])
    BACKEND = name
    return previous


def matvec(m, v):
    return _impl.matvec(m, v)


def head_probs(U, bias, h):
    return _impl.head_probs(U, bias, h)


def lstm_step(E, W, b, x, h, c):
    return _impl.lstm_step(E, W, b, x, h, c)


def encode(E, W, b, ids):
    return _impl.encode(E, W, b, ids)


def decode_greedy(E, W, b, V, bv, h0, c0, bos, eos, max_len, mask):
    return _impl.decode_greedy(E, W, b, V, bv, h0, c0, bos, eos, max_len, mask)


def loss_grad(E, W, b, V, bv, U, bc, inp, tgt, gold_case, lam, bos, grads=None):
    return _impl.loss_grad(E, W, b, V, bv, U, bc, inp, tgt, gold_case, lam, bos, grads)


def sumsq(a, acc=0.0):
    return _impl.sumsq(a, acc)


def adam(p, g, m, v, lr, gscale, b1, b2, eps, bc1, bc2):
    _impl.adam(p, g, m, v, lr, gscale, b1, b2, eps, bc1, bc2)
