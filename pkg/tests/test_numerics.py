import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from declension.numerics import (Prng, cross_entropy, finite_diff_grad, init_uniform,
                                 matvec, softmax)

# reference outputs of SplitMix64 seeded with 0
SPLITMIX_SEED0 = [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4,
                  0x06C45D188009454F, 0xF88BB8A8724C81EC]


def test_splitmix_golden():
    g = Prng(0)
    assert [g.next_u64() for _ in range(4)] == SPLITMIX_SEED0


def test_prng_floats_and_below():
    g = Prng(7)
    xs = [g.next_float() for _ in range(1000)]
    assert all(0.0 <= x < 1.0 for x in xs)
    assert all(0 <= g.below(3) < 3 for _ in range(100))
    with pytest.raises(ValueError):
        g.below(0)


def test_shuffle_is_permutation_and_seeded():
    a, b = list(range(50)), list(range(50))
    Prng(3).shuffle(a)
    Prng(3).shuffle(b)
    assert a == b and sorted(a) == list(range(50)) and a != list(range(50))


def test_matvec_examples():
    assert matvec(np.eye(2), [3, 4]).tolist() == [3, 4]
    assert matvec(np.zeros((3, 2)), [5, -1]).tolist() == [0, 0, 0]
    assert matvec([[1, 2], [3, 4]], [1, 1]).tolist() == [3, 7]


def test_matvec_shape_error_names_shapes():
    with pytest.raises(ValueError, match=r"\(2, 3\).*\(2,\)"):
        matvec(np.zeros((2, 3)), np.zeros(2))


def test_matvec_column_vector_accepted():
    assert matvec([[1, 2]], [[1], [2]]).tolist() == [5]


def test_matvec_distributes():
    rng = np.random.default_rng(0)
    for _ in range(200):
        m = rng.normal(size=(4, 5))
        u, v = rng.normal(size=5), rng.normal(size=5)
        assert np.max(np.abs(matvec(m, u + v) - matvec(m, u) - matvec(m, v))) < 1e-12


def test_matvec_matches_numpy():
    rng = np.random.default_rng(1)
    m, v = rng.normal(size=(7, 9)), rng.normal(size=9)
    assert np.allclose(matvec(m, v), m @ v, rtol=0, atol=1e-13)


def test_softmax_examples():
    assert np.allclose(softmax([0, 0, 0]), [1 / 3] * 3, atol=1e-15)
    big = softmax([1000, 0])
    assert np.all(np.isfinite(big)) and big[0] == pytest.approx(1.0) and big[1] < 1e-300
    assert np.allclose(softmax(np.log([1, 2, 3])), [1 / 6, 1 / 3, 1 / 2], atol=1e-15)


def test_softmax_empty():
    with pytest.raises(ValueError):
        softmax([])


def test_softmax_random_vectors():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        z = rng.normal(scale=10, size=rng.integers(1, 20))
        p = softmax(z)
        assert abs(p.sum() - 1.0) <= 1e-12 and np.all(p > 0)
        shifted = softmax(z + rng.normal(scale=100))
        assert np.max(np.abs(shifted - p)) <= 1e-12
        assert shifted.argmax() == p.argmax()


def test_cross_entropy_examples():
    for V in (2, 5, 50):
        assert abs(cross_entropy(np.full(V, 1 / V), V - 1) - math.log(V)) < 1e-12
    assert cross_entropy([0.0, 1.0], 1) == 0.0
    assert cross_entropy([1.0, 0.0], 1) == pytest.approx(27.631021115928547, abs=1e-12)
    with pytest.raises(IndexError):
        cross_entropy([0.5, 0.5], 2)


@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=8), st.data())
def test_cross_entropy_nonnegative(ps, data):
    t = data.draw(st.integers(0, len(ps) - 1))
    ce = cross_entropy(ps, t)
    assert ce >= 0.0
    assert (ce == 0.0) == (ps[t] == 1.0)


def test_init_uniform():
    a = init_uniform(Prng(11), (6, 4), 16)
    b = init_uniform(Prng(11), (6, 4), 16)
    assert a.shape == (6, 4) and np.array_equal(a, b)
    assert np.all(np.abs(a) <= 0.25)
    c = init_uniform(Prng(5), 1000, 1)
    assert np.all(np.abs(c) <= 1.0) and c.min() < -0.9 and c.max() > 0.9


def test_init_uniform_row_major_draws():
    g = Prng(4)
    first = [(2 * g.next_float() - 1) for _ in range(3)]
    assert init_uniform(Prng(4), (1, 3), 1)[0].tolist() == first


def test_init_uniform_rejects_fan_in():
    with pytest.raises(ValueError):
        init_uniform(Prng(0), 3, 0)


def test_finite_diff_examples():
    g = finite_diff_grad(lambda t: float(np.sum(t ** 2)), np.array([1.0, 2.0]))
    assert np.max(np.abs(g - [2.0, 4.0])) < 1e-8
    assert np.all(finite_diff_grad(lambda t: 3.0, np.array([1.0, -2.0, 0.5])) == 0.0)
    s = np.array([0.5, -2.0, 3.0])
    g = finite_diff_grad(lambda t: float(s @ t), np.array([0.1, 0.2, 0.3]))
    assert np.max(np.abs(g - s)) < 1e-9


def test_finite_diff_restores_params():
    theta = np.array([[1.0, 2.0], [3.0, 4.0]])
    before = theta.copy()
    finite_diff_grad(lambda t: float(np.prod(t)), theta)
    assert np.array_equal(theta, before)
