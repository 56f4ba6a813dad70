import math
import random
from array import array

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symkit import _backend
from symkit.tensor import (
    ShapeError,
    Tensor,
    conv1x1,
    conv2d_single,
    depthwise_conv,
    dumps,
    gate,
    layer_norm,
    loads,
    matmul,
    mean_rows,
    multi_head_cross_attention,
    sigmoid,
    softmax_rows,
    transpose,
)

from oracles import naive_attention, np_depthwise, np_layer_norm, random_matrix

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


def T(nested):
    return Tensor.from_list(nested)


def test_construction_and_indexing():
    t = Tensor((2, 3), range(6))
    assert t[1, 2] == 5.0
    t[0, 1] = 9
    assert t.tolist() == [[0.0, 9.0, 2.0], [3.0, 4.0, 5.0]]
    assert Tensor.eye(2).tolist() == [[1.0, 0.0], [0.0, 1.0]]
    with pytest.raises(ShapeError):
        Tensor((2, 2), [1, 2, 3])
    with pytest.raises(IndexError):
        t[2, 0]
    with pytest.raises(ShapeError):
        Tensor.from_list([[1, 2], [3]])


def test_matmul_hand_value():
    assert matmul(T([[1, 2], [3, 4]]), T([[5, 6], [7, 8]])).tolist() == [[19.0, 22.0], [43.0, 50.0]]
    with pytest.raises(ShapeError):
        matmul(T([[1, 2]]), T([[1, 2]]))


def test_softmax_known_values():
    out = softmax_rows(T([[0.0, math.log(3.0)]]))
    assert out.data[0] == pytest.approx(0.25, abs=1e-15)
    assert out.data[1] == pytest.approx(0.75, abs=1e-15)
    # max subtraction keeps huge logits finite
    big = softmax_rows(T([[1000.0, 1000.0]]))
    assert big.tolist() == [[0.5, 0.5]]


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5), st.integers(1, 7), st.data())
def test_softmax_rows_sum_to_one(m, n, data):
    vals = data.draw(st.lists(finite, min_size=m * n, max_size=m * n))
    out = softmax_rows(Tensor((m, n), vals))
    for i in range(m):
        assert abs(math.fsum(out.data[i * n:(i + 1) * n]) - 1.0) <= 1e-9
        assert all(0.0 <= v <= 1.0 for v in out.data[i * n:(i + 1) * n])


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(2, 9), st.data())
def test_layer_norm_standardises(m, n, data):
    vals = data.draw(st.lists(finite, min_size=m * n, max_size=m * n))
    x = np.array(vals).reshape(m, n)
    if np.any(x.std(axis=1) < 1e-2):
        return
    out = layer_norm(Tensor((m, n), vals), Tensor.full((n,), 1.0), Tensor((n,)), 1e-12)
    got = np.array(out.data).reshape(m, n)
    assert np.allclose(got.mean(axis=1), 0.0, atol=1e-9)
    assert np.allclose(got.var(axis=1), 1.0, atol=1e-6)


def test_layer_norm_matches_numpy_with_affine():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(4, 6))
    g, b = rng.normal(size=6), rng.normal(size=6)
    out = layer_norm(Tensor((4, 6), x.ravel()), Tensor((6,), g), Tensor((6,), b))
    assert np.allclose(np.array(out.data).reshape(4, 6), np_layer_norm(x, g, b, 1e-5), atol=1e-12)
    # a constant row collapses to beta
    flat = layer_norm(T([[2.0, 2.0, 2.0]]), Tensor((3,), [1, 1, 1]), Tensor((3,), [0.1, 0.2, 0.3]))
    assert flat.tolist() == [[0.1, 0.2, 0.3]]
    with pytest.raises(ValueError):
        layer_norm(T([[1.0, 2.0]]), Tensor((2,), [1, 1]), Tensor((2,)), eps=0.0)


def test_sigmoid_values_and_range():
    s = sigmoid(T([0.0, 2.0, -2.0, 800.0, -800.0]))
    assert s.data[0] == 0.5
    assert s.data[1] == pytest.approx(1 / (1 + math.exp(-2)), abs=1e-16)
    assert s.data[1] + s.data[2] == pytest.approx(1.0, abs=1e-15)
    assert s.data[3] == 1.0 and s.data[4] == 0.0
    mid = sigmoid(Tensor((200,), [random.Random(1).uniform(-30, 30) for _ in range(200)]))
    assert all(0.0 < v < 1.0 for v in mid.data)


def test_mean_rows():
    assert mean_rows(T([[1, 2], [3, 6]])).tolist() == [2.0, 4.0]


def test_depthwise_matches_numpy():
    rng = np.random.default_rng(5)
    for ks in (1, 3, 5):
        f = rng.normal(size=(3, 6, 5))
        k = rng.normal(size=(3, ks, ks))
        b = rng.normal(size=3)
        out = depthwise_conv(Tensor(f.shape, f.ravel()), Tensor(k.shape, k.ravel()), Tensor((3,), b))
        assert np.allclose(np.array(out.data).reshape(f.shape), np_depthwise(f, k, b), atol=1e-12)
    with pytest.raises(ValueError):
        depthwise_conv(Tensor((1, 3, 3)), Tensor((1, 2, 2)), Tensor((1,)))


def test_depthwise_delta_kernel_plus_bias():
    f = Tensor((2, 3, 3), range(18))
    k = Tensor((2, 3, 3))
    k[0, 1, 1] = 1.0
    k[1, 1, 1] = 1.0
    out = depthwise_conv(f, k, Tensor((2,), [0.5, -1.0]))
    assert out.data[:9].tolist() == [v + 0.5 for v in range(9)]
    assert out.data[9:].tolist() == [v - 1.0 for v in range(9, 18)]


def test_conv1x1_and_conv2d_single_match_numpy():
    rng = np.random.default_rng(8)
    f = rng.normal(size=(4, 5, 5))
    w = rng.normal(size=(2, 4))
    b = rng.normal(size=2)
    out = conv1x1(Tensor(f.shape, f.ravel()), Tensor(w.shape, w.ravel()), Tensor((2,), b))
    want = np.einsum("oc,chw->ohw", w, f) + b[:, None, None]
    assert np.allclose(np.array(out.data).reshape(2, 5, 5), want, atol=1e-12)

    k = rng.normal(size=(1, 4, 3, 3))
    got = conv2d_single(Tensor(f.shape, f.ravel()), Tensor(k.shape, k.ravel()), 0.25)
    want = np_depthwise(f, k[0], np.zeros(4)).sum(axis=0) + 0.25
    assert got.shape == (5, 5)
    assert np.allclose(np.array(got.data).reshape(5, 5), want, atol=1e-12)


def test_gate_broadcasts_plane():
    f = Tensor((2, 1, 2), [1, 2, 3, 4])
    assert gate(f, T([[0.5, 2.0]])).data.tolist() == [0.5, 4.0, 1.5, 8.0]
    with pytest.raises(ShapeError):
        gate(f, T([[1.0]]))


def _attention_case(rng):
    d = rng.choice([1, 2, 4, 6, 8])
    heads = rng.choice([h for h in (1, 2, 4) if d % h == 0])
    nq, nk = rng.randint(1, 6), rng.randint(1, 6)
    q, k, v = random_matrix(rng, nq, d), random_matrix(rng, nk, d), random_matrix(rng, nk, d)
    ws = [random_matrix(rng, d, d) for _ in range(4)]
    return q, k, v, heads, ws


def test_attention_matches_naive_reference():
    rng = random.Random(2024)
    worst = 0.0
    for _ in range(200):
        q, k, v, heads, ws = _attention_case(rng)
        got = multi_head_cross_attention(T(q), T(k), T(v), heads, *(T(w) for w in ws))
        want = naive_attention(q, k, v, heads, *ws)
        worst = max(worst, max(abs(a - b) for a, b in zip(got.data, [x for row in want for x in row])))
    assert worst <= 1e-9


def test_attention_single_key_returns_projected_value():
    # one key: every query attends to it with weight 1
    rng = random.Random(4)
    q = random_matrix(rng, 3, 4)
    kv = random_matrix(rng, 1, 4)
    eye = Tensor.eye(4)
    out = multi_head_cross_attention(T(q), T(kv), T(kv), 2, eye, eye, eye, eye)
    for i in range(3):
        assert out.data[i * 4:(i + 1) * 4].tolist() == pytest.approx(kv[0], abs=1e-15)


def test_attention_key_permutation_invariance():
    rng = random.Random(11)
    q, k, v, heads, ws = _attention_case(rng)
    perm = list(range(len(k)))
    rng.shuffle(perm)
    a = multi_head_cross_attention(T(q), T(k), T(v), heads, *(T(w) for w in ws))
    b = multi_head_cross_attention(T(q), T([k[i] for i in perm]), T([v[i] for i in perm]), heads,
                                   *(T(w) for w in ws))
    assert max(abs(x - y) for x, y in zip(a.data, b.data)) < 1e-12


def test_attention_rejects_bad_heads():
    eye = Tensor.eye(3)
    with pytest.raises(ValueError):
        multi_head_cross_attention(Tensor((1, 3)), Tensor((1, 3)), Tensor((1, 3)), 2, eye, eye, eye, eye)


def test_text_format_round_trip_is_exact():
    rng = random.Random(0)
    t = Tensor((2, 3, 2), [rng.gauss(0, 1e3) for _ in range(12)])
    text = dumps(t)
    assert text.startswith("shape: 2 3 2\n")
    assert len(text.splitlines()) == 7
    assert loads(text) == t
    assert dumps(Tensor((2,), [0.1, -3.0])) == "shape: 2\n0.1 -3.0\n"
    with pytest.raises(ValueError):
        loads("2 2\n1 2 3 4\n")


def test_transpose_involution():
    t = Tensor((2, 3), range(6))
    assert transpose(transpose(t)) == t
    assert transpose(t).tolist() == [[0.0, 3.0], [1.0, 4.0], [2.0, 5.0]]


# -- backend equivalence -----------------------------------------------------------

BACKENDS = _backend.available()


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernels not built")
def test_backends_are_bit_identical():
    py, cy = _backend.get("python"), _backend.get("cython")
    rng = random.Random(99)

    def buf(n, s=2.0):
        return array("d", [rng.uniform(-s, s) for _ in range(n)])

    a, b = buf(12), buf(20)
    assert py.matmul(a, b, 3, 4, 5) == cy.matmul(a, b, 3, 4, 5)
    s = buf(24, 30)
    assert py.softmax_rows(s, 4, 6) == cy.softmax_rows(s, 4, 6)
    g, be = buf(6), buf(6)
    assert py.layer_norm(s, 4, 6, g, be, 1e-5) == cy.layer_norm(s, 4, 6, g, be, 1e-5)
    assert py.sigmoid(s) == cy.sigmoid(s)
    f = buf(3 * 5 * 4)
    w, bias = buf(2 * 3), buf(2)
    assert py.conv1x1(f, 3, 5, 4, w, bias, 2) == cy.conv1x1(f, 3, 5, 4, w, bias, 2)
    k, kb = buf(3 * 9), buf(3)
    assert py.depthwise_conv(f, 3, 5, 4, k, 3, kb) == cy.depthwise_conv(f, 3, 5, 4, k, 3, kb)
    bumps = array("d", [10.0, 12.0, 3.0, 1.0, 20.0, 5.0, 4.0, 0.9])
    assert py.gaussian_map(0.0, 0.0, 1.3, 17, 17, bumps) == cy.gaussian_map(0.0, 0.0, 1.3, 17, 17, bumps)
    assert py.hann_window(9) == cy.hann_window(9)
    m = buf(49)
    assert py.hann_peak(m, 7, 7) == cy.hann_peak(m, 7, 7)


def test_hann_window_shape():
    k = _backend.kernels
    w = k.hann_window(5)
    assert w[0] == 0.0 and w[4] == pytest.approx(0.0, abs=1e-16)
    assert w[2] == 1.0
    assert k.hann_window(1).tolist() == [1.0]
