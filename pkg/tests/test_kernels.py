import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anml import _kernels
from anml._kernels import fallback

needs_compiled = pytest.mark.skipif(_kernels.compiled is None, reason="compiled extension not built")


def _sorted_oracle(dist, k):
    n = dist.shape[0]
    return np.array([np.sort(np.delete(dist[i], i))[:k].sum() for i in range(n)])


def test_backend_name_matches_module():
    assert _kernels.BACKEND in ("cython", "numpy")
    if _kernels.compiled is None:
        assert _kernels.BACKEND == "numpy"


def test_knn_row_sums_tiny_line():
    # points 0, 1, 10 on a line; squared distances 1, 100, 81
    d = np.array([[0.0, 1.0, 100.0], [1.0, 0.0, 81.0], [100.0, 81.0, 0.0]])
    np.testing.assert_array_equal(fallback.knn_row_sums(d, 1), [1.0, 1.0, 81.0])
    np.testing.assert_array_equal(fallback.knn_row_sums(d, 2), [101.0, 82.0, 181.0])


@pytest.mark.parametrize("impl", ["fallback", pytest.param("compiled", marks=needs_compiled)])
def test_knn_row_sums_rejects_bad_k(impl):
    mod = getattr(_kernels, impl)
    d = np.zeros((4, 4))
    for k in (0, 4):
        with pytest.raises(ValueError):
            mod.knn_row_sums(d, k)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 40), seed=st.integers(0, 2**31 - 1), data=st.data())
def test_knn_row_sums_matches_sort(n, seed, data):
    k = data.draw(st.integers(1, n - 1))
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 3))
    # duplicated rows exercise ties
    if n > 3:
        x[1] = x[0]
    d = ((x[:, None] - x[None]) ** 2).sum(-1)
    want = _sorted_oracle(d, k)
    np.testing.assert_allclose(fallback.knn_row_sums(d, k), want, rtol=1e-12, atol=1e-12)
    if _kernels.compiled is not None:
        np.testing.assert_allclose(_kernels.compiled.knn_row_sums(d, k), want, rtol=1e-12, atol=1e-12)


def _adam_reference(theta, grad, m, v, lr, b1, b2, eps, t):
    m = b1 * m + (1 - b1) * grad
    v = b2 * v + (1 - b2) * grad**2
    mh = m / (1 - b1**t)
    vh = v / (1 - b2**t)
    return theta - lr * mh / (np.sqrt(vh) + eps), m, v


@pytest.mark.parametrize("impl", ["fallback", pytest.param("compiled", marks=needs_compiled)])
def test_adam_update_matches_textbook(impl):
    mod = getattr(_kernels, impl)
    rng = np.random.default_rng(3)
    theta, m, v = rng.normal(size=50), np.zeros(50), np.zeros(50)
    ref = (theta.copy(), m.copy(), v.copy())
    for step in range(1, 6):
        g = rng.normal(size=50)
        ref = _adam_reference(*ref[:1], g, ref[1], ref[2], 0.01, 0.9, 0.999, 1e-8, step)
        mod.adam_update(theta, g, m, v, 0.01, 0.9, 0.999, 1e-8, step)
    np.testing.assert_allclose(theta, ref[0], rtol=1e-13)
    np.testing.assert_allclose(m, ref[1], rtol=1e-13)
    np.testing.assert_allclose(v, ref[2], rtol=1e-13)


def test_first_adam_step_moves_by_lr():
    # with zero moments the bias-corrected first step is lr * sign(g)
    theta = np.zeros(4)
    g = np.array([3.0, -2.0, 0.5, -7.0])
    _kernels.adam_update(theta, g, np.zeros(4), np.zeros(4), 0.001, 0.9, 0.999, 0.0, 1)
    np.testing.assert_allclose(theta, -0.001 * np.sign(g))
