import numpy as np
import pytest

from backeisnn.engine import kernels as K
from backeisnn.engine.kernels import Conv2dGeometry
from backeisnn.utils.errors import ConfigError, NumericError, ShapeError


def _reference_conv(x, w, b, pad):
    """Direct seven-loop cross-correlation."""
    n, cin, h, wd = x.shape
    cout, _, k, _ = w.shape
    xp = np.pad(x, [(0, 0), (0, 0), (pad, pad), (pad, pad)])
    oh, ow = h + 2 * pad - k + 1, wd + 2 * pad - k + 1
    out = np.zeros((n, cout, oh, ow))
    for bi in range(n):
        for co in range(cout):
            for i in range(oh):
                for j in range(ow):
                    acc = b[co]
                    for ci in range(cin):
                        for ky in range(k):
                            for kx in range(k):
                                acc += xp[bi, ci, i + ky, j + kx] * w[co, ci, ky, kx]
                    out[bi, co, i, j] = acc
    return out


def test_conv2d_identity_kernel():
    out = K.conv2d(np.array([[[[2.0]]]]), np.array([[[[1.0]]]]), np.array([0.0]), Conv2dGeometry(1, 1, 1))
    assert out.tolist() == [[[[2.0]]]]


def test_conv2d_hand_sum():
    x = np.array([[[[1.0, 2.0], [3.0, 4.0]]]])
    w = np.ones((1, 1, 2, 2))
    out = K.conv2d(x, w, np.zeros(1), Conv2dGeometry(1, 1, 2))
    assert out.tolist() == [[[[10.0]]]]


def test_conv2d_zero_kernel_gives_bias():
    x = np.random.default_rng(0).random((2, 3, 5, 5))
    out = K.conv2d(x, np.zeros((1, 3, 3, 3)), np.array([0.5]), Conv2dGeometry(3, 1, 3))
    assert out.shape == (2, 1, 3, 3)
    assert np.all(out == 0.5)


@pytest.mark.parametrize("pad", [0, 1, 2])
def test_conv2d_matches_direct_loop(pad):
    rng = np.random.default_rng(pad)
    x = rng.normal(size=(2, 2, 6, 6))
    w = rng.normal(size=(3, 2, 3, 3))
    b = rng.normal(size=3)
    out = K.conv2d(x, w, b, Conv2dGeometry(2, 3, 3, padding=pad))
    np.testing.assert_allclose(out, _reference_conv(x, w, b, pad), rtol=1e-12, atol=1e-12)


def test_same_geometry_keeps_extent():
    geom = Conv2dGeometry.same(4, 4, 5)
    assert geom.padding == 2
    assert geom.is_same
    out = K.conv2d(np.ones((1, 4, 7, 7)), np.zeros((4, 4, 5, 5)), np.zeros(4), geom)
    assert out.shape == (1, 4, 7, 7)


def test_same_geometry_rejects_even_kernel():
    with pytest.raises(ShapeError):
        Conv2dGeometry.same(1, 1, 4)


def test_conv2d_names_offending_dimension():
    with pytest.raises(ShapeError, match="in_channels"):
        K.conv2d(np.ones((1, 2, 4, 4)), np.ones((1, 1, 3, 3)), np.zeros(1), Conv2dGeometry(1, 1, 3))
    with pytest.raises(ShapeError, match="kernel height"):
        K.conv2d(np.ones((1, 1, 4, 4)), np.ones((1, 1, 2, 3)), np.zeros(1), Conv2dGeometry(1, 1, 3))
    with pytest.raises(ShapeError, match="does not fit"):
        Conv2dGeometry(1, 1, 5).output_extent(3)


def test_conv2d_backward_matches_finite_differences():
    rng = np.random.default_rng(7)
    x = rng.normal(size=(1, 2, 5, 5))
    w = rng.normal(size=(2, 2, 3, 3))
    b = rng.normal(size=2)
    geom = Conv2dGeometry(2, 2, 3, padding=1)
    upstream = rng.normal(size=(1, 2, 5, 5))
    d_x, d_w, d_b = K.conv2d_backward(upstream, x, w, geom)

    def f(xv, wv, bv):
        return float((K.conv2d(xv, wv, bv, geom) * upstream).sum())

    h = 1e-6
    for idx in [(0, 0, 0, 0), (0, 1, 2, 3), (0, 0, 4, 4)]:
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        assert d_x[idx] == pytest.approx((f(xp, w, b) - f(xm, w, b)) / (2 * h), rel=1e-6, abs=1e-7)
    for idx in [(0, 0, 0, 0), (1, 1, 2, 1)]:
        wp, wm = w.copy(), w.copy()
        wp[idx] += h
        wm[idx] -= h
        assert d_w[idx] == pytest.approx((f(x, wp, b) - f(x, wm, b)) / (2 * h), rel=1e-6, abs=1e-7)
    np.testing.assert_allclose(d_b, upstream.sum(axis=(0, 2, 3)))


def test_avg_pool2_examples():
    assert K.avg_pool2(np.ones((1, 1, 2, 2))).tolist() == [[[[1.0]]]]
    assert K.avg_pool2(np.array([[[[0.0, 1.0], [2.0, 5.0]]]])).tolist() == [[[[2.0]]]]
    assert not K.avg_pool2(np.zeros((2, 3, 4, 4))).any()


def test_avg_pool2_rejects_odd_extent():
    with pytest.raises(ShapeError, match="even"):
        K.avg_pool2(np.ones((1, 1, 3, 4)))


def test_max_pool2_first_max_on_ties():
    out, index = K.max_pool2(np.array([[[[1.0, 1.0], [0.0, 1.0]]]]))
    assert out.tolist() == [[[[1.0]]]]
    assert index.tolist() == [[[[0]]]]
    grad = K.max_pool2_backward(np.array([[[[3.0]]]]), index)
    assert grad.tolist() == [[[[3.0, 0.0], [0.0, 0.0]]]]


def test_matmul_examples():
    assert K.matmul(np.array([[3.0, 4.0]]), np.eye(2), np.zeros(2)).tolist() == [[3.0, 4.0]]
    assert K.matmul(np.array([[1.0, 2.0]]), np.array([[1.0, 1.0]]), np.array([1.0])).tolist() == [[4.0]]
    out = K.matmul(np.ones((3, 4)), np.zeros((2, 4)), np.array([0.25, -1.0]))
    assert out.tolist() == [[0.25, -1.0]] * 3


def test_matmul_dimension_mismatch():
    with pytest.raises(ShapeError, match="inner dimension"):
        K.matmul(np.ones((1, 3)), np.ones((2, 4)), np.zeros(2))


def test_elementwise_examples():
    assert K.sigmoid(np.array([0.0]))[0] == 0.5
    assert K.mul(np.array([1.0, 2.0]), np.array([3.0, 4.0])).tolist() == [3.0, 8.0]
    assert K.mean(np.array([0.0, 1.0])) == 0.5


def test_elementwise_shape_mismatch():
    with pytest.raises(ShapeError):
        K.add(np.ones(2), np.ones(3))


def test_kernels_refuse_non_finite():
    with pytest.raises(NumericError):
        K.mul(np.array([np.inf]), np.array([0.0]))


def test_clamp_inverted_bounds():
    with pytest.raises(ConfigError):
        K.clamp(np.ones(2), 1.0, -1.0)


def test_resolve_dtype():
    assert K.resolve_dtype("float64") == np.float64
    with pytest.raises(ConfigError):
        K.resolve_dtype("float16")


def test_kernels_do_not_mutate_inputs():
    x = np.arange(16.0).reshape(1, 1, 4, 4)
    before = x.copy()
    K.avg_pool2(x)
    K.conv2d(x, np.ones((1, 1, 3, 3)), np.zeros(1), Conv2dGeometry(1, 1, 3, padding=1))
    np.testing.assert_array_equal(x, before)
