import numpy as np
import pytest

from lpstain.errors import DegenerateChannel, NonpositiveBeta, ShapeMismatch
from lpstain.nnkernels import (
    AdaINParams,
    ConvSpec,
    adain,
    conv1x1,
    conv2d,
    instance_norm,
    layer_norm,
    leaky_relu,
    mlp,
    resblock,
    softplus,
)
from tests.conftest import naive_conv2d


def rng(seed=0):
    return np.random.default_rng(seed)


# ---------------------------------------------------------------- conv2d


def test_conv_identity_kernel():
    x = rng(1).standard_normal((2, 12, 9)).astype(np.float32)
    w = np.zeros((2, 2, 3, 3), dtype=np.float32)
    w[0, 0, 1, 1] = 1.0
    w[1, 1, 1, 1] = 1.0
    out = conv2d(x, ConvSpec(2, 2), w)
    np.testing.assert_array_equal(out, x)


def test_conv_ones_kernel_on_constant():
    x = np.full((1, 10, 10), 2.0, dtype=np.float32)
    w = np.ones((1, 1, 3, 3), dtype=np.float32)
    out = conv2d(x, ConvSpec(1, 1), w)
    np.testing.assert_allclose(out, 18.0, atol=1e-5)


@pytest.mark.parametrize("stride,shape", [(1, (7, 9)), (2, (7, 9)), (2, (8, 8))])
def test_conv_matches_bruteforce(stride, shape):
    r = rng(stride * 10 + shape[0])
    x = r.standard_normal((3,) + shape).astype(np.float32)
    w = r.standard_normal((4, 3, 3, 3)).astype(np.float32)
    b = r.standard_normal(4).astype(np.float32)
    out = conv2d(x, ConvSpec(3, 4, stride), w, b)
    oracle = naive_conv2d(x, w, b, stride)
    assert out.shape == oracle.shape
    np.testing.assert_allclose(out, oracle, atol=1e-4)


def test_conv_stride2_output_dims():
    x = np.zeros((1, 9, 13), dtype=np.float32)
    w = np.zeros((1, 1, 3, 3), dtype=np.float32)
    assert conv2d(x, ConvSpec(1, 1, 2), w).shape == (1, 5, 7)


def test_conv_linearity():
    r = rng(7)
    a = r.standard_normal((2, 8, 8)).astype(np.float32)
    b = r.standard_normal((2, 8, 8)).astype(np.float32)
    w = r.standard_normal((3, 2, 3, 3)).astype(np.float32)
    spec = ConvSpec(2, 3)
    lhs = conv2d(a + b, spec, w)
    rhs = conv2d(a, spec, w) + conv2d(b, spec, w)
    np.testing.assert_allclose(lhs, rhs, atol=1e-4)


def test_conv_determinism():
    r = rng(8)
    x = r.standard_normal((4, 33, 31)).astype(np.float32)
    w = r.standard_normal((6, 4, 3, 3)).astype(np.float32)
    spec = ConvSpec(4, 6, 2)
    np.testing.assert_array_equal(conv2d(x, spec, w), conv2d(x, spec, w))


def test_conv_shape_errors():
    x = np.zeros((2, 8, 8), dtype=np.float32)
    with pytest.raises(ShapeMismatch):
        conv2d(x, ConvSpec(3, 4), np.zeros((4, 3, 3, 3), dtype=np.float32))
    with pytest.raises(ShapeMismatch):
        conv2d(x, ConvSpec(2, 4), np.zeros((4, 2, 5, 5), dtype=np.float32))
    with pytest.raises(ShapeMismatch):
        ConvSpec(2, 4, stride=3)
    with pytest.raises(ShapeMismatch):
        ConvSpec(0, 4)


def test_conv1x1_matches_matmul():
    r = rng(9)
    x = r.standard_normal((5, 6, 7)).astype(np.float32)
    w = r.standard_normal((3, 5)).astype(np.float32)
    b = r.standard_normal(3).astype(np.float32)
    out = conv1x1(x, w, b)
    oracle = np.einsum("oc,chw->ohw", w, x) + b[:, None, None]
    np.testing.assert_allclose(out, oracle, atol=1e-5)
    with pytest.raises(ShapeMismatch):
        conv1x1(x, np.zeros((3, 4), dtype=np.float32))


# ---------------------------------------------------------------- activations


def test_leaky_relu_values():
    x = np.array([-2.0, -0.5, 0.0, 0.5, 3.0], dtype=np.float32)
    np.testing.assert_allclose(
        leaky_relu(x), [-0.4, -0.1, 0.0, 0.5, 3.0], atol=1e-7
    )
    np.testing.assert_array_equal(leaky_relu(x, slope=1.0), x)


def test_softplus_positive_and_asymptotic():
    x = np.array([-20.0, -1.0, 0.0, 1.0, 20.0], dtype=np.float32)
    y = softplus(x)
    assert (y > 0).all()
    np.testing.assert_allclose(y[2], np.log(2.0), atol=1e-6)
    np.testing.assert_allclose(y[4], 20.0, atol=1e-5)


# ---------------------------------------------------------------- norms


def test_instance_norm_hand_values():
    x = np.array([1.0, 2.0, 3.0, 4.0], dtype=np.float32).reshape(1, 2, 2)
    # mean 2.5, population std sqrt(1.25)
    expect = (np.array([1.0, 2.0, 3.0, 4.0]) - 2.5) / np.sqrt(1.25 + 1e-5)
    np.testing.assert_allclose(instance_norm(x).ravel(), expect, atol=1e-5)


def test_instance_norm_standardized_input_near_fixed_point():
    r = rng(10)
    x = r.standard_normal((3, 32, 32)).astype(np.float32)
    x = (x - x.mean(axis=(1, 2), keepdims=True)) / x.std(axis=(1, 2), keepdims=True)
    np.testing.assert_allclose(instance_norm(x), x, atol=1e-4)


def test_instance_norm_idempotent():
    r = rng(11)
    x = (5.0 * r.standard_normal((2, 16, 16)) + 3.0).astype(np.float32)
    once = instance_norm(x)
    np.testing.assert_allclose(instance_norm(once), once, atol=5e-5)


def test_instance_norm_constant_channel_zeros():
    x = np.full((2, 8, 8), 7.0, dtype=np.float32)
    np.testing.assert_allclose(instance_norm(x), 0.0, atol=1e-6)


def test_instance_norm_degenerate():
    with pytest.raises(DegenerateChannel):
        instance_norm(np.ones((4, 1, 1), dtype=np.float32))
    with pytest.raises(ShapeMismatch):
        instance_norm(np.ones((4, 4), dtype=np.float32))


def test_layer_norm_global_standardization():
    r = rng(12)
    x = (2.0 * r.standard_normal((3, 8, 8)) - 1.0).astype(np.float32)
    y = layer_norm(x)
    assert abs(float(y.mean())) < 1e-5
    assert abs(float(y.std()) - 1.0) < 1e-3
    np.testing.assert_allclose(layer_norm(np.full((2, 4, 4), 3.0, np.float32)), 0.0,
                               atol=1e-6)


# ---------------------------------------------------------------- adain


def test_adain_imposes_moments():
    r = rng(13)
    x = (4.0 * r.standard_normal((3, 64, 64)) + 2.0).astype(np.float32)
    p = AdaINParams(alpha=np.array([3.0, -1.0, 0.0]), beta=np.array([2.0, 0.5, 1.0]))
    y = adain(x, p)
    np.testing.assert_allclose(y.mean(axis=(1, 2)), p.alpha, atol=1e-4)
    np.testing.assert_allclose(y.std(axis=(1, 2)), p.beta, atol=1e-3)


def test_adain_zero_one_equals_instance_norm():
    r = rng(14)
    x = r.standard_normal((2, 16, 16)).astype(np.float32)
    p = AdaINParams(alpha=np.zeros(2), beta=np.ones(2))
    np.testing.assert_array_equal(adain(x, p), instance_norm(x))


def test_adain_factorizes():
    """adain(x, a, b) == IN(x) * b + a, channel by channel."""
    r = rng(15)
    x = r.standard_normal((3, 12, 12)).astype(np.float32)
    a = np.array([0.1, -0.2, 0.3], dtype=np.float32)
    b = np.array([1.5, 0.7, 2.0], dtype=np.float32)
    y = adain(x, AdaINParams(a, b))
    np.testing.assert_allclose(
        y, instance_norm(x) * b[:, None, None] + a[:, None, None], atol=1e-6
    )


def test_adain_validation():
    with pytest.raises(NonpositiveBeta):
        AdaINParams(alpha=np.zeros(2), beta=np.array([1.0, 0.0]))
    with pytest.raises(ShapeMismatch):
        AdaINParams(alpha=np.zeros(2), beta=np.ones(3))
    p = AdaINParams(alpha=np.zeros(2), beta=np.ones(2))
    with pytest.raises(ShapeMismatch):
        adain(np.zeros((3, 4, 4), dtype=np.float32), p)


# ---------------------------------------------------------------- resblock


def _res_weights(cin, cout, seed, zero_convs=False):
    r = rng(seed)
    scale = 0.0 if zero_convs else 0.1
    w = {
        "conv1.w": (scale * r.standard_normal((cout, cin, 3, 3))).astype(np.float32),
        "conv1.b": np.zeros(cout, dtype=np.float32),
        "conv2.w": (scale * r.standard_normal((cout, cout, 3, 3))).astype(np.float32),
        "conv2.b": np.zeros(cout, dtype=np.float32),
    }
    if cin != cout:
        w["skip.w"] = r.standard_normal((cout, cin, 1, 1)).astype(np.float32)
        w["skip.b"] = np.zeros(cout, dtype=np.float32)
    return w


def test_resblock_zero_convs_is_identity_skip():
    x = rng(16).standard_normal((4, 8, 8)).astype(np.float32)
    out = resblock(x, _res_weights(4, 4, 17, zero_convs=True))
    np.testing.assert_array_equal(out, x)


def test_resblock_zero_convs_is_projection_skip():
    x = rng(18).standard_normal((4, 8, 8)).astype(np.float32)
    w = _res_weights(4, 6, 19, zero_convs=True)
    out = resblock(x, w)
    np.testing.assert_array_equal(out, conv1x1(x, w["skip.w"], w["skip.b"]))


def test_resblock_matches_composed_kernels():
    x = rng(20).standard_normal((3, 10, 10)).astype(np.float32)
    w = _res_weights(3, 5, 21)
    y = conv2d(leaky_relu(layer_norm(x)), ConvSpec(3, 5), w["conv1.w"], w["conv1.b"])
    y = conv2d(leaky_relu(layer_norm(y)), ConvSpec(5, 5), w["conv2.w"], w["conv2.b"])
    y = y + conv1x1(x, w["skip.w"], w["skip.b"])
    np.testing.assert_array_equal(resblock(x, w), y)


# ---------------------------------------------------------------- mlp


def test_mlp_identity_layers_apply_activations_only():
    v = np.array([-1.0, 2.0], dtype=np.float32)
    eye = np.eye(2, dtype=np.float32)
    zero = np.zeros(2, dtype=np.float32)
    out = mlp(v, [(eye, zero), (eye, zero)])
    np.testing.assert_allclose(out, leaky_relu(v), atol=1e-7)


def test_mlp_matches_manual_composition():
    r = rng(22)
    v = r.standard_normal(5).astype(np.float32)
    w1, b1 = r.standard_normal((7, 5)).astype(np.float32), r.standard_normal(7).astype(np.float32)
    w2, b2 = r.standard_normal((3, 7)).astype(np.float32), r.standard_normal(3).astype(np.float32)
    out = mlp(v, [(w1, b1), (w2, b2)])
    np.testing.assert_allclose(out, w2 @ leaky_relu(w1 @ v + b1) + b2, atol=1e-5)


def test_mlp_shape_error():
    with pytest.raises(ShapeMismatch):
        mlp(np.zeros(3, dtype=np.float32),
            [(np.zeros((2, 4), dtype=np.float32), np.zeros(2, dtype=np.float32))])
