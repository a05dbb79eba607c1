import numpy as np
import pytest

from oracles import loop_mse, numeric_grads, relative_error
from sar2ndwi.errors import ConfigError, ShapeError
from sar2ndwi.training import loss_grad, loss_value
from sar2ndwi.unet import (
    UNetConfig,
    UNetParams,
    audit_shapes,
    backward,
    build,
    forward,
    param_shapes,
    predict,
)


def test_default_config_matches_published_architecture():
    cfg = UNetConfig()
    assert cfg.input_channels == 2
    assert cfg.encoder_filters == (64, 128, 256, 512)
    assert cfg.bottleneck_filters == 1024
    assert cfg.decoder_filters == (512, 256, 128, 64)
    assert cfg.depth == 4
    assert cfg.spatial_divisor == 16


def test_decoder_must_mirror_encoder():
    with pytest.raises(ConfigError):
        UNetConfig(encoder_filters=(8, 16), decoder_filters=(8, 16))


def test_config_round_trip():
    cfg = UNetConfig(input_channels=3, encoder_filters=(4, 8), bottleneck_filters=16)
    assert UNetConfig.from_dict(cfg.to_dict()) == cfg


def test_param_shapes_structure(tiny_config):
    shapes = param_shapes(tiny_config)
    names = list(shapes)
    # encoder -> bottleneck -> decoder -> head, weights before biases
    assert names[0] == "enc1.conv1.weight"
    assert shapes["enc1.conv1.weight"] == (3, 3, 2, 2)
    assert shapes["enc2.conv1.weight"] == (3, 3, 2, 4)
    assert shapes["bottleneck.conv1.weight"] == (3, 3, 4, 8)
    assert shapes["dec1.up.weight"] == (2, 2, 8, 4)
    # after concatenating the skip, the first decoder conv sees 2x filters
    assert shapes["dec1.conv1.weight"] == (3, 3, 8, 4)
    assert shapes["dec2.conv1.weight"] == (3, 3, 4, 2)
    assert names[-2:] == ["head.conv.weight", "head.conv.bias"]
    assert shapes["head.conv.weight"] == (3, 3, 2, 1)


def test_head_produces_single_channel():
    shapes = param_shapes(UNetConfig())
    assert shapes["head.conv.weight"] == (3, 3, 64, 1)
    assert shapes["head.conv.bias"] == (1,)


def test_build_is_deterministic_and_he_scaled(tiny_config):
    a = build(tiny_config, seed=3)
    b = build(tiny_config, seed=3)
    c = build(tiny_config, seed=4)
    assert all(np.array_equal(a.arrays[k], b.arrays[k]) for k in a.arrays)
    assert any(not np.array_equal(a.arrays[k], c.arrays[k]) for k in a.arrays)

    big = build(UNetConfig(input_channels=2, encoder_filters=(64,),
                           bottleneck_filters=128), seed=0)
    w = big.arrays["bottleneck.conv1.weight"]  # fan_in = 3*3*64 = 576
    expected_std = np.sqrt(2.0 / 576)
    assert np.std(w) == pytest.approx(expected_std, rel=0.05)
    assert np.mean(w) == pytest.approx(0.0, abs=expected_std / 10)
    assert all(np.all(big.arrays[k] == 0) for k in big.arrays if k.endswith(".bias"))


def test_forward_shape_and_open_interval(tiny_params, rng):
    x = rng.random((3, 16, 16, 2)).astype(np.float32)
    y = forward(tiny_params, x)
    assert y.shape == (3, 16, 16, 1)
    assert np.all(y > 0.0)
    assert np.all(y < 1.0)


def test_forward_rejects_bad_inputs(tiny_params, rng):
    with pytest.raises(ShapeError):
        forward(tiny_params, rng.random((16, 16, 2)))  # missing batch axis
    with pytest.raises(ShapeError):
        forward(tiny_params, rng.random((1, 16, 16, 3)))  # wrong channels
    with pytest.raises(ShapeError):
        forward(tiny_params, rng.random((1, 18, 18, 2)))  # not divisible by 4


def test_audit_shapes_detects_corruption(tiny_params):
    audit_shapes(tiny_params)
    tiny_params.arrays["enc1.conv1.weight"] = np.zeros((3, 3, 2, 5))
    with pytest.raises(ConfigError):
        audit_shapes(tiny_params)


def test_audit_shapes_detects_missing_entry(tiny_params):
    del tiny_params.arrays["head.conv.bias"]
    with pytest.raises(ConfigError):
        audit_shapes(tiny_params)


def test_skip_connections_feed_the_decoder(tiny_config):
    """Zeroing an encoder stage's output must change the decoder's view."""
    params = build(tiny_config, seed=1)
    x = np.random.default_rng(5).random((1, 8, 8, 2))
    cache = {}
    forward(params, x, cache=cache)
    assert "enc1.conv2.pre" in cache
    assert "dec2.conv1.in" in cache
    # the concatenated decoder input is [upsampled, skip]; its channel count
    # doubles the stage's filter count
    assert cache["dec2.conv1.in"].shape[3] == 2 * tiny_config.encoder_filters[0]


def test_full_network_gradient_check():
    cfg = UNetConfig(input_channels=2, encoder_filters=(2, 4), bottleneck_filters=8)
    params = build(cfg, seed=0, dtype=np.float64)
    rng = np.random.default_rng(1)
    x = rng.random((1, 8, 8, 2))
    target = rng.random((1, 8, 8, 1)) * 0.6 + 0.2

    cache = {}
    pred = forward(params, x, cache=cache)
    analytic = backward(params, cache, loss_grad(pred, target, "mean_squared_error"))

    def loss_fn():
        return loss_value(forward(params, x), target, "mean_squared_error")

    sampled = {k: params.arrays[k] for k in
               ["enc1.conv1.weight", "bottleneck.conv2.bias", "dec1.up.weight", "head.conv.weight"]}
    numeric = numeric_grads(loss_fn, sampled, eps=1e-6)
    for name, num in numeric.items():
        assert relative_error(analytic[name], num) < 1e-5, name


def test_predict_wraps_single_chip(tiny_params, rng):
    radar = rng.random((16, 16, 2)).astype(np.float32)
    m = predict(tiny_params, radar)
    assert m.scale == "unit"
    assert m.values.shape == (16, 16)
    assert np.all((m.values > 0) & (m.values < 1))


def test_loss_values_match_loop_oracles(rng):
    pred = rng.random(500) * 0.98 + 0.01
    target = rng.random(500)
    assert loss_value(pred, target, "mean_squared_error") == pytest.approx(
        loop_mse(pred, target), rel=1e-12
    )


def test_loss_gradients_match_central_difference(rng):
    pred = (rng.random((2, 4, 4, 1)) * 0.9 + 0.05).astype(np.float64)
    target = rng.random((2, 4, 4, 1))
    for kind in ("mean_squared_error", "binary_cross_entropy"):
        grad = loss_grad(pred, target, kind)
        eps = 1e-7
        flat = pred.reshape(-1)
        num = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = loss_value(pred, target, kind)
            flat[i] = orig - eps
            down = loss_value(pred, target, kind)
            flat[i] = orig
            num[i] = (up - down) / (2 * eps)
        assert relative_error(grad.reshape(-1), num) < 1e-5, kind


def test_params_copy_is_deep(tiny_params):
    clone = tiny_params.copy()
    clone.arrays["enc1.conv1.weight"][0, 0, 0, 0] += 1.0
    assert tiny_params.arrays["enc1.conv1.weight"][0, 0, 0, 0] != \
        clone.arrays["enc1.conv1.weight"][0, 0, 0, 0]
