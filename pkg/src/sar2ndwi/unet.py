"""Compact U-Net: two-channel radar in, one-channel unit-scale index out.

Encoder stages run `convs_per_block` same-padded 3x3 convolutions with
rectified-linear activations and then halve the resolution with 2x2 max
pooling. The bottleneck is one more conv block. Decoder stages double the
resolution with a 2x2 stride-2 transposed convolution, concatenate the
matching encoder output along channels, and run another conv block. The
head is a single 3x3 convolution with a sigmoid. No normalization layers,
no dropout.

Default shape chain on 128x128 input:
128 -> 64 -> 32 -> 16 -> 8 (bottleneck) -> 16 -> 32 -> 64 -> 128,
with 64/128/256/512 encoder filters, 1024 at the bottleneck, and the
mirrored decoder filters.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ConfigError, ShapeError
from .indices import NdwiMap, UNIT
from .layers import (
    conv2d,
    conv2d_backward,
    conv_transpose2x2,
    conv_transpose2x2_backward,
    maxpool2x2,
    maxpool2x2_backward,
    relu,
    relu_backward,
    sigmoid,
    sigmoid_backward,
)

KERNEL = 3  # all regular convolutions are 3x3, same-padded, stride 1


@dataclass(frozen=True)
class UNetConfig:
    input_channels: int = 2
    encoder_filters: tuple[int, ...] = (64, 128, 256, 512)
    bottleneck_filters: int = 1024
    decoder_filters: tuple[int, ...] | None = None  # None = reversed encoder
    convs_per_block: int = 2

    def __post_init__(self):
        object.__setattr__(self, "encoder_filters", tuple(self.encoder_filters))
        mirrored = tuple(reversed(self.encoder_filters))
        if self.decoder_filters is None:
            object.__setattr__(self, "decoder_filters", mirrored)
        else:
            object.__setattr__(self, "decoder_filters", tuple(self.decoder_filters))
        if self.decoder_filters != mirrored:
            raise ConfigError(
                f"decoder filters {self.decoder_filters} must mirror "
                f"encoder filters {self.encoder_filters}"
            )
        if not self.encoder_filters:
            raise ConfigError("need at least one encoder stage")
        if min(self.encoder_filters) < 1 or self.bottleneck_filters < 1:
            raise ConfigError("filter counts must be positive")
        if self.input_channels < 1:
            raise ConfigError("input_channels must be positive")
        if self.convs_per_block < 1:
            raise ConfigError("convs_per_block must be positive")

    @property
    def depth(self) -> int:
        return len(self.encoder_filters)

    @property
    def spatial_divisor(self) -> int:
        return 2 ** self.depth

    def to_dict(self) -> dict:
        return {
            "input_channels": self.input_channels,
            "encoder_filters": list(self.encoder_filters),
            "bottleneck_filters": self.bottleneck_filters,
            "decoder_filters": list(self.decoder_filters),
            "convs_per_block": self.convs_per_block,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "UNetConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        kwargs = {k: d[k] for k in known if k in d}
        for key in ("encoder_filters", "decoder_filters"):
            if kwargs.get(key) is not None:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


def param_shapes(config: UNetConfig) -> dict[str, tuple[int, ...]]:
    """Every weight and bias array, in declaration order."""
    shapes: dict[str, tuple[int, ...]] = {}

    def conv_entry(name: str, c_in: int, c_out: int, k: int = KERNEL):
        shapes[f"{name}.weight"] = (k, k, c_in, c_out)
        shapes[f"{name}.bias"] = (c_out,)

    c_in = config.input_channels
    for stage, f in enumerate(config.encoder_filters, start=1):
        for k in range(1, config.convs_per_block + 1):
            conv_entry(f"enc{stage}.conv{k}", c_in if k == 1 else f, f)
        c_in = f
    for k in range(1, config.convs_per_block + 1):
        conv_entry(
            f"bottleneck.conv{k}",
            c_in if k == 1 else config.bottleneck_filters,
            config.bottleneck_filters,
        )
    c_in = config.bottleneck_filters
    for stage, f in enumerate(config.decoder_filters, start=1):
        shapes[f"dec{stage}.up.weight"] = (2, 2, c_in, f)
        shapes[f"dec{stage}.up.bias"] = (f,)
        for k in range(1, config.convs_per_block + 1):
            # conv1 sees the upsampled map concatenated with the skip
            conv_entry(f"dec{stage}.conv{k}", 2 * f if k == 1 else f, f)
        c_in = f
    conv_entry("head.conv", c_in, 1)
    return shapes


@dataclass
class UNetParams:
    """Named weight arrays plus the architecture they belong to."""

    config: UNetConfig
    arrays: dict[str, np.ndarray] = field(repr=False)

    @property
    def dtype(self):
        return next(iter(self.arrays.values())).dtype

    def copy(self) -> "UNetParams":
        return UNetParams(self.config, {k: v.copy() for k, v in self.arrays.items()})


def build(config: UNetConfig, seed: int, dtype=np.float32) -> UNetParams:
    """He-initialized parameters: weights ~ N(0, 2/fan_in), biases zero.

    fan_in is the number of inputs feeding one output unit, i.e.
    kh*kw*c_in. Draws happen in declaration order from one seeded
    generator, so equal seeds give bit-identical parameter sets.
    """
    rng = np.random.default_rng(seed)
    arrays: dict[str, np.ndarray] = {}
    for name, shape in param_shapes(config).items():
        if name.endswith(".weight"):
            fan_in = int(np.prod(shape[:-1]))
            std = np.sqrt(2.0 / fan_in)
            arrays[name] = (rng.standard_normal(shape) * std).astype(dtype)
        else:
            arrays[name] = np.zeros(shape, dtype=dtype)
    return UNetParams(config, arrays)


def audit_shapes(params: UNetParams) -> None:
    """Verify every entry exists with the config-determined shape."""
    expected = param_shapes(params.config)
    names = list(params.arrays)
    if names != list(expected):
        raise ConfigError(
            f"parameter names do not match the architecture: "
            f"have {len(names)} entries, expected {len(expected)}"
        )
    for name, shape in expected.items():
        actual = params.arrays[name].shape
        if actual != shape:
            raise ConfigError(f"{name}: shape {actual}, expected {shape}")


def _check_input(config: UNetConfig, x: np.ndarray) -> None:
    if x.ndim != 4:
        raise ShapeError(f"inputs must be (B, H, W, C), got shape {x.shape}")
    _, h, w, c = x.shape
    if c != config.input_channels:
        raise ShapeError(f"expected {config.input_channels} channels, got {c}")
    div = config.spatial_divisor
    if h % div or w % div:
        raise ShapeError(f"spatial dims {h}x{w} must be divisible by {div}")


def forward(params: UNetParams, x: np.ndarray, cache: dict | None = None) -> np.ndarray:
    """Full forward pass; outputs lie strictly inside (0, 1).

    Pass a dict as `cache` to record the intermediates `backward` needs.
    """
    cfg, arrs = params.config, params.arrays
    _check_input(cfg, x)
    x = np.ascontiguousarray(x, dtype=params.dtype)
    saving = cache is not None

    def conv_block(prefix: str, h: np.ndarray) -> np.ndarray:
        for k in range(1, cfg.convs_per_block + 1):
            name = f"{prefix}.conv{k}"
            if saving:
                cache[f"{name}.in"] = h
            pre = conv2d(h, arrs[f"{name}.weight"], arrs[f"{name}.bias"])
            if saving:
                cache[f"{name}.pre"] = pre
            h = relu(pre)
        return h

    skips = []
    h = x
    for stage in range(1, cfg.depth + 1):
        h = conv_block(f"enc{stage}", h)
        skips.append(h)
        h, idx = maxpool2x2(h)
        if saving:
            cache[f"enc{stage}.pool.idx"] = idx
    h = conv_block("bottleneck", h)
    for stage in range(1, cfg.depth + 1):
        name = f"dec{stage}.up"
        if saving:
            cache[f"{name}.in"] = h
        up = conv_transpose2x2(h, arrs[f"{name}.weight"], arrs[f"{name}.bias"])
        h = np.concatenate([up, skips[cfg.depth - stage]], axis=3)
        h = conv_block(f"dec{stage}", h)
    if saving:
        cache["head.conv.in"] = h
    logits = conv2d(h, arrs["head.conv.weight"], arrs["head.conv.bias"])
    y = sigmoid(logits)
    # keep the open-interval contract even where float sigmoid saturates
    info = np.finfo(y.dtype)
    np.clip(y, info.tiny, np.nextafter(y.dtype.type(1), y.dtype.type(0)), out=y)
    if saving:
        cache["head.out"] = y
    return y


def backward(params: UNetParams, cache: dict, dy: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss wrt every parameter, given d(loss)/d(output)."""
    cfg, arrs = params.config, params.arrays
    grads: dict[str, np.ndarray] = {}

    def conv_block_backward(prefix: str, dh: np.ndarray) -> np.ndarray:
        for k in range(cfg.convs_per_block, 0, -1):
            name = f"{prefix}.conv{k}"
            dpre = relu_backward(dh, cache[f"{name}.pre"])
            dh, dw, db = conv2d_backward(dpre, cache[f"{name}.in"], arrs[f"{name}.weight"])
            grads[f"{name}.weight"] = dw
            grads[f"{name}.bias"] = db
        return dh

    dlogits = sigmoid_backward(dy, cache["head.out"])
    dh, dw, db = conv2d_backward(dlogits, cache["head.conv.in"], arrs["head.conv.weight"])
    grads["head.conv.weight"] = dw
    grads["head.conv.bias"] = db

    skip_grads: dict[int, np.ndarray] = {}
    for stage in range(cfg.depth, 0, -1):
        dh = conv_block_backward(f"dec{stage}", dh)
        f = cfg.decoder_filters[stage - 1]
        dup, dskip = dh[..., :f], dh[..., f:]
        skip_grads[cfg.depth - stage + 1] = dskip
        name = f"dec{stage}.up"
        dh, dw, db = conv_transpose2x2_backward(
            dup, cache[f"{name}.in"], arrs[f"{name}.weight"]
        )
        grads[f"{name}.weight"] = dw
        grads[f"{name}.bias"] = db

    dh = conv_block_backward("bottleneck", dh)
    for stage in range(cfg.depth, 0, -1):
        dh = maxpool2x2_backward(dh, cache[f"enc{stage}.pool.idx"])
        dh = dh + skip_grads[stage]
        dh = conv_block_backward(f"enc{stage}", dh)
    return grads


def predict(params: UNetParams, radar) -> NdwiMap:
    """Single-chip forward pass squeezed to (H, W), on the unit scale."""
    values = radar.values if hasattr(radar, "values") else np.asarray(radar)
    if values.ndim != 3:
        raise ShapeError(f"radar chip must be (H, W, C), got shape {values.shape}")
    out = forward(params, values[np.newaxis])
    return NdwiMap(out[0, :, :, 0], UNIT)
