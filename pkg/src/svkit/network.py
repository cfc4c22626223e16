"""Forward-only inference for the two ResNet-34 trunk variants.

Both variants stack basic residual blocks [3, 4, 6, 3] on a single-channel
time x mel input and emit a 512-d embedding:

  * q-sap: quarter-width channels (16, 32, 64, 128), first conv stride 2x2,
    frames reduced by a mean over the frequency axis, self-attentive
    pooling (weighted mean). ~1.4M trainable parameters.
  * h-asp: half-width channels (32, 64, 128, 256), first conv stride 1x1,
    frames flattened (freq-major, then channel), attentive statistics
    pooling (weighted mean concatenated with weighted std). ~8.0M
    trainable parameters.

All tensors are float32. Inference is pure: weights are immutable after
load and no state is shared between calls.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import containers

BN_EPS = 1e-5


@dataclass(frozen=True)
class TrunkConfig:
    variant: str
    channels: tuple[int, int, int, int]
    conv1_stride: tuple[int, int]
    pooling: str  # "sap" | "asp"
    frame_agg: str  # "mean" | "flatten"
    block_counts: tuple[int, int, int, int] = (3, 4, 6, 3)
    n_mels: int = 64
    embed_dim: int = 512
    attn_dim: int = 128
    var_floor: float = 1e-5
    embed_bn: bool = False

    @classmethod
    def q_sap(cls, embed_bn: bool = False) -> "TrunkConfig":
        return cls(
            variant="q-sap",
            channels=(16, 32, 64, 128),
            conv1_stride=(2, 2),
            pooling="sap",
            frame_agg="mean",
            embed_bn=embed_bn,
        )

    @classmethod
    def h_asp(cls, embed_bn: bool = False) -> "TrunkConfig":
        return cls(
            variant="h-asp",
            channels=(32, 64, 128, 256),
            conv1_stride=(1, 1),
            pooling="asp",
            frame_agg="flatten",
            embed_bn=embed_bn,
        )

    @classmethod
    def from_variant(cls, variant: str, embed_bn: bool = False) -> "TrunkConfig":
        factories = {"q-sap": cls.q_sap, "h-asp": cls.h_asp}
        if variant not in factories:
            raise ValueError(f"unknown variant {variant!r}, expected one of {sorted(factories)}")
        return factories[variant](embed_bn=embed_bn)

    @property
    def final_freq(self) -> int:
        """Frequency extent after conv1 and the three stride-2 stages."""
        freq = _conv_out(self.n_mels, 3, self.conv1_stride[1], 1)
        for _ in range(3):
            freq = _conv_out(freq, 3, 2, 1)
        return freq

    @property
    def frame_dim(self) -> int:
        if self.frame_agg == "flatten":
            return self.final_freq * self.channels[-1]
        return self.channels[-1]

    @property
    def pooled_dim(self) -> int:
        return 2 * self.frame_dim if self.pooling == "asp" else self.frame_dim


def _conv_out(size: int, kernel: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - kernel) // stride + 1


def conv2d(
    x: np.ndarray,
    kernel: np.ndarray,
    stride: tuple[int, int] = (1, 1),
    pad: tuple[int, int] = (1, 1),
) -> np.ndarray:
    """2-D convolution of a (time, freq, ch_in) tensor.

    kernel is (kh, kw, ch_in, ch_out); output spatial extents follow
    floor((in + 2*pad - k) / stride) + 1.
    """
    if x.ndim != 3:
        raise ValueError(f"input must be (time, freq, channels), got shape {x.shape}")
    kh, kw, c_in, c_out = kernel.shape
    if x.shape[2] != c_in:
        raise ValueError(f"channel mismatch: input has {x.shape[2]}, kernel expects {c_in}")
    st, sf = stride
    pt, pf = pad
    xp = np.pad(x, ((pt, pt), (pf, pf), (0, 0)))
    if xp.shape[0] < kh or xp.shape[1] < kw:
        raise ValueError(f"input {x.shape} too small for kernel {kernel.shape} with pad {pad}")
    windows = sliding_window_view(xp, (kh, kw), axis=(0, 1))[::st, ::sf]
    t_out, f_out = windows.shape[:2]
    cols = windows.transpose(0, 1, 3, 4, 2).reshape(t_out * f_out, kh * kw * c_in)
    out = cols @ kernel.reshape(kh * kw * c_in, c_out)
    return out.reshape(t_out, f_out, c_out)


def batchnorm_infer(
    x: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    mean: np.ndarray,
    var: np.ndarray,
    eps: float = BN_EPS,
) -> np.ndarray:
    """Per-channel affine normalization with stored running statistics."""
    if np.any(var < 0):
        raise ValueError("batch norm running variance must be non-negative")
    scale = gamma / np.sqrt(var + eps)
    return x * scale + (beta - mean * scale)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def softmax(x: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over the last axis."""
    shifted = x - np.max(x, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


class NetworkWeights:
    """Named float32 tensors for one trunk variant.

    Names ending in running_mean / running_var are batch-norm buffers and
    do not count as trainable parameters.
    """

    def __init__(self, tensors: dict[str, np.ndarray]):
        self.tensors = {name: np.asarray(t, dtype=np.float32) for name, t in tensors.items()}

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.tensors[name]
        except KeyError:
            raise KeyError(f"weights have no tensor named {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def __len__(self) -> int:
        return len(self.tensors)

    def parameter_count(self) -> int:
        return sum(t.size for name, t in self.tensors.items() if "running_" not in name)

    def save(self, path: str | Path) -> None:
        containers.save_tensors(path, self.tensors)

    @classmethod
    def load(cls, path: str | Path) -> "NetworkWeights":
        return cls(containers.load_tensors(path))


def parameter_count(weights: NetworkWeights) -> int:
    """Total trainable scalar count (conv, BN gamma/beta, attention, linear)."""
    return weights.parameter_count()


def _bn(weights: NetworkWeights, prefix: str):
    return (
        weights[f"{prefix}.gamma"],
        weights[f"{prefix}.beta"],
        weights[f"{prefix}.running_mean"],
        weights[f"{prefix}.running_var"],
    )


def residual_block(x: np.ndarray, weights: NetworkWeights, prefix: str, stride: int) -> np.ndarray:
    """Basic block: conv-BN-ReLU-conv-BN plus shortcut, final ReLU.

    The shortcut is a 1x1 conv + BN (present in the weight set) when the
    block changes stride or channel count, identity otherwise.
    """
    out = conv2d(x, weights[f"{prefix}.conv1.weight"], (stride, stride), (1, 1))
    out = relu(batchnorm_infer(out, *_bn(weights, f"{prefix}.bn1")))
    out = conv2d(out, weights[f"{prefix}.conv2.weight"], (1, 1), (1, 1))
    out = batchnorm_infer(out, *_bn(weights, f"{prefix}.bn2"))
    if f"{prefix}.shortcut.weight" in weights:
        shortcut = conv2d(x, weights[f"{prefix}.shortcut.weight"], (stride, stride), (0, 0))
        shortcut = batchnorm_infer(shortcut, *_bn(weights, f"{prefix}.shortcut_bn"))
    else:
        shortcut = x
    if out.shape != shortcut.shape:
        raise ValueError(f"residual shape mismatch: {out.shape} vs shortcut {shortcut.shape}")
    return relu(out + shortcut)


def frame_attention(
    frames: np.ndarray, w: np.ndarray, b: np.ndarray, u: np.ndarray
) -> np.ndarray:
    """Attention weights over frames: softmax_t of u . tanh(W h_t + b)."""
    if frames.ndim != 2 or frames.shape[0] < 1:
        raise ValueError(f"frames must be a non-empty (L, D) matrix, got shape {frames.shape}")
    hidden = np.tanh(frames @ w + b)
    logits = hidden @ u
    if not np.all(np.isfinite(logits)):
        raise ValueError("non-finite attention logits")
    return softmax(logits)


def sap_pool(frames: np.ndarray, w: np.ndarray, b: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Self-attentive pooling: attention-weighted mean of frame features."""
    alpha = frame_attention(frames, w, b, u)
    return alpha @ frames


def asp_pool(
    frames: np.ndarray,
    w: np.ndarray,
    b: np.ndarray,
    u: np.ndarray,
    var_floor: float = 1e-5,
) -> np.ndarray:
    """Attentive statistics pooling: weighted mean concat weighted std.

    The channel-wise variance sum(alpha * h^2) - mu^2 is floored at
    var_floor before the square root, so identical frames pool to
    (v, sqrt(var_floor) * ones).
    """
    if not np.all(np.isfinite(frames)):
        raise ValueError("non-finite frame features")
    alpha = frame_attention(frames, w, b, u)
    mu = alpha @ frames
    ex2 = alpha @ (frames * frames)
    sigma = np.sqrt(np.maximum(ex2 - mu * mu, var_floor))
    return np.concatenate([mu, sigma])


def init_weights(cfg: TrunkConfig, seed: int = 0) -> NetworkWeights:
    """Random untrained weights: He-uniform fan-in for conv/linear layers,
    identity batch-norm (gamma 1, beta 0, running mean 0, running var 1)."""
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}

    def he_uniform(shape, fan_in):
        bound = np.sqrt(6.0 / fan_in)
        return rng.uniform(-bound, bound, size=shape).astype(np.float32)

    def add_bn(prefix, channels):
        tensors[f"{prefix}.gamma"] = np.ones(channels, dtype=np.float32)
        tensors[f"{prefix}.beta"] = np.zeros(channels, dtype=np.float32)
        tensors[f"{prefix}.running_mean"] = np.zeros(channels, dtype=np.float32)
        tensors[f"{prefix}.running_var"] = np.ones(channels, dtype=np.float32)

    tensors["conv1.weight"] = he_uniform((3, 3, 1, cfg.channels[0]), 9)
    add_bn("conv1.bn", cfg.channels[0])

    c_in = cfg.channels[0]
    for layer_idx, (c_out, n_blocks) in enumerate(zip(cfg.channels, cfg.block_counts), start=1):
        for block_idx in range(n_blocks):
            prefix = f"layer{layer_idx}.block{block_idx}"
            stride = 2 if (layer_idx > 1 and block_idx == 0) else 1
            block_in = c_in if block_idx == 0 else c_out
            tensors[f"{prefix}.conv1.weight"] = he_uniform((3, 3, block_in, c_out), 9 * block_in)
            add_bn(f"{prefix}.bn1", c_out)
            tensors[f"{prefix}.conv2.weight"] = he_uniform((3, 3, c_out, c_out), 9 * c_out)
            add_bn(f"{prefix}.bn2", c_out)
            if stride != 1 or block_in != c_out:
                tensors[f"{prefix}.shortcut.weight"] = he_uniform((1, 1, block_in, c_out), block_in)
                add_bn(f"{prefix}.shortcut_bn", c_out)
        c_in = c_out

    d = cfg.frame_dim
    tensors["pool.w"] = he_uniform((d, cfg.attn_dim), d)
    tensors["pool.b"] = np.zeros(cfg.attn_dim, dtype=np.float32)
    tensors["pool.u"] = he_uniform((cfg.attn_dim,), cfg.attn_dim)

    tensors["embed.weight"] = he_uniform((cfg.pooled_dim, cfg.embed_dim), cfg.pooled_dim)
    tensors["embed.bias"] = np.zeros(cfg.embed_dim, dtype=np.float32)
    if cfg.embed_bn:
        add_bn("embed_bn", cfg.embed_dim)

    return NetworkWeights(tensors)


def infer_config(weights: NetworkWeights) -> TrunkConfig:
    """Recover the trunk configuration from tensor shapes."""
    first = weights["conv1.weight"]
    embed_bn = "embed_bn.gamma" in weights
    by_width = {16: TrunkConfig.q_sap, 32: TrunkConfig.h_asp}
    width = first.shape[-1]
    if width not in by_width:
        raise ValueError(f"cannot infer variant from conv1 width {width}")
    return by_width[width](embed_bn=embed_bn)


def forward(
    features: np.ndarray,
    weights: NetworkWeights,
    cfg: TrunkConfig,
    shape_log: list | None = None,
) -> np.ndarray:
    """Embed a normalized (L, n_mels) feature matrix as a 512-d vector.

    shape_log, when given, collects (stage, shape) pairs for the
    intermediate activations.
    """
    features = np.asarray(features, dtype=np.float32)
    if features.ndim != 2 or features.shape[1] != cfg.n_mels:
        raise ValueError(f"expected (L, {cfg.n_mels}) features, got shape {features.shape}")

    def log(stage, shape):
        if shape_log is not None:
            shape_log.append((stage, tuple(shape)))

    x = features[:, :, None]
    x = conv2d(x, weights["conv1.weight"], cfg.conv1_stride, (1, 1))
    x = relu(batchnorm_infer(x, *_bn(weights, "conv1.bn")))
    log("conv1", x.shape)

    for layer_idx, n_blocks in enumerate(cfg.block_counts, start=1):
        for block_idx in range(n_blocks):
            stride = 2 if (layer_idx > 1 and block_idx == 0) else 1
            x = residual_block(x, weights, f"layer{layer_idx}.block{block_idx}", stride)
        log(f"layer{layer_idx}", x.shape)

    if cfg.frame_agg == "flatten":
        frames = x.reshape(x.shape[0], -1)  # freq-major, then channel
    else:
        frames = x.mean(axis=1)
    log("frames", frames.shape)

    if cfg.pooling == "sap":
        pooled = sap_pool(frames, weights["pool.w"], weights["pool.b"], weights["pool.u"])
    else:
        pooled = asp_pool(
            frames, weights["pool.w"], weights["pool.b"], weights["pool.u"], cfg.var_floor
        )
    log("pooled", pooled.shape)

    embedding = pooled @ weights["embed.weight"] + weights["embed.bias"]
    if cfg.embed_bn:
        embedding = batchnorm_infer(embedding, *_bn(weights, "embed_bn"))
    if not np.all(np.isfinite(embedding)):
        raise ValueError("non-finite embedding")
    log("embedding", embedding.shape)
    return embedding.astype(np.float32)
