"""Model definitions: the token-wise conv U-Net, its two reduced
variants, and the 3-layer BiLSTM baseline, plus checkpoint IO.

All models map a feature matrix [m, 64] (or a batch [B, m, 64]) to
per-token class probabilities [2, 64] via the same token-wise softmax
head, so the families are interchangeable in the training harness.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

import numpy as np

from . import tensor as T
from .errors import ConfigurationError, DimensionError, FormatError, IntegrityError
from .tensor import Tensor

VARIANTS = ("full_unet", "no_conv245", "no_pool_block", "bilstm")

DEFAULT_CHANNELS = {
    "conv1": 64, "conv2": 64, "conv3": 128, "conv4": 128,
    "deconv": 64, "conv5": 256, "conv6": 256, "conv7": 64,
}

CHECKPOINT_MAGIC = b"TCKPT1"


@dataclass
class ModelConfig:
    variant: str = "full_unet"
    input_channels: int = 100
    seq_len: int = 64
    channels: dict[str, int] = field(default_factory=lambda: dict(DEFAULT_CHANNELS))
    lstm_hidden: int = 100
    lstm_layers: int = 3
    dropout_p: float = 0.5
    head_classes: int = 2

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}")
        if self.seq_len % 2 != 0:
            raise ConfigurationError("seq_len must be even (pooling halves it)")
        if self.input_channels < 1:
            raise ConfigurationError("input_channels must be positive")
        missing = set(DEFAULT_CHANNELS) - set(self.channels)
        if self.variant != "bilstm" and missing:
            raise ConfigurationError(f"channel plan missing {sorted(missing)}")


@dataclass
class ModelParams:
    config: ModelConfig
    tensors: dict[str, Tensor]

    def copy_values(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.tensors.items()}

    def load_values(self, values: dict[str, np.ndarray]) -> None:
        for name, arr in values.items():
            self.tensors[name].data = arr.copy()

    def n_parameters(self) -> int:
        return sum(p.data.size for p in self.tensors.values())


def _he_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int,
                dtype=np.float32) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def build(config: ModelConfig, seed: int = 0) -> ModelParams:
    """Allocate and initialize all parameters; deterministic per seed."""
    config.validate()
    rng = np.random.default_rng(seed)
    ch = config.channels
    m = config.input_channels
    t: dict[str, Tensor] = {}

    def conv(name: str, c_in: int, c_out: int, k: int) -> int:
        t[f"{name}.weight"] = Tensor(_he_uniform(rng, (c_out, c_in, k), c_in * k),
                                     requires_grad=True)
        t[f"{name}.bias"] = Tensor(np.zeros(c_out, dtype=np.float32), requires_grad=True)
        return c_out

    if config.variant == "full_unet":
        c = conv("conv1", m, ch["conv1"], 5)
        c = conv("conv2", c, ch["conv2"], 3)
        skip = c
        c = conv("conv3", c, ch["conv3"], 3)
        c = conv("conv4", c, ch["conv4"], 3)
        t["deconv.weight"] = Tensor(_he_uniform(rng, (c, ch["deconv"], 2), c),
                                    requires_grad=True)
        c = ch["deconv"] + skip
        c = conv("conv5", c, ch["conv5"], 3)
        c = conv("conv6", c, ch["conv6"], 3)
        head_in = conv("conv7", c, ch["conv7"], 1)
    elif config.variant == "no_conv245":
        c = conv("conv1", m, ch["conv1"], 5)
        skip = c
        c = conv("conv3", c, ch["conv3"], 3)
        t["deconv.weight"] = Tensor(_he_uniform(rng, (c, ch["deconv"], 2), c),
                                    requires_grad=True)
        c = ch["deconv"] + skip
        c = conv("conv6", c, ch["conv6"], 3)
        head_in = conv("conv7", c, ch["conv7"], 1)
    elif config.variant == "no_pool_block":
        # plain conv stack at full resolution: no pooling, no conv4/conv5,
        # no upsampling, and therefore nothing to skip-concatenate
        c = conv("conv1", m, ch["conv1"], 5)
        c = conv("conv2", c, ch["conv2"], 3)
        c = conv("conv3", c, ch["conv3"], 3)
        c = conv("conv6", c, ch["conv6"], 3)
        head_in = conv("conv7", c, ch["conv7"], 1)
    elif config.variant == "bilstm":
        h = config.lstm_hidden
        limit = 1.0 / np.sqrt(h)
        in_dim = m
        for layer in range(config.lstm_layers):
            for direction in ("fwd", "bwd"):
                base = f"lstm{layer}.{direction}"
                t[f"{base}.wx"] = Tensor(
                    rng.uniform(-limit, limit, (4 * h, in_dim)).astype(np.float32),
                    requires_grad=True)
                t[f"{base}.wh"] = Tensor(
                    rng.uniform(-limit, limit, (4 * h, h)).astype(np.float32),
                    requires_grad=True)
                t[f"{base}.b"] = Tensor(np.zeros(4 * h, dtype=np.float32),
                                        requires_grad=True)
            in_dim = 2 * h
        head_in = in_dim
    else:  # pragma: no cover - validate() already rejects
        raise ConfigurationError(config.variant)

    t["head.W"] = Tensor(_he_uniform(rng, (config.head_classes, head_in), head_in),
                         requires_grad=True)
    return ModelParams(config=config, tensors=t)


def _check_input(config: ModelConfig, features: Tensor) -> None:
    shape = features.shape
    if shape[-1] != config.seq_len:
        raise DimensionError(
            f"input length {shape[-1]} != configured seq_len {config.seq_len}")
    if shape[-2] != config.input_channels:
        raise DimensionError(
            f"input has {shape[-2]} channels, model expects {config.input_channels}")


def forward_unet(params: ModelParams, features: Tensor,
                 trace: list[tuple[str, int]] | None = None) -> Tensor:
    """Conv U-Net forward pass; returns per-token probabilities [2, T].

    When ``trace`` is a list, (stage, length) entries are appended so the
    halve-then-double contract can be inspected.
    """
    cfg = params.config
    _check_input(cfg, features)
    p = params.tensors

    def block(name: str, x: Tensor) -> Tensor:
        out = T.relu(T.conv1d(x, p[f"{name}.weight"], p[f"{name}.bias"]))
        if trace is not None:
            trace.append((name, out.shape[-1]))
        return out

    if trace is not None:
        trace.append(("input", features.shape[-1]))
    if cfg.variant == "full_unet":
        x = block("conv1", features)
        x = block("conv2", x)
        skip = x
        x, _ = T.maxpool1d(x)
        if trace is not None:
            trace.append(("pool", x.shape[-1]))
        x = block("conv3", x)
        x = block("conv4", x)
        x = T.upsample2(x, p["deconv.weight"])
        if trace is not None:
            trace.append(("upsample", x.shape[-1]))
        x = T.concat_channels(skip, x)
        x = block("conv5", x)
        x = block("conv6", x)
        x = block("conv7", x)
    elif cfg.variant == "no_conv245":
        x = block("conv1", features)
        skip = x
        x, _ = T.maxpool1d(x)
        x = block("conv3", x)
        x = T.upsample2(x, p["deconv.weight"])
        x = T.concat_channels(skip, x)
        x = block("conv6", x)
        x = block("conv7", x)
    elif cfg.variant == "no_pool_block":
        x = block("conv1", features)
        x = block("conv2", x)
        x = block("conv3", x)
        x = block("conv6", x)
        x = block("conv7", x)
    else:
        raise ConfigurationError(f"forward_unet cannot run variant {cfg.variant!r}")
    return T.token_softmax_head(x, p["head.W"])


def _run_direction(params: ModelParams, layer: int, direction: str, x: Tensor,
                   reverse: bool) -> list[Tensor]:
    cfg = params.config
    p = params.tensors
    base = f"lstm{layer}.{direction}"
    wx, wh, b = p[f"{base}.wx"], p[f"{base}.wh"], p[f"{base}.b"]
    batched = x.data.ndim == 3
    n = x.data.shape[0] if batched else 1
    h = Tensor(np.zeros((n, cfg.lstm_hidden) if batched else (cfg.lstm_hidden,),
                        dtype=x.data.dtype))
    c = Tensor(h.data.copy())
    steps = range(cfg.seq_len - 1, -1, -1) if reverse else range(cfg.seq_len)
    out: list[Tensor | None] = [None] * cfg.seq_len
    for step in steps:
        h, c = T.lstm_cell(T.select_time(x, step), h, c, wx, wh, b)
        out[step] = h
    return out  # type: ignore[return-value]


def forward_bilstm(params: ModelParams, features: Tensor, training: bool = False,
                   rng: np.random.Generator | int | None = None) -> Tensor:
    """Stacked BiLSTM forward pass with dropout between layers."""
    cfg = params.config
    _check_input(cfg, features)
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    x = features
    for layer in range(cfg.lstm_layers):
        fwd = _run_direction(params, layer, "fwd", x, reverse=False)
        bwd = _run_direction(params, layer, "bwd", x, reverse=True)
        cols = [T.concat_vec(f, b) for f, b in zip(fwd, bwd)]
        x = T.stack_time(cols)
        if layer < cfg.lstm_layers - 1:
            x = T.dropout(x, cfg.dropout_p, training, rng)
    return T.token_softmax_head(x, params.tensors["head.W"])


def forward(params: ModelParams, features: Tensor, training: bool = False,
            rng: np.random.Generator | int | None = None) -> Tensor:
    if params.config.variant == "bilstm":
        return forward_bilstm(params, features, training, rng)
    return forward_unet(params, features)


def predict_mask(probs: Tensor | np.ndarray, pad_mask: np.ndarray) -> np.ndarray:
    """Argmax per token; padded positions forced to 0; exact tie -> retain."""
    p = probs.data if isinstance(probs, Tensor) else np.asarray(probs)
    squeeze = p.ndim == 2
    if squeeze:
        p = p[None]
    mask = (p[:, 1, :] >= p[:, 0, :]).astype(np.int64)
    mask *= np.atleast_2d(np.asarray(pad_mask)).astype(np.int64)
    return mask[0] if squeeze else mask


# --------------------------------------------------------------------------
# checkpoint IO: magic "TCKPT1", config text block, then a length-prefixed
# table of (name, shape, raw little-endian float32). Round-trip bit-exact.

def _config_to_text(config: ModelConfig) -> str:
    lines = [
        f"variant={config.variant}",
        f"input_channels={config.input_channels}",
        f"seq_len={config.seq_len}",
        f"lstm_hidden={config.lstm_hidden}",
        f"lstm_layers={config.lstm_layers}",
        f"dropout_p={config.dropout_p!r}",
        f"head_classes={config.head_classes}",
    ]
    lines += [f"channels.{k}={v}" for k, v in sorted(config.channels.items())]
    return "\n".join(lines) + "\n"


def _config_from_text(text: str) -> ModelConfig:
    cfg = ModelConfig()
    channels: dict[str, int] = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition("=")
        if key.startswith("channels."):
            channels[key[len("channels."):]] = int(value)
        elif key == "variant":
            cfg = replace(cfg, variant=value)
        elif key == "dropout_p":
            cfg = replace(cfg, dropout_p=float(value))
        elif key in ("input_channels", "seq_len", "lstm_hidden", "lstm_layers",
                     "head_classes"):
            cfg = replace(cfg, **{key: int(value)})
        else:
            raise FormatError(f"unknown checkpoint config key {key!r}")
    if channels:
        cfg = replace(cfg, channels=channels)
    return cfg


def save_checkpoint(path, params: ModelParams) -> None:
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        cfg_blob = _config_to_text(params.config).encode("utf-8")
        f.write(struct.pack("<I", len(cfg_blob)))
        f.write(cfg_blob)
        f.write(struct.pack("<I", len(params.tensors)))
        for name, p in params.tensors.items():
            blob = name.encode("utf-8")
            f.write(struct.pack("<I", len(blob)))
            f.write(blob)
            f.write(struct.pack("<I", p.data.ndim))
            f.write(struct.pack(f"<{p.data.ndim}I", *p.data.shape))
            f.write(np.ascontiguousarray(p.data, dtype="<f4").tobytes())


def load_checkpoint(path) -> ModelParams:
    with open(path, "rb") as f:
        magic = f.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise FormatError(f"bad checkpoint magic {magic!r}")

        def read_exact(n: int) -> bytes:
            blob = f.read(n)
            if len(blob) != n:
                raise IntegrityError("truncated checkpoint file")
            return blob

        (cfg_len,) = struct.unpack("<I", read_exact(4))
        config = _config_from_text(read_exact(cfg_len).decode("utf-8"))
        (count,) = struct.unpack("<I", read_exact(4))
        tensors: dict[str, Tensor] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<I", read_exact(4))
            name = read_exact(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<I", read_exact(4))
            shape = struct.unpack(f"<{ndim}I", read_exact(4 * ndim))
            n = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(read_exact(4 * n), dtype="<f4").reshape(shape)
            tensors[name] = Tensor(data.copy(), requires_grad=True)
    return ModelParams(config=config, tensors=tensors)
