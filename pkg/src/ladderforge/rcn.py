"""Recurrent convolutional hull predictor built from Conv-GRU blocks.

Each block is a Conv-GRU cell with 3x3 kernels; every block but the last is
followed by 2x2 max pooling. After the last frame of a chunk the top state
goes through a 1x1 convolution (one filter per hull cell), spatial average
pooling and a sigmoid, and is reshaped to the hull matrix.

Training consumes a shot in chunks of ``chunk`` subsampled frames. Each chunk
loss is back-propagated on its own and the hidden state is carried into the
next chunk as a constant, so memory is bounded by one chunk.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, replace
from typing import BinaryIO, Optional, Sequence

import numpy as np

from . import tensor as T
from .core import HullMatrix, LadderSpace, ladder_space_default
from .errors import EmptyInputError, FormatError, ShapeError
from .tensor import Adam, Parameter, Tensor

GATES = ("z", "r", "h")
WEIGHTS_MAGIC = b"RCNH"
WEIGHTS_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    channels: tuple = (4, 4, 8, 16, 32, 64, 64)
    input_size: tuple = (96, 54)  # (width, height) of the luma frames
    output_shape: tuple = (7, 9)
    threshold: float = 0.5
    in_channels: int = 1

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        if not self.channels or any(c < 1 for c in self.channels):
            raise ShapeError("channels must be a non-empty list of positive counts")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")

    @property
    def head_channels(self) -> int:
        return int(np.prod(self.output_shape))

    def layer_sizes(self) -> list:
        """(height, width) of the input to every block."""
        w, h = self.input_size
        sizes = []
        for _ in self.channels:
            sizes.append((h, w))
            h, w = -(-h // 2), -(-w // 2)
        return sizes


@dataclass(frozen=True)
class TrainConfig:
    stride: int = 5
    chunk: int = 3
    batch: int = 8
    lr_pretrain: float = 1e-4
    lr_finetune: float = 1e-5
    epochs: int = 30
    seed: int = 7

    def __post_init__(self):
        if self.stride < 1 or self.chunk < 1 or self.batch < 1:
            raise ValueError("stride, chunk and batch must be >= 1")


@dataclass
class ConvGruParams:
    """Input kernels W, state kernels U and biases B for the z, r and h gates."""

    Wz: Parameter
    Wr: Parameter
    Wh: Parameter
    Uz: Parameter
    Ur: Parameter
    Uh: Parameter
    Bz: Parameter
    Br: Parameter
    Bh: Parameter

    @property
    def filters(self) -> int:
        return self.Wz.shape[0]

    def named(self) -> list:
        return [(n, getattr(self, n)) for n in ("Wz", "Wr", "Wh", "Uz", "Ur", "Uh", "Bz", "Br", "Bh")]

    @classmethod
    def init(cls, cin: int, n: int, rng: np.random.Generator, dtype=np.float32, prefix: str = "") -> "ConvGruParams":
        def kernel(name, ci):
            bound = np.sqrt(6.0 / ((ci + n) * 9))
            return Parameter(rng.uniform(-bound, bound, (n, ci, 3, 3)).astype(dtype), name=prefix + name)

        kw = {}
        for g in GATES:
            kw["W" + g] = kernel("W" + g, cin)
        for g in GATES:
            kw["U" + g] = kernel("U" + g, n)
        for g in GATES:
            kw["B" + g] = Parameter(np.zeros(n, dtype=dtype), name=prefix + "B" + g)
        return cls(**kw)


def conv_gru_step(p: ConvGruParams, x: Tensor, h_prev: Tensor) -> Tensor:
    """One Conv-GRU update: gates from input and previous state, then blend."""
    conv = T.conv2d_same
    z = T.sigmoid(T.add(conv(x, p.Wz, p.Bz), conv(h_prev, p.Uz)))
    r = T.sigmoid(T.add(conv(x, p.Wr, p.Br), conv(h_prev, p.Ur)))
    cand = T.tanh(T.add(conv(x, p.Wh, p.Bh), conv(T.hadamard(r, h_prev), p.Uh)))
    return T.affine_blend(z, h_prev, cand)


class RCNModel:
    def __init__(self, config: Optional[ModelConfig] = None, seed: int = 0, dtype=np.float32, zero: bool = False):
        self.config = config or ModelConfig()
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        self.blocks = []
        cin = self.config.in_channels
        for k, n in enumerate(self.config.channels, start=1):
            self.blocks.append(ConvGruParams.init(cin, n, rng, self.dtype, prefix=f"block{k}."))
            cin = n
        heads = self.config.head_channels
        bound = np.sqrt(6.0 / (cin + heads))
        self.head_w = Parameter(rng.uniform(-bound, bound, (heads, cin, 1, 1)).astype(self.dtype), name="head.weight")
        self.head_b = Parameter(np.zeros(heads, dtype=self.dtype), name="head.bias")
        if zero:
            for p in self.parameters():
                p.data[...] = 0

    def named_parameters(self) -> list:
        out = []
        for b in self.blocks:
            out.extend((p.name, p) for _, p in b.named())
        out.append((self.head_w.name, self.head_w))
        out.append((self.head_b.name, self.head_b))
        return out

    def parameters(self) -> list:
        return [p for _, p in self.named_parameters()]

    def head_parameters(self) -> list:
        return [self.head_w, self.head_b]

    def block_parameters(self, k: int) -> list:
        """Parameters of block ``k`` (1-based)."""
        return [p for _, p in self.blocks[k - 1].named()]

    def parameter_count(self) -> int:
        return int(sum(p.data.size for p in self.parameters()))

    def set_frozen(self, frozen_blocks: Sequence[int]):
        frozen_blocks = set(frozen_blocks)
        for k in range(1, len(self.blocks) + 1):
            for p in self.block_parameters(k):
                p.frozen = k in frozen_blocks
        for p in self.head_parameters():
            p.frozen = False

    def zero_state(self) -> list:
        return [
            Tensor(np.zeros((n, h, w), dtype=self.dtype))
            for n, (h, w) in zip(self.config.channels, self.config.layer_sizes())
        ]

    def state_dict(self) -> dict:
        return {name: p.data.copy() for name, p in self.named_parameters()}


def _as_input(frame, dtype) -> Tensor:
    arr = np.asarray(frame)
    if arr.dtype == np.uint8:
        arr = arr.astype(dtype) / dtype.type(255.0)
    else:
        arr = arr.astype(dtype, copy=False)
    return Tensor(arr[None] if arr.ndim == 2 else arr)


def forward_chunk(model: RCNModel, frames, state: Optional[list] = None):
    """Feed ``frames`` through the blocks; returns ``(probabilities 7x9, new state)``.

    ``frames`` are ``(height, width)`` luma planes, either uint8 (scaled by
    1/255) or floats already in [0, 1].
    """
    if len(frames) == 0:
        raise EmptyInputError("chunk has no frames")
    state = list(state) if state is not None else model.zero_state()
    w, h = model.config.input_size
    last = len(model.blocks) - 1
    x = None
    for frame in frames:
        x = _as_input(frame, model.dtype)
        if x.shape[1:] != (h, w) or x.shape[0] != model.config.in_channels:
            raise ShapeError(f"frame shape {x.shape} does not match configured input {w}x{h}")
        for k, params in enumerate(model.blocks):
            hk = conv_gru_step(params, x, state[k])
            state[k] = hk
            x = T.maxpool2x2(hk) if k < last else hk
    logits = T.adaptive_avg_pool_1x1(T.conv2d_same(x, model.head_w, model.head_b))
    probs = T.reshape(T.sigmoid(logits), model.config.output_shape)
    return probs, state


def subsample(video, stride: int) -> np.ndarray:
    return np.asarray(video)[::stride]


def chunks_of(frames, chunk: int) -> list:
    return [frames[i:i + chunk] for i in range(0, len(frames), chunk)]


def predict_proba(model: RCNModel, video, stride: int = 5, chunk: int = 3, return_history: bool = False):
    """Probabilities after the last chunk (optionally every chunk's output too)."""
    frames = subsample(video, stride)
    if len(frames) == 0:
        raise EmptyInputError("video has no frames")
    history = []
    state = None
    with T.no_grad():
        for c in chunks_of(frames, chunk):
            probs, state = forward_chunk(model, c, state)
            history.append(probs.data.copy())
    return (history[-1], history) if return_history else history[-1]


def predict_shot(model: RCNModel, video, stride: int = 5, chunk: int = 3, shot_id: str = "",
                 space: Optional[LadderSpace] = None, threshold: Optional[float] = None) -> HullMatrix:
    """Binary hull prediction for a shot of any length."""
    probs = predict_proba(model, video, stride, chunk)
    thr = model.config.threshold if threshold is None else threshold
    space = space or ladder_space_default()
    return HullMatrix(shot_id, space, (probs >= thr).astype(np.uint8))


def chunk_losses(model: RCNModel, video, target, stride: int = 5, chunk: int = 3) -> list:
    """Per-chunk BCE of a fixed model against ``target`` (no gradients)."""
    t = np.asarray(target.bits if isinstance(target, HullMatrix) else target, dtype=model.dtype)
    _, history = predict_proba(model, video, stride, chunk, return_history=True)
    out = []
    for p in history:
        out.append(T.bce_loss(Tensor(p), t).item())
    return out


def accumulate_shot(model: RCNModel, video, target, stride: int = 5, chunk: int = 3,
                    weight: float = 1.0, normalize: bool = True) -> list:
    """Forward/backward every chunk of a shot, adding gradients into the parameters.

    Each chunk's gradient is scaled by ``weight / n_chunks`` when ``normalize``
    (so shots of any length weigh the same), else by ``weight``. Returns the
    per-chunk losses.
    """
    t = np.asarray(target.bits if isinstance(target, HullMatrix) else target, dtype=model.dtype)
    if t.shape != tuple(model.config.output_shape):
        raise ShapeError(f"target shape {t.shape} != {model.config.output_shape}")
    frames = subsample(video, stride)
    if len(frames) == 0:
        raise EmptyInputError("video has no frames")
    pieces = chunks_of(frames, chunk)
    scale = weight / len(pieces) if normalize else weight
    losses = []
    state = None
    for c in pieces:
        probs, state = forward_chunk(model, c, state)
        loss = T.bce_loss(probs, t)
        T.backward(loss, grad_scale=scale)
        losses.append(loss.item())
        state = [s.detach() for s in state]
    return losses


def train_shot(model: RCNModel, video, target, optimizer: Adam, stride: int = 5, chunk: int = 3) -> list:
    """One optimizer step on a single shot after accumulating all its chunks."""
    losses = accumulate_shot(model, video, target, stride, chunk)
    optimizer.step()
    return losses


@dataclass
class TrainingShot:
    frames: np.ndarray
    target: HullMatrix
    shot_id: str = ""
    complexity: Optional[object] = None


def train_epoch(model: RCNModel, corpus: Sequence[TrainingShot], optimizer: Adam, cfg: TrainConfig,
                rng: np.random.Generator) -> float:
    """One pass over ``corpus`` in shuffled batches; returns the mean chunk loss per shot."""
    order = rng.permutation(len(corpus))
    shot_means = []
    for start in range(0, len(order), cfg.batch):
        batch = order[start:start + cfg.batch]
        # fixed reduction order: shots in batch order, chunks in time order
        for i in batch:
            shot = corpus[i]
            losses = accumulate_shot(model, shot.frames, shot.target, cfg.stride, cfg.chunk, weight=1.0 / len(batch))
            shot_means.append(float(np.mean(losses)))
        optimizer.step()
    return float(np.mean(shot_means))


def fit(model: RCNModel, corpus: Sequence[TrainingShot], cfg: TrainConfig, lr: Optional[float] = None,
        epochs: Optional[int] = None, callback=None) -> list:
    """Train the unfrozen parameters with Adam; returns the per-epoch mean loss."""
    params = [p for p in model.parameters() if not p.frozen]
    T.zero_grad(model.parameters())
    optimizer = Adam(params, lr=cfg.lr_pretrain if lr is None else lr)
    rng = np.random.default_rng(cfg.seed)
    history = []
    for epoch in range(cfg.epochs if epochs is None else epochs):
        history.append(train_epoch(model, corpus, optimizer, cfg, rng))
        if callback is not None:
            callback(epoch, history[-1])
    return history


def fine_tune(model: RCNModel, corpus: Sequence[TrainingShot], cfg: TrainConfig, lr: Optional[float] = None,
              epochs: Optional[int] = None, trainable_blocks: int = 2, callback=None) -> list:
    """Retrain only the last ``trainable_blocks`` blocks and the head at a lower rate."""
    n = len(model.blocks)
    model.set_frozen(range(1, n - trainable_blocks + 1))
    try:
        return fit(model, corpus, cfg, cfg.lr_finetune if lr is None else lr, epochs, callback)
    finally:
        model.set_frozen(())


def weights_save(model: RCNModel, stream: Optional[BinaryIO] = None) -> bytes:
    """Serialize parameters as little-endian float32 in the ``RCNH`` container."""
    named = model.named_parameters()
    buf = io.BytesIO()
    buf.write(WEIGHTS_MAGIC)
    buf.write(struct.pack("<II", WEIGHTS_VERSION, len(named)))
    for name, p in named:
        raw = name.encode("utf-8")
        buf.write(struct.pack("<H", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<B", p.data.ndim))
        buf.write(struct.pack(f"<{p.data.ndim}I", *p.data.shape))
        buf.write(np.ascontiguousarray(p.data, dtype="<f4").tobytes())
    data = buf.getvalue()
    if stream is not None:
        stream.write(data)
    return data


def _read_weights(data: bytes) -> dict:
    view = memoryview(data)
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(view):
            raise FormatError("weights stream is truncated")
        chunk = view[pos:pos + n]
        pos += n
        return chunk

    if bytes(take(4)) != WEIGHTS_MAGIC:
        raise FormatError("bad magic, not an RCNH weights file")
    version, count = struct.unpack("<II", take(8))
    if version != WEIGHTS_VERSION:
        raise FormatError(f"unsupported weights version {version}")
    tensors = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<H", take(2))
        try:
            name = bytes(take(nlen)).decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError("tensor name is not valid UTF-8") from None
        (ndim,) = struct.unpack("<B", take(1))
        dims = struct.unpack(f"<{ndim}I", take(4 * ndim))
        size = int(np.prod(dims)) if ndim else 1
        arr = np.frombuffer(bytes(take(4 * size)), dtype="<f4").reshape(dims)
        if name in tensors:
            raise FormatError(f"duplicate tensor {name!r}")
        tensors[name] = arr
    if pos != len(view):
        raise FormatError(f"{len(view) - pos} trailing bytes after last tensor")
    return tensors


def weights_load(model: RCNModel, stream) -> RCNModel:
    """Load an ``RCNH`` container into ``model`` (names and shapes must match)."""
    data = stream if isinstance(stream, (bytes, bytearray)) else stream.read()
    tensors = _read_weights(bytes(data))
    named = dict(model.named_parameters())
    if set(tensors) != set(named):
        raise FormatError(f"tensor names differ from the model: {sorted(set(tensors) ^ set(named))[:4]}")
    for name, arr in tensors.items():
        if arr.shape != named[name].shape:
            raise FormatError(f"shape mismatch for {name}: {arr.shape} vs {named[name].shape}")
    for name, arr in tensors.items():
        named[name].data[...] = arr.astype(model.dtype)
    return model


def model_from_weights(stream, input_size=None, threshold: float = 0.5, dtype=np.float32) -> RCNModel:
    """Rebuild a model whose block widths are inferred from the stored kernels."""
    data = stream if isinstance(stream, (bytes, bytearray)) else stream.read()
    tensors = _read_weights(bytes(data))
    channels = []
    k = 1
    while f"block{k}.Wz" in tensors:
        channels.append(tensors[f"block{k}.Wz"].shape[0])
        k += 1
    if not channels or "head.weight" not in tensors:
        raise FormatError("weights do not describe an RCN model")
    in_channels = tensors["block1.Wz"].shape[1]
    heads = tensors["head.weight"].shape[0]
    output_shape = (7, 9) if heads == 63 else (heads, 1)
    cfg = ModelConfig(tuple(channels), tuple(input_size or (96, 54)), output_shape, threshold, in_channels)
    model = RCNModel(cfg, dtype=dtype)
    return weights_load(model, bytes(data))


def with_input_size(model: RCNModel, input_size) -> RCNModel:
    """Same weights, different frame size (the network is size-agnostic)."""
    clone = RCNModel(replace(model.config, input_size=tuple(input_size)), dtype=model.dtype)
    for (_, dst), (_, src) in zip(clone.named_parameters(), model.named_parameters()):
        dst.data[...] = src.data
    return clone
