"""Dense sequence model: multi-layer LSTM, BPTT gradients, dropout, Adam.

Everything is float64. Parameter containers are immutable (arrays are
copied on construction and marked read-only), so a value produced by any
operation can be shared freely across threads for read-only use.

Gate order along the 4H axis of every gate tensor is fixed as
input, forget, cell-candidate, output.

Checkpoint format (little-endian, documented for portability):

    magic   4 bytes  b"IRLM"
    u32     format version (currently 1)
    u32     number of layers L
    2L*u32  per layer: input width D, hidden units H
    u32     output dim M
    f64     dropout probability
    tensors row-major f64 in declaration order:
            per layer wx (4H x D), wh (4H x H), b (4H);
            then w_out (M x H_last), b_out (M)
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .errors import CheckpointError, InvalidArgumentError, ShapeError
from .kernels import lstm_layer_forward, lstm_layer_backward
from .rng import check_seed, spawn_generator

_MAGIC = b"IRLM"
_VERSION = 1


def _owned(value, name: str) -> np.ndarray:
    """Copy into a read-only float64 array, rejecting non-finite entries."""
    arr = np.array(value, dtype=np.float64, copy=True)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LstmLayerParams:
    """One layer's gate weights: wx (4H x D), wh (4H x H), bias b (4H)."""

    wx: np.ndarray
    wh: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "wx", _owned(self.wx, "wx"))
        object.__setattr__(self, "wh", _owned(self.wh, "wh"))
        object.__setattr__(self, "b", _owned(self.b, "b"))
        if self.wh.ndim != 2 or self.wh.shape[0] != 4 * self.wh.shape[1]:
            raise ShapeError(f"wh must be (4H, H), got {self.wh.shape}")
        h = self.wh.shape[1]
        if self.wx.ndim != 2 or self.wx.shape[0] != 4 * h:
            raise ShapeError(f"wx must be (4H, D) with H={h}, got {self.wx.shape}")
        if self.b.shape != (4 * h,):
            raise ShapeError(f"b must be (4H,) with H={h}, got {self.b.shape}")

    @property
    def input_dim(self) -> int:
        return self.wx.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.wh.shape[1]


@dataclass(frozen=True)
class ModelParams:
    """Full parameter set: stacked LSTM layers plus the output projection."""

    layers: tuple[LstmLayerParams, ...]
    w_out: np.ndarray
    b_out: np.ndarray
    dropout: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise InvalidArgumentError("at least one LSTM layer is required")
        for lo, hi in zip(self.layers, self.layers[1:]):
            if hi.input_dim != lo.hidden_dim:
                raise ShapeError(
                    f"layer input width {hi.input_dim} does not match "
                    f"previous hidden width {lo.hidden_dim}"
                )
        object.__setattr__(self, "w_out", _owned(self.w_out, "w_out"))
        object.__setattr__(self, "b_out", _owned(self.b_out, "b_out"))
        h_last = self.layers[-1].hidden_dim
        if self.w_out.ndim != 2 or self.w_out.shape[1] != h_last:
            raise ShapeError(f"w_out must be (M, {h_last}), got {self.w_out.shape}")
        if self.b_out.shape != (self.w_out.shape[0],):
            raise ShapeError(f"b_out must be ({self.w_out.shape[0]},), got {self.b_out.shape}")
        if not (0.0 <= float(self.dropout) < 1.0):
            raise InvalidArgumentError(f"dropout must be in [0, 1), got {self.dropout}")
        object.__setattr__(self, "dropout", float(self.dropout))

    @property
    def layer_sizes(self) -> tuple[tuple[int, int], ...]:
        return tuple((l.input_dim, l.hidden_dim) for l in self.layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].input_dim

    @property
    def output_dim(self) -> int:
        return self.w_out.shape[0]

    @property
    def n_params(self) -> int:
        return sum(a.size for a in self.arrays())

    def arrays(self) -> list[np.ndarray]:
        """Parameter tensors in declaration order (the checkpoint order)."""
        out = []
        for l in self.layers:
            out.extend((l.wx, l.wh, l.b))
        out.extend((self.w_out, self.b_out))
        return out

    def with_arrays(self, arrays) -> "ModelParams":
        """Rebuild a ModelParams of identical structure from new tensors."""
        arrays = list(arrays)
        if len(arrays) != 3 * len(self.layers) + 2:
            raise ShapeError("wrong number of parameter tensors")
        layers = tuple(
            LstmLayerParams(arrays[3 * i], arrays[3 * i + 1], arrays[3 * i + 2])
            for i in range(len(self.layers))
        )
        return ModelParams(layers, arrays[-2], arrays[-1], self.dropout)

    def signature(self) -> tuple:
        return (self.layer_sizes, self.output_dim)


@dataclass(frozen=True)
class Gradients:
    """One tensor per parameter tensor, in the same declaration order."""

    values: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "values", tuple(_owned(v, f"gradient[{i}]") for i, v in enumerate(self.values))
        )

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "Gradients":
        return cls(tuple(np.zeros_like(a) for a in params.arrays()))

    def matches(self, params: ModelParams) -> bool:
        ref = params.arrays()
        return len(ref) == len(self.values) and all(
            a.shape == b.shape for a, b in zip(ref, self.values)
        )


def add_gradients(a: Gradients, b: Gradients) -> Gradients:
    if len(a.values) != len(b.values):
        raise ShapeError("gradient structures differ")
    return Gradients(tuple(x + y for x, y in zip(a.values, b.values)))


def scale_gradients(g: Gradients, factor: float) -> Gradients:
    return Gradients(tuple(factor * v for v in g.values))


def init_params(layer_sizes, output_dim: int, seed, dropout: float = 0.0) -> ModelParams:
    """Seeded initialization: uniform +-sqrt(6/(rows+cols)) weights, zero
    biases except the forget-gate slice, which starts at 1.0."""
    layer_sizes = [(int(d), int(h)) for d, h in layer_sizes]
    if not layer_sizes:
        raise InvalidArgumentError("layer_sizes must be non-empty")
    for d, h in layer_sizes:
        if d <= 0 or h <= 0:
            raise InvalidArgumentError(f"layer dimensions must be positive, got ({d}, {h})")
    for (_, h_prev), (d, _) in zip(layer_sizes, layer_sizes[1:]):
        if d != h_prev:
            raise InvalidArgumentError(
                f"layer input width {d} must equal previous hidden width {h_prev}"
            )
    output_dim = int(output_dim)
    if output_dim <= 0:
        raise InvalidArgumentError(f"output_dim must be positive, got {output_dim}")

    rng = spawn_generator(check_seed(seed))

    def uniform(rows, cols):
        limit = np.sqrt(6.0 / (rows + cols))
        return rng.uniform(-limit, limit, size=(rows, cols))

    layers = []
    for d, h in layer_sizes:
        wx = uniform(4 * h, d)
        wh = uniform(4 * h, h)
        b = np.zeros(4 * h)
        b[h:2 * h] = 1.0
        layers.append(LstmLayerParams(wx, wh, b))
    h_last = layer_sizes[-1][1]
    w_out = uniform(output_dim, h_last)
    b_out = np.zeros(output_dim)
    return ModelParams(tuple(layers), w_out, b_out, dropout)


@dataclass(frozen=True)
class ForwardCache:
    """Intermediate activations saved by forward for the backward pass."""

    inputs: tuple[np.ndarray, ...]   # the sequence actually fed to each layer
    h: tuple[np.ndarray, ...]
    c: tuple[np.ndarray, ...]
    gates: tuple[np.ndarray, ...]
    masks: tuple  # dropout mask after each non-final layer, or None
    signature: tuple
    mode: str


def forward_batch(params: ModelParams, x, mode: str = "eval", seed=None):
    """Run the model over a batch of sequences.

    x: (B, T, D). Returns (predictions (B, M), ForwardCache). In train
    mode with dropout > 0, inverted-scaling dropout is applied to the
    hidden sequences between layers, drawn from the given seed.
    """
    if mode not in ("train", "eval"):
        raise InvalidArgumentError(f"mode must be 'train' or 'eval', got {mode!r}")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeError(f"batch input must be (B, T, D), got shape {x.shape}")
    if x.shape[1] == 0:
        raise InvalidArgumentError("sequence must be non-empty")
    if x.shape[2] != params.input_dim:
        raise ShapeError(
            f"input width {x.shape[2]} does not match model width {params.input_dim}"
        )

    use_dropout = mode == "train" and params.dropout > 0.0 and len(params.layers) > 1
    rng = None
    if use_dropout:
        if seed is None:
            raise InvalidArgumentError("train-mode dropout requires a seed")
        rng = spawn_generator(*seed) if isinstance(seed, tuple) else spawn_generator(check_seed(seed))

    inputs, hs, cs, gs, masks = [], [], [], [], []
    cur = x
    for li, layer in enumerate(params.layers):
        inputs.append(cur)
        h, c, gates = lstm_layer_forward(cur, layer.wx, layer.wh, layer.b)
        hs.append(h)
        cs.append(c)
        gs.append(gates)
        if li < len(params.layers) - 1:
            if use_dropout:
                keep = 1.0 - params.dropout
                mask = (rng.random(h.shape) >= params.dropout) / keep
                masks.append(mask)
                cur = h * mask
            else:
                masks.append(None)
                cur = h
    preds = hs[-1][:, -1] @ params.w_out.T + params.b_out
    cache = ForwardCache(
        inputs=tuple(inputs),
        h=tuple(hs),
        c=tuple(cs),
        gates=tuple(gs),
        masks=tuple(masks),
        signature=params.signature(),
        mode=mode,
    )
    return preds, cache


def forward(params: ModelParams, sequence, mode: str = "eval", seed=None):
    """Single-sequence forward pass: (T, D) input -> ((M,) prediction, cache)."""
    seq = np.asarray(sequence, dtype=np.float64)
    if seq.ndim != 2:
        raise ShapeError(f"sequence must be (T, D), got shape {seq.shape}")
    preds, cache = forward_batch(params, seq[None], mode, seed)
    return preds[0], cache


def backward_batch(params: ModelParams, cache: ForwardCache, loss_grad) -> Gradients:
    """Exact gradients of (loss_grad . prediction) w.r.t. every parameter.

    loss_grad: (B, M), dLoss/dprediction per sample; parameter gradients
    are summed over the batch. Gradients flow through the dropout masks
    recorded in the cache.
    """
    if cache.signature != params.signature():
        raise InvalidArgumentError("cache does not match these model parameters")
    dpred = np.asarray(loss_grad, dtype=np.float64)
    B = cache.inputs[0].shape[0]
    if dpred.shape != (B, params.output_dim):
        raise ShapeError(
            f"loss_grad must be ({B}, {params.output_dim}), got {dpred.shape}"
        )
    h_top = cache.h[-1]
    dw_out = dpred.T @ h_top[:, -1]
    db_out = dpred.sum(axis=0)

    dh = np.zeros_like(h_top)
    dh[:, -1] = dpred @ params.w_out

    layer_grads = [None] * len(params.layers)
    for li in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[li]
        dx, dwx, dwh, db = lstm_layer_backward(
            cache.inputs[li], cache.h[li], cache.c[li], cache.gates[li],
            layer.wx, layer.wh, dh,
        )
        layer_grads[li] = (dwx, dwh, db)
        if li > 0:
            mask = cache.masks[li - 1]
            dh = dx if mask is None else dx * mask
    flat = []
    for g in layer_grads:
        flat.extend(g)
    flat.extend((dw_out, db_out))
    return Gradients(tuple(flat))


def backward(params: ModelParams, cache: ForwardCache, loss_grad) -> Gradients:
    """Single-sequence backward pass; loss_grad has shape (M,)."""
    dpred = np.asarray(loss_grad, dtype=np.float64)
    if dpred.ndim == 1:
        dpred = dpred[None]
    return backward_batch(params, cache, dpred)


@dataclass(frozen=True)
class AdamState:
    """Adam accumulators; shapes mirror the parameter tensors exactly."""

    m: tuple[np.ndarray, ...]
    v: tuple[np.ndarray, ...]
    step: int
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.step < 0:
            raise InvalidArgumentError("step counter must be non-negative")
        if self.lr <= 0 or not (0 <= self.beta1 < 1) or not (0 <= self.beta2 < 1) or self.eps <= 0:
            raise InvalidArgumentError("invalid Adam hyperparameters")

    @classmethod
    def init(cls, params: ModelParams, lr: float = 1e-3, beta1: float = 0.9,
             beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        zeros = tuple(np.zeros_like(a) for a in params.arrays())
        return cls(m=zeros, v=tuple(np.zeros_like(a) for a in params.arrays()),
                   step=0, lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(params: ModelParams, grads: Gradients, state: AdamState):
    """One bias-corrected Adam update. Returns (new params, new state)."""
    p_arrays = params.arrays()
    if len(grads.values) != len(p_arrays) or any(
        g.shape != p.shape for g, p in zip(grads.values, p_arrays)
    ):
        raise ShapeError("gradient shapes do not mirror the parameters")
    if len(state.m) != len(p_arrays) or any(
        m.shape != p.shape for m, p in zip(state.m, p_arrays)
    ):
        raise ShapeError("optimizer state shapes do not mirror the parameters")
    t = state.step + 1
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    new_m, new_v, new_p = [], [], []
    for p, g, m, v in zip(p_arrays, grads.values, state.m, state.v):
        m1 = state.beta1 * m + (1.0 - state.beta1) * g
        v1 = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        update = state.lr * (m1 / bc1) / (np.sqrt(v1 / bc2) + state.eps)
        new_m.append(m1)
        new_v.append(v1)
        new_p.append(p - update)
    next_state = AdamState(m=tuple(new_m), v=tuple(new_v), step=t,
                           lr=state.lr, beta1=state.beta1, beta2=state.beta2, eps=state.eps)
    return params.with_arrays(new_p), next_state


def params_to_bytes(params: ModelParams) -> bytes:
    out = [_MAGIC, struct.pack("<II", _VERSION, len(params.layers))]
    for d, h in params.layer_sizes:
        out.append(struct.pack("<II", d, h))
    out.append(struct.pack("<I", params.output_dim))
    out.append(struct.pack("<d", params.dropout))
    for a in params.arrays():
        out.append(np.ascontiguousarray(a).astype("<f8").tobytes())
    return b"".join(out)


def params_from_bytes(data: bytes) -> ModelParams:
    try:
        if data[:4] != _MAGIC:
            raise CheckpointError("bad magic; not a model checkpoint")
        off = 4
        version, n_layers = struct.unpack_from("<II", data, off)
        off += 8
        if version != _VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        if n_layers == 0:
            raise CheckpointError("checkpoint declares zero layers")
        sizes = []
        for _ in range(n_layers):
            d, h = struct.unpack_from("<II", data, off)
            off += 8
            sizes.append((d, h))
        (out_dim,) = struct.unpack_from("<I", data, off)
        off += 4
        (dropout,) = struct.unpack_from("<d", data, off)
        off += 8

        def take(shape):
            nonlocal off
            count = int(np.prod(shape))
            if off + count * 8 > len(data):
                raise CheckpointError("checkpoint truncated")
            arr = np.frombuffer(data, dtype="<f8", count=count, offset=off)
            off += count * 8
            return arr.reshape(shape)

        layers = []
        for d, h in sizes:
            wx = take((4 * h, d))
            wh = take((4 * h, h))
            b = take((4 * h,))
            layers.append(LstmLayerParams(wx, wh, b))
        w_out = take((out_dim, sizes[-1][1]))
        b_out = take((out_dim,))
        if off != len(data):
            raise CheckpointError("trailing bytes after checkpoint payload")
        return ModelParams(tuple(layers), w_out, b_out, dropout)
    except CheckpointError:
        raise
    except (struct.error, ValueError, IndexError, InvalidArgumentError) as exc:
        raise CheckpointError(f"corrupt checkpoint: {exc}") from exc


def save_model(params: ModelParams, path) -> None:
    with open(path, "wb") as fh:
        fh.write(params_to_bytes(params))


def load_model(path) -> ModelParams:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    return params_from_bytes(data)


def params_digest(params: ModelParams) -> str:
    """SHA-256 of the serialized parameters; stable identity for reports."""
    return hashlib.sha256(params_to_bytes(params)).hexdigest()
