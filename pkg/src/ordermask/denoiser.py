"""Mean-parameterized denoiser: a small MLP with one softmax head per position.

The input is the concatenation of per-position one-hots of size ``V_l + 1``
(the extra slot encodes MASK), optionally followed by the time ``t``.
Observed positions are carried over: their output is the point mass on the
observed token, so they never contribute to a loss or its gradient.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .forward_process import MASK

ACTIVATIONS = ("tanh", "relu")


@dataclass(frozen=True)
class DenoiserConfig:
    vocab_sizes: tuple[int, ...]
    hidden_dims: tuple[int, ...] = (128,)
    time_conditioned: bool = False
    activation: str = "tanh"

    def __post_init__(self):
        object.__setattr__(self, "vocab_sizes", tuple(int(v) for v in self.vocab_sizes))
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if not self.vocab_sizes or min(self.vocab_sizes) < 1:
            raise ValueError("vocab_sizes must be a nonempty list of positive ints")
        if not self.hidden_dims or min(self.hidden_dims) < 1:
            raise ValueError("hidden_dims must be a nonempty list of positive ints")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")

    @property
    def length(self) -> int:
        return len(self.vocab_sizes)

    @property
    def input_dim(self) -> int:
        return sum(v + 1 for v in self.vocab_sizes) + int(self.time_conditioned)

    @property
    def output_dim(self) -> int:
        return sum(self.vocab_sizes)

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        dims = [self.input_dim, *self.hidden_dims, self.output_dim]
        return list(zip(dims[:-1], dims[1:]))

    @property
    def parameter_count(self) -> int:
        return sum(i * o + o for i, o in self.layer_shapes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["vocab_sizes"] = list(self.vocab_sizes)
        d["hidden_dims"] = list(self.hidden_dims)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DenoiserConfig":
        return cls(
            tuple(d["vocab_sizes"]),
            tuple(d.get("hidden_dims", (128,))),
            bool(d.get("time_conditioned", False)),
            d.get("activation", "tanh"),
        )


@dataclass
class DenoiserParams:
    """Network weights stored in one flat float64 vector."""

    config: DenoiserConfig
    flat: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.flat = np.asarray(self.flat, dtype=np.float64)
        if self.flat.shape != (self.config.parameter_count,):
            raise ValueError(
                f"expected {self.config.parameter_count} parameters, got {self.flat.shape}"
            )

    @property
    def parameter_count(self) -> int:
        return self.flat.size

    def layers(self, flat: np.ndarray | None = None) -> list[tuple[np.ndarray, np.ndarray]]:
        """(W, b) views into ``flat`` (defaults to the stored vector)."""
        flat = self.flat if flat is None else flat
        out, pos = [], 0
        for i, o in self.config.layer_shapes:
            W = flat[pos : pos + i * o].reshape(i, o)
            pos += i * o
            out.append((W, flat[pos : pos + o]))
            pos += o
        return out

    def copy(self) -> "DenoiserParams":
        return DenoiserParams(self.config, self.flat.copy())


def init(config: DenoiserConfig, rng: np.random.Generator) -> DenoiserParams:
    """Fan-in scaled uniform weights, zero biases."""
    params = DenoiserParams(config, np.zeros(config.parameter_count))
    for W, _ in params.layers():
        bound = 1.0 / np.sqrt(W.shape[0])
        W[...] = rng.uniform(-bound, bound, size=W.shape)
    return params


def zeros(config: DenoiserConfig) -> DenoiserParams:
    return DenoiserParams(config, np.zeros(config.parameter_count))


def _offsets(sizes) -> np.ndarray:
    return np.concatenate([[0], np.cumsum(sizes)])


class _Pass:
    """Activations of one batched forward pass, kept for backprop."""

    def __init__(self, params: DenoiserParams, x, t):
        cfg = params.config
        x = np.asarray(x, dtype=np.int64)
        self.single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != cfg.length:
            raise ValueError(f"expected sequences of length {cfg.length}, got {x.shape[1]}")
        B = x.shape[0]
        self.x = x
        self.masked = x == MASK

        V = np.asarray(cfg.vocab_sizes)
        idx = np.where(self.masked, V, x) + _offsets(V + 1)[:-1]
        inp = np.zeros((B, cfg.input_dim))
        np.put_along_axis(inp, idx, 1.0, axis=1)
        if cfg.time_conditioned:
            inp[:, -1] = np.broadcast_to(np.asarray(t, dtype=np.float64), (B,))
        self.acts = [inp]
        self.pre = []
        layers = params.layers()
        h = inp
        for W, b in layers[:-1]:
            z = h @ W + b
            h = np.tanh(z) if cfg.activation == "tanh" else np.maximum(z, 0.0)
            self.pre.append(z)
            self.acts.append(h)
        W, b = layers[-1]
        logits = h @ W + b
        if not np.all(np.isfinite(logits)):
            raise FloatingPointError("non-finite activations in denoiser forward")

        self.offsets = _offsets(V)
        self.logp = []
        for pos in range(cfg.length):
            seg = logits[:, self.offsets[pos] : self.offsets[pos + 1]]
            seg = seg - seg.max(axis=1, keepdims=True)
            self.logp.append(seg - np.log(np.exp(seg).sum(axis=1, keepdims=True)))

    def probs(self) -> list[np.ndarray]:
        """Per-position categorical outputs with carry-over applied."""
        out = []
        for pos, lp in enumerate(self.logp):
            p = np.exp(lp)
            obs = ~self.masked[:, pos]
            if obs.any():
                p[obs] = 0.0
                p[obs, self.x[obs, pos]] = 1.0
            out.append(p)
        return out

    def backward(self, params: DenoiserParams, dlogits: np.ndarray) -> np.ndarray:
        cfg = params.config
        grad = np.zeros_like(params.flat)
        glayers = params.layers(grad)
        layers = params.layers()
        delta = dlogits
        for k in range(len(layers) - 1, -1, -1):
            gW, gb = glayers[k]
            gW[...] = self.acts[k].T @ delta
            gb[...] = delta.sum(axis=0)
            if k == 0:
                break
            delta = delta @ layers[k][0].T
            if cfg.activation == "tanh":
                delta *= 1.0 - self.acts[k] ** 2
            else:
                delta *= self.pre[k - 1] > 0.0
        return grad


def forward(params: DenoiserParams, x, t=0.0) -> list[np.ndarray]:
    """Per-position distributions over clean tokens.

    ``x`` is a sequence ``(L,)`` or batch ``(B, L)``; ``t`` is a scalar or
    ``(B,)`` and is ignored unless the network is time conditioned.
    """
    fp = _Pass(params, x, t)
    probs = fp.probs()
    return [p[0] for p in probs] if fp.single else probs


def log_probs(params: DenoiserParams, x, t=0.0) -> list[np.ndarray]:
    """Log of :func:`forward` (``-inf`` off the carried-over token)."""
    with np.errstate(divide="ignore"):
        return [np.log(p) for p in forward(params, x, t)]


def backward(params: DenoiserParams, x, t, upstream_grad) -> np.ndarray:
    """Gradient of ``sum(upstream_grad * log_probs)`` w.r.t. the flat params.

    Carried-over positions have constant outputs and contribute nothing.
    """
    fp = _Pass(params, x, t)
    B = fp.x.shape[0]
    dlogits = np.zeros((B, params.config.output_dim))
    for pos, lp in enumerate(fp.logp):
        g = np.asarray(upstream_grad[pos], dtype=np.float64).reshape(B, -1)
        d = g - np.exp(lp) * g.sum(axis=1, keepdims=True)
        d[~fp.masked[:, pos]] = 0.0
        dlogits[:, fp.offsets[pos] : fp.offsets[pos + 1]] = d
    return fp.backward(params, dlogits)


def target_log_probs(params: DenoiserParams, x, x0, t=0.0) -> np.ndarray:
    """``log mu_l^{x0_l}(x, t)`` for every position, shape ``(B, L)``.

    Observed positions score 0 (carry-over of the true token).
    """
    return _target(params, x, x0, t, None)[0]


def target_log_probs_and_grad(params: DenoiserParams, x, x0, t, coef):
    """Target log-probs and the gradient of ``sum(coef * target_log_probs)``."""
    return _target(params, x, x0, t, coef)


def _target(params, x, x0, t, coef):
    fp = _Pass(params, x, t)
    x0 = np.atleast_2d(np.asarray(x0, dtype=np.int64))
    B, L = fp.x.shape
    x0 = np.broadcast_to(x0, (B, L))
    rows = np.arange(B)
    out = np.zeros((B, L))
    dlogits = None if coef is None else np.zeros((B, params.config.output_dim))
    if coef is not None:
        coef = np.broadcast_to(np.asarray(coef, dtype=np.float64), (B, L))
    for pos, lp in enumerate(fp.logp):
        m = fp.masked[:, pos]
        out[:, pos] = np.where(m, lp[rows, x0[:, pos]], 0.0)
        if coef is not None:
            c = np.where(m, coef[:, pos], 0.0)
            d = -np.exp(lp) * c[:, None]
            d[rows, x0[:, pos]] += c
            dlogits[:, fp.offsets[pos] : fp.offsets[pos + 1]] = d
    if coef is None:
        return out, None
    return out, fp.backward(params, dlogits)
