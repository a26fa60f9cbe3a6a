"""Joint training of the denoiser and the per-position schedule."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import denoiser
from .denoiser import DenoiserConfig, DenoiserParams
from .forward_process import check_clean
from .losses import LossEstimate, mc_integrand, sample_times
from .schedule import MultivariateSchedule
from .schedule_grad import rloo_estimates

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 256
    lr_model: float = 1e-3
    lr_schedule: float = 1e-2
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    rloo_k: int = 4
    seed: int = 0
    learn_schedule: bool = True
    time_conditioned: bool = False
    n_t_per_example: int = 1
    val_fraction: float = 0.1
    hidden_dims: tuple[int, ...] = (128,)
    activation: str = "tanh"
    val_n_t: int = 64
    val_seed: int = 2024

    def __post_init__(self):
        self.adam_betas = tuple(float(b) for b in self.adam_betas)
        self.hidden_dims = tuple(int(h) for h in self.hidden_dims)
        for name in ("epochs", "batch_size", "n_t_per_example", "val_n_t"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.lr_model <= 0 or self.lr_schedule <= 0 or self.adam_eps <= 0:
            raise ValueError("learning rates and adam_eps must be positive")
        if self.rloo_k < 2:
            raise ValueError("rloo_k must be >= 2")
        if not 0.0 < self.val_fraction < 0.5:
            raise ValueError("val_fraction must lie in (0, 0.5)")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["adam_betas"] = list(self.adam_betas)
        d["hidden_dims"] = list(self.hidden_dims)
        return d


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_std_error: float
    schedule: list[float]


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1
    diverged: bool = False

    @property
    def best_val_loss(self) -> float:
        return min((r.val_loss for r in self.records), default=math.inf)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(asdict(r)) + "\n" for r in self.records)


class Adam:
    def __init__(self, size: int, lr: float, betas=(0.9, 0.999), eps: float = 1e-8):
        self.lr, self.eps = lr, eps
        self.b1, self.b2 = betas
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.step_count = 0

    def step(self, x: np.ndarray, grad: np.ndarray) -> None:
        self.step_count += 1
        self.m = self.b1 * self.m + (1 - self.b1) * grad
        self.v = self.b2 * self.v + (1 - self.b2) * grad * grad
        mhat = self.m / (1 - self.b1**self.step_count)
        vhat = self.v / (1 - self.b2**self.step_count)
        x -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def evaluate_nll(
    params: DenoiserParams,
    ms: MultivariateSchedule,
    data,
    rng: np.random.Generator,
    n_t: int,
) -> LossEstimate:
    """Mean continuous-time loss over ``data`` rows.

    Every row gets its own ``n_t`` importance-sampled times and one mask
    per time.
    """
    x0 = check_clean(np.atleast_2d(data))
    N, L = x0.shape
    draws = sample_times(ms, n_t, rng, size=(N,))
    flat = type(draws)(draws.log_t.reshape(-1), draws.inv_tq.reshape(-1))
    xs = np.repeat(x0, n_t, axis=0)
    samples = mc_integrand(params, ms, xs, flat, rng).reshape(N, n_t).mean(axis=1)
    return LossEstimate.from_samples(samples)


def split_rows(rows: np.ndarray, val_fraction: float, rng: np.random.Generator):
    perm = rng.permutation(rows.shape[0])
    n_val = max(1, int(round(val_fraction * rows.shape[0])))
    if n_val >= rows.shape[0]:
        raise ValueError("dataset too small to hold out a validation split")
    return rows[perm[n_val:]], rows[perm[:n_val]]


def train(config: TrainConfig, rows, vocab_sizes, init_schedule: MultivariateSchedule | None = None):
    """Train a denoiser (and optionally its schedule) on encoded ``rows``.

    Returns ``(params, schedule, history)`` for the epoch with the lowest
    validation loss.  The run is a pure function of the config and data.
    """
    rows = check_clean(np.atleast_2d(rows))
    if rows.shape[0] == 0:
        raise ValueError("dataset is empty")
    vocab_sizes = tuple(int(v) for v in vocab_sizes)
    if rows.shape[1] != len(vocab_sizes) or np.any(rows >= np.asarray(vocab_sizes)):
        raise ValueError("rows are inconsistent with vocab_sizes")

    rng = np.random.default_rng(config.seed)
    train_rows, val_rows = split_rows(rows, config.val_fraction, rng)
    net_cfg = DenoiserConfig(vocab_sizes, config.hidden_dims, config.time_conditioned, config.activation)
    params = denoiser.init(net_cfg, rng)
    ms = init_schedule.copy() if init_schedule is not None else MultivariateSchedule.linear(len(vocab_sizes))
    opt_model = Adam(params.flat.size, config.lr_model, config.adam_betas, config.adam_eps)
    opt_sched = Adam(len(ms), config.lr_schedule, config.adam_betas, config.adam_eps)

    history = TrainHistory()
    best = (params.copy(), ms.copy())
    n_train = train_rows.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(n_train)
        total, count = 0.0, 0
        for lo in range(0, n_train, config.batch_size):
            x0 = train_rows[order[lo : lo + config.batch_size]]
            draws = sample_times(ms, config.n_t_per_example, rng, size=(x0.shape[0],))
            loss_g, grad_g, g_model = rloo_estimates(params, ms, x0, draws, config.rloo_k, rng, model_grad=True)
            batch_loss = float(loss_g.mean())
            if not (math.isfinite(batch_loss) and np.all(np.isfinite(g_model))):
                log.warning("non-finite loss at epoch %d; stopping", epoch)
                history.diverged = True
                break
            opt_model.step(params.flat, g_model)
            if config.learn_schedule:
                g_sched = grad_g.reshape(-1, len(ms)).mean(axis=0)
                if np.all(np.isfinite(g_sched)):
                    opt_sched.step(ms.log_weights, g_sched)
                    ms.clamp()
            total += batch_loss * x0.shape[0]
            count += x0.shape[0]
        if history.diverged:
            break

        val = evaluate_nll(params, ms, val_rows, np.random.default_rng(config.val_seed), config.val_n_t)
        history.records.append(
            EpochRecord(epoch, total / count, val.value, val.std_error, ms.weights.tolist())
        )
        log.info("epoch %d train %.4f val %.4f w %s", epoch, total / count, val.value, np.round(ms.weights, 3))
        if val.value <= history.best_val_loss:
            history.best_epoch = epoch
            best = (params.copy(), ms.copy())
    return best[0], best[1], history


# -- checkpoints -----------------------------------------------------------


def save_checkpoint(path, params: DenoiserParams, ms: MultivariateSchedule) -> None:
    data = {
        "config": params.config.to_dict(),
        "params": params.flat.tolist(),
        "schedule": ms.to_dict(),
        "version": CHECKPOINT_VERSION,
    }
    Path(path).write_text(json.dumps(data))


def load_checkpoint(path) -> tuple[DenoiserParams, MultivariateSchedule]:
    data = json.loads(Path(path).read_text())
    if data.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {data.get('version')}")
    cfg = DenoiserConfig.from_dict(data["config"])
    return DenoiserParams(cfg, np.asarray(data["params"])), MultivariateSchedule.from_dict(data["schedule"])
