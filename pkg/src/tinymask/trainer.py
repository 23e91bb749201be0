"""Float32 training: BCE loss, Adam, reduce-on-plateau and best-checkpoint retention."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DataError, NumericError, ShapeMismatch
from .netgraph import Network, backward, build_network, forward

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7
    plateau_factor: float = 0.2
    plateau_patience: int = 5
    max_epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    loss_clamp_eps: float = 1e-7

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ConfigError("beta1 and beta2 must lie in (0, 1)")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if not 0 < self.plateau_factor < 1:
            raise ConfigError("plateau_factor must lie in (0, 1)")
        if self.plateau_patience < 1 or self.max_epochs < 1 or self.batch_size < 1:
            raise ConfigError("patience, max_epochs and batch_size must be >= 1")


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0

    @classmethod
    def zeros_like(cls, params):
        return cls({k: np.zeros_like(p) for k, p in params.items()}, {k: np.zeros_like(p) for k, p in params.items()})


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    lr: float


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    @property
    def val_acc(self):
        return [r.val_acc for r in self.records]

    def best_epoch(self):
        """1-based epoch with the highest val accuracy (earliest on ties)."""
        acc = self.val_acc
        return int(np.argmax(acc)) + 1

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "train_acc", "val_loss", "val_acc", "lr"])
        for r in self.records:
            w.writerow([r.epoch, f"{r.train_loss:.6f}", f"{r.train_acc:.4f}", f"{r.val_loss:.6f}", f"{r.val_acc:.4f}", repr(r.lr)])
        return buf.getvalue()


def bce_loss(y, p, eps=1e-7):
    """Mean binary cross-entropy with ``p`` clamped into ``[eps, 1 - eps]``."""
    y = np.asarray(y, dtype=np.float64)
    p = np.clip(np.asarray(p, dtype=np.float64), eps, 1 - eps)
    loss = -(y * np.log(p) + (1 - y) * np.log1p(-p))
    return float(np.mean(loss))


def bce_grad(y, p, eps=1e-7):
    """d(mean BCE)/dp, zero where the clamp is active."""
    y = np.asarray(y, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    pc = np.clip(p, eps, 1 - eps)
    g = (-(y / pc) + (1 - y) / (1 - pc)) / p.size
    return np.where((p < eps) | (p > 1 - eps), 0.0, g)


def adam_step(params, grads, state: AdamState, cfg: TrainConfig):
    """One bias-corrected Adam update; returns new (params, state) without mutating inputs."""
    if params.keys() != grads.keys():
        raise ShapeMismatch("params and grads have different keys")
    t = state.t + 1
    b1, b2 = cfg.beta1, cfg.beta2
    c1 = 1 - b1**t
    c2 = 1 - b2**t
    new_p, new_m, new_v = {}, {}, {}
    for k, w in params.items():
        g = grads[k]
        if g.shape != w.shape:
            raise ShapeMismatch(f"{k}: grad shape {g.shape} != param shape {w.shape}")
        m = b1 * state.m[k] + (1 - b1) * g
        v = b2 * state.v[k] + (1 - b2) * g * g
        m_hat = m / c1
        v_hat = v / c2
        new_p[k] = (w - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)).astype(w.dtype)
        new_m[k] = m.astype(w.dtype)
        new_v[k] = v.astype(w.dtype)
    return new_p, AdamState(new_m, new_v, t)


def plateau_lr(history, cfg: TrainConfig):
    """Learning rate for the next epoch, replaying the plateau rule over ``history``.

    Accepts a TrainHistory or a plain sequence of val accuracies. Improvement
    means strictly greater than the best so far; after ``patience`` epochs
    without one the rate is multiplied by ``plateau_factor`` and the wait resets.
    """
    accs = history.val_acc if isinstance(history, TrainHistory) else list(history)
    lr = cfg.learning_rate
    best = -np.inf
    wait = 0
    for acc in accs:
        if acc > best:
            best = acc
            wait = 0
        else:
            wait += 1
            if wait >= cfg.plateau_patience:
                lr *= cfg.plateau_factor
                wait = 0
    return lr


def _as_dataset(ds, name):
    x, y = ds
    x = np.asarray(x, dtype=np.float32)
    y = np.asarray(y).reshape(-1)
    if len(x) == 0:
        raise DataError(f"{name} set is empty")
    if len(x) != len(y):
        raise DataError(f"{name} set: {len(x)} images but {len(y)} labels")
    if not np.isin(y, (0, 1)).all():
        raise DataError(f"{name} labels must be 0 or 1")
    return x, y.astype(np.float32)


def predict_proba(net, params, x, batch_size=256):
    out = [forward(net, params, x[i : i + batch_size]).p for i in range(0, len(x), batch_size)]
    return np.concatenate(out)


def evaluate(net, params, x, y, eps=1e-7, batch_size=256):
    """(mean BCE loss, accuracy) with the p >= 0.5 -> Mask rule."""
    p = predict_proba(net, params, x, batch_size)
    return bce_loss(y, p, eps), float(np.mean((p >= 0.5) == (y == 1)))


def train(cfg: TrainConfig, net_cfg, train_set, val_set, on_epoch=None):
    """Train from scratch; returns (best params by val accuracy, TrainHistory).

    ``train_set`` and ``val_set`` are ``(images NHWC float32, labels)`` pairs.
    """
    x_tr, y_tr = _as_dataset(train_set, "train")
    x_va, y_va = _as_dataset(val_set, "val")
    net = net_cfg if isinstance(net_cfg, Network) else None
    if net is None:
        net, params = build_network(net_cfg, cfg.seed)
    else:
        params = net.init_params(cfg.seed)
    state = AdamState.zeros_like(params)
    rng = np.random.default_rng(cfg.seed)
    history = TrainHistory()
    best_params, best_acc = None, -np.inf
    lr = cfg.learning_rate

    for epoch in range(1, cfg.max_epochs + 1):
        step_cfg = _with_lr(cfg, lr)
        order = rng.permutation(len(x_tr))
        losses, correct = [], 0
        for b, start in enumerate(range(0, len(order), cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            xb, yb = x_tr[idx], y_tr[idx]
            rec = forward(net, params, xb, "train", seed=int(rng.integers(2**62)))
            loss = bce_loss(yb, rec.p, cfg.loss_clamp_eps)
            if not np.isfinite(loss):
                raise NumericError(f"non-finite loss at epoch {epoch}, batch {b}")
            grads = backward(net, params, rec, bce_grad(yb, rec.p, cfg.loss_clamp_eps))
            params, state = adam_step(params, grads, state, step_cfg)
            losses.append(loss * len(idx))
            correct += int(np.sum((rec.p >= 0.5) == (yb == 1)))
        val_loss, val_acc = evaluate(net, params, x_va, y_va, cfg.loss_clamp_eps)
        rec = EpochRecord(epoch, sum(losses) / len(x_tr), correct / len(x_tr), val_loss, val_acc, lr)
        history.records.append(rec)
        log.info("epoch %d loss %.4f acc %.4f val_loss %.4f val_acc %.4f lr %g", *vars(rec).values())
        if on_epoch is not None:
            on_epoch(rec)
        if val_acc > best_acc:
            best_acc = val_acc
            best_params = {k: v.copy() for k, v in params.items()}
        lr = plateau_lr(history, cfg)
    return best_params, history


def _with_lr(cfg, lr):
    return cfg if lr == cfg.learning_rate else replace(cfg, learning_rate=lr)
