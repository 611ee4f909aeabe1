"""Desk-scale supervised training of the GRU estimator.

Windows are cut from (optionally multi-rate resampled) training sequences,
augmented on the fly, and split into chunks for truncated backpropagation
through time: gradients flow only inside a chunk, while the hidden state is
carried into the next chunk of the same window. Parameters are updated with
Adam under a per-epoch cosine-annealed learning rate.
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from .augment import AugmentConfig, augment_sequence, standardize_fit
from .gru import GruNetwork, run_network
from .imu_sim import ErrorSpec, inject_errors
from .quat import IDENTITY, _err_wz
from .resample import RateGridStrategy, rate_grid, resample_sequence

log = logging.getLogger(__name__)

DEG = np.pi / 180.0


class SkipWindow(Exception):
    """Raised when a loss window has no valid ground truth."""


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    window_len: int = 800  # 8 s at 100 Hz
    stride: int = 400
    tbptt_chunk: int = 200  # 2 s at 100 Hz
    batch_size: int = 16
    epochs: int = 20
    max_lr: float = 3e-3
    grad_clip: float = 10.0
    clamp_eps: float = 1e-12
    seed: int = 0
    augment: Optional[AugmentConfig] = field(default_factory=AugmentConfig)
    rate_strategy: Optional[RateGridStrategy] = None
    final_lr_ratio: float = 1e-3
    val_bias_std: float = 0.5 * DEG
    keep_best: bool = True

    def __post_init__(self):
        if isinstance(self.augment, dict):
            self.augment = AugmentConfig(**self.augment)
        if isinstance(self.rate_strategy, dict):
            self.rate_strategy = RateGridStrategy(**self.rate_strategy)
        if not 0 < self.tbptt_chunk <= self.window_len:
            raise ValueError("need 0 < tbptt_chunk <= window_len")
        if not 0 < self.stride <= self.window_len:
            raise ValueError("need 0 < stride <= window_len")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be positive")
        if not self.max_lr > 0 or not self.grad_clip > 0:
            raise ValueError("max_lr and grad_clip must be positive")

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainHistory:
    train_loss: List[float] = field(default_factory=list)
    val_rmse_deg: List[float] = field(default_factory=list)
    lr: List[float] = field(default_factory=list)


# --- data preparation -------------------------------------------------------


def make_windows(sequences, window_len, stride):
    """Cut every sequence into windows of ``window_len`` samples advancing by ``stride``."""
    windows = []
    for seq in sequences:
        if len(seq) < window_len:
            raise ValueError(f"sequence {seq.name!r} ({len(seq)} samples) shorter than window_len {window_len}")
        for start in range(0, len(seq) - window_len + 1, stride):
            w = seq.slice(start, start + window_len)
            w.meta = {"source": seq.name, "offset": start, "rate_hz": seq.rate_hz}
            windows.append(w)
    return windows


def cosine_lr(epoch, epochs, max_lr, final_ratio=1e-3):
    """Cosine annealing from ``max_lr`` (first epoch) to ``final_ratio·max_lr`` (last epoch)."""
    if epochs == 1:
        return max_lr
    c = 0.5 * (1.0 + math.cos(math.pi * epoch / (epochs - 1)))
    return max_lr * (final_ratio + (1.0 - final_ratio) * c)


# --- loss -------------------------------------------------------------------


def _prepare(pred, truth, mask):
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if pred.shape != truth.shape or pred.shape[:-1] != mask.shape:
        raise ValueError("pred, truth and mask lengths disagree")
    count = int(mask.sum())
    if count == 0:
        raise SkipWindow("no valid samples in window")
    truth = np.where(mask[..., None], truth, IDENTITY)
    pred = np.where(mask[..., None], pred, IDENTITY)
    norm = np.linalg.norm(pred, axis=-1, keepdims=True)
    return pred, pred / norm, norm, truth, mask, count


def loss_mse_att(pred, truth, mask, clamp_eps=1e-12):
    """Mean squared attitude error (rad²) over valid samples.

    ``pred`` may be unnormalized; the arccos argument is capped at
    ``1 - clamp_eps`` so the gradient stays finite.
    """
    _, p, _, truth, mask, count = _prepare(pred, truth, mask)
    w, z = _err_wz(truth, p)
    a = np.minimum(np.sqrt(w * w + z * z), 1.0 - clamp_eps)
    e = 2.0 * np.arccos(a)
    return float(np.sum(np.where(mask, e * e, 0.0)) / count)


def loss_gradient(pred, truth, mask, clamp_eps=1e-12):
    """Gradient of :func:`loss_mse_att` with respect to the (unnormalized) ``pred`` components."""
    raw, p, norm, truth, mask, count = _prepare(pred, truth, mask)
    w, z = _err_wz(truth, p)
    s = np.sqrt(w * w + z * z)
    a = np.minimum(s, 1.0 - clamp_eps)
    e = 2.0 * np.arccos(a)
    active = mask & (s < 1.0 - clamp_eps) & (s > 1e-300)
    s_safe = np.where(active, s, 1.0)
    dl_da = np.where(active, (2.0 * e / count) * (-2.0 / np.sqrt(1.0 - a * a)), 0.0)
    gw = dl_da * w / s_safe
    gz = dl_da * z / s_safe
    a0, a1, a2, a3 = np.moveaxis(truth, -1, 0)
    # ∂w/∂p = (a0, a1, a2, a3), ∂z/∂p = (a3, a2, −a1, −a0)
    dp = np.stack([gw * a0 + gz * a3, gw * a1 + gz * a2, gw * a2 - gz * a1, gw * a3 - gz * a0], axis=-1)
    radial = np.sum(dp * p, axis=-1, keepdims=True)
    return (dp - p * radial) / norm


# --- optimizer --------------------------------------------------------------


class Adam:
    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads, lr):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, p in self.params.items():
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            p -= lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def clip_gradients(grads, max_norm):
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


# --- training ---------------------------------------------------------------


def _batch_arrays(net, windows):
    x = np.stack([net.features(w.gyr, w.acc, w.dt) for w in windows])
    truth = np.stack([np.where(w.valid[:, None], w.quat, IDENTITY) for w in windows])
    mask = np.stack([w.valid for w in windows])
    return x, truth, mask


def train_step_chunks(net, x, truth, mask, cfg, optimizer, lr):
    """TBPTT over one batch; returns the valid-sample-weighted mean loss."""
    states = net.initial_states(x.shape[0])
    total, weight = 0.0, 0
    for start in range(0, x.shape[1], cfg.tbptt_chunk):
        sl = slice(start, start + cfg.tbptt_chunk)
        xc = np.ascontiguousarray(x[:, sl])
        y, final, cache = net.forward_batch(xc, states)
        states = final
        try:
            loss = loss_mse_att(y, truth[:, sl], mask[:, sl], cfg.clamp_eps)
        except SkipWindow:
            continue
        if not math.isfinite(loss):
            return loss
        dy = loss_gradient(y, truth[:, sl], mask[:, sl], cfg.clamp_eps)
        grads = net.backward_batch(dy, cache)
        clip_gradients(grads, cfg.grad_clip)
        optimizer.step(grads, lr)
        n = int(mask[:, sl].sum())
        total += loss * n
        weight += n
    return total / weight if weight else 0.0


def training_copies(net, sequences, cfg):
    """Sequences at the rates the network trains on."""
    if net.time_aware and cfg.rate_strategy is not None:
        rates = rate_grid(cfg.rate_strategy)
        return [resample_sequence(s, r) for s in sequences for r in rates]
    if not net.time_aware:
        return [resample_sequence(s, net.native_rate_hz) for s in sequences]
    return list(sequences)


def validation_set(sequences, bias_std, seed):
    """Each sequence once as-is and once with a random constant gyroscope bias."""
    out = []
    for i, s in enumerate(sequences):
        out.append(s)
        out.append(inject_errors(s, ErrorSpec(gyr_bias_std=bias_std, seed=seed + 1000 + i)))
    return out


def validation_rmse(net, sequences):
    from .evaluation import rmse_deg

    return float(np.mean([rmse_deg(run_network(net, s), s.quat, s.valid) for s in sequences]))


def train(net_init, train_data, val_data, cfg, progress=None):
    """Fit ``net_init`` (left untouched) and return ``(network, history)``."""
    net = net_init.copy()
    rng = np.random.default_rng(cfg.seed)
    copies = training_copies(net, train_data, cfg)
    windows = make_windows(copies, cfg.window_len, cfg.stride)
    if not windows:
        raise ValueError("no training windows")

    aug = cfg.augment
    fit_rng = np.random.default_rng([cfg.seed, 7])
    fit_set = [augment_sequence(w, aug, fit_rng) if aug else w for w in windows]
    net.standardization = standardize_fit(fit_set)

    val_set = validation_set(val_data, cfg.val_bias_std, cfg.seed) if val_data else []
    optimizer = Adam(net.parameters())
    history = TrainHistory()
    best = (math.inf, None)
    for epoch in range(cfg.epochs):
        lr = cosine_lr(epoch, cfg.epochs, cfg.max_lr, cfg.final_lr_ratio)
        order = rng.permutation(len(windows))
        total, count = 0.0, 0
        for b, start in enumerate(range(0, len(order), cfg.batch_size)):
            batch = [windows[i] for i in order[start:start + cfg.batch_size]]
            if aug:
                batch = [augment_sequence(w, aug, rng) for w in batch]
            x, truth, mask = _batch_arrays(net, batch)
            loss = train_step_chunks(net, x, truth, mask, cfg, optimizer, lr)
            if not math.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss in epoch {epoch}, batch {b}")
            total += loss
            count += 1
        history.train_loss.append(total / count)
        history.lr.append(lr)
        val = validation_rmse(net, val_set) if val_set else float("nan")
        history.val_rmse_deg.append(val)
        log.info("epoch %d lr %.2e train loss %.3e val rmse %.3f deg", epoch, lr, total / count, val)
        if progress:
            progress(epoch, history)
        if val_set and cfg.keep_best and val < best[0]:
            best = (val, net.copy())
    if val_set and cfg.keep_best and best[1] is not None:
        return best[1], history
    return net, history
