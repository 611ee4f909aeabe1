"""Sampling-rate conversion for IMU signals and quaternion series.

Vector signals use Fourier-domain resampling per axis; quaternions use SLERP
between bracketing samples so every output stays on the unit sphere.
"""
from dataclasses import dataclass

import numpy as np
import scipy.signal

from . import quat
from .sequence import ImuSequence

GRID_KINDS = ("equidistant_ts", "equidistant_fs", "combined")


@dataclass(frozen=True)
class RateGridStrategy:
    kind: str = "equidistant_fs"
    count: int = 100
    f_min: float = 50.0
    f_max: float = 500.0

    def __post_init__(self):
        if self.kind not in GRID_KINDS:
            raise ValueError(f"unknown rate grid kind {self.kind!r}")
        if not 0 < self.f_min < self.f_max:
            raise ValueError("need 0 < f_min < f_max")
        if self.count < 2:
            raise ValueError("count must be at least 2")


def output_length(n, src_hz, dst_hz):
    return int(round(n * dst_hz / src_hz))


def resample_signal(x, src_hz, dst_hz):
    """DFT resampling of a uniformly sampled series (axis 0) from ``src_hz`` to ``dst_hz``."""
    x = np.asarray(x, dtype=float)
    if src_hz <= 0 or dst_hz <= 0:
        raise ValueError("rates must be positive")
    if len(x) < 2:
        raise ValueError("need at least two samples")
    if src_hz == dst_hz:
        return x.copy()
    m = output_length(len(x), src_hz, dst_hz)
    if m < 2:
        raise ValueError(f"resampling {len(x)} samples to {dst_hz} Hz leaves fewer than two")
    return scipy.signal.resample(x, m, axis=0)


def slerp_at(t_src, qs, t_dst):
    """Evaluate the piecewise-geodesic curve through ``(t_src, qs)`` at ``t_dst``.

    Times outside ``[t_src[0], t_src[-1]]`` are clamped to the end samples.
    """
    t_src = np.asarray(t_src, dtype=float)
    qs = np.asarray(qs, dtype=float)
    t_dst = np.clip(np.asarray(t_dst, dtype=float), t_src[0], t_src[-1])
    if len(t_src) == 1:
        return np.tile(quat.normalize(qs[0]), (len(t_dst), 1))
    idx = np.clip(np.searchsorted(t_src, t_dst, side="right") - 1, 0, len(t_src) - 2)
    span = t_src[idx + 1] - t_src[idx]
    frac = np.clip((t_dst - t_src[idx]) / span, 0.0, 1.0)
    out = quat.slerp(qs[idx], qs[idx + 1], frac)
    # exact copies where an output time hits an input sample
    out = np.where((frac == 0.0)[:, None], quat.normalize(qs[idx]), out)
    out = np.where((frac == 1.0)[:, None], quat.normalize(qs[idx + 1]), out)
    return out


def resample_quat(qs, src_hz, dst_hz, n_out=None):
    """SLERP-resample a uniformly sampled quaternion series starting at t = 0."""
    qs = np.asarray(qs, dtype=float)
    if src_hz == dst_hz and n_out in (None, len(qs)):
        return qs.copy()
    if n_out is None:
        n_out = output_length(len(qs), src_hz, dst_hz)
    return slerp_at(np.arange(len(qs)) / src_hz, qs, np.arange(n_out) / dst_hz)


def resample_sequence(seq, dst_hz):
    """Resample measurements, truth and validity mask of ``seq`` to ``dst_hz``."""
    if dst_hz == seq.rate_hz:
        return seq.copy()
    gyr = resample_signal(seq.gyr, seq.rate_hz, dst_hz)
    acc = resample_signal(seq.acc, seq.rate_hz, dst_hz)
    m = len(gyr)
    t_new = np.arange(m) / dst_hz
    t_old = np.arange(len(seq)) / seq.rate_hz
    q = valid = None
    if seq.quat is not None:
        filled = np.where(seq.valid[:, None], seq.quat, quat.IDENTITY)
        q = slerp_at(t_old, filled, t_new)
        # an output sample is valid only if both bracketing inputs are
        t_c = np.clip(t_new, t_old[0], t_old[-1])
        lo = np.clip(np.searchsorted(t_old, t_c, side="right") - 1, 0, len(t_old) - 1)
        hi = np.clip(lo + 1, 0, len(t_old) - 1)
        on_grid = np.isclose(t_c, t_old[lo], rtol=0, atol=1e-12)
        valid = seq.valid[lo] & (on_grid | seq.valid[hi])
        q = np.where(valid[:, None], q, np.nan)
    out = ImuSequence(
        t=t_new, gyr=gyr, acc=acc, quat=q, valid=valid, rate_hz=float(dst_hz),
        name=seq.name, dataset=seq.dataset,
        gyr_bias=None if seq.gyr_bias is None else seq.gyr_bias.copy(),
        meta=dict(seq.meta),
    )
    if "rest_prefix_samples" in seq.meta:
        out.meta["rest_prefix_samples"] = int(round(seq.meta["rest_prefix_samples"] * dst_hz / seq.rate_hz))
    return out


def rate_grid(strategy):
    """Sorted, de-duplicated list of sampling rates for multi-rate training."""
    s = strategy
    if s.kind == "equidistant_fs":
        rates = np.linspace(s.f_min, s.f_max, s.count)
    elif s.kind == "equidistant_ts":
        rates = 1.0 / np.linspace(1.0 / s.f_max, 1.0 / s.f_min, s.count)
    else:
        half = max(s.count // 2, 2)
        rates = np.concatenate([
            np.linspace(s.f_min, s.f_max, half),
            1.0 / np.linspace(1.0 / s.f_max, 1.0 / s.f_min, half),
        ])
    rates = np.clip(rates, s.f_min, s.f_max)
    return sorted(set(float(r) for r in rates))


def jitr_wrap(estimator, seq, native_hz):
    """Run ``estimator`` (a callable ``ImuSequence -> (N, 4)``) at ``native_hz`` on data at any rate.

    The measurements are resampled to the native rate, the estimator runs once
    over the whole resampled sequence and its output is SLERP-resampled back
    onto the input timestamps.
    """
    if native_hz <= 0:
        raise ValueError("native rate must be positive")
    if seq.rate_hz == native_hz:
        return np.asarray(estimator(seq))
    inner = resample_sequence(seq, native_hz)
    q_native = np.asarray(estimator(inner))
    return slerp_at(np.arange(len(inner)) / native_hz, q_native, np.arange(len(seq)) / seq.rate_hz)
