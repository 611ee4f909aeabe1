"""Synthetic trajectories with exact ground truth and consistent ideal IMU readings.

Sample ``k`` of a sequence holds the angular rate over the interval that ends
at ``t[k]``; ``truth[k]`` is the orientation at ``t[k]``. The strapdown
recursion ``q[k] = q[k-1] ⊗ exp(gyr[k]·dt[k]/2)`` therefore reproduces the
truth of noiseless generated data up to rounding.

Randomness comes from numpy's ``PCG64`` generator (``numpy.random.default_rng``)
seeded with the integer seeds carried by the profile and error specs.
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from . import quat
from .sequence import GRAVITY, ImuSequence

PROFILE_KINDS = ("rest", "constant_rate", "sinusoidal_multi_axis", "random_smooth")


@dataclass(frozen=True)
class MotionProfile:
    kind: str = "random_smooth"
    amplitude: float = 1.0  # rad/s, peak per axis
    frequency_band: Tuple[float, float] = (0.05, 1.0)  # Hz
    translation_accel_amplitude: float = 0.0  # m/s², peak per earth axis
    duration: float = 10.0  # s
    seed: int = 0
    axis: Tuple[float, float, float] = (0.0, 0.0, 1.0)  # constant_rate only

    def validate(self):
        if self.kind not in PROFILE_KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}; expected one of {PROFILE_KINDS}")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.amplitude < 0 or self.translation_accel_amplitude < 0:
            raise ValueError("amplitudes must be non-negative")
        lo, hi = self.frequency_band
        if not 0 <= lo <= hi or hi <= 0:
            raise ValueError(f"invalid frequency band {self.frequency_band}")
        if self.kind == "constant_rate" and not np.any(self.axis):
            raise ValueError("constant_rate needs a nonzero axis")


@dataclass(frozen=True)
class ErrorSpec:
    gyr_noise_std: float = 0.0  # rad/s
    acc_noise_std: float = 0.0  # m/s²
    gyr_bias_std: float = 0.0  # rad/s
    seed: int = 0


def _band_limited(rng, t, band, peak, n_components=24):
    """Sum of random sinusoids with frequencies inside ``band``, scaled to ``peak`` per column."""
    lo, hi = band
    freqs = rng.uniform(lo, hi, size=(n_components, 3))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(n_components, 3))
    weights = rng.normal(size=(n_components, 3))
    arg = 2.0 * np.pi * t[:, None, None] * freqs[None] + phases[None]
    sig = np.sum(weights[None] * np.sin(arg), axis=1)
    top = np.max(np.abs(sig), axis=0)
    top[top == 0] = 1.0
    return sig * (peak / top)


def angular_rate(profile, t):
    """Sensor-frame angular rate (rad/s) of ``profile`` at times ``t``."""
    rng = np.random.default_rng(profile.seed)
    n = len(t)
    if profile.kind == "rest":
        return np.zeros((n, 3))
    if profile.kind == "constant_rate":
        axis = np.asarray(profile.axis, dtype=float)
        return np.tile(profile.amplitude * axis / np.linalg.norm(axis), (n, 1))
    if profile.kind == "sinusoidal_multi_axis":
        lo, hi = profile.frequency_band
        freqs = rng.uniform(lo, hi, size=3)
        phases = rng.uniform(0.0, 2.0 * np.pi, size=3)
        return profile.amplitude * np.sin(2.0 * np.pi * freqs * t[:, None] + phases)
    return _band_limited(rng, t, profile.frequency_band, profile.amplitude)


def generate(profile, rate_hz, q0=None):
    """Simulate ``profile`` at ``rate_hz``; ``q0`` is the orientation just before the first sample."""
    profile.validate()
    if not 1.0 <= rate_hz <= 10000.0:
        raise ValueError("rate_hz must lie in [1, 10000]")
    n = int(round(profile.duration * rate_hz))
    if n < 2:
        raise ValueError("profile too short for the requested rate")
    t = np.arange(n) / rate_hz
    dt = np.full(n, 1.0 / rate_hz)
    gyr = angular_rate(profile, t)
    q_start = quat.IDENTITY if q0 is None else quat.normalize(np.asarray(q0, dtype=float))
    # one extra leading step so that truth[0] already includes gyr[0]
    padded = np.vstack([np.zeros((1, 3)), gyr])
    truth = quat.strapdown_kernel(q_start, padded, np.concatenate([[1.0 / rate_hz], dt]))[1:]

    lin = np.zeros((n, 3))
    if profile.translation_accel_amplitude > 0:
        rng = np.random.default_rng([profile.seed, 1])
        lin = _band_limited(rng, t, profile.frequency_band, profile.translation_accel_amplitude)
    acc = quat.rotate_vec(quat.inverse(truth), lin + GRAVITY * quat.E_Z)
    return ImuSequence(
        t=t,
        gyr=gyr,
        acc=acc,
        quat=truth,
        rate_hz=float(rate_hz),
        name=f"{profile.kind}_{profile.seed}",
        dataset="synthetic",
    )


def inject_errors(seq, spec):
    """Add a per-sequence constant gyroscope bias and white noise; truth is untouched."""
    rng = np.random.default_rng(spec.seed)
    n = len(seq)
    bias = rng.normal(0.0, 1.0, size=3) * spec.gyr_bias_std
    gyr_noise = rng.normal(0.0, 1.0, size=(n, 3))
    acc_noise = rng.normal(0.0, 1.0, size=(n, 3))
    out = seq.copy()
    if spec.gyr_bias_std > 0:
        out.gyr = out.gyr + bias
        out.gyr_bias = bias if seq.gyr_bias is None else seq.gyr_bias + bias
    if spec.gyr_noise_std > 0:
        out.gyr = out.gyr + spec.gyr_noise_std * gyr_noise
    if spec.acc_noise_std > 0:
        out.acc = out.acc + spec.acc_noise_std * acc_noise
    return out


def prepend_rest(seq, rest_duration):
    """Prepend a period of perfect rest at the attitude held just before the first sample."""
    if rest_duration < 0:
        raise ValueError("rest_duration must be non-negative")
    seq.require_truth()
    n_rest = int(round(rest_duration * seq.rate_hz))
    if n_rest == 0:
        return seq.copy()
    dt = 1.0 / seq.rate_hz
    bias = np.zeros(3) if seq.gyr_bias is None else seq.gyr_bias
    # undo the first sample's rotation so the rest attitude connects consistently
    omega0 = seq.gyr[0] - bias
    q_rest = quat.multiply(seq.quat[0], quat.from_axis_angle(omega0, -np.linalg.norm(omega0) * dt))
    acc_rest = quat.rotate_vec(quat.inverse(q_rest), GRAVITY * quat.E_Z)
    t0 = seq.t - seq.t[0]
    out = seq.copy(
        t=np.concatenate([np.arange(n_rest) * dt, t0 + n_rest * dt]),
        gyr=np.vstack([np.tile(bias, (n_rest, 1)), seq.gyr]),
        acc=np.vstack([np.tile(acc_rest, (n_rest, 1)), seq.acc]),
        quat=np.vstack([np.tile(q_rest, (n_rest, 1)), seq.quat]),
        valid=np.concatenate([np.ones(n_rest, dtype=bool), seq.valid]),
    )
    out.meta["rest_prefix_samples"] = n_rest + int(seq.meta.get("rest_prefix_samples", 0))
    return out


def strapdown_gyro(seq, q0):
    """Gyroscope-only orientation: ``q[0] = q0``, then exact per-sample integration."""
    if len(seq) == 0:
        raise ValueError("empty sequence")
    q0 = quat.normalize(np.asarray(q0, dtype=float))
    return quat.strapdown_kernel(q0, np.ascontiguousarray(seq.gyr), seq.dt)
