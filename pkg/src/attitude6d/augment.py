"""Training-data augmentation and input standardization."""
from dataclasses import dataclass

import numpy as np

from . import quat

DEG = np.pi / 180.0


@dataclass(frozen=True)
class AugmentConfig:
    rotation_enabled: bool = True
    gyr_noise_std_max: float = 0.02  # rad/s
    acc_noise_std_max: float = 0.3  # m/s²
    gyr_bias_std: float = 0.5 * DEG  # rad/s
    seed: int = 0

    def __post_init__(self):
        if min(self.gyr_noise_std_max, self.acc_noise_std_max, self.gyr_bias_std) < 0:
            raise ValueError("augmentation magnitudes must be non-negative")


@dataclass
class StandardizationStats:
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).reshape(6)
        self.std = np.maximum(np.asarray(self.std, dtype=float).reshape(6), 1e-9)

    @classmethod
    def identity(cls):
        return cls(np.zeros(6), np.ones(6))


def random_unit_quaternion(rng):
    """Uniform random rotation (normalized 4-D Gaussian), canonical sign w ≥ 0."""
    while True:
        q = rng.normal(size=4)
        n = np.linalg.norm(q)
        if n > 1e-6:
            q = q / n
            return -q if q[0] < 0 else q


def virtual_rotation(seq, r):
    """Re-mount the sensor by ``r``: vectors become ``r⁻¹·v·r``, truth becomes ``truth ⊗ r``.

    Earth-frame quantities (gravity, rotation in space) are unchanged, so the
    rotated sequence is physically consistent.
    """
    seq.require_truth()
    r = quat.normalize(np.asarray(r, dtype=float))
    r_inv = quat.inverse(r)
    out = seq.copy(
        gyr=quat.rotate_vec(r_inv, seq.gyr),
        acc=quat.rotate_vec(r_inv, seq.acc),
    )
    finite = np.all(np.isfinite(seq.quat), axis=1)
    q = seq.quat.copy()
    q[finite] = quat.multiply(seq.quat[finite], r)
    out.quat = q
    if seq.gyr_bias is not None:
        out.gyr_bias = quat.rotate_vec(r_inv, seq.gyr_bias)
    return out


def error_augment(seq, cfg, rng):
    """Noise with per-sequence random standard deviations plus a constant gyroscope bias.

    Noise levels are drawn uniformly from ``[0, max]`` separately for the
    gyroscope and the accelerometer. Returns the augmented copy; the drawn
    levels are recorded in ``meta["augment"]``.
    """
    n = len(seq)
    gyr_std = rng.uniform(0.0, 1.0) * cfg.gyr_noise_std_max
    acc_std = rng.uniform(0.0, 1.0) * cfg.acc_noise_std_max
    bias = rng.normal(size=3) * cfg.gyr_bias_std
    out = seq.copy()
    if cfg.gyr_noise_std_max > 0:
        out.gyr = out.gyr + gyr_std * rng.normal(size=(n, 3))
    if cfg.acc_noise_std_max > 0:
        out.acc = out.acc + acc_std * rng.normal(size=(n, 3))
    if cfg.gyr_bias_std > 0:
        out.gyr = out.gyr + bias
        out.gyr_bias = bias if seq.gyr_bias is None else seq.gyr_bias + bias
    out.meta["augment"] = {"gyr_noise_std": gyr_std, "acc_noise_std": acc_std, "gyr_bias": bias.tolist()}
    return out


def augment_sequence(seq, cfg, rng):
    """Rotation (if enabled) followed by error augmentation."""
    if cfg.rotation_enabled:
        seq = virtual_rotation(seq, random_unit_quaternion(rng))
    return error_augment(seq, cfg, rng)


def _channels(seq):
    return np.hstack([seq.gyr, seq.acc])


def standardize_fit(sequences):
    data = np.vstack([_channels(s) if hasattr(s, "gyr") else np.asarray(s)[:, :6] for s in sequences])
    return StandardizationStats(mean=data.mean(axis=0), std=data.std(axis=0))


def standardize_apply(x, stats):
    """Standardize ``[gyr, acc]`` channels.

    ``x`` is either an ``(..., 6)`` array or an ImuSequence; a sequence comes
    back as a copy whose gyr/acc hold the standardized network inputs.
    """
    if hasattr(x, "gyr"):
        z = standardize_apply(_channels(x), stats)
        return x.copy(gyr=z[:, :3], acc=z[:, 3:])
    return (np.asarray(x, dtype=float) - stats.mean) / stats.std
