"""The IMU recording container shared by all modules."""
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

GRAVITY = 9.81


@dataclass
class ImuSequence:
    """Timestamped gyroscope/accelerometer samples with optional ground truth.

    Arrays are stored column-wise: ``t`` (N,), ``gyr`` (N, 3) rad/s,
    ``acc`` (N, 3) m/s² specific force, ``quat`` (N, 4) sensor-to-earth truth
    or ``None``, ``valid`` (N,) truth-validity mask. ``gyr_bias`` records a
    constant gyroscope offset that was injected on purpose, if any.
    """

    t: np.ndarray
    gyr: np.ndarray
    acc: np.ndarray
    quat: Optional[np.ndarray] = None
    valid: Optional[np.ndarray] = None
    rate_hz: float = 0.0
    name: str = "seq"
    dataset: str = "default"
    gyr_bias: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.gyr = np.asarray(self.gyr, dtype=float).reshape(-1, 3)
        self.acc = np.asarray(self.acc, dtype=float).reshape(-1, 3)
        n = len(self.t)
        if self.quat is not None:
            self.quat = np.asarray(self.quat, dtype=float).reshape(-1, 4)
        if self.valid is None:
            self.valid = np.ones(n, dtype=bool)
        self.valid = np.asarray(self.valid, dtype=bool)
        lengths = {len(self.gyr), len(self.acc), len(self.valid)}
        if self.quat is not None:
            lengths.add(len(self.quat))
        if lengths != {n}:
            raise ValueError(f"sequence arrays disagree in length: t={n}, others={sorted(lengths)}")
        if n > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if not self.rate_hz:
            self.rate_hz = estimate_rate(self.t)
        if self.rate_hz <= 0:
            raise ValueError("rate_hz must be positive")
        if n > 1 and abs(np.median(np.diff(self.t)) * self.rate_hz - 1.0) > 0.01:
            raise ValueError(f"rate_hz {self.rate_hz} disagrees with the timestamps by more than 1%")

    def __len__(self):
        return len(self.t)

    @property
    def dt(self):
        """Per-sample time step; ``dt[0]`` repeats the nominal period."""
        d = np.empty(len(self.t))
        d[0] = 1.0 / self.rate_hz
        d[1:] = np.diff(self.t)
        return d

    @property
    def duration(self):
        return float(self.t[-1] - self.t[0]) if len(self.t) else 0.0

    def copy(self, **changes):
        arrays = {
            k: (None if getattr(self, k) is None else getattr(self, k).copy())
            for k in ("t", "gyr", "acc", "quat", "valid", "gyr_bias")
        }
        arrays["meta"] = dict(self.meta)
        arrays.update(changes)
        return replace(self, **arrays)

    def slice(self, start, stop=None):
        sl = slice(start, stop)
        return self.copy(
            t=self.t[sl] - self.t[sl][0],
            gyr=self.gyr[sl].copy(),
            acc=self.acc[sl].copy(),
            quat=None if self.quat is None else self.quat[sl].copy(),
            valid=self.valid[sl].copy(),
        )

    def require_truth(self):
        if self.quat is None:
            raise ValueError(f"sequence {self.name!r} has no ground truth")


def estimate_rate(t):
    t = np.asarray(t, dtype=float)
    if len(t) < 2:
        return 1.0
    rate = 1.0 / np.median(np.diff(t))
    # timestamps written as decimals carry rounding noise; keep 9 significant digits
    return float(f"{rate:.9g}")
