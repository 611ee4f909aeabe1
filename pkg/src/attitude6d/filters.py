"""Classical 6D complementary attitude filters, accelerometer initialization and grid tuning.

Filter ``"A"`` is the IMU-only gradient-descent filter with a single step-size
gain β. Filter ``"B"`` is the passive complementary filter with a
proportional gain Kp and an integral gain Ki that estimates gyroscope bias.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import quat
from ._filter_kernels import ACC_MIN, run_gradient_filter, run_pi_filter

FILTER_KINDS = ("A", "B")


@dataclass(frozen=True)
class FilterParams:
    kind: str = "B"
    gain: float = 0.5
    ki: float = 0.0
    init_from_accel: bool = True

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise ValueError(f"filter kind must be one of {FILTER_KINDS}, got {self.kind!r}")
        if not self.gain > 0:
            raise ValueError("gain must be positive")
        if self.ki < 0:
            raise ValueError("ki must be non-negative")
        if self.kind == "A" and self.ki != 0:
            raise ValueError("filter A has no integral gain")


@dataclass(frozen=True)
class FilterState:
    q: np.ndarray = field(default_factory=lambda: quat.IDENTITY.copy())
    bias_integral: np.ndarray = field(default_factory=lambda: np.zeros(3))
    initialized: bool = False


def accel_init(acc):
    """Heading-free attitude whose up-axis agrees with the measured specific force.

    Returns the minimal rotation ``q`` with ``rotate_vec(q, acc/|acc|) = e_z``.
    """
    acc = np.asarray(acc, dtype=float)
    n = np.linalg.norm(acc)
    if not n > ACC_MIN:
        raise ValueError("accelerometer reading too small for a reliable initialization")
    ax, ay, az = acc / n
    # half-angle construction of the shortest arc from a to e_z: q ∝ (1 + a·e_z, a × e_z)
    w = 1.0 + az
    if w < 1e-12:
        # upside down: any horizontal axis works, take x
        return np.array([0.0, 1.0, 0.0, 0.0])
    return quat.normalize(np.array([w, ay, -ax, 0.0]))


def _kernel_inputs(gyr, acc, dt):
    gyr = np.ascontiguousarray(np.atleast_2d(gyr), dtype=float)
    acc = np.ascontiguousarray(np.atleast_2d(acc), dtype=float)
    dt = np.ascontiguousarray(np.atleast_1d(dt), dtype=float)
    if np.any(dt <= 0):
        raise ValueError("dt must be positive")
    return gyr, acc, dt


def _run(state, params, gyr, acc, dt):
    gyr, acc, dt = _kernel_inputs(gyr, acc, dt)
    out = np.empty((len(gyr), 4))
    q0 = np.ascontiguousarray(state.q, dtype=float)
    if params.kind == "A":
        q = run_gradient_filter(q0, gyr, acc, dt, float(params.gain), out)
        bint = np.asarray(state.bias_integral, dtype=float).copy()
    else:
        q, bint = run_pi_filter(
            q0, np.ascontiguousarray(state.bias_integral, dtype=float), gyr, acc, dt,
            float(params.gain), float(params.ki), out,
        )
    return out, FilterState(q=q, bias_integral=bint, initialized=True)


def filter_step(state, params, gyr, acc, dt):
    """Advance ``state`` by one sample and return the new state."""
    _, new = _run(state, params, gyr, acc, dt)
    return new


def initial_quaternion(params, seq, q0=None):
    if q0 is not None:
        return quat.normalize(np.asarray(q0, dtype=float))
    if params.init_from_accel:
        return accel_init(seq.acc[0])
    return quat.IDENTITY.copy()


def run_filter(params, seq, q0=None):
    """Causal estimate for every sample of ``seq``.

    Start attitude: explicit ``q0``, else accelerometer-based when
    ``params.init_from_accel``, else identity. The start attitude is used for
    the state before the first sample, which is then processed normally.
    """
    if len(seq) == 0:
        raise ValueError("empty sequence")
    state = FilterState(q=initial_quaternion(params, seq, q0))
    out, _ = _run(state, params, seq.gyr, seq.acc, seq.dt)
    return out


def default_grid(kind, points=25):
    """Logarithmic gain grid over [1e-3, 1e1]; filter B also sweeps ki over {0} ∪ [1e-4, 1]."""
    gains = np.logspace(-3, 1, points)
    if kind == "A":
        return [{"gain": float(g)} for g in gains]
    kis = np.concatenate([[0.0], np.logspace(-4, 0, points)])
    return [{"gain": float(g), "ki": float(k)} for g in gains for k in kis]


def tune_filter(kind, sequences, grid=None, init_from_accel=True, return_scores=False):
    """Grid point minimizing the mean attitude RMSE over ``sequences``; ties go to the smaller gain."""
    from .evaluation import rmse_deg

    grid = default_grid(kind) if grid is None else list(grid)
    if not grid:
        raise ValueError("empty parameter grid")
    for seq in sequences:
        seq.require_truth()
    scores = []
    for point in grid:
        if isinstance(point, (int, float)):
            point = {"gain": float(point)}
        params = FilterParams(kind=kind, init_from_accel=init_from_accel, **point)
        errs = [rmse_deg(run_filter(params, s), s.quat, s.valid) for s in sequences]
        score = float(np.mean(errs))
        if not np.isfinite(score):
            score = np.inf
        scores.append((score, params.gain, params.ki, params))
    best = min(scores, key=lambda s: (s[0], s[1], s[2]))[3]
    if return_scores:
        return best, [(s[3], s[0]) for s in scores]
    return best
