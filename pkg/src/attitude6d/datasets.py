"""CSV sequence files and the three evaluation scenarios.

File schema (UTF-8, comma separated, header required; lines starting with
``#`` are comments)::

    t,gyr_x,gyr_y,gyr_z,acc_x,acc_y,acc_z,qw,qx,qy,qz,valid

Units are s, rad/s and m/s². Truth cells may be empty only in rows with
``valid = 0``.
"""
import csv
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imu_sim import ErrorSpec, inject_errors, prepend_rest

COLUMNS = ["t", "gyr_x", "gyr_y", "gyr_z", "acc_x", "acc_y", "acc_z", "qw", "qx", "qy", "qz", "valid"]
SCENARIOS = ("restrictive", "partially_restrictive", "realistic")
DEG = np.pi / 180.0
STILL_GYR = 2.0 * DEG
STILL_MIN_DURATION = 0.5


class SequenceFormatError(ValueError):
    pass


def _fmt(x):
    return "" if not np.isfinite(x) else repr(float(x))


def save_sequence(seq, path, header_comment=None):
    """Write ``seq`` with full 64-bit precision (``repr`` round-trips exactly)."""
    quat = seq.quat if seq.quat is not None else np.full((len(seq), 4), np.nan)
    valid = seq.valid if seq.quat is not None else np.zeros(len(seq), dtype=bool)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for k in range(len(seq)):
            row = [_fmt(seq.t[k])] + [_fmt(v) for v in seq.gyr[k]] + [_fmt(v) for v in seq.acc[k]]
            row += [_fmt(v) for v in quat[k]]
            row.append("1" if valid[k] else "0")
            w.writerow(row)


def load_sequence(path, dataset=None, rate_hz=None):
    from .sequence import ImuSequence

    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        numbered = [(n, ln) for n, ln in enumerate(fh, start=1) if not ln.startswith("#")]
    if not numbered:
        raise SequenceFormatError(f"{path}: empty file")
    header = [h.strip() for h in next(csv.reader([numbered[0][1]]))]
    missing = [c for c in COLUMNS if c not in header]
    if missing:
        raise SequenceFormatError(f"{path}: missing columns {missing}")
    idx = [header.index(c) for c in COLUMNS]
    rows = []
    for (lineno, _), row in zip(numbered[1:], csv.reader(ln for _, ln in numbered[1:])):
        if not row:
            continue
        try:
            vals = [float(row[i]) if row[i].strip() != "" else np.nan for i in idx]
        except (ValueError, IndexError):
            raise SequenceFormatError(f"{path}: row {lineno}: unparsable values") from None
        rows.append((lineno, vals))
    if len(rows) < 1:
        raise SequenceFormatError(f"{path}: no data rows")
    data = np.array([v for _, v in rows])
    linenos = [n for n, _ in rows]
    t = data[:, 0]
    if not np.all(np.isfinite(data[:, :7])):
        bad = int(np.argmax(~np.all(np.isfinite(data[:, :7]), axis=1)))
        raise SequenceFormatError(f"{path}: row {linenos[bad]}: missing measurement value")
    step = np.diff(t)
    if np.any(step <= 0):
        bad = int(np.argmax(step <= 0)) + 1
        raise SequenceFormatError(f"{path}: row {linenos[bad]}: time not strictly increasing")
    valid = data[:, 11] != 0
    q = data[:, 7:11]
    has_q = np.all(np.isfinite(q), axis=1)
    if np.any(valid & ~has_q):
        bad = int(np.argmax(valid & ~has_q))
        raise SequenceFormatError(f"{path}: row {linenos[bad]}: valid row without truth quaternion")
    norms = np.linalg.norm(np.where(has_q[:, None], q, 1.0), axis=1)
    off = has_q & (np.abs(norms - 1.0) > 1e-3)
    if np.any(off):
        bad = int(np.argmax(off))
        raise SequenceFormatError(
            f"{path}: row {linenos[bad]}: truth quaternion norm {norms[bad]:.6g} is not unit"
        )
    quat = None if not np.any(has_q) else q
    return ImuSequence(
        t=t, gyr=data[:, 1:4], acc=data[:, 4:7], quat=quat, valid=valid,
        rate_hz=rate_hz or 0.0, name=path.stem, dataset=dataset or path.resolve().parent.name or "default",
    )


def save_estimates(t, quats, path, header_comment=None):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "qw", "qx", "qy", "qz"])
        for tk, q in zip(t, quats):
            w.writerow([_fmt(tk)] + [_fmt(v) for v in q])


def load_estimates(path):
    """Read an estimate file written by :func:`save_estimates`; returns ``(t, quats)``."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines or lines[0].strip().split(",") != ["t", "qw", "qx", "qy", "qz"]:
        raise SequenceFormatError(f"{path}: expected header t,qw,qx,qy,qz")
    arr = np.loadtxt(lines[1:], delimiter=",", ndmin=2)
    return arr[:, 0], arr[:, 1:5]


# --- scenarios --------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    kind: str = "realistic"
    bias_std: float = 0.5 * DEG
    rest_duration: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SCENARIOS:
            raise ValueError(f"scenario must be one of {SCENARIOS}, got {self.kind!r}")
        if self.bias_std < 0:
            raise ValueError("bias_std must be non-negative")


def detect_rest_prefix(seq, threshold=STILL_GYR, min_duration=STILL_MIN_DURATION):
    """Length (samples) of the initial span in which the gyroscope stays within
    ``threshold`` of its median over the span; 0 if shorter than ``min_duration``."""
    gyr = seq.gyr
    n = len(gyr)
    far = np.linalg.norm(gyr - gyr[0], axis=1) >= 2.0 * threshold
    m = int(np.argmax(far)) if far.any() else n
    while m > 0:
        med = np.median(gyr[:m], axis=0)
        bad = np.linalg.norm(gyr[:m] - med, axis=1) >= threshold
        if not bad.any():
            break
        m = int(np.argmax(bad))
    return m if m / seq.rate_hz >= min_duration else 0


def rest_prefix_length(seq):
    if "rest_prefix_samples" in seq.meta:
        return int(seq.meta["rest_prefix_samples"])
    return detect_rest_prefix(seq)


def build_scenario(seq, sc):
    """Turn a bias-free test sequence into the ``sc.kind`` evaluation condition."""
    seq.require_truth()
    n_rest = rest_prefix_length(seq)
    out = seq.copy()
    if n_rest == 0 and sc.rest_duration > 0:
        out = prepend_rest(out, sc.rest_duration)
        n_rest = out.meta["rest_prefix_samples"]
    else:
        out.meta["rest_prefix_samples"] = n_rest
    if sc.kind == "restrictive":
        return out
    # per-sequence bias draw, reproducible from the scenario seed and the sequence name
    seed = sc.seed * 1_000_003 + zlib.crc32(seq.name.encode())
    out = inject_errors(out, ErrorSpec(gyr_bias_std=sc.bias_std, seed=seed))
    if sc.kind == "partially_restrictive":
        return out
    trimmed = out.slice(n_rest)
    trimmed.meta["rest_prefix_samples"] = 0
    return trimmed
