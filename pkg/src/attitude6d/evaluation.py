"""Attitude RMSE scoring, estimator comparison and sampling-rate sweeps."""
import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np

from . import quat
from .datasets import build_scenario
from .filters import FilterParams, accel_init, run_filter
from .gru import run_network
from .imu_sim import strapdown_gyro
from .resample import resample_sequence


def rmse_deg(est, truth, mask=None):
    """Root-mean-square attitude error in degrees over the valid samples."""
    est = np.asarray(est, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if est.shape != truth.shape:
        raise ValueError(f"estimate shape {est.shape} differs from truth shape {truth.shape}")
    mask = np.ones(len(truth), dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("no valid samples to score")
    e = quat.attitude_error(truth[mask], est[mask])
    return float(np.degrees(np.sqrt(np.mean(e * e))))


# --- estimators -------------------------------------------------------------


class FilterEstimator:
    def __init__(self, params, name=None):
        self.params = params
        self.id = name or f"filter-{params.kind}"
        self.init_policy = "accel" if params.init_from_accel else "identity"

    def run(self, seq):
        return run_filter(self.params, seq)


class StrapdownEstimator:
    """Gyroscope-only integration; starts from the true, accelerometer or identity attitude."""

    def __init__(self, init="truth", name="strapdown"):
        if init not in ("truth", "accel", "identity"):
            raise ValueError(f"unknown init policy {init!r}")
        self.id = name
        self.init_policy = init

    def run(self, seq):
        if self.init_policy == "truth":
            seq.require_truth()
            first = int(np.argmax(seq.valid))
            q0 = seq.quat[first]
            if first:
                raise ValueError("first truth sample invalid; cannot start from truth")
            # q0 is the attitude at the first sample, so integration starts after it
            return strapdown_gyro(seq, q0)
        q0 = accel_init(seq.acc[0]) if self.init_policy == "accel" else quat.IDENTITY
        return strapdown_gyro(seq, q0)


class NetworkEstimator:
    def __init__(self, net, name="network"):
        self.net = net
        self.id = name
        self.init_policy = "learned"

    def run(self, seq):
        return run_network(self.net, seq)


class CallableEstimator:
    def __init__(self, fn, name, init_policy="identity"):
        self.fn = fn
        self.id = name
        self.init_policy = init_policy

    def run(self, seq):
        return self.fn(seq)


# --- reports ----------------------------------------------------------------


@dataclass
class EvalRow:
    estimator: str
    dataset: str
    sequence: str
    scenario: str
    rate_hz: float
    rmse_deg: float
    samples: int
    error: str = ""


@dataclass
class EvalReport:
    rows: List[EvalRow] = field(default_factory=list)

    def sort(self):
        self.rows.sort(key=lambda r: (r.estimator, r.dataset, r.sequence, r.scenario, r.rate_hz))
        return self

    @property
    def aggregates(self) -> Dict[tuple, dict]:
        """Mean/median/max RMSE per (estimator, dataset, scenario, rate) over successful rows."""
        groups: Dict[tuple, list] = {}
        for r in self.rows:
            if r.error:
                continue
            groups.setdefault((r.estimator, r.dataset, r.scenario, r.rate_hz), []).append(r.rmse_deg)
        return {
            k: {"mean": float(np.mean(v)), "median": float(np.median(v)), "max": float(np.max(v)), "count": len(v)}
            for k, v in sorted(groups.items())
        }

    def mean(self, estimator=None, scenario=None):
        vals = [r.rmse_deg for r in self.rows if not r.error
                and (estimator is None or r.estimator == estimator)
                and (scenario is None or r.scenario == scenario)]
        return float(np.mean(vals)) if vals else float("nan")

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            names = list(EvalRow.__dataclass_fields__)
            w.writerow(names)
            for r in self.rows:
                d = asdict(r)
                w.writerow([repr(d[n]) if isinstance(d[n], float) else d[n] for n in names])

    def summary(self):
        return {
            "rows": len(self.rows),
            "failed": sum(1 for r in self.rows if r.error),
            "aggregates": [
                {"estimator": k[0], "dataset": k[1], "scenario": k[2], "rate_hz": k[3], **v}
                for k, v in self.aggregates.items()
            ],
        }

    def write_summary(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.summary(), fh, indent=2)
            fh.write("\n")


def _score(estimator, seq, scenario_name, rate):
    try:
        est = estimator.run(seq)
        value = rmse_deg(est, seq.quat, seq.valid)
        err = ""
    except Exception as exc:  # recorded as a failed row
        value, err = float("nan"), f"{type(exc).__name__}: {exc}"
    return EvalRow(estimator.id, seq.dataset, seq.name, scenario_name, float(rate), value, len(seq), err)


def _prepared(seq, scenario):
    if scenario is None:
        return seq, "none"
    return build_scenario(seq, scenario), scenario.kind


def _run_jobs(jobs, threads):
    if threads <= 1:
        rows = [job() for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda j: j(), jobs))
    return EvalReport(rows).sort()


def evaluate(estimators, sequences, scenarios, threads=1):
    """One row per (estimator, sequence, scenario) at each sequence's own rate.

    ``None`` in ``scenarios`` scores the sequences as given.
    """
    jobs = []
    for sc in scenarios:
        for seq in sequences:
            prepared, label = _prepared(seq, sc)
            for est in estimators:
                jobs.append(lambda e=est, s=prepared, l=label: _score(e, s, l, s.rate_hz))
    return _run_jobs(jobs, threads)


def frequency_sweep(estimator, sequences, rates, scenario, threads=1):
    """Resample every sequence to each rate, apply ``scenario`` and score ``estimator``."""
    jobs = []
    for seq in sequences:
        for rate in rates:
            resampled = resample_sequence(seq, rate)
            prepared, label = _prepared(resampled, scenario)
            jobs.append(lambda s=prepared, l=label, r=rate: _score(estimator, s, l, r))
    return _run_jobs(jobs, threads)
