"""Command-line entry point: ``attitude6d <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 runtime failure. Data goes to the
files named by ``--out``; progress and diagnostics go to standard error.

Every option may also be given in a JSON file passed with ``--config``; keys
are the option names with dashes replaced by underscores. Explicit flags win
over the file, the file wins over built-in defaults.
"""
import argparse
import datetime
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, quat
from .augment import AugmentConfig, augment_sequence
from .datasets import Scenario, load_estimates, load_sequence, save_estimates, save_sequence
from .evaluation import (
    CallableEstimator, FilterEstimator, NetworkEstimator, StrapdownEstimator, evaluate, frequency_sweep,
)
from .filters import FilterParams, default_grid, run_filter, tune_filter
from .gru import init_network, load_weights, run_network, save_weights
from .imu_sim import ErrorSpec, MotionProfile, generate, inject_errors, prepend_rest
from .resample import RateGridStrategy, resample_sequence
from .training import TrainConfig, train

log = logging.getLogger("attitude6d")
DEG = np.pi / 180.0
S = argparse.SUPPRESS


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


# --- option groups ------------------------------------------------------------

COMMON = {"seed": 0, "deterministic": False, "threads": 1, "config": None, "verbose": False}


def _common(p, out_help):
    p.add_argument("--out", default=S, help=out_help)
    p.add_argument("--seed", type=int, default=S, help="random seed (default 0)")
    p.add_argument("--deterministic", action="store_true", default=S,
                   help="omit the timestamp comment line from CSV outputs")
    p.add_argument("--threads", type=int, default=S, help="worker-pool width (default 1)")
    p.add_argument("--config", default=S, help="JSON file with option values")
    p.add_argument("-v", "--verbose", action="store_true", default=S)


def _scenario_opts(p):
    p.add_argument("--bias-std", type=float, default=S, help="scenario gyro bias std in deg/s (default 0.5)")
    p.add_argument("--rest-duration", type=float, default=S,
                   help="rest prepended when a sequence has none, seconds (default 5)")
    p.add_argument("--rest-prefix", type=float, default=S,
                   help="known rest prefix of the input files in seconds (overrides detection)")


SCENARIO_DEFAULTS = {"bias_std": 0.5, "rest_duration": 5.0, "rest_prefix": None}


def _filter_opts(p):
    p.add_argument("--kind", choices=["A", "B"], default=S, help="filter type (default B)")
    p.add_argument("--gain", type=float, default=S, help="beta (A) or Kp (B) (default 0.5)")
    p.add_argument("--ki", type=float, default=S, help="integral gain, filter B only (default 0)")
    p.add_argument("--init", choices=["accel", "identity"], default=S, help="start attitude (default accel)")
    p.add_argument("--params", default=S, help="JSON filter parameters as written by `tune`")


FILTER_DEFAULTS = {"kind": "B", "gain": 0.5, "ki": 0.0, "init": "accel", "params": None}


# --- commands -----------------------------------------------------------------

COMMANDS = {}


def command(name, defaults, help):
    def wrap(fn):
        COMMANDS[name] = (fn, {**COMMON, **defaults}, help)
        return fn
    return wrap


def _setup_simulate(p):
    p.add_argument("--profile", choices=["rest", "constant_rate", "sinusoidal_multi_axis", "random_smooth"],
                   default=S, help="motion profile (default random_smooth)")
    p.add_argument("--rate", type=float, default=S, help="sampling rate in Hz (default 100)")
    p.add_argument("--duration", type=float, default=S, help="seconds (default 60)")
    p.add_argument("--amplitude", type=float, default=S, help="peak angular rate in deg/s (default 100)")
    p.add_argument("--band", type=float, nargs=2, metavar=("LO", "HI"), default=S,
                   help="angular-rate frequency band in Hz (default 0.05 1)")
    p.add_argument("--axis", type=float, nargs=3, default=S, help="rotation axis for constant_rate")
    p.add_argument("--translation", type=float, default=S, help="peak translational acceleration m/s² (default 0)")
    p.add_argument("--gyr-noise", type=float, default=S, help="gyro noise std in deg/s (default 0)")
    p.add_argument("--acc-noise", type=float, default=S, help="accelerometer noise std in m/s² (default 0)")
    p.add_argument("--gyr-bias", type=float, default=S, help="gyro bias std in deg/s (default 0)")
    p.add_argument("--rest", type=float, default=S, help="rest prepended in seconds (default 0)")
    p.add_argument("--random-attitude", action="store_true", default=S, help="start from a random attitude")
    p.add_argument("--name", default=S, help="sequence name stored in the file comment")


@command("simulate", {
    "profile": "random_smooth", "rate": 100.0, "duration": 60.0, "amplitude": 100.0, "band": [0.05, 1.0],
    "axis": [0.0, 0.0, 1.0], "translation": 0.0, "gyr_noise": 0.0, "acc_noise": 0.0, "gyr_bias": 0.0,
    "rest": 0.0, "random_attitude": False, "name": None, "out": None,
}, "generate a synthetic sequence")
def cmd_simulate(a):
    _need(a, "out")
    profile = MotionProfile(a.profile, a.amplitude * DEG, tuple(a.band), a.translation, a.duration, a.seed,
                            tuple(a.axis))
    q0 = None
    if a.random_attitude:
        from .augment import random_unit_quaternion
        q0 = random_unit_quaternion(np.random.default_rng([a.seed, 2]))
    seq = generate(profile, a.rate, q0=q0)
    spec = ErrorSpec(a.gyr_noise * DEG, a.acc_noise, a.gyr_bias * DEG, seed=a.seed + 1)
    seq = inject_errors(seq, spec)
    if a.rest > 0:
        seq = prepend_rest(seq, a.rest)
    save_sequence(seq, a.out, _stamp(a))
    log.info("wrote %d samples to %s", len(seq), a.out)


def _setup_augment(p):
    p.add_argument("--input", default=S, help="sequence CSV")
    p.add_argument("--rotation", action=argparse.BooleanOptionalAction, default=S,
                   help="apply a random virtual sensor rotation (default on)")
    p.add_argument("--gyr-noise-max", type=float, default=S, help="max gyro noise std in rad/s (default 0.02)")
    p.add_argument("--acc-noise-max", type=float, default=S, help="max accelerometer noise std m/s² (default 0.3)")
    p.add_argument("--gyr-bias-std", type=float, default=S, help="gyro bias std in rad/s (default 0.5 deg/s)")


@command("augment", {
    "input": None, "out": None, "rotation": True, "gyr_noise_max": 0.02, "acc_noise_max": 0.3,
    "gyr_bias_std": 0.5 * DEG,
}, "augment a sequence with a virtual rotation and measurement errors")
def cmd_augment(a):
    _need(a, "input", "out")
    seq = _load(a.input)
    cfg = AugmentConfig(a.rotation, a.gyr_noise_max, a.acc_noise_max, a.gyr_bias_std, a.seed)
    out = augment_sequence(seq, cfg, np.random.default_rng(a.seed))
    save_sequence(out, a.out, _stamp(a))


def _setup_resample(p):
    p.add_argument("--input", default=S, help="sequence CSV")
    p.add_argument("--rate", type=float, default=S, help="target rate in Hz")


@command("resample", {"input": None, "out": None, "rate": None}, "resample a sequence to another rate")
def cmd_resample(a):
    _need(a, "input", "out", "rate")
    save_sequence(resample_sequence(_load(a.input), a.rate), a.out, _stamp(a))


def _setup_run_filter(p):
    p.add_argument("--input", default=S, help="sequence CSV")
    _filter_opts(p)


@command("run-filter", {"input": None, "out": None, **FILTER_DEFAULTS}, "run a complementary filter")
def cmd_run_filter(a):
    _need(a, "input", "out")
    seq = _load(a.input)
    est = run_filter(_filter_params(a), seq)
    save_estimates(seq.t, est, a.out, _stamp(a))


def _setup_tune(p):
    p.add_argument("--input", nargs="+", default=S, help="training sequence CSVs")
    p.add_argument("--kind", choices=["A", "B"], default=S, help="filter type (default B)")
    p.add_argument("--points", type=int, default=S, help="grid points per parameter (default 25)")
    p.add_argument("--init", choices=["accel", "identity"], default=S, help="start attitude (default accel)")
    p.add_argument("--scenario", choices=["none", "restrictive", "partially_restrictive", "realistic"],
                   default=S, help="condition the tuning data is put in (default none)")
    _scenario_opts(p)


@command("tune", {"input": None, "out": None, "kind": "B", "points": 25, "init": "accel", "scenario": "none",
                  **SCENARIO_DEFAULTS}, "grid-search filter parameters")
def cmd_tune(a):
    _need(a, "input", "out")
    from .datasets import build_scenario

    seqs = _load_many(a, a.input)
    sc = _scenario(a, a.scenario)
    if sc is not None:
        seqs = [build_scenario(s, sc) for s in seqs]
    best = tune_filter(a.kind, seqs, grid=default_grid(a.kind, a.points), init_from_accel=a.init == "accel")
    doc = {"kind": best.kind, "gain": best.gain, "ki": best.ki, "init_from_accel": best.init_from_accel}
    _write_json(a.out, doc)
    log.info("best parameters %s", doc)


def _setup_train(p):
    p.add_argument("--train", nargs="+", default=S, help="training sequence CSVs")
    p.add_argument("--val", nargs="*", default=S, help="validation sequence CSVs")
    p.add_argument("--hidden", type=int, default=S, help="hidden size H (default 200)")
    p.add_argument("--time-aware", action=argparse.BooleanOptionalAction, default=S,
                   help="feed dt as an input (default on)")
    p.add_argument("--grouped-input", action="store_true", default=S, help="split the first layer by sensor")
    p.add_argument("--native-rate", type=float, default=S, help="fixed rate of a network without dt input")
    for name, typ, hint in [("window-len", int, 800), ("stride", int, 400), ("tbptt-chunk", int, 200),
                            ("batch-size", int, 16), ("epochs", int, 20), ("max-lr", float, 3e-3),
                            ("grad-clip", float, 10.0), ("clamp-eps", float, 1e-12)]:
        p.add_argument(f"--{name}", type=typ, default=S, help=f"(default {hint})")
    p.add_argument("--rate-grid", nargs=4, metavar=("KIND", "COUNT", "FMIN", "FMAX"), default=S,
                   help="multi-rate training grid, e.g. equidistant_fs 10 50 500")
    p.add_argument("--no-augment", action="store_true", default=S, help="disable augmentation")


TRAIN_FIELDS = ("window_len", "stride", "tbptt_chunk", "batch_size", "epochs", "max_lr", "grad_clip",
                "clamp_eps", "augment", "rate_strategy")


@command("train", {"train": None, "val": [], "out": None, "hidden": 200, "time_aware": True,
                   "grouped_input": False, "native_rate": None, "rate_grid": None, "no_augment": False,
                   **{k: None for k in TRAIN_FIELDS}}, "train the recurrent estimator")
def cmd_train(a):
    _need(a, "train", "out")
    fields = {k: getattr(a, k) for k in TRAIN_FIELDS if getattr(a, k) is not None}
    if a.rate_grid is not None:
        kind, count, lo, hi = a.rate_grid
        fields["rate_strategy"] = RateGridStrategy(kind, int(count), float(lo), float(hi))
    if a.no_augment:
        fields["augment"] = None
    try:
        cfg = TrainConfig(seed=a.seed, **fields)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid training configuration: {exc}") from None
    net0 = init_network(a.hidden, a.time_aware, a.grouped_input, a.native_rate, seed=a.seed)
    train_data = _load_many(a, a.train)
    val_data = _load_many(a, a.val or [])

    def progress(epoch, hist):
        log.info("epoch %d/%d  loss %.4g  val %.3f deg", epoch + 1, cfg.epochs, hist.train_loss[-1],
                 hist.val_rmse_deg[-1])

    net, hist = train(net0, train_data, val_data, cfg, progress=progress)
    extra = {"training": {"config": _jsonable(cfg.to_dict()), "history": _jsonable(vars(hist))}}
    save_weights(net, a.out, extra=extra)


def _setup_infer(p):
    p.add_argument("--weights", default=S, help="network weight file")
    p.add_argument("--input", default=S, help="sequence CSV")


@command("infer", {"weights": None, "input": None, "out": None}, "run a trained network")
def cmd_infer(a):
    _need(a, "weights", "input", "out")
    net = load_weights(a.weights)
    seq = _load(a.input)
    save_estimates(seq.t, run_network(net, seq), a.out, _stamp(a))


def _setup_evaluate(p):
    p.add_argument("--input", nargs="+", default=S, help="test sequence CSVs")
    p.add_argument("--estimator", action="append", default=S,
                   choices=["filter", "strapdown", "network", "estimates"],
                   help="estimator to score; repeatable (default filter)")
    p.add_argument("--weights", default=S, help="weight file for the network estimator")
    p.add_argument("--estimates", nargs="+", default=S,
                   help="precomputed estimate CSVs, one per input, for the `estimates` estimator")
    p.add_argument("--scenario", action="append", default=S,
                   choices=["none", "restrictive", "partially_restrictive", "realistic"],
                   help="repeatable; default all three scenarios, or none when scoring --estimates")
    _filter_opts(p)
    _scenario_opts(p)


EVAL_DEFAULTS = {"input": None, "out": None, "estimator": None, "weights": None, "estimates": None,
                 "scenario": None, **FILTER_DEFAULTS, **SCENARIO_DEFAULTS}


@command("evaluate", EVAL_DEFAULTS, "score estimators on test sequences")
def cmd_evaluate(a):
    _need(a, "input", "out")
    seqs = _load_many(a, a.input)
    kinds = a.estimator or (["estimates"] if a.estimates else ["filter"])
    default_sc = ["none"] if "estimates" in kinds else ["restrictive", "partially_restrictive", "realistic"]
    names = a.scenario or default_sc
    if "estimates" in kinds and names != ["none"]:
        raise UsageError("precomputed estimates can only be scored with --scenario none")
    estimators = [_estimator(a, k, seqs) for k in kinds]
    report = evaluate(estimators, seqs, [_scenario(a, n) for n in names], threads=a.threads)
    _write_report(a, report)


def _setup_sweep(p):
    p.add_argument("--input", nargs="+", default=S, help="test sequence CSVs")
    p.add_argument("--estimator", choices=["filter", "strapdown", "network"], default=S,
                   help="estimator (default filter)")
    p.add_argument("--weights", default=S, help="weight file for the network estimator")
    p.add_argument("--rates", type=float, nargs="+", default=S, help="sampling rates in Hz")
    p.add_argument("--scenario", choices=["none", "restrictive", "partially_restrictive", "realistic"],
                   default=S, help="(default realistic)")
    _filter_opts(p)
    _scenario_opts(p)


@command("sweep", {"input": None, "out": None, "estimator": "filter", "weights": None, "rates": None,
                   "scenario": "realistic", **FILTER_DEFAULTS, **SCENARIO_DEFAULTS},
         "score one estimator across sampling rates")
def cmd_sweep(a):
    _need(a, "input", "out", "rates")
    seqs = _load_many(a, a.input)
    est = _estimator(a, a.estimator, seqs)
    report = frequency_sweep(est, seqs, a.rates, _scenario(a, a.scenario), threads=a.threads)
    _write_report(a, report)


# --- helpers ------------------------------------------------------------------


def _need(a, *names):
    missing = [n for n in names if getattr(a, n) in (None, [])]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _stamp(a):
    if a.deterministic:
        return None
    now = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    return f"generated {now} by attitude6d {__version__}"


def _load(path, rest_prefix=None):
    seq = load_sequence(path)
    if rest_prefix is not None:
        seq.meta["rest_prefix_samples"] = int(round(rest_prefix * seq.rate_hz))
    return seq


def _load_many(a, paths):
    return [_load(p, getattr(a, "rest_prefix", None)) for p in paths]


def _filter_params(a):
    if a.params:
        with open(a.params, encoding="utf-8") as fh:
            return FilterParams(**json.load(fh))
    try:
        return FilterParams(a.kind, a.gain, a.ki, a.init == "accel")
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _scenario(a, name):
    if name in (None, "none"):
        return None
    return Scenario(name, a.bias_std * DEG, a.rest_duration, a.seed)


def _estimator(a, kind, seqs):
    if kind == "filter":
        p = _filter_params(a)
        return FilterEstimator(p, f"filter-{p.kind}")
    if kind == "strapdown":
        return StrapdownEstimator()
    if kind == "network":
        _need(a, "weights")
        return NetworkEstimator(load_weights(a.weights), Path(a.weights).stem)
    _need(a, "estimates")
    if len(a.estimates) != len(seqs):
        raise UsageError("--estimates needs exactly one file per --input file")
    table = {}
    for seq, path in zip(seqs, a.estimates):
        t, q = load_estimates(path)
        if len(t) != len(seq):
            raise ValueError(f"{path}: {len(t)} estimates for {len(seq)} samples of {seq.name}")
        table[id(seq)] = q
    return CallableEstimator(lambda s: table[id(s)], "estimates", "external")


def _write_report(a, report):
    report.write_csv(a.out)
    summary = Path(a.out).with_suffix(".summary.json")
    report.write_summary(summary)
    for key, agg in report.aggregates.items():
        log.info("%s %s %s %.0f Hz: mean %.3f deg (n=%d)", *key, agg["mean"], agg["count"])
    failed = [r for r in report.rows if r.error]
    for r in failed:
        log.warning("%s on %s failed: %s", r.estimator, r.sequence, r.error)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _write_json(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def build_parser():
    parser = _Parser(prog="attitude6d", description="Inertial attitude estimation toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    for name, (fn, defaults, help) in COMMANDS.items():
        p = sub.add_parser(name, help=help, description=help)
        globals()["_setup_" + name.replace("-", "_")](p)
        _common(p, "output file")
    return parser


def _merge(ns):
    fn, defaults, _ = COMMANDS[ns.command]
    given = {k: v for k, v in vars(ns).items() if k != "command"}
    values = dict(defaults)
    cfg_path = given.get("config")
    if cfg_path:
        try:
            with open(cfg_path, encoding="utf-8") as fh:
                file_values = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {cfg_path}: {exc}") from None
        if not isinstance(file_values, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = sorted(set(file_values) - set(defaults))
        if unknown:
            raise UsageError(f"unknown config keys for {ns.command}: {unknown}")
        values.update(file_values)
    values.update(given)
    return fn, argparse.Namespace(command=ns.command, **values)


def main(argv=None):
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        fn, args = _merge(ns)
    except UsageError as exc:
        parser.error(str(exc))
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(message)s", force=True)
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    try:
        fn(args)
    except UsageError as exc:
        parser.error(str(exc))
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        log.debug("traceback", exc_info=True)
        sys.stderr.write(f"attitude6d {ns.command}: error: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
