import numpy as np
import pytest

from attitude6d import quat
from attitude6d.datasets import (
    STILL_GYR, Scenario, SequenceFormatError, build_scenario, detect_rest_prefix, load_estimates,
    load_sequence, save_estimates, save_sequence,
)
from attitude6d.evaluation import (
    CallableEstimator, EvalReport, FilterEstimator, StrapdownEstimator, evaluate, frequency_sweep, rmse_deg,
)
from attitude6d.filters import FilterParams, tune_filter
from attitude6d.imu_sim import ErrorSpec, MotionProfile, generate, inject_errors, prepend_rest
from attitude6d.sequence import ImuSequence
from conftest import DEG, random_quats, z_rotation


def motion(seed=0, duration=20.0, rate=100.0, amp=1.0, noise=True):
    seq = generate(MotionProfile("random_smooth", amp, (0.05, 1.0), 1.0, duration, seed), rate,
                   q0=quat.from_axis_angle([0.3, 1, 0], 0.5))
    if noise:
        seq = inject_errors(seq, ErrorSpec(0.3 * DEG, 0.1, 0.0, seed=seed + 50))
    return seq.copy(name=f"seq{seed}", dataset="sim")


class TestCsv:
    def test_round_trip(self, tmp_path):
        seq = motion(duration=3.0)
        valid = seq.valid.copy()
        valid[40:60] = False
        q = seq.quat.copy()
        q[40:60] = np.nan
        seq = seq.copy(valid=valid, quat=q)
        p = tmp_path / "ds" / "walk.csv"
        p.parent.mkdir()
        save_sequence(seq, p, header_comment="generated")
        back = load_sequence(p)
        np.testing.assert_array_equal(back.t, seq.t)
        np.testing.assert_array_equal(back.gyr, seq.gyr)
        np.testing.assert_array_equal(back.acc, seq.acc)
        np.testing.assert_array_equal(back.valid, seq.valid)
        np.testing.assert_array_equal(back.quat[valid], seq.quat[valid])
        assert np.all(np.isnan(back.quat[~valid]))
        assert back.name == "walk" and back.dataset == "ds"
        assert back.rate_hz == pytest.approx(100.0)

    def _write(self, tmp_path, text):
        p = tmp_path / "x.csv"
        p.write_text(text)
        return p

    def test_norm_violation_row_number(self, tmp_path):
        head = "# note\nt,gyr_x,gyr_y,gyr_z,acc_x,acc_y,acc_z,qw,qx,qy,qz,valid\n"
        rows = "0,0,0,0,0,0,9.81,1,0,0,0,1\n0.01,0,0,0,0,0,9.81,0.9,0,0,0,1\n"
        with pytest.raises(SequenceFormatError, match="row 4"):
            load_sequence(self._write(tmp_path, head + rows))

    def test_missing_columns(self, tmp_path):
        with pytest.raises(SequenceFormatError, match="acc_z"):
            load_sequence(self._write(tmp_path, "t,gyr_x,gyr_y,gyr_z,acc_x,acc_y,qw,qx,qy,qz,valid\n"))

    def test_non_monotone_time(self, tmp_path):
        head = "t,gyr_x,gyr_y,gyr_z,acc_x,acc_y,acc_z,qw,qx,qy,qz,valid\n"
        rows = "0,0,0,0,0,0,9.81,1,0,0,0,1\n0.02,0,0,0,0,0,9.81,1,0,0,0,1\n0.01,0,0,0,0,0,9.81,1,0,0,0,1\n"
        with pytest.raises(SequenceFormatError, match="row 4"):
            load_sequence(self._write(tmp_path, head + rows))

    def test_valid_row_without_truth(self, tmp_path):
        head = "t,gyr_x,gyr_y,gyr_z,acc_x,acc_y,acc_z,qw,qx,qy,qz,valid\n"
        rows = "0,0,0,0,0,0,9.81,1,0,0,0,1\n0.01,0,0,0,0,0,9.81,,,,,1\n"
        with pytest.raises(SequenceFormatError, match="row 3"):
            load_sequence(self._write(tmp_path, head + rows))

    def test_estimates_round_trip(self, tmp_path, rng):
        q = random_quats(rng, 30)
        t = np.arange(30) / 7.0
        save_estimates(t, q, tmp_path / "e.csv", header_comment="x")
        t2, q2 = load_estimates(tmp_path / "e.csv")
        np.testing.assert_array_equal(t2, t)
        np.testing.assert_array_equal(q2, q)


class TestScenarios:
    def test_restrictive_keeps_existing_rest(self):
        seq = prepend_rest(motion(noise=False), 5.0)
        out = build_scenario(seq, Scenario("restrictive"))
        np.testing.assert_array_equal(out.gyr, seq.gyr)
        np.testing.assert_array_equal(out.quat, seq.quat)
        assert out.meta["rest_prefix_samples"] == 500

    def test_restrictive_adds_rest(self):
        seq = motion(noise=False)
        out = build_scenario(seq, Scenario("restrictive", rest_duration=5.0))
        assert len(out) == len(seq) + 500

    def test_partial_minus_restrictive_is_bias(self):
        seq = motion()
        r = build_scenario(seq, Scenario("restrictive", seed=3))
        p = build_scenario(seq, Scenario("partially_restrictive", seed=3))
        diff = p.gyr - r.gyr
        np.testing.assert_allclose(diff, np.tile(diff[0], (len(diff), 1)), atol=1e-15)
        assert np.linalg.norm(diff[0]) > 0
        np.testing.assert_array_equal(p.acc, r.acc)

    def test_realistic_is_partial_without_prefix(self):
        seq = motion()
        p = build_scenario(seq, Scenario("partially_restrictive", seed=3))
        q = build_scenario(seq, Scenario("realistic", seed=3))
        n = p.meta["rest_prefix_samples"]
        assert len(q) == len(p) - n
        np.testing.assert_array_equal(q.gyr, p.gyr[n:])
        assert q.t[0] == 0.0
        assert np.linalg.norm(q.gyr[0]) > STILL_GYR

    def test_deterministic_and_per_sequence(self):
        a = build_scenario(motion(1), Scenario("partially_restrictive", seed=1))
        b = build_scenario(motion(1), Scenario("partially_restrictive", seed=1))
        c = build_scenario(motion(2), Scenario("partially_restrictive", seed=1))
        np.testing.assert_array_equal(a.gyr, b.gyr)
        assert not np.array_equal(a.gyr_bias, c.gyr_bias)

    def test_detector_on_imported_data(self):
        seq = prepend_rest(motion(noise=False), 3.0)
        seq.meta.clear()
        n = detect_rest_prefix(seq)
        assert 300 <= n <= 300 + 30  # the onset of motion is slow, so a few samples may pass as still
        assert detect_rest_prefix(motion(noise=False)) == 0

    def test_invalid(self):
        with pytest.raises(ValueError):
            Scenario("lab")
        with pytest.raises(ValueError):
            Scenario(bias_std=-1.0)


class TestRmse:
    def test_values(self, rng):
        truth = random_quats(rng, 20)
        assert rmse_deg(truth, truth) < 1e-6
        tilt = quat.multiply(quat.from_axis_angle([1, 0, 0], 10 * DEG), truth)  # earth-frame tilt
        assert rmse_deg(tilt, truth) == pytest.approx(10.0, abs=1e-9)
        half = truth.copy()
        half[10:] = tilt[10:]
        assert rmse_deg(half, truth) == pytest.approx(np.sqrt(50), abs=1e-9)

    def test_mask_and_heading(self, rng):
        truth, est = random_quats(rng, 50), random_quats(rng, 50)
        mask = np.arange(50) < 25
        assert rmse_deg(est, truth, mask) == pytest.approx(rmse_deg(est[:25], truth[:25]))
        assert rmse_deg(quat.multiply(z_rotation(1.1), est), truth) == pytest.approx(rmse_deg(est, truth), abs=1e-9)
        with pytest.raises(ValueError):
            rmse_deg(est, truth, np.zeros(50, bool))


class TestEvaluate:
    def test_perfect_estimator_and_counts(self):
        seqs = [motion(s, duration=5.0) for s in range(3)]
        perfect = CallableEstimator(lambda s: s.quat, "oracle", "learned")
        fb = FilterEstimator(FilterParams("B", 0.5))
        scen = [Scenario(k) for k in ("restrictive", "partially_restrictive", "realistic")]
        rep = evaluate([perfect, fb], seqs, scen)
        assert len(rep.rows) == 2 * 3 * 3
        assert all(r.rmse_deg < 1e-6 for r in rep.rows if r.estimator == "oracle")
        keys = [(r.estimator, r.dataset, r.sequence, r.scenario, r.rate_hz) for r in rep.rows]
        assert keys == sorted(keys)

    def test_aggregates_consistent(self):
        rep = evaluate([FilterEstimator(FilterParams("A", 0.1))], [motion(s, 5.0) for s in range(4)], [None])
        agg = rep.aggregates
        assert len(agg) == 1
        (v,) = agg.values()
        vals = [r.rmse_deg for r in rep.rows]
        assert v["mean"] == float(np.mean(vals)) and v["max"] == max(vals) and v["median"] == float(np.median(vals))

    def test_failures_recorded(self):
        def boom(seq):
            raise RuntimeError("broken")
        rep = evaluate([CallableEstimator(boom, "bad")], [motion(0, 2.0)], [None])
        assert len(rep.rows) == 1 and "broken" in rep.rows[0].error
        assert rep.summary()["failed"] == 1

    def test_threads_do_not_change_result(self):
        seqs = [motion(s, 5.0) for s in range(3)]
        est = [FilterEstimator(FilterParams("B", 0.4, 0.01))]
        a = evaluate(est, seqs, [Scenario("realistic", seed=2)], threads=1)
        b = evaluate(est, seqs, [Scenario("realistic", seed=2)], threads=3)
        assert a == b

    def test_filter_beats_biased_strapdown(self):
        train = [motion(s, 30.0) for s in range(3)]
        grid = [{"gain": g, "ki": k} for g in (0.1, 0.3, 1.0) for k in (0.0, 0.01)]
        tuned = tune_filter("B", [build_scenario(s, Scenario("realistic", seed=9)) for s in train], grid=grid)
        test = [motion(s, 30.0) for s in range(10, 14)]
        rep = evaluate([FilterEstimator(tuned, "tuned"), StrapdownEstimator()], test, [Scenario("realistic")])
        assert rep.mean("tuned") < rep.mean("strapdown")

    def test_write_outputs(self, tmp_path):
        rep = evaluate([FilterEstimator(FilterParams("A", 0.1))], [motion(0, 2.0)], [None])
        rep.write_csv(tmp_path / "r.csv")
        rep.write_summary(tmp_path / "s.json")
        assert (tmp_path / "r.csv").read_text().startswith("estimator,dataset,sequence,scenario,rate_hz,rmse_deg")


class TestSweep:
    def test_native_rate_matches_evaluate(self):
        seqs = [motion(s, 10.0) for s in range(2)]
        fb = FilterEstimator(FilterParams("B", 0.5))
        sc = Scenario("realistic", seed=4)
        sweep = frequency_sweep(fb, seqs, [100.0], sc)
        plain = evaluate([fb], seqs, [sc])
        for a, b in zip(sweep.rows, plain.rows):
            assert abs(a.rmse_deg - b.rmse_deg) < 1e-9

    def test_rows_and_consistency(self):
        seqs = [motion(s, 30.0, amp=1.0, noise=False) for s in range(3)]
        seqs = [inject_errors(s, ErrorSpec(0.3 * DEG, 0.1, 0.0, seed=i)) for i, s in enumerate(seqs)]
        rates = [50.0, 100.0, 200.0, 350.0, 500.0]
        fb = FilterEstimator(FilterParams("B", 0.5, 0.01))
        rep = frequency_sweep(fb, seqs, rates, Scenario("restrictive"))
        assert len(rep.rows) == 3 * 5
        means = [np.mean([r.rmse_deg for r in rep.rows if r.rate_hz == f]) for f in rates]
        assert (max(means) - min(means)) / min(means) < 0.3
