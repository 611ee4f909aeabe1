import numpy as np
import pytest

from attitude6d import quat
from attitude6d.imu_sim import ErrorSpec, MotionProfile, generate, inject_errors, prepend_rest, strapdown_gyro
from attitude6d.sequence import GRAVITY
from conftest import DEG, random_quats


def smooth(seed=0, duration=10.0, trans=0.0, amp=2.0):
    return MotionProfile("random_smooth", amp, (0.05, 2.0), trans, duration, seed)


class TestGenerate:
    def test_rest(self, rng):
        q0 = random_quats(rng, 1)[0]
        seq = generate(MotionProfile("rest", 0.0, duration=3.0), 50.0, q0=q0)
        assert np.all(seq.gyr == 0)
        np.testing.assert_allclose(seq.quat, np.tile(q0, (len(seq), 1)), atol=1e-15)
        np.testing.assert_allclose(seq.acc, np.tile(quat.rotate_vec(quat.inverse(q0), GRAVITY * quat.E_Z), (len(seq), 1)), atol=1e-12)
        np.testing.assert_allclose(np.linalg.norm(seq.acc, axis=1), GRAVITY, atol=1e-9)

    def test_constant_rate_closed_form(self):
        seq = generate(MotionProfile("constant_rate", 0.5, duration=2.0, axis=(0, 0, 1)), 100.0)
        np.testing.assert_allclose(seq.gyr, np.tile([0, 0, 0.5], (200, 1)))
        ref = quat.from_axis_angle([0, 0, 1], 1.0)
        assert np.max(np.abs(seq.quat[-1] - ref)) < 1e-6

    @pytest.mark.parametrize("kind", ["sinusoidal_multi_axis", "random_smooth"])
    def test_strapdown_self_consistency(self, kind):
        seq = generate(MotionProfile(kind, 3.0, (0.05, 2.0), 0.0, 60.0, 7), 100.0)
        est = strapdown_gyro(seq, seq.quat[0])
        assert np.max(quat.attitude_error(seq.quat, est)) < 0.01 * DEG
        np.testing.assert_allclose(np.linalg.norm(seq.acc, axis=1), GRAVITY, atol=1e-9)
        assert np.all(seq.valid)

    def test_translation_term(self):
        seq = generate(smooth(trans=2.0), 100.0)
        # removing gravity leaves an earth-frame acceleration bounded by the amplitude per axis
        lin = quat.rotate_vec(seq.quat, seq.acc) - GRAVITY * quat.E_Z
        assert np.max(np.abs(lin)) <= 2.0 + 1e-9
        assert np.max(np.abs(lin)) > 1.0

    def test_deterministic_and_seeded(self):
        a, b, c = generate(smooth(1), 50.0), generate(smooth(1), 50.0), generate(smooth(2), 50.0)
        np.testing.assert_array_equal(a.gyr, b.gyr)
        assert not np.array_equal(a.gyr, c.gyr)

    def test_amplitude_respected(self):
        seq = generate(smooth(amp=1.5), 100.0)
        assert np.max(np.abs(seq.gyr)) == pytest.approx(1.5)

    @pytest.mark.parametrize("bad", [
        dict(duration=0.0), dict(amplitude=-1.0), dict(kind="spin"), dict(frequency_band=(2.0, 1.0)),
    ])
    def test_invalid_profile(self, bad):
        fields = dict(kind="random_smooth", amplitude=1.0, frequency_band=(0.1, 1.0), duration=1.0)
        fields.update(bad)
        with pytest.raises(ValueError):
            generate(MotionProfile(**fields), 100.0)

    def test_invalid_rate(self):
        with pytest.raises(ValueError):
            generate(smooth(), 0.5)


class TestInjectErrors:
    def test_zero_spec_is_identity(self):
        seq = generate(smooth(), 100.0)
        out = inject_errors(seq, ErrorSpec(seed=3))
        np.testing.assert_array_equal(out.gyr, seq.gyr)
        np.testing.assert_array_equal(out.acc, seq.acc)
        np.testing.assert_array_equal(out.quat, seq.quat)

    def test_bias_only(self):
        seq = generate(smooth(), 100.0)
        out = inject_errors(seq, ErrorSpec(gyr_bias_std=0.5 * DEG, seed=4))
        drawn = np.random.default_rng(4).normal(size=3) * 0.5 * DEG
        np.testing.assert_allclose(np.mean(out.gyr - seq.gyr, axis=0), drawn, atol=1e-12, rtol=0)
        np.testing.assert_allclose(out.gyr_bias, drawn, rtol=0, atol=0)
        np.testing.assert_array_equal(out.acc, seq.acc)

    def test_noise_std(self):
        seq = generate(MotionProfile("rest", 0.0, duration=1000.0), 100.0)
        assert len(seq) == 100_000
        out = inject_errors(seq, ErrorSpec(gyr_noise_std=0.01, acc_noise_std=0.2, seed=5))
        s_g = np.std(out.gyr - seq.gyr, axis=0)
        s_a = np.std(out.acc - seq.acc, axis=0)
        np.testing.assert_allclose(s_g, 0.01, rtol=0.05)
        np.testing.assert_allclose(s_a, 0.2, rtol=0.05)
        np.testing.assert_array_equal(out.quat, seq.quat)

    def test_reproducible(self):
        seq = generate(smooth(), 100.0)
        spec = ErrorSpec(0.01, 0.1, 0.01, seed=9)
        a, b = inject_errors(seq, spec), inject_errors(seq, spec)
        c = inject_errors(seq, ErrorSpec(0.01, 0.1, 0.01, seed=10))
        np.testing.assert_array_equal(a.gyr, b.gyr)
        np.testing.assert_array_equal(a.acc, b.acc)
        assert not np.array_equal(a.gyr, c.gyr)


class TestPrependRest:
    def test_zero_duration(self):
        seq = generate(smooth(), 100.0)
        out = prepend_rest(seq, 0.0)
        np.testing.assert_array_equal(out.gyr, seq.gyr)
        np.testing.assert_array_equal(out.t, seq.t)

    def test_five_seconds(self):
        seq = generate(smooth(), 100.0)
        out = prepend_rest(seq, 5.0)
        assert len(out) == len(seq) + 500
        assert np.all(out.quat[:500] == out.quat[0])
        assert out.t[0] == 0.0 and np.all(np.diff(out.t) > 0)
        assert np.var(out.gyr[:500]) == 0.0
        np.testing.assert_allclose(np.linalg.norm(out.acc[:500], axis=1), GRAVITY, atol=1e-9)
        assert out.meta["rest_prefix_samples"] == 500
        # the whole extended sequence remains strapdown-consistent
        est = strapdown_gyro(out, out.quat[0])
        assert np.max(quat.attitude_error(out.quat, est)) < 0.01 * DEG
        assert np.max(quat.rotation_angle(quat.multiply(quat.inverse(out.quat), est))) < 1e-6

    def test_biased_rest_carries_bias(self):
        seq = inject_errors(generate(smooth(), 100.0), ErrorSpec(gyr_bias_std=0.01, seed=1))
        out = prepend_rest(seq, 1.0)
        np.testing.assert_array_equal(out.gyr[:100], np.tile(seq.gyr_bias, (100, 1)))

    def test_negative(self):
        with pytest.raises(ValueError):
            prepend_rest(generate(smooth(), 100.0), -1.0)


class TestStrapdown:
    def test_zero_gyr(self, rng):
        q0 = random_quats(rng, 1)[0]
        seq = generate(MotionProfile("rest", 0.0, duration=2.0), 100.0)
        np.testing.assert_allclose(strapdown_gyro(seq, q0), np.tile(q0, (200, 1)), atol=1e-15)

    def test_bias_drift_rate(self):
        b = 1.0 * DEG
        seq = generate(MotionProfile("rest", 0.0, duration=20.0), 100.0)
        seq = seq.copy(gyr=seq.gyr + np.array([b, 0.0, 0.0]))
        est = strapdown_gyro(seq, seq.quat[0])
        err = quat.attitude_error(seq.quat, est)
        elapsed = seq.t - seq.t[0]
        np.testing.assert_allclose(err[1:], b * elapsed[1:], rtol=1e-6)

    def test_vertical_bias_does_not_drift_inclination(self):
        seq = generate(MotionProfile("rest", 0.0, duration=20.0), 100.0)
        seq = seq.copy(gyr=seq.gyr + np.array([0.0, 0.0, 0.02]))
        est = strapdown_gyro(seq, seq.quat[0])
        assert np.max(quat.attitude_error(seq.quat, est)) < 1e-6
