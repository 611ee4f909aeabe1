import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attitude6d import quat
from conftest import DEG, random_quats, z_rotation

unit_quats = st.lists(st.floats(-1, 1), min_size=4, max_size=4).filter(
    lambda v: np.linalg.norm(v) > 1e-3
).map(lambda v: np.asarray(v) / np.linalg.norm(v))
vectors = st.lists(st.floats(-100, 100), min_size=3, max_size=3).map(np.asarray)


def vertical_angle(q_true, q_est):
    """Angle between the earth vertical as seen from the two sensor frames."""
    u = quat.rotate_vec(quat.inverse(q_true), quat.E_Z)
    v = quat.rotate_vec(quat.inverse(q_est), quat.E_Z)
    return np.arctan2(np.linalg.norm(np.cross(u, v), axis=-1), np.sum(u * v, axis=-1))


class TestMultiply:
    def test_identity_element(self, rng):
        q = random_quats(rng, 5)
        np.testing.assert_allclose(quat.multiply(quat.IDENTITY, q), q, atol=1e-15)

    def test_ij_is_k(self):
        np.testing.assert_allclose(quat.multiply([0, 1, 0, 0], [0, 0, 1, 0]), [0, 0, 0, 1], atol=1e-15)

    def test_inverse_gives_identity(self, rng):
        q = random_quats(rng, 100)
        out = quat.multiply(q, quat.inverse(q))
        np.testing.assert_allclose(out, np.tile(quat.IDENTITY, (100, 1)), atol=1e-9)

    def test_associative(self, rng):
        a, b, c = random_quats(rng, 3)
        left = quat.multiply(quat.multiply(a, b), c)
        right = quat.multiply(a, quat.multiply(b, c))
        np.testing.assert_allclose(left, right, atol=1e-12)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            quat.multiply([np.nan, 0, 0, 0], quat.IDENTITY)

    @given(unit_quats, unit_quats)
    def test_unit_norm(self, a, b):
        assert abs(np.linalg.norm(quat.multiply(a, b)) - 1) < 1e-9


class TestInverseAndRotation:
    def test_inverse_values(self):
        np.testing.assert_array_equal(quat.inverse([1, 0, 0, 0]), [1, 0, 0, 0])
        np.testing.assert_array_equal(quat.inverse([0, 1, 0, 0]), [0, -1, 0, 0])

    def test_involution(self, rng):
        q = random_quats(rng, 10)
        np.testing.assert_array_equal(quat.inverse(quat.inverse(q)), q)

    def test_rotate_identity(self):
        np.testing.assert_allclose(quat.rotate_vec(quat.IDENTITY, [1, 2, 3]), [1, 2, 3])

    def test_rotate_z90(self):
        q = quat.from_axis_angle([0, 0, 1], np.pi / 2)
        np.testing.assert_allclose(quat.rotate_vec(q, [1, 0, 0]), [0, 1, 0], atol=1e-15)

    @given(unit_quats, vectors)
    def test_isometry(self, q, v):
        assert abs(np.linalg.norm(quat.rotate_vec(q, v)) - np.linalg.norm(v)) < 1e-9 * max(1, np.linalg.norm(v))

    def test_matches_sandwich_product(self, rng):
        q = random_quats(rng, 20)
        v = rng.normal(size=(20, 3))
        pure = np.hstack([np.zeros((20, 1)), v])
        ref = quat._hamilton(quat._hamilton(q, pure), quat.inverse(q))[:, 1:]
        np.testing.assert_allclose(quat.rotate_vec(q, v), ref, atol=1e-12)


class TestAxisAngle:
    def test_zero_angle(self):
        np.testing.assert_array_equal(quat.from_axis_angle([0, 0, 1], 0.0), [1, 0, 0, 0])

    def test_quarter_turn_x(self):
        s = np.sqrt(0.5)
        np.testing.assert_allclose(quat.from_axis_angle([1, 0, 0], np.pi / 2), [s, s, 0, 0], atol=1e-15)

    def test_full_turn_is_minus_identity(self):
        q = quat.from_axis_angle([0.3, -1, 2], 2 * np.pi)
        np.testing.assert_allclose(q, [-1, 0, 0, 0], atol=1e-15)
        assert quat.rotation_angle(q) < 1e-15

    def test_zero_axis_nonzero_angle(self):
        with pytest.raises(ValueError):
            quat.from_axis_angle([0, 0, 0], 0.1)


class TestIntegrateGyro:
    def test_zero_rate(self, rng):
        q = random_quats(rng, 1)[0]
        np.testing.assert_allclose(quat.integrate_gyro(q, [0, 0, 0], 0.01), q, atol=1e-15)

    def test_quarter_turn(self):
        out = quat.integrate_gyro(quat.IDENTITY, [0, 0, np.pi / 2], 1.0)
        np.testing.assert_allclose(out, quat.from_axis_angle([0, 0, 1], np.pi / 2), atol=1e-15)

    def test_many_small_steps_match_closed_form(self):
        q = quat.IDENTITY
        for _ in range(100):
            q = quat.integrate_gyro(q, [0, 0, 0.1], 0.01)
        # closed form for constant rate: one rotation of 0.1 rad about z
        ref = quat.from_axis_angle([0, 0, 1], 0.1)
        assert quat.rotation_angle(quat.multiply(quat.inverse(ref), q)) < 1e-9
        assert abs(np.linalg.norm(q) - 1) < 1e-9

    def test_scalar_kernel_agrees(self, rng):
        q = random_quats(rng, 1)[0]
        w = rng.normal(size=3)
        out = np.empty(4)
        quat.integrate_into(q, w[0], w[1], w[2], 0.013, out)
        np.testing.assert_allclose(out, quat.integrate_gyro(q, w, 0.013), atol=1e-15)

    def test_bad_dt(self):
        with pytest.raises(ValueError):
            quat.integrate_gyro(quat.IDENTITY, [0, 0, 1], 0.0)


class TestAttitudeError:
    def test_equal_is_zero(self, rng):
        q = random_quats(rng, 50)
        assert np.all(quat.attitude_error(q, q) < 1e-7)

    def test_pure_heading_error_is_zero(self, rng):
        q = random_quats(rng, 50)
        heading = np.array([z_rotation(a) for a in rng.uniform(-np.pi, np.pi, 50)])
        est = quat.multiply(heading, q)
        assert np.all(quat.attitude_error(q, est) < 1e-7)

    def test_quarter_turn_about_x(self):
        est = quat.from_axis_angle([1, 0, 0], np.pi / 2)
        assert abs(quat.attitude_error(quat.IDENTITY, est) - np.pi / 2) < 1e-12

    def test_equals_vertical_axis_angle(self, rng):
        q_true = random_quats(rng, 1000)
        q_est = random_quats(rng, 1000)
        np.testing.assert_allclose(quat.attitude_error(q_true, q_est), vertical_angle(q_true, q_est), atol=1e-9)

    def test_heading_invariance(self, rng):
        q_true = random_quats(rng, 1000)
        q_est = random_quats(rng, 1000)
        heading = np.array([z_rotation(a) for a in rng.uniform(-np.pi, np.pi, 1000)])
        base = quat.attitude_error(q_true, q_est)
        np.testing.assert_allclose(quat.attitude_error(q_true, quat.multiply(heading, q_est)), base, atol=1e-9)

    def test_symmetric(self, rng):
        a, b = random_quats(rng, 200), random_quats(rng, 200)
        np.testing.assert_allclose(quat.attitude_error(a, b), quat.attitude_error(b, a), atol=1e-12)

    def test_range(self, rng):
        e = quat.attitude_error(random_quats(rng, 500), random_quats(rng, 500))
        assert np.all((e >= 0) & (e <= np.pi))

    def test_error_quaternion_identity(self, rng):
        # q ⊗ (q̂⁻¹ ⊗ q) ⊗ q⁻¹ = q ⊗ q̂⁻¹
        q, qh = random_quats(rng, 2)
        lhs = quat.multiply(quat.multiply(q, quat.multiply(quat.inverse(qh), q)), quat.inverse(q))
        np.testing.assert_allclose(lhs, quat.multiply(q, quat.inverse(qh)), atol=1e-12)


class TestDecompose:
    def test_identity(self):
        head, att = quat.decompose_error(quat.IDENTITY)
        np.testing.assert_allclose(head, quat.IDENTITY)
        np.testing.assert_allclose(att, quat.IDENTITY)

    def test_pure_heading(self):
        q = z_rotation(0.7)
        head, att = quat.decompose_error(q)
        np.testing.assert_allclose(head, q, atol=1e-15)
        np.testing.assert_allclose(att, quat.IDENTITY, atol=1e-15)

    def test_reconstruction_and_angle(self, rng):
        q_true, q_est = random_quats(rng, 500), random_quats(rng, 500)
        err = quat.multiply(q_true, quat.inverse(q_est))
        head, att = quat.decompose_error(err)
        rebuilt = quat.multiply(head, att)
        same = np.minimum(np.linalg.norm(rebuilt - err, axis=1), np.linalg.norm(rebuilt + err, axis=1))
        assert same.max() < 1e-9
        np.testing.assert_allclose(head[:, 1:3], 0, atol=1e-15)
        np.testing.assert_allclose(att[:, 3], 0, atol=1e-15)
        np.testing.assert_allclose(quat.rotation_angle(att), quat.attitude_error(q_true, q_est), atol=1e-9)
        np.testing.assert_allclose(vertical_angle(q_true, q_est), quat.attitude_error(q_true, q_est), atol=1e-9)

    def test_degenerate_half_turn(self):
        head, att = quat.decompose_error([0, 1, 0, 0])
        np.testing.assert_array_equal(head, quat.IDENTITY)
        np.testing.assert_allclose(att, [0, 1, 0, 0])


class TestSlerp:
    def test_endpoints(self, rng):
        a, b = random_quats(rng, 2)
        np.testing.assert_allclose(quat.slerp(a, b, 0.0), a, atol=1e-15)
        np.testing.assert_allclose(np.abs(quat.slerp(a, b, 1.0)), np.abs(b), atol=1e-15)

    def test_midpoint(self):
        mid = quat.slerp(quat.IDENTITY, quat.from_axis_angle([1, 0, 0], np.pi / 2), 0.5)
        np.testing.assert_allclose(mid, quat.from_axis_angle([1, 0, 0], np.pi / 4), atol=1e-15)

    def test_geodesic_fraction(self, rng):
        a, b = random_quats(rng, 200), random_quats(rng, 200)
        t = rng.uniform(0, 1, 200)
        out = quat.slerp(a, b, t)
        full = quat.rotation_angle(quat.multiply(quat.inverse(a), b))
        part = quat.rotation_angle(quat.multiply(quat.inverse(a), out))
        np.testing.assert_allclose(part, t * full, atol=1e-9)
        assert np.max(np.abs(np.linalg.norm(out, axis=1) - 1)) < 1e-9

    def test_shorter_arc(self):
        a = quat.IDENTITY
        b = -quat.from_axis_angle([0, 1, 0], 0.2)
        mid = quat.slerp(a, b, 0.5)
        assert abs(quat.rotation_angle(mid) - 0.1) < 1e-12

    def test_nearly_equal_falls_back(self):
        a = quat.IDENTITY
        b = quat.from_axis_angle([0, 0, 1], 1e-9)
        out = quat.slerp(a, b, 0.5)
        assert abs(np.linalg.norm(out) - 1) < 1e-12
        assert abs(quat.rotation_angle(out) - 5e-10) < 1e-15
