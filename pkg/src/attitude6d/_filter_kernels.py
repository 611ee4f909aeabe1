"""Sequential complementary-filter loops (numba-compiled when available)."""
import numpy as np

from ._backend import kernel
from .quat import integrate_into

ACC_MIN = 1e-6
GRAD_MIN = 1e-12


@kernel
def run_gradient_filter(q_init, gyr, acc, dt, beta, out):
    """IMU-only gradient-descent filter.

    Each step integrates the gyroscope exactly, then moves the quaternion by
    ``beta·dt`` against the normalized gradient of the gravity-mismatch
    objective ``f(q) = Rᵀ(q)·e_z − a/|a|`` evaluated at the previous estimate.
    """
    q = q_init.copy()
    tmp = np.empty(4)
    for k in range(gyr.shape[0]):
        q0, q1, q2, q3 = q[0], q[1], q[2], q[3]
        integrate_into(q, gyr[k, 0], gyr[k, 1], gyr[k, 2], dt[k], tmp)
        ax, ay, az = acc[k, 0], acc[k, 1], acc[k, 2]
        an = np.sqrt(ax * ax + ay * ay + az * az)
        if an >= ACC_MIN and beta > 0.0:
            ax /= an
            ay /= an
            az /= an
            f1 = 2.0 * (q1 * q3 - q0 * q2) - ax
            f2 = 2.0 * (q0 * q1 + q2 * q3) - ay
            f3 = 2.0 * (0.5 - q1 * q1 - q2 * q2) - az
            # Jᵀ f
            s0 = -2.0 * q2 * f1 + 2.0 * q1 * f2
            s1 = 2.0 * q3 * f1 + 2.0 * q0 * f2 - 4.0 * q1 * f3
            s2 = -2.0 * q0 * f1 + 2.0 * q3 * f2 - 4.0 * q2 * f3
            s3 = 2.0 * q1 * f1 + 2.0 * q2 * f2
            sn = np.sqrt(s0 * s0 + s1 * s1 + s2 * s2 + s3 * s3)
            if sn > GRAD_MIN:
                step = beta * dt[k] / sn
                tmp[0] -= step * s0
                tmp[1] -= step * s1
                tmp[2] -= step * s2
                tmp[3] -= step * s3
                n = np.sqrt(tmp[0] ** 2 + tmp[1] ** 2 + tmp[2] ** 2 + tmp[3] ** 2)
                tmp /= n
        q[:] = tmp
        out[k, :] = q
    return q


@kernel
def run_pi_filter(q_init, bias_init, gyr, acc, dt, kp, ki, out):
    """Passive complementary filter with proportional-integral rate correction.

    The rate error is ``a/|a| × v̂`` where ``v̂ = Rᵀ(q)·e_z`` is the predicted
    up-direction in sensor coordinates. Returns ``(q, bias_integral)``.
    """
    q = q_init.copy()
    bint = bias_init.copy()
    for k in range(gyr.shape[0]):
        q0, q1, q2, q3 = q[0], q[1], q[2], q[3]
        wx, wy, wz = gyr[k, 0], gyr[k, 1], gyr[k, 2]
        ax, ay, az = acc[k, 0], acc[k, 1], acc[k, 2]
        an = np.sqrt(ax * ax + ay * ay + az * az)
        if an >= ACC_MIN:
            ax /= an
            ay /= an
            az /= an
            vx = 2.0 * (q1 * q3 - q0 * q2)
            vy = 2.0 * (q0 * q1 + q2 * q3)
            vz = q0 * q0 - q1 * q1 - q2 * q2 + q3 * q3
            ex = ay * vz - az * vy
            ey = az * vx - ax * vz
            ez = ax * vy - ay * vx
            if ki > 0.0:
                bint[0] += ki * ex * dt[k]
                bint[1] += ki * ey * dt[k]
                bint[2] += ki * ez * dt[k]
            wx += kp * ex + bint[0]
            wy += kp * ey + bint[1]
            wz += kp * ez + bint[2]
        integrate_into(q, wx, wy, wz, dt[k], q)
        out[k, :] = q
    return q, bint
