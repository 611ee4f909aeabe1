"""Unit-quaternion algebra and the heading-free attitude error.

Conventions used everywhere in the package:

* quaternions are ``[w, x, y, z]`` (scalar first), composed with the Hamilton
  product;
* an orientation ``q`` maps sensor coordinates to earth coordinates,
  ``v_E = q ⊗ v_S ⊗ q⁻¹``;
* the earth z-axis ``E_Z`` points up (opposite to gravity).

All functions broadcast over leading dimensions, so ``(4,)`` and ``(N, 4)``
arrays are both accepted.
"""
import numpy as np

from ._backend import kernel

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])
E_Z = np.array([0.0, 0.0, 1.0])


def _as_finite(x, name, last):
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (last,):
        raise ValueError(f"{name} must have trailing dimension {last}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x


def normalize(q):
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def _hamilton(a, b):
    w1, x1, y1, z1 = np.moveaxis(a, -1, 0)
    w2, x2, y2, z2 = np.moveaxis(b, -1, 0)
    return np.stack(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ],
        axis=-1,
    )


def multiply(a, b):
    """Hamilton product ``a ⊗ b``, renormalized."""
    a = _as_finite(a, "a", 4)
    b = _as_finite(b, "b", 4)
    return normalize(_hamilton(a, b))


def inverse(q):
    q = _as_finite(q, "q", 4)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def rotate_vec(q, v):
    """Rotate ``v`` by ``q``: sensor-frame ``v`` is returned in earth coordinates."""
    q = _as_finite(q, "q", 4)
    v = _as_finite(v, "v", 3)
    w = q[..., :1]
    u = q[..., 1:]
    # v' = v + 2w(u×v) + 2u×(u×v), valid for unit q
    t = 2.0 * np.cross(u, v)
    return v + w * t + np.cross(u, t)


def from_axis_angle(axis, angle):
    axis = _as_finite(axis, "axis", 3)
    angle = np.asarray(angle, dtype=float)
    n = np.linalg.norm(axis, axis=-1)
    if np.any((n == 0.0) & (angle != 0.0)):
        raise ValueError("zero rotation axis with nonzero angle")
    unit = np.divide(axis, n[..., None], out=np.zeros_like(axis), where=n[..., None] > 0)
    half = 0.5 * angle
    return np.concatenate([np.cos(half)[..., None], np.sin(half)[..., None] * unit], axis=-1)


def rotation_vector(q):
    """Axis times angle in radians (angle in [0, π], sign of ``q`` ignored)."""
    q = np.asarray(q, dtype=float)
    q = np.where(q[..., :1] < 0, -q, q)
    s = np.linalg.norm(q[..., 1:], axis=-1)
    ang = 2.0 * np.arctan2(s, q[..., 0])
    scale = np.divide(ang, s, out=np.full_like(s, 2.0), where=s > 1e-300)
    return q[..., 1:] * scale[..., None]


def rotation_angle(q):
    """Rotation angle in [0, π] of ``q``."""
    q = np.asarray(q, dtype=float)
    return 2.0 * np.arctan2(np.linalg.norm(q[..., 1:], axis=-1), np.abs(q[..., 0]))


def integrate_gyro(q, omega, dt):
    """Exact orientation update for a rate ``omega`` (rad/s, sensor frame) held for ``dt`` seconds."""
    if np.any(np.asarray(dt) <= 0):
        raise ValueError("dt must be positive")
    omega = _as_finite(omega, "omega", 3)
    rate = np.linalg.norm(omega, axis=-1)
    return multiply(q, from_axis_angle(omega, rate * np.asarray(dt, dtype=float)))


def _err_components(q_true, q_est):
    # components of q_true ⊗ q_est⁻¹ without the finite/normalize overhead of multiply
    a0, a1, a2, a3 = np.moveaxis(q_true, -1, 0)
    p0, p1, p2, p3 = np.moveaxis(q_est, -1, 0)
    w = a0 * p0 + a1 * p1 + a2 * p2 + a3 * p3
    x = -a0 * p1 + a1 * p0 - a2 * p3 + a3 * p2
    y = -a0 * p2 + a1 * p3 + a2 * p0 - a3 * p1
    z = a3 * p0 + a2 * p1 - a1 * p2 - a0 * p3
    return w, x, y, z


def _err_wz(q_true, q_est):
    w, _, _, z = _err_components(q_true, q_est)
    return w, z


def attitude_error(q_true, q_est):
    """Heading-free attitude error in radians, ``2·arccos√(w² + z²)`` of ``q_true ⊗ q_est⁻¹``.

    Equals the angle between the vertical axis as seen from the true and from
    the estimated sensor frame. Result lies in [0, π].
    """
    q_true = _as_finite(q_true, "q_true", 4)
    q_est = _as_finite(q_est, "q_est", 4)
    w, x, y, z = _err_components(normalize(q_true), normalize(q_est))
    # atan2 form of the same angle; stays accurate near 0 where arccos does not
    return 2.0 * np.arctan2(np.sqrt(x * x + y * y), np.sqrt(w * w + z * z))


def decompose_error(q_err):
    """Split ``q_err`` into ``(q_head, q_att)`` with ``q_err = q_head ⊗ q_att``.

    ``q_head`` rotates about the earth z-axis; ``q_att`` rotates about a
    horizontal axis by the attitude error. When ``w = z = 0`` (a half-turn about
    a horizontal axis) the heading is undefined and is returned as identity.
    """
    q_err = normalize(_as_finite(q_err, "q_err", 4))
    w = q_err[..., 0]
    z = q_err[..., 3]
    s = np.sqrt(w * w + z * z)
    degenerate = s < 1e-15
    safe = np.where(degenerate, 1.0, s)
    zero = np.zeros_like(w)
    q_head = np.stack([np.where(degenerate, 1.0, w / safe), zero, zero, np.where(degenerate, 0.0, z / safe)], axis=-1)
    q_att = multiply(inverse(q_head), q_err)
    q_att[..., 3] = 0.0
    return q_head, normalize(q_att)


def slerp(a, b, t):
    """Spherical linear interpolation along the shorter arc from ``a`` (t=0) to ``b`` (t=1)."""
    a = normalize(_as_finite(a, "a", 4))
    b = normalize(_as_finite(b, "b", 4))
    t = np.asarray(t, dtype=float)[..., None]
    dot = np.sum(a * b, axis=-1, keepdims=True)
    b = np.where(dot < 0, -b, b)
    dot = np.abs(dot)
    close = dot > 1.0 - 1e-10
    theta = np.arccos(np.clip(dot, -1.0, 1.0))
    sin_theta = np.where(close, 1.0, np.sin(theta))
    wa = np.where(close, 1.0 - t, np.sin((1.0 - t) * theta) / sin_theta)
    wb = np.where(close, t, np.sin(t * theta) / sin_theta)
    return normalize(wa * a + wb * b)


# --- scalar kernels shared by the sequential loops --------------------------


@kernel
def quat_mul_into(a, b, out):
    w1, x1, y1, z1 = a[0], a[1], a[2], a[3]
    w2, x2, y2, z2 = b[0], b[1], b[2], b[3]
    out[0] = w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2
    out[1] = w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2
    out[2] = w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2
    out[3] = w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2


@kernel
def integrate_into(q, wx, wy, wz, dt, out):
    """Write ``normalize(q ⊗ exp(ω·dt/2))`` into ``out``; ``out`` may alias ``q``."""
    rate = np.sqrt(wx * wx + wy * wy + wz * wz)
    w0, x0, y0, z0 = q[0], q[1], q[2], q[3]
    if rate > 0.0:
        half = 0.5 * rate * dt
        c = np.cos(half)
        s = np.sin(half) / rate
        dx = s * wx
        dy = s * wy
        dz = s * wz
        w = w0 * c - x0 * dx - y0 * dy - z0 * dz
        x = w0 * dx + x0 * c + y0 * dz - z0 * dy
        y = w0 * dy - x0 * dz + y0 * c + z0 * dx
        z = w0 * dz + x0 * dy - y0 * dx + z0 * c
    else:
        w, x, y, z = w0, x0, y0, z0
    n = np.sqrt(w * w + x * x + y * y + z * z)
    out[0] = w / n
    out[1] = x / n
    out[2] = y / n
    out[3] = z / n


@kernel
def strapdown_kernel(q0, gyr, dt):
    n = gyr.shape[0]
    out = np.empty((n, 4))
    out[0, :] = q0
    for k in range(1, n):
        integrate_into(out[k - 1], gyr[k, 0], gyr[k, 1], gyr[k, 2], dt[k], out[k])
    return out
