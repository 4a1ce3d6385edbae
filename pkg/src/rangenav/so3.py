"""Small-vector and rotation helpers shared by the simulator and the filter."""

from __future__ import annotations

import math

import numpy as np

# below this angle the Rodrigues coefficients are replaced by their Taylor series
SMALL_ANGLE = 1e-7


def skew(v) -> np.ndarray:
    """Return the cross-product matrix of `v`, so that ``skew(v) @ w == cross(v, w)``."""
    x, y, z = v
    return np.array(
        [
            [0.0, -z, y],
            [z, 0.0, -x],
            [-y, x, 0.0],
        ]
    )


def rotvec_to_rotation(phi) -> np.ndarray:
    """Exponential map from a rotation vector [rad] to a rotation matrix.

    Parameters
    ----------
    phi : array_like, shape (3,)
        Rotation axis scaled by the rotation angle.

    Returns
    -------
    ndarray, shape (3, 3)
        ``exp(skew(phi))`` evaluated with Rodrigues' formula.
    """
    x, y, z = (float(u) for u in phi)
    th2 = x * x + y * y + z * z
    if th2 < SMALL_ANGLE**2:
        a = 1.0 - th2 / 6.0
        b = 0.5 - th2 / 24.0
    else:
        th = math.sqrt(th2)
        a = math.sin(th) / th
        b = (1.0 - math.cos(th)) / th2
    # I + a K + b K^2 written out; K^2 = phi phi^T - |phi|^2 I
    return np.array(
        [
            [1.0 - b * (y * y + z * z), b * x * y - a * z, b * x * z + a * y],
            [b * x * y + a * z, 1.0 - b * (x * x + z * z), b * y * z - a * x],
            [b * x * z - a * y, b * y * z + a * x, 1.0 - b * (x * x + y * y)],
        ]
    )


def rotation_angle_deg(Ra, Rb) -> float:
    """Geodesic distance between two rotations, in degrees within [0, 180]."""
    c = 0.5 * (np.trace(np.asarray(Ra).T @ np.asarray(Rb)) - 1.0)
    return float(np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))


def orthonormalize(M) -> np.ndarray:
    """Nearest rotation matrix to `M` in the Frobenius sense (polar factor)."""
    U, _, Vt = np.linalg.svd(np.asarray(M, dtype=float))
    R = U @ Vt
    if np.linalg.det(R) < 0.0:
        U[:, -1] *= -1.0
        R = U @ Vt
    return R


def rot_z(yaw) -> np.ndarray:
    """Rotation about z by `yaw` [rad]; an array of angles gives a stack of matrices."""
    yaw = np.asarray(yaw, dtype=float)
    c, s = np.cos(yaw), np.sin(yaw)
    R = np.zeros(yaw.shape + (3, 3))
    R[..., 0, 0], R[..., 0, 1] = c, -s
    R[..., 1, 0], R[..., 1, 1] = s, c
    R[..., 2, 2] = 1.0
    return R


def euler_zyx_deg(R) -> np.ndarray:
    """Yaw, pitch, roll in degrees for ``R = Rz(yaw) Ry(pitch) Rx(roll)``.

    Accepts a single rotation or a stack of shape ``(..., 3, 3)``. Only used
    for logging; the filter never works in Euler angles.
    """
    R = np.asarray(R)
    yaw = np.arctan2(R[..., 1, 0], R[..., 0, 0])
    pitch = -np.arcsin(np.clip(R[..., 2, 0], -1.0, 1.0))
    roll = np.arctan2(R[..., 2, 1], R[..., 2, 2])
    return np.degrees(np.stack([yaw, pitch, roll], axis=-1))


def is_rotation(R, tol: float = 1e-9) -> bool:
    R = np.asarray(R, dtype=float)
    return (
        R.shape == (3, 3)
        and bool(np.all(np.isfinite(R)))
        and np.allclose(R.T @ R, np.eye(3), rtol=0.0, atol=tol)
        and abs(np.linalg.det(R) - 1.0) <= tol
    )
