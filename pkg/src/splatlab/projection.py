"""Projection maps, their Jacobians, and 2D splat extraction.

Two projection paths are provided:

* the classical image-plane path: every Gaussian is projected onto the
  z = 1 plane, with the rank-2 Jacobian of x' -> x'/x'_z;
* the tangent-plane path: each Gaussian is projected onto the plane
  tangent to the unit sphere at its own mean direction, which places the
  linearization point where the approximation error is smallest.

The tangent-plane frame is carried by a rotation Q that maps the mean
direction to +z, so the third row/column of the projected covariance can
be dropped to obtain the 2x2 splat covariance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (BehindCamera, BehindTangentPlane, DegenerateDirection,
                     DegenerateSplat, PolarSingularity)
from .model import Covariance3

# Minimum distance in front of a projection plane (scene units).
EPS_NEAR = 1e-4

_DEGENERATE_NORM = 1e-12
_POLAR_EPS2 = 1e-18
_MIN_DET = 1e-18


@dataclass(frozen=True)
class TangentFrame:
    """Per-splat tangent frame: tangent point, aligning rotation, depth.

    Attributes:
        x_p: unit mean direction (the tangent point on the unit sphere).
        Q: rotation with Q @ x_p = (0, 0, 1); row 3 equals x_p.
        depth_key: Euclidean distance of the mean from the camera center.
    """

    x_p: np.ndarray
    Q: np.ndarray
    depth_key: float


@dataclass(frozen=True)
class Splat2D:
    """A Gaussian reduced to a 2D frame, ready for shading.

    On the tangent-plane path mean2d is identically (0, 0): the mean
    projects to the tangent point, which Q maps to the frame origin.  On
    the classical path mean2d is the image-plane mean.
    """

    mean2d: np.ndarray
    cov2d: np.ndarray
    inv_cov2d: np.ndarray
    depth_key: float
    color: np.ndarray
    alpha_max: float


def classic_project(x: np.ndarray) -> np.ndarray:
    """Project a camera-space point onto the z = 1 image plane."""
    x = np.asarray(x, dtype=np.float64)
    if x[2] <= EPS_NEAR:
        raise BehindCamera(f"z = {x[2]:.6g} <= {EPS_NEAR}")
    return x / x[2]


def classic_jacobian(mu: np.ndarray) -> np.ndarray:
    """Jacobian of classic_project at mu; rank 2, third row zero."""
    mu = np.asarray(mu, dtype=np.float64)
    z = mu[2]
    if z <= EPS_NEAR:
        raise BehindCamera(f"z = {z:.6g} <= {EPS_NEAR}")
    J = np.eye(3) / z
    J[:, 2] -= mu / (z * z)
    J[2, :] = 0.0
    return J


def sphere_project(x: np.ndarray) -> np.ndarray:
    """Radially project a point onto the unit sphere."""
    x = np.asarray(x, dtype=np.float64)
    n = float(np.linalg.norm(x))
    if n <= _DEGENERATE_NORM:
        raise DegenerateDirection(f"norm {n:.3e} too small")
    return x / n


def optimal_project(x: np.ndarray, x_p: np.ndarray) -> np.ndarray:
    """Project a point onto the plane tangent to the unit sphere at x_p."""
    x = np.asarray(x, dtype=np.float64)
    x_p = np.asarray(x_p, dtype=np.float64)
    t = float(x_p @ x)
    if t <= EPS_NEAR:
        raise BehindTangentPlane(f"x_p . x = {t:.6g} <= {EPS_NEAR}")
    return x / t


def optimal_jacobian(mu: np.ndarray) -> np.ndarray:
    """Jacobian of the tangent-plane projection at its own mean.

    Equals (I - u u^T) / |mu| with u the unit mean direction: symmetric,
    rank 2, and annihilates mu.
    """
    mu = np.asarray(mu, dtype=np.float64)
    n = float(np.linalg.norm(mu))
    if n <= _DEGENERATE_NORM:
        raise DegenerateDirection(f"norm {n:.3e} too small")
    u = mu / n
    return (np.eye(3) - np.outer(u, u)) / n


def frame_rotation(mu: np.ndarray) -> np.ndarray:
    """Rotation aligning the mean direction with +z (third row = mean direction).

    Raises PolarSingularity when mu is (anti)parallel to the y axis, where
    the construction divides by sqrt(mu_x^2 + mu_z^2) = 0.  Use
    tangent_frame() for the fallback-completed version.
    """
    mu = np.asarray(mu, dtype=np.float64)
    mx, my, mz = mu
    s2 = mx * mx + mz * mz
    if s2 <= _POLAR_EPS2:
        raise PolarSingularity("mean direction on the y axis")
    s = np.sqrt(s2)
    n = float(np.linalg.norm(mu))
    if n <= _DEGENERATE_NORM:
        raise DegenerateDirection(f"norm {n:.3e} too small")
    return np.array([
        [mz / s, 0.0, -mx / s],
        [-mx * my / (s * n), s / n, -my * mz / (s * n)],
        [mx / n, my / n, mz / n],
    ])


def _polar_fallback(my: float) -> np.ndarray:
    # Any orthonormal completion with third row equal to the unit mean
    # direction works; downstream math is rotation-covariant.
    s = 1.0 if my >= 0 else -1.0
    return np.array([
        [1.0, 0.0, 0.0],
        [0.0, 0.0, -s],
        [0.0, s, 0.0],
    ])


def tangent_frame(mu: np.ndarray) -> TangentFrame:
    """Build the tangent frame for a camera-space mean (polar-safe)."""
    mu = np.asarray(mu, dtype=np.float64)
    x_p = sphere_project(mu)
    try:
        Q = frame_rotation(mu)
    except PolarSingularity:
        Q = _polar_fallback(mu[1])
    return TangentFrame(x_p=x_p, Q=Q, depth_key=float(np.linalg.norm(mu)))


def _invert_cov2d(cov2d: np.ndarray) -> np.ndarray:
    det = cov2d[0, 0] * cov2d[1, 1] - cov2d[0, 1] * cov2d[1, 0]
    if not det > _MIN_DET:
        raise DegenerateSplat(f"cov2d determinant {det:.3e}")
    return np.array([[cov2d[1, 1], -cov2d[0, 1]],
                     [-cov2d[1, 0], cov2d[0, 0]]]) / det


def project_splat(mu: np.ndarray, cov, frame: TangentFrame, lowpass: float,
                  color=(1.0, 1.0, 1.0), alpha_max: float = 0.99) -> Splat2D:
    """Project a camera-space Gaussian onto its tangent plane.

    Args:
        mu: camera-space mean the frame was built from.
        cov: camera-space 3x3 covariance (Covariance3 or array).
        frame: tangent frame for mu.
        lowpass: diagonal dilation added to the 2D covariance
            (tangent-plane units squared).
        color: shaded RGB for this view.
        alpha_max: decoded opacity, clamped to (0, 0.99].

    Raises:
        DegenerateSplat: if the dilated 2D covariance is not invertible.
    """
    sig = cov.sym if isinstance(cov, Covariance3) else np.asarray(cov, dtype=np.float64)
    Jp = optimal_jacobian(mu)
    A = frame.Q @ Jp
    full = A @ sig @ A.T
    cov2d = full[:2, :2] + lowpass * np.eye(2)
    cov2d = 0.5 * (cov2d + cov2d.T)
    mean2d = (frame.Q @ optimal_project(mu, frame.x_p))[:2]
    return Splat2D(mean2d=mean2d, cov2d=cov2d, inv_cov2d=_invert_cov2d(cov2d),
                   depth_key=frame.depth_key,
                   color=np.asarray(color, dtype=np.float64),
                   alpha_max=float(alpha_max))


def project_splat_classic(mu: np.ndarray, cov, lowpass: float,
                          color=(1.0, 1.0, 1.0), alpha_max: float = 0.99) -> Splat2D:
    """Project a camera-space Gaussian onto the z = 1 plane (baseline path)."""
    sig = cov.sym if isinstance(cov, Covariance3) else np.asarray(cov, dtype=np.float64)
    J = classic_jacobian(mu)[:2, :]
    cov2d = J @ sig @ J.T + lowpass * np.eye(2)
    cov2d = 0.5 * (cov2d + cov2d.T)
    mean2d = np.array([mu[0] / mu[2], mu[1] / mu[2]])
    return Splat2D(mean2d=mean2d, cov2d=cov2d, inv_cov2d=_invert_cov2d(cov2d),
                   depth_key=float(np.linalg.norm(mu)),
                   color=np.asarray(color, dtype=np.float64),
                   alpha_max=float(alpha_max))


def lowpass_to_plane_units(lowpass_px2: float, focal_px: float) -> float:
    """Convert a screen-space dilation (pixels^2) to plane units for a focal."""
    return max(lowpass_px2 / (focal_px * focal_px), 1e-12)


# Batched forms used by the rasterizer.  These mirror the scalar API but
# cull by mask instead of raising.

def sphere_project_batch(X: np.ndarray):
    norms = np.linalg.norm(X, axis=1)
    safe = np.maximum(norms, _DEGENERATE_NORM)
    return X / safe[:, None], norms


def optimal_jacobian_batch(M: np.ndarray) -> np.ndarray:
    U, norms = sphere_project_batch(M)
    n = np.maximum(norms, _DEGENERATE_NORM)
    eye = np.broadcast_to(np.eye(3), (M.shape[0], 3, 3))
    return (eye - U[:, :, None] * U[:, None, :]) / n[:, None, None]


def frame_rotation_batch(M: np.ndarray):
    """Batched tangent-frame rotations with the polar fallback applied.

    Returns:
        (Q, x_p, norms) for rows of M; rows with zero norm yield garbage and
        must be culled by the caller.
    """
    N = M.shape[0]
    U, norms = sphere_project_batch(M)
    n = np.maximum(norms, _DEGENERATE_NORM)
    mx, my, mz = M[:, 0], M[:, 1], M[:, 2]
    s2 = mx * mx + mz * mz
    polar = s2 <= _POLAR_EPS2
    s = np.sqrt(np.where(polar, 1.0, s2))
    Q = np.zeros((N, 3, 3))
    Q[:, 0, 0] = mz / s
    Q[:, 0, 2] = -mx / s
    Q[:, 1, 0] = -mx * my / (s * n)
    Q[:, 1, 1] = s / n
    Q[:, 1, 2] = -my * mz / (s * n)
    Q[:, 2, :] = U
    if np.any(polar):
        idx = np.nonzero(polar)[0]
        for i in idx:
            Q[i] = _polar_fallback(my[i])
            Q[i, 2, :] = U[i]
    return Q, U, norms
