"""Core domain types: Gaussians, covariances, camera rigs, scenes, images.

Parameters follow the de-facto splat-checkpoint conventions: scales are
stored in log space, opacity as a pre-sigmoid logit, rotation as a unit
quaternion in (w, x, y, z) order.  Decoding happens exactly once, at
construction.  All types are immutable after construction and safe to
share across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DecodeError


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


def quat_to_rot(q: np.ndarray) -> np.ndarray:
    """Rotation matrix from a unit quaternion (w, x, y, z)."""
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


@dataclass(frozen=True)
class Gaussian3D:
    """One anisotropic splat in world space.

    Attributes:
        mean_world: 3-vector position in scene units.
        rot: quaternion (w, x, y, z); normalized at construction.
        log_scale: per-axis log scales (log scene units).
        opacity_logit: pre-sigmoid opacity.
        sh: spherical-harmonic color coefficients, shape (K, 3) with
            K = (L+1)^2 for SH degree L; sh[0] is the DC term.
    """

    mean_world: np.ndarray
    rot: np.ndarray
    log_scale: np.ndarray
    opacity_logit: float
    sh: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean_world, dtype=np.float64).reshape(3)
        q = np.asarray(self.rot, dtype=np.float64).reshape(4)
        ls = np.asarray(self.log_scale, dtype=np.float64).reshape(3)
        sh = np.asarray(self.sh, dtype=np.float64).reshape(-1, 3)
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(q))
                and np.all(np.isfinite(ls)) and np.isfinite(self.opacity_logit)
                and np.all(np.isfinite(sh))):
            raise DecodeError("non-finite Gaussian parameter")
        n = float(np.linalg.norm(q))
        if n < 1e-8:
            raise DecodeError(f"degenerate quaternion (norm {n:.3e})")
        object.__setattr__(self, "mean_world", _frozen(mean))
        object.__setattr__(self, "rot", _frozen(q / n))
        object.__setattr__(self, "log_scale", _frozen(ls))
        object.__setattr__(self, "opacity_logit", float(self.opacity_logit))
        object.__setattr__(self, "sh", _frozen(sh))

    @property
    def scales(self) -> np.ndarray:
        return np.exp(self.log_scale)

    @property
    def opacity(self) -> float:
        return sigmoid(self.opacity_logit)


@dataclass(frozen=True)
class Covariance3:
    """Symmetric positive semi-definite 3x3 covariance (scene units squared)."""

    sym: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.sym, dtype=np.float64).reshape(3, 3)
        scale = max(float(np.max(np.abs(m))), 1e-300)
        if np.max(np.abs(m - m.T)) > 1e-12 * scale:
            raise DecodeError("covariance not symmetric")
        trace = float(np.trace(m))
        if np.min(np.linalg.eigvalsh(m)) < -1e-9 * max(trace, 1e-300):
            raise DecodeError("covariance not positive semi-definite")
        object.__setattr__(self, "sym", _frozen(m))


class CameraModel(Enum):
    PINHOLE = "pinhole"
    FISHEYE_EQUIDISTANT = "fisheye"
    EQUIRECTANGULAR = "panorama"


@dataclass(frozen=True)
class CameraRig:
    """Intrinsic camera model plus rigid world-to-camera pose.

    The pose maps world points to camera space as x' = R x + t.  fx/fy are
    in pixels and are ignored by the equirectangular model, which is fully
    determined by width and height.
    """

    model: CameraModel
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    rotation: np.ndarray
    translation: np.ndarray
    cam_id: str = "0"

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if np.linalg.norm(R @ R.T - np.eye(3)) >= 1e-9:
            raise DecodeError("pose rotation not orthonormal")
        if self.model is not CameraModel.EQUIRECTANGULAR and not (self.fx > 0 and self.fy > 0):
            raise DecodeError(f"focal lengths must be positive for {self.model.value}")
        if self.width <= 0 or self.height <= 0:
            raise DecodeError("image dimensions must be positive")
        object.__setattr__(self, "rotation", _frozen(R))
        object.__setattr__(self, "translation", _frozen(t))

    def camera_center_world(self) -> np.ndarray:
        return -self.rotation.T @ self.translation

    def with_focal_scale(self, s: float) -> "CameraRig":
        """Rig with focal lengths scaled by s (widens FOV for s < 1)."""
        if s == 1.0:
            return self
        fx = self.fx * s if self.model is not CameraModel.EQUIRECTANGULAR else self.fx
        fy = self.fy * s if self.model is not CameraModel.EQUIRECTANGULAR else self.fy
        return CameraRig(self.model, fx, fy, self.cx, self.cy, self.width,
                         self.height, self.rotation, self.translation, self.cam_id)

    def focal_px(self) -> float:
        """Effective pixels-per-radian focal, used for low-pass conversion."""
        if self.model is CameraModel.EQUIRECTANGULAR:
            return min(self.width / (2 * np.pi), self.height / np.pi)
        return min(self.fx, self.fy)


@dataclass(frozen=True)
class Scene:
    """An immutable collection of Gaussians with a common SH degree."""

    gaussians: tuple
    sh_degree: int

    def __post_init__(self):
        gs = tuple(self.gaussians)
        k = (self.sh_degree + 1) ** 2
        if not 0 <= self.sh_degree <= 3:
            raise DecodeError(f"unsupported SH degree {self.sh_degree}")
        for i, g in enumerate(gs):
            if g.sh.shape[0] != k:
                raise DecodeError(
                    f"gaussian {i}: {g.sh.shape[0]} SH coefficients, expected {k}")
        object.__setattr__(self, "gaussians", gs)

    def __len__(self) -> int:
        return len(self.gaussians)


@dataclass(frozen=True)
class ImageBuffer:
    """H x W RGB float image in [0, 1] with a defined background color."""

    pixels: np.ndarray
    background: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 3 or px.shape[2] != 3:
            raise DecodeError(f"image must be (H, W, 3), got {px.shape}")
        object.__setattr__(self, "pixels", _frozen(px))
        object.__setattr__(self, "background",
                           _frozen(np.asarray(self.background, dtype=np.float64).reshape(3)))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def assemble_covariance(g: Gaussian3D) -> Covariance3:
    """Assemble the world-space covariance R S S^T R^T of one Gaussian."""
    s = g.scales
    if not np.all(np.isfinite(s)):
        raise DecodeError("non-finite decoded scale")
    M = quat_to_rot(g.rot) * s[None, :]
    cov = M @ M.T
    return Covariance3(0.5 * (cov + cov.T))


def world_to_camera(g: Gaussian3D, cov: Covariance3, rig: CameraRig):
    """Rigidly transform a Gaussian into camera space.

    Returns:
        (mu_cam, cov_cam): camera-space mean and covariance.
    """
    R, t = rig.rotation, rig.translation
    mu = R @ g.mean_world + t
    sig = R @ cov.sym @ R.T
    return mu, Covariance3(0.5 * (sig + sig.T))
