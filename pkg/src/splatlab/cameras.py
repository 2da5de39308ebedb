"""Bidirectional pixel <-> camera-space direction maps.

Three intrinsic models are supported: pinhole, equidistant fisheye, and
equirectangular panorama.  This mapping is the single place a new camera
model would plug into: the tangent-plane rasterizer only ever asks for
the direction of a pixel and the pixel of a direction.

Continuous pixel coordinates put the center of column j / row i at
(j + 0.5, i + 0.5).
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import BehindCamera, FisheyeOutOfDomain
from .model import CameraModel, CameraRig
from .projection import EPS_NEAR


class PixelCoord(NamedTuple):
    u: float
    v: float


def _fisheye_sinc(r):
    """sin(r)/r with a series branch to stay finite at the image center."""
    r = np.asarray(r, dtype=np.float64)
    small = r < 1e-6
    safe = np.where(small, 1.0, r)
    out = np.where(small, 1.0 - r * r / 6.0, np.sin(safe) / safe)
    return out


def pixel_to_direction(rig: CameraRig, p) -> np.ndarray:
    """Unit camera-space direction of a continuous pixel coordinate.

    Raises:
        FisheyeOutOfDomain: fisheye pixel beyond angular radius pi.
    """
    u, v = float(p[0]), float(p[1])
    if rig.model is CameraModel.PINHOLE:
        d = np.array([(u - rig.cx) / rig.fx, (v - rig.cy) / rig.fy, 1.0])
        return d / np.linalg.norm(d)
    if rig.model is CameraModel.FISHEYE_EQUIDISTANT:
        a = (u - rig.cx) / rig.fx
        b = (v - rig.cy) / rig.fy
        r = float(np.hypot(a, b))
        if r >= np.pi:
            raise FisheyeOutOfDomain(f"angular radius {r:.4f} >= pi")
        s = float(_fisheye_sinc(r))
        return np.array([a * s, b * s, np.cos(r)])
    # Equirectangular: azimuth spans [-pi, pi) across the width, elevation
    # [-pi/2, pi/2) across the height.
    az = np.pi * (2.0 * u - rig.width) / rig.width
    el = np.pi * (v - rig.height / 2.0) / rig.height
    return np.array([np.sin(az) * np.cos(el), np.sin(el), np.cos(el) * np.cos(az)])


def direction_to_pixel(rig: CameraRig, d) -> PixelCoord:
    """Continuous pixel coordinate a camera-space direction maps to.

    The direction need not be normalized.  Inverse of pixel_to_direction
    on each model's valid domain.

    Raises:
        BehindCamera: pinhole direction with non-positive z.
        FisheyeOutOfDomain: direction at angle >= pi from the axis.
    """
    d = np.asarray(d, dtype=np.float64)
    n = np.linalg.norm(d)
    if n == 0.0:
        raise BehindCamera("zero direction")
    d = d / n
    if rig.model is CameraModel.PINHOLE:
        if d[2] <= EPS_NEAR:
            raise BehindCamera(f"direction z = {d[2]:.6g} <= {EPS_NEAR}")
        return PixelCoord(rig.cx + rig.fx * d[0] / d[2],
                          rig.cy + rig.fy * d[1] / d[2])
    if rig.model is CameraModel.FISHEYE_EQUIDISTANT:
        rho = float(np.hypot(d[0], d[1]))
        r = float(np.arctan2(rho, d[2]))
        if r >= np.pi:
            raise FisheyeOutOfDomain("antipodal direction")
        if rho < 1e-300:
            return PixelCoord(rig.cx, rig.cy)
        return PixelCoord(rig.cx + rig.fx * r * d[0] / rho,
                          rig.cy + rig.fy * r * d[1] / rho)
    az = float(np.arctan2(d[0], d[2]))
    el = float(np.arcsin(np.clip(d[1], -1.0, 1.0)))
    u = (az / np.pi + 1.0) * rig.width / 2.0
    v = rig.height / 2.0 + rig.height * el / np.pi
    u = u % rig.width
    v = min(max(v, 0.0), np.nextafter(float(rig.height), 0.0))
    return PixelCoord(u, v)


def ray_directions(rig: CameraRig, us: np.ndarray, vs: np.ndarray):
    """Vectorized pixel_to_direction for the rasterizer.

    Args:
        us, vs: flat arrays of continuous pixel coordinates.

    Returns:
        (dirs, valid): unit directions (N, 3) and a validity mask; invalid
        rays (fisheye pixels beyond radius pi) carry an arbitrary direction.
    """
    us = np.asarray(us, dtype=np.float64)
    vs = np.asarray(vs, dtype=np.float64)
    if rig.model is CameraModel.PINHOLE:
        d = np.stack([(us - rig.cx) / rig.fx, (vs - rig.cy) / rig.fy,
                      np.ones_like(us)], axis=-1)
        d /= np.linalg.norm(d, axis=-1, keepdims=True)
        return d, np.ones(us.shape, dtype=bool)
    if rig.model is CameraModel.FISHEYE_EQUIDISTANT:
        a = (us - rig.cx) / rig.fx
        b = (vs - rig.cy) / rig.fy
        r = np.hypot(a, b)
        valid = r < np.pi
        s = _fisheye_sinc(np.where(valid, r, 0.0))
        d = np.stack([a * s, b * s, np.cos(np.where(valid, r, 0.0))], axis=-1)
        return d, valid
    az = np.pi * (2.0 * us - rig.width) / rig.width
    el = np.pi * (vs - rig.height / 2.0) / rig.height
    d = np.stack([np.sin(az) * np.cos(el), np.sin(el),
                  np.cos(el) * np.cos(az)], axis=-1)
    return d, np.ones(us.shape, dtype=bool)


def max_view_angle(rig: CameraRig) -> float:
    """Largest angle (radians) between +z and any in-image direction."""
    if rig.model is CameraModel.EQUIRECTANGULAR:
        return np.pi
    a = max(rig.cx, rig.width - rig.cx) / rig.fx
    b = max(rig.cy, rig.height - rig.cy) / rig.fy
    r = float(np.hypot(a, b))
    if rig.model is CameraModel.FISHEYE_EQUIDISTANT:
        return min(r, np.pi)
    return float(np.arctan(r))
