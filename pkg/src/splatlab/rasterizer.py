"""Tile-based software rasterizer with two projection paths.

Optimal path: per-pixel rays are mapped to camera-space directions (any
camera model), intersected with each splat's tangent plane, and the splat
Gaussian is evaluated in its Q-aligned 2D frame.  Classic path: splats and
pixels both live on the z = 1 image plane (pinhole only).

Both paths share culling, tile binning, and front-to-back alpha blending
with early termination.  Binning is a pure performance structure: output
is independent of tile size, and per-pixel compositing order is fixed by
the (depth, index) sort, so renders are deterministic for any worker
count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np

from . import projection as proj
from .cameras import max_view_angle, ray_directions, direction_to_pixel
from .errors import ClassicUnsupportedCamera, DegenerateSplat, SplatError
from .model import CameraModel, CameraRig, ImageBuffer, Scene
from .projection import EPS_NEAR, Splat2D, TangentFrame
from .sh import eval_sh_colors

MODES = ("classic", "optimal")


@dataclass(frozen=True)
class RenderConfig:
    """Rendering knobs (all exposed as CLI flags).

    lowpass is the screen-space anti-alias dilation in pixels^2; it is
    converted to plane units through the rig's effective focal length.
    threads = 0 picks a worker count automatically; any count produces
    identical output.  depth_key "z" is an A/B knob for pinhole-style
    frusta; full-sphere rigs should keep the default radial key.
    """

    tile_size: int = 16
    depth_key: str = "radial"  # "radial" (|mu'|) or "z"
    t_min: float = 1e-4
    alpha_clamp: float = 0.99
    lowpass: float = 0.3
    background: tuple = (0.0, 0.0, 0.0)
    sh_degree: Optional[int] = None
    focal_scale: float = 1.0
    threads: int = 1


@dataclass(frozen=True)
class PreparedSplat:
    """A splat after projection, ready for binning and shading."""

    splat: Splat2D
    frame: Optional[TangentFrame]  # None on the classic path
    pixel_bbox: tuple  # (x0, y0, x1, y1), half-open pixel rect

    @property
    def color(self) -> np.ndarray:
        return self.splat.color

    @property
    def depth_key(self) -> float:
        return self.splat.depth_key


@dataclass(frozen=True)
class TileGrid:
    tile_size: int
    tiles_x: int
    tiles_y: int
    bins: tuple  # per tile (row-major), tuple of splat indices, depth-sorted


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _quat_to_rot_batch(q: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(q, axis=1, keepdims=True)
    q = q / n
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    R = np.empty((q.shape[0], 3, 3))
    R[:, 0, 0] = 1 - 2 * (y * y + z * z)
    R[:, 0, 1] = 2 * (x * y - w * z)
    R[:, 0, 2] = 2 * (x * z + w * y)
    R[:, 1, 0] = 2 * (x * y + w * z)
    R[:, 1, 1] = 1 - 2 * (x * x + z * z)
    R[:, 1, 2] = 2 * (y * z - w * x)
    R[:, 2, 0] = 2 * (x * z - w * y)
    R[:, 2, 1] = 2 * (y * z + w * x)
    R[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def _eig_max_2x2(c: np.ndarray) -> np.ndarray:
    """Largest eigenvalue of symmetric 2x2 matrices, batched."""
    mid = 0.5 * (c[..., 0, 0] + c[..., 1, 1])
    rad = np.sqrt(np.maximum(0.25 * (c[..., 0, 0] - c[..., 1, 1]) ** 2
                             + c[..., 0, 1] ** 2, 0.0))
    return mid + rad


def _chol_2x2(c: np.ndarray) -> np.ndarray:
    l00 = math.sqrt(c[0, 0])
    l10 = c[0, 1] / l00
    l11 = math.sqrt(max(c[1, 1] - l10 * l10, 0.0))
    return np.array([[l00, 0.0], [l10, l11]])


_ELLIPSE_DIRS = np.stack([np.cos(np.linspace(0, 2 * np.pi, 8, endpoint=False)),
                          np.sin(np.linspace(0, 2 * np.pi, 8, endpoint=False))])


def _bbox_from_points(us, vs, rig: CameraRig, pad: int):
    if rig.model is CameraModel.EQUIRECTANGULAR and (max(us) - min(us)) > rig.width / 2:
        x0, x1 = 0, rig.width  # footprint straddles the wrap seam
    else:
        x0 = max(int(math.floor(min(us))) - pad, 0)
        x1 = min(int(math.ceil(max(us))) + pad, rig.width)
    y0 = max(int(math.floor(min(vs))) - pad, 0)
    y1 = min(int(math.ceil(max(vs))) + pad, rig.height)
    return (x0, y0, x1, y1)


def _tangent_bbox(frame: TangentFrame, cov2d: np.ndarray, rig: CameraRig, pad: int):
    """Footprint of a tangent-plane splat in pixels.

    Eight points on the 3-sigma ellipse are lifted from the tangent plane
    to camera-space directions and mapped through the camera model.  Any
    unmappable boundary point degrades to the full image (conservative).
    """
    L = _chol_2x2(cov2d)
    offs = 3.0 * (L @ _ELLIPSE_DIRS)  # (2, 8)
    pts3 = frame.Q.T @ np.concatenate([offs, np.ones((1, 8))], axis=0)  # (3, 8)
    us, vs = [], []
    try:
        for k in range(8):
            u, v = direction_to_pixel(rig, pts3[:, k])
            us.append(u)
            vs.append(v)
        u, v = direction_to_pixel(rig, frame.x_p)
        us.append(u)
        vs.append(v)
    except SplatError:
        return (0, 0, rig.width, rig.height)
    return _bbox_from_points(us, vs, rig, pad)


def _classic_bbox(mean2d: np.ndarray, cov2d: np.ndarray, rig: CameraRig, pad: int):
    r = 3.0 * math.sqrt(max(_eig_max_2x2(cov2d), 0.0))
    cx_px = rig.cx + rig.fx * mean2d[0]
    cy_px = rig.cy + rig.fy * mean2d[1]
    rx, ry = r * rig.fx, r * rig.fy
    x0 = max(int(math.floor(cx_px - rx)) - pad, 0)
    x1 = min(int(math.ceil(cx_px + rx)) + pad, rig.width)
    y0 = max(int(math.floor(cy_px - ry)) - pad, 0)
    y1 = min(int(math.ceil(cy_px + ry)) + pad, rig.height)
    return (x0, y0, x1, y1)


def prepare_splats(scene: Scene, rig: CameraRig, mode: str,
                   cfg: RenderConfig = RenderConfig()) -> List[PreparedSplat]:
    """Transform, cull, and project every Gaussian for one view.

    Culled Gaussians are dropped; the culled count is len(scene) minus the
    length of the returned list.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    rig = rig.with_focal_scale(cfg.focal_scale)
    if mode == "classic" and rig.model is not CameraModel.PINHOLE:
        raise ClassicUnsupportedCamera(
            f"classic projection cannot drive a {rig.model.value} camera")
    n = len(scene)
    if n == 0:
        return []

    means = np.stack([g.mean_world for g in scene.gaussians])
    quats = np.stack([g.rot for g in scene.gaussians])
    scales = np.exp(np.stack([g.log_scale for g in scene.gaussians]))
    logits = np.array([g.opacity_logit for g in scene.gaussians])
    shs = np.stack([g.sh for g in scene.gaussians])

    Rg = _quat_to_rot_batch(quats)
    M = Rg * scales[:, None, :]
    cov_w = np.einsum("nij,nkj->nik", M, M)
    R, t = rig.rotation, rig.translation
    mu = means @ R.T + t
    cov = np.einsum("ij,njk,lk->nil", R, cov_w, R)

    degree = scene.sh_degree if cfg.sh_degree is None else min(cfg.sh_degree, scene.sh_degree)
    view_dirs = means - rig.camera_center_world()
    view_dirs /= np.maximum(np.linalg.norm(view_dirs, axis=1, keepdims=True), 1e-12)
    colors = eval_sh_colors(shs, view_dirs, degree)
    alpha_max = np.minimum(_sigmoid(logits), cfg.alpha_clamp)

    lam = proj.lowpass_to_plane_units(cfg.lowpass, rig.focal_px())
    pad = cfg.tile_size
    out: List[PreparedSplat] = []

    if mode == "classic":
        keep = mu[:, 2] > EPS_NEAR
        for i in np.nonzero(keep)[0]:
            try:
                s2d = proj.project_splat_classic(mu[i], cov[i], lam,
                                                 color=colors[i], alpha_max=alpha_max[i])
            except DegenerateSplat:
                continue
            if cfg.depth_key == "z":
                s2d = replace(s2d, depth_key=float(mu[i, 2]))
            bbox = _classic_bbox(s2d.mean2d, s2d.cov2d, rig, pad)
            if bbox[0] < bbox[2] and bbox[1] < bbox[3]:
                out.append(PreparedSplat(s2d, None, bbox))
        return out

    norms = np.linalg.norm(mu, axis=1)
    keep = norms > EPS_NEAR
    ang_max = max_view_angle(rig)
    for i in np.nonzero(keep)[0]:
        frame = proj.tangent_frame(mu[i])
        try:
            s2d = proj.project_splat(mu[i], cov[i], frame, lam,
                                     color=colors[i], alpha_max=alpha_max[i])
        except DegenerateSplat:
            continue
        if cfg.depth_key == "z":
            s2d = replace(s2d, depth_key=float(mu[i, 2]))
        if rig.model is not CameraModel.EQUIRECTANGULAR:
            # Keep splats whose 3-sigma angular footprint can reach the image.
            ang = math.acos(min(max(frame.x_p[2], -1.0), 1.0))
            ang_splat = 3.0 * math.sqrt(max(_eig_max_2x2(s2d.cov2d), 0.0))
            if ang > ang_max + ang_splat:
                continue
        bbox = _tangent_bbox(frame, s2d.cov2d, rig, pad)
        if bbox[0] < bbox[2] and bbox[1] < bbox[3]:
            out.append(PreparedSplat(s2d, frame, bbox))
    return out


def bin_tiles(splats: List[PreparedSplat], rig: CameraRig, tile_size: int) -> TileGrid:
    """Assign splats to the tiles their bounding boxes overlap.

    Each bin is sorted by (depth_key, splat index): a stable, canonical
    front-to-back order.
    """
    tiles_x = (rig.width + tile_size - 1) // tile_size
    tiles_y = (rig.height + tile_size - 1) // tile_size
    bins: List[List[int]] = [[] for _ in range(tiles_x * tiles_y)]
    for idx, ps in enumerate(splats):
        x0, y0, x1, y1 = ps.pixel_bbox
        tx0, tx1 = x0 // tile_size, (x1 - 1) // tile_size
        ty0, ty1 = y0 // tile_size, (y1 - 1) // tile_size
        for ty in range(ty0, ty1 + 1):
            for tx in range(tx0, tx1 + 1):
                bins[ty * tiles_x + tx].append(idx)
    key = lambda i: (splats[i].splat.depth_key, i)
    return TileGrid(tile_size=tile_size, tiles_x=tiles_x, tiles_y=tiles_y,
                    bins=tuple(tuple(sorted(b, key=key)) for b in bins))


def _gather(splats: List[PreparedSplat], idx, mode: str):
    inv = np.stack([splats[i].splat.inv_cov2d for i in idx])
    col = np.stack([splats[i].splat.color for i in idx])
    amax = np.array([splats[i].splat.alpha_max for i in idx])
    mean = np.stack([splats[i].splat.mean2d for i in idx])
    if mode == "optimal":
        xp = np.stack([splats[i].frame.x_p for i in idx])
        q12 = np.stack([splats[i].frame.Q[:2, :] for i in idx])
        return inv, col, amax, mean, xp, q12
    return inv, col, amax, mean, None, None


def _composite(alpha: np.ndarray, colors: np.ndarray, bg: np.ndarray, t_min: float):
    """Front-to-back compositing over axis 1, with early termination.

    Returns (rgb, weight_total) where weight_total = sum(T_i alpha_i) +
    T_final; the telescoping identity makes it 1 up to rounding.
    """
    P, S = alpha.shape
    trans = np.cumprod(1.0 - alpha, axis=1)
    t_prev = np.concatenate([np.ones((P, 1)), trans[:, :-1]], axis=1)
    active = t_prev >= t_min  # splats reached before early exit
    w = t_prev * alpha * active
    exited = trans < t_min
    any_exit = exited.any(axis=1)
    first = np.argmax(exited, axis=1)
    t_final = np.where(any_exit, trans[np.arange(P), first], trans[:, -1])
    rgb = w @ colors + t_final[:, None] * bg[None, :]
    return rgb, w.sum(axis=1) + t_final


def _shade_block(us, vs, splats, bin_idx, rig, mode, cfg, bg):
    """Shade a flat block of pixel centers against one bin."""
    P = us.shape[0]
    if len(bin_idx) == 0:
        return np.tile(bg, (P, 1)), np.ones(P)
    inv, col, amax, mean, xp, q12 = _gather(splats, bin_idx, mode)
    if mode == "optimal":
        dirs, valid = ray_directions(rig, us, vs)
        t = dirs @ xp.T  # (P, S) ray--tangent-plane dot products
        front = t > EPS_NEAR
        ts = np.where(front, t, 1.0)
        x2d = dirs[:, None, :] / ts[:, :, None]
        d = np.einsum("sij,psj->psi", q12, x2d) - mean[None, :, :]
        q = np.einsum("psi,sij,psj->ps", d, inv, d)
        usable = front & valid[:, None]
    else:
        px = np.stack([(us - rig.cx) / rig.fx, (vs - rig.cy) / rig.fy], axis=-1)
        d = px[:, None, :] - mean[None, :, :]
        q = np.einsum("psi,sij,psj->ps", d, inv, d)
        usable = np.ones(q.shape, dtype=bool)
    inside = usable & (q <= 9.0)  # 3-sigma cutoff
    g = np.where(inside, np.exp(-0.5 * np.where(inside, q, 0.0)), 0.0)
    alpha = np.minimum(amax[None, :] * g, cfg.alpha_clamp)
    rgb, wtot = _composite(alpha, col, bg, cfg.t_min)
    if mode == "optimal" and not valid.all():
        rgb[~valid] = bg
        wtot[~valid] = 1.0
    return rgb, wtot


def shade_pixel(p, bin_splats: List[PreparedSplat], rig: CameraRig, mode: str,
                cfg: RenderConfig = RenderConfig()) -> np.ndarray:
    """Reference single-pixel shading (sequential front-to-back blending).

    bin_splats must already be depth-sorted.  rig is the render rig (after
    any focal scaling).
    """
    bg = np.asarray(cfg.background, dtype=np.float64)
    us = np.array([float(p[0])])
    vs = np.array([float(p[1])])
    rgb, _ = _shade_block(us, vs, bin_splats, list(range(len(bin_splats))),
                          rig, mode, cfg, bg)
    return rgb[0]


def _render_arrays(scene: Scene, rig: CameraRig, mode: str, cfg: RenderConfig):
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    rig_s = rig.with_focal_scale(cfg.focal_scale)
    if mode == "classic" and rig_s.model is not CameraModel.PINHOLE:
        raise ClassicUnsupportedCamera(
            f"classic projection cannot drive a {rig_s.model.value} camera")
    H, W = rig_s.height, rig_s.width
    bg = np.asarray(cfg.background, dtype=np.float64)
    img = np.empty((H, W, 3))
    img[:] = bg
    wmap = np.ones((H, W))
    if len(scene) == 0:
        return img, wmap, 0

    splats = prepare_splats(scene, rig, mode, cfg)
    culled = len(scene) - len(splats)
    if not splats:
        return img, wmap, culled
    grid = bin_tiles(splats, rig_s, cfg.tile_size)

    def shade_tile(ti: int):
        ty, tx = divmod(ti, grid.tiles_x)
        x0, x1 = tx * cfg.tile_size, min((tx + 1) * cfg.tile_size, W)
        y0, y1 = ty * cfg.tile_size, min((ty + 1) * cfg.tile_size, H)
        if not grid.bins[ti]:
            return
        ys, xs = np.mgrid[y0:y1, x0:x1]
        us = xs.ravel() + 0.5
        vs = ys.ravel() + 0.5
        rgb, wtot = _shade_block(us, vs, splats, grid.bins[ti], rig_s, mode, cfg, bg)
        img[y0:y1, x0:x1, :] = rgb.reshape(y1 - y0, x1 - x0, 3)
        wmap[y0:y1, x0:x1] = wtot.reshape(y1 - y0, x1 - x0)

    n_tiles = grid.tiles_x * grid.tiles_y
    workers = cfg.threads if cfg.threads > 0 else min(os.cpu_count() or 1, 8)
    if workers == 1:
        for ti in range(n_tiles):
            shade_tile(ti)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(shade_tile, range(n_tiles)))
    return img, wmap, culled


def render(scene: Scene, rig: CameraRig, mode: str,
           cfg: RenderConfig = RenderConfig()) -> ImageBuffer:
    """Render a scene to an RGB image buffer (deterministic)."""
    img, _, _ = _render_arrays(scene, rig, mode, cfg)
    return ImageBuffer(pixels=img, background=np.asarray(cfg.background))


def render_with_stats(scene: Scene, rig: CameraRig, mode: str,
                      cfg: RenderConfig = RenderConfig()):
    """Render returning (image, weight_map, culled_count).

    weight_map holds sum(T_i alpha_i) + T_final per pixel, which the
    compositing identity pins to 1.
    """
    img, wmap, culled = _render_arrays(scene, rig, mode, cfg)
    return ImageBuffer(pixels=img, background=np.asarray(cfg.background)), wmap, culled
