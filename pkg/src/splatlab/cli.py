"""Command-line interface.

Subcommands: render, compare, error-map, synth.  CSV results go to
standard output, diagnostics to standard error.  Exit codes: 0 success,
1 input/IO error, 2 unsupported configuration.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io as sio
from .errors import ClassicUnsupportedCamera, SplatError
from .error_analysis import (QuadratureSpec, default_pixel_field_rig,
                             error_field_pixels, error_field_spherical,
                             write_error_field_csv)
from .metrics import focal_mask_eval, metric_report
from .model import CameraModel
from .rasterizer import RenderConfig, render_with_stats

_MODEL_FLAGS = {"pinhole": CameraModel.PINHOLE,
                "fisheye": CameraModel.FISHEYE_EQUIDISTANT,
                "panorama": CameraModel.EQUIRECTANGULAR}


def _parse_background(text: str):
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("background must be R,G,B")
    return tuple(parts)


def _add_render_flags(p: argparse.ArgumentParser):
    p.add_argument("--scene", required=True, help="PLY splat file")
    p.add_argument("--cameras", required=True, help="camera text file")
    p.add_argument("--focal-scale", type=float, default=1.0)
    p.add_argument("--camera-model", choices=sorted(_MODEL_FLAGS),
                   help="override the model tag of every camera record")
    p.add_argument("--tile-size", type=int, default=16)
    p.add_argument("--depth-key", choices=["radial", "z"], default="radial")
    p.add_argument("--t-min", type=float, default=1e-4)
    p.add_argument("--alpha-clamp", type=float, default=0.99)
    p.add_argument("--lowpass", type=float, default=0.3,
                   help="screen-space dilation in pixels^2")
    p.add_argument("--background", type=_parse_background, default=(0.0, 0.0, 0.0))
    p.add_argument("--sh-degree", type=int, default=None,
                   help="cap the SH degree used for shading")
    p.add_argument("--threads", type=int, default=None,
                   help="worker cap (0 = auto); falls back to $SPLAT_THREADS")


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    return int(os.environ.get("SPLAT_THREADS", "0"))


def _config(args) -> RenderConfig:
    return RenderConfig(tile_size=args.tile_size, depth_key=args.depth_key,
                        t_min=args.t_min, alpha_clamp=args.alpha_clamp,
                        lowpass=args.lowpass, background=args.background,
                        sh_degree=args.sh_degree, focal_scale=args.focal_scale,
                        threads=_threads(args))


def _load_inputs(args):
    scene = sio.load_ply(args.scene)
    rigs = sio.load_cameras(args.cameras)
    if args.camera_model:
        rigs = [replace(r, model=_MODEL_FLAGS[args.camera_model]) for r in rigs]
    return scene, rigs


def cmd_render(args) -> int:
    scene, rigs = _load_inputs(args)
    cfg = _config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for rig in rigs:
        t0 = time.perf_counter()
        img, _, culled = render_with_stats(scene, rig, args.mode, cfg)
        ms = (time.perf_counter() - t0) * 1e3
        path = out_dir / f"{rig.cam_id}_{args.mode}.png"
        sio.write_image(img, path)
        print(f"{rig.cam_id} {args.mode} splats={len(scene) - culled} "
              f"culled={culled} ms={ms:.1f}")
    return 0


def _quantized(img):
    # metrics against 8-bit ground-truth files compare at 8-bit precision,
    # so a render scored against its own saved output reports the cap
    from .model import ImageBuffer
    px = np.floor(np.clip(img.pixels, 0.0, 1.0) * 255.0 + 0.5) / 255.0
    return ImageBuffer(px, img.background)


def _find_gt(gt_dir: Path, cam_id: str):
    for name in (f"{cam_id}.png", f"{cam_id}_optimal.png", f"{cam_id}_classic.png"):
        p = gt_dir / name
        if p.exists():
            return sio.read_image(p)
    raise FileNotFoundError(f"no ground-truth image for camera {cam_id} in {gt_dir}")


def cmd_compare(args) -> int:
    scene, rigs = _load_inputs(args)
    cfg = _config(args)
    gt_dir = Path(args.gt) if args.gt else None
    scale = args.focal_mask if args.focal_mask is not None else 1.0
    print("camera_id,mode,psnr_db,ssim,classic_vs_optimal_mad")
    for rig in rigs:
        classic, _, _ = render_with_stats(scene, rig, "classic", cfg)
        optimal, _, _ = render_with_stats(scene, rig, "optimal", cfg)
        mad = float(np.mean(np.abs(classic.pixels - optimal.pixels)))
        for mode, img in (("classic", classic), ("optimal", optimal)):
            if gt_dir is not None:
                gt = _find_gt(gt_dir, rig.cam_id)
                q = _quantized(img)
                rep = focal_mask_eval(q, gt, scale) if scale != 1.0 \
                    else metric_report(q, gt)
                print(f"{rig.cam_id},{mode},{rep.psnr_db:.12g},{rep.ssim:.12g},{mad:.12g}")
            else:
                print(f"{rig.cam_id},{mode},,,{mad:.12g}")
    return 0


def cmd_error_map(args) -> int:
    quad = QuadratureSpec(nodes=args.nodes)
    if args.space == "spherical":
        fld = error_field_spherical(args.lam, args.n, quad)
    else:
        rig = default_pixel_field_rig()
        fld = error_field_pixels(rig, args.focal_scale, args.n, quad)
    write_error_field_csv(fld, args.out)
    i, j = np.unravel_index(np.argmin(fld.values), fld.values.shape)
    ratio = float(np.max(fld.values) / np.min(fld.values))
    print(f"argmin: axis1={fld.axis1[i]:.12g} axis2={fld.axis2[j]:.12g} "
          f"value={fld.values[i, j]:.12g}")
    print(f"mean: {float(np.mean(fld.values)):.12g}")
    print(f"max/min ratio: {ratio:.12g}")
    return 0


def cmd_synth(args) -> int:
    scene = sio.synth_scene(args.kind, n=args.n, radius=args.radius,
                            angle_deg=args.angle, seed=args.seed)
    sio.save_ply(scene, args.out)
    print(f"wrote {args.out} ({len(scene)} splats, sh_degree={scene.sh_degree})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="splatlab",
                                 description="Gaussian splat renderer and "
                                             "projection-error analysis toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render a scene under each camera")
    _add_render_flags(p)
    p.add_argument("--mode", choices=["classic", "optimal"], required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("compare", help="render both modes and report metrics")
    _add_render_flags(p)
    p.add_argument("--gt", help="directory of ground-truth images")
    p.add_argument("--focal-mask", type=float, default=None,
                   help="focal-mask scale for metrics against --gt")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("error-map", help="sample the projection-error field")
    p.add_argument("--space", choices=["spherical", "pixels"], required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.95,
                   help="domain scale for spherical space (0 < lambda < 1)")
    p.add_argument("--focal-scale", type=float, default=1.0)
    p.add_argument("--n", type=int, default=33, help="grid resolution")
    p.add_argument("--nodes", type=int, default=64, help="quadrature nodes per axis")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_error_map)

    p = sub.add_parser("synth", help="write a deterministic fixture scene")
    p.add_argument("--kind", required=True, help="on-axis | ring | grid")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--radius", type=float, default=2.0)
    p.add_argument("--angle", type=float, default=70.0, help="cone half-angle, degrees")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output PLY path")
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ClassicUnsupportedCamera as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SplatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
