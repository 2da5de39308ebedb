"""Scene and camera I/O plus deterministic synthetic fixtures.

PLY splat checkpoints
    Binary little-endian PLY with float vertex properties
    x, y, z, rot_0..rot_3 (quaternion wxyz), scale_0..scale_2 (log),
    opacity (logit), f_dc_0..f_dc_2, and optionally f_rest_0..f_rest_{3K-1}
    for SH degree L with K = (L+1)^2 - 1 rest coefficients stored
    channel-major (all R, all G, all B).  Extra properties (e.g. normals)
    are ignored.  ASCII and big-endian files are rejected.

Camera files
    Line-oriented text, one view per line, `#` comments and blank lines
    ignored.  Twenty whitespace-separated fields:

        id model width height fx fy cx cy  r00 r01 r02 r10 r11 r12 r20 r21 r22  tx ty tz

    model is one of pinhole | fisheye | panorama; the rotation is the
    row-major world-to-camera matrix and t the translation (x' = R x + t).
    Rotations within 1e-6 of orthonormal are polar-corrected; worse ones
    are rejected.

Images are written as 8-bit PNG or binary PPM (P6), clamped to [0, 1].
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (DecodeError, MissingProperty, NonOrthonormalRotation,
                     TruncatedFile, UnknownModelTag, UnsupportedFormat)
from .model import CameraModel, CameraRig, Gaussian3D, ImageBuffer, Scene
from .sh import dc_from_rgb

logger = logging.getLogger(__name__)

_PLY_TYPES = {
    "char": "i1", "uchar": "u1", "int8": "i1", "uint8": "u1",
    "short": "i2", "ushort": "u2", "int16": "i2", "uint16": "u2",
    "int": "i4", "uint": "u4", "int32": "i4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}

_REQUIRED = ("x", "y", "z", "rot_0", "rot_1", "rot_2", "rot_3",
             "scale_0", "scale_1", "scale_2", "opacity",
             "f_dc_0", "f_dc_1", "f_dc_2")

_REST_COUNTS = {0: 0, 1: 9, 2: 24, 3: 45}

_MODEL_TAGS = {
    "pinhole": CameraModel.PINHOLE,
    "fisheye": CameraModel.FISHEYE_EQUIDISTANT,
    "panorama": CameraModel.EQUIRECTANGULAR,
}


def _read_ply_header(fh):
    def line():
        raw = fh.readline()
        if not raw:
            raise TruncatedFile("unexpected end of file in header")
        return raw.decode("ascii", errors="replace").strip()

    if line() != "ply":
        raise UnsupportedFormat("not a PLY file")
    fmt = line()
    if fmt != "format binary_little_endian 1.0":
        raise UnsupportedFormat(f"unsupported PLY format line: {fmt!r}")
    elements = []  # (name, count, [(prop_name, dtype_code), ...])
    while True:
        ln = line()
        if ln == "end_header":
            break
        if not ln or ln.startswith("comment") or ln.startswith("obj_info"):
            continue
        tok = ln.split()
        if tok[0] == "element":
            if len(tok) != 3:
                raise UnsupportedFormat(f"malformed element line: {ln!r}")
            try:
                count = int(tok[2])
            except ValueError:
                raise UnsupportedFormat(f"bad element count in {ln!r}") from None
            if count < 0:
                raise UnsupportedFormat(f"negative element count in {ln!r}")
            elements.append((tok[1], count, []))
        elif tok[0] == "property":
            if len(tok) != 3:
                raise UnsupportedFormat(f"malformed property line: {ln!r}")
            if not elements:
                raise UnsupportedFormat("property before any element")
            if tok[1] == "list":
                raise UnsupportedFormat("list properties not supported")
            if tok[1] not in _PLY_TYPES:
                raise UnsupportedFormat(f"unknown property type {tok[1]!r}")
            elements[-1][2].append((tok[2], _PLY_TYPES[tok[1]]))
        else:
            raise UnsupportedFormat(f"unexpected header line: {ln!r}")
    return elements


def load_ply(path) -> Scene:
    """Load a splat checkpoint; malformed records are skipped with a warning."""
    path = Path(path)
    with open(path, "rb") as fh:
        elements = _read_ply_header(fh)
        vertex = next((e for e in elements if e[0] == "vertex"), None)
        if vertex is None:
            raise MissingProperty("no vertex element")
        _, count, props = vertex
        names = [p[0] for p in props]
        for req in _REQUIRED:
            if req not in names:
                raise MissingProperty(f"vertex property {req!r} missing")
        try:
            dtype = np.dtype({"names": names,
                              "formats": ["<" + p[1] for p in props]})
        except ValueError as exc:
            raise UnsupportedFormat(f"bad vertex property layout: {exc}") from None
        payload = fh.read(dtype.itemsize * count)
    if len(payload) < dtype.itemsize * count:
        raise TruncatedFile(
            f"{path}: expected {dtype.itemsize * count} payload bytes, got {len(payload)}")
    rec = np.frombuffer(payload, dtype=dtype, count=count)

    n_rest = sum(1 for n in names if n.startswith("f_rest_"))
    degree = next((d for d, c in _REST_COUNTS.items() if c == n_rest), None)
    if degree is None:
        raise UnsupportedFormat(f"{n_rest} f_rest properties match no SH degree")
    k_rest = n_rest // 3

    def col(name):
        return np.asarray(rec[name], dtype=np.float64)

    means = np.stack([col("x"), col("y"), col("z")], axis=1)
    quats = np.stack([col(f"rot_{i}") for i in range(4)], axis=1)
    scales = np.stack([col(f"scale_{i}") for i in range(3)], axis=1)
    opac = col("opacity")
    sh = np.zeros((count, 1 + k_rest, 3))
    sh[:, 0, :] = np.stack([col(f"f_dc_{i}") for i in range(3)], axis=1)
    for c in range(3):
        for j in range(k_rest):
            sh[:, 1 + j, c] = col(f"f_rest_{c * k_rest + j}")

    gaussians = []
    skipped = 0
    for i in range(count):
        try:
            gaussians.append(Gaussian3D(means[i], quats[i], scales[i],
                                        float(opac[i]), sh[i]))
        except DecodeError as exc:
            skipped += 1
            logger.warning("%s: record %d skipped (%s)", path.name, i, exc)
    if skipped:
        logger.warning("%s: skipped %d of %d records", path.name, skipped, count)
    return Scene(gaussians=tuple(gaussians), sh_degree=degree)


def save_ply(scene: Scene, path) -> None:
    """Write a scene in the checkpoint layout load_ply reads (float32)."""
    k_rest = (scene.sh_degree + 1) ** 2 - 1
    names = (["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
             + [f"f_rest_{i}" for i in range(3 * k_rest)]
             + ["opacity", "scale_0", "scale_1", "scale_2",
                "rot_0", "rot_1", "rot_2", "rot_3"])
    n = len(scene)
    data = np.zeros((n, len(names)), dtype="<f4")
    for i, g in enumerate(scene.gaussians):
        rest = g.sh[1:, :].T.ravel()  # channel-major
        row = ([*g.mean_world, 0.0, 0.0, 0.0, *g.sh[0]]
               + list(rest)
               + [g.opacity_logit, *g.log_scale, *g.rot])
        data[i] = row
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {n}"]
    header += [f"property float {name}" for name in names]
    header.append("end_header")
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(data.tobytes())


def load_cameras(path) -> list:
    """Load camera rigs from the line-oriented text format."""
    rigs = []
    path = Path(path)
    for ln_no, raw in enumerate(path.read_text(encoding="ascii").splitlines(), 1):
        ln = raw.strip()
        if not ln or ln.startswith("#"):
            continue
        tok = ln.split()
        if len(tok) != 20:
            raise UnsupportedFormat(f"{path}:{ln_no}: expected 20 fields, got {len(tok)}")
        cam_id, tag = tok[0], tok[1]
        if tag not in _MODEL_TAGS:
            raise UnknownModelTag(f"{path}:{ln_no}: unknown camera model {tag!r}")
        w, h = int(tok[2]), int(tok[3])
        fx, fy, cx, cy = (float(x) for x in tok[4:8])
        R = np.array([float(x) for x in tok[8:17]]).reshape(3, 3)
        t = np.array([float(x) for x in tok[17:20]])
        err = float(np.linalg.norm(R @ R.T - np.eye(3)))
        if err >= 1e-6 or np.linalg.det(R) <= 0:
            raise NonOrthonormalRotation(
                f"{path}:{ln_no}: ||R R^T - I|| = {err:.3e} (det {np.linalg.det(R):.3f})")
        if err > 0:
            U, _, Vt = np.linalg.svd(R)
            R = U @ Vt  # nearest rotation (polar correction)
        rigs.append(CameraRig(_MODEL_TAGS[tag], fx, fy, cx, cy, w, h, R, t,
                              cam_id=cam_id))
    return rigs


def save_cameras(rigs, path) -> None:
    lines = ["# id model width height fx fy cx cy  r00..r22  tx ty tz"]
    inv_tags = {v: k for k, v in _MODEL_TAGS.items()}
    for rig in rigs:
        R = rig.rotation.ravel()
        fields = ([rig.cam_id, inv_tags[rig.model], str(rig.width), str(rig.height)]
                  + [f"{v:.17g}" for v in (rig.fx, rig.fy, rig.cx, rig.cy)]
                  + [f"{v:.17g}" for v in R]
                  + [f"{v:.17g}" for v in rig.translation])
        lines.append(" ".join(fields))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def _quantize(img: ImageBuffer) -> np.ndarray:
    px = img.pixels
    if not np.all(np.isfinite(px)):
        raise DecodeError("image contains non-finite pixels")
    return np.floor(np.clip(px, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def write_image(img: ImageBuffer, path, fmt: str = None) -> None:
    """Write an image as PNG or binary PPM (P6); bytes are deterministic."""
    path = Path(path)
    if fmt is None:
        fmt = path.suffix.lstrip(".").lower() or "png"
    fmt = fmt.lower()
    data = _quantize(img)
    try:
        if fmt == "ppm":
            with open(path, "wb") as fh:
                fh.write(f"P6\n{img.width} {img.height}\n255\n".encode("ascii"))
                fh.write(data.tobytes())
        elif fmt == "png":
            Image.fromarray(data, mode="RGB").save(path, format="PNG")
        else:
            raise UnsupportedFormat(f"unknown image format {fmt!r}")
    except OSError as exc:
        raise OSError(f"writing {path}: {exc}") from exc


def read_image(path) -> ImageBuffer:
    """Read an 8-bit image back into a float buffer in [0, 1]."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return ImageBuffer(pixels=arr)


_COLOR_CYCLE = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])


def synth_scene(kind: str, n: int = 1, radius: float = 2.0,
                angle_deg: float = 70.0, seed: int = 0) -> Scene:
    """Deterministic test scenes.

    Kinds:
        on_axis: n Gaussians along +z starting at (0, 0, radius), isotropic
            scale 0.05*radius, opacity logit +10, colors cycling R/G/B.
        ring: n isotropic Gaussians on a cone of half-angle angle_deg about
            +z at distance radius.
        grid: first n cells of a square lattice in the plane z = radius
            (SH degree 1, seed-jittered colors).

    The same arguments always produce a bit-identical scene.
    """
    kind = kind.replace("-", "_").lower()
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    ident = (1.0, 0.0, 0.0, 0.0)
    gaussians = []
    if kind == "on_axis":
        for k in range(n):
            mean = (0.0, 0.0, radius * (1.0 + 0.5 * k))
            dc = dc_from_rgb(_COLOR_CYCLE[k % 3])
            gaussians.append(Gaussian3D(mean, ident,
                                        np.log(0.05 * radius) * np.ones(3),
                                        10.0, dc.reshape(1, 3)))
        return Scene(tuple(gaussians), sh_degree=0)
    if kind == "ring":
        alpha = np.deg2rad(angle_deg)
        for k in range(n):
            psi = 2.0 * np.pi * k / n
            mean = radius * np.array([np.sin(alpha) * np.cos(psi),
                                      np.sin(alpha) * np.sin(psi),
                                      np.cos(alpha)])
            rgb = np.clip(_COLOR_CYCLE[k % 3] + rng.uniform(-0.1, 0.1, 3), 0.0, 1.0)
            gaussians.append(Gaussian3D(mean, ident,
                                        np.log(0.1 * radius) * np.ones(3),
                                        10.0, dc_from_rgb(rgb).reshape(1, 3)))
        return Scene(tuple(gaussians), sh_degree=0)
    if kind == "grid":
        side = int(np.ceil(np.sqrt(n)))
        coords = (np.linspace(-0.5, 0.5, side) * radius if side > 1
                  else np.zeros(1))
        for k in range(n):
            i, j = divmod(k, side)
            mean = (coords[j], coords[i], radius)
            rgb = np.clip(_COLOR_CYCLE[k % 3] + rng.uniform(-0.1, 0.1, 3), 0.0, 1.0)
            sh = np.zeros((4, 3))
            sh[0] = dc_from_rgb(rgb)
            sh[1:] = rng.uniform(-0.05, 0.05, (3, 3))
            gaussians.append(Gaussian3D(mean, ident,
                                        np.log(0.03 * radius) * np.ones(3),
                                        2.0, sh))
        return Scene(tuple(gaussians), sh_degree=1)
    raise ValueError(f"unknown fixture kind {kind!r}")
