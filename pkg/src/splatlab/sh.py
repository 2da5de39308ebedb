"""Real spherical-harmonic color evaluation (degrees 0..3).

Uses the hard-coded real-SH basis constants shared by the public splat
ecosystem, so coefficients from standard checkpoints decode to the same
colors here.  Color convention: clamp(0.5 + sum_lm c_lm Y_lm(dir), 0, 1).
"""

from __future__ import annotations

import numpy as np

SH_C0 = 0.28209479177387814
SH_C1 = 0.4886025119029199
SH_C2 = (1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
         -1.0925484305920792, 0.5462742152960396)
SH_C3 = (-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
         0.3731763325901154, -0.4570457994644658, 1.445305721320277,
         -0.5900435899266435)


def eval_sh_colors(shs: np.ndarray, dirs: np.ndarray, degree: int) -> np.ndarray:
    """Evaluate SH color for a batch of splats.

    Args:
        shs: coefficients, shape (N, K, 3) with K >= (degree+1)^2.
        dirs: unit view directions, shape (N, 3).
        degree: SH degree in 0..3.

    Returns:
        RGB colors in [0, 1], shape (N, 3).
    """
    shs = np.asarray(shs, dtype=np.float64)
    dirs = np.asarray(dirs, dtype=np.float64)
    out = SH_C0 * shs[:, 0, :]
    if degree >= 1:
        x, y, z = dirs[:, 0:1], dirs[:, 1:2], dirs[:, 2:3]
        out = out - SH_C1 * y * shs[:, 1, :] + SH_C1 * z * shs[:, 2, :] - SH_C1 * x * shs[:, 3, :]
    if degree >= 2:
        xx, yy, zz = x * x, y * y, z * z
        xy, yz, xz = x * y, y * z, x * z
        out = (out
               + SH_C2[0] * xy * shs[:, 4, :]
               + SH_C2[1] * yz * shs[:, 5, :]
               + SH_C2[2] * (2.0 * zz - xx - yy) * shs[:, 6, :]
               + SH_C2[3] * xz * shs[:, 7, :]
               + SH_C2[4] * (xx - yy) * shs[:, 8, :])
    if degree >= 3:
        out = (out
               + SH_C3[0] * y * (3.0 * xx - yy) * shs[:, 9, :]
               + SH_C3[1] * xy * z * shs[:, 10, :]
               + SH_C3[2] * y * (4.0 * zz - xx - yy) * shs[:, 11, :]
               + SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy) * shs[:, 12, :]
               + SH_C3[4] * x * (4.0 * zz - xx - yy) * shs[:, 13, :]
               + SH_C3[5] * z * (xx - yy) * shs[:, 14, :]
               + SH_C3[6] * x * (xx - 3.0 * yy) * shs[:, 15, :])
    return np.clip(out + 0.5, 0.0, 1.0)


def dc_from_rgb(rgb) -> np.ndarray:
    """Inverse of the degree-0 color decode: DC coefficients for a target RGB."""
    return (np.asarray(rgb, dtype=np.float64) - 0.5) / SH_C0
