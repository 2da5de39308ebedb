"""Image quality metrics and the focal-mask evaluation protocol.

PSNR uses a single MSE over all three channels with MAX = 1 and a 100 dB
cap for identical images.  SSIM is the classical single-scale form: 11x11
Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03, computed on Rec.601
luminance, averaged over the valid (fully-windowed) region.

The focal-mask protocol scores a wide-FOV render (focal length scale*f)
against a narrower ground truth: the central scale-fraction of the render
covers the ground truth's view, so that crop is compared against the
ground truth resized (bilinear) to the crop size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from .errors import DimensionMismatch, TooSmall
from .model import ImageBuffer

PSNR_CAP_DB = 100.0

_REC601 = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class MetricReport:
    psnr_db: float
    ssim: float
    n_pixels: int

    def csv_row(self) -> str:
        return f"{self.psnr_db:.12g},{self.ssim:.12g},{self.n_pixels}"


def _check_dims(a: ImageBuffer, b: ImageBuffer):
    if a.pixels.shape != b.pixels.shape:
        raise DimensionMismatch(f"{a.pixels.shape} vs {b.pixels.shape}")


def psnr(a: ImageBuffer, b: ImageBuffer) -> float:
    """Peak signal-to-noise ratio in dB over all channels jointly."""
    _check_dims(a, b)
    mse = float(np.mean((a.pixels - b.pixels) ** 2))
    if mse <= 0.0:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(1.0 / mse), PSNR_CAP_DB)


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    k = np.exp(-0.5 * (r / sigma) ** 2)
    k2 = k[:, None] * k[None, :]
    return k2 / k2.sum()


def ssim(a: ImageBuffer, b: ImageBuffer, k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean structural similarity on luminance."""
    _check_dims(a, b)
    win = 11
    if min(a.height, a.width) < win:
        raise TooSmall(f"image {a.height}x{a.width} smaller than {win}x{win} window")
    x = a.pixels @ _REC601
    y = b.pixels @ _REC601
    w = _gaussian_window(win, 1.5)
    mu_x = convolve2d(x, w, mode="valid")
    mu_y = convolve2d(y, w, mode="valid")
    xx = convolve2d(x * x, w, mode="valid") - mu_x * mu_x
    yy = convolve2d(y * y, w, mode="valid") - mu_y * mu_y
    xy = convolve2d(x * y, w, mode="valid") - mu_x * mu_y
    c1, c2 = k1 * k1, k2 * k2
    num = (2 * mu_x * mu_y + c1) * (2 * xy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (xx + yy + c2)
    return float(np.mean(num / den))


def bilinear_resize(px: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resampling with half-pixel centers (clamped at borders)."""
    h, w = px.shape[:2]
    if (h, w) == (out_h, out_w):
        return px.copy()
    sy = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    sx = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    y0 = np.clip(np.floor(sy).astype(int), 0, h - 1)
    x0 = np.clip(np.floor(sx).astype(int), 0, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = np.clip(sy - y0, 0.0, 1.0)[:, None, None]
    fx = np.clip(sx - x0, 0.0, 1.0)[None, :, None]
    top = px[y0][:, x0] * (1 - fx) + px[y0][:, x1] * fx
    bot = px[y1][:, x0] * (1 - fx) + px[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy


def metric_report(a: ImageBuffer, b: ImageBuffer) -> MetricReport:
    return MetricReport(psnr_db=psnr(a, b), ssim=ssim(a, b),
                        n_pixels=a.width * a.height)


def focal_mask_eval(render: ImageBuffer, gt: ImageBuffer, scale: float) -> MetricReport:
    """Score the central scale-fraction of a wide render against ground truth.

    The crop is the central (scale*W) x (scale*H) region of the render
    (floored to even dimensions); the ground truth is bilinearly resized to
    the crop size.  scale = 1 compares the raw pair.
    """
    if not 0.0 < scale <= 1.0:
        raise ValueError(f"scale must be in (0, 1], got {scale}")
    _check_dims(render, gt)
    if scale == 1.0:
        return metric_report(render, gt)
    h, w = render.height, render.width
    ch = max(2 * int(scale * h / 2), 2)
    cw = max(2 * int(scale * w / 2), 2)
    y0 = (h - ch) // 2
    x0 = (w - cw) // 2
    crop = ImageBuffer(render.pixels[y0:y0 + ch, x0:x0 + cw])
    gt_small = ImageBuffer(bilinear_resize(gt.pixels, ch, cw))
    return metric_report(crop, gt_small)
