"""Quantification of the local-affine-approximation error.

The image-plane projection drops the Taylor remainder of x' -> x'/x'_z at
the Gaussian mean.  This module evaluates that remainder, integrates its
squared norm over a fixed angular box around the mean direction (giving a
scalar error epsilon per mean direction), and samples epsilon fields over
spherical mean coordinates or over the pixels of a pinhole camera.

All directions use the spherical parameterization

    (theta, phi) -> (sin(phi) cos(theta), -sin(theta), cos(phi) cos(theta))

so (0, 0) is the optical axis +z.  The integration box is
[theta_mu +- w] x [phi_mu +- w] with half-width w = pi/4 by default; the
box must stay strictly inside (-pi/2, pi/2)^2 where the integrand is
finite, otherwise DomainOverflow is raised (never silently clipped).
"""

from __future__ import annotations

import io as _io
from dataclasses import dataclass, field

import numpy as np

from .errors import BehindCamera, ConvergenceError, DomainOverflow
from .model import CameraRig
from .projection import EPS_NEAR

_HALF_PI = 0.5 * np.pi
_CHUNK = 256

_leggauss_cache: dict = {}


def _nodes(n: int):
    if n not in _leggauss_cache:
        _leggauss_cache[n] = np.polynomial.legendre.leggauss(n)
    return _leggauss_cache[n]


@dataclass(frozen=True)
class SphericalMean:
    """Mean direction in spherical coordinates (radians)."""

    theta_mu: float
    phi_mu: float

    def __post_init__(self):
        if not (abs(self.theta_mu) < _HALF_PI and abs(self.phi_mu) < _HALF_PI):
            raise DomainOverflow(
                f"mean ({self.theta_mu:.4f}, {self.phi_mu:.4f}) outside (-pi/2, pi/2)^2")


@dataclass(frozen=True)
class QuadratureSpec:
    """Tensor-product Gauss-Legendre rule for the error integral."""

    nodes: int = 64
    half_width: float = np.pi / 4


@dataclass(frozen=True)
class ErrorField:
    """Sampled error values over a coordinate grid.

    values[i, j] is the error at (axis1[i], axis2[j]); all values are
    finite and non-negative.
    """

    axis1: np.ndarray
    axis2: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values)
        if not np.all(np.isfinite(v)) or np.any(v < 0.0):
            raise DomainOverflow("error field contains negative or non-finite values")


def spherical_to_unit(theta, phi) -> np.ndarray:
    """Unit direction for spherical coordinates; (0, 0) maps to +z."""
    theta = np.asarray(theta, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    return np.stack([np.sin(phi) * np.cos(theta),
                     -np.sin(theta),
                     np.cos(phi) * np.cos(theta)], axis=-1)


def taylor_remainder(x: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """First-order Taylor remainder of the image-plane projection.

    R1(x) = phi(x) - phi(mu) - J(mu) (x - mu), expanded at mu.  The third
    component is exactly zero: both projected points have z = 1 and the
    Jacobian's third row vanishes.
    """
    x = np.asarray(x, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    if x[2] <= EPS_NEAR or mu[2] <= EPS_NEAR:
        raise BehindCamera("point or mean behind the z = 1 plane")
    d = x - mu
    # J(mu) d evaluated directly: d/mu_z - mu * d_z / mu_z^2
    Jd = d / mu[2] - mu * (d[2] / (mu[2] * mu[2]))
    r = x / x[2] - mu / mu[2] - Jd
    r[2] = 0.0
    return r


def remainder_norm_sq_spherical(theta, phi, theta_mu, phi_mu):
    """Squared remainder norm with all points on the unit sphere.

    This is the integrand of the error functional, expressed directly in
    the spherical coordinates of the point (theta, phi) and of the mean
    (theta_mu, phi_mu).  Equals |taylor_remainder(x, mu)|^2 for the
    corresponding unit vectors.  Broadcasts over array inputs.
    """
    c_pm, c_tm = np.cos(phi_mu), np.cos(theta_mu)
    f1 = (-np.sin(phi - phi_mu) * np.cos(theta) / (c_pm * c_pm * c_tm)
          + np.tan(phi) - np.tan(phi_mu))
    f2 = (np.sin(theta) / (c_pm * c_tm)
          - np.sin(theta_mu) * np.cos(phi) * np.cos(theta) / (c_pm * c_pm * c_tm * c_tm)
          + np.tan(theta_mu) / c_pm - np.tan(theta) / np.cos(phi))
    return f1 * f1 + f2 * f2


def _check_domain(theta_mu: np.ndarray, phi_mu: np.ndarray, half_width: float):
    worst = max(float(np.max(np.abs(theta_mu))), float(np.max(np.abs(phi_mu))))
    if worst + half_width >= _HALF_PI:
        raise DomainOverflow(
            f"integration box [+-{half_width:.4f}] around a mean at {worst:.4f} rad "
            "leaves (-pi/2, pi/2)")


def _epsilon_batch(theta_mu: np.ndarray, phi_mu: np.ndarray,
                   quad: QuadratureSpec) -> np.ndarray:
    theta_mu = np.asarray(theta_mu, dtype=np.float64).ravel()
    phi_mu = np.asarray(phi_mu, dtype=np.float64).ravel()
    _check_domain(theta_mu, phi_mu, quad.half_width)
    x, w = _nodes(quad.nodes)
    hw = quad.half_width
    W2 = (hw * w)[:, None] * (hw * w)[None, :]
    out = np.empty(theta_mu.shape[0])
    for lo in range(0, out.shape[0], _CHUNK):
        tm = theta_mu[lo:lo + _CHUNK][:, None, None]
        pm = phi_mu[lo:lo + _CHUNK][:, None, None]
        th = tm + hw * x[None, :, None]
        ph = pm + hw * x[None, None, :]
        g = remainder_norm_sq_spherical(th, ph, tm, pm)
        out[lo:lo + _CHUNK] = np.einsum("mij,ij->m", g, W2)
    return out


def error_integral(m: SphericalMean, quad: QuadratureSpec = QuadratureSpec()) -> float:
    """Expected squared remainder norm over the box centered at the mean."""
    return float(_epsilon_batch([m.theta_mu], [m.phi_mu], quad)[0])


def error_integral_checked(m: SphericalMean, quad: QuadratureSpec = QuadratureSpec(),
                           tol: float = 1e-6) -> float:
    """error_integral with a node-doubling convergence check.

    Raises:
        ConvergenceError: if doubling the node count moves the result by
            more than tol (relative).
    """
    coarse = error_integral(m, quad)
    fine = error_integral(m, QuadratureSpec(2 * quad.nodes, quad.half_width))
    if abs(fine - coarse) > tol * max(abs(fine), 1e-300):
        raise ConvergenceError(
            f"quadrature not converged: {coarse:.12g} vs {fine:.12g} at 2x nodes")
    return fine


def error_gradient(m: SphericalMean, quad: QuadratureSpec = QuadratureSpec(),
                   step: float = 1e-4) -> np.ndarray:
    """Central-difference gradient of the error integral at a mean."""
    tm, pm = m.theta_mu, m.phi_mu
    vals = _epsilon_batch([tm + step, tm - step, tm, tm],
                          [pm, pm, pm + step, pm - step], quad)
    return np.array([(vals[0] - vals[1]) / (2 * step),
                     (vals[2] - vals[3]) / (2 * step)])


def error_field_spherical(lam: float, n: int,
                          quad: QuadratureSpec = QuadratureSpec()) -> ErrorField:
    """Error field over an n x n grid of means in [-lam*pi/4, lam*pi/4]^2.

    lam must lie in (0, 1) so every integration box stays in-domain.
    """
    if not 0.0 < lam < 1.0:
        raise DomainOverflow(f"domain scale {lam} outside (0, 1)")
    if n < 3:
        raise ValueError("grid size must be at least 3")
    axis = np.linspace(-lam * np.pi / 4, lam * np.pi / 4, n)
    TM, PM = np.meshgrid(axis, axis, indexing="ij")
    values = _epsilon_batch(TM.ravel(), PM.ravel(), quad).reshape(n, n)
    return ErrorField(axis1=axis, axis2=axis.copy(), values=values,
                      meta={"space": "spherical", "lambda": lam,
                            "half_width": quad.half_width, "nodes": quad.nodes})


def default_pixel_field_rig(width: int = 640, height: int = 640) -> CameraRig:
    """Long-lens pinhole rig whose whole pixel grid stays in-domain down to
    focal_scale 0.2 (per-axis half-FOV < 45 degrees)."""
    from .model import CameraModel
    return CameraRig(CameraModel.PINHOLE, fx=2.6 * width, fy=2.6 * height,
                     cx=width / 2, cy=height / 2, width=width, height=height,
                     rotation=np.eye(3), translation=np.zeros(3))


def error_field_pixels(rig: CameraRig, focal_scale: float, n: int,
                       quad: QuadratureSpec = QuadratureSpec()) -> ErrorField:
    """Error field sampled over the pixel grid of a pinhole camera.

    Each sample maps pixel (u, v) through the pinhole direction with focal
    lengths (fx * focal_scale, fy * focal_scale) to a mean direction, then
    evaluates the error integral there.
    """
    if not focal_scale > 0:
        raise ValueError("focal_scale must be positive")
    if n < 3:
        raise ValueError("grid size must be at least 3")
    fx, fy = rig.fx * focal_scale, rig.fy * focal_scale
    us = np.linspace(0.5, rig.width - 0.5, n)
    vs = np.linspace(0.5, rig.height - 0.5, n)
    U, V = np.meshgrid(us, vs, indexing="ij")
    a = (U - rig.cx) / fx
    b = (V - rig.cy) / fy
    inv_norm = 1.0 / np.sqrt(1.0 + a * a + b * b)
    theta_mu = np.arcsin(np.clip(-b * inv_norm, -1.0, 1.0))
    phi_mu = np.arctan2(a, 1.0)
    values = _epsilon_batch(theta_mu.ravel(), phi_mu.ravel(), quad).reshape(n, n)
    return ErrorField(axis1=us, axis2=vs, values=values,
                      meta={"space": "pixels", "focal_scale": focal_scale,
                            "fx": fx, "fy": fy, "nodes": quad.nodes})


def error_integral_closed_form(m: SphericalMean) -> float:
    """Literal analytic expression for the error integral (cross-check only).

    Transcribed verbatim from the published closed form of this integral.
    It reproduces error_integral at the origin to machine precision, but
    departs from it away from the origin (the printed expression appears
    to be corrupted there: an independent symbolic integration matches the
    quadrature everywhere, this expression does not).  Keep it behind this
    explicit call; error_integral is the authoritative path.
    """
    tm, pm = m.theta_mu, m.phi_mu
    q = np.pi / 4
    tpm, ttm = np.tan(pm + q), np.tan(tm + q)
    cpm, ctm = np.cos(pm), np.cos(tm)
    spm, stm = np.sin(pm), np.sin(tm)
    s4, c4 = np.sin(pm + q), np.cos(pm + q)
    sq2 = np.sqrt(2.0)
    pre = 1.0 / (16 * cpm**4 * ctm**4 * tpm * ttm)
    log_ratio = np.log((s4 + 1) * (c4 + 1) / ((1 - s4) * (1 - c4)))
    log_mix = np.log((1 - s4) * (1 - c4) * np.exp(2 * sq2 * ctm)
                     / ((s4 + 1) * (c4 + 1) * ttm ** (2 * stm)))
    log_mix2 = np.log((1 - s4) * (1 - c4) * np.exp(2 * sq2 * ctm)
                      / ((s4 + 1) * (c4 + 1)))
    terms = (
        8 * ((2 * ttm - np.pi) * ttm + 2) * cpm**4 * ctm**4 * tpm**2
        + ((-4 * (2 * np.cos(2 * tm) + np.pi) * spm**2
            + np.pi * (2 * np.cos(2 * tm) + np.pi) + 4 * np.cos(2 * tm) + 2 * np.pi)
           * stm**2 * tpm * ttm)
        + 8 * log_ratio * log_mix * cpm**3 * ctm**3 * tpm * ttm
        + (4 * np.pi * (-4 * np.log(tpm) * np.tan(pm) + np.pi * np.tan(pm)**2
                        + 2 * tpm - np.pi) * cpm**4 * ctm**4 * tpm * ttm)
        + ((2 * np.pi * ((4 + 2 * np.pi + 16 * sq2) * stm**2 - 2 + np.pi) * cpm**2
            + (2 * np.pi - 4) * np.cos(2 * tm) - 2 * np.pi + np.pi**2)
           * ctm**2 * tpm * ttm)
        + 16 * sq2 * log_mix2 * cpm**3 * ctm**4 * tpm * ttm
        + 64 * spm**2 * cpm**2 * ctm**4 * tpm * ttm
        - 16 * sq2 * (1 + sq2) * stm * np.sin(2 * tm) * cpm**2 * ctm * tpm * ttm
        + 8 * np.pi * cpm**4 * ctm**4 * ttm
        + 8 * (-2 * np.pi * ctm**2 + np.pi + 4) * cpm**4 * ctm**2 / (np.tan(tm) - 1)**2
    )
    return float(pre * terms)


def write_error_field_csv(fld: ErrorField, fh) -> None:
    """Write a field as CSV rows `axis1,axis2,value` (12+ significant digits)."""
    own = isinstance(fh, (str,)) or hasattr(fh, "__fspath__")
    out = open(fh, "w", encoding="ascii") if own else fh
    try:
        out.write("axis1,axis2,value\n")
        for i, a in enumerate(fld.axis1):
            for j, b in enumerate(fld.axis2):
                out.write(f"{a:.12e},{b:.12e},{fld.values[i, j]:.12e}\n")
    finally:
        if own:
            out.close()


def field_csv_string(fld: ErrorField) -> str:
    buf = _io.StringIO()
    write_error_field_csv(fld, buf)
    return buf.getvalue()
