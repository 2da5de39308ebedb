"""splatlab: Gaussian-splatting renderer and projection-error toolkit.

Renders 3D Gaussian scenes through two projection paths (classical
image-plane and per-splat tangent-plane) under pinhole, fisheye, and
panoramic cameras, and quantifies the local-affine-approximation error
that separates them.
"""

from .errors import SplatError
from .model import (CameraModel, CameraRig, Covariance3, Gaussian3D,
                    ImageBuffer, Scene, assemble_covariance, world_to_camera)
from .projection import (EPS_NEAR, Splat2D, TangentFrame, classic_jacobian,
                         classic_project, frame_rotation, optimal_jacobian,
                         optimal_project, project_splat, project_splat_classic,
                         sphere_project, tangent_frame)
from .error_analysis import (ErrorField, QuadratureSpec, SphericalMean,
                             error_field_pixels, error_field_spherical,
                             error_gradient, error_integral,
                             error_integral_checked, spherical_to_unit,
                             taylor_remainder)
from .cameras import PixelCoord, direction_to_pixel, pixel_to_direction
from .rasterizer import (PreparedSplat, RenderConfig, TileGrid, bin_tiles,
                         prepare_splats, render, render_with_stats, shade_pixel)
from .io import (load_cameras, load_ply, save_cameras, save_ply, synth_scene,
                 write_image)
from .metrics import MetricReport, focal_mask_eval, psnr, ssim

__version__ = "0.1.0"
