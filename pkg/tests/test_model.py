import numpy as np
import pytest

from oracles import random_spd, rot_z
from splatlab.errors import DecodeError
from splatlab.model import (CameraModel, CameraRig, Covariance3, Gaussian3D,
                            Scene, assemble_covariance, world_to_camera)
from splatlab.sh import dc_from_rgb, eval_sh_colors

IDENT = (1.0, 0.0, 0.0, 0.0)


def make_gaussian(mean=(0, 0, 2), rot=IDENT, log_scale=(0, 0, 0), logit=0.0, k=1):
    return Gaussian3D(mean, rot, log_scale, logit, np.zeros((k, 3)))


class TestAssembleCovariance:
    def test_unit_scales_no_rotation(self):
        cov = assemble_covariance(make_gaussian())
        np.testing.assert_allclose(cov.sym, np.eye(3), atol=1e-15)

    def test_axis_aligned_scaling_squares(self):
        g = make_gaussian(log_scale=(np.log(2.0), 0.0, 0.0))
        np.testing.assert_allclose(assemble_covariance(g).sym,
                                   np.diag([4.0, 1.0, 1.0]), atol=1e-14)

    def test_rotation_conjugates(self):
        # 90 degrees about z: conjugate diag(4,1,1) with a hand-built matrix.
        s, c = np.sin(np.pi / 4), np.cos(np.pi / 4)
        g = make_gaussian(rot=(c, 0.0, 0.0, s), log_scale=(np.log(2.0), 0.0, 0.0))
        got = assemble_covariance(g).sym
        R = rot_z(np.pi / 2)
        np.testing.assert_allclose(got, R @ np.diag([4.0, 1.0, 1.0]) @ R.T, atol=1e-12)
        np.testing.assert_allclose(got, np.diag([1.0, 4.0, 1.0]), atol=1e-12)

    def test_eigenvalues_are_squared_scales(self, rng):
        for _ in range(25):
            ls = rng.uniform(-2.0, 1.0, 3)
            q = rng.normal(0.0, 1.0, 4)
            g = make_gaussian(rot=q, log_scale=ls)
            ev = np.sort(np.linalg.eigvalsh(assemble_covariance(g).sym))
            np.testing.assert_allclose(ev, np.sort(np.exp(2 * ls)), rtol=1e-9)


class TestWorldToCamera:
    def test_identity_pose(self, rng):
        rig = CameraRig(CameraModel.PINHOLE, 50, 50, 32, 32, 64, 64,
                        np.eye(3), np.zeros(3))
        g = make_gaussian(mean=(0.3, -0.2, 4.0))
        cov = Covariance3(random_spd(rng))
        mu, sig = world_to_camera(g, cov, rig)
        np.testing.assert_allclose(mu, g.mean_world, atol=0)
        np.testing.assert_allclose(sig.sym, cov.sym, atol=0)

    def test_translation_only(self):
        rig = CameraRig(CameraModel.PINHOLE, 50, 50, 32, 32, 64, 64,
                        np.eye(3), np.array([0.0, 0.0, 5.0]))
        g = make_gaussian(mean=(0.0, 0.0, 0.0))
        cov = Covariance3(np.diag([1.0, 2.0, 3.0]))
        mu, sig = world_to_camera(g, cov, rig)
        np.testing.assert_allclose(mu, [0.0, 0.0, 5.0])
        np.testing.assert_allclose(sig.sym, cov.sym)

    def test_y_flip_rotation(self):
        R = np.diag([-1.0, 1.0, -1.0])  # 180 degrees about y
        rig = CameraRig(CameraModel.PINHOLE, 50, 50, 32, 32, 64, 64, R, np.zeros(3))
        g = make_gaussian(mean=(1.0, 0.0, 2.0))
        mu, _ = world_to_camera(g, Covariance3(np.eye(3)), rig)
        np.testing.assert_allclose(mu, [-1.0, 0.0, -2.0], atol=1e-15)

    def test_rigid_preserves_eigenvalues_and_round_trips(self, rng):
        for _ in range(20):
            q = rng.normal(0.0, 1.0, 4)
            q /= np.linalg.norm(q)
            w, x, y, z = q
            R = np.array([
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)]])
            t = rng.normal(0.0, 3.0, 3)
            rig = CameraRig(CameraModel.PINHOLE, 50, 50, 32, 32, 64, 64, R, t)
            g = make_gaussian(mean=rng.normal(0.0, 2.0, 3))
            cov = Covariance3(random_spd(rng))
            mu, sig = world_to_camera(g, cov, rig)
            np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(sig.sym)),
                                       np.sort(np.linalg.eigvalsh(cov.sym)), rtol=1e-9)
            back = R.T @ (mu - t)
            assert np.linalg.norm(back - g.mean_world) < 1e-9


class TestValidation:
    def test_degenerate_quaternion_rejected(self):
        with pytest.raises(DecodeError):
            make_gaussian(rot=(1e-9, 0.0, 0.0, 0.0))

    def test_quaternion_normalized_on_load(self):
        g = make_gaussian(rot=(2.0, 0.0, 0.0, 0.0))
        assert abs(np.linalg.norm(g.rot) - 1.0) < 1e-12

    def test_non_finite_rejected(self):
        with pytest.raises(DecodeError):
            make_gaussian(mean=(np.nan, 0.0, 0.0))
        with pytest.raises(DecodeError):
            make_gaussian(log_scale=(np.inf, 0.0, 0.0))

    def test_decoded_opacity_in_unit_interval(self):
        assert 0.0 < make_gaussian(logit=-30.0).opacity < 1.0
        assert 0.0 < make_gaussian(logit=30.0).opacity < 1.0

    def test_covariance_asymmetric_rejected(self):
        m = np.eye(3)
        m[0, 1] = 1e-3
        with pytest.raises(DecodeError):
            Covariance3(m)

    def test_covariance_indefinite_rejected(self):
        with pytest.raises(DecodeError):
            Covariance3(np.diag([1.0, 1.0, -0.5]))

    def test_rig_rejects_bad_rotation(self):
        R = np.eye(3)
        R[0, 0] = 1.01
        with pytest.raises(DecodeError):
            CameraRig(CameraModel.PINHOLE, 50, 50, 32, 32, 64, 64, R, np.zeros(3))

    def test_rig_rejects_nonpositive_focal(self):
        with pytest.raises(DecodeError):
            CameraRig(CameraModel.PINHOLE, 0.0, 50, 32, 32, 64, 64,
                      np.eye(3), np.zeros(3))

    def test_panorama_ignores_focal(self):
        rig = CameraRig(CameraModel.EQUIRECTANGULAR, 0.0, 0.0, 0, 0, 64, 32,
                        np.eye(3), np.zeros(3))
        assert rig.width == 64

    def test_scene_checks_sh_counts(self):
        g = make_gaussian(k=4)
        with pytest.raises(DecodeError):
            Scene((g,), sh_degree=0)
        Scene((g,), sh_degree=1)

    def test_types_are_frozen(self):
        g = make_gaussian()
        with pytest.raises(ValueError):
            g.mean_world[0] = 5.0


class TestSphericalHarmonics:
    def test_degree_zero_is_view_independent(self, rng):
        sh = rng.normal(0.0, 1.0, (1, 1, 3))
        dirs = rng.normal(0.0, 1.0, (8, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        colors = np.stack([eval_sh_colors(sh, d[None, :], 0)[0] for d in dirs])
        assert np.ptp(colors, axis=0).max() == 0.0

    def test_dc_round_trip(self):
        rgb = np.array([0.8, 0.1, 0.3])
        sh = dc_from_rgb(rgb).reshape(1, 1, 3)
        got = eval_sh_colors(sh, np.array([[0.0, 0.0, 1.0]]), 0)[0]
        np.testing.assert_allclose(got, rgb, atol=1e-12)

    def test_higher_degrees_modulate_with_direction(self, rng):
        sh = np.zeros((1, 16, 3))
        sh[0, 0] = dc_from_rgb((0.5, 0.5, 0.5))
        sh[0, 1:] = rng.normal(0.0, 0.2, (15, 3))
        d1 = np.array([[0.0, 0.0, 1.0]])
        d2 = np.array([[1.0, 0.0, 0.0]])
        c1 = eval_sh_colors(sh, d1, 3)
        c2 = eval_sh_colors(sh, d2, 3)
        assert np.abs(c1 - c2).max() > 1e-3
        assert (c1 >= 0).all() and (c1 <= 1).all()
