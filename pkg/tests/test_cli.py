import numpy as np
import pytest

from splatlab.cli import main
from splatlab.io import read_image

PINHOLE_65 = "0 pinhole 65 65 65 65 32.5 32.5  1 0 0 0 1 0 0 0 1  0 0 0"


@pytest.fixture
def workspace(tmp_path):
    """A synth scene plus a single-camera file, built through the CLI."""
    scene = tmp_path / "scene.ply"
    cams = tmp_path / "cams.txt"
    assert main(["synth", "--kind", "on-axis", "--n", "1",
                 "--out", str(scene)]) == 0
    cams.write_text(PINHOLE_65 + "\n")
    return tmp_path, scene, cams


@pytest.mark.parametrize("cmd", ["render", "compare", "error-map", "synth"])
def test_help_exits_zero(cmd, capsys):
    with pytest.raises(SystemExit) as exc:
        main([cmd, "--help"])
    assert exc.value.code == 0
    assert cmd in capsys.readouterr().out


class TestSynthCommand:
    def test_writes_loadable_ply(self, tmp_path):
        out = tmp_path / "ring.ply"
        assert main(["synth", "--kind", "ring", "--n", "8", "--angle", "70",
                     "--out", str(out)]) == 0
        from splatlab.io import load_ply
        assert len(load_ply(out)) == 8

    def test_seed_determinism(self, tmp_path):
        a, b = tmp_path / "a.ply", tmp_path / "b.ply"
        main(["synth", "--kind", "grid", "--n", "5", "--seed", "3", "--out", str(a)])
        main(["synth", "--kind", "grid", "--n", "5", "--seed", "3", "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_zero_count_is_usage_error(self, tmp_path):
        assert main(["synth", "--kind", "ring", "--n", "0",
                     "--out", str(tmp_path / "x.ply")]) == 1


class TestRenderCommand:
    def test_smoke(self, workspace, capsys):
        tmp, scene, cams = workspace
        assert main(["render", "--scene", str(scene), "--cameras", str(cams),
                     "--mode", "optimal", "--out", str(tmp / "out")]) == 0
        out = capsys.readouterr().out
        assert "splats=" in out and "culled=" in out
        img = read_image(tmp / "out" / "0_optimal.png")
        assert img.pixels[32, 32, 0] > 0.9  # saturated red fixture

    def test_classic_fisheye_unsupported(self, workspace):
        tmp, scene, cams = workspace
        assert main(["render", "--scene", str(scene), "--cameras", str(cams),
                     "--mode", "classic", "--camera-model", "fisheye",
                     "--out", str(tmp / "out")]) == 2

    def test_focal_scale_changes_output(self, workspace):
        tmp, scene, cams = workspace
        main(["render", "--scene", str(scene), "--cameras", str(cams),
              "--mode", "optimal", "--out", str(tmp / "f10")])
        main(["render", "--scene", str(scene), "--cameras", str(cams),
              "--mode", "optimal", "--focal-scale", "0.2",
              "--out", str(tmp / "f02")])
        a = read_image(tmp / "f10" / "0_optimal.png").pixels
        b = read_image(tmp / "f02" / "0_optimal.png").pixels
        assert np.abs(a - b).max() > 0.01

    def test_missing_scene_is_io_error(self, workspace):
        tmp, _, cams = workspace
        assert main(["render", "--scene", str(tmp / "nope.ply"),
                     "--cameras", str(cams), "--mode", "optimal",
                     "--out", str(tmp / "out")]) == 1

    def test_repeat_runs_byte_identical(self, workspace):
        tmp, scene, cams = workspace
        for d in ("r1", "r2"):
            main(["render", "--scene", str(scene), "--cameras", str(cams),
                  "--mode", "optimal", "--out", str(tmp / d)])
        assert ((tmp / "r1" / "0_optimal.png").read_bytes()
                == (tmp / "r2" / "0_optimal.png").read_bytes())

    def test_threads_env_fallback(self, workspace, monkeypatch):
        tmp, scene, cams = workspace
        main(["render", "--scene", str(scene), "--cameras", str(cams),
              "--mode", "optimal", "--threads", "2", "--out", str(tmp / "flag")])
        monkeypatch.setenv("SPLAT_THREADS", "2")
        main(["render", "--scene", str(scene), "--cameras", str(cams),
              "--mode", "optimal", "--out", str(tmp / "env")])
        assert ((tmp / "flag" / "0_optimal.png").read_bytes()
                == (tmp / "env" / "0_optimal.png").read_bytes())


class TestCompareCommand:
    def test_on_axis_modes_agree(self, workspace, capsys):
        tmp, scene, cams = workspace
        assert main(["compare", "--scene", str(scene),
                     "--cameras", str(cams)]) == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert lines[0] == "camera_id,mode,psnr_db,ssim,classic_vs_optimal_mad"
        mad = float(lines[1].split(",")[4])
        assert mad < 1e-3

    def test_self_comparison_hits_cap(self, workspace, capsys):
        tmp, scene, cams = workspace
        main(["render", "--scene", str(scene), "--cameras", str(cams),
              "--mode", "optimal", "--out", str(tmp / "gt")])
        capsys.readouterr()
        assert main(["compare", "--scene", str(scene), "--cameras", str(cams),
                     "--gt", str(tmp / "gt")]) == 0
        rows = [ln.split(",") for ln in capsys.readouterr().out.strip().split("\n")[1:]]
        by_mode = {r[1]: r for r in rows}
        assert float(by_mode["optimal"][2]) == 100.0
        assert float(by_mode["optimal"][3]) == 1.0

    def test_focal_mask_protocol(self, workspace, capsys):
        # wide render scored against narrow ground truth through the
        # central-crop-and-resize protocol
        tmp, scene, cams = workspace
        main(["render", "--scene", str(scene), "--cameras", str(cams),
              "--mode", "optimal", "--out", str(tmp / "gt")])
        capsys.readouterr()
        assert main(["compare", "--scene", str(scene), "--cameras", str(cams),
                     "--focal-scale", "0.5", "--gt", str(tmp / "gt"),
                     "--focal-mask", "0.5"]) == 0
        rows = [ln.split(",") for ln in capsys.readouterr().out.strip().split("\n")[1:]]
        for r in rows:
            assert 0.0 <= float(r[2]) <= 100.0
            assert -1.0 <= float(r[3]) <= 1.0

    def test_deterministic_output(self, workspace, capsys):
        tmp, scene, cams = workspace
        main(["compare", "--scene", str(scene), "--cameras", str(cams)])
        first = capsys.readouterr().out
        main(["compare", "--scene", str(scene), "--cameras", str(cams)])
        assert capsys.readouterr().out == first


class TestErrorMapCommand:
    def test_spherical_argmin_at_origin(self, tmp_path, capsys):
        out = tmp_path / "field.csv"
        assert main(["error-map", "--space", "spherical", "--lambda", "0.095",
                     "--n", "9", "--nodes", "24", "--out", str(out)]) == 0
        printed = capsys.readouterr().out
        assert "argmin: axis1=0 axis2=0" in printed or \
               "argmin: axis1=-0 axis2=-0" in printed
        assert out.read_text().startswith("axis1,axis2,value\n")
        assert len(out.read_text().strip().split("\n")) == 1 + 81

    def test_pixel_field_mean_grows(self, tmp_path, capsys):
        means = {}
        for s in ("1.0", "0.2"):
            main(["error-map", "--space", "pixels", "--focal-scale", s,
                  "--n", "9", "--nodes", "24", "--out", str(tmp_path / f"{s}.csv")])
            out = capsys.readouterr().out
            means[s] = float(next(ln for ln in out.split("\n")
                                  if ln.startswith("mean:")).split()[1])
        assert means["0.2"] > means["1.0"]

    def test_lambda_overflow_exits_one(self, tmp_path):
        assert main(["error-map", "--space", "spherical", "--lambda", "1.5",
                     "--n", "9", "--out", str(tmp_path / "x.csv")]) == 1
