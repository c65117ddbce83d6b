import base64
import json

import numpy as np
import pytest

from streampaint.cli import build_parser, main
from streampaint.masks import mask_to_png
from streampaint.scene import Scene, SceneBrush, save_scene


@pytest.fixture
def regions_scene(tmp_path):
    mask_left = np.zeros((256, 256))
    mask_left[:, :128] = 1.0
    mask_right = np.zeros((256, 256))
    mask_right[:, 128:] = 1.0

    def b64(mask):
        return base64.b64encode(mask_to_png(mask)).decode("ascii")

    scene = Scene(
        height=256,
        width=256,
        seed=21,
        mode="lcm",
        steps=5,
        brushes=[
            SceneBrush(id=0, name="background", background=True,
                       target={"color": [0.5, 0.5, 0.5]}, mask={"full": True}),
            SceneBrush(id=1, name="left", background=False,
                       target={"color": [0.9, 0.1, 0.1]}, mask={"png_b64": b64(mask_left)}),
            SceneBrush(id=2, name="right", background=False,
                       target={"color": [0.1, 0.1, 0.9]}, mask={"png_b64": b64(mask_right)}),
        ],
    )
    path = tmp_path / "scene.json"
    save_scene(scene, path)
    return path


@pytest.fixture
def panorama_scene(tmp_path):
    scene = Scene(
        height=512,
        width=1024,
        seed=33,
        mode="lcm",
        steps=4,
        brushes=[
            SceneBrush(id=0, name="background", background=True,
                       target={"color": [0.3, 0.5, 0.7]}, mask={"full": True}),
        ],
    )
    path = tmp_path / "pano.json"
    save_scene(scene, path)
    return path


class TestRegions:
    def test_disjoint_masks_high_iou(self, regions_scene, tmp_path, capsys):
        out = tmp_path / "regions.png"
        assert main(["regions", "--scene", str(regions_scene), "--out", str(out)]) == 0
        captured = capsys.readouterr().out
        assert "not reproducible" in captured
        report = json.loads(captured.strip().splitlines()[-1])
        assert report["iou"]["left"] >= 0.99
        assert report["iou"]["right"] >= 0.99
        assert out.exists()

    def test_needs_two_brushes(self, panorama_scene, tmp_path):
        out = tmp_path / "x.png"
        assert main(["regions", "--scene", str(panorama_scene), "--out", str(out)]) == 2


class TestPanorama:
    def test_renders_with_coverage_report(self, panorama_scene, tmp_path, capsys):
        out = tmp_path / "pano.png"
        code = main(["panorama", "--scene", str(panorama_scene), "--out", str(out)])
        assert code == 0
        report = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert report["latent"] == [64, 128]
        assert report["tiles"] == 3  # single row, (128 - 64) / 32 + 1 columns
        assert report["min_weight"] >= 1.0
        assert out.exists()

    def test_rerun_is_byte_identical(self, panorama_scene, tmp_path):
        out_a, out_b = tmp_path / "a.png", tmp_path / "b.png"
        main(["panorama", "--scene", str(panorama_scene), "--out", str(out_a)])
        main(["panorama", "--scene", str(panorama_scene), "--out", str(out_b)])
        assert out_a.read_bytes() == out_b.read_bytes()

    def test_dimension_overrides(self, panorama_scene, tmp_path, capsys):
        out = tmp_path / "wide.png"
        code = main([
            "panorama", "--scene", str(panorama_scene), "--out", str(out),
            "--width", "2048", "--height", "512",
        ])
        assert code == 0
        report = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert report["latent"] == [64, 256]


class TestBench:
    def test_table_structure_and_speedup(self, tmp_path, capsys):
        out = tmp_path / "bench.json"
        code = main([
            "bench", "--latency", "0.01", "--codec-latency", "0.002",
            "--tiny-codec-latency", "0.0005", "--frames", "6",
            "--frames-sequential", "2", "--json", str(out),
        ])
        assert code == 0
        captured = capsys.readouterr().out
        assert "hardware-bound" in captured
        doc = json.loads(out.read_text())
        rows = {row["method"]: row for row in doc["rows"]}
        assert rows["sequential"]["speedup"] == 1.0
        assert rows["+ stream batch"]["fps"] > rows["sequential"]["fps"]
        assert rows["+ tiny codec"]["fps"] > rows["+ stream batch"]["fps"]


class TestParser:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            build_parser().parse_args(["--version"])
        assert exc.value.code == 0

    def test_subcommand_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_scene_error_reported(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{}")
        out = tmp_path / "o.png"
        assert main(["panorama", "--scene", str(bad), "--out", str(out)]) == 1
        assert "error" in capsys.readouterr().err
