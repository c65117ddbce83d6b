import base64

import numpy as np
import pytest

from streampaint.codec import image_to_bytes
from streampaint.errors import SceneError
from streampaint.masks import mask_to_png
from streampaint.scene import (
    Scene,
    SceneBrush,
    load_scene,
    save_scene,
    scene_from_json,
    scene_to_engine,
    scene_to_json,
)


def sample_scene(height=128, width=128):
    mask = np.zeros((height, width))
    mask[: height // 2] = 1.0
    return Scene(
        height=height,
        width=width,
        seed=11,
        mode="lcm",
        steps=5,
        brushes=[
            SceneBrush(id=0, name="background", background=True,
                       target={"color": [1.0, 1.0, 1.0]}, mask={"full": True}),
            SceneBrush(
                id=1, name="top", background=False,
                target={"color": [0.2, 0.4, 0.6]},
                mask={"png_b64": base64.b64encode(mask_to_png(mask)).decode("ascii")},
                blur_sigma=2.0,
            ),
        ],
    )


class TestRoundTrip:
    def test_save_load_save_byte_identical(self, tmp_path):
        scene = sample_scene()
        first = tmp_path / "a.json"
        second = tmp_path / "b.json"
        save_scene(scene, first)
        save_scene(load_scene(first), second)
        assert first.read_bytes() == second.read_bytes()

    def test_image_target_canonicalized(self, tmp_path):
        scene = sample_scene()
        image = np.random.default_rng(0).random((128, 128, 3))
        scene.brushes[1].target = {
            "png_b64": base64.b64encode(image_to_bytes(image)).decode("ascii")
        }
        path_a, path_b = tmp_path / "a.json", tmp_path / "b.json"
        save_scene(scene, path_a)
        save_scene(load_scene(path_a), path_b)
        assert path_a.read_bytes() == path_b.read_bytes()

    def test_path_references_inlined_on_load(self, tmp_path):
        mask = np.zeros((64, 64))
        mask[:32] = 1.0
        (tmp_path / "mask.png").write_bytes(mask_to_png(mask))
        doc = sample_scene(64, 64)
        doc.brushes[1].mask = {"path": "mask.png"}
        save_scene(doc, tmp_path / "scene.json", base_dir=tmp_path)
        loaded = load_scene(tmp_path / "scene.json")
        assert "png_b64" in loaded.brushes[1].mask


class TestValidation:
    def test_missing_background_rejected(self):
        scene = sample_scene()
        scene.brushes = [b for b in scene.brushes if not b.background]
        with pytest.raises(SceneError):
            scene.validate()

    def test_version_mismatch(self):
        scene = sample_scene()
        text = scene_to_json(scene).replace('"version": 1', '"version": 99')
        with pytest.raises(SceneError, match="version"):
            scene_from_json(text)

    def test_non_scene_document(self):
        with pytest.raises(SceneError):
            scene_from_json('{"format": "something-else", "version": 1}')

    def test_invalid_json(self):
        with pytest.raises(SceneError):
            scene_from_json("{nope")

    def test_indivisible_canvas(self):
        scene = sample_scene()
        scene.height = 100
        with pytest.raises(SceneError):
            scene.validate()

    def test_duplicate_ids(self):
        scene = sample_scene()
        scene.brushes[1].id = 0
        with pytest.raises(SceneError):
            scene.validate()

    def test_missing_target(self):
        scene = sample_scene()
        scene.brushes[1].target = {}
        with pytest.raises(SceneError):
            scene.validate()

    def test_mask_dims_must_match_canvas(self):
        scene = sample_scene(128, 128)
        wrong = np.ones((64, 64))
        scene.brushes[1].mask = {
            "png_b64": base64.b64encode(mask_to_png(wrong)).decode("ascii")
        }
        with pytest.raises(SceneError, match="mask"):
            scene_to_engine(scene)


class TestEngineMaterialization:
    def test_latent_dims_and_palette(self):
        scene = sample_scene(512, 4608)
        assert scene.latent_dims == (64, 576)
        palette, config, schedule = scene_to_engine(scene)
        assert palette.brushes[0].is_background
        assert palette.brushes[1].raw_mask.shape == (64, 576)
        assert config.plan.n == 5
        assert schedule.mode.value == "lcm"

    def test_color_target_conditioning(self):
        scene = sample_scene()
        palette, _, _ = scene_to_engine(scene)
        cond = palette.conditionings[1]
        np.testing.assert_allclose(cond.vector, [0.2, 0.4, 0.6])
        assert cond.target.shape == (4,)

    def test_image_target_resized_to_tile(self):
        scene = sample_scene(128, 128)  # latent 16x16, tile clamps to 16x16
        image = np.random.default_rng(1).random((128, 128, 3))
        scene.brushes[1].target = {
            "png_b64": base64.b64encode(image_to_bytes(image)).decode("ascii")
        }
        palette, _, _ = scene_to_engine(scene)
        assert palette.conditionings[1].target.shape == (16, 16, 4)
