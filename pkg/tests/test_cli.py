import json
from pathlib import Path

import numpy as np
import pytest

from sketchconcept.platform.cli import main
from sketchconcept.sketchrep import load_mask, save_mask

TINY_CONFIG = {
    "version": 1,
    "pretrain": {"steps": 12, "batch_size": 2, "corpus_size": 6, "seed": 0},
    "stage1": {"steps": 3, "batch_size": 2, "lr": 0.01},
    "stage2": {"steps": 3, "batch_size": 2, "lr": 0.001},
    "sampling": {"steps": 4},
    "dataset": {
        "concepts": [
            {"id": "c0", "shape": "star", "texture": "striped", "orientation_deg": 30.0,
             "color": "red", "n_pairs": 1, "n_edits": 1},
            {"id": "c1", "shape": "hexagon", "texture": "striped", "orientation_deg": 0.0,
             "color": "blue", "n_pairs": 1, "n_edits": 1},
        ]
    },
}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "config.json"
    cfg.write_text(json.dumps(TINY_CONFIG))
    assert main(["pretrain", "--config", str(cfg), "--out", str(root / "pre"), "--seed", "0"]) == 0
    assert main(["synth-data", "--config", str(cfg), "--out", str(root / "data"), "--seed", "0"]) == 0
    assert (
        main(
            ["train", "--config", str(cfg), "--base", str(root / "pre" / "base.zip"),
             "--store", str(root / "store"), "--pairs", str(root / "data" / "c0"),
             "--out", str(root / "train"), "--seed", "0"]
        )
        == 0
    )
    concept_id = next((root / "store" / "concepts").glob("*.zip")).stem
    return root, cfg, concept_id


class TestCliPipeline:
    def test_pretrain_artifacts(self, workspace):
        root, _, _ = workspace
        assert (root / "pre" / "base.zip").exists()
        assert (root / "pre" / "pretrain_loss.csv").read_text().startswith("step,loss")
        sidecar = json.loads((root / "pre" / "pretrain.json").read_text())
        assert "base" in sidecar["concept_hashes"]

    def test_synth_data_layout(self, workspace):
        root, _, _ = workspace
        index = json.loads((root / "data" / "dataset.json").read_text())
        assert [c["id"] for c in index["concepts"]] == ["c0", "c1"]
        assert (root / "data" / "c0" / "manifest.json").exists()
        assert (root / "data" / "c0" / "pair0.png").exists()
        assert (root / "data" / "c0" / "edit0.strokes.json").exists()

    def test_train_artifacts(self, workspace):
        root, _, concept_id = workspace
        assert concept_id.startswith("c0-")
        assert (root / "train" / "c0_stage1_loss.csv").exists()
        sidecar = json.loads((root / "train" / "c0_train.json").read_text())
        assert sidecar["concept_hashes"]["concept"] == concept_id

    def test_generate_ablate_and_errors(self, workspace):
        root, cfg, concept_id = workspace
        code = main(
            ["generate", "--base", str(root / "pre" / "base.zip"), "--store", str(root / "store"),
             "--concept", concept_id, "--sketch", str(root / "data" / "c0" / "edit0.strokes.json"),
             "--prompt", "a photo of [v] in the snow", "--seed", "42", "--steps", "4",
             "--out", str(root / "gen")]
        )
        assert code == 0
        assert (root / "gen" / "generate.png").exists()
        sidecar = json.loads((root / "gen" / "generate.json").read_text())
        assert sidecar["seed"] == 42
        assert sidecar["request"]["prompt"] == "a photo of [v] in the snow"
        # unknown concept -> nonzero exit
        assert (
            main(
                ["generate", "--base", str(root / "pre" / "base.zip"),
                 "--store", str(root / "store"), "--concept", "nope-000000000000",
                 "--sketch", str(root / "data" / "c0" / "edit0.strokes.json"),
                 "--prompt", "a photo of [v]", "--out", str(root / "gen2")]
            )
            == 1
        )

    def test_train_with_ablation_flag(self, workspace):
        root, cfg, _ = workspace
        code = main(
            ["train", "--config", str(cfg), "--base", str(root / "pre" / "base.zip"),
             "--store", str(root / "store"), "--pairs", str(root / "data" / "c1"),
             "--concept", "c1-ablated", "--ablate", "no_shape_loss",
             "--out", str(root / "train2"), "--seed", "0"]
        )
        assert code == 0
        ablated = next(p for p in (root / "store" / "concepts").glob("c1-ablated-*.zip"))
        import zipfile

        with zipfile.ZipFile(ablated) as zf:
            manifest = json.loads(zf.read("manifest.json"))
        assert manifest["flags"]["no_shape_loss"] is True

    def test_edit_and_multi_and_style_and_transfer(self, workspace):
        root, cfg, concept_id = workspace
        base = str(root / "pre" / "base.zip")
        store = str(root / "store")
        image = str(root / "data" / "c0" / "pair0.png")
        sketch = str(root / "data" / "c0" / "edit0.strokes.json")
        blend = root / "blend.png"
        m = np.zeros((64, 64), np.uint8)
        m[8:56, 8:56] = 1
        save_mask(blend, m)
        assert main(["edit", "--base", base, "--store", store, "--concept", concept_id,
                     "--image", image, "--sketch", sketch, "--blend-mask", str(blend),
                     "--prompt", "a photo of a [v]", "--steps", "4", "--seed", "1",
                     "--out", str(root / "edit")]) == 0
        assert (root / "edit" / "edit.png").exists()
        assert main(["multi", "--base", base, "--store", store,
                     "--concepts", f"{concept_id},{concept_id}",
                     "--sketches", f"{sketch},{root/'data'/'c1'/'edit0.strokes.json'}",
                     "--steps", "4", "--seed", "1", "--out", str(root / "multi")]) == 0
        assert (root / "multi" / "multi.png").exists()
        assert main(["style", "--base", base, "--store", store, "--concept", concept_id,
                     "--sketch", sketch, "--prompt", "a pastel drawing", "--steps", "4",
                     "--seed", "1", "--out", str(root / "style")]) == 0
        assert (root / "style" / "style.png").exists()
        assert main(["transfer", "--base", base, "--store", store, "--target", concept_id,
                     "--source", concept_id, "--image", image, "--sketch", sketch,
                     "--blend-mask", str(blend), "--steps", "4", "--seed", "1",
                     "--out", str(root / "transfer")]) == 0
        assert (root / "transfer" / "transfer.png").exists()

    def test_bench_command(self, workspace):
        root, cfg, concept_id = workspace
        manifest = {
            "base": str(root / "pre" / "base.zip"),
            "store": str(root / "store"),
            "dataset": str(root / "data"),
            "concepts": ["c0"],
            "variants": {"full": {"c0": concept_id}},
            "seed": 0,
            "steps": 3,
            "max_templates": 1,
        }
        mpath = root / "manifest.json"
        mpath.write_text(json.dumps(manifest))
        assert main(["bench", "--manifest", str(mpath), "--variants", "full",
                     "--out", str(root / "bench")]) == 0
        report = json.loads((root / "bench" / "report.json").read_text())
        assert report["tables"]["full"]

    def test_invalid_config_is_error_exit(self, workspace, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["pretrain", "--config", str(bad), "--out", str(tmp_path / "x")]) == 1

    def test_unknown_flag_exits_nonzero(self):
        with pytest.raises(SystemExit):
            main(["generate", "--definitely-not-a-flag"])
