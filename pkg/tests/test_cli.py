"""Command-line interface: flag validation, exit codes, file outputs."""

import numpy as np
import pytest
from click.testing import CliRunner
from PIL import Image

from makeuplab.cli import main
from makeuplab.colors import parse_hex_color
from makeuplab.fixtures import synthetic_face
from makeuplab.imageio import load_image, save_image
from makeuplab.regions import labelmap_to_mask

FAST = ["--t-star", "60", "--inversion-steps", "6", "--reverse-steps", "8"]


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def inputs(tmp_path):
    image, labelmap = synthetic_face(64, 64)
    image_path = tmp_path / "face.png"
    labels_path = tmp_path / "labels.png"
    save_image(image_path, image)
    Image.fromarray(labelmap.grid.astype(np.uint8), mode="L").save(labels_path)
    return {"image": str(image_path), "labels": str(labels_path), "tmp": tmp_path,
            "array": image, "labelmap": labelmap}


def test_missing_image_flag_is_usage_error(runner, tmp_path):
    result = runner.invoke(main, ["color", "--lips", "#B03A4A", "--out", str(tmp_path / "o.png")])
    assert result.exit_code == 2
    assert "--image" in result.stderr


def test_bad_hex_color_is_usage_error(runner, inputs):
    result = runner.invoke(
        main, ["color", "--image", inputs["image"], "--lips", "red",
               "--out", str(inputs["tmp"] / "o.png")])
    assert result.exit_code == 2


def test_no_edit_requested_is_usage_error(runner, inputs):
    result = runner.invoke(
        main, ["color", "--image", inputs["image"], "--out", str(inputs["tmp"] / "o.png")])
    assert result.exit_code == 2
    assert "nothing to do" in result.stderr


def test_unknown_backend_is_usage_error(runner, inputs):
    result = runner.invoke(
        main, ["color", "--image", inputs["image"], "--lips", "#B03A4A",
               "--backend", "quantum", "--out", str(inputs["tmp"] / "o.png")])
    assert result.exit_code == 2


def test_color_job_writes_output(runner, inputs):
    out = inputs["tmp"] / "out.png"
    result = runner.invoke(
        main, ["color", "--image", inputs["image"], "--labels", inputs["labels"],
               "--lips", "#B03A4A", "--alpha", "1.0", *FAST, "--out", str(out)])
    assert result.exit_code == 0, result.output + result.stderr
    assert result.output.strip().endswith("out.png")
    edited = load_image(out)
    assert edited.shape == (64, 64, 3)

    lip = labelmap_to_mask(inputs["labelmap"], "lip").grid > 0.5
    target = parse_hex_color("#B03A4A")
    before = np.linalg.norm(inputs["array"][lip].mean(axis=0) - target)
    after = np.linalg.norm(edited[lip].mean(axis=0) - target)
    assert after < before


def test_color_job_without_labels_uses_fixture_segmenter(runner, inputs):
    out = inputs["tmp"] / "seg.png"
    result = runner.invoke(
        main, ["color", "--image", inputs["image"], "--lips", "#B03A4A", *FAST,
               "--out", str(out)])
    assert result.exit_code == 0, result.output + result.stderr
    assert out.exists()


def test_color_job_with_concepts(runner, inputs):
    out = inputs["tmp"] / "concept.png"
    result = runner.invoke(
        main, ["color", "--image", inputs["image"], "--labels", inputs["labels"],
               "--concept", "glossy lips:0.6", "--concept", "warm glow:0.2",
               *FAST, "--out", str(out)])
    assert result.exit_code == 0, result.output + result.stderr
    assert out.exists()


def test_debug_dir_dumps_intermediates(runner, inputs):
    out = inputs["tmp"] / "dbg.png"
    debug_dir = inputs["tmp"] / "debug"
    result = runner.invoke(
        main, ["color", "--image", inputs["image"], "--labels", inputs["labels"],
               "--lips", "#B03A4A", *FAST, "--out", str(out),
               "--debug-dir", str(debug_dir)])
    assert result.exit_code == 0, result.output + result.stderr
    names = {p.name for p in debug_dir.iterdir()}
    assert {"xhat0.png", "xhat_new.png", "mask_lip.png"} <= names
    assert np.asarray(Image.open(debug_dir / "mask_lip.png")).ndim == 2


def test_pipeline_failure_exits_one(runner, inputs, tmp_path):
    bare = tmp_path / "bare.png"  # background-only labels: lip region is empty
    Image.fromarray(np.zeros((64, 64), dtype=np.uint8), mode="L").save(bare)
    result = runner.invoke(
        main, ["color", "--image", inputs["image"], "--labels", str(bare),
               "--lips", "#B03A4A", *FAST, "--out", str(inputs["tmp"] / "o.png")])
    assert result.exit_code == 1
    assert result.stderr.startswith("error:")


def test_transfer_requires_reference(runner, inputs):
    result = runner.invoke(
        main, ["transfer", "--image", inputs["image"], "--out", str(inputs["tmp"] / "o.png")])
    assert result.exit_code == 2
    assert "--reference" in result.stderr


def test_transfer_job_writes_output(runner, inputs, tmp_path):
    ref_image, ref_map = synthetic_face(64, 64, seed=3)
    ref_path = tmp_path / "ref.png"
    ref_labels = tmp_path / "ref_labels.png"
    save_image(ref_path, ref_image)
    Image.fromarray(ref_map.grid.astype(np.uint8), mode="L").save(ref_labels)

    out = inputs["tmp"] / "transfer.png"
    result = runner.invoke(
        main, ["transfer", "--image", inputs["image"], "--labels", inputs["labels"],
               "--reference", str(ref_path), "--reference-labels", str(ref_labels),
               "--t-star", "60", "--inversion-steps", "5", "--reverse-steps", "6",
               "--out", str(out)])
    assert result.exit_code == 0, result.output + result.stderr
    assert load_image(out).shape == (64, 64, 3)


def test_help_lists_commands(runner):
    result = runner.invoke(main, ["--help"])
    assert result.exit_code == 0
    for command in ("color", "transfer", "serve"):
        assert command in result.output


def test_serve_help_does_not_bind(runner):
    result = runner.invoke(main, ["serve", "--help"])
    assert result.exit_code == 0
    assert "--port" in result.output
