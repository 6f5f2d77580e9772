import json
import subprocess
import sys
from dataclasses import replace

import pytest

from actexport.export import ExportSpec, export_activations
from actexport.tune import fine_tune


def make_spec(image_dir, labels_csv, out_dir, nodes=("relu2", "fc"), epochs=0):
    return ExportSpec(
        model_name="tinycnn",
        nodes=tuple(nodes),
        image_dir=image_dir,
        labels_csv=labels_csv,
        out_dir=out_dir,
        tune_epochs=epochs,
    )


def test_zero_epoch_tune_keeps_backbone_behavior(toy_images, tmp_path):
    image_dir, labels_csv = toy_images
    backbone = ("conv1", "relu2")  # head swap must not touch these

    plain_dir = tmp_path / "plain"
    export_activations(make_spec(image_dir, labels_csv, plain_dir, backbone))

    tuned_dir = tmp_path / "tuned"
    report = fine_tune(make_spec(image_dir, labels_csv, tuned_dir, backbone, epochs=0))
    assert report.checkpoint.exists()
    assert report.epochs == 0
    spec = replace(
        make_spec(image_dir, labels_csv, tuned_dir, backbone),
        checkpoint=report.checkpoint,
    )
    export_activations(spec)

    for path in sorted((plain_dir / "tensors").iterdir()):
        assert path.read_bytes() == (tuned_dir / "tensors" / path.name).read_bytes()


def test_tuning_improves_or_keeps_training_accuracy(toy_images, tmp_path):
    image_dir, labels_csv = toy_images
    report = fine_tune(make_spec(image_dir, labels_csv, tmp_path, epochs=5))
    assert report.accuracy_after >= report.accuracy_before
    assert report.epochs == 5
    # the checkpoint is exportable and the result feeds the primary cleanly
    spec = replace(
        make_spec(image_dir, labels_csv, tmp_path), checkpoint=report.checkpoint
    )
    manifest_path = export_activations(spec)
    result = subprocess.run(
        [sys.executable, "-m", "deepfuse", "validate", str(manifest_path)],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0, result.stdout + result.stderr


def test_tuned_export_differs_from_untuned_at_the_head(toy_images, tmp_path):
    image_dir, labels_csv = toy_images
    plain_dir = tmp_path / "plain"
    export_activations(make_spec(image_dir, labels_csv, plain_dir, nodes=("fc",)))
    tuned_dir = tmp_path / "tuned"
    report = fine_tune(make_spec(image_dir, labels_csv, tuned_dir, epochs=3))
    spec = replace(
        make_spec(image_dir, labels_csv, tuned_dir, nodes=("fc",)),
        checkpoint=report.checkpoint,
    )
    export_activations(spec)
    pairs = zip(
        sorted((plain_dir / "tensors").iterdir()),
        sorted((tuned_dir / "tensors").iterdir()),
    )
    assert any(a.read_bytes() != b.read_bytes() for a, b in pairs)


def test_cli_tune_and_export(toy_images, tmp_path, capsys):
    from actexport.cli import main

    image_dir, labels_csv = toy_images
    nodes_file = tmp_path / "nodes.txt"
    nodes_file.write_text("relu2\nfc\n")
    out_dir = tmp_path / "out"
    rc = main(
        [
            "export",
            "--model", "tinycnn",
            "--nodes", str(nodes_file),
            "--images", str(image_dir),
            "--labels", str(labels_csv),
            "--out", str(out_dir),
            "--tune", "epochs=1",
        ]
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert "tuned 1 epoch" in out
    doc = json.loads((out_dir / "manifest.json").read_text())
    assert [layer["id"] for layer in doc["layers"]] == ["relu2", "fc"]
    assert (out_dir / "checkpoint.pt").exists()


def test_cli_unknown_model(capsys):
    from actexport.cli import main

    rc = main(["export", "--model", "nope", "--list-nodes"])
    assert rc == 1
    assert "available" in capsys.readouterr().err


def test_cli_list_nodes(capsys):
    from actexport.cli import main

    rc = main(["export", "--model", "tinycnn", "--list-nodes"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "conv1" in out and "fc" in out


def test_single_class_tuning_rejected(tmp_path, toy_images):
    image_dir, labels_csv = toy_images
    labels = tmp_path / "labels.csv"
    labels.write_text("red0.png,red\nred1.png,red\n")
    from actexport.export import ExportError

    with pytest.raises(ExportError, match="2 classes"):
        fine_tune(make_spec(image_dir, labels, tmp_path, epochs=1))
