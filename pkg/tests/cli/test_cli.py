import json
from pathlib import Path

import numpy as np
import pytest

from fanet.cli import main
from fanet.config import Ablation, Stage
from fanet.datagen.images import Image
from fanet.datagen.manifest import MANIFEST_NAME, load_image, save_image
from fanet.evaluation.report import load_reports


@pytest.fixture
def config_file(run_config, tmp_path) -> Path:
    path = tmp_path / "config.json"
    path.write_text(run_config.model_dump_json())
    return path


def face_file(directory: Path, side: int) -> Path:
    path = directory / f"face{side}.png"
    save_image(Image.from_array(np.linspace(-0.9, 0.9, side * side).reshape(side, side)), path)
    return path


def test_print_config(config_file, capsys, tmp_path):
    assert main(["--config", str(config_file), "--print-config"]) == 0

    assert json.loads(capsys.readouterr().out)["seed"] == 3
    assert not (tmp_path / "runs").exists()


def test_seed_override(config_file, capsys):
    assert main(["--config", str(config_file), "--seed", "9", "--print-config"]) == 0

    assert json.loads(capsys.readouterr().out)["seed"] == 9


def test_no_command_is_a_usage_error(config_file):
    assert main(["--config", str(config_file)]) == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["train", "--stage", "3"],
        ["train"],
        ["train", "--stage", "2", "--ablate", "no-gan"],
        ["eval"],
        ["eval", "--protocol", "verify-rsa", "--ablate", "no-rsa", "--checkpoint", "x.ckpt"],
        ["frobnicate"],
    ],
)
def test_malformed_arguments_exit_with_usage(argv):
    with pytest.raises(SystemExit) as excinfo:
        main(argv)

    assert excinfo.value.code == 2


def test_invalid_config_values(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"training": {"batch_size": 0}}))

    assert main(["--config", str(path), "--print-config"]) == 3
    assert "invalid config" in capsys.readouterr().err


def test_unknown_config_field(tmp_path):
    path = tmp_path / "typo.json"
    path.write_text(json.dumps({"trainng": {}}))

    assert main(["--config", str(path), "gradcheck"]) == 3


def test_missing_config_file(tmp_path):
    assert main(["--config", str(tmp_path / "absent.json"), "report"]) == 3


def test_stage_two_before_stage_one(config_file, capsys):
    assert main(["--config", str(config_file), "train", "--stage", "2"]) == 4

    assert "has not been run" in capsys.readouterr().err


def test_training_without_a_dataset(config_file, capsys):
    assert main(["--config", str(config_file), "train", "--stage", "1.1"]) == 4

    assert "gen-data" in capsys.readouterr().err


def test_unknown_protocol(config_file):
    assert main(["--config", str(config_file), "eval", "--protocol", "verify-all"]) == 6


def test_eval_of_an_untrained_ablation(config_file, capsys):
    argv = ["--config", str(config_file), "eval", "--protocol", "verify-rsa", "--ablate", "no-dec"]

    assert main(argv) == 4
    assert "no checkpoint with ablation no-dec" in capsys.readouterr().err


def test_report_without_reports(config_file):
    assert main(["--config", str(config_file), "report"]) == 4


def test_every_command_records_the_config(config_file, tmp_path):
    main(["--config", str(config_file), "report"])

    run_dir = tmp_path / "runs" / "default"
    assert json.loads((run_dir / "config.json").read_text())["seed"] == 3
    assert (run_dir / "seed.json").exists()


def test_gen_data_is_reproducible(config_file, tmp_path):
    outputs = [tmp_path / "a", tmp_path / "b"]

    for output in outputs:
        assert main(["--config", str(config_file), "gen-data", "--output", str(output)]) == 0

    first, second = (sorted(path.relative_to(root) for path in root.rglob("*")) for root in outputs)
    assert first == second
    assert (outputs[0] / MANIFEST_NAME).exists()
    for relative in first:
        if (outputs[0] / relative).is_file():
            assert (outputs[0] / relative).read_bytes() == (outputs[1] / relative).read_bytes()


def test_normalize_a_low_resolution_face(config_file, trained_run, tmp_path):
    output = tmp_path / "normalized.png"
    argv = ["--config", str(config_file), "normalize"]
    argv += ["--checkpoint", str(trained_run.checkpoint(Stage.ADAPT))]
    argv += ["--input", str(face_file(tmp_path, 4)), "--output", str(output)]

    assert main(argv) == 0

    assert load_image(output).side == 8


def test_normalize_rejects_inputs_below_the_lowest_resolution(config_file, trained_run, tmp_path):
    argv = ["--config", str(config_file), "normalize"]
    argv += ["--checkpoint", str(trained_run.checkpoint(Stage.ADAPT))]
    argv += ["--input", str(face_file(tmp_path, 2)), "--output", str(tmp_path / "out.png")]

    assert main(argv) == 3
    assert not (tmp_path / "out.png").exists()


def test_normalize_needs_a_stage_two_checkpoint(config_file, trained_run, tmp_path):
    argv = ["--config", str(config_file), "normalize"]
    argv += ["--checkpoint", str(trained_run.checkpoint(Stage.DISENTANGLE))]
    argv += ["--input", str(face_file(tmp_path, 4)), "--output", str(tmp_path / "out.png")]

    assert main(argv) == 4


def test_gradcheck(config_file, capsys):
    assert main(["--config", str(config_file), "gradcheck"]) == 0

    out = capsys.readouterr().out
    assert "All 16 checks passed" in out
    assert "loss/enc_dec" in out


def test_full_pipeline(config_file, capsys, tmp_path):
    def run(*argv: str) -> int:
        return main(["--config", str(config_file), *argv])

    assert run("gen-data") == 0
    assert run("train", "--stage", "1.1") == 0
    assert run("train", "--stage", "1.2") == 0
    assert run("train", "--stage", "2", "--ablate", "no-rsa") == 0
    assert run("train", "--stage", "2") == 0
    assert run("train", "--stage", "2", "--resume") == 0
    assert run("train", "--stage", "finetune") == 0
    assert run("eval", "--protocol", "verify-rsa") == 0
    assert run("eval", "--protocol", "verify-rsa", "--ablate", "no-rsa") == 0
    assert run("eval", "--protocol", "identify") == 0
    capsys.readouterr()

    assert run("report") == 0

    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split() == ["protocol", "metric", "value"]
    assert {line.split()[0] for line in lines[1:]} == {
        "identify",
        "verify-rsa",
        "verify-rsa[no-rsa]",
    }
    saved = load_reports(tmp_path / "runs" / "default" / "reports")
    reports = {report.label: report for report in saved}
    assert reports["verify-rsa"].provenance.checkpoint_stage is Stage.FINETUNE
    assert reports["verify-rsa"].provenance.checkpoint_ablation is None
    ablated = reports["verify-rsa[no-rsa]"].provenance
    assert (ablated.checkpoint_stage, ablated.checkpoint_ablation) == (Stage.ADAPT, Ablation.NO_RSA)
