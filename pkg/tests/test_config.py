from pathlib import Path

import pytest
from pydantic import ValidationError

from fanet.config import (
    RUN_ROOT_ENV,
    STAGE_MODELS,
    DataMode,
    DegradationConfig,
    EvalConfig,
    ModelName,
    NetConfig,
    PathsConfig,
    RunConfig,
    Stage,
    StagePlan,
    UnpairedJitter,
)


def test_defaults_are_valid():
    cfg = RunConfig()

    assert cfg.net.image_side == cfg.degradation.n_high == 32
    assert cfg.net.n_identities == cfg.dataset.n_train_identities
    assert cfg.weights.lambda_dec == 1.0
    assert cfg.weights.lambda_gan == 0.01
    assert cfg.training.betas == (0.5, 0.999)


def test_run_config_survives_json():
    cfg = RunConfig(seed=11)

    assert RunConfig.model_validate_json(cfg.model_dump_json()) == cfg


@pytest.mark.parametrize(
    ("n_low", "n_high", "fixed_factor"),
    [
        (32, 32, 4),
        (40, 32, 4),
        (8, 32, 5),
        (0, 32, 4),
    ],
)
def test_degradation_config_rejects_invalid_resolutions(n_low, n_high, fixed_factor):
    with pytest.raises(ValidationError):
        DegradationConfig(n_low=n_low, n_high=n_high, fixed_factor=fixed_factor)


def test_unpaired_jitter_requires_ordered_sigma_range():
    with pytest.raises(ValidationError):
        UnpairedJitter(blur_sigma_range=(1.0, 0.5))


def test_net_config_requires_side_divisible_by_blocks():
    with pytest.raises(ValidationError):
        NetConfig(image_side=12, conv_widths=(4, 4, 4))


@pytest.mark.parametrize("field", ["d_f", "d_z"])
def test_net_config_requires_positive_feature_dims(field):
    with pytest.raises(ValidationError):
        NetConfig.model_validate({field: 0})


def test_base_side():
    assert NetConfig(image_side=32, conv_widths=(4, 4, 4, 4)).base_side == 2


@pytest.mark.parametrize("stage", list(Stage))
def test_stage_plan_accepts_the_stage_model_sets(stage):
    trainable, frozen = STAGE_MODELS[stage]

    plan = StagePlan(
        stage=stage,
        trainable=trainable,
        frozen=frozen,
        epochs=1,
        learning_rate=1e-4,
        data_mode=DataMode.MIXED,
    )

    assert plan.models == trainable | frozen


def test_stage_plan_rejects_overlapping_sets():
    with pytest.raises(ValidationError, match="both trainable and frozen"):
        StagePlan(
            stage=Stage.DISENTANGLE,
            trainable={ModelName.ENC_Z, ModelName.FC, ModelName.DEC, ModelName.DIS},
            frozen={ModelName.ENC_H, ModelName.DEC},
            epochs=1,
            learning_rate=1e-4,
            data_mode=DataMode.HR_ONLY,
        )


def test_stage_plan_rejects_wrong_trainable_set():
    with pytest.raises(ValidationError):
        StagePlan(
            stage=Stage.ADAPT,
            trainable={ModelName.ENC_L, ModelName.DEC},
            frozen={ModelName.ENC_H, ModelName.ENC_Z, ModelName.DIS},
            epochs=1,
            learning_rate=1e-4,
            data_mode=DataMode.PAIRED,
        )


def test_stage_two_freezes_everything_but_the_low_resolution_encoder():
    trainable, frozen = STAGE_MODELS[Stage.ADAPT]

    assert trainable == {ModelName.ENC_L}
    assert frozen == {ModelName.ENC_H, ModelName.ENC_Z, ModelName.DEC, ModelName.DIS}


def test_run_config_requires_classifier_width_to_match_training_identities():
    with pytest.raises(ValidationError, match="n_identities"):
        RunConfig(net=NetConfig(n_identities=7))


def test_run_config_requires_network_side_to_match_n_high():
    with pytest.raises(ValidationError, match="image_side"):
        RunConfig(net=NetConfig(image_side=16))


def test_eval_config_requires_two_pairs_per_fold():
    with pytest.raises(ValidationError):
        EvalConfig(folds=10, n_pairs=19)


def test_config_models_are_frozen():
    cfg = RunConfig()

    with pytest.raises(ValidationError):
        cfg.seed = 5  # type: ignore[misc]


def test_run_dir_defaults_to_run_root(monkeypatch):
    monkeypatch.delenv(RUN_ROOT_ENV, raising=False)

    assert PathsConfig(run_root=Path("a"), run_name="b").run_dir == Path("a/b")


def test_run_dir_honours_environment_override(monkeypatch, tmp_path):
    monkeypatch.setenv(RUN_ROOT_ENV, str(tmp_path))

    assert PathsConfig(run_name="b").run_dir == tmp_path / "b"
