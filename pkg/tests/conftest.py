"""Fixtures shared by every test package: a tiny run config and what it trains."""

from pathlib import Path

import pytest
from hypothesis import settings

from fanet.config import (
    RUN_ROOT_ENV,
    DatasetConfig,
    DegradationConfig,
    EvalConfig,
    NetConfig,
    PathsConfig,
    RunConfig,
    Stage,
    TrainingConfig,
    UnpairedJitter,
)
from fanet.datagen.dataset import SampleSet, generate_dataset
from fanet.datagen.manifest import write_dataset
from fanet.training.rundir import RunDirectory, train

settings.register_profile("fanet", deadline=None, max_examples=100)
settings.load_profile("fanet")

TINY_CONFIG = RunConfig(
    seed=3,
    net=NetConfig(image_side=8, d_f=6, d_z=3, n_identities=3, conv_widths=(4, 4)),
    degradation=DegradationConfig(
        n_low=4,
        n_high=8,
        fixed_factor=2,
        unpaired_jitter=UnpairedJitter(max_shift_px=1, blur_sigma_range=(0.3, 0.6)),
    ),
    dataset=DatasetConfig(
        n_train_identities=3,
        n_eval_identities=4,
        poses=(-15.0, 0.0, 15.0),
        illuminations=(0.8, 1.2),
        occlusions=(False,),
        workers=2,
    ),
    training=TrainingConfig(epoch_multiplier=0.1, batch_size=4, finetune_iterations=2, workers=2),
    evaluation=EvalConfig(folds=2, n_pairs=8, resolution_buckets=((4, 5), (6, 8)), batch_size=5),
)


def with_paths(cfg: RunConfig, root: Path) -> RunConfig:
    return cfg.model_copy(
        update={"paths": PathsConfig(dataset_dir=root / "data", run_root=root / "runs")}
    )


@pytest.fixture(scope="session")
def tiny_config() -> RunConfig:
    return TINY_CONFIG


@pytest.fixture
def run_config(
    tiny_config: RunConfig, tmp_path: Path, monkeypatch: pytest.MonkeyPatch
) -> RunConfig:
    """The tiny config writing under ``tmp_path``, with the run-root override pointing there."""
    monkeypatch.setenv(RUN_ROOT_ENV, str(tmp_path / "runs"))
    return with_paths(tiny_config, tmp_path)


@pytest.fixture(scope="session")
def tiny_dataset(tiny_config: RunConfig) -> SampleSet:
    return generate_dataset(tiny_config.dataset, tiny_config.net.image_side)


@pytest.fixture(scope="session")
def trained_run(
    tiny_config: RunConfig, tiny_dataset: SampleSet, tmp_path_factory: pytest.TempPathFactory
) -> RunDirectory:
    """A run directory holding stage 1.1, 1.2 and 2 checkpoints of the tiny config."""
    root = tmp_path_factory.mktemp("trained")
    cfg = with_paths(tiny_config, root)
    write_dataset(cfg.paths.dataset_dir, tiny_dataset)
    run = RunDirectory(cfg, root / "run")
    for stage in (Stage.PRETRAIN, Stage.DISENTANGLE, Stage.ADAPT):
        train(cfg, stage, dataset=tiny_dataset, run=run)
    return run
