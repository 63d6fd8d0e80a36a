"""Run directories: layout, locking, stage prerequisites and the ``train`` entry point.

A run directory holds::

    config.json        the RunConfig the run was started with
    seed.json          the seeds every random stream derives from
    metrics.jsonl      one MetricRecord per loss term per step, one series per stage run
    stage1_1.ckpt  stage1_2.ckpt  stage2.ckpt  finetune.ckpt
    stage2-<ablation>.ckpt  finetune-<ablation>.ckpt
    <checkpoint stem>.json   the StageRecord of the stage run that wrote it
    reports/<protocol>.json

Ablations only change stage 2 and fine-tuning; an ablated fine-tuning run starts from
the stage-2 checkpoint of the same ablation.
"""

from __future__ import annotations

import os
from logging import getLogger
from pathlib import Path
from types import TracebackType

import numpy as np
from pydantic import BaseModel, ConfigDict

from fanet.config import Ablation, ModelName, RunConfig, Stage, StagePlan
from fanet.datagen.dataset import SampleSet
from fanet.datagen.manifest import MANIFEST_NAME, read_dataset
from fanet.exceptions import InputValidationError, PrerequisiteError
from fanet.nets.checkpoint import load_checkpoint, save_checkpoint
from fanet.nets.params import ParamStore, build_module, init_module, model_seed
from fanet.training.plans import ABLATED_STAGES, apply_ablation, plan_for, stage_ablation
from fanet.training.runner import MetricsLog, StageResult, finetune, init_enc_l, run_stage

logger = getLogger(__name__)

CHECKPOINT_NAMES: dict[Stage, str] = {
    Stage.PRETRAIN: "stage1_1.ckpt",
    Stage.DISENTANGLE: "stage1_2.ckpt",
    Stage.ADAPT: "stage2.ckpt",
    Stage.FINETUNE: "finetune.ckpt",
}

#: The stage whose checkpoint each stage starts from.
PREREQUISITES: dict[Stage, Stage] = {
    Stage.DISENTANGLE: Stage.PRETRAIN,
    Stage.ADAPT: Stage.DISENTANGLE,
    Stage.FINETUNE: Stage.ADAPT,
}

LOCK_NAME = ".lock"


def checkpoint_name(stage: Stage, ablation: Ablation | None = None) -> str:
    """
    >>> checkpoint_name(Stage.ADAPT), checkpoint_name(Stage.ADAPT, Ablation.NO_RSA)
    ('stage2.ckpt', 'stage2-no-rsa.ckpt')
    """
    name = CHECKPOINT_NAMES[stage]
    if ablation is None:
        return name
    stem, suffix = name.rsplit(".", 1)
    return f"{stem}-{ablation}.{suffix}"


class SeedRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int
    bank_seed: int
    eval_seed: int


class StageRecord(BaseModel):
    """How one checkpoint was trained."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    stage: Stage
    ablation: Ablation | None
    seed: int
    steps: int
    checkpoint: str


class RunLock:
    """Exclusive lock on a run directory, held by creating a lock file.

    Raises:
        PrerequisiteError: On entry, if another command holds the lock.
    """

    def __init__(self, directory: Path) -> None:
        self.path = directory / LOCK_NAME

    def __enter__(self) -> RunLock:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError as exc:
            raise PrerequisiteError(
                f"run directory {self.path.parent} is locked by another command "
                f"(remove {self.path} if that command is no longer running)",
                lock=str(self.path),
            ) from exc
        with os.fdopen(fd, "w") as handle:
            handle.write(f"{os.getpid()}\n")
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc: BaseException | None,
        tb: TracebackType | None,
    ) -> None:
        self.path.unlink(missing_ok=True)


class RunDirectory:
    def __init__(self, cfg: RunConfig, path: Path | None = None) -> None:
        self.cfg = cfg
        self.path = path if path is not None else cfg.paths.run_dir

    def checkpoint(self, stage: Stage, ablation: Ablation | None = None) -> Path:
        return self.path / checkpoint_name(stage, stage_ablation(stage, ablation))

    def stage_record_path(self, stage: Stage, ablation: Ablation | None = None) -> Path:
        return self.checkpoint(stage, ablation).with_suffix(".json")

    @property
    def metrics_path(self) -> Path:
        return self.path / "metrics.jsonl"

    @property
    def reports_dir(self) -> Path:
        return self.path / "reports"

    def lock(self) -> RunLock:
        return RunLock(self.path)

    def snapshot(self) -> None:
        """Record the config and seeds the run was started with."""
        self.path.mkdir(parents=True, exist_ok=True)
        (self.path / "config.json").write_text(self.cfg.model_dump_json(indent=2) + "\n")
        seeds = SeedRecord(
            seed=self.cfg.seed,
            bank_seed=self.cfg.dataset.bank_seed,
            eval_seed=self.cfg.evaluation.seed,
        )
        (self.path / "seed.json").write_text(seeds.model_dump_json(indent=2) + "\n")

    def record_stage(self, record: StageRecord) -> Path:
        path = self.stage_record_path(record.stage, record.ablation)
        path.write_text(record.model_dump_json(indent=2) + "\n")
        return path

    def stage_record(self, stage: Stage, ablation: Ablation | None = None) -> StageRecord:
        """Raises:
        PrerequisiteError: If no run of the stage has been recorded here.
        """
        path = self.stage_record_path(stage, ablation)
        if not path.exists():
            raise PrerequisiteError(f"no record of stage {stage} at {path}", path=str(path))
        return StageRecord.model_validate_json(path.read_text())

    def load(self, stage: Stage, ablation: Ablation | None = None) -> ParamStore:
        """The models saved at the end of ``stage``, run with ``ablation``.

        Raises:
            PrerequisiteError: If the stage has not been run in this directory.
            CheckpointError: If its checkpoint is unreadable or was written for another
                network configuration.
        """
        path = self.checkpoint(stage, ablation)
        if not path.exists():
            raise PrerequisiteError(
                f"stage {stage} has not been run: {path} is missing",
                stage=str(stage),
                path=str(path),
            )
        store, _ = load_checkpoint(path, self.cfg.net)
        return store

    def latest_checkpoint(self, ablation: Ablation | None = None) -> Path:
        """The checkpoint of the last stage run, among those run with ``ablation``."""
        stages = [stage for stage in Stage if ablation is None or stage in ABLATED_STAGES]
        for stage in reversed(stages):
            path = self.checkpoint(stage, ablation)
            if path.exists():
                return path
        variant = f" with ablation {ablation}" if ablation is not None else ""
        raise PrerequisiteError(
            f"no checkpoint{variant} in {self.path}; train a stage first",
            ablation=ablation,
        )


def stage_seed(seed: int, stage: Stage) -> int:
    return int(np.random.SeedSequence([seed, list(Stage).index(stage)]).generate_state(1)[0])


def initial_store(
    run: RunDirectory, plan: StagePlan, ablation: Ablation | None = None
) -> ParamStore:
    """The models a stage starts from: its prerequisite's checkpoint plus new models."""
    cfg = run.cfg
    if plan.stage is Stage.PRETRAIN:
        return ParamStore.init(cfg.net, plan.models, cfg.seed)
    store = run.load(PREREQUISITES[plan.stage], ablation)
    match plan.stage:
        case Stage.DISENTANGLE:
            for name in sorted(plan.models - set(store.names)):
                module = build_module(cfg.net, name)
                seeded = init_module(
                    module, model_seed(cfg.seed, name), leaky_slope=cfg.net.leaky_slope
                )
                store.add(name, seeded)
        case Stage.ADAPT:
            store = store.without([ModelName.FC])
            store = init_enc_l(store, cfg.training.enc_l_init, seed=cfg.seed)
    return store


def load_run_dataset(cfg: RunConfig) -> SampleSet:
    """The run's dataset directory, checked against the network input side.

    Raises:
        PrerequisiteError: If the dataset directory has not been generated.
    """
    root = cfg.paths.dataset_dir
    if not (root / MANIFEST_NAME).exists():
        raise PrerequisiteError(f"no dataset at {root}; run gen-data first", dataset_dir=str(root))
    dataset = read_dataset(root)
    sides = {sample.image.side for sample in dataset}
    if sides != {cfg.net.image_side}:
        raise InputValidationError(
            f"dataset images have sides {sorted(sides)}, the networks expect "
            f"{cfg.net.image_side}",
        )
    return dataset


def train(
    cfg: RunConfig,
    stage: Stage,
    *,
    ablation: Ablation | None = None,
    dataset: SampleSet | None = None,
    resume: bool = False,
    run: RunDirectory | None = None,
) -> StageResult:
    """Run one stage in the run directory and write its checkpoint.

    An ablated stage writes its own checkpoint next to the unablated one, and its
    metrics replace only those of its own earlier run. With ``resume`` an existing
    checkpoint for the stage is reused instead of retraining.
    """
    run = run or RunDirectory(cfg)
    if stage_ablation(stage, ablation) != ablation:
        logger.warning("Ablation %s does not change stage %s; ignoring it", ablation, stage)
        ablation = None
    plan = apply_ablation(plan_for(cfg, stage), ablation)
    with run.lock():
        run.snapshot()
        target = run.checkpoint(stage, ablation)
        if resume and target.exists():
            logger.info("Reusing %s", target)
            store, header = load_checkpoint(target, cfg.net)
            return StageResult(stage, store, header.step)
        store = initial_store(run, plan, ablation)
        data = dataset if dataset is not None else load_run_dataset(cfg)
        trainer = finetune if stage is Stage.FINETUNE else run_stage
        if ablation is not None:
            logger.info("Stage %s with ablation %s", stage, ablation)
        seed = stage_seed(cfg.seed, stage)
        with MetricsLog(run.metrics_path, stage=stage, ablation=ablation) as metrics:
            result = trainer(
                plan,
                store,
                data,
                degradation=cfg.degradation,
                training=cfg.training,
                seed=seed,
                metrics=metrics,
                snapshot_dir=run.path,
            )
        save_checkpoint(target, result.store, stage=stage, step=result.steps, ablation=ablation)
        run.record_stage(
            StageRecord(
                stage=stage,
                ablation=ablation,
                seed=seed,
                steps=result.steps,
                checkpoint=target.name,
            )
        )
        logger.info("Stage %s finished after %d steps: %s", stage, result.steps, target)
        return result
