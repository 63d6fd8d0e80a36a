"""Stage execution: optimizer groups, update order, metrics and divergence handling."""

from __future__ import annotations

import copy
from collections.abc import Callable
from dataclasses import dataclass
from logging import getLogger
from pathlib import Path
from types import TracebackType

import torch
from pydantic import BaseModel, ConfigDict

from fanet.config import (
    Ablation,
    DegradationConfig,
    EncLInit,
    LossWeights,
    ModelName,
    Stage,
    StagePlan,
    TrainingConfig,
)
from fanet.datagen.dataset import SampleSet
from fanet.exceptions import DivergenceError, InputValidationError
from fanet.nets.checkpoint import save_checkpoint
from fanet.nets.params import ParamStore, build_module, init_module, model_seed
from fanet.objectives.stage import (
    StageBatch,
    StageLoss,
    classifier_loss,
    discriminator_loss,
    stage_loss,
)
from fanet.training.batches import BatchComposer
from fanet.training.optim import OptimState, optimizer_step

logger = getLogger(__name__)


class MetricRecord(BaseModel):
    """One loss term at one step; ``term == "total"`` carries the weighted sum."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    step: int
    stage: Stage
    group: str
    term: str
    weight: float
    value: float | None
    ablation: Ablation | None = None


class MetricsLog:
    """Appends :class:`MetricRecord` lines to a JSONL file and keeps them in memory.

    With ``stage`` given, the lines an earlier run of that stage and ablation left in the
    file are dropped on entry, so the file holds one series per stage run.
    """

    def __init__(
        self,
        path: Path | None = None,
        *,
        stage: Stage | None = None,
        ablation: Ablation | None = None,
    ) -> None:
        self.path = path
        self.stage = stage
        self.ablation = ablation
        self.records: list[MetricRecord] = []
        self._handle = None

    def __enter__(self) -> MetricsLog:
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            if self.stage is not None and self.path.exists():
                self._drop_earlier_run(self.path)
            self._handle = self.path.open("a")
        return self

    def _drop_earlier_run(self, path: Path) -> None:
        kept = [
            line
            for line in path.read_text().splitlines()
            if not self._same_run(MetricRecord.model_validate_json(line))
        ]
        path.write_text("".join(line + "\n" for line in kept))

    def _same_run(self, record: MetricRecord) -> bool:
        return record.stage is self.stage and record.ablation is self.ablation

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc: BaseException | None,
        tb: TracebackType | None,
    ) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None

    def record(self, stage: Stage, step: int, group: str, loss: StageLoss) -> None:
        rows = [
            MetricRecord(
                step=step,
                stage=stage,
                group=group,
                term=term.name,
                weight=term.weight,
                value=_finite_or_none(float(term.value.detach())),
                ablation=self.ablation,
            )
            for term in loss.terms
        ]
        rows.append(
            MetricRecord(
                step=step,
                stage=stage,
                group=group,
                term="total",
                weight=1.0,
                value=_finite_or_none(float(loss.total.detach())),
                ablation=self.ablation,
            )
        )
        self.records.extend(rows)
        if self._handle is not None:
            self._handle.writelines(row.model_dump_json() + "\n" for row in rows)

    def series(self, term: str, group: str = "generator") -> list[float | None]:
        return [row.value for row in self.records if row.term == term and row.group == group]


def _finite_or_none(value: float) -> float | None:
    return value if torch.isfinite(torch.tensor(value)) else None


@dataclass(frozen=True)
class StageResult:
    stage: Stage
    store: ParamStore
    steps: int


@dataclass(frozen=True)
class _Group:
    name: str
    models: frozenset[ModelName]
    objective: Callable[[StageBatch], StageLoss]


def _groups(plan: StagePlan, store: ParamStore) -> list[_Group]:
    weights: LossWeights = plan.weights
    generator = _Group(
        "generator",
        plan.trainable - {ModelName.DIS, ModelName.FC},
        lambda batch: stage_loss(plan.stage, batch, store, weights),
    )
    if plan.stage is not Stage.DISENTANGLE:
        return [generator]
    # Adversaries step before the generator on every batch.
    return [
        _Group("discriminator", frozenset({ModelName.DIS}), lambda b: discriminator_loss(b, store)),
        _Group("classifier", frozenset({ModelName.FC}), lambda b: classifier_loss(b, store)),
        generator,
    ]


def prepare_store(plan: StagePlan, store: ParamStore) -> ParamStore:
    """Restrict ``store`` to the plan's models and set their trainable flags."""
    store.require(*plan.models)
    extra = set(store.names) - plan.models
    if extra:
        logger.info("Stage %s does not use %s; dropping them", plan.stage, sorted(extra))
        store = store.without(extra)
    store.freeze(plan.frozen)
    store.unfreeze(plan.trainable)
    return store


class DivergenceRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    stage: Stage
    step: int
    group: str
    terms: dict[str, float | None]


def _diverge(
    plan: StagePlan,
    store: ParamStore,
    step: int,
    group: str,
    loss: StageLoss,
    snapshot_dir: Path | None,
) -> DivergenceError:
    terms = {name: _finite_or_none(value) for name, value in loss.breakdown().items()}
    snapshot = None
    if snapshot_dir is not None:
        snapshot = snapshot_dir / f"diverged-{plan.stage}.ckpt"
        save_checkpoint(snapshot, store, stage=plan.stage, step=step)
        record = DivergenceRecord(stage=plan.stage, step=step, group=group, terms=terms)
        snapshot.with_suffix(".json").write_text(record.model_dump_json(indent=2) + "\n")
    logger.error("Non-finite %s loss at stage %s step %d: %s", group, plan.stage, step, terms)
    return DivergenceError(
        f"non-finite {group} loss at stage {plan.stage}, step {step}",
        snapshot=snapshot,
        stage=str(plan.stage),
        step=step,
        terms=terms,
    )


def run_stage(
    plan: StagePlan,
    store: ParamStore,
    dataset: SampleSet,
    *,
    degradation: DegradationConfig,
    training: TrainingConfig,
    seed: int,
    metrics: MetricsLog | None = None,
    snapshot_dir: Path | None = None,
) -> StageResult:
    """Train the plan's trainable models for the plan's number of steps.

    Stage 1.2 updates the discriminator, then the identity classifier, then the
    generator side at every step; other stages have the single generator-side update.
    A non-finite loss stops training before any parameter is touched by it, dumps
    the last good parameters when ``snapshot_dir`` is given, and raises.

    Raises:
        PrerequisiteError: If a model the plan names is missing from ``store``.
        DivergenceError: On a non-finite loss.
    """
    torch.use_deterministic_algorithms(True)
    store = prepare_store(plan, store)
    composer = BatchComposer(dataset, plan, degradation, seed, workers=training.workers)
    groups = _groups(plan, store)
    optimizers = {
        group.name: OptimState.for_models(store, group.models, training, plan.learning_rate)
        for group in groups
    }
    total = composer.total_steps
    logger.info(
        "Stage %s: %d steps (%d per epoch), batch %d, lr %g, %s data",
        plan.stage,
        total,
        composer.steps_per_epoch,
        plan.batch_size,
        plan.learning_rate,
        plan.data_mode,
    )

    for step, batch in enumerate(composer.batches()):
        for group in groups:
            store.zero_grad()
            loss = group.objective(batch)
            if metrics is not None:
                metrics.record(plan.stage, step, group.name, loss)
            if not loss.is_finite():
                raise _diverge(plan, store, step, group.name, loss, snapshot_dir)
            if not loss.requires_backward:
                continue
            loss.total.backward()
            optimizer_step(optimizers[group.name], plan.learning_rate)
        if (step + 1) % composer.steps_per_epoch == 0:
            logger.info("Stage %s step %d/%d: %s", plan.stage, step + 1, total, loss.breakdown())
    store.zero_grad()
    return StageResult(plan.stage, store, total)


def finetune(
    plan: StagePlan,
    store: ParamStore,
    dataset: SampleSet,
    *,
    degradation: DegradationConfig,
    training: TrainingConfig,
    seed: int,
    metrics: MetricsLog | None = None,
    snapshot_dir: Path | None = None,
) -> StageResult:
    """Exactly ``plan.iterations`` steps of Enc_L on mixed paired and unpaired batches."""
    if plan.stage is not Stage.FINETUNE or plan.iterations is None:
        raise InputValidationError("finetune needs a fine-tuning plan with a fixed iteration count")
    return run_stage(
        plan,
        store,
        dataset,
        degradation=degradation,
        training=training,
        seed=seed,
        metrics=metrics,
        snapshot_dir=snapshot_dir,
    )


def init_enc_l(store: ParamStore, mode: EncLInit, *, seed: int) -> ParamStore:
    """Add Enc_L to ``store``, copied from the trained Enc_H or freshly initialised."""
    if mode is EncLInit.ENC_H_COPY:
        store.require(ModelName.ENC_H)
        module = copy.deepcopy(store[ModelName.ENC_H])
    else:
        module = init_module(
            build_module(store.cfg, ModelName.ENC_L),
            model_seed(seed, ModelName.ENC_L),
            leaky_slope=store.cfg.leaky_slope,
        )
    for parameter in module.parameters():
        parameter.requires_grad_(True)
    return store.add(ModelName.ENC_L, module)
