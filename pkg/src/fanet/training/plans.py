"""Default stage plans and the command-line ablations applied to them."""

from __future__ import annotations

from decimal import ROUND_HALF_UP, Decimal

from fanet.config import (
    STAGE_MODELS,
    Ablation,
    DataMode,
    Degradation,
    LossWeights,
    RunConfig,
    Stage,
    StagePlan,
    TrainingConfig,
)

#: (learning rate, epochs, data mode) of each scheduled stage before rescaling.
_SCHEDULE: dict[Stage, tuple[float, int, DataMode]] = {
    Stage.PRETRAIN: (2e-4, 12, DataMode.HR_PLUS_LR),
    Stage.DISENTANGLE: (2e-4, 8, DataMode.HR_ONLY),
    Stage.ADAPT: (2e-5, 6, DataMode.MIXED),
}


def scale_epochs(epochs: int, multiplier: float) -> int:
    """Rescale an epoch count, rounding half up and never below one epoch.

    >>> [scale_epochs(e, 0.5) for e in (12, 8, 6)]
    [6, 4, 3]
    """
    scaled = Decimal(repr(epochs * multiplier)).quantize(Decimal(1), rounding=ROUND_HALF_UP)
    return max(1, int(scaled))


def _plan(stage: Stage, **fields: object) -> StagePlan:
    trainable, frozen = STAGE_MODELS[stage]
    return StagePlan.model_validate(
        {"stage": stage, "trainable": trainable, "frozen": frozen, **fields}
    )


def default_plans(training: TrainingConfig, weights: LossWeights) -> list[StagePlan]:
    """The three scheduled stages in order, with epochs scaled by the multiplier."""
    return [
        _plan(
            stage,
            epochs=scale_epochs(epochs, training.epoch_multiplier),
            learning_rate=learning_rate,
            batch_size=training.batch_size,
            weights=weights,
            data_mode=data_mode,
        )
        for stage, (learning_rate, epochs, data_mode) in _SCHEDULE.items()
    ]


def finetune_plan(training: TrainingConfig, weights: LossWeights) -> StagePlan:
    """A fixed number of low-learning-rate steps on mixed paired and unpaired batches."""
    return _plan(
        Stage.FINETUNE,
        epochs=0,
        iterations=training.finetune_iterations,
        learning_rate=training.finetune_learning_rate,
        batch_size=training.batch_size,
        weights=weights,
        data_mode=DataMode.MIXED,
    )


def plan_for(cfg: RunConfig, stage: Stage) -> StagePlan:
    """The configured plan for ``stage``, falling back to the defaults."""
    for plan in cfg.plans:
        if plan.stage is stage:
            return plan
    if stage is Stage.FINETUNE:
        return finetune_plan(cfg.training, cfg.weights)
    return next(plan for plan in default_plans(cfg.training, cfg.weights) if plan.stage is stage)


ABLATED_STAGES = frozenset({Stage.ADAPT, Stage.FINETUNE})


def stage_ablation(stage: Stage, ablation: Ablation | None) -> Ablation | None:
    """The ablation that actually changes ``stage``; earlier stages run unablated."""
    return ablation if stage in ABLATED_STAGES else None


def apply_ablation(plan: StagePlan, ablation: Ablation | None) -> StagePlan:
    """Rewrite a stage-2 or fine-tuning plan for one ablation; other stages pass through."""
    if stage_ablation(plan.stage, ablation) is None:
        return plan
    match ablation:
        case Ablation.NO_RSA:
            update: dict[str, object] = {"degradation": Degradation.FIXED}
        case Ablation.NO_DEC:
            update = {
                "weights": plan.weights.model_copy(
                    update={"lambda_enc_dec": 0.0, "lambda_id": 0.0, "lambda_gan": 0.0}
                )
            }
        case Ablation.PAIRED_ONLY:
            update = {"data_mode": DataMode.PAIRED}
        case Ablation.UNPAIRED_ONLY:
            update = {"data_mode": DataMode.UNPAIRED}
        case Ablation.MIXED:
            update = {"data_mode": DataMode.MIXED}
    return StagePlan.model_validate({**plan.model_dump(), **update})
