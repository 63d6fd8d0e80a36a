from fanet.training.plans import apply_ablation, default_plans, finetune_plan, plan_for
from fanet.training.optim import OptimState, optimizer_step
from fanet.training.batches import BatchComposer
from fanet.training.runner import (
    MetricRecord,
    MetricsLog,
    StageResult,
    finetune,
    init_enc_l,
    prepare_store,
    run_stage,
)
from fanet.training.rundir import RunDirectory, RunLock, initial_store, train

__all__ = [
    "apply_ablation",
    "default_plans",
    "finetune_plan",
    "plan_for",
    "OptimState",
    "optimizer_step",
    "BatchComposer",
    "MetricRecord",
    "MetricsLog",
    "StageResult",
    "finetune",
    "init_enc_l",
    "prepare_store",
    "run_stage",
    "RunDirectory",
    "RunLock",
    "initial_store",
    "train",
]
