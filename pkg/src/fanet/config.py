"""Configuration models shared by every fanet subpackage.

Each model is an immutable pydantic model that validates its own invariants on
construction, so a config that exists is a config that can be used. ``RunConfig``
aggregates everything a command needs and round-trips through a single JSON file.
"""

from __future__ import annotations

import os
from enum import StrEnum
from pathlib import Path
from typing import Annotated, Self

from pydantic import BaseModel, ConfigDict, Field, model_validator

#: Environment variable that overrides ``PathsConfig.run_root``.
RUN_ROOT_ENV = "FANET_RUN_ROOT"

_FROZEN = ConfigDict(frozen=True, extra="forbid")

NonNegative = Annotated[float, Field(ge=0.0, allow_inf_nan=False)]
Positive = Annotated[float, Field(gt=0.0, allow_inf_nan=False)]
UnitInterval = Annotated[float, Field(ge=0.0, lt=1.0)]


class Stage(StrEnum):
    """Training stages, in the order they must run."""

    PRETRAIN = "1_1"
    DISENTANGLE = "1_2"
    ADAPT = "2"
    FINETUNE = "finetune"


class DataMode(StrEnum):
    HR_PLUS_LR = "hr_plus_lr"
    HR_ONLY = "hr_only"
    PAIRED = "paired"
    UNPAIRED = "unpaired"
    MIXED = "mixed"


class Degradation(StrEnum):
    """How low-resolution training inputs are produced from high-resolution ones."""

    RSA = "rsa"
    FIXED = "fixed"


class EncLInit(StrEnum):
    """Where the low-resolution encoder starts from at stage 2."""

    ENC_H_COPY = "enc_h_copy"
    RANDOM = "random"


class Ablation(StrEnum):
    """Stage-2 variants selectable from the command line."""

    NO_RSA = "no-rsa"
    NO_DEC = "no-dec"
    PAIRED_ONLY = "paired-only"
    UNPAIRED_ONLY = "unpaired-only"
    MIXED = "mixed"


class Split(StrEnum):
    TRAIN = "train"
    EVAL = "eval"


class ModelName(StrEnum):
    ENC_H = "enc_h"
    ENC_L = "enc_l"
    ENC_Z = "enc_z"
    DEC = "dec"
    DIS = "dis"
    FC = "fc"


#: Trainable and frozen model sets per stage.
STAGE_MODELS: dict[Stage, tuple[frozenset[ModelName], frozenset[ModelName]]] = {
    Stage.PRETRAIN: (frozenset({ModelName.ENC_H}), frozenset()),
    Stage.DISENTANGLE: (
        frozenset({ModelName.ENC_Z, ModelName.FC, ModelName.DEC, ModelName.DIS}),
        frozenset({ModelName.ENC_H}),
    ),
    Stage.ADAPT: (
        frozenset({ModelName.ENC_L}),
        frozenset({ModelName.ENC_H, ModelName.ENC_Z, ModelName.DEC, ModelName.DIS}),
    ),
    Stage.FINETUNE: (
        frozenset({ModelName.ENC_L}),
        frozenset({ModelName.ENC_H, ModelName.ENC_Z, ModelName.DEC, ModelName.DIS}),
    ),
}


class UnpairedJitter(BaseModel):
    """Nuisance applied before random down-sampling to break pixel correspondence."""

    model_config = _FROZEN

    max_shift_px: Annotated[int, Field(ge=0)] = 2
    blur_sigma_range: tuple[NonNegative, NonNegative] = (0.5, 1.2)
    noise_std: NonNegative = 0.03

    @model_validator(mode="after")
    def _ordered_sigma(self) -> Self:
        low, high = self.blur_sigma_range
        if low > high:
            raise ValueError(f"blur_sigma_range must be ordered, got {self.blur_sigma_range}")
        return self


class DegradationConfig(BaseModel):
    model_config = _FROZEN

    n_low: Annotated[int, Field(ge=1)] = 8
    n_high: Annotated[int, Field(ge=2)] = 32
    fixed_factor: Annotated[int, Field(ge=1)] = 4
    unpaired_jitter: UnpairedJitter = UnpairedJitter()

    @model_validator(mode="after")
    def _check_resolutions(self) -> Self:
        if not self.n_low < self.n_high:
            raise ValueError(f"n_low ({self.n_low}) must be below n_high ({self.n_high})")
        if self.n_high % self.fixed_factor:
            raise ValueError(
                f"fixed_factor ({self.fixed_factor}) must divide n_high ({self.n_high})"
            )
        return self


class NetConfig(BaseModel):
    """Architecture of the five networks and the identity classifier.

    ``conv_widths`` gives one stride-2 block per entry, so ``image_side`` must be
    divisible by ``2 ** len(conv_widths)``.
    """

    model_config = _FROZEN

    image_side: Annotated[int, Field(ge=2)] = 32
    channels: Annotated[int, Field(ge=1)] = 1
    d_f: Annotated[int, Field(gt=0)] = 64
    d_z: Annotated[int, Field(gt=0)] = 16
    n_identities: Annotated[int, Field(ge=2)] = 20
    conv_widths: tuple[Annotated[int, Field(ge=1)], ...] = (16, 32, 64, 64)
    leaky_slope: NonNegative = 0.2

    @model_validator(mode="after")
    def _check_side(self) -> Self:
        if not self.conv_widths:
            raise ValueError("conv_widths needs at least one block")
        if self.image_side % (2 ** len(self.conv_widths)):
            raise ValueError(
                f"image_side ({self.image_side}) must be divisible by "
                f"2**{len(self.conv_widths)} for {len(self.conv_widths)} blocks"
            )
        return self

    @property
    def base_side(self) -> int:
        """Spatial side of the innermost feature map."""
        return self.image_side // 2 ** len(self.conv_widths)


class LossWeights(BaseModel):
    """Weights of every loss term; ``margin_m``/``lambda_m`` shape the pretraining penalty."""

    model_config = _FROZEN

    lambda_dec: NonNegative = 1.0
    lambda_id: NonNegative = 0.1
    lambda_gan: NonNegative = 0.01
    lambda_z: NonNegative = 0.1
    lambda_enc: NonNegative = 1.0
    lambda_enc_dec: NonNegative = 1.0
    lambda_m: NonNegative = 0.01
    margin_m: Positive = 10.0


class StagePlan(BaseModel):
    """Everything one training stage needs besides models and data.

    ``iterations``, when set, fixes the exact number of optimizer steps and takes
    precedence over ``epochs``.
    """

    model_config = _FROZEN

    stage: Stage
    trainable: frozenset[ModelName]
    frozen: frozenset[ModelName]
    epochs: Annotated[int, Field(ge=0)]
    learning_rate: Positive
    batch_size: Annotated[int, Field(ge=1)] = 32
    weights: LossWeights = LossWeights()
    data_mode: DataMode
    degradation: Degradation = Degradation.RSA
    iterations: Annotated[int, Field(ge=0)] | None = None

    @model_validator(mode="after")
    def _check_model_sets(self) -> Self:
        overlap = self.trainable & self.frozen
        if overlap:
            raise ValueError(f"models both trainable and frozen: {sorted(overlap)}")
        expected_trainable, expected_frozen = STAGE_MODELS[self.stage]
        if self.trainable != expected_trainable or self.frozen != expected_frozen:
            raise ValueError(
                f"stage {self.stage} trains {sorted(expected_trainable)} with "
                f"{sorted(expected_frozen)} frozen, got trainable={sorted(self.trainable)} "
                f"frozen={sorted(self.frozen)}"
            )
        return self

    @property
    def models(self) -> frozenset[ModelName]:
        return self.trainable | self.frozen


class DatasetConfig(BaseModel):
    """Synthetic identity dataset: identities times the per-identity factor grid."""

    model_config = _FROZEN

    n_train_identities: Annotated[int, Field(ge=2)] = 20
    n_eval_identities: Annotated[int, Field(ge=2)] = 10
    poses: tuple[Annotated[float, Field(ge=-45.0, le=45.0)], ...] = (-30.0, -15.0, 0.0, 15.0, 30.0)
    illuminations: tuple[Annotated[float, Field(ge=0.5, le=1.5)], ...] = (0.7, 1.0, 1.3)
    occlusions: tuple[bool, ...] = (False, True)
    bank_seed: int = 1234
    workers: Annotated[int, Field(ge=1)] = 4

    @property
    def n_identities(self) -> int:
        return self.n_train_identities + self.n_eval_identities


class TrainingConfig(BaseModel):
    model_config = _FROZEN

    epoch_multiplier: Positive = 1.0
    batch_size: Annotated[int, Field(ge=1)] = 32
    betas: tuple[UnitInterval, UnitInterval] = (0.5, 0.999)
    eps: Positive = 1e-8
    finetune_iterations: Annotated[int, Field(ge=0)] = 1000
    finetune_learning_rate: Positive = 1e-5
    enc_l_init: EncLInit = EncLInit.ENC_H_COPY
    workers: Annotated[int, Field(ge=1)] = 2


class PathsConfig(BaseModel):
    model_config = _FROZEN

    dataset_dir: Path = Path("data/desk")
    run_root: Path = Path("runs")
    run_name: str = "default"

    @property
    def run_dir(self) -> Path:
        root = os.environ.get(RUN_ROOT_ENV)
        return (Path(root) if root else self.run_root) / self.run_name


class EvalConfig(BaseModel):
    model_config = _FROZEN

    folds: Annotated[int, Field(ge=2)] = 10
    far_levels: tuple[Annotated[float, Field(gt=0.0, le=1.0)], ...] = (0.3, 0.1, 0.01, 0.001)
    resolution_buckets: tuple[tuple[int, int], ...] = ((8, 12), (13, 20), (21, 32))
    pose_buckets: Annotated[int, Field(ge=2)] = 3
    seed: int = 2024
    n_pairs: Annotated[int, Field(ge=4)] = 300
    gallery_pose: float = 0.0
    batch_size: Annotated[int, Field(ge=1)] = 64
    dump_grids: bool = False

    @model_validator(mode="after")
    def _check_folds(self) -> Self:
        if self.n_pairs < 2 * self.folds:
            raise ValueError(
                f"n_pairs ({self.n_pairs}) must give at least 2 pairs to each of {self.folds} folds"
            )
        return self


class RunConfig(BaseModel):
    """A complete, reproducible run description."""

    model_config = _FROZEN

    seed: int = 0
    net: NetConfig = NetConfig()
    degradation: DegradationConfig = DegradationConfig()
    dataset: DatasetConfig = DatasetConfig()
    training: TrainingConfig = TrainingConfig()
    weights: LossWeights = LossWeights()
    plans: tuple[StagePlan, ...] = ()
    paths: PathsConfig = PathsConfig()
    evaluation: EvalConfig = EvalConfig()

    @model_validator(mode="after")
    def _check_consistency(self) -> Self:
        if self.net.n_identities != self.dataset.n_train_identities:
            raise ValueError(
                f"net.n_identities ({self.net.n_identities}) must equal the number of "
                f"training identities ({self.dataset.n_train_identities})"
            )
        if self.net.image_side != self.degradation.n_high:
            raise ValueError(
                f"net.image_side ({self.net.image_side}) must equal degradation.n_high "
                f"({self.degradation.n_high})"
            )
        stages = [plan.stage for plan in self.plans]
        if len(stages) != len(set(stages)):
            raise ValueError(f"duplicate stage plans: {stages}")
        return self
