"""Seed-derived batch composition for every data mode.

The order of samples and every random degradation draw derive from
``(seed, stage, epoch)`` and ``(seed, stage, step, position)`` respectively, so
batches are identical whatever the worker count or scheduling.
"""

from __future__ import annotations

import math
from collections.abc import Iterator
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import torch

from fanet.config import DataMode, Degradation, DegradationConfig, Split, Stage, StagePlan
from fanet.datagen.dataset import SampleSet
from fanet.datagen.degrade import (
    fixed_degrade,
    rsa_degrade,
    unpaired_degrade,
    unpaired_fixed_degrade,
)
from fanet.datagen.images import Image, stack_pixels
from fanet.exceptions import InputValidationError
from fanet.objectives.stage import StageBatch


@dataclass(frozen=True, slots=True)
class _Composed:
    x_h: Image
    x_l: Image | None
    label: int


class BatchComposer:
    """Produces the :class:`StageBatch` sequence for one stage plan."""

    def __init__(
        self,
        dataset: SampleSet,
        plan: StagePlan,
        degradation: DegradationConfig,
        seed: int,
        *,
        workers: int = 1,
    ) -> None:
        self.dataset = dataset.split(Split.TRAIN)
        if not len(self.dataset):
            raise InputValidationError("the dataset has no training samples")
        self.plan = plan
        self.degradation = degradation
        self.seed = seed
        self.workers = workers
        self._stage_code = list(Stage).index(plan.stage)

    @property
    def steps_per_epoch(self) -> int:
        return math.ceil(len(self.dataset) / self.plan.batch_size)

    @property
    def total_steps(self) -> int:
        if self.plan.iterations is not None:
            return self.plan.iterations
        return self.plan.epochs * self.steps_per_epoch

    def _order(self, epoch: int) -> np.ndarray:
        rng = np.random.default_rng([self.seed, self._stage_code, epoch])
        return rng.permutation(len(self.dataset))

    def _index_batches(self) -> Iterator[np.ndarray]:
        epoch = 0
        while True:
            order = self._order(epoch)
            for start in range(0, len(order), self.plan.batch_size):
                yield order[start : start + self.plan.batch_size]
            epoch += 1

    def _degrade(self, img: Image, rng: np.random.Generator) -> Image:
        if self.plan.degradation is Degradation.FIXED:
            return fixed_degrade(img, self.degradation.fixed_factor)
        degraded, _ = rsa_degrade(img, self.degradation, rng)
        return degraded

    def _unpaired(self, index: int, rng: np.random.Generator) -> Image:
        sample = self.dataset[index]
        siblings = [i for i in self.dataset.by_identity[sample.identity_id] if i != index]
        source = self.dataset[int(rng.choice(siblings))] if siblings else sample
        if self.plan.degradation is Degradation.FIXED:
            return unpaired_fixed_degrade(source.image, self.degradation, rng)
        return unpaired_degrade(source.image, self.degradation, rng)

    def compose(self, step: int, position: int, index: int) -> _Composed:
        sample = self.dataset[index]
        rng = np.random.default_rng([self.seed, self._stage_code, step, position])
        mode = self.plan.data_mode
        if mode is DataMode.MIXED:
            mode = DataMode.PAIRED if rng.random() < 0.5 else DataMode.UNPAIRED
        match mode:
            case DataMode.HR_ONLY:
                x_l = None
            case DataMode.HR_PLUS_LR | DataMode.PAIRED:
                x_l = self._degrade(sample.image, rng)
            case _:
                x_l = self._unpaired(index, rng)
        return _Composed(sample.image, x_l, sample.identity_id)

    def batches(self) -> Iterator[StageBatch]:
        """Yield exactly :attr:`total_steps` batches."""
        if self.total_steps == 0:
            return
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            for step, indices in enumerate(self._index_batches()):
                if step >= self.total_steps:
                    return
                jobs = [(step, position, int(index)) for position, index in enumerate(indices)]
                composed = list(pool.map(lambda job: self.compose(*job), jobs))
                yield to_batch(composed)


def to_batch(composed: list[_Composed]) -> StageBatch:
    x_h = torch.from_numpy(stack_pixels([item.x_h for item in composed]))
    labels = torch.tensor([item.label for item in composed], dtype=torch.int64)
    lows = [item.x_l for item in composed]
    x_l = None
    if all(low is not None for low in lows):
        x_l = torch.from_numpy(stack_pixels([low for low in lows if low is not None]))
    return StageBatch(x_h=x_h, labels=labels, x_l=x_l)
