"""Rendering the full desk dataset and querying it by split and identity."""

from __future__ import annotations

import itertools
from collections.abc import Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from logging import getLogger

import numpy as np
from numpy.typing import NDArray

from fanet.config import DatasetConfig, Split
from fanet.datagen.images import stack_pixels
from fanet.datagen.render import IdentityBank, Sample, render_sample
from fanet.exceptions import InputValidationError

logger = getLogger(__name__)


@dataclass(frozen=True, slots=True)
class _RenderJob:
    identity_id: int
    pose: float
    illumination: float
    occlusion: bool
    split: Split
    rng_seed: int


class SampleSet(Sequence[Sample]):
    """An ordered, immutable collection of samples."""

    def __init__(self, samples: Sequence[Sample]) -> None:
        self._samples = tuple(samples)

    def __len__(self) -> int:
        return len(self._samples)

    def __getitem__(self, index):  # type: ignore[override]
        if isinstance(index, slice):
            return SampleSet(self._samples[index])
        return self._samples[index]

    def __iter__(self) -> Iterator[Sample]:
        return iter(self._samples)

    def split(self, split: Split) -> SampleSet:
        return SampleSet([sample for sample in self._samples if sample.split is split])

    def where(self, **factors: object) -> SampleSet:
        """Samples whose attributes equal every given factor value."""
        return SampleSet(
            [
                sample
                for sample in self._samples
                if all(getattr(sample, name) == value for name, value in factors.items())
            ]
        )

    @cached_property
    def identities(self) -> tuple[int, ...]:
        return tuple(sorted({sample.identity_id for sample in self._samples}))

    @cached_property
    def labels(self) -> NDArray[np.int64]:
        return np.array([sample.identity_id for sample in self._samples], dtype=np.int64)

    @cached_property
    def by_identity(self) -> dict[int, tuple[int, ...]]:
        """Indices of each identity's samples, in dataset order."""
        groups: dict[int, list[int]] = {}
        for index, sample in enumerate(self._samples):
            groups.setdefault(sample.identity_id, []).append(index)
        return {identity: tuple(indices) for identity, indices in groups.items()}

    def pixels(self) -> NDArray[np.float32]:
        return stack_pixels([sample.image for sample in self._samples])


def sample_seed(bank_seed: int, identity_id: int, grid_index: int) -> int:
    """Per-sample seed derived only from its position in the dataset grid."""
    return int(np.random.SeedSequence([bank_seed, identity_id, grid_index]).generate_state(1)[0])


def make_bank(cfg: DatasetConfig, side: int) -> IdentityBank:
    return IdentityBank(cfg.n_identities, side, cfg.bank_seed)


def generate_dataset(cfg: DatasetConfig, side: int) -> SampleSet:
    """Render every identity under every factor combination.

    Identities ``[0, n_train_identities)`` form the train split and the remaining
    ones the eval split, so the two never share an identity. Rendering runs in worker
    threads but the returned order is fixed by the grid.
    """
    bank = make_bank(cfg, side)
    grid = list(itertools.product(cfg.poses, cfg.illuminations, cfg.occlusions))
    jobs = [
        _RenderJob(
            identity_id=identity_id,
            pose=pose,
            illumination=illumination,
            occlusion=occlusion,
            split=Split.TRAIN if identity_id < cfg.n_train_identities else Split.EVAL,
            rng_seed=sample_seed(cfg.bank_seed, identity_id, grid_index),
        )
        for identity_id in range(cfg.n_identities)
        for grid_index, (pose, illumination, occlusion) in enumerate(grid)
    ]

    def render(job: _RenderJob) -> Sample:
        return render_sample(
            bank,
            job.identity_id,
            pose=job.pose,
            illumination=job.illumination,
            occlusion=job.occlusion,
            rng_seed=job.rng_seed,
            split=job.split,
        )

    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        samples = list(pool.map(render, jobs))
    logger.info(
        "Rendered %d samples for %d identities (%d per identity)",
        len(samples),
        cfg.n_identities,
        len(grid),
    )
    dataset = SampleSet(samples)
    check_split_disjoint(dataset)
    return dataset


def check_split_disjoint(dataset: SampleSet) -> None:
    """Ensure no identity appears in both the train and eval splits.

    Raises:
        InputValidationError: If some identity is shared.
    """
    shared = set(dataset.split(Split.TRAIN).identities) & set(dataset.split(Split.EVAL).identities)
    if shared:
        raise InputValidationError(
            f"identities present in both splits: {sorted(shared)}", shared=sorted(shared)
        )
