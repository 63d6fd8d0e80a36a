"""Balanced verification pair lists over the eval split."""

from __future__ import annotations

import numpy as np
from pydantic import BaseModel, ConfigDict

from fanet.config import Split
from fanet.datagen.dataset import SampleSet
from fanet.exceptions import ProtocolError


class PairRecord(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    a: int
    b: int
    same_identity: bool


class PairList(BaseModel):
    """Index pairs into an eval :class:`SampleSet`, alternating genuine and impostor.

    Attributes:
        degradation: How each side is degraded before matching, as ``(side_a, side_b)``.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    pairs: tuple[PairRecord, ...]
    degradation: tuple[str, str] = ("none", "none")

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def same(self) -> np.ndarray:
        return np.array([pair.same_identity for pair in self.pairs], dtype=bool)

    def with_degradation(self, side_a: str, side_b: str) -> PairList:
        return self.model_copy(update={"degradation": (side_a, side_b)})


def build_pairs(dataset: SampleSet, n_pairs: int, seed: int) -> PairList:
    """Draw ``n_pairs`` pairs, even positions genuine and odd positions impostor.

    Raises:
        ProtocolError: If ``dataset`` holds training samples, or cannot supply both a
            genuine and an impostor pair.
    """
    if any(sample.split is not Split.EVAL for sample in dataset):
        raise ProtocolError("verification pairs are drawn from eval identities only")
    groups = dataset.by_identity
    identities = sorted(groups)
    repeated = [identity for identity in identities if len(groups[identity]) >= 2]
    if len(identities) < 2 or not repeated:
        raise ProtocolError(
            "verification needs two identities and an identity with two samples",
            identities=len(identities),
        )
    rng = np.random.default_rng([seed, len(dataset)])
    pairs = []
    for position in range(n_pairs):
        if position % 2 == 0:
            identity = repeated[int(rng.integers(len(repeated)))]
            a, b = rng.choice(groups[identity], size=2, replace=False)
        else:
            first, second = rng.choice(identities, size=2, replace=False)
            a = rng.choice(groups[int(first)])
            b = rng.choice(groups[int(second)])
        pairs.append(PairRecord(a=int(a), b=int(b), same_identity=position % 2 == 0))
    return PairList(pairs=tuple(pairs))
