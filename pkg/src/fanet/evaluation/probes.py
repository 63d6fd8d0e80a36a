"""Linear probes that measure what identity and non-identity features encode."""

from __future__ import annotations

from dataclasses import dataclass, replace
from logging import getLogger

import numpy as np
from numpy.typing import ArrayLike, NDArray
from sklearn.linear_model import LogisticRegression
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from fanet.datagen.render import POSE_RANGE
from fanet.exceptions import InputValidationError, ProtocolError

logger = getLogger(__name__)


@dataclass(frozen=True)
class ProbeResult:
    """Held-out accuracies of linear probes.

    Attributes:
        identity_f: Identity predicted from identity features.
        identity_z: Identity predicted from non-identity features.
        pose_z: Pose bucket predicted from non-identity features, when poses were given.
        identity_chance: Accuracy of guessing the identity uniformly.
        pose_chance: Accuracy of guessing the pose bucket uniformly.
    """

    identity_f: float
    identity_z: float
    identity_chance: float
    pose_z: float | None = None
    pose_chance: float | None = None

    @property
    def gap(self) -> float:
        return self.identity_f - self.identity_z


def alternate_split(labels: NDArray[np.int64]) -> tuple[NDArray[np.int64], NDArray[np.int64]]:
    """Send each identity's samples alternately to probe-train and probe-test.

    The two index sets are disjoint and both contain every identity that has at least
    two samples.

    >>> alternate_split(np.array([0, 0, 1, 1, 0]))
    (array([0, 2, 4]), array([1, 3]))
    """
    seen: dict[int, int] = {}
    train, test = [], []
    for index, label in enumerate(labels.tolist()):
        (train if seen.get(label, 0) % 2 == 0 else test).append(index)
        seen[label] = seen.get(label, 0) + 1
    return np.array(train, dtype=np.int64), np.array(test, dtype=np.int64)


def pose_buckets(poses: ArrayLike, n_buckets: int) -> NDArray[np.int64]:
    """Equal-width pose bins over the renderable pose range.

    >>> pose_buckets([-30.0, -15.0, 0.0, 15.0, 30.0], 3)
    array([0, 1, 1, 2, 2])
    """
    edges = np.linspace(*POSE_RANGE, n_buckets + 1)[1:-1]
    return np.digitize(np.asarray(poses, dtype=np.float64), edges).astype(np.int64)


def linear_probe(
    features: ArrayLike,
    targets: ArrayLike,
    train: NDArray[np.int64],
    test: NDArray[np.int64],
    *,
    seed: int = 0,
) -> float:
    """Held-out accuracy of a standardised logistic-regression probe."""
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets)
    if len(np.unique(y[train])) < 2:
        return float(np.mean(y[test] == y[train][0]))
    probe = make_pipeline(StandardScaler(), LogisticRegression(max_iter=2000, random_state=seed))
    probe.fit(x[train], y[train])
    return float(np.mean(probe.predict(x[test]) == y[test]))


def disentanglement_probe(
    features_f: ArrayLike,
    features_z: ArrayLike,
    identity_labels: ArrayLike,
    *,
    poses: ArrayLike | None = None,
    n_pose_buckets: int = 3,
    seed: int = 0,
) -> ProbeResult:
    """Probe identity from f and from z, and pose from z, on a per-identity split.

    Raises:
        ProtocolError: If an identity has fewer than two samples, so it could not
            appear on both sides of the split.
    """
    labels = np.asarray(identity_labels, dtype=np.int64)
    f = np.asarray(features_f, dtype=np.float64)
    z = np.asarray(features_z, dtype=np.float64)
    if not len(labels) == len(f) == len(z):
        raise InputValidationError(
            f"probe inputs differ in length: {len(labels)} labels, {len(f)} f, {len(z)} z"
        )
    identities, counts = np.unique(labels, return_counts=True)
    if len(identities) < 2 or counts.min() < 2:
        raise ProtocolError(
            "identity probes need at least two identities with two samples each",
            identities=len(identities),
        )
    train, test = alternate_split(labels)
    result = ProbeResult(
        identity_f=linear_probe(f, labels, train, test, seed=seed),
        identity_z=linear_probe(z, labels, train, test, seed=seed),
        identity_chance=1.0 / len(identities),
    )
    if poses is not None:
        buckets = pose_buckets(poses, n_pose_buckets)
        result = replace(
            result,
            pose_z=linear_probe(z, buckets, train, test, seed=seed),
            pose_chance=1.0 / len(np.unique(buckets)),
        )
    logger.debug("Probe accuracies: %s", result)
    return result
