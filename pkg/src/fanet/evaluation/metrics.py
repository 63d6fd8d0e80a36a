"""Matching metrics: verification, TAR@FAR/AUC, rank-1 identification and PSNR.

All matching uses cosine distance between features. Verification thresholds are
chosen from the training folds' distances alone and applied unchanged to the
held-out fold.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from sklearn.metrics import auc, roc_curve
from sklearn.model_selection import KFold

from fanet.exceptions import InputValidationError, ProtocolError

#: PSNR reported for identical images.
PSNR_CAP = 99.0


def unit_rows(features: ArrayLike) -> NDArray[np.float64]:
    """Scale every row to unit L2 norm; all-zero rows stay zero."""
    array = np.asarray(features, dtype=np.float64)
    if array.ndim != 2:
        raise InputValidationError(f"expected a 2-D feature matrix, got shape {array.shape}")
    norms = np.linalg.norm(array, axis=1, keepdims=True)
    return np.divide(array, norms, out=np.zeros_like(array), where=norms > 0)


def cosine_distances(a: ArrayLike, b: ArrayLike) -> NDArray[np.float64]:
    """Pairwise ``1 - cos`` between the rows of ``a`` and ``b``.

    >>> cosine_distances([[1.0, 0.0]], [[2.0, 0.0], [0.0, 3.0], [-1.0, 0.0]])
    array([[0., 1., 2.]])
    """
    return 1.0 - unit_rows(a) @ unit_rows(b).T


def pair_distances(features_a: ArrayLike, features_b: ArrayLike) -> NDArray[np.float64]:
    """Cosine distance between row ``i`` of ``features_a`` and row ``i`` of ``features_b``."""
    a, b = unit_rows(features_a), unit_rows(features_b)
    if a.shape != b.shape:
        raise InputValidationError(f"pair sides differ in shape: {a.shape} and {b.shape}")
    return 1.0 - np.einsum("ij,ij->i", a, b)


@dataclass(frozen=True)
class VerificationResult:
    """Fold-averaged accuracy and the ROC of the pooled pair distances.

    Attributes:
        fold_accuracies: Held-out accuracy of each fold.
        thresholds: Distance threshold chosen on each fold's training part.
        fpr: False accept rates of the pooled ROC.
        tpr: True accept rates of the pooled ROC.
    """

    fold_accuracies: NDArray[np.float64]
    thresholds: NDArray[np.float64]
    fpr: NDArray[np.float64]
    tpr: NDArray[np.float64]

    @property
    def accuracy(self) -> float:
        return float(np.mean(self.fold_accuracies))

    @property
    def accuracy_std(self) -> float:
        return float(np.std(self.fold_accuracies))


def candidate_thresholds(values: NDArray[np.float64]) -> NDArray[np.float64]:
    """Midpoints between consecutive distinct values, with -inf and +inf at the ends.

    >>> candidate_thresholds(np.array([3.0, 1.0, 3.0, 2.0]))
    array([-inf,  1.5,  2.5,  inf])
    """
    distinct = np.unique(values)
    midpoints = (distinct[:-1] + distinct[1:]) / 2.0
    return np.concatenate([[-np.inf], midpoints, [np.inf]])


def threshold_accuracies(
    thresholds: NDArray[np.float64], values: NDArray[np.float64], same: NDArray[np.bool_]
) -> NDArray[np.float64]:
    """Accuracy of predicting "same" for ``values <= t``, for every ``t``."""
    predicted = values[None, :] <= thresholds[:, None]
    return np.mean(predicted == same[None, :], axis=1)


def verification_from_distances(
    distances: ArrayLike, same: ArrayLike, folds: int = 10
) -> VerificationResult:
    """K-fold verification accuracy of a distance threshold.

    Folds are contiguous. A pair is predicted "same" when its distance is at most the
    threshold. Candidates are the midpoints of the sorted distinct training distances,
    plus -inf and +inf. The candidate with the best accuracy on the remaining folds is
    applied unchanged to the held-out fold; among equally good candidates the smallest
    wins.

    Raises:
        ProtocolError: If there are fewer than two pairs per fold, or a held-out fold
            holds only one class.

    >>> result = verification_from_distances([0.1, 0.9, 0.2, 0.8], [1, 0, 1, 0], folds=2)
    >>> result.accuracy
    1.0
    """
    d = np.asarray(distances, dtype=np.float64)
    labels = np.asarray(same, dtype=bool)
    if d.ndim != 1 or d.shape != labels.shape:
        raise InputValidationError(
            f"distances and labels must be matching 1-D arrays, got {d.shape} and {labels.shape}"
        )
    if folds < 2 or len(d) < 2 * folds:
        raise ProtocolError(
            f"{len(d)} pairs cannot fill {folds} folds with at least two pairs each",
            pairs=len(d),
            folds=folds,
        )
    fold_accuracies = []
    chosen = []
    for fold, (train, test) in enumerate(KFold(n_splits=folds, shuffle=False).split(d)):
        if labels[test].all() or not labels[test].any():
            raise ProtocolError(f"held-out fold {fold} holds a single class", fold=fold)
        candidates = candidate_thresholds(d[train])
        best = candidates[np.argmax(threshold_accuracies(candidates, d[train], labels[train]))]
        chosen.append(best)
        fold_accuracies.append(
            threshold_accuracies(np.array([best]), d[test], labels[test])[0]
        )
    fpr, tpr, _ = roc_curve(labels, -d, drop_intermediate=False)
    return VerificationResult(
        fold_accuracies=np.array(fold_accuracies),
        thresholds=np.array(chosen),
        fpr=fpr,
        tpr=tpr,
    )


def verification(
    features_a: ArrayLike, features_b: ArrayLike, same: ArrayLike, folds: int = 10
) -> VerificationResult:
    """:func:`verification_from_distances` on the cosine distances of feature pairs."""
    return verification_from_distances(pair_distances(features_a, features_b), same, folds)


@dataclass(frozen=True)
class TarFar:
    tar_at_far: dict[float, float]
    auc: float


def tar_at(fpr: NDArray[np.float64], tpr: NDArray[np.float64], far: float) -> float:
    """TAR at ``far``, interpolated between ROC points.

    Where the ROC is vertical (several points share a false accept rate) the
    highest true accept rate is used.
    """
    levels, starts = np.unique(fpr, return_index=True)
    best = np.maximum.reduceat(tpr, starts)
    return float(np.interp(far, levels, best))


def tar_far_auc(
    scores_same: ArrayLike, scores_diff: ArrayLike, far_levels: Sequence[float]
) -> TarFar:
    """TAR at each FAR level and the ROC AUC, for similarity scores (higher = same).

    Raises:
        ProtocolError: If either score set is empty.

    >>> result = tar_far_auc([0.9, 0.8], [0.1, 0.2], [0.1])
    >>> result.tar_at_far, result.auc
    ({0.1: 1.0}, 1.0)
    """
    same = np.asarray(scores_same, dtype=np.float64).ravel()
    diff = np.asarray(scores_diff, dtype=np.float64).ravel()
    if not len(same) or not len(diff):
        raise ProtocolError(
            "TAR@FAR needs both genuine and impostor scores",
            genuine=len(same),
            impostor=len(diff),
        )
    labels = np.concatenate([np.ones(len(same), dtype=bool), np.zeros(len(diff), dtype=bool)])
    fpr, tpr, _ = roc_curve(labels, np.concatenate([same, diff]), drop_intermediate=False)
    return TarFar(
        tar_at_far={float(far): tar_at(fpr, tpr, far) for far in far_levels},
        auc=float(auc(fpr, tpr)),
    )


@dataclass(frozen=True)
class Rank1Result:
    """Rank-1 rates overall and per native-resolution bucket.

    Attributes:
        predictions: Gallery identity assigned to each probe.
        correct: Whether each probe was assigned its own identity.
        buckets: Rate per ``(low, high)`` bucket; buckets no probe falls in are absent.
    """

    predictions: NDArray[np.int64]
    correct: NDArray[np.bool_]
    buckets: dict[tuple[int, int], float]

    @property
    def rate(self) -> float:
        return float(np.mean(self.correct))


def rank1_identification(
    gallery_features: ArrayLike,
    gallery_ids: ArrayLike,
    probe_features: ArrayLike,
    probe_ids: ArrayLike,
    *,
    probe_resolutions: ArrayLike | None = None,
    buckets: Sequence[tuple[int, int]] = (),
) -> Rank1Result:
    """Assign every probe the identity of its nearest gallery feature.

    Ties go to the lower gallery index. Buckets are inclusive ``(low, high)`` ranges
    of probe native resolution.

    Raises:
        ProtocolError: If gallery identities repeat or there are no probes.
    """
    ids = np.asarray(gallery_ids, dtype=np.int64)
    truth = np.asarray(probe_ids, dtype=np.int64)
    if len(np.unique(ids)) != len(ids):
        raise ProtocolError("gallery identities must be unique", gallery=ids.tolist())
    if not len(truth):
        raise ProtocolError("identification needs at least one probe")
    distances = cosine_distances(probe_features, gallery_features)
    predictions = ids[np.argmin(distances, axis=1)]
    correct = predictions == truth
    rates: dict[tuple[int, int], float] = {}
    if probe_resolutions is not None:
        resolutions = np.asarray(probe_resolutions, dtype=np.int64)
        for low, high in buckets:
            members = (resolutions >= low) & (resolutions <= high)
            if members.any():
                rates[(low, high)] = float(np.mean(correct[members]))
    return Rank1Result(predictions=predictions, correct=correct, buckets=rates)


def psnr(img_a: ArrayLike, img_b: ArrayLike, peak: float = 2.0) -> float:
    """Peak signal-to-noise ratio in dB, capped at :data:`PSNR_CAP`.

    >>> round(psnr(np.zeros((2, 2)), np.full((2, 2), 0.2)), 9)
    20.0
    """
    a = np.asarray(img_a, dtype=np.float64)
    b = np.asarray(img_b, dtype=np.float64)
    if a.shape != b.shape:
        raise InputValidationError(f"PSNR needs equal shapes, got {a.shape} and {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, float(10.0 * np.log10(peak**2 / mse)))
