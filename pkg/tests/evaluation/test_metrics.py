import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fanet.evaluation.metrics import (
    PSNR_CAP,
    cosine_distances,
    pair_distances,
    psnr,
    rank1_identification,
    tar_far_auc,
    unit_rows,
    verification,
    verification_from_distances,
)
from fanet.exceptions import InputValidationError, ProtocolError

from tests.strategies import (
    IdentificationInstance,
    VerificationInstance,
    identification_instances,
    score_sets,
    verification_instances,
)

BUCKETS = ((8, 16), (17, 24), (25, 32))


# ---------------------------------------------------------------------------
# Brute-force references
# ---------------------------------------------------------------------------


def contiguous_folds(n: int, folds: int) -> list[np.ndarray]:
    sizes = [n // folds + (1 if fold < n % folds else 0) for fold in range(folds)]
    bounds = np.cumsum([0, *sizes])
    return [np.arange(bounds[fold], bounds[fold + 1]) for fold in range(folds)]


def reference_fold_accuracies(
    distances: np.ndarray, same: np.ndarray, folds: int
) -> list[float]:
    accuracies = []
    for test in contiguous_folds(len(distances), folds):
        train = np.setdiff1d(np.arange(len(distances)), test)
        distinct = sorted(set(distances[train].tolist()))
        candidates = [-np.inf]
        candidates += [(lo + hi) / 2.0 for lo, hi in zip(distinct, distinct[1:])]
        candidates.append(np.inf)
        best, best_accuracy = None, -1.0
        for t in candidates:
            accuracy = np.mean((distances[train] <= t) == same[train])
            if accuracy > best_accuracy:
                best, best_accuracy = t, accuracy
        accuracies.append(float(np.mean((distances[test] <= best) == same[test])))
    return accuracies


def reference_roc(genuine: np.ndarray, impostor: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    scores = sorted(set(np.concatenate([genuine, impostor]).tolist()), reverse=True)
    thresholds = [np.inf, *scores]
    fpr = np.array([np.mean(impostor >= t) for t in thresholds])
    tpr = np.array([np.mean(genuine >= t) for t in thresholds])
    return fpr, tpr


def reference_tar(genuine: np.ndarray, impostor: np.ndarray, far: float) -> float:
    fpr, tpr = reference_roc(genuine, impostor)
    levels = np.unique(fpr)
    best = np.array([tpr[fpr == level].max() for level in levels])
    return float(np.interp(far, levels, best))


def mann_whitney(genuine: np.ndarray, impostor: np.ndarray) -> float:
    wins = (genuine[:, None] > impostor[None, :]) + 0.5 * (genuine[:, None] == impostor[None, :])
    return float(np.mean(wins))


# ---------------------------------------------------------------------------
# Distances
# ---------------------------------------------------------------------------


def test_unit_rows_keeps_zero_rows():
    rows = unit_rows([[3.0, 4.0], [0.0, 0.0]])

    np.testing.assert_allclose(rows, [[0.6, 0.8], [0.0, 0.0]])


def test_unit_rows_rejects_vectors():
    with pytest.raises(InputValidationError):
        unit_rows([1.0, 2.0])


def test_cosine_distance_ignores_scale():
    a = np.array([[1.0, 2.0, -1.0]])

    np.testing.assert_allclose(cosine_distances(a, 5.0 * a), [[0.0]], atol=1e-12)
    np.testing.assert_allclose(cosine_distances(a, -a), [[2.0]])


def test_pair_distances_row_by_row():
    a = np.array([[1.0, 0.0], [0.0, 1.0]])
    b = np.array([[1.0, 0.0], [1.0, 0.0]])

    np.testing.assert_allclose(pair_distances(a, b), [0.0, 1.0])


def test_pair_sides_must_match():
    with pytest.raises(InputValidationError):
        pair_distances(np.ones((3, 2)), np.ones((2, 2)))


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------


@given(verification_instances())
def test_verification_matches_reference(instance: VerificationInstance):
    result = verification_from_distances(instance.distances, instance.same, instance.folds)

    expected = reference_fold_accuracies(instance.distances, instance.same, instance.folds)
    np.testing.assert_allclose(result.fold_accuracies, expected)
    assert result.accuracy == pytest.approx(np.mean(expected))
    assert 0.0 <= result.accuracy <= 1.0


@given(verification_instances())
def test_verification_accuracy_is_unchanged_by_scaling(instance: VerificationInstance):
    a = verification_from_distances(instance.distances, instance.same, instance.folds)
    b = verification_from_distances(4.0 * instance.distances, instance.same, instance.folds)

    np.testing.assert_array_equal(a.fold_accuracies, b.fold_accuracies)


def test_held_out_distances_do_not_move_the_threshold():
    distances = np.array([0.8, 0.85, 0.1, 0.9])
    same = np.array([True, False, True, False])

    result = verification_from_distances(distances, same, folds=2)

    # Trained on (0.1, 0.9) the threshold is 0.5, which rejects the genuine 0.8.
    np.testing.assert_allclose(result.thresholds, [0.5, 0.825])
    np.testing.assert_array_equal(result.fold_accuracies, [0.5, 1.0])


def test_a_distance_on_the_threshold_counts_as_same():
    result = verification_from_distances([0.5, 0.875, 0.25, 0.75], [1, 0, 1, 0], folds=2)

    np.testing.assert_array_equal(result.thresholds, [0.5, 0.6875])
    assert result.accuracy == 1.0


def test_separated_tied_distances_verify_perfectly():
    same = np.arange(20) % 2 == 0
    distances = np.where(same, 0.1, 0.9)

    result = verification_from_distances(distances, same, folds=5)

    assert result.accuracy == 1.0
    assert result.accuracy_std == 0.0


def test_verification_of_identical_and_orthogonal_features_is_perfect():
    features = np.eye(8)
    same = np.arange(8) % 2 == 0
    partner = np.where(same[:, None], features, np.roll(features, 1, axis=0))

    assert verification(features, partner, same, folds=2).accuracy == 1.0


def test_too_few_pairs_for_the_folds():
    with pytest.raises(ProtocolError, match="folds"):
        verification_from_distances([0.1, 0.2, 0.3], [1, 0, 1], folds=2)


def test_single_class_fold_is_rejected():
    with pytest.raises(ProtocolError, match="single class"):
        verification_from_distances([0.1, 0.2, 0.3, 0.4], [1, 1, 0, 0], folds=2)


def test_distances_and_labels_must_align():
    with pytest.raises(InputValidationError):
        verification_from_distances([0.1, 0.2, 0.3, 0.4], [1, 0, 1], folds=2)


# ---------------------------------------------------------------------------
# TAR@FAR and AUC
# ---------------------------------------------------------------------------


@given(score_sets(), st.sampled_from([0.001, 0.01, 0.1, 0.3, 0.5, 1.0]))
def test_tar_at_far_matches_reference(scores, far):
    genuine, impostor = scores

    result = tar_far_auc(genuine, impostor, [far])

    assert result.tar_at_far[far] == pytest.approx(reference_tar(genuine, impostor, far))


@given(score_sets())
def test_auc_is_the_mann_whitney_statistic(scores):
    genuine, impostor = scores

    assert tar_far_auc(genuine, impostor, []).auc == pytest.approx(mann_whitney(genuine, impostor))


@given(score_sets())
def test_tar_is_monotone_in_far(scores):
    genuine, impostor = scores
    levels = [0.001, 0.01, 0.1, 0.3, 1.0]

    tars = [tar_far_auc(genuine, impostor, levels).tar_at_far[far] for far in levels]

    assert tars == sorted(tars)
    assert tars[-1] == 1.0


def test_perfect_separation():
    result = tar_far_auc([0.9, 0.95, 0.99], [0.1, 0.2, 0.3], [0.001, 0.1])

    assert result.tar_at_far == {0.001: 1.0, 0.1: 1.0}
    assert result.auc == 1.0


@pytest.mark.parametrize(("genuine", "impostor"), [([], [0.1]), ([0.9], [])])
def test_empty_score_sets(genuine, impostor):
    with pytest.raises(ProtocolError):
        tar_far_auc(genuine, impostor, [0.1])


# ---------------------------------------------------------------------------
# Rank-1 identification
# ---------------------------------------------------------------------------


@given(identification_instances())
def test_rank1_matches_nearest_axis(instance: IdentificationInstance):
    result = rank1_identification(
        instance.gallery,
        instance.gallery_ids,
        instance.probes,
        instance.probe_ids,
        probe_resolutions=instance.resolutions,
        buckets=BUCKETS,
    )

    expected = instance.gallery_ids[np.argmax(instance.probes, axis=1)]
    np.testing.assert_array_equal(result.predictions, expected)
    assert result.rate == pytest.approx(np.mean(expected == instance.probe_ids))
    for low, high in BUCKETS:
        members = (instance.resolutions >= low) & (instance.resolutions <= high)
        if members.any():
            assert result.buckets[(low, high)] == pytest.approx(
                np.mean((expected == instance.probe_ids)[members])
            )
        else:
            assert (low, high) not in result.buckets


def test_equidistant_probe_takes_the_first_gallery_entry():
    gallery = np.eye(2)

    result = rank1_identification(gallery, [7, 3], [[1.0, 1.0]], [3])

    assert result.predictions.tolist() == [7]
    assert result.rate == 0.0


def test_duplicate_gallery_identities():
    with pytest.raises(ProtocolError, match="unique"):
        rank1_identification(np.eye(2), [1, 1], [[1.0, 0.0]], [1])


def test_identification_needs_probes():
    with pytest.raises(ProtocolError):
        rank1_identification(np.eye(2), [1, 2], np.zeros((0, 2)), [])


def test_buckets_without_resolutions_are_empty():
    result = rank1_identification(np.eye(2), [1, 2], [[0.0, 1.0]], [2], buckets=BUCKETS)

    assert result.buckets == {}
    assert result.rate == 1.0


# ---------------------------------------------------------------------------
# PSNR
# ---------------------------------------------------------------------------


def test_identical_images_hit_the_cap():
    image = np.linspace(-1.0, 1.0, 16).reshape(4, 4)

    assert psnr(image, image) == PSNR_CAP


def test_psnr_of_a_constant_offset():
    a = np.zeros((3, 3))

    assert psnr(a, a + 0.02) == pytest.approx(40.0)


def test_psnr_is_symmetric():
    rng = np.random.default_rng(1)
    a, b = rng.uniform(-1, 1, (2, 5, 5))

    assert psnr(a, b) == psnr(b, a)


def test_psnr_shapes_must_match():
    with pytest.raises(InputValidationError):
        psnr(np.zeros((2, 2)), np.zeros((3, 3)))
