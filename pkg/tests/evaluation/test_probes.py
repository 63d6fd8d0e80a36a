import numpy as np
import pytest

from fanet.evaluation.probes import (
    alternate_split,
    disentanglement_probe,
    linear_probe,
    pose_buckets,
)
from fanet.exceptions import InputValidationError, ProtocolError

LABELS = np.repeat(np.arange(4), 6)
POSES = np.tile([-15.0, -15.0, 0.0, 0.0, 15.0, 15.0], 4)


def test_alternate_split_is_disjoint_and_covers_identities():
    train, test = alternate_split(LABELS)

    assert not set(train) & set(test)
    assert len(train) + len(test) == len(LABELS)
    assert set(LABELS[train]) == set(LABELS[test]) == {0, 1, 2, 3}


def test_one_hot_identity_features_are_perfectly_probed():
    features_f = np.eye(4)[LABELS]
    noise = np.random.default_rng(0).normal(size=(len(LABELS), 3))

    result = disentanglement_probe(features_f, noise, LABELS)

    assert result.identity_f == 1.0
    assert result.identity_chance == 0.25
    assert result.pose_z is None
    assert result.gap == result.identity_f - result.identity_z


def test_pose_probe_reads_pose_from_z():
    z = np.stack([POSES, np.zeros_like(POSES)], axis=1)

    result = disentanglement_probe(np.eye(4)[LABELS], z, LABELS, poses=POSES)

    assert result.pose_z == 1.0
    assert result.pose_chance == 0.5
    assert result.identity_z <= 0.5


def test_pose_buckets_cover_the_range():
    assert pose_buckets([-45.0, -20.0, 20.0, 45.0], 3).tolist() == [0, 0, 2, 2]
    assert pose_buckets([0.0], 2).tolist() == [1]


def test_single_class_training_side_predicts_that_class():
    targets = np.array([1, 1, 1, 2])

    accuracy = linear_probe(np.zeros((4, 2)), targets, np.array([0, 1]), np.array([2, 3]))

    assert accuracy == 0.5


def test_identities_need_two_samples():
    labels = np.array([0, 0, 1])

    with pytest.raises(ProtocolError):
        disentanglement_probe(np.ones((3, 2)), np.ones((3, 2)), labels)


def test_inputs_must_align():
    with pytest.raises(InputValidationError):
        disentanglement_probe(np.ones((4, 2)), np.ones((3, 2)), np.array([0, 0, 1, 1]))
