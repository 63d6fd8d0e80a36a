import pytest

from fanet.config import Split
from fanet.datagen.dataset import SampleSet
from fanet.evaluation.pairs import PairList, build_pairs
from fanet.exceptions import ProtocolError


@pytest.fixture(scope="module")
def eval_split(tiny_dataset) -> SampleSet:
    return tiny_dataset.split(Split.EVAL)


def test_pairs_alternate_genuine_and_impostor(eval_split):
    pairs = build_pairs(eval_split, 12, seed=0)

    assert len(pairs) == 12
    assert pairs.same.tolist() == [position % 2 == 0 for position in range(12)]
    for pair in pairs.pairs:
        a, b = eval_split[pair.a], eval_split[pair.b]
        assert (a.identity_id == b.identity_id) == pair.same_identity
        if pair.same_identity:
            assert pair.a != pair.b


def test_pairs_are_seeded(eval_split):
    assert build_pairs(eval_split, 10, seed=4) == build_pairs(eval_split, 10, seed=4)
    assert build_pairs(eval_split, 10, seed=4) != build_pairs(eval_split, 10, seed=5)


def test_degradation_label():
    pairs = PairList(pairs=()).with_degradation("fixed2x", "rsa")

    assert pairs.degradation == ("fixed2x", "rsa")


def test_training_samples_are_refused(tiny_dataset):
    with pytest.raises(ProtocolError, match="eval identities"):
        build_pairs(tiny_dataset, 4, seed=0)


def test_one_identity_cannot_give_impostors(eval_split):
    single = SampleSet([sample for sample in eval_split if sample.identity_id == 3])

    with pytest.raises(ProtocolError, match="two identities"):
        build_pairs(single, 4, seed=0)


def test_genuine_pairs_need_a_repeated_identity(eval_split):
    first = {}
    for sample in eval_split:
        first.setdefault(sample.identity_id, sample)

    with pytest.raises(ProtocolError):
        build_pairs(SampleSet(list(first.values())), 4, seed=0)
