import pytest
import torch

from fanet.config import ModelName
from fanet.exceptions import InputValidationError, PrerequisiteError
from fanet.nets.forward import dec_forward, enc_forward, enc_z_forward
from fanet.nets.params import ParamStore, build_module, model_checksum
from fanet.training.optim import OptimState, optimizer_step

from tests.nets.conftest import SMALL_NET


def checksums(store: ParamStore) -> dict[ModelName, str]:
    return {name: model_checksum(store, name) for name in store.names}


def test_initialisation_is_seeded():
    first = ParamStore.init(SMALL_NET, list(ModelName), seed=5)
    second = ParamStore.init(SMALL_NET, list(ModelName), seed=5)
    other = ParamStore.init(SMALL_NET, list(ModelName), seed=6)

    assert checksums(first) == checksums(second)
    assert checksums(first)[ModelName.DEC] != checksums(other)[ModelName.DEC]


def test_model_initialisation_does_not_depend_on_other_models():
    alone = ParamStore.init(SMALL_NET, [ModelName.ENC_H], seed=5)
    together = ParamStore.init(SMALL_NET, list(ModelName), seed=5)

    assert model_checksum(alone, ModelName.ENC_H) == model_checksum(together, ModelName.ENC_H)


def test_biases_start_at_zero(store):
    for name, parameter in store.named_parameters():
        if name.endswith(".bias"):
            assert torch.count_nonzero(parameter) == 0


def test_parameter_names_are_prefixed_by_model(store):
    names = [name for name, _ in store.named_parameters()]

    assert len(names) == len(set(names))
    assert {name.split(".", 1)[0] for name in names} == {str(model) for model in ModelName}


def test_checksum_ignores_model_name(store):
    copied = ParamStore(SMALL_NET).add(ModelName.ENC_L, store[ModelName.ENC_H])

    assert model_checksum(copied, ModelName.ENC_L) == model_checksum(store, ModelName.ENC_H)


def test_freeze_then_unfreeze_restores_flags(store):
    before = store.trainable_flags()

    store.freeze([ModelName.ENC_H, ModelName.DEC])
    assert not store.is_trainable(ModelName.ENC_H)
    assert store.is_trainable(ModelName.ENC_Z)
    store.unfreeze([ModelName.ENC_H, ModelName.DEC])

    assert store.trainable_flags() == before


def test_freeze_single_parameter(store):
    store.freeze(["enc_h.head.weight"])

    assert not store.is_trainable("enc_h")
    assert not store.is_trainable("enc_h.head.weight")
    assert store.is_trainable("enc_h.head.bias")


def test_freeze_unknown_name_is_rejected(store):
    with pytest.raises(InputValidationError):
        store.freeze(["enc_q"])


def test_frozen_model_survives_many_optimizer_steps(store):
    store.freeze([ModelName.ENC_H])
    frozen_before = model_checksum(store, ModelName.ENC_H)
    dec_before = model_checksum(store, ModelName.DEC)
    opt = OptimState(store.parameters(store.names), lr=1e-2)
    x = torch.rand(2, 8, 8, 1) * 2.0 - 1.0

    for _ in range(100):
        store.zero_grad()
        f = enc_forward(ModelName.ENC_H, store, x)
        loss = (dec_forward(store, f, enc_z_forward(store, x)) - x).pow(2).mean() + f.pow(2).mean()
        loss.backward()
        optimizer_step(opt, 1e-2)

    assert model_checksum(store, ModelName.ENC_H) == frozen_before
    assert model_checksum(store, ModelName.DEC) != dec_before


def test_require_names_missing_models():
    store = ParamStore.init(SMALL_NET, [ModelName.ENC_H], seed=0)

    with pytest.raises(PrerequisiteError, match="enc_l"):
        store.require(ModelName.ENC_H, ModelName.ENC_L)
    with pytest.raises(PrerequisiteError):
        store[ModelName.DEC]


def test_adding_a_model_twice_is_rejected(store):
    with pytest.raises(InputValidationError):
        store.add(ModelName.DEC, build_module(SMALL_NET, ModelName.DEC))


def test_without_shares_the_remaining_modules(store):
    reduced = store.without([ModelName.FC])

    assert ModelName.FC not in reduced
    assert reduced[ModelName.DEC] is store[ModelName.DEC]


def test_copy_is_independent(store):
    copied = store.copy()
    with torch.no_grad():
        copied[ModelName.DIS].head.bias.add_(1.0)

    assert model_checksum(copied, ModelName.DIS) != model_checksum(store, ModelName.DIS)
