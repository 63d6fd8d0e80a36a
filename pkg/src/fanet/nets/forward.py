"""Forward operations over a :class:`ParamStore`.

Every op validates its input shapes and, with ``frozen=True``, evaluates the model
with detached parameters: gradients still flow to the inputs but never reach that
model's parameters. The losses use this to route gradients.
"""

from __future__ import annotations

from typing import Any

import torch
from torch import Tensor, nn
from torch.func import functional_call

from fanet.config import ModelName
from fanet.exceptions import InputValidationError
from fanet.nets.params import ParamStore

ENCODERS = (ModelName.ENC_H, ModelName.ENC_L)


def _call(module: nn.Module, *args: Tensor, frozen: bool) -> Any:
    if not frozen:
        return module(*args)
    detached = {name: parameter.detach() for name, parameter in module.named_parameters()}
    return functional_call(module, detached, args)


def check_images(store: ParamStore, x: Tensor) -> None:
    cfg = store.cfg
    expected = (cfg.image_side, cfg.image_side, cfg.channels)
    if x.ndim != 4 or tuple(x.shape[1:]) != expected:
        raise InputValidationError(
            f"expected a B×{expected[0]}×{expected[1]}×{expected[2]} image batch, "
            f"got {tuple(x.shape)}",
            shape=tuple(x.shape),
        )


def check_vectors(x: Tensor, dim: int, name: str) -> None:
    if x.ndim != 2 or x.shape[1] != dim:
        raise InputValidationError(
            f"expected {name} of shape B×{dim}, got {tuple(x.shape)}", shape=tuple(x.shape)
        )


def enc_forward(which: ModelName, store: ParamStore, x: Tensor, *, frozen: bool = False) -> Tensor:
    """Identity features (B×d_f) from Enc_H or Enc_L."""
    if which not in ENCODERS:
        raise InputValidationError(f"{which} is not an identity encoder", which=str(which))
    check_images(store, x)
    return _call(store[which], x, frozen=frozen)


def enc_z_forward(store: ParamStore, x: Tensor, *, frozen: bool = False) -> Tensor:
    """Non-identity features (B×d_z)."""
    check_images(store, x)
    return _call(store[ModelName.ENC_Z], x, frozen=frozen)


def dec_forward(store: ParamStore, f: Tensor, z: Tensor, *, frozen: bool = False) -> Tensor:
    """Decode (f, z) into a B×N×N×C image batch in [-1, 1]."""
    check_vectors(f, store.cfg.d_f, "identity features")
    check_vectors(z, store.cfg.d_z, "non-identity features")
    if f.shape[0] != z.shape[0]:
        raise InputValidationError(f"batch sizes differ: f has {f.shape[0]}, z has {z.shape[0]}")
    return _call(store[ModelName.DEC], f, z, frozen=frozen)


def dis_forward(store: ParamStore, x: Tensor, *, frozen: bool = False) -> Tensor:
    """One realness logit per image."""
    check_images(store, x)
    return _call(store[ModelName.DIS], x, frozen=frozen)


def fc_forward(store: ParamStore, z: Tensor, *, frozen: bool = False) -> Tensor:
    """Softmax identity distribution (B×N_D) predicted from non-identity features."""
    check_vectors(z, store.cfg.d_z, "non-identity features")
    return _call(store[ModelName.FC], z, frozen=frozen)


def identity_logits(
    store: ParamStore, features: Tensor, which: ModelName = ModelName.ENC_H, *, frozen: bool = False
) -> Tensor:
    """Logits of the softmax classifier head an identity encoder carries."""
    check_vectors(features, store.cfg.d_f, "identity features")
    classifier = store[which].classifier
    if classifier is None:
        raise InputValidationError(f"{which} has no classifier head", which=str(which))
    return _call(classifier, features, frozen=frozen)


def zeros_z(f: Tensor, d_z: int) -> Tensor:
    """The all-zero non-identity code matching a batch of identity features."""
    return torch.zeros(f.shape[0], d_z, dtype=f.dtype, device=f.device)
