"""Per-stage objectives assembled from the individual losses.

Every objective returns a :class:`StageLoss`: the weighted total plus the
breakdown of the terms it is made of. A term whose weight is zero is not evaluated
and does not appear in the breakdown; when no term remains the total is a constant
zero without gradient.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import Tensor

from fanet.config import LossWeights, ModelName, Stage
from fanet.exceptions import InputValidationError
from fanet.nets.forward import (
    dec_forward,
    dis_forward,
    enc_forward,
    enc_z_forward,
    fc_forward,
    identity_logits,
    zeros_z,
)
from fanet.nets.params import ParamStore
from fanet.objectives.losses import (
    loss_dec,
    loss_enc,
    loss_enc_dec,
    loss_fc_adversary,
    loss_gan_d,
    loss_gan_g,
    loss_id,
    loss_pretrain,
    loss_z,
    margin_penalty,
)

#: Models each stage's objective evaluates.
STAGE_REQUIREMENTS: dict[Stage, frozenset[ModelName]] = {
    Stage.PRETRAIN: frozenset({ModelName.ENC_H}),
    Stage.DISENTANGLE: frozenset(
        {ModelName.ENC_H, ModelName.ENC_Z, ModelName.DEC, ModelName.DIS, ModelName.FC}
    ),
    Stage.ADAPT: frozenset(
        {ModelName.ENC_H, ModelName.ENC_L, ModelName.ENC_Z, ModelName.DEC, ModelName.DIS}
    ),
}
STAGE_REQUIREMENTS[Stage.FINETUNE] = STAGE_REQUIREMENTS[Stage.ADAPT]


@dataclass(frozen=True, slots=True)
class StageBatch:
    """Network-ready tensors for one step.

    Attributes:
        x_h: High-resolution images, B×N×N×C. Also the reconstruction target and the
            source of the non-identity code at stage 2.
        labels: Identity labels of ``x_h``.
        x_l: Low-resolution inputs at network size, or ``None`` for HR-only stages.
    """

    x_h: Tensor
    labels: Tensor
    x_l: Tensor | None = None


@dataclass(frozen=True, slots=True)
class LossTerm:
    name: str
    weight: float
    value: Tensor


@dataclass(frozen=True, slots=True)
class StageLoss:
    total: Tensor
    terms: tuple[LossTerm, ...]

    @property
    def requires_backward(self) -> bool:
        return self.total.requires_grad

    def breakdown(self) -> dict[str, float]:
        return {term.name: float(term.value.detach()) for term in self.terms}

    def is_finite(self) -> bool:
        return bool(torch.isfinite(self.total.detach()))


class _Terms:
    def __init__(self) -> None:
        self._terms: list[LossTerm] = []

    def add(self, name: str, weight: float, compute: Callable[[], Tensor]) -> None:
        if weight != 0.0:
            self._terms.append(LossTerm(name, weight, compute()))

    def finish(self, like: Tensor, total: Tensor | None = None) -> StageLoss:
        if total is not None:
            return StageLoss(total, tuple(self._terms))
        if not self._terms:
            return StageLoss(torch.zeros((), dtype=like.dtype, device=like.device), ())
        total = torch.stack([term.weight * term.value for term in self._terms]).sum()
        return StageLoss(total, tuple(self._terms))


def _require_low(batch: StageBatch, stage: Stage) -> Tensor:
    if batch.x_l is None:
        raise InputValidationError(f"stage {stage} needs low-resolution inputs in the batch")
    return batch.x_l


def stage_loss(
    stage: Stage, batch: StageBatch, store: ParamStore, weights: LossWeights
) -> StageLoss:
    """The trainable-side objective of ``stage``.

    For stage 1.2 this is the generator side only; the discriminator and the
    identity classifier are trained by :func:`discriminator_loss` and
    :func:`classifier_loss`.

    Raises:
        PrerequisiteError: If a model the stage needs is missing from ``store``.
    """
    store.require(*STAGE_REQUIREMENTS[stage])
    match stage:
        case Stage.PRETRAIN:
            return _pretrain(batch, store, weights)
        case Stage.DISENTANGLE:
            return _disentangle(batch, store, weights)
        case Stage.ADAPT | Stage.FINETUNE:
            return _adapt(_require_low(batch, stage), batch, store, weights)
        case _:
            raise InputValidationError(f"no objective for stage {stage}")


def _pretrain(batch: StageBatch, store: ParamStore, weights: LossWeights) -> StageLoss:
    """The total is :func:`loss_pretrain`; the breakdown carries no gradient."""
    images, labels = batch.x_h, batch.labels
    if batch.x_l is not None:
        images = torch.cat([images, batch.x_l])
        labels = torch.cat([labels, batch.labels])
    features = enc_forward(ModelName.ENC_H, store, images)
    logits = identity_logits(store, features)
    total = loss_pretrain(features, logits, labels, weights.margin_m, weights.lambda_m)
    terms = _Terms()
    with torch.no_grad():
        terms.add("softmax", 1.0, lambda: F.cross_entropy(logits, labels))
        terms.add("margin", weights.lambda_m, lambda: margin_penalty(features, weights.margin_m))
    return terms.finish(batch.x_h, total)


def _disentangle(batch: StageBatch, store: ParamStore, weights: LossWeights) -> StageLoss:
    x_h = batch.x_h
    with torch.no_grad():
        f_h = enc_forward(ModelName.ENC_H, store, x_h)
    z_h = enc_z_forward(store, x_h)
    x_rec = dec_forward(store, f_h, z_h)
    need_norm = weights.lambda_id != 0.0 or weights.lambda_gan != 0.0
    x_norm = dec_forward(store, f_h, zeros_z(f_h, store.cfg.d_z)) if need_norm else None

    terms = _Terms()
    terms.add("dec", weights.lambda_dec, lambda: loss_dec(x_rec, x_h))
    if x_norm is not None:
        terms.add("id_rec", weights.lambda_id, lambda: loss_id(x_rec, f_h, store))
        terms.add("id_norm", weights.lambda_id, lambda: loss_id(x_norm, f_h, store))
        terms.add(
            "gan_rec",
            weights.lambda_gan,
            lambda: loss_gan_g(dis_forward(store, x_rec, frozen=True)),
        )
        terms.add(
            "gan_norm",
            weights.lambda_gan,
            lambda: loss_gan_g(dis_forward(store, x_norm, frozen=True)),
        )
    terms.add(
        "z",
        weights.lambda_z,
        lambda: loss_z(fc_forward(store, z_h, frozen=True), store.cfg.n_identities),
    )
    return terms.finish(x_h)


def _adapt(x_l: Tensor, batch: StageBatch, store: ParamStore, weights: LossWeights) -> StageLoss:
    x_h = batch.x_h
    with torch.no_grad():
        f_h = enc_forward(ModelName.ENC_H, store, x_h)
    f_l = enc_forward(ModelName.ENC_L, store, x_l)
    need_norm = weights.lambda_id != 0.0 or weights.lambda_gan != 0.0
    x_norm = (
        dec_forward(store, f_l, zeros_z(f_l, store.cfg.d_z), frozen=True) if need_norm else None
    )

    terms = _Terms()
    terms.add("enc", weights.lambda_enc, lambda: loss_enc(f_l, f_h))
    terms.add("enc_dec", weights.lambda_enc_dec, lambda: loss_enc_dec(f_l, x_h, store))
    if x_norm is not None:
        terms.add("id_norm", weights.lambda_id, lambda: loss_id(x_norm, f_h, store))
        terms.add(
            "gan_norm",
            weights.lambda_gan,
            lambda: loss_gan_g(dis_forward(store, x_norm, frozen=True)),
        )
    return terms.finish(x_h)


def discriminator_loss(batch: StageBatch, store: ParamStore) -> StageLoss:
    """Stage-1.2 discriminator objective on real images against both decodes.

    The decodes are computed without gradient, so only Dis is trained.
    """
    store.require(*STAGE_REQUIREMENTS[Stage.DISENTANGLE])
    x_h = batch.x_h
    with torch.no_grad():
        f_h = enc_forward(ModelName.ENC_H, store, x_h)
        z_h = enc_z_forward(store, x_h)
        x_rec = dec_forward(store, f_h, z_h)
        x_norm = dec_forward(store, f_h, zeros_z(f_h, store.cfg.d_z))
    logits_real = dis_forward(store, x_h)
    terms = _Terms()
    terms.add("gan_d_rec", 1.0, lambda: loss_gan_d(logits_real, dis_forward(store, x_rec)))
    terms.add("gan_d_norm", 1.0, lambda: loss_gan_d(logits_real, dis_forward(store, x_norm)))
    return terms.finish(x_h)


def classifier_loss(batch: StageBatch, store: ParamStore) -> StageLoss:
    """Stage-1.2 identity classifier objective on detached non-identity features."""
    store.require(ModelName.ENC_Z, ModelName.FC)
    with torch.no_grad():
        z_h = enc_z_forward(store, batch.x_h)
    terms = _Terms()
    terms.add("fc_adv", 1.0, lambda: loss_fc_adversary(fc_forward(store, z_h), batch.labels))
    return terms.finish(batch.x_h)
