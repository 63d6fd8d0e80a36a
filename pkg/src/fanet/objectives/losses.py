"""Scalar loss functions.

Each loss documents which parameters its gradient may reach. Losses that evaluate a
fixed network do so through the ``frozen=True`` forward ops, so the fixed network's
parameters never receive gradient even when they are trainable elsewhere.
"""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import Tensor

from fanet.config import ModelName
from fanet.exceptions import InputValidationError
from fanet.nets.forward import dec_forward, enc_forward, enc_z_forward
from fanet.nets.params import ParamStore


def uniform_target(n_identities: int, like: Tensor) -> Tensor:
    """The even identity distribution ``[1/N_D, ..., 1/N_D]``."""
    return torch.full((n_identities,), 1.0 / n_identities, dtype=like.dtype, device=like.device)


def _same_shape(a: Tensor, b: Tensor, what: str) -> None:
    if a.shape != b.shape:
        raise InputValidationError(
            f"{what} shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}",
            shapes=(tuple(a.shape), tuple(b.shape)),
        )


def loss_z(fc_out: Tensor, n_identities: int) -> Tensor:
    """Mean squared L2 distance of each predicted distribution to the uniform one.

    ``fc_out`` must come from the classifier evaluated with frozen parameters so the
    gradient reaches the non-identity encoder only.

    >>> loss_z(torch.tensor([[1.0, 0.0]]), 2)
    tensor(0.5000)
    """
    if fc_out.ndim != 2 or fc_out.shape[1] != n_identities:
        raise InputValidationError(
            f"expected rows of length {n_identities}, got shape {tuple(fc_out.shape)}",
            n_identities=n_identities,
        )
    return ((fc_out - uniform_target(n_identities, fc_out)) ** 2).sum(dim=1).mean()


def loss_fc_adversary(fc_out: Tensor, labels: Tensor) -> Tensor:
    """Mean negative log-likelihood of the true identity under the classifier.

    The classifier must see detached non-identity features, so only its own
    parameters are trained by this loss.
    """
    n_identities = fc_out.shape[1]
    if labels.numel() and (labels.min() < 0 or labels.max() >= n_identities):
        raise InputValidationError(f"labels must lie in [0, {n_identities})")
    return F.nll_loss(torch.log(fc_out.clamp_min(torch.finfo(fc_out.dtype).tiny)), labels)


def loss_dec(x_rec: Tensor, x_target: Tensor) -> Tensor:
    """Mean squared error over every pixel of the batch."""
    _same_shape(x_rec, x_target, "image batch")
    return F.mse_loss(x_rec, x_target)


def _mean_squared_distance(a: Tensor, b: Tensor) -> Tensor:
    return ((a - b) ** 2).sum(dim=1).mean()


def loss_id(x_gen: Tensor, f_target: Tensor, store: ParamStore) -> Tensor:
    """Squared feature distance between Enc_H of generated images and ``f_target``.

    Enc_H is evaluated with frozen parameters; the gradient flows back through
    ``x_gen`` to whatever produced it.
    """
    features = enc_forward(ModelName.ENC_H, store, x_gen, frozen=True)
    _same_shape(features, f_target, "feature batch")
    return _mean_squared_distance(features, f_target)


def loss_gan_d(logits_real: Tensor, logits_fake: Tensor) -> Tensor:
    """Binary cross entropy with real images labelled 1 and generated ones 0."""
    real = F.binary_cross_entropy_with_logits(logits_real, torch.ones_like(logits_real))
    fake = F.binary_cross_entropy_with_logits(logits_fake, torch.zeros_like(logits_fake))
    return real + fake


def loss_gan_g(logits_fake: Tensor) -> Tensor:
    """Non-saturating generator loss: generated images labelled 1."""
    return F.binary_cross_entropy_with_logits(logits_fake, torch.ones_like(logits_fake))


def margin_penalty(features: Tensor, margin: float) -> Tensor:
    """Mean of ``(||f|| - margin)**2`` over the batch."""
    if not margin > 0.0 or not math.isfinite(margin):
        raise InputValidationError(f"margin must be a positive number, got {margin}")
    return ((features.norm(dim=1) - margin) ** 2).mean()


def loss_pretrain(
    features: Tensor, logits: Tensor, labels: Tensor, margin: float, lambda_m: float
) -> Tensor:
    """Softmax cross entropy plus ``lambda_m`` times :func:`margin_penalty`."""
    return F.cross_entropy(logits, labels) + lambda_m * margin_penalty(features, margin)


def loss_enc(f_l: Tensor, f_h: Tensor) -> Tensor:
    """Mean squared L2 distance between low- and high-resolution identity features.

    >>> loss_enc(torch.tensor([[3.0]]), torch.tensor([[1.0]]))
    tensor(4.)
    """
    _same_shape(f_l, f_h, "feature batch")
    return _mean_squared_distance(f_l, f_h)


def loss_enc_dec(f_l: Tensor, x_h: Tensor, store: ParamStore) -> Tensor:
    """Reconstruct ``x_h`` from ``f_l`` and the non-identity code of ``x_h`` itself.

    Enc_Z and Dec are evaluated with frozen parameters, so the gradient reaches only
    the producer of ``f_l``. The target is always the image the code came from, which
    keeps the loss well formed when ``f_l`` was extracted from an unpaired image.
    """
    z = enc_z_forward(store, x_h, frozen=True)
    return loss_dec(dec_forward(store, f_l, z, frozen=True), x_h)
