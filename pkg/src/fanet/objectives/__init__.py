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
    uniform_target,
)
from fanet.objectives.stage import (
    LossTerm,
    StageBatch,
    StageLoss,
    classifier_loss,
    discriminator_loss,
    stage_loss,
)

__all__ = [
    "loss_dec",
    "loss_enc",
    "loss_enc_dec",
    "loss_fc_adversary",
    "loss_gan_d",
    "loss_gan_g",
    "loss_id",
    "loss_pretrain",
    "loss_z",
    "margin_penalty",
    "uniform_target",
    "LossTerm",
    "StageBatch",
    "StageLoss",
    "classifier_loss",
    "discriminator_loss",
    "stage_loss",
]
