"""Torch modules for the encoders, decoder, discriminator and identity classifier.

All image-facing modules take and return channels-last (B, H, W, C) tensors and
permute internally. None of them holds batch statistics, so every forward pass is a
pure function of parameters and input.
"""

from __future__ import annotations

import torch
from torch import Tensor, nn
from typing_extensions import override

from fanet.config import NetConfig


def _conv_stack(cfg: NetConfig) -> nn.Sequential:
    layers: list[nn.Module] = []
    in_channels = cfg.channels
    for width in cfg.conv_widths:
        layers.append(nn.Conv2d(in_channels, width, kernel_size=3, stride=2, padding=1))
        layers.append(nn.LeakyReLU(cfg.leaky_slope))
        in_channels = width
    return nn.Sequential(*layers)


def _to_nchw(x: Tensor) -> Tensor:
    return x.permute(0, 3, 1, 2)


class Encoder(nn.Module):
    """Stride-2 conv blocks followed by a linear head.

    When ``n_classes`` is given the encoder also carries a softmax classifier head over
    its output features; it is only used by the pretraining loss.
    """

    def __init__(self, cfg: NetConfig, out_dim: int, n_classes: int | None = None) -> None:
        super().__init__()
        self.blocks = _conv_stack(cfg)
        self.head = nn.Linear(cfg.conv_widths[-1] * cfg.base_side**2, out_dim)
        self.classifier = nn.Linear(out_dim, n_classes) if n_classes else None

    @override
    def forward(self, x: Tensor) -> Tensor:
        return self.head(self.blocks(_to_nchw(x)).flatten(1))


class Decoder(nn.Module):
    """Maps (f, z) to an image: a linear stem, then nearest upsample + conv per block."""

    def __init__(self, cfg: NetConfig) -> None:
        super().__init__()
        widths = tuple(reversed(cfg.conv_widths))
        self.base_side = cfg.base_side
        self.base_channels = widths[0]
        self.stem = nn.Linear(cfg.d_f + cfg.d_z, widths[0] * cfg.base_side**2)
        self.stem_act = nn.LeakyReLU(cfg.leaky_slope)
        outputs = (*widths[1:], cfg.channels)
        layers: list[nn.Module] = []
        for index, (in_channels, out_channels) in enumerate(zip(widths, outputs, strict=True)):
            layers.append(nn.Upsample(scale_factor=2, mode="nearest"))
            layers.append(nn.Conv2d(in_channels, out_channels, kernel_size=3, padding=1))
            last = index == len(widths) - 1
            layers.append(nn.Tanh() if last else nn.LeakyReLU(cfg.leaky_slope))
        self.blocks = nn.Sequential(*layers)

    @override
    def forward(self, f: Tensor, z: Tensor) -> Tensor:
        hidden = self.stem_act(self.stem(torch.cat([f, z], dim=1)))
        hidden = hidden.view(-1, self.base_channels, self.base_side, self.base_side)
        return self.blocks(hidden).permute(0, 2, 3, 1)


class Discriminator(nn.Module):
    """Conv stack with a single realness logit per image."""

    def __init__(self, cfg: NetConfig) -> None:
        super().__init__()
        self.blocks = _conv_stack(cfg)
        self.head = nn.Linear(cfg.conv_widths[-1] * cfg.base_side**2, 1)

    @override
    def forward(self, x: Tensor) -> Tensor:
        return self.head(self.blocks(_to_nchw(x)).flatten(1)).squeeze(1)


class Classifier(nn.Module):
    """Linear identity classifier over non-identity features, softmax-normalised."""

    def __init__(self, cfg: NetConfig) -> None:
        super().__init__()
        self.linear = nn.Linear(cfg.d_z, cfg.n_identities)

    @override
    def forward(self, z: Tensor) -> Tensor:
        return torch.softmax(self.linear(z), dim=1)
