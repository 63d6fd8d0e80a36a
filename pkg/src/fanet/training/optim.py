"""Adam state and the single optimizer step every stage uses."""

from __future__ import annotations

from collections.abc import Iterable

import torch
from torch import nn

from fanet.config import ModelName, TrainingConfig
from fanet.nets.params import ParamStore


class OptimState:
    """Adam moments for a fixed group of models plus a step counter.

    The underlying :class:`torch.optim.Adam` keeps one first- and second-moment
    accumulator per parameter, shaped like that parameter, created on first use.
    """

    def __init__(
        self,
        parameters: Iterable[nn.Parameter],
        *,
        lr: float,
        betas: tuple[float, float] = (0.5, 0.999),
        eps: float = 1e-8,
    ) -> None:
        self.parameters = list(parameters)
        self.adam = torch.optim.Adam(self.parameters, lr=lr, betas=betas, eps=eps)
        self.step = 0

    @classmethod
    def for_models(
        cls, store: ParamStore, models: Iterable[ModelName], training: TrainingConfig, lr: float
    ) -> OptimState:
        return cls(
            store.parameters(sorted(models)), lr=lr, betas=training.betas, eps=training.eps
        )

    @property
    def betas(self) -> tuple[float, float]:
        return self.adam.param_groups[0]["betas"]

    @property
    def eps(self) -> float:
        return self.adam.param_groups[0]["eps"]

    def moments(self, parameter: nn.Parameter) -> tuple[torch.Tensor, torch.Tensor] | None:
        state = self.adam.state.get(parameter)
        if not state:
            return None
        return state["exp_avg"], state["exp_avg_sq"]


def optimizer_step(opt: OptimState, lr: float) -> OptimState:
    """Apply one bias-corrected Adam update at ``lr`` to the trainable parameters.

    Gradients are read from ``.grad``. Parameters whose trainable flag is cleared
    have their gradient discarded first, so they are left bitwise unchanged.
    """
    for parameter in opt.parameters:
        if not parameter.requires_grad:
            parameter.grad = None
        elif parameter.grad is None:
            parameter.grad = torch.zeros_like(parameter)
    for group in opt.adam.param_groups:
        group["lr"] = lr
    opt.adam.step()
    opt.step += 1
    return opt
