"""Finite-difference verification of every network and loss.

Each case is a function of a few tensors; :func:`run_case` compares its autograd
Jacobian with central finite differences through :func:`torch.autograd.gradcheck`.
Network cases differentiate with respect to every parameter and the input at once,
using :func:`torch.func.functional_call` so the parameters become plain inputs.
"""

from __future__ import annotations

import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from logging import getLogger

import torch
from torch import Tensor
from torch.func import functional_call

from fanet.config import ModelName, NetConfig
from fanet.nets.forward import zeros_z
from fanet.nets.params import ParamStore
from fanet.objectives import losses

logger = getLogger(__name__)

#: Reduced architecture the suite runs on.
GRADCHECK_NET = NetConfig(
    image_side=8, channels=1, d_f=4, d_z=3, n_identities=3, conv_widths=(2, 3, 4)
)
GRADCHECK_BATCH = 2

#: (finite-difference step, absolute tolerance, relative tolerance) per dtype.
TOLERANCES: dict[torch.dtype, tuple[float, float, float]] = {
    torch.float64: (1e-6, 1e-5, 1e-5),
    torch.float32: (1e-3, 1e-3, 1e-3),
}


@dataclass(frozen=True)
class GradcheckCase:
    name: str
    fn: Callable[..., Tensor]
    inputs: tuple[Tensor, ...]


@dataclass(frozen=True)
class GradcheckResult:
    name: str
    passed: bool
    seconds: float
    detail: str = ""


def run_case(case: GradcheckCase) -> GradcheckResult:
    dtype = case.inputs[0].dtype
    eps, atol, rtol = TOLERANCES[dtype]
    start = time.perf_counter()
    detail = ""
    try:
        passed = torch.autograd.gradcheck(
            case.fn, case.inputs, eps=eps, atol=atol, rtol=rtol, raise_exception=True
        )
    except RuntimeError as exc:
        passed = False
        detail = str(exc).splitlines()[0]
    seconds = time.perf_counter() - start
    logger.debug("gradcheck %s: %s in %.2fs", case.name, "ok" if passed else "FAILED", seconds)
    return GradcheckResult(case.name, bool(passed), seconds, detail)


def _leaf(tensor: Tensor) -> Tensor:
    return tensor.detach().clone().requires_grad_(True)


def _module_case(
    name: str,
    module: torch.nn.Module,
    inputs: Sequence[Tensor],
    probe: Tensor,
) -> GradcheckCase:
    names = [path for path, _ in module.named_parameters()]
    params = tuple(_leaf(parameter) for _, parameter in module.named_parameters())

    def fn(*flat: Tensor) -> Tensor:
        weights = dict(zip(names, flat[: len(names)], strict=True))
        out = functional_call(module, weights, tuple(flat[len(names) :]))
        return (out * probe).sum()

    return GradcheckCase(name, fn, params + tuple(_leaf(x) for x in inputs))


def build_cases(dtype: torch.dtype = torch.float64, seed: int = 0) -> list[GradcheckCase]:
    """Cases for every network forward and every loss at the reduced size."""
    cfg = GRADCHECK_NET
    store = ParamStore.init(cfg, list(ModelName), seed).to(dtype)
    generator = torch.Generator().manual_seed(seed)

    def rand(*shape: int, scale: float = 1.0) -> Tensor:
        return scale * torch.rand(*shape, generator=generator, dtype=dtype) * 2.0 - scale

    side, batch = cfg.image_side, GRADCHECK_BATCH
    x = rand(batch, side, side, cfg.channels, scale=0.9)
    f = rand(batch, cfg.d_f)
    z = rand(batch, cfg.d_z)
    labels = torch.tensor([0, 2])

    cases = [
        _module_case(f"net/{ModelName.ENC_H}", store[ModelName.ENC_H], [x], rand(batch, cfg.d_f)),
        _module_case(f"net/{ModelName.ENC_L}", store[ModelName.ENC_L], [x], rand(batch, cfg.d_f)),
        _module_case(f"net/{ModelName.ENC_Z}", store[ModelName.ENC_Z], [x], rand(batch, cfg.d_z)),
        _module_case(
            f"net/{ModelName.DEC}", store[ModelName.DEC], [f, z], rand(batch, side, side, 1)
        ),
        _module_case(
            f"net/{ModelName.DEC}-zero-z",
            store[ModelName.DEC],
            [f, zeros_z(f, cfg.d_z)],
            rand(batch, side, side, 1),
        ),
        _module_case(f"net/{ModelName.DIS}", store[ModelName.DIS], [x], rand(batch)),
        _module_case(
            f"net/{ModelName.FC}", store[ModelName.FC], [z], rand(batch, cfg.n_identities)
        ),
    ]

    probs = torch.softmax(rand(batch, cfg.n_identities), dim=1)
    x_target = rand(batch, side, side, cfg.channels, scale=0.9)
    f_target = rand(batch, cfg.d_f)
    cases += [
        GradcheckCase("loss/z", lambda p: losses.loss_z(p, cfg.n_identities), (_leaf(probs),)),
        GradcheckCase(
            "loss/fc_adversary", lambda p: losses.loss_fc_adversary(p, labels), (_leaf(probs),)
        ),
        GradcheckCase("loss/dec", losses.loss_dec, (_leaf(x), _leaf(x_target))),
        GradcheckCase("loss/id", lambda xg: losses.loss_id(xg, f_target, store), (_leaf(x),)),
        GradcheckCase("loss/gan_d", losses.loss_gan_d, (_leaf(rand(batch)), _leaf(rand(batch)))),
        GradcheckCase("loss/gan_g", losses.loss_gan_g, (_leaf(rand(batch)),)),
        GradcheckCase(
            "loss/pretrain",
            lambda feats, logits: losses.loss_pretrain(feats, logits, labels, 1.0, 0.5),
            (_leaf(f), _leaf(rand(batch, cfg.n_identities))),
        ),
        GradcheckCase("loss/enc", losses.loss_enc, (_leaf(f), _leaf(f_target))),
        GradcheckCase(
            "loss/enc_dec", lambda fl: losses.loss_enc_dec(fl, x_target, store), (_leaf(f),)
        ),
    ]
    return cases


def gradcheck_suite(dtype: torch.dtype = torch.float64, seed: int = 0) -> list[GradcheckResult]:
    """Run every case; a result per case, in a fixed order."""
    return [run_case(case) for case in build_cases(dtype, seed)]
