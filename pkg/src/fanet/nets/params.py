"""Named parameter storage with per-model and per-parameter freeze control."""

from __future__ import annotations

import copy
import hashlib
from collections.abc import Iterable, Iterator
from logging import getLogger

import numpy as np
import torch
from torch import nn

from fanet.config import ModelName, NetConfig
from fanet.exceptions import InputValidationError, PrerequisiteError
from fanet.nets.modules import Classifier, Decoder, Discriminator, Encoder

logger = getLogger(__name__)

#: Bumped whenever module layouts change in a way that invalidates stored parameters.
PARAM_VERSION = "fanet-params-1"


def build_module(cfg: NetConfig, name: ModelName) -> nn.Module:
    match name:
        case ModelName.ENC_H | ModelName.ENC_L:
            return Encoder(cfg, cfg.d_f, n_classes=cfg.n_identities)
        case ModelName.ENC_Z:
            return Encoder(cfg, cfg.d_z)
        case ModelName.DEC:
            return Decoder(cfg)
        case ModelName.DIS:
            return Discriminator(cfg)
        case ModelName.FC:
            return Classifier(cfg)
        case _:
            raise InputValidationError(f"unknown model {name!r}", model=str(name))


def model_seed(seed: int, name: ModelName) -> int:
    """Initialisation seed for one model, independent of which other models exist."""
    index = list(ModelName).index(name)
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def init_module(module: nn.Module, seed: int, *, leaky_slope: float = 0.2) -> nn.Module:
    """He-uniform weights and zero biases, drawn from a private seeded stream."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        for layer in module.modules():
            if isinstance(layer, nn.Conv2d | nn.Linear):
                nn.init.kaiming_uniform_(layer.weight, a=leaky_slope, nonlinearity="leaky_relu")
                if layer.bias is not None:
                    nn.init.zeros_(layer.bias)
    return module


class ParamStore:
    """The parameters of a set of named models.

    A parameter is trainable iff its ``requires_grad`` flag is set; optimizer steps
    never touch parameters whose flag is cleared. Parameter names are
    ``"<model>.<path>"`` and shapes are fixed once a model is added.
    """

    def __init__(self, cfg: NetConfig, version: str = PARAM_VERSION) -> None:
        self.cfg = cfg
        self.version = version
        self.modules = nn.ModuleDict()

    @classmethod
    def init(cls, cfg: NetConfig, names: Iterable[ModelName], seed: int) -> ParamStore:
        """Create a store with freshly initialised models, all trainable."""
        store = cls(cfg)
        for name in sorted(set(names)):
            module = build_module(cfg, name)
            seeded = init_module(module, model_seed(seed, name), leaky_slope=cfg.leaky_slope)
            store.add(name, seeded)
        logger.debug("Initialised %s from seed %d", ", ".join(store.modules), seed)
        return store

    def add(self, name: ModelName, module: nn.Module) -> ParamStore:
        if name in self:
            raise InputValidationError(f"model {name} already in the store", model=str(name))
        self.modules[str(name)] = module
        return self

    def without(self, names: Iterable[ModelName]) -> ParamStore:
        """A store sharing this one's modules, minus ``names``."""
        dropped = set(names)
        store = ParamStore(self.cfg, self.version)
        for name in self.names:
            if name not in dropped:
                store.modules[str(name)] = self.modules[str(name)]
        return store

    def copy(self) -> ParamStore:
        store = ParamStore(self.cfg, self.version)
        store.modules = copy.deepcopy(self.modules)
        return store

    def __contains__(self, name: object) -> bool:
        return str(name) in self.modules

    def __getitem__(self, name: ModelName) -> nn.Module:
        self.require(name)
        return self.modules[str(name)]

    @property
    def names(self) -> tuple[ModelName, ...]:
        return tuple(ModelName(key) for key in self.modules)

    def require(self, *names: ModelName) -> None:
        """Check that every model in ``names`` is present.

        Raises:
            PrerequisiteError: If any of ``names`` is missing.
        """
        missing = [str(name) for name in names if name not in self]
        if missing:
            raise PrerequisiteError(
                f"models {missing} are not available; run the stage that trains them first",
                missing=missing,
            )

    def named_parameters(self, name: ModelName | None = None) -> Iterator[tuple[str, nn.Parameter]]:
        if name is None:
            yield from self.modules.named_parameters()
            return
        for path, parameter in self[name].named_parameters():
            yield f"{name}.{path}", parameter

    def parameters(self, names: Iterable[ModelName]) -> list[nn.Parameter]:
        return [parameter for name in names for _, parameter in self.named_parameters(name)]

    def _select(self, names: Iterable[str]) -> list[nn.Parameter]:
        lookup = dict(self.named_parameters())
        selected = []
        for name in names:
            if name in self:
                selected.extend(self.parameters([ModelName(name)]))
            elif name in lookup:
                selected.append(lookup[name])
            else:
                raise InputValidationError(f"no model or parameter named {name!r}", name=name)
        return selected

    def freeze(self, names: Iterable[str]) -> ParamStore:
        """Clear the trainable flag of whole models or individual parameters."""
        for parameter in self._select(names):
            parameter.requires_grad_(False)
        return self

    def unfreeze(self, names: Iterable[str]) -> ParamStore:
        for parameter in self._select(names):
            parameter.requires_grad_(True)
        return self

    def is_trainable(self, name: str) -> bool:
        """Whether every parameter of a model (or the named parameter) is trainable."""
        return all(parameter.requires_grad for parameter in self._select([name]))

    def trainable_flags(self) -> dict[str, bool]:
        return {name: parameter.requires_grad for name, parameter in self.named_parameters()}

    def zero_grad(self) -> None:
        for _, parameter in self.named_parameters():
            parameter.grad = None

    def eval(self) -> ParamStore:
        self.modules.eval()
        return self

    def to(self, dtype: torch.dtype) -> ParamStore:
        self.modules.to(dtype)
        return self


def model_checksum(store: ParamStore, name: ModelName) -> str:
    """SHA-256 over a model's parameter paths, dtypes, shapes and raw bytes.

    Paths are taken relative to the model, so two models holding the same weights
    hash equal whatever their names.
    """
    digest = hashlib.sha256()
    for path, parameter in store[name].named_parameters():
        data = parameter.detach().cpu().contiguous()
        digest.update(path.encode())
        digest.update(str(data.dtype).encode())
        digest.update(repr(tuple(data.shape)).encode())
        digest.update(data.numpy().tobytes())
    return digest.hexdigest()
