"""Versioned binary checkpoint container.

Layout, all integers unsigned 32-bit little-endian::

    b"FANCKPT\\0"  format_version  header_length  header_json
    repeated: meta_length  meta_json  raw little-endian tensor bytes

The header records the format version, the :class:`NetConfig`, the stage tag, the
step count and the ablation the stage ran with, if any; each tensor's meta records
its name, dtype and shape. Tensors are written in store order, so the same parameters
always produce the same bytes.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path
from typing import BinaryIO

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict, ValidationError

from fanet.config import Ablation, ModelName, NetConfig, Stage
from fanet.exceptions import CheckpointError
from fanet.nets.params import ParamStore, build_module

MAGIC = b"FANCKPT\0"
FORMAT_VERSION = 1

_U32 = struct.Struct("<I")
_DTYPES = {"float32": "<f4", "float64": "<f8"}


class CheckpointHeader(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    format_version: int = FORMAT_VERSION
    net: NetConfig
    stage: Stage
    step: int
    ablation: Ablation | None = None


class TensorMeta(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str
    dtype: str
    shape: tuple[int, ...]


def _write_block(handle: BinaryIO, payload: bytes) -> None:
    handle.write(_U32.pack(len(payload)))
    handle.write(payload)


def _read_exact(handle: BinaryIO, size: int, path: Path) -> bytes:
    data = handle.read(size)
    if len(data) != size:
        raise CheckpointError(f"{path} is truncated", path=str(path))
    return data


def _read_block(handle: BinaryIO, path: Path) -> bytes:
    (length,) = _U32.unpack(_read_exact(handle, _U32.size, path))
    return _read_exact(handle, length, path)


def save_checkpoint(
    path: Path,
    store: ParamStore,
    *,
    stage: Stage,
    step: int,
    ablation: Ablation | None = None,
) -> Path:
    """Write every parameter of ``store``; the file appears atomically."""
    header = CheckpointHeader(net=store.cfg, stage=stage, step=step, ablation=ablation)
    path.parent.mkdir(parents=True, exist_ok=True)
    partial = path.with_name(path.name + ".partial")
    with partial.open("wb") as handle:
        handle.write(MAGIC)
        handle.write(_U32.pack(FORMAT_VERSION))
        _write_block(handle, header.model_dump_json().encode())
        for name, parameter in store.named_parameters():
            data = parameter.detach().cpu().contiguous().numpy()
            dtype = str(data.dtype)
            if dtype not in _DTYPES:
                raise CheckpointError(f"cannot store {name} with dtype {dtype}", name=name)
            meta = TensorMeta(name=name, dtype=dtype, shape=tuple(data.shape))
            _write_block(handle, meta.model_dump_json().encode())
            handle.write(data.astype(_DTYPES[dtype]).tobytes())
    os.replace(partial, path)
    return path


def read_header(path: Path) -> CheckpointHeader:
    with path.open("rb") as handle:
        return _read_header(handle, path)


def _read_header(handle: BinaryIO, path: Path) -> CheckpointHeader:
    if _read_exact(handle, len(MAGIC), path) != MAGIC:
        raise CheckpointError(f"{path} is not a fanet checkpoint", path=str(path))
    (version,) = _U32.unpack(_read_exact(handle, _U32.size, path))
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"{path} has format version {version}, expected {FORMAT_VERSION}",
            path=str(path),
            version=version,
        )
    try:
        return CheckpointHeader.model_validate_json(_read_block(handle, path))
    except ValidationError as exc:
        raise CheckpointError(f"{path} has an invalid header: {exc}", path=str(path)) from exc


def load_checkpoint(path: Path, net: NetConfig) -> tuple[ParamStore, CheckpointHeader]:
    """Read a checkpoint written for ``net``.

    Raises:
        CheckpointError: If the file is missing, malformed, of another format version or
            written for a different :class:`NetConfig`.
    """
    if not path.exists():
        raise CheckpointError(f"checkpoint {path} does not exist", path=str(path))
    with path.open("rb") as handle:
        header = _read_header(handle, path)
        if header.net != net:
            raise CheckpointError(
                f"{path} was written for a different network configuration",
                path=str(path),
                stored=header.net.model_dump(),
                expected=net.model_dump(),
            )
        tensors: dict[str, torch.Tensor] = {}
        while block := handle.read(_U32.size):
            if len(block) != _U32.size:
                raise CheckpointError(f"{path} is truncated", path=str(path))
            (length,) = _U32.unpack(block)
            meta = TensorMeta.model_validate_json(_read_exact(handle, length, path))
            if meta.dtype not in _DTYPES:
                raise CheckpointError(f"unsupported dtype {meta.dtype}", path=str(path))
            dtype = np.dtype(_DTYPES[meta.dtype])
            size = int(np.prod(meta.shape, dtype=np.int64)) * dtype.itemsize
            array = np.frombuffer(_read_exact(handle, size, path), dtype=dtype).reshape(meta.shape)
            tensors[meta.name] = torch.from_numpy(array.astype(meta.dtype))

    prefixes = {name.split(".", 1)[0] for name in tensors}
    unknown = prefixes - {str(model) for model in ModelName}
    if unknown:
        raise CheckpointError(f"{path} holds unknown models {sorted(unknown)}", path=str(path))
    store = ParamStore(net)
    for model in sorted(ModelName(prefix) for prefix in prefixes):
        store.add(model, build_module(net, model))
    expected = {name: parameter for name, parameter in store.named_parameters()}
    if expected.keys() != tensors.keys():
        raise CheckpointError(
            f"{path} tensors do not match the model layout",
            missing=sorted(expected.keys() - tensors.keys()),
            unexpected=sorted(tensors.keys() - expected.keys()),
        )
    with torch.no_grad():
        for name, parameter in expected.items():
            if tuple(parameter.shape) != tuple(tensors[name].shape):
                raise CheckpointError(f"{name} has the wrong shape in {path}", name=name)
            parameter.data = tensors[name].clone()
    return store, header
