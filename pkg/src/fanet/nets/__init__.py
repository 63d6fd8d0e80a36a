from fanet.nets.params import ParamStore, build_module, init_module, model_checksum
from fanet.nets.forward import (
    dec_forward,
    dis_forward,
    enc_forward,
    enc_z_forward,
    fc_forward,
    identity_logits,
    zeros_z,
)
from fanet.nets.checkpoint import load_checkpoint, read_header, save_checkpoint

__all__ = [
    "ParamStore",
    "build_module",
    "init_module",
    "model_checksum",
    "dec_forward",
    "dis_forward",
    "enc_forward",
    "enc_z_forward",
    "fc_forward",
    "identity_logits",
    "zeros_z",
    "load_checkpoint",
    "read_header",
    "save_checkpoint",
]
