from fanet.datagen.images import Image, stack_pixels
from fanet.datagen.resize import bicubic_resize, resize_pixels
from fanet.datagen.degrade import (
    degrade_to,
    fixed_degrade,
    jitter,
    rsa_degrade,
    unpaired_degrade,
    unpaired_fixed_degrade,
)
from fanet.datagen.render import IdentityBank, Sample, render_sample
from fanet.datagen.dataset import SampleSet, check_split_disjoint, generate_dataset, make_bank
from fanet.datagen.manifest import (
    ManifestRecord,
    load_image,
    read_dataset,
    save_image,
    write_dataset,
)

__all__ = [
    "Image",
    "stack_pixels",
    "bicubic_resize",
    "resize_pixels",
    "degrade_to",
    "fixed_degrade",
    "jitter",
    "rsa_degrade",
    "unpaired_degrade",
    "unpaired_fixed_degrade",
    "IdentityBank",
    "Sample",
    "render_sample",
    "SampleSet",
    "check_split_disjoint",
    "generate_dataset",
    "make_bank",
    "ManifestRecord",
    "load_image",
    "read_dataset",
    "save_image",
    "write_dataset",
]
