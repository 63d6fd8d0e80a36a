"""Named evaluation protocols and the ``evaluate`` entry point.

Every protocol runs on the eval split only and draws its randomness from
``(evaluation seed, protocol code, item index)``, so a report is a pure function of
the checkpoint, the dataset and the config.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass
from logging import getLogger
from pathlib import Path

import numpy as np
import torch

from fanet.config import Ablation, ModelName, RunConfig, Split
from fanet.datagen.dataset import SampleSet
from fanet.datagen.degrade import fixed_degrade, rsa_degrade, unpaired_degrade
from fanet.datagen.images import Image
from fanet.datagen.manifest import save_image
from fanet.evaluation.inference import (
    extract_features,
    feature_distance_report,
    nonidentity_features,
    normalize_faces,
    raw_features,
    reconstruct,
)
from fanet.evaluation.metrics import (
    pair_distances,
    psnr,
    rank1_identification,
    tar_far_auc,
    verification,
)
from fanet.evaluation.pairs import PairList, build_pairs
from fanet.evaluation.probes import disentanglement_probe
from fanet.evaluation.report import (
    EvalReport,
    MetricKind,
    Provenance,
    ReportRow,
    config_fingerprint,
    file_fingerprint,
    save_report,
)
from fanet.exceptions import ProtocolError
from fanet.nets.checkpoint import load_checkpoint
from fanet.nets.params import ParamStore
from fanet.training.rundir import RunDirectory, load_run_dataset

logger = getLogger(__name__)


@dataclass(frozen=True)
class EvalContext:
    """Everything a protocol reads.

    Attributes:
        dataset: The eval split.
        train_identities: Identities the networks were trained on.
        grid_dir: Where image grids are written, or ``None`` to skip them.
    """

    cfg: RunConfig
    store: ParamStore
    dataset: SampleSet
    train_identities: frozenset[int]
    grid_dir: Path | None = None

    @classmethod
    def build(
        cls, cfg: RunConfig, store: ParamStore, dataset: SampleSet, grid_dir: Path | None = None
    ) -> EvalContext:
        return cls(
            cfg=cfg,
            store=store,
            dataset=dataset.split(Split.EVAL),
            train_identities=frozenset(dataset.split(Split.TRAIN).identities),
            grid_dir=grid_dir,
        )

    def rng(self, protocol: str, *keys: int) -> np.random.Generator:
        code = sorted(PROTOCOLS).index(protocol)
        return np.random.default_rng([self.cfg.evaluation.seed, code, *keys])

    @property
    def encoders(self) -> list[ModelName]:
        return [name for name in (ModelName.ENC_H, ModelName.ENC_L) if name in self.store]

    def features(self, which: ModelName, images: Sequence[Image]) -> np.ndarray:
        return extract_features(
            self.store, which, images, batch_size=self.cfg.evaluation.batch_size
        )


Protocol = Callable[[EvalContext], list[ReportRow]]


def _verification_rows(
    ctx: EvalContext, prefix: str, features_a: np.ndarray, features_b: np.ndarray, pairs: PairList
) -> list[ReportRow]:
    evaluation = ctx.cfg.evaluation
    same = pairs.same
    result = verification(features_a, features_b, same, evaluation.folds)
    similarity = 1.0 - pair_distances(features_a, features_b)
    tar = tar_far_auc(similarity[same], similarity[~same], evaluation.far_levels)
    rows = [
        ReportRow(metric=f"{prefix}.accuracy", value=result.accuracy),
        ReportRow(metric=f"{prefix}.accuracy_std", value=result.accuracy_std),
    ]
    rows.extend(
        ReportRow(metric=f"{prefix}.tar@far={far:g}", value=value)
        for far, value in tar.tar_at_far.items()
    )
    rows.append(ReportRow(metric=f"{prefix}.auc", value=tar.auc))
    return rows


def _degraded_pairs(
    ctx: EvalContext, protocol: str, degrade: Callable[[Image, np.random.Generator], Image]
) -> tuple[PairList, list[Image], list[Image]]:
    evaluation = ctx.cfg.evaluation
    pairs = build_pairs(ctx.dataset, evaluation.n_pairs, evaluation.seed)
    side_a = [
        degrade(ctx.dataset[pair.a].image, ctx.rng(protocol, position, 0))
        for position, pair in enumerate(pairs.pairs)
    ]
    side_b = [
        degrade(ctx.dataset[pair.b].image, ctx.rng(protocol, position, 1))
        for position, pair in enumerate(pairs.pairs)
    ]
    return pairs, side_a, side_b


def _verify_encoders(
    ctx: EvalContext, pairs: PairList, side_a: list[Image], side_b: list[Image]
) -> list[ReportRow]:
    if not ctx.encoders:
        ctx.store.require(ModelName.ENC_H)
    rows: list[ReportRow] = []
    for which in ctx.encoders:
        rows.extend(
            _verification_rows(
                ctx, str(which), ctx.features(which, side_a), ctx.features(which, side_b), pairs
            )
        )
    return rows


NOMINAL_FIXED_FACTOR = 8


def verify_fixed(ctx: EvalContext) -> list[ReportRow]:
    """Both sides of every pair degraded by the configured fixed factor.

    The first row reports the factor actually used, which is 8 only under the default
    degradation config.
    """
    factor = ctx.cfg.degradation.fixed_factor
    if factor != NOMINAL_FIXED_FACTOR:
        logger.warning(
            "verify-fixed8x runs at the configured %dx, not %dx", factor, NOMINAL_FIXED_FACTOR
        )
    pairs, side_a, side_b = _degraded_pairs(
        ctx, "verify-fixed8x", lambda img, _rng: fixed_degrade(img, factor)
    )
    pairs = pairs.with_degradation(f"fixed{factor}x", f"fixed{factor}x")
    rows = [ReportRow(metric="factor", value=factor, kind=MetricKind.COUNT)]
    return rows + _verify_encoders(ctx, pairs, side_a, side_b)


def verify_hr(ctx: EvalContext) -> list[ReportRow]:
    """Undegraded pairs matched with Enc_H features."""
    ctx.store.require(ModelName.ENC_H)
    pairs, side_a, side_b = _degraded_pairs(ctx, "verify-hr", lambda img, _rng: img)
    return _verification_rows(
        ctx,
        str(ModelName.ENC_H),
        ctx.features(ModelName.ENC_H, side_a),
        ctx.features(ModelName.ENC_H, side_b),
        pairs.with_degradation("hr", "hr"),
    )


def _rsa(ctx: EvalContext) -> Callable[[Image, np.random.Generator], Image]:
    return lambda img, rng: rsa_degrade(img, ctx.cfg.degradation, rng)[0]


def verify_rsa(ctx: EvalContext) -> list[ReportRow]:
    """Both sides of every pair degraded to independently drawn resolutions."""
    pairs, side_a, side_b = _degraded_pairs(ctx, "verify-rsa", _rsa(ctx))
    return _verify_encoders(ctx, pairs.with_degradation("rsa", "rsa"), side_a, side_b)


def verify_normalized(ctx: EvalContext) -> list[ReportRow]:
    """RSA pairs normalized by Enc_L and the decoder, then matched with Enc_H features."""
    ctx.store.require(ModelName.ENC_H, ModelName.ENC_L, ModelName.DEC)
    pairs, side_a, side_b = _degraded_pairs(ctx, "verify-normalized", _rsa(ctx))
    batch_size = ctx.cfg.evaluation.batch_size
    normalized_a = normalize_faces(ctx.store, side_a, batch_size=batch_size)
    normalized_b = normalize_faces(ctx.store, side_b, batch_size=batch_size)
    return _verification_rows(
        ctx,
        "normalized+enc_h",
        ctx.features(ModelName.ENC_H, normalized_a),
        ctx.features(ModelName.ENC_H, normalized_b),
        pairs.with_degradation("rsa", "rsa"),
    )


def gallery_split(dataset: SampleSet, gallery_pose: float) -> tuple[list[int], list[int]]:
    """One gallery sample per identity, closest to a neutral capture; the rest are probes.

    Ties on pose go to the illumination closest to 1, then to the unoccluded sample,
    then to the lower index.
    """
    gallery, probes = [], []
    for identity in dataset.identities:
        indices = dataset.by_identity[identity]
        chosen = min(
            indices,
            key=lambda i: (
                abs(dataset[i].pose - gallery_pose),
                abs(dataset[i].illumination - 1.0),
                dataset[i].occlusion,
                i,
            ),
        )
        gallery.append(chosen)
        probes.extend(i for i in indices if i != chosen)
    return gallery, sorted(probes)


@dataclass(frozen=True)
class _IdentificationSet:
    gallery: list[int]
    probes: list[int]
    probe_images: list[Image]


def _identification_set(ctx: EvalContext, protocol: str) -> _IdentificationSet:
    gallery, probes = gallery_split(ctx.dataset, ctx.cfg.evaluation.gallery_pose)
    if not probes:
        raise ProtocolError("identification needs at least one non-gallery sample")
    probe_images = [
        unpaired_degrade(ctx.dataset[index].image, ctx.cfg.degradation, ctx.rng(protocol, index))
        for index in probes
    ]
    return _IdentificationSet(gallery, probes, probe_images)


def identify(ctx: EvalContext) -> list[ReportRow]:
    """Rank-1 identification of unpaired low-resolution probes against an HR gallery."""
    if not ctx.encoders:
        ctx.store.require(ModelName.ENC_H)
    split = _identification_set(ctx, "identify")
    gallery_images = [ctx.dataset[index].image for index in split.gallery]
    gallery_ids = [ctx.dataset[index].identity_id for index in split.gallery]
    probe_ids = [ctx.dataset[index].identity_id for index in split.probes]
    resolutions = [img.native_resolution for img in split.probe_images]
    rows = [ReportRow(metric="probes", value=len(split.probes), kind=MetricKind.COUNT)]
    for which in ctx.encoders:
        result = rank1_identification(
            ctx.features(which, gallery_images),
            gallery_ids,
            ctx.features(which, split.probe_images),
            probe_ids,
            probe_resolutions=resolutions,
            buckets=ctx.cfg.evaluation.resolution_buckets,
        )
        rows.append(ReportRow(metric=f"{which}.rank1", value=result.rate))
        rows.extend(
            ReportRow(metric=f"{which}.rank1[{low}-{high}]", value=rate)
            for (low, high), rate in result.buckets.items()
        )
    return rows


def probe(ctx: EvalContext) -> list[ReportRow]:
    """Linear identity and pose probes on Enc_H and Enc_Z features of eval identities."""
    ctx.store.require(ModelName.ENC_H, ModelName.ENC_Z)
    shared = ctx.train_identities & set(ctx.dataset.identities)
    if shared:
        raise ProtocolError(
            "probe identities overlap the network training identities", shared=sorted(shared)
        )
    images = [sample.image for sample in ctx.dataset]
    batch_size = ctx.cfg.evaluation.batch_size
    result = disentanglement_probe(
        raw_features(ctx.store, ModelName.ENC_H, images, batch_size=batch_size).double().numpy(),
        nonidentity_features(ctx.store, images, batch_size=batch_size),
        ctx.dataset.labels,
        poses=[sample.pose for sample in ctx.dataset],
        n_pose_buckets=ctx.cfg.evaluation.pose_buckets,
        seed=ctx.cfg.evaluation.seed,
    )
    rows = [
        ReportRow(metric="identity_f", value=result.identity_f),
        ReportRow(metric="identity_z", value=result.identity_z),
        ReportRow(metric="identity_chance", value=result.identity_chance),
    ]
    if result.pose_z is not None and result.pose_chance is not None:
        rows.append(ReportRow(metric="pose_z", value=result.pose_z))
        rows.append(ReportRow(metric="pose_chance", value=result.pose_chance))
    return rows


def psnr_baseline(ctx: EvalContext) -> list[ReportRow]:
    """PSNR of bicubic upsampling and, when trained, of ``Dec(Enc_L(x_l), Enc_Z(x_h))``."""
    originals = [sample.image for sample in ctx.dataset]
    lows = [
        rsa_degrade(img, ctx.cfg.degradation, ctx.rng("psnr-baseline", index))[0]
        for index, img in enumerate(originals)
    ]
    bicubic = [psnr(low.pixels, img.pixels) for low, img in zip(lows, originals, strict=True)]
    decibels = MetricKind.DECIBELS
    rows = [ReportRow(metric="bicubic.psnr", value=float(np.mean(bicubic)), kind=decibels)]
    if all(name in ctx.store for name in (ModelName.ENC_L, ModelName.ENC_Z, ModelName.DEC)):
        rebuilt = reconstruct(
            ctx.store, lows, originals, batch_size=ctx.cfg.evaluation.batch_size
        )
        scores = [psnr(out.pixels, img.pixels) for out, img in zip(rebuilt, originals, strict=True)]
        rows.append(
            ReportRow(metric="reconstruction.psnr", value=float(np.mean(scores)), kind=decibels)
        )
    return rows


def triplet_grid(images: Sequence[Image]) -> Image:
    """Images of one side placed left to right."""
    return Image(
        np.concatenate([img.pixels for img in images], axis=1),
        min(img.native_resolution for img in images),
    )


def feature_distance(ctx: EvalContext) -> list[ReportRow]:
    """Enc_H distance to the gallery face before and after normalizing each probe."""
    ctx.store.require(ModelName.ENC_H, ModelName.ENC_L, ModelName.DEC)
    split = _identification_set(ctx, "feature-distance")
    gallery_of = {ctx.dataset[index].identity_id: index for index in split.gallery}
    targets = [
        ctx.dataset[gallery_of[ctx.dataset[index].identity_id]].image for index in split.probes
    ]
    batch_size = ctx.cfg.evaluation.batch_size
    result = feature_distance_report(
        ctx.store, split.probe_images, targets, batch_size=batch_size
    )
    if ctx.grid_dir is not None:
        normalized = normalize_faces(ctx.store, split.probe_images, batch_size=batch_size)
        for index, row in enumerate(
            zip(split.probe_images, normalized, targets, strict=True)
        ):
            save_image(triplet_grid(row), ctx.grid_dir / f"{index:04d}.png")
        logger.info("Wrote %d input/normalized/gallery grids to %s", len(targets), ctx.grid_dir)
    return [
        ReportRow(metric="input_distance", value=result.mean_input, kind=MetricKind.DISTANCE),
        ReportRow(
            metric="normalized_distance", value=result.mean_normalized, kind=MetricKind.DISTANCE
        ),
        ReportRow(metric="fraction_closer", value=result.fraction_closer),
    ]


PROTOCOLS: dict[str, Protocol] = {
    "verify-hr": verify_hr,
    "verify-fixed8x": verify_fixed,
    "verify-rsa": verify_rsa,
    "verify-normalized": verify_normalized,
    "identify": identify,
    "probe": probe,
    "psnr-baseline": psnr_baseline,
    "feature-distance": feature_distance,
}


def get_protocol(name: str) -> Protocol:
    """Raises:
    ProtocolError: If ``name`` is not a known protocol.
    """
    try:
        return PROTOCOLS[name]
    except KeyError:
        raise ProtocolError(
            f"unknown protocol {name!r}; choose one of {', '.join(sorted(PROTOCOLS))}",
            protocol=name,
        ) from None


def run_protocol(name: str, ctx: EvalContext, provenance: Provenance) -> EvalReport:
    protocol = get_protocol(name)
    torch.use_deterministic_algorithms(True)
    ctx.store.eval()
    rows = protocol(ctx)
    logger.info("Protocol %s: %s", name, {row.metric: round(row.value, 4) for row in rows})
    return EvalReport(protocol=name, rows=tuple(rows), provenance=provenance)


def evaluate(
    cfg: RunConfig,
    protocol: str,
    *,
    checkpoint: Path | None = None,
    ablation: Ablation | None = None,
    dataset: SampleSet | None = None,
    run: RunDirectory | None = None,
) -> EvalReport:
    """Run one protocol against a checkpoint and save the report in the run directory.

    Without ``checkpoint`` the latest stage checkpoint of the run is used; with
    ``ablation`` the latest one trained with that ablation.

    Raises:
        ProtocolError: For an unknown protocol, or when its preconditions fail.
        PrerequisiteError: If the checkpoint or dataset is missing, or the checkpoint
            lacks a model the protocol needs.
        CheckpointError: If the checkpoint does not match ``cfg.net``.
    """
    get_protocol(protocol)
    run = run or RunDirectory(cfg)
    path = checkpoint or run.latest_checkpoint(ablation)
    store, header = load_checkpoint(path, cfg.net)
    data = dataset if dataset is not None else load_run_dataset(cfg)
    grid_dir = run.reports_dir / "grids" / protocol if cfg.evaluation.dump_grids else None
    ctx = EvalContext.build(cfg, store, data, grid_dir)
    provenance = Provenance(
        config_sha256=config_fingerprint(cfg),
        checkpoint_sha256=file_fingerprint(path),
        checkpoint_stage=header.stage,
        checkpoint_step=header.step,
        checkpoint_ablation=header.ablation,
        seed=cfg.evaluation.seed,
    )
    report = run_protocol(protocol, ctx, provenance)
    run.snapshot()
    saved = save_report(report, run.reports_dir)
    logger.info("Saved %s", saved)
    return report
