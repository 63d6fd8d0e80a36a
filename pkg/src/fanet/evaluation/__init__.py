from fanet.evaluation.metrics import (
    PSNR_CAP,
    Rank1Result,
    TarFar,
    VerificationResult,
    cosine_distances,
    pair_distances,
    psnr,
    rank1_identification,
    tar_far_auc,
    verification,
    verification_from_distances,
)
from fanet.evaluation.pairs import PairList, PairRecord, build_pairs
from fanet.evaluation.probes import ProbeResult, disentanglement_probe
from fanet.evaluation.inference import (
    DisentangledViews,
    FeatureDistanceReport,
    disentangle_views,
    extract_feature,
    extract_features,
    feature_distance_report,
    feature_transfer,
    normalize_face,
    normalize_faces,
    reconstruct,
)
from fanet.evaluation.report import (
    EvalReport,
    MetricKind,
    Provenance,
    ReportRow,
    format_reports,
    load_reports,
    save_report,
)
from fanet.evaluation.protocols import PROTOCOLS, EvalContext, evaluate, get_protocol, run_protocol

__all__ = [
    "PSNR_CAP",
    "Rank1Result",
    "TarFar",
    "VerificationResult",
    "cosine_distances",
    "pair_distances",
    "psnr",
    "rank1_identification",
    "tar_far_auc",
    "verification",
    "verification_from_distances",
    "PairList",
    "PairRecord",
    "build_pairs",
    "ProbeResult",
    "disentanglement_probe",
    "DisentangledViews",
    "FeatureDistanceReport",
    "disentangle_views",
    "extract_feature",
    "extract_features",
    "feature_distance_report",
    "feature_transfer",
    "normalize_face",
    "normalize_faces",
    "reconstruct",
    "EvalReport",
    "MetricKind",
    "Provenance",
    "ReportRow",
    "format_reports",
    "load_reports",
    "save_report",
    "PROTOCOLS",
    "EvalContext",
    "evaluate",
    "get_protocol",
    "run_protocol",
]
