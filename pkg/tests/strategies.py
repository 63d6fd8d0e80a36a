"""Reusable Hypothesis strategies for fanet property-based tests."""

from dataclasses import dataclass

import numpy as np
from hypothesis import strategies as st
from hypothesis.strategies import DrawFn

# ---------------------------------------------------------------------------
# Scores and distances
# ---------------------------------------------------------------------------

#: Values on a coarse grid so that ties are common.
GRID_VALUES = st.integers(min_value=0, max_value=40).map(lambda step: step / 20.0)


@dataclass(frozen=True)
class VerificationInstance:
    distances: np.ndarray
    same: np.ndarray
    folds: int


@st.composite
def verification_instances(draw: DrawFn, *, max_folds: int = 6) -> VerificationInstance:
    """Pair distances with alternating genuine/impostor labels.

    Alternating labels and at least two pairs per fold mean every contiguous
    held-out fold holds both classes.
    """
    folds = draw(st.integers(min_value=2, max_value=max_folds))
    n_pairs = draw(st.integers(min_value=2 * folds, max_value=2 * folds + 24))
    distances = draw(st.lists(GRID_VALUES, min_size=n_pairs, max_size=n_pairs))
    same = np.arange(n_pairs) % 2 == 0
    return VerificationInstance(np.array(distances), same, folds)


@st.composite
def score_sets(draw: DrawFn) -> tuple[np.ndarray, np.ndarray]:
    """Non-empty genuine and impostor similarity scores."""
    genuine = draw(st.lists(GRID_VALUES, min_size=1, max_size=30))
    impostor = draw(st.lists(GRID_VALUES, min_size=1, max_size=30))
    return np.array(genuine), np.array(impostor)


# ---------------------------------------------------------------------------
# Identification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IdentificationInstance:
    """One-hot gallery directions and non-negative integer probes.

    Each gallery row points along its own axis, so a probe's nearest gallery entry is
    its largest component, the first one on ties.
    """

    gallery: np.ndarray
    gallery_ids: np.ndarray
    probes: np.ndarray
    probe_ids: np.ndarray
    resolutions: np.ndarray


@st.composite
def identification_instances(draw: DrawFn) -> IdentificationInstance:
    n_gallery = draw(st.integers(min_value=1, max_value=8))
    n_probes = draw(st.integers(min_value=1, max_value=20))
    scales = draw(
        st.lists(
            st.floats(min_value=0.1, max_value=10.0), min_size=n_gallery, max_size=n_gallery
        )
    )
    gallery_ids = draw(st.permutations(range(100, 100 + n_gallery)))
    probes = draw(
        st.lists(
            st.lists(st.integers(min_value=0, max_value=9), min_size=n_gallery, max_size=n_gallery),
            min_size=n_probes,
            max_size=n_probes,
        )
    )
    probe_ids = draw(
        st.lists(st.sampled_from(gallery_ids), min_size=n_probes, max_size=n_probes)
    )
    resolutions = draw(
        st.lists(st.integers(min_value=8, max_value=32), min_size=n_probes, max_size=n_probes)
    )
    return IdentificationInstance(
        gallery=np.diag(scales),
        gallery_ids=np.array(gallery_ids),
        probes=np.array(probes, dtype=np.float64),
        probe_ids=np.array(probe_ids),
        resolutions=np.array(resolutions),
    )


# ---------------------------------------------------------------------------
# Images
# ---------------------------------------------------------------------------


@st.composite
def pixel_arrays(draw: DrawFn, *, min_side: int = 1, max_side: int = 12) -> np.ndarray:
    side = draw(st.integers(min_value=min_side, max_value=max_side))
    values = draw(
        st.lists(
            st.floats(min_value=-1.0, max_value=1.0, allow_nan=False),
            min_size=side * side,
            max_size=side * side,
        )
    )
    return np.array(values).reshape(side, side, 1)
