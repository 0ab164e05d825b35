"""Boundary-band suppression and per-organ uncertainty scores.

Disagreement in a thin shell around an organ surface mostly reflects
annotation variance, not distribution shift, so it is removed before
scoring: a band of roughly ``2 * radius`` voxels around each organ's
consensus surface is masked out and the remaining uncertainty in that
organ's channel is summed. The background channel never contributes.

Morphology uses the full 3x3x3 structuring element (one Chebyshev step per
iteration); everything outside the volume counts as background, so erosion
shrinks masks at the volume border.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import MetaMismatch, OrganIndexOutOfRange, ValidationError
from .heatmap import UncertaintyMap
from .volume import GridMeta, LabelVolume, OrganSet, _freeze

_STRUCT = np.ones((3, 3, 3), dtype=bool)
DEFAULT_BAND_RADIUS = 2


@dataclass(frozen=True)
class BinaryMask:
    """Single-channel boolean volume on a :class:`GridMeta` grid."""

    meta: GridMeta
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.meta.channels != 1:
            raise ValidationError("masks are single-channel")
        data = np.asarray(self.data)
        if data.dtype != bool:
            data = data.astype(bool)
        if data.shape != self.meta.grid_shape:
            raise ValidationError(
                f"mask shape {data.shape} != grid {self.meta.grid_shape}"
            )
        object.__setattr__(self, "data", _freeze(data))


@dataclass(frozen=True)
class ScoreVector:
    """Per-organ uncertainty score for one case, ordered like the OrganSet."""

    case_id: str
    organ_scores: np.ndarray = field(repr=True)

    def __post_init__(self):
        scores = np.asarray(self.organ_scores, dtype=np.float64)
        if scores.ndim != 1 or scores.size < 1:
            raise ValidationError("organ_scores must be a non-empty vector")
        if not np.all(np.isfinite(scores)):
            raise ValidationError(f"organ scores must be finite, got {scores}")
        if float(scores.min()) < 0.0:
            raise ValidationError(f"organ scores must be non-negative, got {scores}")
        object.__setattr__(self, "organ_scores", _freeze(scores))

    def __len__(self) -> int:
        return self.organ_scores.size


def _require_same_grid(a: GridMeta, b: GridMeta, context: str) -> None:
    if a.dims != b.dims:
        raise MetaMismatch(f"{context}: dims {a.dims} vs {b.dims}")
    if any(abs(x - y) > 1e-6 * max(abs(x), abs(y)) for x, y in zip(a.spacing, b.spacing)):
        raise MetaMismatch(f"{context}: spacing {a.spacing} vs {b.spacing}")


def binary_dilate(mask: BinaryMask, radius: int) -> BinaryMask:
    """Grow the mask by ``radius`` Chebyshev steps; radius 0 is the identity."""
    if radius < 0:
        raise ValidationError("radius must be non-negative")
    if radius == 0 or not mask.data.any():
        return mask
    grown = ndimage.binary_dilation(mask.data, structure=_STRUCT, iterations=radius)
    return BinaryMask(mask.meta, grown)


def binary_erode(mask: BinaryMask, radius: int) -> BinaryMask:
    """Shrink the mask by ``radius`` Chebyshev steps (dual of dilation with
    out-of-bounds voxels treated as background); radius 0 is the identity."""
    if radius < 0:
        raise ValidationError("radius must be non-negative")
    if radius == 0 or not mask.data.any():
        return mask
    shrunk = ndimage.binary_erosion(
        mask.data, structure=_STRUCT, iterations=radius, border_value=0
    )
    return BinaryMask(mask.meta, shrunk)


def boundary_band(mask: BinaryMask, radius: int) -> BinaryMask:
    """Symmetric shell around the mask surface: dilate(r) XOR erode(r)."""
    if radius < 1:
        raise ValidationError("band radius must be positive")
    outer = binary_dilate(mask, radius)
    inner = binary_erode(mask, radius)
    return BinaryMask(mask.meta, outer.data ^ inner.data)


def organ_mask(consensus: LabelVolume, organ_channel: int) -> BinaryMask:
    return BinaryMask(consensus.meta, consensus.data == organ_channel)


def suppress_and_score(
    umap: UncertaintyMap,
    consensus: LabelVolume,
    organs: OrganSet,
    radius: int = DEFAULT_BAND_RADIUS,
    case_id: str = "",
) -> ScoreVector:
    """Sum each organ channel's uncertainty outside that organ's boundary band.

    The band is computed from the consensus mask of the organ itself; other
    channels' bands are independent. Scores are raw voxel sums.
    """
    if radius < 1:
        raise ValidationError("band radius must be positive")
    _require_same_grid(umap.meta, consensus.meta, "heatmap vs consensus")
    if umap.meta.channels != organs.n_channels:
        raise MetaMismatch(
            f"heatmap has {umap.meta.channels} channels, organ set implies {organs.n_channels}"
        )
    if consensus.max_label() > organs.n_organs:
        raise OrganIndexOutOfRange(
            f"consensus labels reach {consensus.max_label()}, organ set has {organs.n_organs}"
        )
    scores = np.empty(organs.n_organs, dtype=np.float64)
    for m in range(1, organs.n_organs + 1):
        band = boundary_band(organ_mask(consensus, m), radius)
        scores[m - 1] = float(umap.data[m][~band.data].sum())
    return ScoreVector(case_id=case_id, organ_scores=scores)
