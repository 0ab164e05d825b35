"""Volumetric data types and consensus-fusion primitives.

Array convention
----------------
Multi-channel volumes are stored as ``(channels, z, y, x)`` C-order arrays and
single-channel label volumes as ``(z, y, x)``. ``GridMeta.dims`` is the voxel
count per axis in ``(x, y, z)`` order, so ``data.shape == (channels, nz, ny,
nx)``. Channel 0 is always background; organ channels are ``1..M`` in
:class:`OrganSet` order.

All types are immutable after construction (arrays are marked read-only) and
every operation here is a pure function, safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyEnsemble, MetaMismatch, ValidationError

PROB_SUM_ATOL = 1e-4
SPACING_RTOL = 1e-6


@dataclass(frozen=True)
class GridMeta:
    """Voxel grid geometry: counts per axis, mm spacing, channel count."""

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    channels: int

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        spacing = tuple(float(s) for s in self.spacing)
        if len(dims) != 3 or any(d < 1 for d in dims):
            raise ValidationError(f"dims must be three positive integers, got {self.dims}")
        if len(spacing) != 3 or any(s <= 0 for s in spacing):
            raise ValidationError(f"spacing must be three positive reals, got {self.spacing}")
        if self.channels < 1:
            raise ValidationError(f"channels must be >= 1, got {self.channels}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "channels", int(self.channels))

    @property
    def shape(self) -> tuple[int, int, int, int]:
        """Array shape ``(channels, nz, ny, nx)`` for multi-channel data."""
        nx, ny, nz = self.dims
        return (self.channels, nz, ny, nx)

    @property
    def grid_shape(self) -> tuple[int, int, int]:
        """Spatial shape ``(nz, ny, nx)``."""
        nx, ny, nz = self.dims
        return (nz, ny, nx)

    def n_voxels(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz


def check_compatible(a: GridMeta, b: GridMeta) -> str | None:
    """Return None if the two grids are interchangeable, else a description.

    Dims and channels must match exactly; spacing within 1e-6 relative.
    """
    if a.dims != b.dims:
        for axis, (da, db) in enumerate(zip(a.dims, b.dims), start=1):
            if da != db:
                return f"dims differ on axis {axis}: {da} vs {db}"
    for axis, (sa, sb) in enumerate(zip(a.spacing, b.spacing), start=1):
        if abs(sa - sb) > SPACING_RTOL * max(abs(sa), abs(sb)):
            return f"spacing differs on axis {axis}: {sa} vs {sb}"
    if a.channels != b.channels:
        return f"channels differ: {a.channels} vs {b.channels}"
    return None


def require_compatible(a: GridMeta, b: GridMeta, context: str = "") -> None:
    problem = check_compatible(a, b)
    if problem is not None:
        prefix = f"{context}: " if context else ""
        raise MetaMismatch(prefix + problem)


@dataclass(frozen=True)
class OrganSet:
    """Ordered foreground organ names; channel m holds ``names[m-1]``."""

    names: tuple[str, ...]

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        if not names:
            raise ValidationError("organ set needs at least one foreground organ")
        if any(not n for n in names):
            raise ValidationError("organ names must be non-empty")
        if "background" in names:
            raise ValidationError("'background' is reserved for channel 0")
        if len(set(names)) != len(names):
            raise ValidationError(f"organ names must be unique, got {names}")
        object.__setattr__(self, "names", names)

    @property
    def n_organs(self) -> int:
        return len(self.names)

    @property
    def n_channels(self) -> int:
        """Foreground organs plus the background channel."""
        return len(self.names) + 1

    def channel_of(self, name: str) -> int:
        return self.names.index(name) + 1


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ProbVolume:
    """One ensemble prediction: per-voxel class probabilities.

    ``data`` has shape ``meta.shape``; values lie in [0, 1] and sum to 1 per
    voxel within ``PROB_SUM_ATOL``. Violations are rejected on construction so
    malformed ensembles fail fast at load time.
    """

    meta: GridMeta
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.shape != self.meta.shape:
            raise ValidationError(
                f"probability data shape {data.shape} does not match meta shape {self.meta.shape}"
            )
        if not np.issubdtype(data.dtype, np.floating):
            data = data.astype(np.float32)
        lo, hi = float(data.min()), float(data.max())
        if lo < 0.0 or hi > 1.0:
            raise ValidationError(f"probabilities outside [0, 1]: min {lo}, max {hi}")
        sums = data.sum(axis=0, dtype=np.float64)
        worst = float(np.abs(sums - 1.0).max())
        if worst > PROB_SUM_ATOL:
            raise ValidationError(
                f"per-voxel channel sums deviate from 1 by up to {worst:.3g} "
                f"(tolerance {PROB_SUM_ATOL})"
            )
        object.__setattr__(self, "data", _freeze(data))


@dataclass(frozen=True)
class LabelVolume:
    """Per-voxel integer class labels, 0 = background."""

    meta: GridMeta
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.meta.channels != 1:
            raise ValidationError("label volumes are single-channel")
        data = np.asarray(self.data)
        if data.shape != self.meta.grid_shape:
            raise ValidationError(
                f"label data shape {data.shape} does not match grid {self.meta.grid_shape}"
            )
        if not np.issubdtype(data.dtype, np.integer):
            raise ValidationError(f"labels must be integers, got dtype {data.dtype}")
        if data.size and int(data.min()) < 0:
            raise ValidationError("labels must be non-negative")
        object.__setattr__(self, "data", _freeze(data))

    def max_label(self) -> int:
        return int(self.data.max()) if self.data.size else 0


def mean_prediction(preds: list[ProbVolume]) -> ProbVolume:
    """Voxelwise arithmetic mean of an ensemble, the consensus prediction.

    All predictions must share one grid. Permutation-invariant up to float
    rounding; a single-volume ensemble is returned value-identical.
    """
    preds = list(preds)
    if not preds:
        raise EmptyEnsemble("mean_prediction needs at least one prediction")
    meta = preds[0].meta
    for i, p in enumerate(preds[1:], start=1):
        require_compatible(meta, p.meta, f"prediction {i}")
    if len(preds) == 1:
        return preds[0]
    acc = np.zeros(meta.shape, dtype=np.float64)
    for p in preds:
        acc += p.data
    acc /= len(preds)
    # mean of valid probability fields can only tighten the sum invariant
    return ProbVolume(meta, np.clip(acc, 0.0, 1.0))


def argmax_labels(prob: ProbVolume) -> LabelVolume:
    """Consensus labels: per voxel the highest-probability channel.

    Ties resolve to the lowest channel index, so outputs are reproducible.
    """
    labels = np.argmax(prob.data, axis=0).astype(np.uint8 if prob.meta.channels <= 256 else np.int32)
    meta = GridMeta(prob.meta.dims, prob.meta.spacing, 1)
    return LabelVolume(meta, labels)
