"""Core value types: regions, test outcomes and detection results.

Sample matrices are plain 2-D ``float64`` numpy arrays (rows are subjects,
columns are features); :func:`as_sample_matrix` validates and converts them.
All column intervals are 0-based and half-open.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


def as_sample_matrix(values, name: str = "matrix") -> np.ndarray:
    """Return ``values`` as a finite 2-D float64 array (no copy if possible)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D (rows=subjects, cols=features), got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and one column, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains NaN or infinite values")
    return arr


@dataclass(frozen=True, order=True)
class Region:
    """Half-open column interval ``[start, end)``."""

    start: int
    end: int

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ValueError(f"invalid region [{self.start}, {self.end})")

    @property
    def length(self) -> int:
        return self.end - self.start

    def check_within(self, p: int) -> None:
        if self.end > p:
            raise ValueError(f"region [{self.start}, {self.end}) exceeds dimension p={p}")

    def as_slice(self) -> slice:
        return slice(self.start, self.end)

    def __repr__(self):
        return f"Region({self.start}, {self.end})"


def merge_regions(regions: Iterable[Region]) -> list[Region]:
    """Sorted union of ``regions`` with overlapping or touching intervals fused."""
    out: list[Region] = []
    for r in sorted(regions):
        if out and r.start <= out[-1].end:
            if r.end > out[-1].end:
                out[-1] = Region(out[-1].start, r.end)
        else:
            out.append(r)
    return out


def region_union_size(regions: Iterable[Region]) -> int:
    """Number of distinct column indices covered by ``regions``."""
    return sum(r.length for r in merge_regions(regions))


def region_intersection_size(a: Iterable[Region], b: Iterable[Region]) -> int:
    """Number of column indices covered by both region sets."""
    ma, mb = merge_regions(a), merge_regions(b)
    i = j = total = 0
    while i < len(ma) and j < len(mb):
        lo = max(ma[i].start, mb[j].start)
        hi = min(ma[i].end, mb[j].end)
        if hi > lo:
            total += hi - lo
        if ma[i].end < mb[j].end:
            i += 1
        else:
            j += 1
    return total


@dataclass(frozen=True)
class TestOutcome:
    """Result of one two-sample DCF test."""

    __test__ = False  # keep pytest from collecting this class

    statistic: float
    critical: float
    n_boot: int
    alpha: float

    @property
    def reject(self) -> bool:
        return self.statistic > self.critical


@dataclass(frozen=True)
class DetectedSegment:
    """A terminal segment accepted by the binary search.

    ``round`` is the re-search index (0 for the initial search) and ``depth``
    the number of ancestral splits at acceptance.
    """

    region: Region
    round: int
    depth: int
    statistic: float


@dataclass(frozen=True)
class DetectionResult:
    regions: tuple[Region, ...]
    segments: tuple[DetectedSegment, ...]
    tests_performed: int
    rounds_used: int
    # True when re-search stopped because max_rounds was reached while the
    # global test still rejected
    capped: bool = False
    # bootstrap critical values computed (reported separately for scan)
    bootstrap_tests: int = 0
    method: str = "birs"

    def __post_init__(self):
        regions = tuple(self.regions)
        for a, b in zip(regions, regions[1:]):
            if not a.end < b.start:
                raise ValueError(f"result regions must be sorted and separated: {a} then {b}")
        object.__setattr__(self, "regions", regions)
        object.__setattr__(self, "segments", tuple(self.segments))

    @property
    def n_detected_points(self) -> int:
        return sum(r.length for r in self.regions)

    @classmethod
    def empty(cls, tests_performed: int, method: str = "birs", bootstrap_tests: int = 0):
        return cls((), (), tests_performed, 0, bootstrap_tests=bootstrap_tests, method=method)


def regions_from_mask(mask: Sequence[bool]) -> list[Region]:
    """Maximal runs of True in a boolean column mask."""
    m = np.asarray(mask, dtype=bool)
    if m.size == 0:
        return []
    d = np.diff(np.concatenate(([0], m.astype(np.int8), [0])))
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1)
    return [Region(int(s), int(e)) for s, e in zip(starts, ends)]


def regions_to_mask(regions: Iterable[Region], p: int) -> np.ndarray:
    mask = np.zeros(p, dtype=bool)
    for r in regions:
        r.check_within(p)
        mask[r.start:r.end] = True
    return mask


__all__ = [
    "DetectedSegment",
    "DetectionResult",
    "Region",
    "TestOutcome",
    "as_sample_matrix",
    "merge_regions",
    "region_intersection_size",
    "region_union_size",
    "regions_from_mask",
    "regions_to_mask",
]
