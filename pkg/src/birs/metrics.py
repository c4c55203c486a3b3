"""Detection accuracy measures and the BiRS test-count bound."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .model import Region, region_intersection_size, region_union_size


def jaccard(a: Sequence[Region], b: Sequence[Region]) -> float:
    """Intersection over union of the column sets covered by ``a`` and ``b``.

    Two empty sets have similarity 1.
    """
    union = region_union_size(list(a) + list(b))
    if union == 0:
        return 1.0
    return region_intersection_size(a, b) / union


@dataclass(frozen=True)
class EvalReport:
    tpr: float
    fdp: float
    per_region_jaccard: tuple[tuple[Region, float], ...]
    n_detected_points: int

    @property
    def false_detection(self) -> bool:
        """Whether any detected column lies outside the true regions."""
        return self.fdp > 0


def eval_detection(detected: Sequence[Region], truth: Sequence[Region], p: int) -> EvalReport:
    """Point-wise accuracy of ``detected`` against ``truth``.

    ``tpr = |D & T| / |T|`` (1 when there is no truth to find) and
    ``fdp = |D - T| / max(|D|, 1)``. Each true region is also matched to the
    detected region with the highest Jaccard index.
    """
    for r in list(detected) + list(truth):
        r.check_within(p)
    n_det = region_union_size(detected)
    n_true = region_union_size(truth)
    hit = region_intersection_size(detected, truth)
    tpr = hit / n_true if n_true else 1.0
    fdp = (n_det - hit) / max(n_det, 1)
    per_region = tuple(
        (t, max((jaccard([t], [d]) for d in detected), default=0.0)) for t in truth
    )
    return EvalReport(tpr=tpr, fdp=fdp, per_region_jaccard=per_region, n_detected_points=n_det)


def prop1_bound(p: int, s: int, m: int) -> int:
    """Upper bound on tests used by BiRS after ``m`` re-search rounds.

    ``ceil((m + 1) * (p / 2**(s-1) + log2(p) - s))``.
    """
    if s < 0 or 2 ** s >= p:
        raise ValueError(f"need 0 <= s and 2**s < p (got s={s}, p={p})")
    if m < 0:
        raise ValueError("m must be nonnegative")
    return math.ceil((m + 1) * (p / 2 ** (s - 1) + math.log2(p) - s))
