"""Binary and re-search (BiRS) signal region detection.

The search runs a global DCF test. If it rejects, the column range is halved
level by level. All segments alive at one depth share a single bootstrap
critical value computed over the concatenation of their columns. A segment
whose statistic exceeds that value is split further, or accepted once its
length is at most ``2**trunc_s``. Accepted columns are then removed and the
whole procedure repeats until the global test stops rejecting. Accepted
segments are finally merged into maximal contiguous regions.

Randomness layout: round ``r`` uses ``rng.substream(r)``; inside a round the
global test uses substream 0 and depth ``j`` uses substream ``j``. Bootstrap
replicate ``b`` of any test uses a further ``substream(b)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dcf import CenteredPair, column_statistics, critical_value_from_replicates, quantile_rank, replicate_values
from .model import DetectedSegment, DetectionResult, Region, as_sample_matrix, regions_to_mask
from .rng import RngStream, as_rng

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BirsConfig:
    """Tuning parameters for :func:`birs_detect`.

    Parameters
    ----------
    alpha : float
        Level of every test in the procedure.
    trunc_s : int
        Truncation parameter; segments of length ``<= 2**trunc_s`` are not split.
    n_boot : int
        Multiplier bootstrap replicates per critical value.
    max_rounds : int
        Cap on the number of binary-search rounds (initial search included).
    """

    alpha: float = 0.05
    trunc_s: int = 6
    n_boot: int = 1000
    max_rounds: int = 32

    def __post_init__(self):
        quantile_rank(self.n_boot, self.alpha)
        if self.trunc_s < 0:
            raise ValueError("trunc_s must be nonnegative")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")

    def check_dimension(self, p: int) -> None:
        if 2 ** self.trunc_s >= p:
            raise ValueError(f"2**trunc_s = {2 ** self.trunc_s} must be smaller than p = {p}")


def split_region(r: Region) -> tuple[Region, Region]:
    """Halve ``r``; the left part gets ``floor(length / 2)`` columns."""
    if r.length < 2:
        raise ValueError(f"cannot split {r}: length < 2")
    mid = r.start + r.length // 2
    return Region(r.start, mid), Region(mid, r.end)


def zero_out(M, regions) -> np.ndarray:
    """Copy of ``M`` with every column inside ``regions`` set to zero."""
    M = as_sample_matrix(M)
    mask = regions_to_mask(regions, M.shape[1])
    out = M.copy()
    out[:, mask] = 0.0
    return out


def rearrange(segments) -> list[Region]:
    """Merge neighbouring detected segments into maximal contiguous regions.

    Accepts :class:`DetectedSegment` or bare :class:`Region` items. Overlapping
    inputs indicate a bug upstream and raise ``ValueError``.
    """
    regions = sorted(s.region if isinstance(s, DetectedSegment) else s for s in segments)
    out: list[Region] = []
    for r in regions:
        if out and r.start < out[-1].end:
            raise ValueError(f"overlapping segments {out[-1]} and {r}")
        if out and r.start == out[-1].end:
            out[-1] = Region(out[-1].start, r.end)
        else:
            out.append(r)
    return out


class _Workspace:
    """Working copy of the two samples across re-search rounds.

    Removed columns are either kept as zero columns (``drop=False``) or
    physically dropped, with ``live`` mapping working columns back to the
    original index space. Both give identical statistics and replicates.
    """

    def __init__(self, X: np.ndarray, Y: np.ndarray, drop: bool):
        self.X, self.Y = X, Y
        self.p = X.shape[1]
        self.drop = drop
        self.live = np.arange(self.p)

    def columns(self, r: Region) -> slice:
        if not self.drop:
            return slice(r.start, r.end)
        lo, hi = np.searchsorted(self.live, [r.start, r.end])
        return slice(int(lo), int(hi))

    def remove(self, regions) -> None:
        if self.drop:
            keep = ~regions_to_mask(regions, self.p)[self.live]
            self.X, self.Y = self.X[:, keep], self.Y[:, keep]
            self.live = self.live[keep]
        else:
            self.X, self.Y = zero_out(self.X, regions), zero_out(self.Y, regions)

    def prepare(self) -> tuple[CenteredPair, np.ndarray]:
        if self.X.shape[1] == 0:
            n, m = self.X.shape[0], self.Y.shape[0]
            empty = np.empty((n + m, 0))
            cp = CenteredPair(self.X, self.Y, n, m, float(np.sqrt(n / m)), empty)
            return cp, np.empty(0)
        return CenteredPair.from_samples(self.X, self.Y), column_statistics(self.X, self.Y)


def _segment_stat(stats: np.ndarray, cols: slice) -> float:
    return float(stats[cols].max()) if cols.stop > cols.start else 0.0


def _binary_search(ws, cp, stats, cfg, rng, round_index, threads):
    """One round of level-by-level binary segmentation; returns (segments, tests, critical values)."""
    limit = 2 ** cfg.trunc_s
    active = list(split_region(Region(0, ws.p)))
    depth = 1
    tests = 0
    n_crit = 0
    found: list[DetectedSegment] = []
    while active:
        cols = [ws.columns(r) for r in active]
        seg_stats = [_segment_stat(stats, c) for c in cols]
        w = np.concatenate([cp.weights[:, c] for c in cols], axis=1)
        reps = replicate_values(w, cfg.n_boot, rng.substream(depth), threads)
        crit = critical_value_from_replicates(reps, cfg.alpha)
        tests += len(active) + 1
        n_crit += 1
        nxt: list[Region] = []
        for r, t in zip(active, seg_stats):
            if t > crit:
                if r.length > limit:
                    nxt.extend(split_region(r))
                else:
                    found.append(DetectedSegment(r, round_index, depth, t))
        active = nxt
        depth += 1
    return found, tests, n_crit


def binary_search_round(X, Y, cfg: BirsConfig, rng, threads: int = 1, round_index: int = 0):
    """One binary-search pass over ``(X, Y)``.

    The caller is expected to have rejected the global test already. Returns
    ``(segments, tests)`` where ``tests`` counts every per-segment statistic
    plus one per bootstrap critical value.
    """
    X = as_sample_matrix(X, "X")
    Y = as_sample_matrix(Y, "Y")
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: X has {X.shape[1]} columns, Y has {Y.shape[1]}")
    cfg.check_dimension(X.shape[1])
    ws = _Workspace(X, Y, drop=False)
    cp, stats = ws.prepare()
    found, tests, _ = _binary_search(ws, cp, stats, cfg, as_rng(rng), round_index, threads)
    return found, tests


def birs_detect(
    X, Y, cfg: BirsConfig | None = None, rng: RngStream | int = 0, threads: int = 1, strategy: str = "drop"
) -> DetectionResult:
    """Detect signal regions where the column means of ``X`` and ``Y`` differ.

    ``strategy`` selects how detected columns are removed before re-search:
    ``"drop"`` removes them physically, ``"zero"`` substitutes zeros. The two
    produce identical results; dropping is cheaper in later rounds.
    """
    if cfg is None:
        cfg = BirsConfig()
    if strategy not in ("drop", "zero"):
        raise ValueError(f"unknown strategy {strategy!r}")
    X = as_sample_matrix(X, "X")
    Y = as_sample_matrix(Y, "Y")
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: X has {X.shape[1]} columns, Y has {Y.shape[1]}")
    cfg.check_dimension(X.shape[1])
    rng = as_rng(rng)

    ws = _Workspace(X, Y, drop=strategy == "drop")
    segments: list[DetectedSegment] = []
    tests = rounds = n_crit = 0
    capped = False
    while True:
        round_rng = rng.substream(rounds)
        cp, stats = ws.prepare()
        stat = float(stats.max()) if stats.size else 0.0
        reps = replicate_values(cp.weights, cfg.n_boot, round_rng.substream(0), threads)
        crit = critical_value_from_replicates(reps, cfg.alpha)
        tests += 1
        n_crit += 1
        if not stat > crit:
            break
        if rounds >= cfg.max_rounds:
            capped = True
            log.info("re-search stopped at max_rounds=%d with the global test still rejecting", cfg.max_rounds)
            break
        found, t, c = _binary_search(ws, cp, stats, cfg, round_rng, rounds, threads)
        tests += t
        n_crit += c
        rounds += 1
        if not found:
            log.info("round %d: global test rejected but no segment was accepted; stopping", rounds - 1)
            break
        segments.extend(found)
        ws.remove([s.region for s in found])

    segments.sort(key=lambda s: s.region)
    return DetectionResult(
        regions=tuple(rearrange(segments)),
        segments=tuple(segments),
        tests_performed=tests,
        rounds_used=rounds,
        capped=capped,
        bootstrap_tests=n_crit,
        method="birs",
    )
