"""Fixed-window scan detector built on the DCF statistic.

Every window ``[t, t + L)`` of every prespecified length is tested against
one common threshold: the bootstrap ``1 - alpha`` quantile of the largest
window statistic. Windows are evaluated one by one, as a generic scan would
for a statistic that does not decompose over columns, so the work grows with
the number of windows. This is the baseline BiRS is compared against.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .dcf import BOOT_BLOCK, CenteredPair, column_statistics, critical_value_from_replicates, multiplier_block, quantile_rank
from .model import DetectedSegment, DetectionResult, Region, as_sample_matrix, merge_regions
from .rng import RngStream, as_rng


@dataclass(frozen=True)
class ScanConfig:
    window_lengths: tuple[int, ...]
    alpha: float = 0.05
    n_boot: int = 1000

    def __post_init__(self):
        w = tuple(int(L) for L in self.window_lengths)
        if not w:
            raise ValueError("at least one window length is required")
        if any(L < 1 for L in w):
            raise ValueError("window lengths must be positive")
        if any(a <= b for a, b in zip(w, w[1:])):
            raise ValueError(f"window lengths must be strictly decreasing, got {w}")
        quantile_rank(self.n_boot, self.alpha)
        object.__setattr__(self, "window_lengths", w)


def window_count(p: int, windows) -> int:
    """Number of unit-stride windows fully inside ``[0, p)``."""
    return sum(p - L + 1 for L in windows)


def window_statistics(col_stats: np.ndarray, L: int) -> np.ndarray:
    """DCF statistic of each window of length ``L`` (max over its columns)."""
    return sliding_window_view(col_stats, L, axis=-1).max(axis=-1)


def _block_scan_maxima(cp, windows, rng, start, stop):
    E = multiplier_block(rng, start, stop, cp.n + cp.m)
    R = np.abs(E @ cp.weights)
    out = np.zeros(stop - start)
    for L in windows:
        np.maximum(out, window_statistics(R, L).max(axis=1), out=out)
    return out


def scan_detect(X, Y, cfg: ScanConfig, rng: RngStream | int = 0, threads: int = 1) -> DetectionResult:
    """Scan all windows and select significant, non-overlapping ones.

    Windows above the threshold are taken greedily by decreasing statistic.
    Window statistics are maxima, so many windows tie; ties go to the window
    with the larger column-statistic sum, then the leftmost, then the longest.
    Adjacent selections are merged. ``tests_performed`` counts window
    statistics; ``bootstrap_tests`` reports the single threshold computation.
    """
    X = as_sample_matrix(X, "X")
    Y = as_sample_matrix(Y, "Y")
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: X has {X.shape[1]} columns, Y has {Y.shape[1]}")
    p = X.shape[1]
    if cfg.window_lengths[0] > p:
        raise ValueError(f"window length {cfg.window_lengths[0]} exceeds p={p}")
    rng = as_rng(rng)

    d = column_statistics(X, Y)
    csum = np.concatenate(([0.0], np.cumsum(d)))
    stats, sums, starts, lengths = [], [], [], []
    for L in cfg.window_lengths:
        stats.append(window_statistics(d, L))
        t = np.arange(p - L + 1)
        sums.append(csum[t + L] - csum[t])
        starts.append(t)
        lengths.append(np.full(t.size, L))
    stats = np.concatenate(stats)
    sums = np.concatenate(sums)
    starts = np.concatenate(starts)
    lengths = np.concatenate(lengths)
    tests = int(stats.size)

    cp = CenteredPair.from_samples(X, Y)
    bounds = [(s, min(s + BOOT_BLOCK, cfg.n_boot)) for s in range(0, cfg.n_boot, BOOT_BLOCK)]
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda se: _block_scan_maxima(cp, cfg.window_lengths, rng, *se), bounds))
    else:
        parts = [_block_scan_maxima(cp, cfg.window_lengths, rng, s, e) for s, e in bounds]
    threshold = critical_value_from_replicates(np.concatenate(parts), cfg.alpha)

    sig = np.flatnonzero(stats > threshold)
    order = sig[np.lexsort((-lengths[sig], starts[sig], -sums[sig], -stats[sig]))]
    taken = np.zeros(p, dtype=bool)
    chosen: list[DetectedSegment] = []
    for k in order:
        a, b = int(starts[k]), int(starts[k] + lengths[k])
        if taken[a:b].any():
            continue
        taken[a:b] = True
        chosen.append(DetectedSegment(Region(a, b), 0, 0, float(stats[k])))
    chosen.sort(key=lambda s: s.region)
    return DetectionResult(
        regions=tuple(merge_regions(s.region for s in chosen)),
        segments=tuple(chosen),
        tests_performed=tests,
        rounds_used=0,
        bootstrap_tests=1,
        method="scan",
    )
