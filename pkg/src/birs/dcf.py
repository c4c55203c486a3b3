"""Distribution- and correlation-free (DCF) two-sample mean test.

The statistic is the sup-norm of the difference of normalized column sums,

    T = max_j | S^X_j - sqrt(n/m) S^Y_j |,   S^X = n^{-1/2} sum_i X_i,

calibrated by a Gaussian multiplier bootstrap on the column-centered samples.
Bootstrap replicate ``b`` always draws its ``n + m`` multipliers from
``rng.substream(b)``, so the replicate values do not depend on evaluation
order or on the number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .model import TestOutcome, as_sample_matrix
from .rng import RngStream, as_rng

# Replicates are evaluated in blocks of this many rows. The block layout is
# fixed so that results are identical for every thread count.
BOOT_BLOCK = 64
# Column tile width for the multiplier products. Every BLAS call sees the same
# (rows, n+m, COL_TILE) shape, so a column's value does not depend on which
# other columns are present; a single wide GEMM picks width-dependent kernels
# and breaks the zeroed-vs-dropped column equivalence in the last bits.
COL_TILE = 128


def column_sums(M: np.ndarray) -> np.ndarray:
    """Column sums accumulated row by row.

    Each column's sum depends only on that column, so zeroing or dropping
    other columns leaves it bit-for-bit unchanged (``ndarray.sum(axis=0)``
    does not guarantee this).
    """
    acc = M[0].copy()
    for row in M[1:]:
        acc += row
    return acc


def normalized_sum(M) -> np.ndarray:
    """Column sums divided by ``sqrt(rows)``."""
    M = as_sample_matrix(M)
    return column_sums(M) / math.sqrt(M.shape[0])


def _check_pair(X, Y) -> tuple[np.ndarray, np.ndarray]:
    X = as_sample_matrix(X, "X")
    Y = as_sample_matrix(Y, "Y")
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: X has {X.shape[1]} columns, Y has {Y.shape[1]}")
    return X, Y


def column_statistics(X, Y) -> np.ndarray:
    """Per-column absolute differences ``|S^X_j - sqrt(n/m) S^Y_j|``.

    The DCF statistic over any column subset is the maximum of these values
    over the subset.
    """
    X, Y = _check_pair(X, Y)
    n, m = X.shape[0], Y.shape[0]
    return np.abs(normalized_sum(X) - math.sqrt(n / m) * normalized_sum(Y))


def dcf_statistic(X, Y) -> float:
    return float(column_statistics(X, Y).max())


def center_columns(M) -> np.ndarray:
    """Copy of ``M`` with column means removed. Requires at least two rows."""
    M = as_sample_matrix(M)
    if M.shape[0] < 2:
        raise ValueError("centering needs at least 2 rows")
    return M - column_sums(M) / M.shape[0]


@dataclass(frozen=True, eq=False)
class CenteredPair:
    """Column-centered samples, shared by all bootstrap replicates of a test.

    ``weights`` stacks ``xc / sqrt(n)`` over ``-sqrt(n/m) * yc / sqrt(m)`` so
    that a multiplier vector ``e`` of length ``n + m`` maps to the bootstrap
    difference vector as ``e @ weights``.
    """

    xc: np.ndarray
    yc: np.ndarray
    n: int
    m: int
    scale: float
    weights: np.ndarray

    @classmethod
    def from_samples(cls, X, Y) -> "CenteredPair":
        X, Y = _check_pair(X, Y)
        xc, yc = center_columns(X), center_columns(Y)
        n, m = X.shape[0], Y.shape[0]
        scale = math.sqrt(n / m)
        weights = np.vstack((xc / math.sqrt(n), yc * (-scale / math.sqrt(m))))
        return cls(xc, yc, n, m, scale, weights)

    @property
    def p(self) -> int:
        return self.xc.shape[1]


def bootstrap_replicate(cp: CenteredPair, e: Sequence[float]) -> float:
    """Sup-norm of ``S^{eX} - sqrt(n/m) S^{eY}`` for one multiplier vector."""
    e = np.asarray(e, dtype=np.float64)
    if e.shape != (cp.n + cp.m,):
        raise ValueError(f"multiplier vector must have length n+m={cp.n + cp.m}, got {e.shape}")
    return float(tiled_maxabs_product(e[None, :], cp.weights)[0])


def multiplier_block(rng: RngStream, start: int, stop: int, size: int) -> np.ndarray:
    """Rows ``start..stop-1`` of the multiplier matrix; row b from ``rng.substream(b)``."""
    out = np.empty((stop - start, size))
    for i, b in enumerate(range(start, stop)):
        out[i] = rng.substream(b).standard_normal(size)
    return out


def tiled_maxabs_product(E: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Row-wise ``max |E @ W|`` computed in fixed-width column tiles."""
    out = np.zeros(E.shape[0])
    p = W.shape[1]
    pad = None
    for j0 in range(0, p, COL_TILE):
        w = min(COL_TILE, p - j0)
        if w == COL_TILE:
            tile = W[:, j0:j0 + COL_TILE]
        else:
            if pad is None:
                pad = np.zeros((W.shape[0], COL_TILE))
            pad[:, :w] = W[:, j0:p]
            tile = pad
        np.maximum(out, np.abs(E @ tile).max(axis=1), out=out)
    return out


def _block_maxima(weights: np.ndarray, rng: RngStream, start: int, stop: int) -> np.ndarray:
    E = multiplier_block(rng, start, stop, weights.shape[0])
    return tiled_maxabs_product(E, weights)


def replicate_values(
    weights: np.ndarray, n_boot: int, rng: RngStream, threads: int = 1
) -> np.ndarray:
    """All ``n_boot`` bootstrap sup-norms for a ``(n+m, p)`` weight matrix."""
    if n_boot < 1:
        raise ValueError("n_boot must be >= 1")
    bounds = [(s, min(s + BOOT_BLOCK, n_boot)) for s in range(0, n_boot, BOOT_BLOCK)]
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda se: _block_maxima(weights, rng, *se), bounds))
    else:
        parts = [_block_maxima(weights, rng, s, e) for s, e in bounds]
    return np.concatenate(parts)


def bootstrap_replicates(
    cp: CenteredPair, n_boot: int, rng: RngStream, columns=None, threads: int = 1
) -> np.ndarray:
    """Bootstrap replicate values, optionally restricted to a column subset."""
    w = cp.weights if columns is None else cp.weights[:, columns]
    return replicate_values(w, n_boot, rng, threads)


def quantile_rank(n_boot: int, alpha: float) -> int:
    """1-based ascending rank ``ceil(n_boot * (1 - alpha))``, computed exactly."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if n_boot < 1:
        raise ValueError("n_boot must be >= 1")
    return max(1, math.ceil(n_boot * (1 - Fraction(alpha))))


def critical_value_from_replicates(replicates, alpha: float) -> float:
    """Order statistic of rank ``ceil(N(1 - alpha))`` among the replicates."""
    r = np.asarray(replicates, dtype=np.float64).ravel()
    k = quantile_rank(r.size, alpha)
    return float(np.partition(r, k - 1)[k - 1])


def bootstrap_critical_value(
    X, Y, alpha: float, n_boot: int, rng, threads: int = 1
) -> float:
    quantile_rank(n_boot, alpha)  # validate before doing any work
    cp = CenteredPair.from_samples(X, Y)
    reps = bootstrap_replicates(cp, n_boot, as_rng(rng), threads=threads)
    return critical_value_from_replicates(reps, alpha)


def dcf_test(X, Y, alpha: float = 0.05, n_boot: int = 1000, rng=0, threads: int = 1) -> TestOutcome:
    """Two-sample test of equal mean vectors; rejects when ``T > c_B(alpha)``."""
    stat = dcf_statistic(X, Y)
    crit = bootstrap_critical_value(X, Y, alpha, n_boot, rng, threads=threads)
    return TestOutcome(statistic=stat, critical=crit, n_boot=n_boot, alpha=alpha)
