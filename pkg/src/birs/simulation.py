"""Synthetic two-sample designs and the Monte Carlo experiment runner.

Covariance structures
---------------------
``m_dep``         ``(1 + |j-k|)^(-1/4)`` for ``|j-k| <= M``, else 0
``weak``          ``theta^|j-k|`` (AR(1) correlation)
``genetic_band``  ``theta^|j-k|`` for ``|j-k| <= M``, else 0

Designs bundle a covariance kind with equal (``Sigma_X = Sigma_Y``) or unequal
(``Sigma_X = 2 Sigma_Y``) covariances; the ``genetic`` design additionally maps
every entry through :func:`genotype_transform`.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import linalg, signal

from .detect import BirsConfig, birs_detect
from .metrics import eval_detection
from .model import DetectionResult, Region
from .rng import RngStream, as_rng
from .scan import ScanConfig, scan_detect

log = logging.getLogger(__name__)

FULL_SCALE_LENGTHS = (128, 160, 192, 224, 256, 288, 320)
FULL_SCALE_P = 8192

DESIGNS = {
    # name: (covariance kind, scale of Sigma_X, signal mode)
    "mdep-equal": ("m_dep", 1.0, "normal"),
    "mdep-unequal": ("m_dep", 2.0, "normal"),
    "weak-equal": ("weak", 1.0, "normal"),
    "weak-unequal": ("weak", 2.0, "normal"),
    "genetic": ("genetic_band", 1.0, "genetic"),
}


@dataclass(frozen=True)
class CovarianceSpec:
    kind: str
    p: int
    M: int = 64
    theta: float = 0.9
    exponent: float = 0.25
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("m_dep", "weak", "genetic_band"):
            raise ValueError(f"unknown covariance kind {self.kind!r}")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    def autocorrelation(self, lags: np.ndarray) -> np.ndarray:
        lags = np.abs(np.asarray(lags))
        if self.kind == "m_dep":
            return (1.0 + lags) ** (-self.exponent) * (lags <= self.M)
        if self.kind == "weak":
            return self.theta ** lags
        return self.theta ** lags * (lags <= self.M)

    def dense(self) -> np.ndarray:
        """The full ``p x p`` covariance matrix (small ``p`` only)."""
        idx = np.arange(self.p)
        return self.scale * self.autocorrelation(idx[:, None] - idx[None, :])


@dataclass(frozen=True, eq=False)
class CovarianceFactor:
    """Lower-triangular ``F`` with ``F @ F.T == Sigma``.

    Banded kinds store ``F`` in LAPACK lower band form (``band[d, j] =
    F[j + d, j]``). The ``weak`` kind uses the closed-form AR(1) Cholesky
    factor and applies it as a first-order recursive filter.

    ``adjustment`` records how the target matrix had to be repaired:
    ``"none"``, ``"jitter"`` (``1e-8`` added to the diagonal) or ``"block"``
    (the truncated matrix is indefinite; see :func:`build_covariance`).
    """

    spec: CovarianceSpec
    band: np.ndarray | None
    adjustment: str = "none"

    @property
    def p(self) -> int:
        return self.spec.p

    def apply(self, Z: np.ndarray) -> np.ndarray:
        """Rows of ``Z`` mapped to ``F @ z`` (i.e. ``Z @ F.T``)."""
        Z = np.asarray(Z, dtype=np.float64)
        root = math.sqrt(self.spec.scale)
        if self.band is None:
            theta = self.spec.theta
            U = Z * math.sqrt(1.0 - theta ** 2)
            U[:, 0] = Z[:, 0]
            out = signal.lfilter([1.0], [1.0, -theta], U, axis=1)
        else:
            out = np.empty_like(Z)
            for r0, r1, c0, panel in self._panels:
                np.matmul(Z[:, c0:r1], panel.T, out=out[:, r0:r1])
        return out * root if root != 1.0 else out

    @cached_property
    def _panels(self):
        # dense row blocks of the band: rows [r0, r1) only touch columns [c0, r1)
        p, bw = self.p, self.band.shape[0] - 1
        block = max(128, 2 * bw)
        panels = []
        for r0 in range(0, p, block):
            r1 = min(p, r0 + block)
            c0 = max(0, r0 - bw)
            panel = np.zeros((r1 - r0, r1 - c0))
            for d in range(bw + 1):
                cols = np.arange(max(c0, r0 - d), r1 - d)
                panel[cols + d - r0, cols - c0] = self.band[d, cols]
            panels.append((r0, r1, c0, panel))
        return panels

    def dense(self) -> np.ndarray:
        """Explicit ``p x p`` factor (small ``p`` only)."""
        return self.apply(np.eye(self.p)).T

    def with_scale(self, scale: float) -> "CovarianceFactor":
        return CovarianceFactor(replace(self.spec, scale=scale), self.band, self.adjustment)


def _band_form(spec: CovarianceSpec) -> np.ndarray:
    bw = min(spec.M, spec.p - 1)
    ab = np.zeros((bw + 1, spec.p))
    for d in range(bw + 1):
        ab[d, : spec.p - d] = spec.autocorrelation(np.array(d))
    return ab


def _block_band(spec: CovarianceSpec) -> np.ndarray:
    # M-dependent realization: independent blocks of M consecutive columns, each
    # carrying the exact target entries within the block
    bw = min(spec.M, spec.p) - 1
    band = np.zeros((bw + 1, spec.p))
    for b0 in range(0, spec.p, spec.M):
        size = min(spec.M, spec.p - b0)
        lags = np.arange(size)
        block = spec.autocorrelation(lags[:, None] - lags[None, :])
        F = linalg.cholesky(block, lower=True)
        for d in range(size):
            band[d, b0 : b0 + size - d] = np.diagonal(F, -d)
    return band


def build_covariance(spec: CovarianceSpec) -> CovarianceFactor:
    """Factor the covariance described by ``spec``.

    Banded kinds use a banded Cholesky. If that fails the diagonal is loaded
    with ``1e-8``. The hard-truncated ``m_dep`` matrix is indefinite once
    ``p`` is more than about ``2M`` (its smallest eigenvalue is near -4 at
    ``p = 1024``), which no small jitter repairs; in that case the factor
    falls back to independent ``M``-column blocks that reproduce the target
    entries inside each block and stay ``M``-dependent. The chosen repair is
    recorded in ``adjustment`` and logged.
    """
    if spec.kind == "weak":
        if not 0 <= spec.theta < 1:
            raise ValueError("weak dependence needs 0 <= theta < 1")
        return CovarianceFactor(spec, None)
    ab = _band_form(spec)
    try:
        return CovarianceFactor(spec, linalg.cholesky_banded(ab, lower=True))
    except linalg.LinAlgError:
        pass
    jittered = ab.copy()
    jittered[0] += 1e-8
    try:
        band = linalg.cholesky_banded(jittered, lower=True)
        log.warning("%s covariance (p=%d) needed 1e-8 diagonal jitter", spec.kind, spec.p)
        return CovarianceFactor(spec, band, "jitter")
    except linalg.LinAlgError:
        pass
    log.info("%s covariance (p=%d) is indefinite; using %d-column independent blocks", spec.kind, spec.p, spec.M)
    try:
        return CovarianceFactor(spec, _block_band(spec), "block")
    except linalg.LinAlgError as exc:
        raise ValueError(f"cannot factor {spec.kind} covariance for p={spec.p}") from exc


def sample_mvn(rng: RngStream, n: int, mean, factor) -> np.ndarray:
    """``n`` rows of ``mean + F z`` with ``z`` standard normal.

    ``factor`` is a :class:`CovarianceFactor` or an explicit ``p x p`` array.
    """
    mean = np.asarray(mean, dtype=np.float64)
    p = mean.shape[0]
    Z = rng.standard_normal((n, p))
    if isinstance(factor, CovarianceFactor):
        if factor.p != p:
            raise ValueError(f"factor has dimension {factor.p}, mean has {p}")
        out = factor.apply(Z)
    else:
        F = np.asarray(factor, dtype=np.float64)
        if F.shape != (p, p):
            raise ValueError(f"factor must be {p}x{p}, got {F.shape}")
        out = Z @ F.T
    out += mean
    return out


def genotype_transform(M) -> np.ndarray:
    """Entrywise ``1{1.5 < x <= 3} + 2 * 1{x > 3}``."""
    M = np.asarray(M, dtype=np.float64)
    return np.where(M > 3.0, 2.0, np.where(M > 1.5, 1.0, 0.0))


@dataclass(frozen=True)
class SignalLayout:
    """True signal regions over ``p`` columns.

    ``deltas`` optionally holds one strong-signal bound per region (used by
    :func:`inject_signals` when no explicit ``delta`` is given).
    """

    regions: tuple[Region, ...]
    p: int
    mode: str = "normal"
    deltas: tuple[float, ...] = ()

    def __post_init__(self):
        if self.mode not in ("normal", "genetic"):
            raise ValueError(f"unknown signal mode {self.mode!r}")
        for r in self.regions:
            r.check_within(self.p)
        if self.deltas and len(self.deltas) != len(self.regions):
            raise ValueError("need one delta per region")
        rs = sorted(self.regions)
        for a, b in zip(rs, rs[1:]):
            if not a.end < b.start:
                raise ValueError("layout regions must be disjoint and separated")


def scaled_lengths(p: int) -> tuple[int, ...]:
    """Candidate region lengths: the full set when ``p >= 8 * 320``, else scaled by ``p / 8192``."""
    if p >= 8 * max(FULL_SCALE_LENGTHS):
        return FULL_SCALE_LENGTHS
    f = p / FULL_SCALE_P
    return tuple(max(1, round(L * f)) for L in FULL_SCALE_LENGTHS)


def default_trunc_s(p: int) -> int:
    """6 for ``p >= 4096``; below that ``2**s / p`` is kept at its ``p = 8192`` value."""
    if p >= 4096:
        return 6
    return max(0, 6 - math.ceil(math.log2(FULL_SCALE_P / p)))


def generate_signal_layout(
    rng: RngStream, beta: int, p: int, lengths: Sequence[int] | None = None, mode: str = "normal"
) -> SignalLayout:
    """Place ``beta`` regions at ``(2i - 1) p / 8`` with lengths drawn without replacement."""
    if not 1 <= beta <= 4:
        raise ValueError(f"beta must be in 1..4, got {beta}")
    if p % 8:
        raise ValueError(f"p must be divisible by 8, got {p}")
    lengths = scaled_lengths(p) if lengths is None else tuple(lengths)
    if len(lengths) < 4:
        raise ValueError("need at least 4 candidate lengths")
    if max(lengths) > p // 4:
        raise ValueError(f"region lengths up to {max(lengths)} do not fit p={p}")
    chosen = rng.generator.choice(np.asarray(lengths), size=4, replace=False)
    regions = tuple(
        Region((2 * i - 1) * p // 8, (2 * i - 1) * p // 8 + int(chosen[i - 1])) for i in range(1, beta + 1)
    )
    return SignalLayout(regions, p, mode)


def inject_signals(layout: SignalLayout, delta, delta0: float, gamma: float, rng: RngStream) -> np.ndarray:
    """Mean vector of ``X`` (``Y`` has mean zero).

    ``delta`` is a scalar, one bound per region, or ``None`` to use
    ``layout.deltas``. Inside a region of length
    ``L``, ``floor(gamma L)`` uniformly placed positions receive strong draws
    (``U(-delta, delta)`` in normal mode, magnitude ``U(delta - delta0,
    delta)`` with a random sign in genetic mode); the rest get ``U(-delta0,
    delta0)``. All draws are scaled unit uniforms so that runs with different
    ``delta`` stay paired under the same stream.
    """
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    if delta is None:
        delta = layout.deltas
    deltas = np.broadcast_to(np.asarray(delta, dtype=np.float64), (len(layout.regions),))
    g = rng.generator
    mu = np.zeros(layout.p)
    for r, d in zip(layout.regions, deltas):
        if not d >= delta0 >= 0:
            raise ValueError(f"need delta >= delta0 >= 0, got delta={d}, delta0={delta0}")
        L = r.length
        n_strong = math.floor(gamma * L + 1e-9)
        strong_pos = g.choice(L, size=n_strong, replace=False)
        vals = delta0 * g.uniform(-1.0, 1.0, size=L)
        if layout.mode == "normal":
            strong = d * g.uniform(-1.0, 1.0, size=n_strong)
        else:
            sign = np.where(g.random(n_strong) < 0.5, -1.0, 1.0)
            strong = sign * (d - delta0 * g.random(n_strong))
        vals[strong_pos] = strong
        mu[r.start : r.end] = vals
    return mu


def decay_adjust(delta1: float, layout: SignalLayout, n: int, p: int) -> tuple[float, ...]:
    """Per-region bounds ``delta1 - rho_j`` for decayed signals.

    ``rho_j = 50 n^(-1/2) (sqrt(log(p n)) - sqrt(log((p - sum_{k<j} L_k) n)))``,
    so the first region keeps ``delta1``.
    """
    out = []
    removed = 0
    for j, r in enumerate(layout.regions):
        remaining = p - removed
        if remaining <= 0:
            raise ValueError("regions cover the whole dimension")
        rho = 50.0 / math.sqrt(n) * (math.sqrt(math.log(p * n)) - math.sqrt(math.log(remaining * n)))
        d = delta1 - rho
        if j > 0 and d <= 0:
            raise ValueError(f"decayed delta for region {j + 1} is nonpositive ({d:.4g})")
        out.append(d)
        removed += r.length
    return tuple(out)


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo design; ``None`` fields take size-dependent defaults."""

    design: str = "mdep-equal"
    beta: int = 4
    delta: float = 0.0
    delta0: float = 0.0
    gamma: float | None = None
    p: int = 1024
    n: int = 300
    m: int = 200
    runs: int = 200
    method: str = "birs"
    decay: bool = False
    alpha: float = 0.05
    n_boot: int = 300
    trunc_s: int | None = None
    max_rounds: int = 32
    windows: tuple[int, ...] | None = None
    lengths: tuple[int, ...] | None = None
    seed: int = 20240101

    def __post_init__(self):
        if self.design not in DESIGNS:
            raise ValueError(f"unknown design {self.design!r}; choose from {sorted(DESIGNS)}")
        if self.method not in ("birs", "scan"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.runs < 1:
            raise ValueError("an experiment needs at least one run")
        if not self.delta >= self.delta0 >= 0:
            raise ValueError(f"need delta >= delta0 >= 0, got delta={self.delta}, delta0={self.delta0}")

    @property
    def mode(self) -> str:
        return DESIGNS[self.design][2]

    @property
    def signal_gamma(self) -> float:
        if self.gamma is not None:
            return self.gamma
        return 0.25 if self.mode == "normal" else 0.0625

    @property
    def has_signal(self) -> bool:
        return self.delta > 0 or self.delta0 > 0

    def birs_config(self) -> BirsConfig:
        s = default_trunc_s(self.p) if self.trunc_s is None else self.trunc_s
        return BirsConfig(alpha=self.alpha, trunc_s=s, n_boot=self.n_boot, max_rounds=self.max_rounds)

    def scan_config(self) -> ScanConfig:
        windows = self.windows
        if windows is None:
            windows = scaled_lengths(self.p)
        return ScanConfig(tuple(sorted(set(windows), reverse=True)), alpha=self.alpha, n_boot=self.n_boot)


@dataclass(frozen=True)
class RunRecord:
    run: int
    truth: tuple[Region, ...]
    result: DetectionResult
    tpr: float
    fdp: float
    false_detection: bool
    runtime_ms: float


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    fwer: float
    fdr: float
    tpr: float
    mean_tests: float
    mean_runtime_ms: float
    records: tuple[RunRecord, ...] = field(repr=False)


class Design:
    """Data generator for one :class:`ExperimentConfig` (factors built once)."""

    def __init__(self, cfg: ExperimentConfig):
        kind, x_scale, _ = DESIGNS[cfg.design]
        self.cfg = cfg
        self.factor_y = build_covariance(CovarianceSpec(kind, cfg.p))
        self.factor_x = self.factor_y.with_scale(x_scale) if x_scale != 1.0 else self.factor_y

    def generate(self, rng: RngStream):
        """Draw ``(X, Y, truth)`` for one run from ``rng``'s substreams 0-3."""
        cfg = self.cfg
        if cfg.beta == 0:
            layout = SignalLayout((), cfg.p, cfg.mode)
        else:
            layout = generate_signal_layout(rng.substream(0), cfg.beta, cfg.p, cfg.lengths, cfg.mode)
        deltas = decay_adjust(cfg.delta, layout, cfg.n, cfg.p) if cfg.decay and cfg.delta > 0 else (cfg.delta,) * len(layout.regions)
        layout = replace(layout, deltas=deltas)
        mu = inject_signals(layout, None, cfg.delta0, cfg.signal_gamma, rng.substream(1))
        X = sample_mvn(rng.substream(2), cfg.n, mu, self.factor_x)
        Y = sample_mvn(rng.substream(3), cfg.m, np.zeros(cfg.p), self.factor_y)
        if cfg.mode == "genetic":
            X, Y = genotype_transform(X), genotype_transform(Y)
        truth = layout.regions if cfg.has_signal else ()
        return X, Y, truth


def detect(X, Y, cfg: ExperimentConfig, rng: RngStream, threads: int = 1) -> DetectionResult:
    if cfg.method == "birs":
        return birs_detect(X, Y, cfg.birs_config(), rng, threads=threads)
    return scan_detect(X, Y, cfg.scan_config(), rng, threads=threads)


def run_experiment(cfg: ExperimentConfig, rng: RngStream | int | None = None, threads: int = 1) -> ExperimentResult:
    """Monte Carlo evaluation of one design.

    Run ``i`` draws everything from ``rng.substream(i)`` (data from its
    substreams 0-3, detection from substream 4), so results do not depend on
    ``threads``. FWER is the fraction of runs with any detected column outside
    the true regions; FDR and TPR are means of the point-wise per-run values.
    """
    rng = as_rng(cfg.seed if rng is None else rng)
    design = Design(cfg)

    def one(i: int) -> RunRecord:
        rr = rng.substream(i)
        X, Y, truth = design.generate(rr)
        t0 = time.perf_counter()
        res = detect(X, Y, cfg, rr.substream(4))
        ms = (time.perf_counter() - t0) * 1e3
        ev = eval_detection(res.regions, truth, cfg.p)
        return RunRecord(i, tuple(truth), res, ev.tpr, ev.fdp, ev.false_detection, ms)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = tuple(pool.map(one, range(cfg.runs)))
    else:
        records = tuple(one(i) for i in range(cfg.runs))

    with_truth = [r.tpr for r in records if r.truth]
    return ExperimentResult(
        config=cfg,
        fwer=float(np.mean([r.false_detection for r in records])),
        fdr=float(np.mean([r.fdp for r in records])),
        tpr=float(np.mean(with_truth)) if with_truth else float("nan"),
        mean_tests=float(np.mean([r.result.tests_performed for r in records])),
        mean_runtime_ms=float(np.mean([r.runtime_ms for r in records])),
        records=records,
    )
