"""Command-line entry point: ``birs detect | simulate | calibrate | bench``.

Exit codes: 0 success, 1 failed bench check, 2 input error (unreadable or
malformed data, dimension mismatch), 3 configuration error (bad flag or
config value, unknown config key).
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .detect import BirsConfig, birs_detect
from .fileio import (
    MatrixFormatError,
    experiment_rows,
    read_labels,
    read_matrix,
    result_to_dict,
    split_by_labels,
    write_experiment_csv,
    write_result,
)
from .metrics import prop1_bound
from .rng import make_rng
from .scan import ScanConfig, scan_detect, window_count
from .simulation import Design, ExperimentConfig, run_experiment, scaled_lengths

log = logging.getLogger("birs")

DEFAULTS = {
    "alpha": 0.05,
    "boot": 1000,
    "trunc": 6,
    "max_rounds": 32,
    "seed": 20240101,
    "method": "birs",
    "threads": 0,
}

# keys accepted in a --config file; the grid keys take comma-separated lists
CONFIG_KEYS = {
    "design", "beta", "delta", "delta0", "gamma", "p", "n", "m", "runs", "method", "decay",
    "alpha", "boot", "trunc", "max_rounds", "seed", "windows", "lengths", "threads",
}
GRID_KEYS = ("design", "delta", "method", "decay")


class InputError(Exception):
    exit_code = 2


class ConfigError(Exception):
    exit_code = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(ConfigError.exit_code, f"{self.prog}: error: {message}\n")


def parse_config_file(path) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment. Unknown keys raise."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    out: dict[str, str] = {}
    for line_no, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{line_no}: unknown config key {key!r}")
        out[key] = value
    return out


def _convert(key: str, text: str, kind):
    try:
        return kind(text)
    except ValueError:
        raise ConfigError(f"invalid value for {key}: {text!r}") from None


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(",") if t.strip())


def _on_off(text: str) -> bool:
    t = text.strip().lower()
    if t in ("on", "true", "yes", "1"):
        return True
    if t in ("off", "false", "no", "0"):
        return False
    raise ValueError(text)


_KINDS = {
    "beta": int, "delta": float, "delta0": float, "gamma": float, "p": int, "n": int, "m": int,
    "runs": int, "alpha": float, "boot": int, "trunc": int, "max_rounds": int, "seed": int,
    "threads": int, "windows": _int_list, "lengths": _int_list, "decay": _on_off, "design": str, "method": str,
}


def _settings(args) -> dict:
    """Merge config file values with command-line flags (flags win)."""
    raw = parse_config_file(args.config) if getattr(args, "config", None) else {}
    out: dict = {}
    for key, text in raw.items():
        if key in GRID_KEYS:
            out[key] = [_convert(key, t.strip(), _KINDS[key]) for t in text.split(",") if t.strip()]
        else:
            out[key] = _convert(key, text, _KINDS[key])
    for key in ("alpha", "boot", "trunc", "max_rounds", "seed", "method", "windows", "threads", "runs"):
        v = getattr(args, key, None)
        if v is not None:
            out[key] = [v] if key in GRID_KEYS else v
    return out


def _threads(n: int) -> int:
    if n < 0:
        raise ConfigError("--threads must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


def _birs_config(s: dict, p: int | None = None) -> BirsConfig:
    trunc = s.get("trunc", DEFAULTS["trunc"])
    try:
        cfg = BirsConfig(
            alpha=s.get("alpha", DEFAULTS["alpha"]),
            trunc_s=trunc,
            n_boot=s.get("boot", DEFAULTS["boot"]),
            max_rounds=s.get("max_rounds", DEFAULTS["max_rounds"]),
        )
        if p is not None:
            cfg.check_dimension(p)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def _scan_config(s: dict, p: int) -> ScanConfig:
    windows = s.get("windows") or scaled_lengths(p)
    try:
        cfg = ScanConfig(tuple(sorted(set(windows), reverse=True)), alpha=s.get("alpha", DEFAULTS["alpha"]),
                         n_boot=s.get("boot", DEFAULTS["boot"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.window_lengths[0] > p:
        raise ConfigError(f"window length {cfg.window_lengths[0]} exceeds p={p}")
    return cfg


def _single(s: dict, key: str, default):
    v = s.get(key, default)
    if isinstance(v, list):
        if len(v) != 1:
            raise ConfigError(f"{key} takes a single value for this subcommand")
        return v[0]
    return v


def _load_pair(args) -> tuple[np.ndarray, np.ndarray]:
    try:
        if args.labels:
            if not args.x or args.y:
                raise InputError("--labels needs exactly one matrix, given with --x")
            X, Y = split_by_labels(read_matrix(args.x), read_labels(args.labels))
        else:
            if not (args.x and args.y):
                raise InputError("need --x and --y (or --x with --labels)")
            X, Y = read_matrix(args.x), read_matrix(args.y)
    except (OSError, MatrixFormatError) as exc:
        raise InputError(str(exc)) from None
    if X.shape[1] != Y.shape[1]:
        raise InputError(f"dimension mismatch: X has {X.shape[1]} columns, Y has {Y.shape[1]}")
    if X.shape[0] < 2 or Y.shape[0] < 2:
        raise InputError(f"each sample needs at least 2 rows (X has {X.shape[0]}, Y has {Y.shape[0]})")
    return X, Y


def _run_method(X, Y, method: str, s: dict, rng, threads: int):
    p = X.shape[1]
    if method == "birs":
        return birs_detect(X, Y, _birs_config(s, p), rng, threads=threads)
    if method == "scan":
        return scan_detect(X, Y, _scan_config(s, p), rng, threads=threads)
    raise ConfigError(f"unknown method {method!r}")


def _echo(s: dict, method: str, p: int) -> dict:
    echo = {"method": method, "alpha": s.get("alpha", DEFAULTS["alpha"]), "n_boot": s.get("boot", DEFAULTS["boot"]),
            "seed": s.get("seed", DEFAULTS["seed"])}
    if method == "birs":
        echo.update(trunc_s=s.get("trunc", DEFAULTS["trunc"]), max_rounds=s.get("max_rounds", DEFAULTS["max_rounds"]))
    else:
        echo["windows"] = list(_scan_config(s, p).window_lengths)
    return echo


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_detect(args) -> int:
    s = _settings(args)
    method = _single(s, "method", DEFAULTS["method"])
    threads = _threads(s.get("threads", DEFAULTS["threads"]))
    X, Y = _load_pair(args)
    p = X.shape[1]
    _birs_config(s, p) if method == "birs" else _scan_config(s, p)
    rng = make_rng(s.get("seed", DEFAULTS["seed"]))
    t0 = time.perf_counter()
    res = _run_method(X, Y, method, s, rng, threads)
    elapsed = time.perf_counter() - t0
    fmt = args.format or "json"
    if fmt not in ("json", "tsv"):
        raise ConfigError(f"detect writes json or tsv, not {fmt!r}")
    echo = _echo(s, method, p)
    if args.out:
        write_result(res, args.out, fmt, echo)
    else:
        sys.stdout.write(json.dumps(result_to_dict(res, echo), indent=2) + "\n")
    print(
        f"{method}: {len(res.regions)} region(s), {res.n_detected_points} columns, "
        f"{res.tests_performed} tests, {res.rounds_used} round(s), {elapsed:.3f} s",
        file=sys.stderr,
    )
    return 0


def _experiment_configs(s: dict) -> list[ExperimentConfig]:
    base = {}
    for key, field in (("beta", "beta"), ("delta0", "delta0"), ("gamma", "gamma"), ("p", "p"), ("n", "n"),
                       ("m", "m"), ("runs", "runs"), ("alpha", "alpha"), ("boot", "n_boot"),
                       ("trunc", "trunc_s"), ("max_rounds", "max_rounds"), ("seed", "seed"), ("lengths", "lengths")):
        if key in s:
            base[field] = s[key]
    if s.get("windows"):
        base["windows"] = tuple(s["windows"])
    grid = [s.get(k) or [getattr(ExperimentConfig, k)] for k in GRID_KEYS]
    out = []
    try:
        for design, delta, method, decay in itertools.product(*grid):
            cfg = ExperimentConfig(design=design, delta=delta, method=method, decay=decay, **base)
            if method == "birs":
                cfg.birs_config().check_dimension(cfg.p)
            else:
                sc = cfg.scan_config()
                if sc.window_lengths[0] > cfg.p:
                    raise ValueError(f"window length {sc.window_lengths[0]} exceeds p={cfg.p}")
            out.append(cfg)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    return out


def _clean(v):
    return None if isinstance(v, float) and math.isnan(v) else v


def cmd_simulate(args) -> int:
    s = _settings(args)
    threads = _threads(s.get("threads", DEFAULTS["threads"]))
    configs = _experiment_configs(s)
    results = []
    for cfg in configs:
        try:
            res = run_experiment(cfg, threads=threads)
        except ValueError as exc:
            raise ConfigError(f"{cfg.design}, delta={cfg.delta}: {exc}") from None
        results.append(res)
        print(
            f"{cfg.design} {cfg.method} delta={cfg.delta} decay={'on' if cfg.decay else 'off'}: "
            f"fwer={res.fwer:.3f} fdr={res.fdr:.3f} tpr={res.tpr:.3f} tests={res.mean_tests:.1f} "
            f"({res.mean_runtime_ms:.1f} ms/run)",
            file=sys.stderr,
        )
    fmt = args.format or "csv"
    if fmt == "csv":
        if not args.out:
            raise ConfigError("simulate --format csv needs --out")
        write_experiment_csv(results, args.out)
    elif fmt == "json":
        # runtimes are left out so the document is reproducible byte for byte
        doc = {
            "experiments": [
                {
                    **{k: _clean(v) for k, v in row.items()},
                    "runs": [
                        {"run": r.run, "truth": [[t.start + 1, t.end] for t in r.truth], "tpr": r.tpr, "fdp": r.fdp,
                         "result": result_to_dict(r.result)}
                        for r in res.records
                    ],
                }
                for row, res in zip(experiment_rows(results, with_runtime=False), results)
            ]
        }
        _emit(json.dumps(doc, indent=2) + "\n", args.out)
    else:
        raise ConfigError(f"simulate writes csv or json, not {fmt!r}")
    return 0


def calibrate(X, Y, method: str, s: dict, runs: int, rng, threads: int = 1) -> dict:
    """Permutation null: detections on label-shuffled pooled rows are all false."""
    pooled = np.vstack([X, Y])
    n = X.shape[0]

    def one(k):
        rk = rng.substream(k)
        perm = rk.substream(0).generator.permutation(pooled.shape[0])
        Xp, Yp = pooled[perm[:n]], pooled[perm[n:]]
        res = _run_method(Xp, Yp, method, s, rk.substream(1), 1)
        return {"run": k, "false_detection": bool(res.regions), "result": result_to_dict(res)}

    if threads > 1 and runs > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(one, range(runs)))
    else:
        outcomes = [one(k) for k in range(runs)]
    fwer = float(np.mean([o["false_detection"] for o in outcomes]))
    return {"method": method, "runs": runs, "fwer": fwer, "outcomes": outcomes}


def cmd_calibrate(args) -> int:
    s = _settings(args)
    method = _single(s, "method", DEFAULTS["method"])
    threads = _threads(s.get("threads", DEFAULTS["threads"]))
    runs = s.get("runs", 200)
    if runs < 1:
        raise ConfigError("runs must be >= 1")
    X, Y = _load_pair(args)
    p = X.shape[1]
    _birs_config(s, p) if method == "birs" else _scan_config(s, p)
    t0 = time.perf_counter()
    doc = calibrate(X, Y, method, s, runs, make_rng(s.get("seed", DEFAULTS["seed"])), threads)
    doc["config_echo"] = _echo(s, method, p)
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    print(f"{method}: empirical FWER {doc['fwer']:.3f} over {runs} permutation(s), "
          f"{time.perf_counter() - t0:.1f} s", file=sys.stderr)
    return 0


def bench(cfg: ExperimentConfig, windows, runs: int, threads: int = 1) -> dict:
    """Time BiRS and scan on the same seeded data sets."""
    design = Design(cfg)
    rng = make_rng(cfg.seed)
    bc = cfg.birs_config()
    sc = ScanConfig(tuple(sorted(set(windows), reverse=True)), alpha=cfg.alpha, n_boot=cfg.n_boot)
    rows = []
    for i in range(runs):
        rr = rng.substream(i)
        X, Y, _ = design.generate(rr)
        t0 = time.perf_counter()
        rb = birs_detect(X, Y, bc, rr.substream(4), threads=threads)
        t1 = time.perf_counter()
        rs = scan_detect(X, Y, sc, rr.substream(4), threads=threads)
        t2 = time.perf_counter()
        rows.append({
            "run": i,
            "birs_tests": rb.tests_performed,
            "birs_rounds": rb.rounds_used,
            "birs_bound": prop1_bound(cfg.p, bc.trunc_s, rb.rounds_used),
            "scan_tests": rs.tests_performed,
            "birs_seconds": t1 - t0,
            "scan_seconds": t2 - t1,
            "birs_regions": [[r.start + 1, r.end] for r in rb.regions],
            "scan_regions": [[r.start + 1, r.end] for r in rs.regions],
        })
    return {
        "p": cfg.p,
        "windows": list(sc.window_lengths),
        "scan_window_count": window_count(cfg.p, sc.window_lengths),
        "birs_seconds_total": sum(r["birs_seconds"] for r in rows),
        "scan_seconds_total": sum(r["scan_seconds"] for r in rows),
        "runs": rows,
    }


def cmd_bench(args) -> int:
    s = _settings(args)
    threads = _threads(s.get("threads", DEFAULTS["threads"]))
    s.setdefault("p", 8192)
    s.setdefault("delta", [1.0])
    s.setdefault("delta0", 0.05)
    s.setdefault("design", ["weak-equal"])
    s.setdefault("boot", 300)
    runs = s.pop("runs", 5)
    s["method"] = ["birs"]
    cfgs = _experiment_configs(s)
    if len(cfgs) != 1:
        raise ConfigError("bench takes a single design, delta and decay setting")
    cfg = replace(cfgs[0], runs=runs)
    windows = s.get("windows") or scaled_lengths(cfg.p)[:4]
    if max(windows) > cfg.p:
        raise ConfigError(f"window length {max(windows)} exceeds p={cfg.p}")
    doc = bench(cfg, windows, runs, threads)
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    print(
        f"p={cfg.p}, {runs} run(s): birs {doc['birs_seconds_total']:.2f} s, "
        f"mean {np.mean([r['birs_tests'] for r in doc['runs']]):.1f} tests; "
        f"scan {doc['scan_seconds_total']:.2f} s, {doc['scan_window_count']} tests",
        file=sys.stderr,
    )
    if len(windows) >= 2:
        bad = [r["run"] for r in doc["runs"] if r["birs_tests"] >= r["scan_tests"]]
        if bad:
            print(f"birs used at least as many tests as scan in runs {bad}", file=sys.stderr)
            return 1
    return 0


def _common(p: argparse.ArgumentParser, data: bool = True) -> None:
    if data:
        p.add_argument("--x", help="sample X matrix (.csv or .bin)")
        p.add_argument("--y", help="sample Y matrix (.csv or .bin)")
        p.add_argument("--labels", help="0/1 label file splitting --x into Y (0) and X (1)")
    p.add_argument("--alpha", type=float, help=f"test level (default {DEFAULTS['alpha']})")
    p.add_argument("--boot", type=int, help=f"multiplier bootstrap size (default {DEFAULTS['boot']})")
    p.add_argument("--trunc", type=int, help=f"truncation parameter s (default {DEFAULTS['trunc']})")
    p.add_argument("--max-rounds", dest="max_rounds", type=int, help="cap on re-search rounds (default 32)")
    p.add_argument("--seed", type=int, help=f"root seed (default {DEFAULTS['seed']})")
    p.add_argument("--method", choices=("birs", "scan"), help="detector (default birs)")
    p.add_argument("--windows", type=_int_list, help="scan window lengths, comma separated")
    p.add_argument("--out", help="output file (default: standard output)")
    p.add_argument("--format", help="output format")
    p.add_argument("--threads", type=int, help="worker threads, 0 = all cores (default 0)")
    p.add_argument("--config", help="key=value configuration file")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="birs", description="Signal region detection with binary and re-search.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _common(sub.add_parser("detect", help="detect signal regions in two samples"))
    p = sub.add_parser("simulate", help="run a Monte Carlo grid from a config file")
    _common(p, data=False)
    p.add_argument("--runs", type=int, help="Monte Carlo runs per grid point")
    p = sub.add_parser("calibrate", help="permutation estimate of the FWER")
    _common(p)
    p.add_argument("--runs", type=int, help="number of permutations (default 200)")
    p = sub.add_parser("bench", help="time BiRS against the scan baseline")
    _common(p, data=False)
    p.add_argument("--runs", type=int, help="number of seeded data sets (default 5)")
    return parser


COMMANDS = {"detect": cmd_detect, "simulate": cmd_simulate, "calibrate": cmd_calibrate, "bench": cmd_bench}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (InputError, ConfigError) as exc:
        print(f"birs {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
