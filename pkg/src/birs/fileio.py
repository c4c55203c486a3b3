"""Matrix and result serialization.

Matrices are read from CSV (optional header row) or from a small binary
format: the ASCII magic ``BIRSMAT1``, row and column counts as unsigned
64-bit little-endian integers, then the values as little-endian float64 in
row-major order. Detection results are written as JSON or TSV with 1-based
inclusive region bounds.
"""

from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import DetectedSegment, DetectionResult, Region, as_sample_matrix

MAGIC = b"BIRSMAT1"
_HEADER = struct.Struct("<8sQQ")

REGION_COLUMNS = ("start_1based", "end_1based_inclusive", "round", "depth", "statistic")
EXPERIMENT_COLUMNS = ("design", "method", "delta", "decay", "fwer", "fdr", "tpr", "mean_tests", "mean_runtime_ms")


class MatrixFormatError(ValueError):
    """A matrix file that exists but cannot be parsed."""


@dataclass(frozen=True)
class MatrixFile:
    path: Path
    format: str = "csv"

    def __post_init__(self):
        if self.format not in ("csv", "bin"):
            raise ValueError(f"unknown matrix format {self.format!r}")
        object.__setattr__(self, "path", Path(self.path))

    @classmethod
    def infer(cls, path) -> "MatrixFile":
        """Binary for ``.bin`` files, CSV otherwise."""
        path = Path(path)
        return cls(path, "bin" if path.suffix.lower() == ".bin" else "csv")


def _as_file(f) -> MatrixFile:
    return f if isinstance(f, MatrixFile) else MatrixFile.infer(f)


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _read_csv(path: Path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise MatrixFormatError(f"{path}: no data rows")
    first = 0
    if not all(_is_number(c) for c in rows[0]):
        first = 1
    body = rows[first:]
    if not body:
        raise MatrixFormatError(f"{path}: header row but no data rows")
    width = len(body[0])
    out = np.empty((len(body), width))
    for i, row in enumerate(body):
        line = i + first + 1
        if len(row) != width:
            raise MatrixFormatError(f"{path}: row {line} has {len(row)} fields, expected {width}")
        for j, cell in enumerate(row):
            try:
                out[i, j] = float(cell)
            except ValueError:
                raise MatrixFormatError(f"{path}: row {line}, column {j + 1}: not a number: {cell!r}") from None
    return out


def _read_bin(path: Path) -> np.ndarray:
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise MatrixFormatError(f"{path}: header truncated: expected {_HEADER.size} bytes, found {len(data)}")
    magic, rows, cols = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise MatrixFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    expected = rows * cols * 8
    found = len(data) - _HEADER.size
    if found != expected:
        kind = "truncated" if found < expected else "has trailing bytes"
        raise MatrixFormatError(f"{path}: payload {kind}: expected {expected} bytes, found {found}")
    return np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(rows, cols).astype(np.float64)


def read_matrix(f) -> np.ndarray:
    """Load a sample matrix from a :class:`MatrixFile` or a path."""
    f = _as_file(f)
    M = _read_bin(f.path) if f.format == "bin" else _read_csv(f.path)
    try:
        return as_sample_matrix(M, str(f.path))
    except ValueError as exc:
        raise MatrixFormatError(str(exc)) from None


def write_matrix(M, f, header: list[str] | None = None) -> None:
    """Write ``M``; CSV uses 17 significant digits so values survive a round trip."""
    f = _as_file(f)
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    if f.format == "bin":
        with open(f.path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, *M.shape))
            fh.write(np.ascontiguousarray(M, dtype="<f8").tobytes())
        return
    with open(f.path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header is not None:
            w.writerow(header)
        for row in M:
            w.writerow([format(v, ".17g") for v in row])


def read_labels(path) -> np.ndarray:
    """Newline-delimited 0/1 labels as a boolean array (True for label 1)."""
    out = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            tok = line.strip()
            if not tok:
                continue
            if tok not in ("0", "1"):
                raise MatrixFormatError(f"{path}: line {line_no}: label must be 0 or 1, got {tok!r}")
            out.append(tok == "1")
    return np.array(out, dtype=bool)


def split_by_labels(M, labels) -> tuple[np.ndarray, np.ndarray]:
    """Split rows of ``M`` into ``(X, Y)`` = (label 1 rows, label 0 rows)."""
    M = np.asarray(M)
    labels = np.asarray(labels, dtype=bool)
    if labels.shape != (M.shape[0],):
        raise MatrixFormatError(f"{labels.size} labels for a matrix with {M.shape[0]} rows")
    return M[labels], M[~labels]


def _region_rows(result: DetectionResult) -> list[dict]:
    # provenance of a merged region: earliest round/depth, largest statistic
    rows = []
    for r in result.regions:
        inside = [s for s in result.segments if r.start <= s.region.start and s.region.end <= r.end]
        rows.append(
            {
                "start_1based": r.start + 1,
                "end_1based_inclusive": r.end,
                "round": min((s.round for s in inside), default=0),
                "depth": min((s.depth for s in inside), default=0),
                "statistic": max((s.statistic for s in inside), default=math.nan),
            }
        )
    return rows


def result_to_dict(result: DetectionResult, config: dict | None = None) -> dict:
    """JSON-ready dictionary of ``result``; ``config`` is echoed verbatim."""
    return {
        "method": result.method,
        "regions": _region_rows(result),
        "segments": [
            {
                "start_1based": s.region.start + 1,
                "end_1based_inclusive": s.region.end,
                "round": s.round,
                "depth": s.depth,
                "statistic": s.statistic,
            }
            for s in result.segments
        ],
        "tests_performed": result.tests_performed,
        "bootstrap_tests": result.bootstrap_tests,
        "rounds_used": result.rounds_used,
        "capped": result.capped,
        "config_echo": dict(config or {}),
    }


def result_from_dict(d: dict) -> DetectionResult:
    regions = tuple(Region(r["start_1based"] - 1, r["end_1based_inclusive"]) for r in d["regions"])
    segments = tuple(
        DetectedSegment(Region(s["start_1based"] - 1, s["end_1based_inclusive"]), s["round"], s["depth"], s["statistic"])
        for s in d.get("segments", [])
    )
    return DetectionResult(
        regions=regions,
        segments=segments,
        tests_performed=d["tests_performed"],
        rounds_used=d["rounds_used"],
        capped=d.get("capped", False),
        bootstrap_tests=d.get("bootstrap_tests", 0),
        method=d.get("method", "birs"),
    )


def dumps_result(result: DetectionResult, config: dict | None = None) -> str:
    return json.dumps(result_to_dict(result, config), indent=2) + "\n"


def write_result(result: DetectionResult, path, format: str = "json", config: dict | None = None) -> None:
    """Write ``result`` as JSON or TSV.

    TSV has one region per row under a header of :data:`REGION_COLUMNS`,
    preceded by ``#`` lines carrying the counters.
    """
    if format == "json":
        Path(path).write_text(dumps_result(result, config))
    elif format == "tsv":
        lines = [
            f"# method={result.method}",
            f"# tests_performed={result.tests_performed}",
            f"# rounds_used={result.rounds_used}",
            "\t".join(REGION_COLUMNS),
        ]
        for row in _region_rows(result):
            lines.append("\t".join(repr(row[c]) if c == "statistic" else str(row[c]) for c in REGION_COLUMNS))
        Path(path).write_text("\n".join(lines) + "\n")
    else:
        raise ValueError(f"unknown result format {format!r}")


def read_result(path) -> DetectionResult:
    """Parse a JSON result file written by :func:`write_result`."""
    return result_from_dict(json.loads(Path(path).read_text()))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "on" if v else "off"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def experiment_rows(results, with_runtime: bool = True) -> list[dict]:
    cols = EXPERIMENT_COLUMNS if with_runtime else EXPERIMENT_COLUMNS[:-1]
    rows = []
    for res in results:
        c = res.config
        values = {
            "design": c.design,
            "method": c.method,
            "delta": float(c.delta),
            "decay": bool(c.decay),
            "fwer": res.fwer,
            "fdr": res.fdr,
            "tpr": res.tpr,
            "mean_tests": res.mean_tests,
            "mean_runtime_ms": res.mean_runtime_ms,
        }
        rows.append({k: values[k] for k in cols})
    return rows


def write_experiment_csv(results, path, with_runtime: bool = True) -> None:
    """One row per experiment; ``decay`` is written as on/off."""
    rows = experiment_rows(results, with_runtime)
    cols = EXPERIMENT_COLUMNS if with_runtime else EXPERIMENT_COLUMNS[:-1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in cols])
