"""Exact-design rounding and report serialisation."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .interior import SolveReport, StageRecord
from .model import DesignSpace

SCHEMA_VERSION = 1


@dataclass
class ExactDesign:
    """``counts[j]`` replicates of grid point ``j``; ``runs`` lists the non-zero ones."""

    counts: np.ndarray
    n: int
    runs: list[tuple[tuple[float, ...], int]]


def round_design(w, n: int, space: DesignSpace | None = None, threshold: float = 0.0) -> ExactDesign:
    """Largest-remainder rounding of ``n * w`` to integers summing to ``n``.

    Support points are those with ``w_j > threshold``.  Each gets
    ``floor(n w_j)``; the remaining runs go one at a time to the largest
    fractional parts, ties broken by lower index.
    """
    w = np.asarray(w, dtype=float)
    n = int(n)
    supp = np.flatnonzero(w > threshold)
    if n < 1 or n < supp.size:
        raise ValueError(f"n={n} is smaller than the {supp.size} support points; use n >= {supp.size}")
    share = n * w[supp] / w[supp].sum()
    # 1e-9 absorbs representation error in already-integral shares
    base = np.floor(share + 1e-9)
    rem = np.round(np.maximum(share - base, 0.0), 12)
    extra = n - int(base.sum())
    order = sorted(range(supp.size), key=lambda k: (-rem[k], supp[k]))
    for k in order[:extra]:
        base[k] += 1
    counts = np.zeros(w.size, dtype=int)
    counts[supp] = base.astype(int)
    runs = []
    for j in np.flatnonzero(counts):
        pt = tuple(float(v) for v in space.points[j]) if space is not None else (float(j),)
        runs.append((pt, int(counts[j])))
    return ExactDesign(counts=counts, n=n, runs=runs)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def report_to_dict(report: SolveReport) -> dict:
    d = report.d_values
    w = report.weights
    supp = w > report.options.get("support_threshold", 1e-5)
    return _jsonable({
        "schema_version": SCHEMA_VERSION,
        "algorithm": report.algorithm,
        "working_matrix": report.working,
        "converged": bool(report.converged),
        "loss": report.loss,
        "max_d": report.max_d,
        "d_stats": {
            "max": float(d.max()),
            "min": float(d.min()),
            "argmax": int(np.argmax(d)),
            "support_abs_max": float(np.abs(d[supp]).max()) if supp.any() else 0.0,
            "weighted_mean": float(w @ d),
        },
        "n_support": int(supp.sum()),
        "support": [{"point": list(p), "weight": wt} for p, wt in report.support],
        "weights": w,
        "d_values": d,
        "options": report.options,
        "trace": [asdict(s) for s in report.outer_trace],
        "extra": report.extra,
    })


def report_from_dict(data: dict) -> SolveReport:
    return SolveReport(
        weights=np.array(data["weights"], dtype=float),
        loss=data["loss"],
        max_d=data["max_d"],
        converged=data["converged"],
        d_values=np.array(data["d_values"], dtype=float),
        outer_trace=[StageRecord(**s) for s in data["trace"]],
        support=[(tuple(s["point"]), s["weight"]) for s in data["support"]],
        algorithm=data["algorithm"],
        working=data["working_matrix"],
        options=data["options"],
        extra=data["extra"],
    )


def dumps_report(report: SolveReport) -> str:
    return json.dumps(report_to_dict(report), sort_keys=True, indent=2) + "\n"


def support_csv_rows(report: SolveReport, names):
    yield list(names) + ["weight"]
    for p, wt in sorted(report.support, key=lambda r: r[0]):
        yield [format(v, ".12g") for v in p] + [f"{wt:.4f}"]


def write_report(report: SolveReport, fmt: str, path, names=None) -> Path:
    """Write ``report`` as JSON (full precision) or as a support-table CSV."""
    path = Path(path)
    if fmt == "json":
        path.write_text(dumps_report(report), encoding="utf-8")
    elif fmt == "csv":
        if names is None:
            p = len(report.support[0][0]) if report.support else 0
            names = [f"x{k + 1}" for k in range(p)]
        with path.open("w", newline="", encoding="utf-8") as fh:
            csv.writer(fh, lineterminator="\n").writerows(support_csv_rows(report, names))
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return path


def load_report(path) -> SolveReport:
    return report_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def write_exact_design(design: ExactDesign, names, path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(list(names) + ["runs"])
        for p, c in design.runs:
            out.writerow([format(v, ".12g") for v in p] + [c])
    return path


def read_weights_csv(path, space: DesignSpace, renorm_tol: float = 1e-3) -> np.ndarray:
    """Weights over ``space`` from a CSV with factor-name columns and ``weight``.

    Accepts both the support table and the d-surface export.  Listed
    points must lie on the grid; unlisted points get weight 0.  Rounded
    tables are renormalised when their sum is within ``renorm_tol`` of 1.
    """
    names = space.names
    w = np.zeros(space.N)
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in names + ["weight"] if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        for lineno, row in enumerate(reader, start=2):
            try:
                x = [float(row[c]) for c in names]
                wt = float(row["weight"])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if wt < 0:
                raise ValueError(f"{path}:{lineno}: negative weight")
            try:
                j = space.index_of(x, atol=1e-6)
            except KeyError as exc:
                raise ValueError(f"{path}:{lineno}: {exc.args[0]}") from None
            w[j] += wt
    total = w.sum()
    if abs(total - 1.0) > renorm_tol:
        raise ValueError(f"{path}: weights sum to {total:.6g}, not 1")
    return w / total
