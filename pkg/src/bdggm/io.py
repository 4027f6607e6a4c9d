"""File formats: CSV readers/writers, run manifests, and occupancy charts.

Floats are written with 17 significant digits so write-then-read round-trips
are lossless for doubles.  Matrix files are plain numeric CSV without
headers; tabular files carry a header row.
"""

from __future__ import annotations

import csv
import hashlib
from pathlib import Path

import numpy as np

from .engine import ChainTrace
from .estimators import cumulative_occupancy


class ParseError(ValueError):
    """Malformed input file; message pinpoints row/column where possible."""


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def read_data_csv(path: str | Path) -> np.ndarray:
    """n x p numeric matrix; a single non-numeric first row is treated as a
    header and skipped."""
    rows = _read_numeric_rows(path)
    return np.array(rows)


def read_timecourse_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """First column is the observation time, the rest are node observations."""
    first = _peek_header(path)
    if first is not None and "time" not in first[0].strip().lower():
        raise ParseError(f"{path}: first column must be the time column")
    rows = _read_numeric_rows(path)
    data = np.array(rows)
    if data.shape[1] < 2:
        raise ParseError(f"{path}: need a time column plus at least one node column")
    return data[:, 0], data[:, 1:]


def _peek_header(path: str | Path) -> list[str] | None:
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            try:
                float(row[0])
                return None
            except ValueError:
                return row
    return None


def _read_numeric_rows(path: str | Path) -> list[list[float]]:
    rows: list[list[float]] = []
    width = None
    with open(path, newline="") as fh:
        for r, row in enumerate(csv.reader(fh)):
            if not row or all(not cell.strip() for cell in row):
                continue
            parsed = []
            for c, cell in enumerate(row):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    if r == 0 and not rows:
                        parsed = None  # header row
                        break
                    raise ParseError(
                        f"{path}: row {r + 1}, column {c + 1}: {cell!r} is not a number"
                    ) from None
            if parsed is None:
                continue
            if width is None:
                width = len(parsed)
            elif len(parsed) != width:
                raise ParseError(
                    f"{path}: row {r + 1} has {len(parsed)} columns, expected {width}"
                )
            rows.append(parsed)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return rows


def write_matrix_csv(path: str | Path, mat: np.ndarray) -> None:
    mat = np.atleast_2d(mat)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in mat:
            writer.writerow([fmt(v) for v in row])


def read_matrix_csv(path: str | Path) -> np.ndarray:
    return read_data_csv(path)


def write_graph_probs_csv(path: str | Path, probs: dict[str, float]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["graph", "probability"])
        for gid in sorted(probs, key=lambda g: (-probs[g], g)):
            writer.writerow([gid, fmt(probs[gid])])


def write_trace_csv(path: str | Path, trace: ChainTrace) -> None:
    """One record per step: index, canonical graph, weight, and the
    flattened K snapshot on thinned steps (empty cells otherwise)."""
    snap = {step: k for step, k in trace.snapshots}
    k_cols = trace.p * trace.p
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["step", "graph", "weight"]
            + [f"k{i}_{j}" for i in range(trace.p) for j in range(trace.p)]
        )
        for t in range(trace.n_steps):
            row = [str(t), trace.graph_ids[t], fmt(trace.weights[t])]
            if t in snap:
                row += [fmt(v) for v in snap[t].ravel()]
            else:
                row += [""] * k_cols
            writer.writerow(row)


def occupancy_steps(n_steps: int, max_points: int = 1000) -> list[int]:
    stride = max(1, n_steps // max_points)
    steps = list(range(0, n_steps, stride))
    if steps[-1] != n_steps - 1:
        steps.append(n_steps - 1)
    return steps


def write_occupancy_csv(path: str | Path, trace: ChainTrace) -> None:
    """Cumulative occupancy of every candidate edge on a thinned step grid
    (burn-in included; the manifest records where it ends)."""
    steps = occupancy_steps(trace.n_steps)
    curves = np.column_stack(
        [cumulative_occupancy(trace, e) for e in trace.edges]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step"] + [f"{i}-{j}" for i, j in trace.edges])
        for t in steps:
            writer.writerow([str(t)] + [fmt(v) for v in curves[t]])


def write_occupancy_svg(path: str | Path, trace: ChainTrace) -> None:
    """Minimal line chart of the occupancy curves, one polyline per edge."""
    width, height, pad = 800, 400, 40
    steps = occupancy_steps(trace.n_steps)
    xs = [pad + (width - 2 * pad) * t / max(1, trace.n_steps - 1) for t in steps]
    palette = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"]
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
    ]
    for idx, e in enumerate(trace.edges):
        curve = cumulative_occupancy(trace, e)
        pts = " ".join(
            f"{x:.1f},{pad + (height - 2 * pad) * (1.0 - curve[t]):.1f}"
            for x, t in zip(xs, steps)
        )
        color = palette[idx % len(palette)]
        lines.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1" points="{pts}"/>'
        )
    lines.append("</svg>")
    Path(path).write_text("\n".join(lines) + "\n")


def write_bench_report(path: str | Path, reports) -> None:
    """Aggregate mean/sd per scenario row."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["model", "p", "n", "reps", "failed",
             "f1_mean", "f1_sd", "ce_mean", "ce_sd", "kl_mean", "kl_sd",
             "seconds_mean"]
        )
        for rep in reports:
            f1 = rep.mean_sd("f1")
            ce = rep.mean_sd("ce")
            kl = rep.mean_sd("kl")
            sec = rep.mean_sd("seconds")
            sc = rep.scenario
            writer.writerow(
                [sc.model, sc.p, sc.n, sc.reps, rep.n_failed]
                + [fmt(v) for v in (*f1, *ce, *kl, sec[0])]
            )


def write_bench_per_rep(path: str | Path, reports) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "p", "n", "rep", "f1", "ce", "kl", "seconds", "error"])
        for rep in reports:
            for r in rep.reps:
                writer.writerow(
                    [rep.scenario.model, rep.scenario.p, rep.scenario.n, r.rep,
                     fmt(r.f1), fmt(r.ce), fmt(r.kl), fmt(r.seconds), r.error or ""]
                )


def write_beta_trace(path: str | Path, steps, draws) -> None:
    """Thinned spline-coefficient draws, one row per recorded step."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if len(draws):
            p, m = draws[0].shape
            writer.writerow(["step"] + [f"beta{i}_{r}" for i in range(p) for r in range(m)])
            for step, draw in zip(steps, draws):
                writer.writerow([str(step)] + [fmt(v) for v in draw.ravel()])
        else:
            writer.writerow(["step"])


def manifest_lines(settings: dict[str, object]) -> list[str]:
    """key = value lines plus a hash over them; deterministic ordering."""
    body = [f"{key} = {settings[key]}" for key in sorted(settings)]
    digest = hashlib.sha256("\n".join(body).encode()).hexdigest()
    return body + [f"config_hash = {digest}"]


def write_manifest(path: str | Path, settings: dict[str, object]) -> None:
    Path(path).write_text("\n".join(manifest_lines(settings)) + "\n")


def read_config_file(path: str | Path) -> dict[str, str]:
    """Flat key = value settings file; blank lines and # comments ignored."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"{path}: line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out
