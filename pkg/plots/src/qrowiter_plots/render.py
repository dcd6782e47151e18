"""Convergence figures from benchmark CSVs.

Reads the aggregated CSV the benchmark harness writes
(mode,q,alpha,step,mean_err_sq), draws one line per group on a
log-scale error axis, and saves the figure. The CSV file is the whole
interface; this package never imports the solver.
"""
from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


class SchemaError(ValueError):
    """The CSV does not carry the columns the curve spec references."""


@dataclass(frozen=True)
class CurveSpec:
    """What to plot: input CSV, grouping columns, output image."""

    csv_path: str
    out_path: str
    group_by: tuple[str, ...] = ("mode", "q", "alpha")
    x_column: str = "step"
    y_column: str = "mean_err_sq"
    log_y: bool = True
    title: str | None = None


@dataclass(frozen=True)
class RenderResult:
    out_path: str
    n_curves: int
    groups: tuple[str, ...]


def read_groups(spec: CurveSpec) -> dict[str, list[tuple[float, float]]]:
    """Parse the CSV into {group label: [(x, y), ...]} sorted by x."""
    with open(spec.csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        columns = reader.fieldnames or []
        needed = set(spec.group_by) | {spec.x_column, spec.y_column}
        missing = sorted(needed - set(columns))
        if missing:
            raise SchemaError(f"{spec.csv_path}: missing column(s) {', '.join(missing)}")
        groups: dict[str, list[tuple[float, float]]] = {}
        for row in reader:
            label = ", ".join(f"{col}={row[col]}" for col in spec.group_by)
            groups.setdefault(label, []).append((float(row[spec.x_column]), float(row[spec.y_column])))
    if not groups:
        raise SchemaError(f"{spec.csv_path}: no data rows")
    for label, points in groups.items():
        if not points:
            raise SchemaError(f"group {label!r} is empty")
        points.sort(key=lambda p: p[0])
    return groups


def render(spec: CurveSpec) -> RenderResult:
    """Draw one curve per group and save the figure."""
    groups = read_groups(spec)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label in sorted(groups):
        xs = [p[0] for p in groups[label]]
        ys = [p[1] for p in groups[label]]
        ax.plot(xs, ys, label=label)
    if spec.log_y:
        ax.set_yscale("log")
    ax.set_xlabel(spec.x_column)
    ax.set_ylabel(spec.y_column)
    if spec.title:
        ax.set_title(spec.title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(spec.out_path, dpi=150)
    plt.close(fig)
    return RenderResult(out_path=spec.out_path, n_curves=len(groups), groups=tuple(sorted(groups)))


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="qrowiter-plot", description=__doc__)
    parser.add_argument("csv_path", help="aggregated benchmark CSV")
    parser.add_argument("out_path", help="output image file (png, pdf, ...)")
    parser.add_argument("--group-by", default="mode,q,alpha", help="comma-separated group columns")
    parser.add_argument("--x", dest="x_column", default="step")
    parser.add_argument("--y", dest="y_column", default="mean_err_sq")
    parser.add_argument("--linear-y", action="store_true", help="disable the log-scale error axis")
    parser.add_argument("--title")
    args = parser.parse_args(argv)
    spec = CurveSpec(
        csv_path=args.csv_path,
        out_path=args.out_path,
        group_by=tuple(c.strip() for c in args.group_by.split(",") if c.strip()),
        x_column=args.x_column,
        y_column=args.y_column,
        log_y=not args.linear_y,
        title=args.title,
    )
    try:
        result = render(spec)
    except (OSError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {result.out_path} ({result.n_curves} curves)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
