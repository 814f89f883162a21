#!/usr/bin/env python3
"""Render convergence plots from experiment CSVs.

Input is the long-format experiment CSV (one row per run/round/state, `#`
comment header lines allowed) with columns: run, round, stage_count, state,
v, delta_v, tracking_error, eta_tv_gap, band_lower, band_upper, v_star.

Per state the plot shows the mean value-estimate trajectory over runs with a
shaded min/max envelope, a dotted horizontal line at the optimal value, and,
with --band, a dashed horizontal line at the lower band bound (meaningful
for averaging-scheme CSVs; the frequency scheme's band collapses onto the
optimum). X axis is the round index, or cumulative stages with --x-stages.

Exit codes: 0 on success, 1 on usage errors, 2 on malformed CSV input.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import pandas as pd

REQUIRED_COLUMNS = (
    "run",
    "round",
    "stage_count",
    "state",
    "v",
    "delta_v",
    "tracking_error",
    "eta_tv_gap",
    "band_lower",
    "band_upper",
    "v_star",
)

PALETTE = ("red", "green", "blue", "magenta", "cyan", "orange", "purple", "brown")


class MalformedCsv(Exception):
    pass


@dataclass(frozen=True)
class PlotSpec:
    csv_path: Path
    out_path: Path
    states: tuple[int, ...] | None = None  # None = every state in the file
    band: bool = False
    x_stages: bool = False
    dpi: int = 150


def load_frame(path: Path) -> pd.DataFrame:
    """Read and validate an experiment CSV, naming the offending row on failure."""
    try:
        frame = pd.read_csv(path, comment="#", dtype=str)
    except FileNotFoundError:
        raise MalformedCsv(f"{path}: no such file")
    except pd.errors.ParserError as exc:
        raise MalformedCsv(f"{path}: {exc}")
    except pd.errors.EmptyDataError:
        raise MalformedCsv(f"{path}: empty file")
    missing = [c for c in REQUIRED_COLUMNS if c not in frame.columns]
    if missing:
        raise MalformedCsv(f"{path}: missing columns {missing}")
    if len(frame) == 0:
        raise MalformedCsv(f"{path}: no data rows")
    for column in REQUIRED_COLUMNS:
        original = frame[column]
        converted = pd.to_numeric(original, errors="coerce")
        # cells pandas already treats as missing (e.g. literal nan) are fine
        bad = converted.isna() & original.notna()
        if bad.any():
            row = int(bad.idxmax())
            raise MalformedCsv(
                f"{path}: data row {row + 1}: column {column!r} has non-numeric value"
                f" {original[bad.idxmax()]!r}"
            )
        frame[column] = converted
    return frame


def render(spec: PlotSpec) -> plt.Figure:
    """Draw the figure described by spec and write it to spec.out_path."""
    frame = load_frame(spec.csv_path)
    states = (
        sorted(int(s) for s in frame["state"].unique())
        if spec.states is None
        else list(spec.states)
    )
    available = set(int(s) for s in frame["state"].unique())
    unknown = [s for s in states if s not in available]
    if unknown:
        raise MalformedCsv(f"{spec.csv_path}: states {unknown} not present in the CSV")

    x_column = "stage_count" if spec.x_stages else "round"
    fig, ax = plt.subplots(figsize=(8.0, 5.0))
    for index, state in enumerate(states):
        rows = frame[frame["state"] == state]
        grouped = rows.groupby(x_column)["v"]
        x = grouped.mean().index.to_numpy()
        color = PALETTE[index % len(PALETTE)]
        ax.plot(x, grouped.mean().to_numpy(), color=color, linestyle="-", label=f"state {state}")
        ax.fill_between(x, grouped.min().to_numpy(), grouped.max().to_numpy(), color=color, alpha=0.2)
        v_star = float(rows["v_star"].iloc[0])
        ax.axhline(v_star, color=color, linestyle=":", linewidth=1.0)
        if spec.band:
            ax.axhline(float(rows["band_lower"].iloc[0]), color=color, linestyle="--", linewidth=1.0)
    ax.set_xlabel("cumulative stages" if spec.x_stages else "round")
    ax.set_ylabel("value estimate")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    spec.out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.out_path, dpi=spec.dpi)
    return fig


def parse_states(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part != "")
    except ValueError:
        raise argparse.ArgumentTypeError(f"--states expects comma-separated integers, got {text!r}")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--csv", required=True, type=Path, help="experiment CSV path")
    parser.add_argument("--out", required=True, type=Path, help="output image path")
    parser.add_argument("--states", type=parse_states, help="comma-separated state indices")
    parser.add_argument("--band", action="store_true", help="draw the lower band line")
    parser.add_argument("--x-stages", action="store_true", help="use cumulative stages on the x axis")
    parser.add_argument("--dpi", type=int, default=150)
    args = parser.parse_args(argv)
    spec = PlotSpec(
        csv_path=args.csv,
        out_path=args.out,
        states=args.states,
        band=args.band,
        x_stages=args.x_stages,
        dpi=args.dpi,
    )
    try:
        fig = render(spec)
    except MalformedCsv as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    plt.close(fig)
    return 0


if __name__ == "__main__":
    sys.exit(main())
