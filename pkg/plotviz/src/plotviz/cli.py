"""Command-line figure renderer.

Usage: render_figures <csv_dir> <img_dir> [--figure figN].  Each figure is
located in csv_dir by its preset-name prefix (fig6 reads the time-series
file, the rest read summary files) and written to img_dir as <figN>.<fmt>.
Exit status is 0 only if every requested figure rendered.
"""
from __future__ import annotations

import argparse
import glob
import os
import sys

from .figures import FIGURES, FigureSpec, render


def locate_csv(csv_dir: str, figure: str) -> str:
    suffix = "_timeseries.csv" if figure == "fig6" else "_summary.csv"
    pattern = os.path.join(csv_dir, f"{figure}*{suffix}")
    matches = sorted(glob.glob(pattern))
    if not matches:
        raise ValueError(f"no file matching {figure}*{suffix} in {csv_dir}")
    return matches[0]


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="render_figures",
        description="Render experiment CSVs into comparison figures.",
    )
    parser.add_argument("csv_dir", help="directory holding the experiment CSV files")
    parser.add_argument("img_dir", help="directory to write images into")
    parser.add_argument("--figure", choices=FIGURES, help="render only this figure")
    parser.add_argument("--format", default="png", choices=("png", "svg", "pdf"))
    parser.add_argument("--dpi", type=int, default=150)
    args = parser.parse_args(argv)

    wanted = (args.figure,) if args.figure else FIGURES
    os.makedirs(args.img_dir, exist_ok=True)
    failed = False
    for figure in wanted:
        try:
            spec = FigureSpec(
                figure=figure,
                csv_path=locate_csv(args.csv_dir, figure),
                out_path=os.path.join(args.img_dir, f"{figure}.{args.format}"),
                dpi=args.dpi,
            )
            report = render(spec)
            print(f"{figure}: {len(report.series)} series -> {report.out_path}")
        except (OSError, ValueError) as exc:
            print(f"{figure}: {exc}", file=sys.stderr)
            failed = True
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
