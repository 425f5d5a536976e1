"""epiplot command line: timeseries and heatmap subcommands."""

from __future__ import annotations

import argparse

from .plots import DEFAULT_PANELS, load_run_dir, plot_heatmap, plot_timeseries


def cmd_timeseries(args) -> int:
    markers = tuple(float(v) for v in args.markers.split(",")) if args.markers else ()
    bundles = load_run_dir(args.run_dir, panels=tuple(args.panels.split(",")),
                           reported_csv=args.reported, markers=markers)
    out = plot_timeseries(bundles, args.out, suptitle=args.title)
    print(f"wrote {out}")
    return 0


def cmd_heatmap(args) -> int:
    out = plot_heatmap(args.matrix, args.out)
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="epiplot",
                                     description="Plot epidemic simulation CSV outputs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("timeseries", help="percentile-band panels from a run directory")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--reported", default=None, help="reported-data CSV overlay")
    p.add_argument("--out", required=True)
    p.add_argument("--panels", default=",".join(DEFAULT_PANELS))
    p.add_argument("--markers", default=None, help="comma-separated event days")
    p.add_argument("--title", default="")
    p.set_defaults(fn=cmd_timeseries)

    p = sub.add_parser("heatmap", help="endpoint heatmap grid from matrix CSVs")
    p.add_argument("--matrix", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_heatmap)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
