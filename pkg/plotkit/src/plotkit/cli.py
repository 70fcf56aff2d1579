"""Command-line front end: bands / posteriors.

Flags mirror the PlotJob fields; inputs are the CSV files documented in the
simulation package's SCHEMAS.md.  Exit codes: 0 success, 1 usage or input
error.
"""

import argparse
import sys

from .plots import PlotJob, plot_dispersion_bands, plot_posteriors


def _parse_summary(spec):
    try:
        nu, path = spec.split("=", 1)
        return float(nu), path
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected NU=PATH (e.g. 0=summary.csv), got {spec!r}"
        ) from None


def _parse_true(spec):
    try:
        name, value = spec.split("=", 1)
        return name, float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected NAME=VALUE (e.g. beta=0.13), got {spec!r}"
        ) from None


def build_parser():
    parser = argparse.ArgumentParser(prog="plotkit",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bands", help="layered percentile bands per compartment")
    p.add_argument("--summary", type=_parse_summary, action="append", required=True,
                   metavar="NU=PATH", help="summary CSV for one dispersion level")
    p.add_argument("--deterministic", help="measurements CSV overlaid on the I axes")
    p.add_argument("--compartments", help="comma-separated subset (default: all)")
    p.add_argument("--alpha-min", type=float, default=0.25)
    p.add_argument("--alpha-max", type=float, default=0.75)
    p.add_argument("--out", required=True, help="output image path")
    p.add_argument("--sidecar", help="plotted-numbers CSV (default: image stem + .csv)")
    p.set_defaults(func=_run_bands)

    p = sub.add_parser("posteriors", help="histogram per sampled parameter")
    p.add_argument("--chain", required=True, help="chain CSV")
    p.add_argument("--burn-in", type=int, default=0)
    p.add_argument("--bins", type=int, default=40)
    p.add_argument("--true", type=_parse_true, action="append", default=[],
                   metavar="NAME=VALUE", help="true-value marker for one parameter")
    p.add_argument("--out", required=True, help="output image path")
    p.add_argument("--sidecar", help="plotted-numbers CSV (default: image stem + .csv)")
    p.set_defaults(func=_run_posteriors)
    return parser


def _run_bands(args):
    job = PlotJob(
        output=args.out,
        summaries=dict(args.summary),
        deterministic=args.deterministic,
        compartments=args.compartments.split(",") if args.compartments else None,
        alpha_range=(args.alpha_min, args.alpha_max),
        sidecar=args.sidecar,
    )
    result = plot_dispersion_bands(job)
    print(f"wrote {result.image} and {result.sidecar} ({result.n_layers} layers)")
    return 0


def _run_posteriors(args):
    job = PlotJob(
        output=args.out,
        chain=args.chain,
        burn_in=args.burn_in,
        bins=args.bins,
        true_values=dict(args.true),
        sidecar=args.sidecar,
    )
    result = plot_posteriors(job)
    print(f"wrote {result.image} and {result.sidecar} "
          f"({len(result.parameters)} parameters)")
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"plotkit: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
