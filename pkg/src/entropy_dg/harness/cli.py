"""``entropy-dg <experiment> [options]``.

Exit status: 0 on success (including an expected divergence), 2 for
configuration errors, 3 for an unexpected blow-up, 4 when an oracle check
fails.
"""

from __future__ import annotations

import argparse
import logging
import sys

from ..errors import BlowUpError, ConfigError, OracleFailure, PlotError
from .config import EXPERIMENTS, SCALES, load_config
from .experiments import run_experiment
from .plots import emit_plots

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_ORACLE = 4

log = logging.getLogger("entropy_dg")


def build_parser():
    p = argparse.ArgumentParser(prog="entropy-dg",
                                description="Entropy stable DG experiments for the Euler equations.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="key = value file with [experiment] sections")
    p.add_argument("--N", help="polynomial degrees, comma separated")
    p.add_argument("--K", help="elements (1D) or quadrilaterals per direction (2D)")
    p.add_argument("--cfl", help="CFL numbers, comma separated")
    p.add_argument("--flux", help="ec, eclf or a comma separated list")
    p.add_argument("--quad", help="gll, gauss1, gauss2, tri2n or a list")
    p.add_argument("--T", help="final time")
    p.add_argument("--scale", choices=SCALES, help="problem size for riemann-2d")
    p.add_argument("--out", help="output root directory (default: results)")
    p.add_argument("--threads", help="worker threads for element loops")
    p.add_argument("--dump", action="store_true", help="ops-check: write operator matrices")
    p.add_argument("--no-plots", action="store_true", help="skip SVG output")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    overrides = {k: getattr(args, k) for k in ("N", "K", "cfl", "flux", "quad", "T", "scale",
                                               "out", "threads")}
    try:
        spec = load_config(args.experiment, args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    code = EXIT_OK
    outdir = None
    try:
        result = run_experiment(spec, dump=args.dump)
        outdir = result.outdir
        print(f"{spec.experiment}: {result.status} -> {outdir}")
        if result.message:
            print(result.message)
    except BlowUpError as exc:
        print(f"blow-up: {exc} (t={exc.time}, element={exc.element}, point={exc.point}); "
              "partial outputs retained", file=sys.stderr)
        code = EXIT_BLOWUP
    except OracleFailure as exc:
        print(f"oracle failure: {exc}", file=sys.stderr)
        code = EXIT_ORACLE
    if not args.no_plots:
        import os
        outdir = outdir or os.path.join(spec.out, spec.experiment)
        if os.path.isdir(outdir):
            try:
                emit_plots(outdir)
            except PlotError as exc:
                log.warning("plotting skipped: %s", exc)
    return code


if __name__ == "__main__":
    sys.exit(main())
