"""Command line interface: ``sparseoc solve``."""

from __future__ import annotations

import argparse
import logging
import sys

from .harness import ALGORITHMS, EXAMPLES, RunConfig, run

# flag name -> RunConfig field
_OVERRIDES = {
    "example": "example", "n": "n", "alpha": "alpha", "beta": "beta", "gamma": "gamma",
    "p": "p", "box": "box", "algorithm": "algorithm", "outer_tol": "outer_tol",
    "max_outer": "max_outer", "sweep": "sweep", "out": "output_dir", "init": "init",
    "variant": "variant", "epsilon": "epsilon", "pd_sign": "pd_sign", "timings": "timings",
}


def _box(text):
    try:
        lo, hi = (float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected lo,hi")
    return (lo, hi)


def _sweep(text):
    name, sep, values = text.partition("=")
    if not sep or not values:
        raise argparse.ArgumentTypeError("expected param=v1,v2,...")
    try:
        return (name.strip(), tuple(float(v) for v in values.split(",")))
    except ValueError:
        raise argparse.ArgumentTypeError("sweep values must be numbers")


def build_parser():
    parser = argparse.ArgumentParser(prog="sparseoc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    s = sub.add_parser("solve", help="run a solve, sweep or comparison")
    s.add_argument("--config", help="JSON file with RunConfig fields")
    s.add_argument("--example", choices=EXAMPLES)
    s.add_argument("--n", type=int)
    s.add_argument("--alpha", type=float)
    s.add_argument("--beta", type=float)
    s.add_argument("--gamma", type=float)
    s.add_argument("--p", type=float)
    s.add_argument("--box", type=_box, help="bounds as lo,hi")
    s.add_argument("--algorithm", choices=ALGORITHMS)
    s.add_argument("--outer-tol", type=float)
    s.add_argument("--max-outer", type=int)
    s.add_argument("--sweep", type=_sweep, help="param=v1,v2,... over gamma, beta, p or alpha")
    s.add_argument("--out", help="output directory")
    s.add_argument("--init", choices=("zero", "tikhonov"))
    s.add_argument("--variant", choices=("signed", "nonnegative"),
                   help="Example 3 data set")
    s.add_argument("--epsilon", type=float, help="PD smoothing parameter")
    s.add_argument("--pd-sign", choices=("printed", "adjoint"))
    s.add_argument("--timings", action="store_true", default=None,
                   help="record wall-clock times in iterations.csv")
    return parser


def _attach_values(argv):
    """Glue ``--box -1,1`` into ``--box=-1,1`` so argparse does not read ``-1,1`` as a flag."""
    out = []
    it = iter(argv)
    for tok in it:
        if tok == "--box":
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_attach_values(argv))
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        data = RunConfig.from_json(args.config).to_dict() if args.config else {}
        for flag, key in _OVERRIDES.items():
            value = getattr(args, flag)
            if value is not None:
                data[key] = value
        config = RunConfig.from_dict(data)
    except (OSError, ValueError, TypeError) as exc:
        print(f"sparseoc: invalid configuration: {exc}", file=sys.stderr)
        return 2
    code = run(config)
    if code == 0:
        print(f"results written to {config.output_dir}")
    else:
        print(f"sparseoc: run failed (exit {code}); see messages above", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
