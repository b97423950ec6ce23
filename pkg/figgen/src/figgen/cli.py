"""figgen <figure-id> --in <dir> --out <file> [--times t1,t2,...]"""

import argparse
import sys

from .figures import RENDERERS, burst_snapshots
from .readers import InputError


def build_parser():
    p = argparse.ArgumentParser(prog="figgen", description=__doc__)
    p.add_argument("figure", choices=sorted(RENDERERS), help="figure to render")
    p.add_argument("--in", dest="in_dir", required=True, help="directory with solver outputs")
    p.add_argument("--out", required=True, help="output image path")
    p.add_argument("--times", default=None, help="snapshot times for burst_snapshots")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.figure == "burst_snapshots":
            times = tuple(float(v) for v in args.times.split(",")) if args.times else ()
            burst_snapshots(args.in_dir, args.out, times=times)
        else:
            RENDERERS[args.figure](args.in_dir, args.out)
    except InputError as exc:
        print(f"figgen: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
