"""Greedy u.d. sequence for the uniform measure on a k x k grid; prints KR at the checkpoints."""
import argparse
import time

from udseq.construct import greedy_extend, verify_ud
from udseq.core import PointSequence
from udseq.instances import grid_target
from udseq.io import emit_report


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k", type=int, default=10)
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--checkpoints", type=int, nargs="+", default=[50, 100, 200, 500])
    ap.add_argument("--tolerance", type=float, default=0.05)
    ap.add_argument("--report", default="-")
    args = ap.parse_args()

    target = grid_target(args.k)
    start = time.perf_counter()
    seq = greedy_extend(target, PointSequence(target.space, ()), args.n)
    cert = verify_ud(target, seq, [c for c in args.checkpoints if c <= args.n], args.tolerance)
    emit_report(args.report, ["n", "kr"], cert.rows())
    print(f"# first picks {list(seq.ids[:5])}, verdict {cert.verdict}, monotone tail {cert.monotone_tail}, "
          f"{time.perf_counter() - start:.1f} s")


if __name__ == "__main__":
    main()
