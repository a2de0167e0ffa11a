"""Gluing on the three-ring instance: n1, m and the achieved error against 4 eps, plus tightness bounds."""
import argparse

import numpy as np

from udseq.core import TestFunction
from udseq.glue import glue, glue_convergence_check, glue_parts, tightness_certificate
from udseq.instances import geometric_decomposition, rings_decomposition
from udseq.io import emit_report


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--horizon", type=int, default=300)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.25, 0.1])
    ap.add_argument("--report", default="-")
    args = ap.parse_args()

    d = rings_decomposition(horizon=args.horizon)
    s = d.space
    tests = [TestFunction.lipschitz(s, np.clip(1.0 - s.dist[p], -1, 1), name=f"bump{p}") for p in range(0, len(s), 3)]
    rows = []
    for eps in args.eps:
        for f in tests:
            r = glue_convergence_check(d, f, eps)
            rows.append((eps, f.name, r.n1, r.m, r.achieved, r.bound))
    emit_report(args.report, ["eps", "test", "n1", "m", "achieved", "bound"], rows)

    for name, dec in (("rings", d), ("geometric", geometric_decomposition())):
        fam = [glue(dec, n) for n in range(1, dec.horizon + 1) if glue_parts(dec, n)[1] > 0]
        cert = tightness_certificate(fam, dec, args.eps)
        for e in cert.entries:
            print(f"# tightness {name} eps={e.eps}: |K|={len(e.compact)} sup mass outside = {float(e.bound):.6f}")


if __name__ == "__main__":
    main()
