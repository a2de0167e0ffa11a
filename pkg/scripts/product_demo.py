"""Product construction on the 4x4 instance with quota or leaky marginals; prints per-level diagnostics."""
import argparse
from fractions import Fraction

from udseq.instances import product_4x4
from udseq.io import emit_report
from udseq.product import leaky_marginals, mass_chain, run_product


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--levels", type=int, default=8)
    ap.add_argument("--eps", type=float, default=0.25)
    ap.add_argument("--leaky", type=Fraction, default=None, help="leak rate, e.g. 3/4; quota marginals when omitted")
    ap.add_argument("--report", default="-")
    args = ap.parse_args()

    nu, kernel = product_4x4()
    pieces = mass_chain(nu, args.levels)
    marg = leaky_marginals(nu, pieces, 4 * args.levels, args.leaky) if args.leaky is not None else None
    run = run_product(nu, kernel.with_pieces(pieces), args.levels, eps=args.eps, marginals=marg)
    emit_report(args.report, ["level", "m_n", "leakage", "sup_kernel_gap", "marginal_err", "product_err"], run.rows())
    rep = run.report
    print(f"# eps={rep.eps} m={rep.m} threshold={rep.threshold} worst ratio={rep.worst_ratio:.4f} passed={rep.passed}")
    for e in run.estimates(args.eps):
        print("#", {k: (round(float(v), 6) if v is not None and k not in ("level", "m") else v) for k, v in e.items()})


if __name__ == "__main__":
    main()
