"""``udseq`` command line.

Exit codes: 0 pass, 1 verification failure, 2 input error, 3 horizon or
capacity error.
"""
from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import io
from .construct import default_block_lengths, greedy_extend, measures_to_sequence, quota_measure, quota_sequence, verify_ud
from .core import DiscreteMeasure, MetricSpace, PointSequence, TestFunction, empirical
from .errors import HorizonError, NoCertificateError, UdseqError
from .glue import PieceDecomposition, glue, glue_convergence_check, glue_parts, tightness_certificate
from .kr import kr_distance, kr_dual, kr_oracle


def _floats(text: str) -> list:
    try:
        out = [float(t) for t in text.split(",") if t.strip()]
    except ValueError as e:
        raise io.InputError(f"expected comma-separated numbers, got {text!r}") from e
    if not out:
        raise io.InputError("empty list")
    return out


def _ints(text: str) -> list:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as e:
        raise io.InputError(f"expected comma-separated integers, got {text!r}") from e


def _emit(text: str) -> None:
    sys.stdout.write(text)


# ---------------------------------------------------------------------------
# kr


def cmd_kr(args) -> int:
    space = io.load(args.space, "space")
    mu = io.load(args.mu, "measure", [space])
    nu = io.load(args.nu, "measure", [space])
    value, plan = kr_distance(mu, nu)
    _emit(f"{value:.12f}\n")
    status = 0
    if args.dual:
        dual, pot = kr_dual(mu, nu)
        _emit(f"dual {dual:.12f}\n")
        if abs(dual - value) > 1e-7 or not pot.check():
            status = 1
    if args.plan:
        io.write_json(args.plan, {
            "cost": value,
            "flows": [[i, j, io.format_weight(x)] for i, j, x in plan.flows],
        })
    return status


# ---------------------------------------------------------------------------
# gen / verify


def block_sequence(target: DiscreteMeasure, n: int) -> PointSequence:
    """Concatenated quota blocks of ``quota_measure(target, j)``, cut at length ``n``."""
    k = 1
    while sum(default_block_lengths(k)) < n:
        k += 1
    seq = measures_to_sequence([quota_measure(target, j) for j in range(1, k + 1)])
    return PointSequence(seq.space, seq.ids[:n])


def cmd_gen(args) -> int:
    target = io.load(args.target, "measure")
    target.require_probability()
    if args.n < 1:
        raise io.InputError("--n must be >= 1")
    if args.method == "greedy":
        seq = greedy_extend(target, PointSequence(target.space, ()), args.n)
    elif args.method == "quota":
        seq = quota_sequence(target, args.n)
    else:
        seq = block_sequence(target, args.n)
    io.write_json(args.out, io.sequence_to_json(seq))
    return 0


def cmd_verify(args) -> int:
    target = io.load(args.target, "measure")
    seq = io.load(args.seq, "sequence", [target.space])
    tol = args.tol
    if not tol > 0:
        raise io.InputError("--tol must be positive")
    cert = verify_ud(target, seq, _ints(args.checkpoints), tol)
    text = io.emit_report(args.report, ["n", "kr_distance"], cert.rows(), _verify_summary(cert), args.summary)
    if args.report is None:
        _emit(text)
    return 0 if cert.verdict else 1


def _verify_summary(cert) -> dict:
    return {
        "command": "verify",
        "verdict": cert.verdict,
        "monotone_tail": cert.monotone_tail,
        "tolerance": cert.tolerance,
        "final_distance": cert.distances[-1],
        "horizon": cert.horizon,
    }


# ---------------------------------------------------------------------------
# glue / tight


def bump_tests(space: MetricSpace, centers) -> list:
    """``f_p(x) = clip(1 - d(p, x), -1, 1)``: bounded by 1 and 1-Lipschitz."""
    return [TestFunction.lipschitz(space, np.clip(1.0 - space.dist[p], -1.0, 1.0), name=f"bump[{space.points[p]}]") for p in centers]


def cmd_glue(args) -> int:
    decomp = io.load(args.decomp, "decomposition")
    nu = glue(decomp, args.n)
    io.write_json(args.out, io.measure_to_json(nu))
    if not args.eps:
        return 0
    rows, ok = [], True
    for eps in _floats(args.eps):
        for f in bump_tests(decomp.space, decomp.target.support):
            rep = glue_convergence_check(decomp, f, eps)
            rows.append((eps, f.name, rep.n1, rep.m, rep.achieved, rep.bound, rep.passed))
            ok &= rep.passed
    summary = {"command": "glue", "verdict": ok, "constants": {"glue_convergence": io.CONSTANTS["glue_convergence"]}}
    text = io.emit_report(args.report, ["eps", "test", "n1", "m", "achieved", "bound", "passed"], rows, summary, args.summary)
    if args.report is None:
        _emit(text)
    return 0 if ok else 1


def tight_family(decomp: PieceDecomposition, horizon: int) -> list:
    if decomp.target is not None and decomp.approximators:
        if horizon > decomp.horizon:
            raise HorizonError(f"--horizon {horizon} beyond materialized {decomp.horizon}")
        # nu_n is undefined while c_n = 0
        return [glue(decomp, n) for n in range(1, horizon + 1) if glue_parts(decomp, n)[1] > 0]
    if not decomp.measures:
        raise io.InputError("decomposition has neither approximators nor measures to certify")
    return list(decomp.measures[:horizon])


def cmd_tight(args) -> int:
    decomp = io.load(args.decomp, "decomposition")
    family = tight_family(decomp, args.horizon)
    try:
        cert = tightness_certificate(family, decomp, _floats(args.eps))
    except NoCertificateError as e:
        io.write_json(args.cert, {"verdict": False, "reason": str(e), "best": e.best})
        raise
    doc = {
        "verdict": cert.check(),
        "horizon": cert.horizon,
        "constants": {"glue_tightness": io.CONSTANTS["glue_tightness"]},
        "entries": [
            {"eps": e.eps, "pieces_used": e.pieces_used, "compact": sorted(e.compact), "bound": e.bound, "limit": 3 * e.eps}
            for e in cert.entries
        ],
    }
    io.write_json(args.cert, doc)
    return 0 if doc["verdict"] else 1


# ---------------------------------------------------------------------------
# product


PRODUCT_COLUMNS = ["level", "m_n", "leakage", "sup_kernel_gap", "marginal_err", "product_err"]


def cmd_product(args) -> int:
    from .product import run_product

    kernel = io.load(args.kernel, "kernel")
    nu = io.load(args.marginal, "measure", [kernel.domain])
    run = run_product(nu, kernel, args.levels, eps=args.eps, horizon=args.horizon)
    io.write_json(args.out, {
        "space": io.space_to_json(run.space),
        "levels": [{"level": r.level, "atoms": io.measure_to_json(r.measure)["atoms"]} for r in run.levels],
    })
    rep = run.report
    summary = {
        "command": "product",
        "verdict": rep.passed,
        "m": rep.m,
        "threshold": rep.threshold,
        "worst_ratio": rep.worst_ratio,
        "bound": rep.bound,
        "constants": {k: io.CONSTANTS[k] for k in ("product_marginal", "product_convergence")},
    }
    text = io.emit_report(args.report, PRODUCT_COLUMNS, run.rows(), summary, args.summary)
    if args.report is None:
        _emit(text)
    return 0 if rep.passed else 1


# ---------------------------------------------------------------------------
# selftest


def _oracle_case(case):
    p, q = case
    v = kr_distance(p, q)[0]
    return max(abs(v - kr_oracle(p, q)), abs(v - kr_dual(p, q)[0]))


def _axiom_case(case):
    p, q, r = case
    pq, qp = kr_distance(p, q)[0], kr_distance(q, p)[0]
    pr, qr = kr_distance(p, r)[0], kr_distance(q, r)[0]
    return max(abs(pq - qp), pr - pq - qr, 0.0)


def _quota_case(weights):
    from .core import MetricSpace as _M

    space = _M.from_matrix(np.ones((len(weights), len(weights))) - np.eye(len(weights)))
    target = DiscreteMeasure(space, tuple(enumerate(weights)))
    n = 3 * int(np.lcm.reduce([w.denominator for w in weights]))
    seq = quota_sequence(target, min(n, 240))
    worst = 0.0
    counts = [0] * len(weights)
    for t, p in enumerate(seq.ids, start=1):
        counts[p] += 1
        worst = max(worst, max(abs(c - t * w) for c, w in zip(counts, weights)))
    exact = 0.0
    for t in range(1, len(seq) + 1):
        if all((t * w).denominator == 1 for w in weights):
            exact = max(exact, kr_distance(empirical(seq, t), target)[0])
    return float(worst), exact


def _pushforward_case(case):
    from .product import pushforward

    t, p, q = case
    return kr_distance(pushforward(p, t), pushforward(q, t))[0] - kr_distance(p, q)[0]


def selftest_rows(seed: int, count: int) -> list:
    from . import fuzz
    from .product import Kernel, run_product

    rng = np.random.default_rng(seed)
    rows = []
    workers = io.worker_count()

    def run(fn, cases):
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, cases))

    cases = []
    for _ in range(count):
        s = fuzz.random_space(rng, int(rng.integers(2, 9)))
        cases.append((fuzz.random_measure(rng, s, int(rng.integers(1, 9))), fuzz.random_measure(rng, s, int(rng.integers(1, 9)))))
    rows.append(("kr_oracle_equivalence", count, max(run(_oracle_case, cases)), 1e-7))

    cases = []
    for _ in range(count):
        s = fuzz.random_space(rng, int(rng.integers(3, 13)))
        cases.append(tuple(fuzz.random_measure(rng, s, int(rng.integers(1, 11))) for _ in range(3)))
    rows.append(("kr_metric_axioms", count, max(run(_axiom_case, cases)), 1e-9))

    worst = 0.0
    for d in (0.1, 1.0, 2.0, 3.0, 10.0):
        s = MetricSpace.from_matrix([[0.0, d], [d, 0.0]])
        a, b = DiscreteMeasure.dirac(s, 0), DiscreteMeasure.dirac(s, 1)
        worst = max(worst, abs(kr_distance(a, b)[0] - min(d, 2.0)), abs(kr_dual(a, b)[0] - min(d, 2.0)))
    rows.append(("kr_truncation", 5, worst, 1e-9))

    weights = [fuzz.random_weights(rng, int(rng.integers(1, 7)), 12) for _ in range(count)]
    results = run(_quota_case, weights)
    rows.append(("quota_prefix_deviation", count, max(r[0] for r in results), 1.0))
    rows.append(("quota_exact_points", count, max(r[1] for r in results), 0.0))

    s = fuzz.random_space(rng, 12)
    target = DiscreteMeasure(s, tuple(enumerate(fuzz.random_weights(rng, 12))))
    decomp = PieceDecomposition.from_target(s, target, [range(4), range(8), range(12)], 60)
    identity = max(abs(glue_parts(decomp, n)[1] - target.restrict(decomp.chain(n)).mass) for n in range(1, 61))
    rows.append(("glue_mass_identity", 60, identity, 0.0))
    ratio = 0.0
    for eps in (0.25, 0.1):
        for f in bump_tests(s, range(12)):
            rep = glue_convergence_check(decomp, f, eps)
            ratio = max(ratio, rep.achieved / rep.bound)
    rows.append(("glue_convergence_ratio", 24, ratio, 1.0))

    x = fuzz.random_space(rng, 3, label="X")
    y = fuzz.random_space(rng, 3, label="Y")
    nu = DiscreteMeasure(x, tuple(enumerate(fuzz.random_weights(rng, 3))))
    lam = [DiscreteMeasure(y, tuple(enumerate(fuzz.random_weights(rng, 3)))) for _ in range(2)]
    kernel = Kernel.from_values(x, y, [lam[int(v)] for v in rng.integers(0, 2, size=3)])
    prod = run_product(nu, kernel, 5, eps=0.25)
    rows.append(("product_convergence_ratio", len(prod.levels), prod.report.worst_ratio, 1.0))

    cases = []
    for _ in range(count):
        t = fuzz.random_contraction(rng, int(rng.integers(2, 7)), int(rng.integers(1, 7)))
        cases.append((t, fuzz.random_measure(rng, t.domain, 3), fuzz.random_measure(rng, t.domain, 3)))
    rows.append(("pushforward_contraction", count, max(run(_pushforward_case, cases)), 1e-9))
    return [(name, n, float(worst), tol, float(worst) <= tol) for name, n, worst, tol in rows]


def cmd_selftest(args) -> int:
    rows = selftest_rows(args.seed, args.count)
    ok = all(r[-1] for r in rows)
    summary = {"command": "selftest", "seed": args.seed, "count": args.count, "verdict": ok}
    text = io.emit_report(args.report, ["check", "instances", "worst", "tolerance", "passed"], rows, summary, args.summary)
    if args.report is None:
        _emit(text)
    return 0 if ok else 1


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="udseq", description="Uniformly distributed sequences for discrete measures.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kr", help="KR distance between two measures")
    p.add_argument("--space", required=True)
    p.add_argument("--mu", required=True)
    p.add_argument("--nu", required=True)
    p.add_argument("--dual", action="store_true", help="also solve the dual LP and compare")
    p.add_argument("--plan", help="write the optimal transport plan here")
    p.set_defaults(func=cmd_kr)

    p = sub.add_parser("gen", help="generate a point sequence for a target")
    p.add_argument("--method", choices=["greedy", "quota", "blocks"], required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("verify", help="certify a sequence at checkpoints")
    p.add_argument("--target", required=True)
    p.add_argument("--seq", required=True)
    p.add_argument("--checkpoints", required=True)
    p.add_argument("--tol", type=float, required=True)
    p.add_argument("--report")
    p.add_argument("--summary")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("glue", help="glued measure nu_n of a piece decomposition")
    p.add_argument("--decomp", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--eps", help="comma-separated eps values for the convergence check")
    p.add_argument("--report")
    p.add_argument("--summary")
    p.set_defaults(func=cmd_glue)

    p = sub.add_parser("tight", help="tightness certificate")
    p.add_argument("--decomp", required=True)
    p.add_argument("--eps", required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--cert", required=True)
    p.set_defaults(func=cmd_tight)

    p = sub.add_parser("product", help="finitely supported approximations of a joint measure")
    p.add_argument("--marginal", required=True)
    p.add_argument("--kernel", required=True)
    p.add_argument("--levels", type=int, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--horizon", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.add_argument("--summary")
    p.set_defaults(func=cmd_product)

    p = sub.add_parser("selftest", help="seeded oracle-equivalence and invariant checks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--report")
    p.add_argument("--summary")
    p.set_defaults(func=cmd_selftest)
    return parser


def run_config(args) -> io.RunConfig:
    opts = {k: v for k, v in vars(args).items() if k not in ("func", "command")}
    tolerances = {}
    if opts.get("tol") is not None:
        tolerances["tol"] = opts["tol"]
    eps = opts.get("eps")
    if eps is not None:
        for k, v in enumerate(_floats(eps) if isinstance(eps, str) else [eps]):
            tolerances[f"eps{k}"] = v
    horizon = opts.get("horizon") or opts.get("n") or opts.get("levels") or opts.get("count") or 1
    outputs = {k: opts[k] for k in ("out", "report", "summary", "plan", "cert") if opts.get(k)}
    return io.RunConfig(args.command, opts, horizon, tolerances, opts.get("seed") or 0, outputs)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run_config(args)
        return args.func(args)
    except UdseqError as e:
        print(f"udseq {args.command}: {e}", file=sys.stderr)
        for path, msg in getattr(e, "violations", [])[:20]:
            print(f"  {path}: {msg}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"udseq {args.command}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
