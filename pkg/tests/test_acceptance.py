"""Acceptance criteria, one test per criterion.

Each test records a ``[criterion k] PASS|FAIL`` line; the lines are printed
in the terminal summary (see conftest) and when this file is run directly.
"""
import os
import subprocess
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from udseq import fuzz
from udseq.construct import greedy_extend, quota_counts, quota_sequence, verify_ud
from udseq.core import DiscreteMeasure, MetricSpace, PointSequence, TestFunction, empirical
from udseq.errors import NoCertificateError
from udseq.glue import glue, glue_convergence_check, glue_parts, tightness_certificate
from udseq.instances import escaping_family, geometric_decomposition, grid_target, product_4x4, rings_decomposition
from udseq.kr import kr_distance, kr_dual, kr_oracle
from udseq.product import leaky_marginals, marginal_x, mass_chain, pushforward, run_product

RESULTS = []


def record(k, title, ok, detail):
    line = f"[criterion {k:2d}] {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


def test_01_kr_oracle_equivalence():
    rng = np.random.default_rng(1001)
    start = time.perf_counter()
    worst_oracle = worst_dual = 0.0
    for _ in range(500):
        s = fuzz.random_space(rng, int(rng.integers(2, 9)))
        p = fuzz.random_measure(rng, s, int(rng.integers(1, 9)))
        q = fuzz.random_measure(rng, s, int(rng.integers(1, 9)))
        v = kr_distance(p, q)[0]
        worst_oracle = max(worst_oracle, abs(v - float(kr_oracle(p, q))))
        worst_dual = max(worst_dual, abs(v - kr_dual(p, q)[0]))
    elapsed = time.perf_counter() - start
    ok = worst_oracle <= 1e-7 and worst_dual <= 1e-7 and elapsed < 30
    record(1, "KR oracle equivalence (500 instances)", ok,
           f"max |primal-oracle| = {worst_oracle:.2e}, max |primal-dual| = {worst_dual:.2e}, {elapsed:.1f} s")
    assert ok


def test_02_metric_axioms():
    rng = np.random.default_rng(1002)
    start = time.perf_counter()
    worst_sym = worst_tri = 0.0
    for _ in range(500):
        s = fuzz.random_space(rng, int(rng.integers(3, 13)))
        p, q, r = (fuzz.random_measure(rng, s, int(rng.integers(1, 11))) for _ in range(3))
        pq, qp = kr_distance(p, q)[0], kr_distance(q, p)[0]
        worst_sym = max(worst_sym, abs(pq - qp))
        worst_tri = max(worst_tri, kr_distance(p, r)[0] - pq - kr_distance(q, r)[0])
    elapsed = time.perf_counter() - start
    ok = worst_sym <= 1e-9 and worst_tri <= 1e-9 and elapsed < 60
    record(2, "KR metric axioms (500 triples)", ok,
           f"max asymmetry = {worst_sym:.2e}, max triangle excess = {worst_tri:.2e}, {elapsed:.1f} s")
    assert ok


def test_03_truncation():
    details, ok = [], True
    for d in (0.1, 1.0, 2.0, 3.0, 10.0):
        s = MetricSpace.from_matrix([[0.0, d], [d, 0.0]])
        a, b = DiscreteMeasure.dirac(s, 0), DiscreteMeasure.dirac(s, 1)
        v = kr_distance(a, b)[0]
        dual, pot = kr_dual(a, b)
        witness = pot.check() and abs(pot.gap(a, b) - min(d, 2)) <= 1e-9
        good = abs(v - min(d, 2)) <= 1e-9 and abs(dual - min(d, 2)) <= 1e-9 and witness
        ok &= good
        details.append(f"d={d:g}: {v:.12f} (f = {pot.values[0]:+.3f}, {pot.values[1]:+.3f})")
    record(3, "truncation min(d, 2) with dual witnesses", ok, "; ".join(details))
    assert ok


def test_04_quota_proportionality():
    rng = np.random.default_rng(1004)
    worst_dev, worst_exact, exact_points = Fraction(0), 0, 0
    for _ in range(200):
        k = int(rng.integers(1, 7))
        weights = fuzz.random_weights(rng, k, 13)
        space = fuzz.random_space(rng, k)
        target = DiscreteMeasure(space, tuple(enumerate(weights)))
        seq = quota_sequence(target, 200)
        counts = [0] * k
        for n, p in enumerate(seq.ids, start=1):
            counts[p] += 1
            worst_dev = max(worst_dev, max(abs(c - n * w) for c, w in zip(counts, weights)))
        # every prefix of the length-200 sequence is the length-n quota sequence
        assert sorted(quota_counts(weights, 200)) == sorted(counts)
        for n in range(1, 201):
            if all((n * w).denominator == 1 for w in weights):
                exact_points += 1
                emp = empirical(seq, n)
                worst_exact = max(worst_exact, kr_distance(emp, target)[0], kr_oracle(emp, target))
    ok = worst_dev < 1 and worst_exact == 0 and exact_points > 0
    record(4, "quota proportionality (200 targets)", ok,
           f"max prefix deviation = {float(worst_dev):.4f} (< 1), KR = {worst_exact} at {exact_points} integral prefixes")
    assert ok


def test_05_greedy_grid():
    target = grid_target(10)
    start = time.perf_counter()
    seq = greedy_extend(target, PointSequence(target.space, ()), 500)
    cert = verify_ud(target, seq, [50, 100, 200, 500], 0.05)
    elapsed = time.perf_counter() - start
    ok = cert.distances[-1] <= 0.05 and cert.monotone_tail and cert.verdict and elapsed < 300
    record(5, "greedy u.d. sequence on the 10x10 grid", ok,
           "KR at n=50,100,200,500: " + ", ".join(f"{d:.6f}" for d in cert.distances) + f"; {elapsed:.1f} s")
    assert ok


def rings_tests(space):
    tests = [TestFunction.lipschitz(space, np.clip(1.0 - space.dist[p], -1, 1), name=f"bump{p}") for p in range(0, 30, 3)]
    tests.append(TestFunction.lipschitz(space, np.clip(np.linalg.norm(space.coords, axis=1) - 2.0, -1, 1), name="radius"))
    tests.append(TestFunction.lipschitz(space, np.ones(len(space)), name="one"))
    return tests


def test_06_lemma_identities():
    d = rings_decomposition(horizon=300)
    identity = all(glue_parts(d, n)[1] == d.target.restrict(d.chain(n)).mass for n in range(1, d.horizon + 1))
    worst = {}
    for eps in (0.25, 0.1):
        worst[eps] = max(glue_convergence_check(d, f, eps).achieved for f in rings_tests(d.space))
    ok = identity and all(worst[e] <= 4 * e for e in worst)
    record(6, "gluing: exact c_n = mu(X_n) and the 4 eps bound", ok,
           f"c_n identity exact for n<=300: {identity}; "
           + ", ".join(f"eps={e}: achieved {w:.4f} <= {4 * e}" for e, w in worst.items()))
    assert ok


def test_07_tightness():
    details, ok = [], True
    for name, d in (("rings", rings_decomposition(horizon=300)), ("geometric", geometric_decomposition())):
        fam = [glue(d, n) for n in range(1, d.horizon + 1) if glue_parts(d, n)[1] > 0]
        cert = tightness_certificate(fam, d, [0.25, 0.1])
        for e in cert.entries:
            recomputed = max(m.outside(e.compact) for m in fam)
            good = recomputed == e.bound and recomputed <= 3 * e.eps
            ok &= good
            details.append(f"{name} eps={e.eps}: sup = {float(recomputed):.5f} <= {3 * e.eps:.2f}")
    esc = escaping_family(50)
    try:
        tightness_certificate(esc.measures, esc, [0.25, 0.1])
        ok = False
        details.append("escaping mass: certificate wrongly issued")
    except NoCertificateError as e:
        details.append(f"escaping mass: no certificate (best bound {float(e.best)})")
    record(7, "tightness 3 eps and escaping mass", ok, "; ".join(details))
    assert ok


def test_08_product_pipeline():
    nu, kernel = product_4x4()
    start = time.perf_counter()
    details, ok = [], True
    levels = 8
    pieces = mass_chain(nu, levels)
    for label, marg in (("quota", None), ("leaky", leaky_marginals(nu, pieces, 4 * levels, Fraction(3, 4)))):
        run = run_product(nu, kernel.with_pieces(pieces), levels, eps=0.25, marginals=marg)
        leak = all(r.schedule.leakage <= Fraction(1, 2**r.level) for r in run.levels)
        gap = all(r.sup_kernel_gap <= 2.0 ** (1 - r.level) for r in run.levels)
        proj = all(marginal_x(r.raw) == r.marginal for r in run.levels)
        good = leak and gap and proj and run.report.passed and run.report.bound == 1.5
        ok &= good
        details.append(f"{label}: m_n = {[r.m for r in run.levels]}, leakage/gap/projection ok = {leak}/{gap}/{proj}, "
                       f"worst error {run.report.worst_ratio * 1.5:.4f} <= 1.5 past N={run.report.threshold}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 60
    record(8, "product pipeline on 4x4", ok, "; ".join(details) + f"; {elapsed:.1f} s")
    assert ok


def test_09_pushforward_contraction():
    rng = np.random.default_rng(1009)
    worst = -np.inf
    for _ in range(200):
        t = fuzz.random_contraction(rng, int(rng.integers(2, 7)), int(rng.integers(1, 7)))
        p = fuzz.random_measure(rng, t.domain, int(rng.integers(1, len(t.domain) + 1)))
        q = fuzz.random_measure(rng, t.domain, int(rng.integers(1, len(t.domain) + 1)))
        worst = max(worst, kr_distance(pushforward(p, t), pushforward(q, t))[0] - kr_distance(p, q)[0])
    ok = worst <= 1e-9
    record(9, "pushforward contraction (200 maps)", ok, f"max KR(T#p,T#q) - KR(p,q) = {worst:.3e}")
    assert ok


def test_10_selftest_determinism(tmp_path):
    outs = []
    for k in range(2):
        report = tmp_path / f"r{k}.csv"
        proc = subprocess.run(
            [sys.executable, "-m", "udseq.cli", "selftest", "--seed", "42", "--report", str(report)],
            capture_output=True, env=dict(os.environ), check=False,
        )
        outs.append((proc.returncode, report.read_bytes()))
    ok = outs[0] == outs[1] and outs[0][0] == 0
    record(10, "selftest --seed 42 determinism", ok, f"exit codes {outs[0][0]}/{outs[1][0]}, reports byte-identical: {outs[0][1] == outs[1][1]}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
