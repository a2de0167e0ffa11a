from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from udseq import fuzz
from udseq.construct import quota_measure
from udseq.core import DiscreteMeasure, MetricSpace, TestFunction, integrate
from udseq.errors import DegenerateError, DomainError, HorizonError, MassError, NoCertificateError
from udseq.glue import (
    PieceDecomposition,
    first_index,
    glue,
    glue_convergence_check,
    glue_parts,
    tightness_certificate,
)
from udseq.instances import escaping_family, geometric_decomposition, two_piece_decomposition
from udseq.kr import kr_distance

F = Fraction


@pytest.fixture
def line3():
    return MetricSpace.from_matrix([[0, 1, 2], [1, 0, 1], [2, 1, 0]])


def bump(space, p):
    return TestFunction.lipschitz(space, np.clip(1.0 - space.dist[p], -1.0, 1.0))


def test_single_piece_identity(line3):
    mu = DiscreteMeasure(line3, ((0, F(1, 4)), (2, F(3, 4))))
    d = PieceDecomposition(line3, ([0, 1, 2],), mu, ((mu,) * 5,))
    for n in range(1, 6):
        assert glue(d, n) == mu
    rep = glue_convergence_check(d, bump(line3, 0), 0.1)
    # the tail from n1 = 1 is mu(X_1) = 1, so the strict tail condition first holds at n1 = 2
    assert (rep.n1, rep.m, rep.achieved) == (2, 2, 0.0)


def test_two_piece_masses(line3):
    mu = DiscreteMeasure(line3, ((0, F(3, 5)), (1, F(2, 5))))
    d = PieceDecomposition.from_target(line3, mu, [[0], [0, 1]], 4)
    _, c1 = glue_parts(d, 1)
    _, c2 = glue_parts(d, 2)
    assert c1 == F(3, 5) and c2 == 1
    assert glue(d, 2).mass == 1
    assert glue(d, 1) == d.approximator(1, 1).scaled(1 / F(3, 5))


def test_constant_function_has_zero_error():
    d = two_piece_decomposition()
    rep = glue_convergence_check(d, TestFunction.lipschitz(d.space, np.ones(3)), 0.1)
    assert rep.achieved == 0


def test_two_piece_convergence_against_direct_evaluation():
    d = two_piece_decomposition()
    f = bump(d.space, 2)
    rep = glue_convergence_check(d, f, 0.1)
    assert rep.bound == pytest.approx(0.4) and rep.passed
    # recompute nu_n independently: piece 1 is delta_a with mass 1/2; piece 2 is
    # the quota discretization of the shell {b, c} with weights 2/3, 1/3, scaled by 1/2
    exact = integrate(d.target, f)
    for n, err in rep.errors:
        b = (2 * n + 1) // 3  # largest-remainder count of b among n draws from (2/3, 1/3)
        counts = {0: 0, 1: b, 2: n - b}
        nu = {0: F(1, 2), 1: F(counts[1], 2 * n), 2: F(counts[2], 2 * n)}
        direct = sum(float(w) * f(p) for p, w in nu.items())
        assert err == pytest.approx(abs(exact - direct), abs=1e-12)
        assert err <= 0.4


def test_degenerate_first_piece(line3):
    mu = DiscreteMeasure.dirac(line3, 1)
    d = PieceDecomposition.from_target(line3, mu, [[0], [0, 1, 2]], 3)
    with pytest.raises(DegenerateError):
        glue(d, 1)
    assert glue(d, 2) == mu


def test_validation_errors(line3):
    mu = DiscreteMeasure.uniform(line3)
    with pytest.raises(DomainError):
        PieceDecomposition(line3, ([0, 1], [0]), mu)
    with pytest.raises(MassError):
        PieceDecomposition(line3, ([0], [0, 1]), mu)
    with pytest.raises(MassError):
        PieceDecomposition(line3, ([0], [0, 1, 2]), mu, ((DiscreteMeasure.dirac(line3, 0),), (mu,)))
    with pytest.raises(DomainError):
        bad = DiscreteMeasure(line3, ((1, F(1, 3)),))
        PieceDecomposition(line3, ([0], [0, 1, 2]), mu, ((bad,), (mu.restrict([1, 2]),)))


def test_horizon_errors():
    d = two_piece_decomposition(horizon=4)
    with pytest.raises(HorizonError):
        glue(d, 5)
    with pytest.raises(HorizonError) as info:
        glue_convergence_check(d, bump(d.space, 2), 0.01)
    assert info.value.best is not None


def test_c_n_increases_to_one():
    d = geometric_decomposition(size=20, horizon=40)
    cs = [glue_parts(d, n)[1] for n in range(1, 41)]
    assert all(a <= b for a, b in zip(cs, cs[1:]))
    for n, c in enumerate(cs, start=1):
        assert c == d.target.restrict(d.chain(n)).mass
        assert c >= 1 - d.tail_mass(n + 1)
    assert cs[-1] == 1


def test_first_index():
    d = geometric_decomposition(size=20, horizon=10)
    # tail beyond X_{n-1} = {0..n-2} has mass 2^-(n-1)
    assert first_index(d, 0.25) == 4
    assert first_index(d, 0.1) == 5


def random_decomposition(seed, horizon=60):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 10))
    space = fuzz.random_space(rng, n)
    target = DiscreteMeasure(space, tuple(enumerate(fuzz.random_weights(rng, n))))
    cuts = sorted(set(int(c) for c in rng.integers(1, n, size=2))) + [n]
    return PieceDecomposition.from_target(space, target, [range(c) for c in cuts], horizon)


@given(st.integers(0, 2**32 - 1), st.sampled_from([0.25, 0.1]))
def test_convergence_report_respects_four_eps(seed, eps):
    d = random_decomposition(seed)
    for p in range(len(d.space)):
        rep = glue_convergence_check(d, bump(d.space, p), eps)
        assert rep.achieved <= 4 * eps
        assert rep.m >= rep.n1


@given(st.integers(0, 2**32 - 1))
def test_mass_identity_is_exact(seed):
    d = random_decomposition(seed, horizon=30)
    for n in range(1, 31):
        _, c = glue_parts(d, n)
        assert isinstance(c, Fraction) and c == d.target.restrict(d.chain(n)).mass


@given(st.integers(0, 2**32 - 1))
def test_finite_union_closure(seed):
    d = random_decomposition(seed, horizon=120)
    early = kr_distance(glue(d, 10), d.target)[0]
    late = kr_distance(glue(d, 120), d.target)[0]
    assert late <= 2 * len(d.space) / 120 * 2 + 1e-12
    assert late <= early + 1e-12


def test_tightness_single_set(line3):
    ms = [DiscreteMeasure.uniform(line3, [0, 1]), DiscreteMeasure.dirac(line3, 1)]
    mu = DiscreteMeasure.uniform(line3, [0, 1])
    d = PieceDecomposition.from_target(line3, mu, [[0, 1], [0, 1, 2]], 2)
    cert = tightness_certificate(ms, d, [0.5, 0.1, 0.001])
    assert all(e.bound == 0 for e in cert.entries) and cert.check()


def test_tightness_escaping_mass():
    d = escaping_family(30)
    with pytest.raises(NoCertificateError) as info:
        tightness_certificate(d.measures, d, [0.1])
    assert info.value.best == 1


def test_tightness_two_piece():
    d = two_piece_decomposition()
    fam = [glue(d, n) for n in range(1, d.horizon + 1)]
    cert = tightness_certificate(fam, d, [0.25])
    e = cert.entries[0]
    assert e.bound <= 0.75 and cert.recompute(e) == e.bound


def test_tightness_geometric_chain_is_nontrivial():
    d = geometric_decomposition()
    fam = [glue(d, n) for n in range(1, d.horizon + 1)]
    cert = tightness_certificate(fam, d, [0.25, 0.1, 0.01])
    assert cert.check()
    bounds = [e.bound for e in cert.entries]
    assert bounds == [F(1, 16), F(1, 32), F(1, 256)]
    for e in cert.entries:
        assert max(m.outside(e.compact) for m in fam) == e.bound <= 3 * e.eps
