from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from udseq.core import (
    DiscreteMeasure,
    MetricSpace,
    PointSequence,
    TestFunction,
    collect,
    empirical,
    integrate,
    product_space,
    validate_space,
    variation,
)
from udseq.errors import DomainError, MassError, MetricAxiomError, RangeError, SpaceMismatchError
from udseq.kr import kr_distance

from conftest import seeds, space_and_measures

F = Fraction


@pytest.fixture
def abc():
    return MetricSpace.from_matrix([[0, 1, 2], [1, 0, 1], [2, 1, 0]], points=["a", "b", "c"])


def test_empirical_single_point(abc):
    assert empirical(PointSequence(abc, (0,)), 1) == DiscreteMeasure.dirac(abc, 0)


def test_empirical_alternating(abc):
    m = empirical(PointSequence(abc, (0, 1, 0, 1)), 4)
    assert m.as_dict() == {0: F(1, 2), 1: F(1, 2)}


def test_empirical_thirds(abc):
    m = empirical(PointSequence(abc, (0, 0, 1)), 3)
    assert m.as_dict() == {0: F(2, 3), 1: F(1, 3)}


@pytest.mark.parametrize("n", [0, 4])
def test_empirical_out_of_range(abc, n):
    with pytest.raises(RangeError):
        empirical(PointSequence(abc, (0, 1, 2)), n)


@given(st.lists(st.integers(0, 4), min_size=1, max_size=100))
def test_empirical_mass_is_exactly_one(ids):
    s = MetricSpace.from_matrix(np.ones((5, 5)) - np.eye(5))
    seq = PointSequence(s, tuple(ids))
    for n in range(1, len(ids) + 1):
        assert empirical(seq, n).mass == 1


def test_integrate_examples(abc):
    f = np.array([0.7, -1.0, 0.0])
    assert integrate(DiscreteMeasure.dirac(abc, 0), f) == 0.7
    half = DiscreteMeasure(abc, ((0, F(1, 2)), (1, F(1, 2))))
    assert integrate(half, np.array([1.0, -1.0, 0.0])) == 0.0
    m = DiscreteMeasure(abc, ((0, 0.3), (1, 0.7)))
    assert integrate(m, np.array([0.0, 1.0, 0.0])) == pytest.approx(0.7, abs=1e-15)


def test_integrate_undefined_point(abc):
    with pytest.raises(DomainError):
        integrate(DiscreteMeasure.dirac(abc, 2), np.array([0.0, 1.0]))
    with pytest.raises(DomainError):
        integrate(DiscreteMeasure.dirac(abc, 1), np.array([0.0, np.nan, 1.0]))


@given(seeds, st.floats(-2, 2), st.floats(-2, 2))
def test_integrate_is_linear(seed, a, b):
    rng = np.random.default_rng(seed)
    space, (m,) = space_and_measures(seed, 6, 1)
    f, g = rng.uniform(-1, 1, 6), rng.uniform(-1, 1, 6)
    assert abs(integrate(m, a * f + b * g) - a * integrate(m, f) - b * integrate(m, g)) <= 1e-12
    m2 = m.scaled(2.0)
    assert abs(integrate(m2, f) - 2 * integrate(m, f)) <= 1e-12


@given(seeds)
def test_lipschitz_integrals_bounded_by_kr(seed):
    rng = np.random.default_rng(seed)
    space, (p, q) = space_and_measures(seed, 7, 2)
    # a random bounded 1-Lipschitz function: clipped distance to a random point, shifted
    c = int(rng.integers(0, 7))
    f = TestFunction.lipschitz(space, np.clip(space.dist[c] - rng.uniform(0, 2), -1, 1))
    assert abs(integrate(p, f) - integrate(q, f)) <= kr_distance(p, q)[0] + 1e-9


def test_validate_space_examples():
    assert validate_space(MetricSpace.from_matrix([[0, 1], [1, 0]])) == []
    neg = validate_space(MetricSpace.from_matrix([[0, -1], [-1, 0]]))
    assert any(v.kind == "nonnegativity" and v.points == (0, 1) for v in neg)
    tri = validate_space(MetricSpace.from_matrix([[0, 1, 5], [1, 0, 1], [5, 1, 0]]))
    assert [v for v in tri if v.kind == "triangle"][0].points == (0, 1, 2)


def test_validate_space_asymmetry_and_identity():
    kinds = {v.kind for v in validate_space(MetricSpace.from_matrix([[0.5, 1], [2, 0]]))}
    assert {"identity", "symmetry"} <= kinds


def test_check_raises_on_bad_metric():
    with pytest.raises(MetricAxiomError):
        MetricSpace.from_matrix([[0, 1, 5], [1, 0, 1], [5, 1, 0]]).check()


def test_duplicate_points_rejected():
    with pytest.raises(DomainError):
        MetricSpace.from_matrix([[0, 1], [1, 0]], points=["a", "a"])


def test_measure_validation(abc):
    with pytest.raises(DomainError):
        DiscreteMeasure(abc, ((0, -0.1),))
    with pytest.raises(DomainError):
        DiscreteMeasure(abc, ((0, F(1, 2)), (0, F(1, 2))))
    with pytest.raises(DomainError):
        DiscreteMeasure(abc, ((3, 1.0),))


def test_probability_tolerance(abc):
    assert DiscreteMeasure(abc, ((0, 0.5), (1, 0.5 + 5e-13))).is_probability()
    assert not DiscreteMeasure(abc, ((0, 0.5), (1, 0.5 + 5e-12))).is_probability()
    with pytest.raises(MassError):
        DiscreteMeasure(abc, ((0, F(1, 2)),)).require_probability()


def test_integer_weights_become_exact(abc):
    m = DiscreteMeasure(abc, ((0, 1),))
    assert isinstance(m.atoms[0][1], Fraction) and m.is_exact


def test_collect_adds_repeats(abc):
    assert collect(abc, [(0, F(1, 4)), (1, F(1, 4)), (0, F(1, 2))]).as_dict() == {0: F(3, 4), 1: F(1, 4)}


def test_variation(abc):
    a = DiscreteMeasure(abc, ((0, F(1, 2)), (1, F(1, 2))))
    b = DiscreteMeasure.dirac(abc, 1)
    assert variation(a, b) == 1


def test_space_mismatch(abc):
    other = MetricSpace.from_matrix([[0, 2], [2, 0]])
    with pytest.raises(SpaceMismatchError):
        kr_distance(DiscreteMeasure.dirac(abc, 0), DiscreteMeasure.dirac(other, 0))


def test_product_space_sum_metric(abc):
    y = MetricSpace.from_matrix([[0, 3], [3, 0]], points=["u", "v"])
    p = product_space(abc, y)
    assert len(p) == 6 and p.points[1] == "(a,v)"
    assert p.d(0 * 2 + 0, 2 * 2 + 1) == 2 + 3
    assert validate_space(p) == []


def test_product_test_function_checks(abc):
    y = MetricSpace.from_matrix([[0, 0.5], [0.5, 0]])
    p = product_space(abc, y)
    f = TestFunction.product(p, [1, -1, 0.5], [0.2, -0.2])
    assert f(1 * 2 + 1) == pytest.approx(0.2)
    with pytest.raises(DomainError):
        TestFunction.product(p, [1, 0, 0], [1, -1])  # Lip(phi) = 4 > 1
    with pytest.raises(DomainError):
        TestFunction.product(abc, [1, 0, 0], [1, -1])
