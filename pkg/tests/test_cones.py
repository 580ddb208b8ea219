import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conetest.cones import (
    Coordinate,
    FiniteDirections,
    FullSpace,
    Intersection,
    KSparse,
    LassoCone,
    NonNegOrthant,
    parse_cone,
)
from conetest.errors import ConeSpecError, UnsupportedConeOperation


def test_membership_examples():
    assert KSparse(1, 3).contains([0.0, 3.0, 0.0])
    assert not NonNegOrthant(2).contains([1.0, -0.01])
    # l1 norm 2 exceeds 1 * sqrt(v'v) = sqrt(2)
    assert not LassoCone(1.0, 2).contains([1.0, 1.0], cov=np.eye(2))
    assert LassoCone(1.5, 2).contains([1.0, 1.0], cov=np.eye(2))


def test_lasso_cone_requires_cov():
    with pytest.raises(TypeError):
        LassoCone(1.0, 2).contains([1.0, 0.0])
    # zero ellipsoid norm but nonzero vector: no finite scaling reaches the set
    s = np.zeros((2, 2))
    assert not LassoCone(1.0, 2).contains([1.0, -1.0], cov=s)
    assert LassoCone(1.0, 2).contains([0.0, 0.0], cov=s)


def test_polar_examples():
    assert FullSpace(2).polar_contains([0.0, 0.0])
    assert not FullSpace(2).polar_contains([1e-9, 0.0])
    assert NonNegOrthant(2).polar_contains([-1.0, -2.0])
    assert not KSparse(1, 2).polar_contains([0.0, -0.5])


def test_polar_intersections():
    one_sided = Intersection((Coordinate(0, 3), NonNegOrthant(3)))
    assert one_sided.polar_contains([-2.0, 5.0, -7.0])
    assert not one_sided.polar_contains([0.1, 5.0, -7.0])
    sparse_pos = Intersection((KSparse(2, 3), NonNegOrthant(3)))
    assert sparse_pos.polar_contains([-1.0, -1.0, 0.0])
    assert not sparse_pos.polar_contains([-1.0, 0.5, 0.0])


def test_lasso_polar_unsupported():
    with pytest.raises(UnsupportedConeOperation):
        LassoCone(1.0, 2).polar_contains([0.0, 0.0])


def test_is_scone():
    assert KSparse(2, 4).is_scone()
    assert not LassoCone(1.0, 2).is_scone()
    assert NonNegOrthant(3).is_scone()
    assert FullSpace(3).is_scone()
    assert Coordinate(1, 3).is_scone()
    assert FiniteDirections(np.array([[0.0, 2.0], [-1.0, 0.0]])).is_scone()
    assert not FiniteDirections(np.array([[1.0, -1.0]])).is_scone()
    assert Intersection((KSparse(1, 3), NonNegOrthant(3))).is_scone()
    assert not Intersection((KSparse(1, 2), LassoCone(1.0, 2))).is_scone()


def _sample_member(cone, rng):
    p = cone.p
    if isinstance(cone, FullSpace):
        return rng.standard_normal(p)
    if isinstance(cone, NonNegOrthant):
        return np.abs(rng.standard_normal(p))
    if isinstance(cone, Coordinate):
        v = np.zeros(p)
        v[cone.index] = rng.standard_normal()
        return v
    if isinstance(cone, KSparse):
        v = np.zeros(p)
        idx = rng.choice(p, size=cone.k, replace=False)
        v[idx] = rng.standard_normal(cone.k)
        return v
    if isinstance(cone, FiniteDirections):
        d = cone.directions[rng.integers(len(cone.directions))]
        return float(rng.uniform(0.1, 5.0)) * d
    raise NotImplementedError


@pytest.mark.parametrize("cone", [
    FullSpace(4),
    NonNegOrthant(4),
    Coordinate(2, 4),
    KSparse(2, 4),
    FiniteDirections(np.array([[1.0, -1.0, 0.0, 0.0], [0.0, 1.0, 2.0, 0.0]])),
])
def test_cone_axiom_positive_scaling(cone):
    rng = np.random.default_rng(21)
    for _ in range(50):
        v = _sample_member(cone, rng)
        assert cone.contains(v)
        for gamma in (0.5, 2.0, 10.0, float(rng.uniform(0.01, 100))):
            assert cone.contains(gamma * v)


@pytest.mark.parametrize("cone", [NonNegOrthant(4), Coordinate(1, 4), KSparse(2, 4)])
def test_scone_axiom_positive_diagonal(cone):
    rng = np.random.default_rng(22)
    for _ in range(100):
        v = _sample_member(cone, rng)
        d = rng.uniform(0.05, 20.0, size=4)
        assert cone.contains(d * v)


@pytest.mark.parametrize("cone", [
    NonNegOrthant(4),
    Coordinate(2, 4),
    KSparse(2, 4),
    FullSpace(4),
    FiniteDirections(np.array([[1.0, 2.0, 0.0, 0.0], [0.0, 0.0, -3.0, 1.0]])),
])
def test_polar_inner_product_check(cone):
    rng = np.random.default_rng(23)
    candidates = rng.standard_normal((40, 4))
    candidates = np.vstack([candidates, -np.abs(rng.standard_normal((10, 4))), np.zeros((1, 4))])
    for v in candidates:
        if not cone.polar_contains(v):
            continue
        for _ in range(1000):
            u = _sample_member(cone, rng)
            assert float(v @ u) <= 1e-12 * max(1.0, np.linalg.norm(v) * np.linalg.norm(u))


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_ksparse_polar_is_origin(seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(3)
    if np.any(v != 0):
        assert not KSparse(1, 3).polar_contains(v)
    assert KSparse(1, 3).polar_contains(np.zeros(3))


def test_parse_cone():
    assert parse_cone("full", 3) == FullSpace(3)
    assert parse_cone("nonneg", 2) == NonNegOrthant(2)
    assert parse_cone("coord:2", 3) == Coordinate(1, 3)  # 1-based in the mini-language
    assert parse_cone("ksparse:2", 5) == KSparse(2, 5)
    plus = parse_cone("ksparse+:2", 5)
    assert isinstance(plus, Intersection)
    assert parse_cone("lasso:1.5", 4) == LassoCone(1.5, 4)


def test_parse_cone_dirs(tmp_path):
    path = tmp_path / "dirs.csv"
    path.write_text("1.0,-1.0,0.0\n0.0,1.0,0.0\n")
    cone = parse_cone(f"dirs:{path}", 3)
    assert isinstance(cone, FiniteDirections)
    assert cone.directions.shape == (2, 3)


@pytest.mark.parametrize("bad", ["ksparse:zero", "coord:9", "banana", "full:1", "lasso:x", "coord:"])
def test_parse_cone_errors_mention_token(bad):
    with pytest.raises(ConeSpecError) as err:
        parse_cone(bad, 3)
    assert bad.split(":")[0] in str(err.value)


def test_cone_validation():
    with pytest.raises(ValueError):
        KSparse(0, 3)
    with pytest.raises(ValueError):
        KSparse(4, 3)
    with pytest.raises(ValueError):
        LassoCone(0.0, 3)
    with pytest.raises(ValueError):
        FiniteDirections(np.zeros((1, 3)))
    with pytest.raises(ValueError):
        Coordinate(3, 3)
