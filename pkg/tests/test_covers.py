import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import brute_nerve, random_complex, random_cover, random_grid
from skeletal_select.complex import SimplicialComplex, check_simplicial_map, is_isomorphism
from skeletal_select.covers import (
    Cover,
    CoverError,
    canonical_map,
    check_star_refinement,
    low_order_refinement,
    nerve,
    open_star_cover,
    partition_of_unity,
    refining_map,
    sigma_at,
    star_refinement,
    verify_canonical,
)
from skeletal_select.domain import Domain
from skeletal_select.realization import BaryPoint, affine_extension


@pytest.fixture
def abc():
    dom = Domain.interval(0.0, 1.0, 101)
    x = dom.points[:, 0]
    mem = [(x >= 0) & (x < 0.4 - 1e-12), (x > 0.3 + 1e-12) & (x < 0.7 - 1e-12), (x > 0.6 + 1e-12)]
    return Cover(dom, ["A", "B", "C"], np.array(mem))


def test_nerve_interval_example(abc):
    K = nerve(abc)
    expect = {("A",), ("B",), ("C",), ("A", "B"), ("B", "C")}
    assert set(K.simplices) == expect
    assert set(K.simplices) == brute_nerve(abc)


def test_sigma_at_examples(abc):
    assert set(sigma_at(abc, 50).simplices) == {("B",)}
    assert set(sigma_at(abc, 35).simplices) == {("A",), ("B",), ("A", "B")}
    assert set(sigma_at(abc, 0).simplices) == {("A",)}


def test_trivial_nerves():
    dom = Domain.interval(0.0, 1.0, 11)
    one = Cover(dom, ["U"], np.ones((1, 11), dtype=bool))
    assert set(nerve(one).simplices) == {("U",)}
    half = dom.points[:, 0] < 0.5
    two = Cover(dom, ["L", "R"], np.array([half, ~half]))
    assert set(nerve(two).simplices) == {("L",), ("R",)}


def test_cover_validation():
    dom = Domain.interval(0.0, 1.0, 5)
    with pytest.raises(CoverError, match="not covered"):
        Cover(dom, ["U"], np.array([[1, 1, 1, 1, 0]], dtype=bool))
    with pytest.raises(CoverError, match="duplicate"):
        Cover(dom, ["U", "U"], np.ones((2, 5), dtype=bool))
    with pytest.raises(CoverError, match="empty member"):
        Cover(dom, ["U", "V"], np.array([[1] * 5, [0] * 5], dtype=bool))


def test_pou_examples():
    dom = Domain.interval(0.0, 1.0, 101)
    one = Cover(dom, ["U"], np.ones((1, 101), dtype=bool))
    assert np.all(partition_of_unity(one).xi == 1.0)
    x = dom.points[:, 0]
    ab = Cover(dom, ["A", "B"], np.array([x < 0.6 - 1e-12, x > 0.4 + 1e-12]))
    pou = partition_of_unity(ab)
    assert pou.weights_at(50) == pytest.approx({"A": 0.5, "B": 0.5})
    assert pou.weights_at(0) == pytest.approx({"A": 1.0})
    f = canonical_map(pou)
    assert f(50).as_dict() == pytest.approx({"A": 0.5, "B": 0.5})
    assert f(0) == BaryPoint.vertex("A")


def test_pou_matches_distance_formula():
    # independent oracle: brute-force distances to the complement
    rng = np.random.default_rng(5)
    dom = Domain.grid([0.0, 0.0], [1.0, 1.0], [15, 15])
    c = random_cover(rng, dom)
    P = dom.points
    D = np.zeros((c.size, dom.n))
    for i in range(c.size):
        out = P[~c.member[i]]
        for x in np.flatnonzero(c.member[i]):
            D[i, x] = np.min(np.linalg.norm(out - P[x], axis=1)) if len(out) else dom.diameter + dom.step
    xi = D / D.sum(axis=0)
    assert np.allclose(partition_of_unity(c).xi, xi, atol=1e-12)


def test_verify_canonical_flags_violation(abc):
    f = canonical_map(partition_of_unity(abc))
    pts = [f(x) for x in range(101)]
    pts[10] = BaryPoint.vertex("C")
    chk = verify_canonical(pts, abc)
    assert not chk.ok_star and not chk.ok_carrier
    assert chk.violation == (10, "C")
    assert chk.carrier_violation == (10, "C")


def test_verify_canonical_one_member():
    dom = Domain.interval(0.0, 1.0, 7)
    one = Cover(dom, ["U"], np.ones((1, 7), dtype=bool))
    chk = verify_canonical([BaryPoint.vertex("U")] * 7, one)
    assert chk.ok and chk.agree


def test_refining_map_identity_and_error(abc):
    assert refining_map(abc, abc) == {"A": "A", "B": "B", "C": "C"}
    dom = abc.domain
    big = Cover(dom, ["W"], np.ones((1, dom.n), dtype=bool))
    with pytest.raises(CoverError, match="not a refinement"):
        refining_map(big, abc)


def test_halved_ball_refinement():
    # centres 0.3 apart: a half-radius ball fits only in its concentric ball
    dom = Domain.grid([0.0, 0.0], [1.0, 1.0], [21, 21])
    centers = [[a, b] for a in (0.0, 0.3, 0.6, 0.9) for b in (0.0, 0.3, 0.6, 0.9)]
    u = Cover.from_shapes(dom, [{"label": f"U{i:02d}", "shape": {"ball": {"center": c, "radius": 0.5}}}
                                for i, c in enumerate(centers)])
    v = Cover.from_shapes(dom, [{"label": f"V{i:02d}", "shape": {"ball": {"center": c, "radius": 0.25}}}
                                for i, c in enumerate(centers)])
    r = refining_map(v, u)
    for i, c in enumerate(centers):
        lab = f"V{i:02d}"
        # the tie rule: first member (in order) containing V
        first = next(U for j, U in enumerate(u.labels) if not np.any(v.member[i] & ~u.member[j]))
        assert r[lab] == first
        if min(min(c), 1 - max(c)) >= 0.25:  # untruncated ball: only the concentric U contains it
            assert r[lab] == f"U{i:02d}"
    assert check_simplicial_map(r, nerve(v), nerve(u)) is None
    g = canonical_map(partition_of_unity(v))
    assert verify_canonical([affine_extension(r, g(x)) for x in range(dom.n)], u).ok


def test_star_refinement_single_member():
    dom = Domain.interval(0.0, 1.0, 21)
    u = Cover.from_shapes(dom, [{"label": "U", "shape": {"ball": {"center": [0.5], "radius": 2.0}}}])
    v, ell = star_refinement(u)
    assert set(ell.values()) == {"U"}
    assert check_star_refinement(v, ell, u) == []


def test_star_refinement_two_intervals():
    dom = Domain.interval(0.0, 1.0, 41)
    u = Cover.from_shapes(dom, [{"label": "A", "shape": {"box": {"lo": [0.0], "hi": [0.6]}}},
                                {"label": "B", "shape": {"box": {"lo": [0.4], "hi": [1.0]}}}])
    v, ell = star_refinement(u)
    stars = v.stars()
    for i, lab in enumerate(v.labels):
        U = u.member[u.index[ell[lab]]]
        assert not np.any(stars[i] & ~U)


def test_star_refinement_unsupported():
    dom = Domain.interval(0.0, 1.0, 5)
    u = Cover.from_shapes(dom, [{"label": "P", "shape": {"points": [0, 1, 2, 3, 4]}}])
    with pytest.raises(CoverError, match="unsupported cover family"):
        star_refinement(u)


def test_star_refinement_random_ball_covers():
    rng = np.random.default_rng(8)
    for _ in range(10):
        dom = Domain.grid([0.0, 0.0], [1.0, 1.0], [13, 13])
        u = random_cover(rng, dom, 4)
        v, ell = star_refinement(u)
        # brute force: every nerve simplex of v, union inside intersection of images
        for s in brute_nerve(v):
            union = set().union(*(set(v.points_of(a).tolist()) for a in s))
            inter = set.intersection(*(set(u.points_of(ell[a]).tolist()) for a in s))
            assert union <= inter


def test_low_order_refinement_orders():
    rng = np.random.default_rng(9)
    d1 = Domain.interval(0.0, 1.0, 81)
    u1 = random_cover(rng, d1, 6)
    w1 = low_order_refinement(u1, 1)
    assert w1.order() <= 1 and np.all(refining_map(w1, u1) is not None)
    d2 = Domain.grid([0.0, 0.0], [1.0, 1.0], [25, 25])
    u2 = random_cover(rng, d2, 8)
    w2 = low_order_refinement(u2, 2)
    assert w2.order() <= 2
    refining_map(w2, u2)
    K = nerve(w2)
    assert K == K.skeleton(2)


def test_low_order_refinement_identity_and_error(abc):
    assert low_order_refinement(abc, 1) is abc
    dom = Domain.grid([0.0, 0.0], [1.0, 1.0], [5, 5])
    u = Cover(dom, ["U"], np.ones((1, 25), dtype=bool))
    with pytest.raises(CoverError, match="dimension exceeds order bound"):
        low_order_refinement(u, 1)


def test_open_star_isomorphism_example():
    K = SimplicialComplex.from_maximal([("a", "b", "c"), ("c", "d"), ("e",)])
    c, _ = open_star_cover(K, 3)
    assert is_isomorphism({v: v for v in K.vertices}, K, nerve(c))


@given(st.integers(0, 10_000), st.sampled_from([1, 2]))
def test_nerve_matches_brute_force(seed, dim):
    rng = np.random.default_rng(seed)
    dom = Domain.interval(0.0, 1.0, 41) if dim == 1 else Domain.grid([0, 0], [1, 1], [12, 12])
    c = random_cover(rng, dom, 5)
    assert set(nerve(c).simplices) == brute_nerve(c)


@given(st.integers(0, 10_000))
def test_sigma_at_is_subcomplex(seed):
    rng = np.random.default_rng(seed)
    c = random_cover(rng, Domain.interval(0.0, 1.0, 31), 4)
    K = nerve(c)
    for x in range(0, 31, 5):
        S = sigma_at(c, x)
        assert S.simplices <= K.simplices
        assert set(S.maximal()) == {tuple(c.sigma(x))}


@given(st.integers(0, 10_000))
def test_pou_sums_and_cozero(seed):
    rng = np.random.default_rng(seed)
    c = random_cover(rng, random_grid(rng, int(rng.integers(1, 3))))
    pou = partition_of_unity(c)
    assert np.all(np.abs(pou.sums() - 1.0) <= 1e-9)
    assert pou.cozero_ok()


@given(st.integers(0, 10_000))
def test_refined_canonical_composite(seed):
    rng = np.random.default_rng(seed)
    dom = Domain.grid([0, 0], [1, 1], [15, 15])
    u = random_cover(rng, dom, 4)
    v = low_order_refinement(u, 2)
    r = refining_map(v, u)
    g = canonical_map(partition_of_unity(v))
    assert verify_canonical([affine_extension(r, g(x)) for x in range(dom.n)], u).ok


@given(st.integers(0, 10_000))
def test_open_star_isomorphism_random(seed):
    rng = np.random.default_rng(seed)
    K = random_complex(rng, int(rng.integers(2, 9)))
    c, _ = open_star_cover(K, 2)
    assert is_isomorphism({v: v for v in K.vertices}, K, nerve(c))
