from collections import deque

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from skeletal_select.fillers import (
    BallMap,
    FillerError,
    FillerOracle,
    SphereMap,
    derived_fill_neighborhood,
    fill,
    linear_homotopy,
    verify_fill,
)
from skeletal_select.moduli import Modulus, eta_lambda, iterate
from skeletal_select.regions import Region

half = Modulus.linear(0.5)
L_SHAPE = Region.union_of([Region.box([0, 0], [1, 0.2]), Region.box([0, 0], [0.2, 1])])


def circle(r=1.0, n=24, c=(0.0, 0.0)):
    a = np.linspace(0, 2 * np.pi, n, endpoint=False)
    return SphereMap.loop(np.asarray(c) + r * np.stack([np.cos(a), np.sin(a)], axis=1))


def _bfs_hops(B, a, b, step):
    """Independent 8-neighbour BFS over the grid points of B; hop count or None."""
    lo, hi = B.bbox()
    axes = [np.arange(lo[i], hi[i] + step / 2, step) for i in range(2)]
    G = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    inside = B.contains(G.reshape(-1, 2)).reshape(G.shape[:2])
    start = tuple(np.round((a - lo) / step).astype(int))
    goal = tuple(np.round((b - lo) / step).astype(int))
    seen = {start: 0}
    q = deque([start])
    while q:
        u = q.popleft()
        if u == goal:
            return seen[u], int(inside.sum())
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                v = (u[0] + di, u[1] + dj)
                if v in seen or not (0 <= v[0] < inside.shape[0] and 0 <= v[1] < inside.shape[1]):
                    continue
                if inside[v]:
                    seen[v] = seen[u] + 1
                    q.append(v)
    return None, int(inside.sum())


def test_pair_in_box_is_segment():
    B = Region.box([0, 0], [1, 1])
    g = SphereMap(0, [[0.1, 0.1], [0.9, 0.7]])
    h = fill(g, B)
    assert h.path.shape == (2, 2)
    assert verify_fill(h, g, B).ok


def test_pair_in_l_shape_goes_through_corner():
    g = SphereMap(0, [[0.9, 0.1], [0.1, 0.9]])
    h = fill(g, L_SHAPE, FillerOracle("path-bfs", grid_step=0.05))
    assert verify_fill(h, g, L_SHAPE).ok
    assert np.any(np.all(h.path <= 0.2 + 1e-9, axis=1))  # visits the corner square
    hops, n_inside = _bfs_hops(L_SHAPE, np.array([0.9, 0.1]), np.array([0.1, 0.9]), 0.05)
    assert hops is not None
    length = float(np.sum(np.linalg.norm(np.diff(h.path, axis=0), axis=1)))
    assert length <= n_inside * 0.05  # at most the grid diameter of B


def test_pair_in_disconnected_region_has_no_path():
    B = Region.union_of([Region.box([0, 0], [0.3, 0.3]), Region.box([0.7, 0.7], [1, 1])])
    with pytest.raises(FillerError, match="no path"):
        fill(SphereMap(0, [[0.1, 0.1], [0.9, 0.9]]), B, FillerOracle("path-bfs", grid_step=0.05))


def test_circle_cone_in_disk():
    B = Region.ball([0, 0], 1.0, open=False)
    g = circle(1.0)
    h = fill(g, B, FillerOracle("star-cone", star_center=(0.0, 0.0)))
    np.testing.assert_array_equal(h.apex, [0.0, 0.0])
    assert verify_fill(h, g, B).ok
    # radial coning h(x, t) = (1 - t) g(x) + t c
    np.testing.assert_allclose(h.eval(3.0, 0.25), 0.75 * g.open_loop[3], atol=1e-12)


def test_star_cone_needs_center_and_star_shape():
    g = SphereMap.loop([[0.05, 0.05], [0.15, 0.05], [0.15, 0.15]])
    with pytest.raises(FillerError, match="filler inapplicable"):
        fill(g, L_SHAPE, FillerOracle("star-cone"))  # unions carry no default star center
    ring = Region.ball([0, 0], 1.0).intersect(Region.box([-2, 0.5], [2, 2]))
    with pytest.raises(FillerError, match="filler inapplicable"):
        fill(SphereMap.loop([[0, 0.7], [0.1, 0.8], [-0.1, 0.8]]), ring,
             FillerOracle("star-cone", star_center=(0.0, 0.0)))


def test_convex_linear_rejects_nonconvex():
    g = SphereMap.loop([[0.05, 0.05], [0.15, 0.05], [0.1, 0.15]])
    with pytest.raises(FillerError, match="not convex"):
        fill(g, L_SHAPE, FillerOracle("convex-linear"))


@given(st.integers(0, 10_000))
def test_convex_fill_never_exits(seed):
    rng = np.random.default_rng(seed)
    verts = rng.uniform(-1, 1, size=(6, 2))
    hull = Region.poly(verts)  # poly takes the convex hull
    inner = hull.samples()
    pts = inner[rng.choice(len(inner), size=min(5, len(inner)), replace=False)]
    if len(pts) < 3:
        return
    g = SphereMap.loop(pts)
    if not hull.contains_all(np.vstack([pts, (pts + np.roll(pts, -1, axis=0)) / 2])):
        return
    h = fill(g, hull, FillerOracle("convex-linear"))
    assert verify_fill(h, g, hull).ok


def test_verify_fill_reports_violations():
    B = Region.ball([0, 0], 1.0, open=False)
    g = circle(0.8)
    h = fill(g, B)
    assert verify_fill(h, g, B).ok
    moved = BallMap(1, rings=[r + [5.0, 0.0] for r in h.rings], ts=h.ts, apex=h.apex + [5.0, 0.0])
    chk = verify_fill(moved, SphereMap.loop(g.open_loop + [5.0, 0.0]), B)
    assert not chk.ok and chk.kind == "containment" and chk.point is not None
    bumped = BallMap(1, rings=[h.rings[0] + 1e-3] + h.rings[1:], ts=h.ts, apex=h.apex)
    chk = verify_fill(bumped, g, B)
    assert not chk.ok and chk.kind == "boundary"


def test_linear_homotopy():
    rng = np.random.default_rng(0)
    l = rng.uniform(size=(10, 2))
    H = linear_homotopy(l, l)
    for t in (0.0, 0.3, 1.0):
        np.testing.assert_allclose(H(t), l, rtol=0, atol=1e-15)
    d = rng.normal(size=(10, 2))
    q = l + 0.2 * d / np.linalg.norm(d, axis=1, keepdims=True)
    H = linear_homotopy(l, q)
    np.testing.assert_array_equal(H(0.0), l)
    np.testing.assert_array_equal(H(1.0), q)
    assert H.track_bound() == pytest.approx(0.2)
    for t in np.linspace(0, 1, 11):
        assert np.all(np.linalg.norm(H(t) - l, axis=1) <= 0.2 + 1e-12)


def test_derived_fill_neighborhood_disk():
    S = T = Region.ball([0, 0], 1.0, open=False)
    eps = 0.4
    r = 1.0 + 0.9 * iterate(half, 1, eps)
    g = circle(r)
    h = derived_fill_neighborhood(g, S, T, FillerOracle(), half, eps)
    assert h.scales["source"] == iterate(half, 1, eps)
    assert verify_fill(h, g, T.neighborhood(eps)).ok


def test_derived_fill_reduces_to_base_inside_s():
    S = T = Region.box([0, 0], [1, 1])
    g = SphereMap.loop([[0.2, 0.2], [0.8, 0.2], [0.5, 0.8]])
    h = derived_fill_neighborhood(g, S, T, FillerOracle(), half, 0.3)
    np.testing.assert_allclose(h.rings[0], h.rings[1])  # q = g
    assert verify_fill(h, g, T).ok


def test_derived_fill_with_ball_constraint():
    S = Region.box([-1, -1], [1, 1])
    T = Region.box([-1.5, -1.5], [1.5, 1.5])
    y, eps, mu = np.array([0.9, 0.0]), 0.4, 0.2
    eta, lam = eta_lambda(half, 1)
    src = Region.point(y).neighborhood(eta(eps)).intersect(S.neighborhood(lam(eps, mu)))
    g = circle(0.5 * eta(eps), 12, c=(0.92, 0.0))
    assert src.contains_all(g.open_loop)
    h = derived_fill_neighborhood(g, S, T, FillerOracle(), half, eps, y=y, mu=mu)
    target = Region.point(y).neighborhood(eps).intersect(T.neighborhood(mu))
    assert verify_fill(h, g, target).ok
    assert h.scales["eta"] == eta(eps) and h.scales["lambda"] == lam(eps, mu)


def test_derived_fill_rejects_sphere_outside_source():
    S = T = Region.ball([0, 0], 1.0, open=False)
    with pytest.raises(FillerError, match="source neighborhood"):
        derived_fill_neighborhood(circle(2.0), S, T, FillerOracle(), half, 0.1)


def test_pair_derived_fill():
    S = T = Region.box([0, 0], [1, 1])
    g = SphereMap(0, [[-0.05, 0.5], [1.05, 0.5]])
    h = derived_fill_neighborhood(g, S, T, FillerOracle(), half, 0.3)
    assert verify_fill(h, g, T.neighborhood(0.3)).ok
