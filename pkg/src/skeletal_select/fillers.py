"""Sphere-filling oracles for k in {0, 1}: paths between two points and disks bounding loops."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .regions import Region

SEG_SAMPLES = 64


class FillerError(RuntimeError):
    pass


@dataclass(frozen=True)
class FillerOracle:
    strategy: str = "auto"  # auto | path-bfs | star-cone | convex-linear
    star_center: tuple | None = None
    grid_step: float | None = None

    def __post_init__(self):
        if self.strategy not in ("auto", "path-bfs", "star-cone", "convex-linear"):
            raise FillerError(f"unknown filler strategy {self.strategy!r}")

    @classmethod
    def from_dict(cls, d: dict) -> FillerOracle:
        sc = d.get("star_center")
        return cls(d.get("strategy", "auto"), None if sc is None else tuple(map(float, sc)), d.get("grid_step"))


@dataclass
class SphereMap:
    """``k = 0``: two points; ``k = 1``: closed polyline (first sample equals last)."""

    k: int
    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim == 1:
            self.samples = self.samples[:, None]
        if self.k == 0 and len(self.samples) != 2:
            raise FillerError("a 0-sphere map needs exactly two points")
        if self.k == 1:
            if len(self.samples) < 3 or np.linalg.norm(self.samples[0] - self.samples[-1]) > 1e-9:
                raise FillerError("a 1-sphere map needs a closed polyline")
        if self.k not in (0, 1):
            raise FillerError("only k in {0, 1} is supported")

    @classmethod
    def loop(cls, pts) -> SphereMap:
        pts = np.asarray(pts, dtype=float)
        return cls(1, np.vstack([pts, pts[:1]]))

    @property
    def open_loop(self) -> np.ndarray:
        return self.samples[:-1] if self.k == 1 else self.samples


@dataclass
class BallMap:
    """A filled sphere.

    ``k = 0``: a polyline ``path`` from the first to the second point.
    ``k = 1``: loops ``rings`` (all indexed like the boundary loop) at radial
    parameters ``ts`` in ``[0, 1)``, contracted linearly to ``apex`` at ``t = 1``.
    """

    k: int
    path: np.ndarray | None = None
    rings: list = field(default_factory=list)
    ts: list = field(default_factory=list)
    apex: np.ndarray | None = None
    scales: dict = field(default_factory=dict)

    def boundary(self) -> np.ndarray:
        if self.k == 0:
            return self.path[[0, -1]]
        return self.rings[0]

    def eval(self, pos: float, t: float) -> np.ndarray:
        """Disk value at loop position ``pos`` (in sample units, cyclic) and radius parameter ``t``."""
        L = len(self.rings[0])
        i0 = int(np.floor(pos)) % L
        a = pos - np.floor(pos)

        def ring(j):
            R = self.rings[j]
            return (1 - a) * R[i0] + a * R[(i0 + 1) % L]

        knots = list(self.ts) + [1.0]
        for j in range(len(self.rings)):
            t0, t1 = knots[j], knots[j + 1]
            if t <= t1 + 1e-15:
                w = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
                nxt = self.apex if j + 1 == len(self.rings) else ring(j + 1)
                return (1 - w) * ring(j) + w * nxt
        return self.apex.copy()

    def lattice_values(self, D: int) -> np.ndarray:
        """``k = 0``: values at the ``D + 1`` dyadic parameters with bends on lattice points."""
        P = self.path
        seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
        keep = np.r_[True, seg > 1e-15]
        P = P[keep] if len(P) > 1 else P
        if len(P) == 1:
            return np.repeat(P, D + 1, axis=0)
        seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
        if len(seg) > D:
            raise FillerError(f"path with {len(seg)} segments is too complex for depth {D}")
        raw = seg / seg.sum() * D
        cnt = np.maximum(np.floor(raw).astype(int), 1)
        while cnt.sum() > D:
            cnt[np.argmax(cnt - raw)] -= 1
        while cnt.sum() < D:
            cnt[np.argmax(raw - cnt)] += 1
        out = [P[0]]
        for i, c in enumerate(cnt):
            for j in range(1, c + 1):
                out.append(P[i] + (P[i + 1] - P[i]) * (j / c))
        return np.array(out)

    def samples(self, depth: int = 3) -> np.ndarray:
        D = 2**depth
        if self.k == 0:
            P = self.path
            ts = np.linspace(0, 1, D + 1)
            parts = [P[i] + ts[:, None] * (P[i + 1] - P[i]) for i in range(len(P) - 1)]
            return np.vstack(parts) if parts else P.copy()
        L = len(self.rings[0])
        out = []
        for pos in np.arange(0, L, 0.5):
            for t in np.linspace(0, 1, D + 1):
                out.append(self.eval(pos, t))
        return np.array(out)


# -- helpers ---------------------------------------------------------------


def segments_inside(B: Region, A: np.ndarray, C: np.ndarray, n: int = SEG_SAMPLES) -> bool:
    """All segments ``A[i] -> C[i]`` (sampled at ``n + 1`` points) lie in ``B``."""
    A = np.atleast_2d(A)
    C = np.atleast_2d(C)
    t = np.linspace(0, 1, n + 1)[None, :, None]
    P = (A[:, None] * (1 - t) + C[:, None] * t).reshape(-1, A.shape[1])
    return B.contains_all(P)


def _loop_with_mids(L: np.ndarray) -> np.ndarray:
    return np.vstack([L, (L + np.roll(L, -1, axis=0)) / 2])


def _apex_candidates(B: Region, pts: np.ndarray, oracle: FillerOracle) -> list[np.ndarray]:
    cands = []
    if oracle.star_center is not None:
        cands.append(np.asarray(oracle.star_center, dtype=float))
    if B.star_center is not None:
        cands.append(np.asarray(B.star_center, dtype=float))
    cands.append(pts.mean(axis=0))
    S = B.candidates()
    if len(S):
        S = S[B.contains(S)]
        order = np.argsort(-B.depth(S), kind="stable")[:150]
        cands.extend(S[order])
    return cands


def cone(g: SphereMap, c) -> BallMap:
    return BallMap(1, rings=[g.open_loop.copy()], ts=[0.0], apex=np.asarray(c, dtype=float))


def _fill_loop(g: SphereMap, B: Region, oracle: FillerOracle) -> BallMap:
    L = g.open_loop
    probe = _loop_with_mids(L)
    if not B.contains_all(probe):
        raise FillerError("filler inapplicable: loop leaves the target region")
    strat = oracle.strategy
    if strat == "convex-linear":
        if not B.shape.convex:
            raise FillerError("filler inapplicable: region is not convex")
        return cone(g, L.mean(axis=0))
    if strat == "star-cone":
        c = oracle.star_center if oracle.star_center is not None else B.star_center
        if c is None:
            raise FillerError("filler inapplicable: no star center supplied")
        c = np.asarray(c, dtype=float)
        if not segments_inside(B, probe, np.repeat(c[None], len(probe), axis=0)):
            raise FillerError("filler inapplicable: region is not star-shaped about the center")
        return cone(g, c)
    if strat == "path-bfs":
        raise FillerError("filler inapplicable: path-bfs fills 0-spheres only")
    if B.shape.convex:
        return cone(g, L.mean(axis=0))
    for c in _apex_candidates(B, L, oracle):
        if segments_inside(B, probe, np.repeat(c[None], len(probe), axis=0), n=16):
            return cone(g, c)
    raise FillerError("filler inapplicable: no cone apex found")


def _grid_path(B: Region, a: np.ndarray, b: np.ndarray, step: float | None) -> np.ndarray:
    lo, hi = B.bbox()
    lo = np.minimum(lo, np.minimum(a, b))
    hi = np.maximum(hi, np.maximum(a, b))
    m = len(a)
    if step is None:
        step = float(np.max(hi - lo)) / (48 if m <= 2 else 10)
    step = max(step, 1e-12)
    shape = tuple(int(np.ceil((hi[i] - lo[i]) / step)) + 1 for i in range(m))
    if np.prod(shape) > 200_000:
        raise FillerError("no path: sampling grid too large")
    axes = [lo[i] + step * np.arange(shape[i]) for i in range(m)]
    G = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)
    inside = B.contains(G)
    nodes = np.flatnonzero(inside)
    if len(nodes) == 0:
        raise FillerError("no path")
    P = np.vstack([G[nodes], a, b])
    A, Bi = len(nodes), len(nodes) + 1
    pos = {int(v): i for i, v in enumerate(nodes)}
    offs = [o for o in np.ndindex(*(3,) * m) if any(x != 1 for x in o)]
    offs = [np.array(o) - 1 for o in offs]
    multi = np.array(np.unravel_index(nodes, shape)).T
    adj: list[list[tuple[int, float]]] = [[] for _ in range(len(P))]
    for o in offs:
        nb = multi + o
        ok = np.all((nb >= 0) & (nb < np.array(shape)), axis=1)
        flat = np.full(len(nodes), -1)
        flat[ok] = np.ravel_multi_index(tuple(nb[ok].T), shape)
        for i, f in enumerate(flat):
            j = pos.get(int(f), -1) if f >= 0 else -1
            if j >= 0:
                mid = (P[i] + P[j]) / 2
                if B.contains(mid[None])[0]:
                    adj[i].append((j, float(np.linalg.norm(o) * step)))
    d2a = np.linalg.norm(P[:A] - a, axis=1)
    d2b = np.linalg.norm(P[:A] - b, axis=1)
    for end, dd in ((A, d2a), (Bi, d2b)):
        near = np.argsort(dd, kind="stable")[:12]
        for j in near:
            if segments_inside(B, P[end], P[j], n=16):
                adj[end].append((int(j), float(dd[j])))
                adj[int(j)].append((end, float(dd[j])))
    dist = {A: 0.0}
    prev = {}
    heap = [(0.0, A)]
    while heap:
        dcur, i = heapq.heappop(heap)
        if i == Bi:
            break
        if dcur > dist.get(i, np.inf):
            continue
        for j, w in adj[i]:
            nd = dcur + w
            if nd < dist.get(j, np.inf) - 1e-15:
                dist[j] = nd
                prev[j] = i
                heapq.heappush(heap, (nd, j))
    if Bi not in dist:
        raise FillerError("no path")
    chain = [Bi]
    while chain[-1] != A:
        chain.append(prev[chain[-1]])
    pts = P[chain[::-1]]
    # string pulling: jump to the farthest visible point
    out = [pts[0]]
    i = 0
    while i < len(pts) - 1:
        j = len(pts) - 1
        while j > i + 1 and not segments_inside(B, pts[i], pts[j]):
            j -= 1
        out.append(pts[j])
        i = j
    return np.array(out)


def _fill_pair(g: SphereMap, B: Region, oracle: FillerOracle) -> BallMap:
    a, b = g.samples
    if not B.contains_all(g.samples):
        raise FillerError("filler inapplicable: endpoints leave the target region")
    strat = oracle.strategy
    if strat in ("convex-linear",) and not B.shape.convex:
        raise FillerError("filler inapplicable: region is not convex")
    if strat in ("convex-linear", "auto") and segments_inside(B, a, b):
        return BallMap(0, path=np.array([a, b]))
    if strat == "star-cone":
        c = oracle.star_center if oracle.star_center is not None else B.star_center
        if c is None:
            raise FillerError("filler inapplicable: no star center supplied")
        c = np.asarray(c, dtype=float)
        if not segments_inside(B, np.array([a, b]), np.array([c, c])):
            raise FillerError("filler inapplicable: region is not star-shaped about the center")
        return BallMap(0, path=np.array([a, c, b]))
    if strat == "auto":
        for c in _apex_candidates(B, g.samples, oracle)[:40]:
            if segments_inside(B, np.array([a, b]), np.array([c, c]), n=32):
                return BallMap(0, path=np.array([a, c, b]))
    return BallMap(0, path=_grid_path(B, a, b, oracle.grid_step))


def fill(g: SphereMap, B: Region, oracle: FillerOracle | None = None) -> BallMap:
    """Extend ``g`` over the (k+1)-ball inside ``B``; raises :class:`FillerError`."""
    oracle = oracle or FillerOracle()
    if g.k == 0:
        return _fill_pair(g, B, oracle)
    return _fill_loop(g, B, oracle)


@dataclass
class FillCheck:
    ok: bool
    kind: str | None = None
    index: int | None = None
    point: np.ndarray | None = None


def verify_fill(h: BallMap, g: SphereMap, B: Region, depth: int = 3, tol: float = 0.0) -> FillCheck:
    bd = h.boundary()
    ref = g.open_loop
    if bd.shape != ref.shape:
        return FillCheck(False, "boundary", 0, None)
    err = np.linalg.norm(bd - ref, axis=1)
    if np.any(err > 1e-9):
        i = int(np.argmax(err))
        return FillCheck(False, "boundary", i, bd[i])
    S = h.samples(depth)
    ok = B.contains(S)
    if tol > 0:
        ok |= B.dist(S) <= tol
    if not ok.all():
        i = int(np.argmin(ok))
        return FillCheck(False, "containment", i, S[i])
    return FillCheck(True)


@dataclass
class LinearHomotopy:
    """``h(x, t) = t q(x) + (1 - t) l(x)`` on sampled maps."""

    l: np.ndarray
    q: np.ndarray

    def __call__(self, t: float) -> np.ndarray:
        return t * self.q + (1 - t) * self.l

    def track_bound(self) -> float:
        return float(np.max(np.linalg.norm(self.q - self.l, axis=1), initial=0.0))


def linear_homotopy(l, q) -> LinearHomotopy:
    return LinearHomotopy(np.atleast_2d(np.asarray(l, dtype=float)), np.atleast_2d(np.asarray(q, dtype=float)))


def nearest_points(S: Region, Y: np.ndarray) -> np.ndarray:
    """Closest points of the closure of ``S`` (exact for convex shapes, sampled otherwise)."""
    if S.shape.convex:
        return S.shape.project(Y)
    C = S.candidates(64 if S.m <= 2 else 10)
    C = C[S.contains(C)]
    if len(C) == 0:
        raise FillerError("derived fill: source region looks empty")
    return C[np.argmin(np.linalg.norm(Y[:, None] - C[None], axis=2), axis=1)]


def derived_fill_neighborhood(g: SphereMap, S: Region, T: Region, base: FillerOracle, delta, eps: float,
                              y=None, mu: float | None = None) -> BallMap:
    """Fill a sphere lying near ``S`` inside a neighborhood of ``T``.

    Without ``y``: ``g`` maps into ``O_{δ_k(ε)}(S)``; the fill lies in ``O_ε(T)``.
    With ``y``: ``g`` maps into ``O_{η(ε)}(y) ∩ O_{λ(ε, μ)}(S)``; the fill lies in
    ``O_ε(y) ∩ O_μ(T)``.  The sphere is pulled to ``q`` in ``S``, joined to it by
    the linear homotopy, and ``q`` is filled by ``base`` in ``T`` (intersected
    with the ball around ``y`` when given).
    """
    from .moduli import eta_lambda, iterate

    k = g.k
    pts = g.open_loop
    if y is None:
        src_scale = iterate(delta, k, eps)
        src = S.neighborhood(src_scale)
        target = T.neighborhood(eps)
        inner_target = T
        scales = {"source": src_scale, "target": eps}
    else:
        if mu is None:
            raise FillerError("derived fill: mu is required with a ball constraint")
        eta, lam = eta_lambda(delta, k)
        yb = Region.point(y)
        src = yb.neighborhood(eta(eps)).intersect(S.neighborhood(lam(eps, mu)))
        target = yb.neighborhood(eps).intersect(T.neighborhood(mu))
        inner_target = yb.neighborhood(eps).intersect(T)
        scales = {"eta": eta(eps), "lambda": lam(eps, mu), "target": eps, "mu": mu}
    if not src.contains_all(pts):
        raise FillerError("derived fill: sphere is not inside the source neighborhood")
    q = nearest_points(S, pts)
    if k == 0:
        inner = fill(SphereMap(0, q), inner_target, base)
        path = np.vstack([pts[:1], inner.path, pts[1:]])
        return BallMap(0, path=path, scales=scales)
    if not segments_inside(S.closure(), q, np.roll(q, -1, axis=0)):
        raise FillerError("derived fill: projected sphere leaves S")
    inner = fill(SphereMap.loop(q), inner_target, base)
    rings = [pts.copy()] + [r.copy() for r in inner.rings]
    ts = [0.0] + [0.5 + 0.5 * t for t in inner.ts]
    out = BallMap(1, rings=rings, ts=ts, apex=inner.apex, scales=scales)
    if not verify_fill(out, g, target).ok:
        raise FillerError("derived fill: result leaves the target neighborhood")
    return out
