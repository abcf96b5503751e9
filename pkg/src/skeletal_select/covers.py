"""Finite covers of a discretized domain, their nerves and canonical maps."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.ndimage import distance_transform_edt
from scipy.spatial import cKDTree

from .complex import SimplicialComplex, check_simplicial_map, simplex
from .domain import Domain
from .realization import DEFAULT_DEPTH, BaryPoint, affine_extension, carrier, key_point, lattice_keys


class CoverError(ValueError):
    pass


def _shape_mask(domain: Domain, shape: dict) -> np.ndarray:
    P = domain.points
    if "ball" in shape:
        c = np.atleast_1d(np.asarray(shape["ball"]["center"], dtype=float))
        return np.linalg.norm(P - c, axis=1) < float(shape["ball"]["radius"])
    if "box" in shape:
        lo = np.atleast_1d(np.asarray(shape["box"]["lo"], dtype=float))
        hi = np.atleast_1d(np.asarray(shape["box"]["hi"], dtype=float))
        return np.all((P >= lo - 1e-12) & (P <= hi + 1e-12), axis=1)
    if "points" in shape:
        m = np.zeros(domain.n, dtype=bool)
        m[np.asarray(shape["points"], dtype=int)] = True
        return m
    raise CoverError(f"unknown cover shape {sorted(shape)}")


@dataclass(eq=False)
class Cover:
    """Members are point sets of ``domain`` (rows of ``member``), in a fixed order."""

    domain: Domain
    labels: tuple
    member: np.ndarray
    shapes: tuple | None = None

    def __post_init__(self):
        self.labels = tuple(self.labels)
        self.member = np.asarray(self.member, dtype=bool).reshape(len(self.labels), self.domain.n)
        if len(set(self.labels)) != len(self.labels):
            raise CoverError("duplicate member labels")
        empty = np.flatnonzero(~self.member.any(axis=1))
        if len(empty):
            raise CoverError(f"empty member {self.labels[empty[0]]!r}")
        uncovered = np.flatnonzero(~self.member.any(axis=0))
        if len(uncovered):
            raise CoverError(f"point {int(uncovered[0])} is not covered")

    @classmethod
    def from_shapes(cls, domain: Domain, items: list[dict]) -> Cover:
        labels = [str(it["label"]) for it in items]
        mem = np.array([_shape_mask(domain, it["shape"]) for it in items])
        return cls(domain, labels, mem, tuple(it["shape"] for it in items))

    @classmethod
    def from_json(cls, domain: Domain, text: str) -> Cover:
        return cls.from_shapes(domain, json.loads(text))

    @property
    def size(self) -> int:
        return len(self.labels)

    @cached_property
    def index(self) -> dict:
        return {lab: i for i, lab in enumerate(self.labels)}

    @cached_property
    def csr(self) -> sparse.csr_matrix:
        return sparse.csr_matrix(self.member)

    @cached_property
    def csc(self) -> sparse.csc_matrix:
        return sparse.csc_matrix(self.member)

    def members_at(self, x: int) -> np.ndarray:
        c = self.csc
        return c.indices[c.indptr[x]:c.indptr[x + 1]]

    def points_of(self, label) -> np.ndarray:
        c = self.csr
        i = self.index[label]
        return c.indices[c.indptr[i]:c.indptr[i + 1]]

    def sigma(self, x: int) -> tuple:
        """``sigma(x)``: the (sorted) labels of members containing ``x``."""
        return simplex(self.labels[i] for i in self.members_at(x))

    @cached_property
    def sigmas(self) -> list[tuple]:
        return [self.sigma(x) for x in range(self.domain.n)]

    def order(self) -> int:
        return int(self.member.sum(axis=0).max()) - 1

    def stars(self) -> np.ndarray:
        """Boolean matrix of ``V*`` (union of members meeting ``V``) for every member."""
        A = self.csr.astype(np.int32)
        meet = (A @ A.T) > 0
        return ((meet.astype(np.int32) @ A) > 0).toarray()


def nerve(c: Cover, max_dim: int | None = None) -> SimplicialComplex:
    """Subfamilies with a common point; ``max_dim`` caps the dimension (skeleton)."""
    return SimplicialComplex.from_maximal(set(c.sigmas), max_dim=max_dim)


def sigma_at(c: Cover, x: int) -> SimplicialComplex:
    return SimplicialComplex.from_maximal([c.sigma(x)])


def open_star_cover(K: SimplicialComplex, depth: int = DEFAULT_DEPTH) -> tuple[Cover, list[BaryPoint]]:
    """Open stars ``st<v>`` of every vertex, sampled on the depth-``depth`` lattice of ``|K|``.

    Sample points are embedded by their barycentric coordinates; member labels
    are the vertices themselves.
    """
    keys = sorted({k for s in K for k in lattice_keys(s, depth)}, key=repr)
    pts = [key_point(k, depth) for k in keys]
    verts = K.vertices
    col = {v: i for i, v in enumerate(verts)}
    X = np.zeros((len(pts), len(verts)))
    for i, p in enumerate(pts):
        for v, a in p.coords:
            X[i, col[v]] = a
    dom = Domain.from_points(X)
    return Cover(dom, verts, (X > 0).T), pts


def complement_distances(c: Cover) -> np.ndarray:
    """``d(x, X \\ U)`` for every member ``U`` and point ``x`` (zero off ``U``)."""
    dom = c.domain
    D = np.zeros((c.size, dom.n))
    far = dom.diameter + (dom.step or 1.0)
    for i in range(c.size):
        m = c.member[i]
        if m.all():
            D[i] = far
            continue
        if dom.is_grid:
            D[i] = distance_transform_edt(m.reshape(dom.shape), sampling=dom.step).ravel()
        else:
            tree = cKDTree(dom.points[~m])
            D[i, m] = tree.query(dom.points[m])[0]
    D[~c.member] = 0.0
    return D


@dataclass(eq=False)
class PartitionOfUnity:
    cover: Cover
    xi: np.ndarray  # (members, points)

    def weights_at(self, x: int) -> dict:
        col = self.xi[:, x]
        return {self.cover.labels[i]: float(col[i]) for i in np.flatnonzero(col > 0)}

    def sums(self) -> np.ndarray:
        return self.xi.sum(axis=0)

    def cozero_ok(self) -> bool:
        return bool(np.all(self.cover.member | (self.xi == 0)))


def partition_of_unity(c: Cover) -> PartitionOfUnity:
    D = complement_distances(c)
    tot = D.sum(axis=0)
    if np.any(tot <= 0):
        raise CoverError(f"degenerate cover at point {int(np.argmin(tot))}")
    return PartitionOfUnity(c, D / tot)


@dataclass(eq=False)
class CanonicalMap:
    pou: PartitionOfUnity
    values: list = field(default_factory=list)

    def __call__(self, x: int) -> BaryPoint:
        return self.values[x]


def canonical_map(pou: PartitionOfUnity) -> CanonicalMap:
    return CanonicalMap(pou, [BaryPoint.of(pou.weights_at(x)) for x in range(pou.cover.domain.n)])


@dataclass
class CanonicalCheck:
    ok_star: bool
    ok_carrier: bool
    violation: tuple | None  # (x, label) from the star check
    carrier_violation: tuple | None

    @property
    def agree(self) -> bool:
        return self.ok_star == self.ok_carrier

    @property
    def ok(self) -> bool:
        return self.ok_star and self.ok_carrier


def verify_canonical(f, c: Cover) -> CanonicalCheck:
    """Check ``f^{-1}(st<U>) ⊆ U`` per member and ``f(x) ∈ |Σ(x)|`` per point, independently."""
    pts = [f(x) if callable(f) else f[x] for x in range(c.domain.n)]
    star_bad = None
    for i, lab in enumerate(c.labels):
        pre = np.array([p[lab] > 0.0 for p in pts])
        bad = np.flatnonzero(pre & ~c.member[i])
        if len(bad):
            cand = (int(bad[0]), lab)
            if star_bad is None or cand[0] < star_bad[0]:
                star_bad = cand
    car_bad = None
    for x, p in enumerate(pts):
        S = sigma_at(c, x)
        if carrier(p) not in S.simplices:
            allowed = set(c.sigma(x))
            lab = next(v for v in carrier(p) if v not in allowed)
            car_bad = (x, lab)
            break
    return CanonicalCheck(star_bad is None, car_bad is None, star_bad, car_bad)


def refining_map(v: Cover, u: Cover) -> dict:
    """``r(V)`` = first member of ``u`` (in member order) containing ``V``.

    A member of ``u`` carrying the same label as ``V`` is preferred, so ``r`` is the
    identity when ``v`` is ``u``.
    """
    A = v.csr.astype(np.int32)
    outside = sparse.csr_matrix(~u.member).astype(np.int32)
    bad = (A @ outside.T).toarray()  # V points outside U
    r = {}
    for i, lab in enumerate(v.labels):
        ok = np.flatnonzero(bad[i] == 0)
        if len(ok) == 0:
            raise CoverError(f"not a refinement: {lab!r} lies in no member")
        j = u.index.get(lab, -1)
        r[lab] = lab if j >= 0 and bad[i, j] == 0 else u.labels[ok[0]]
    return r


def realize_map(r: dict, p: BaryPoint) -> BaryPoint:
    return affine_extension(r, p)


# -- star refinements ------------------------------------------------------


def _contained_first(sub: np.ndarray, sup: np.ndarray) -> np.ndarray:
    """For each row of ``sub``, index of the first row of ``sup`` containing it, or -1."""
    S = sparse.csr_matrix(sub).astype(np.int32)
    out = sparse.csr_matrix(~sup).astype(np.int32)
    bad = (S @ out.T).toarray()
    ok = bad == 0
    first = np.argmax(ok, axis=1)
    return np.where(ok.any(axis=1), first, -1)


def _dedupe(rows: np.ndarray) -> np.ndarray:
    _, idx = np.unique(np.packbits(rows, axis=1), axis=0, return_index=True)
    return np.sort(idx)


def star_refinement(u: Cover) -> tuple[Cover, dict]:
    """Ball star refinement of a ball/box cover of a grid: radius ``r/4`` balls around grid points.

    The radius is halved until every star fits in a member (it terminates at
    singletons).  Returns ``(v, ell)`` with ``V* ⊆ ell(V)``.
    """
    if u.shapes is None or not all(("ball" in s) or ("box" in s) for s in u.shapes):
        raise CoverError("unsupported cover family")
    rs = []
    for s in u.shapes:
        if "ball" in s:
            rs.append(float(s["ball"]["radius"]))
        else:
            rs.append(float(np.min(np.subtract(s["box"]["hi"], s["box"]["lo"]))) / 2)
    rho = min(rs) / 4
    dom = u.domain
    tree = cKDTree(dom.points)
    while True:
        mem = np.zeros((dom.n, dom.n), dtype=bool)
        for i, nb in enumerate(tree.query_ball_point(dom.points, rho - 1e-12)):
            mem[i, nb] = True
            mem[i, i] = True
        keep = _dedupe(mem)
        mem = mem[keep]
        labels = [f"V{i:05d}" for i in range(len(keep))]
        v = Cover(dom, labels, mem)
        first = _contained_first(v.stars(), u.member)
        ok = first >= 0
        if ok.all() or rho < 1e-12:
            if not ok.all():
                raise CoverError("star refinement failed")
            return v, {lab: u.labels[first[i]] for i, lab in enumerate(labels)}
        if ok.any() and v.member[ok].any(axis=0).all():
            sub = Cover(dom, [labels[i] for i in np.flatnonzero(ok)], mem[ok])
            first2 = _contained_first(sub.stars(), u.member)
            if (first2 >= 0).all():
                return sub, {lab: u.labels[first2[i]] for i, lab in enumerate(sub.labels)}
        rho /= 2


def check_star_refinement(v: Cover, ell: dict, u: Cover) -> list:
    """Violations of ``V* ⊆ ell(V)`` and of ``⋃σ ⊆ ⋂ell(σ)`` on the nerve of ``v``."""
    bad = []
    st = v.stars()
    for i, lab in enumerate(v.labels):
        if np.any(st[i] & ~u.member[u.index[ell[lab]]]):
            bad.append(("star", lab))
    # every nerve simplex is a face of some sigma(x), and the inclusion passes to faces
    for s in sorted(set(v.sigmas)):
        union = v.member[[v.index[a] for a in s]].any(axis=0)
        inter = u.member[[u.index[ell[a]] for a in s]].all(axis=0)
        if np.any(union & ~inter):
            bad.append(("simplex", s))
    return bad


# -- low-order refinements -------------------------------------------------


def star_cover(domain: Domain, s: int, prefix: str = "T") -> Cover:
    """Open-star cover of the scale-``s`` coarse triangulation (order <= d)."""
    if not domain.is_grid or s <= 1:
        labels = [f"{prefix}{i:05d}" for i in range(domain.n)]
        return Cover(domain, labels, np.eye(domain.n, dtype=bool))
    ids, W = domain.star_weights(s)
    return Cover(domain, [f"{prefix}{i:05d}" for i in ids], (W > 0).T)


def low_order_refinement(u: Cover, n: int) -> Cover:
    dom = u.domain
    if dom.d > n:
        raise CoverError("dimension exceeds order bound")
    if u.order() <= n:
        return u
    for s in dom.scales():
        t = star_cover(dom, s)
        if np.all(_contained_first(t.member, u.member) >= 0):
            return t
    raise CoverError("no low-order refinement found")  # unreachable: scale 1 gives singletons


def check_simplicial(r: dict, v: Cover, u: Cover):
    return check_simplicial_map(r, nerve(v), nerve(u))
