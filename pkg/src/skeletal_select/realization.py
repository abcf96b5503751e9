"""Geometric realization of finite complexes.

Points of ``|K|`` are :class:`BaryPoint` objects (finitely supported barycentric
coordinates).  Continuous maps ``|K| -> R^m`` are represented as :class:`PLMap`
objects: values on the dyadic lattice of each simplex, interpolated affinely
on the cells of the edgewise (Freudenthal/Kuhn) subdivision.
"""

from __future__ import annotations

import itertools
import json
from collections.abc import Mapping
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .complex import ComplexError, Simplex, SimplicialComplex, Vertex, simplex, vkey

DROP = 1e-12
DEFAULT_DEPTH = 3

LatticeKey = tuple  # sorted ((vertex, numerator), ...) with numerators > 0 summing to 2**depth


@dataclass(frozen=True)
class BaryPoint:
    """Barycentric coordinates with strictly positive stored weights."""

    coords: tuple[tuple[Vertex, float], ...]

    @classmethod
    def of(cls, weights: Mapping[Vertex, float]) -> BaryPoint:
        w = {v: float(a) for v, a in weights.items() if a > DROP}
        total = sum(w.values())
        if total <= 0:
            raise ComplexError("barycentric point with empty support")
        return cls(tuple(sorted(((v, a / total) for v, a in w.items()), key=lambda t: vkey(t[0]))))

    @classmethod
    def vertex(cls, v: Vertex) -> BaryPoint:
        return cls(((v, 1.0),))

    @classmethod
    def barycenter(cls, s) -> BaryPoint:
        s = simplex(s)
        return cls.of({v: 1.0 for v in s})

    def __getitem__(self, v: Vertex) -> float:
        for u, a in self.coords:
            if u == v:
                return a
        return 0.0

    def as_dict(self) -> dict:
        return dict(self.coords)

    def support(self) -> Simplex:
        return tuple(v for v, _ in self.coords)


def alpha(p: BaryPoint, v: Vertex) -> float:
    """The ``v``-th barycentric coordinate function."""
    return p[v]


def carrier(p: BaryPoint) -> Simplex:
    return p.support()


def in_open_star(p: BaryPoint, v: Vertex) -> bool:
    return p[v] > 0.0


def is_point_of(p: BaryPoint, K: SimplicialComplex) -> bool:
    return carrier(p) in K.simplices


def affine_extension(g: Mapping[Vertex, Vertex], p: BaryPoint) -> BaryPoint:
    out: dict = {}
    for v, a in p.coords:
        out[g[v]] = out.get(g[v], 0.0) + a
    return BaryPoint.of(out)


def combine(points: list[BaryPoint], weights) -> BaryPoint:
    """Convex combination in the ambient ``l_1`` space."""
    out: dict = {}
    for p, t in zip(points, weights):
        for v, a in p.coords:
            out[v] = out.get(v, 0.0) + t * a
    return BaryPoint.of(out)


def l1_distance(p: BaryPoint, q: BaryPoint) -> float:
    dp, dq = p.as_dict(), q.as_dict()
    return sum(abs(dp.get(v, 0.0) - dq.get(v, 0.0)) for v in set(dp) | set(dq))


# -- dyadic lattice ---------------------------------------------------------


@lru_cache(maxsize=None)
def _compositions(total: int, parts: int) -> tuple[tuple[int, ...], ...]:
    if parts == 1:
        return ((total,),)
    return tuple((i,) + rest for i in range(total, -1, -1) for rest in _compositions(total - i, parts - 1))


def lattice_key(s: Simplex, nums) -> LatticeKey:
    return tuple((v, int(i)) for v, i in zip(s, nums) if i > 0)


def lattice_keys(s, depth: int) -> list[LatticeKey]:
    s = simplex(s)
    D = 2**depth
    return [lattice_key(s, c) for c in _compositions(D, len(s))]


def key_point(key: LatticeKey, depth: int) -> BaryPoint:
    D = 2**depth
    return BaryPoint(tuple((v, i / D) for v, i in key))


def subdivision_lattice(s, depth: int) -> list[BaryPoint]:
    if depth < 0:
        raise ValueError("depth must be >= 0")
    return [key_point(k, depth) for k in lattice_keys(s, depth)]


def _kuhn_cell(lam: np.ndarray, D: int):
    """Locate ``lam`` (barycentric, ordered) in the edgewise subdivision.

    Returns a list of (integer composition, weight) pairs with positive weight.
    """
    k = len(lam) - 1
    if k == 0:
        return [((D,), 1.0)]
    x = D * np.asarray(lam, dtype=float)
    y = np.cumsum(x[::-1])[::-1][1:]  # y_j = sum_{i>=j} x_i, j=1..k
    yr = np.round(y)
    y = np.where(np.abs(y - yr) < 1e-9, yr, y)
    base = np.floor(y)
    frac = y - base
    perm = np.argsort(-frac, kind="stable")
    out = []
    Y = base.copy()
    fs = frac[perm]
    weights = [1.0 - fs[0]] + [fs[j - 1] - fs[j] for j in range(1, k)] + [fs[k - 1]]
    verts = [Y.copy()]
    for j in range(k):
        Y[perm[j]] += 1
        verts.append(Y.copy())
    for Yv, w in zip(verts, weights):
        if w <= 1e-15:
            continue
        yy = np.concatenate(([D], Yv, [0]))
        comp = tuple(int(round(yy[i] - yy[i + 1])) for i in range(k + 1))
        out.append((comp, float(w)))
    return out


def _kuhn_cells(k: int, D: int):
    """Enumerate all cells of the edgewise subdivision of a k-simplex (as compositions)."""
    if k == 0:
        return [[(D,)]]
    cells = []
    for base in itertools.product(range(D), repeat=k):
        for perm in itertools.permutations(range(k)):
            Y = np.array(base, dtype=int)
            verts = [Y.copy()]
            for j in perm:
                Y[j] += 1
                verts.append(Y.copy())
            comps = []
            ok = True
            for Yv in verts:
                yy = np.concatenate(([D], Yv, [0]))
                c = tuple(int(yy[i] - yy[i + 1]) for i in range(k + 1))
                if min(c) < 0:
                    ok = False
                    break
                comps.append(c)
            if ok:
                cells.append(comps)
    return cells


_kuhn_cells_cached = lru_cache(maxsize=None)(_kuhn_cells)


@dataclass
class PLMap:
    """Piecewise-linear map on the depth-``depth`` edgewise subdivision of ``complex``."""

    complex: SimplicialComplex
    depth: int
    values: dict = field(default_factory=dict)
    m: int = 0

    def __post_init__(self):
        if self.values and not self.m:
            self.m = len(np.atleast_1d(next(iter(self.values.values()))))

    def __setitem__(self, key: LatticeKey, y) -> None:
        self.values[key] = np.atleast_1d(np.asarray(y, dtype=float))

    def value_at(self, key: LatticeKey) -> np.ndarray:
        return self.values[key]

    def missing(self) -> list[LatticeKey]:
        out = []
        for s in self.complex:
            out.extend(k for k in lattice_keys(s, self.depth) if k not in self.values)
        return sorted(set(out), key=repr)

    def to_json(self) -> str:
        return json.dumps(
            {
                "complex": [list(s) for s in self.complex.maximal()],
                "depth": self.depth,
                "values": [[[list(t) for t in k], list(map(float, y))] for k, y in self.values.items()],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> PLMap:
        d = json.loads(text)
        K = SimplicialComplex.from_maximal(d["complex"])
        vals = {tuple((v, int(i)) for v, i in k): np.asarray(y, dtype=float) for k, y in d["values"]}
        return cls(K, int(d["depth"]), vals)


def eval_pl(m: PLMap, p: BaryPoint, within=None) -> np.ndarray:
    """Evaluate ``m`` at ``p``.  ``within`` forces evaluation in a simplex containing ``carrier(p)``."""
    s = carrier(p) if within is None else simplex(within)
    if s not in m.complex.simplices:
        raise ComplexError("point outside complex")
    if not set(carrier(p)).issubset(s):
        raise ComplexError("point outside complex")
    lam = np.array([p[v] for v in s])
    D = 2**m.depth
    acc = None
    for comp, w in _kuhn_cell(lam, D):
        y = m.values[lattice_key(s, comp)]
        acc = w * y if acc is None else acc + w * y
    return acc


def sample_simplex(m: PLMap, s, extra: int = 1) -> np.ndarray:
    """Values of ``m`` at the lattice of ``|s|`` refined ``extra`` dyadic levels."""
    s = simplex(s)
    pts = lattice_keys(s, m.depth + extra)
    return np.array([eval_pl(m, key_point(k, m.depth + extra), within=s) for k in pts])


def cell_lipschitz(m: PLMap, s) -> float:
    """Exact Lipschitz constant of ``m`` on ``|s|`` w.r.t. the l_1 metric of ``|K|``.

    For an affine cell with (homogeneous) linear part ``A`` the sup over zero-sum
    directions of unit l_1 norm is attained at ``(e_i - e_j)/2``.
    """
    s = simplex(s)
    k = len(s) - 1
    if k == 0:
        return 0.0
    D = 2**m.depth
    best = 0.0
    for comps in _kuhn_cells_cached(k, D):
        P = np.array(comps, dtype=float) / D
        V = np.array([m.values[lattice_key(s, c)] for c in comps])
        AT = np.linalg.solve(P, V)
        for i in range(k + 1):
            for j in range(i + 1, k + 1):
                best = max(best, 0.5 * float(np.linalg.norm(AT[i] - AT[j])))
    return best
