"""Finite abstract simplicial complexes, skeleta and simplicial maps."""

from __future__ import annotations

import itertools
import json
from collections.abc import Hashable, Iterable, Mapping
from typing import Any

Vertex = Hashable
Simplex = tuple  # sorted tuple of vertices, canonical identity


class ComplexError(ValueError):
    pass


def vkey(v: Vertex) -> tuple[str, Any]:
    """Total, deterministic order on vertex labels of mixed type."""
    return (type(v).__name__, v)


def simplex(vertices: Iterable[Vertex]) -> Simplex:
    s = tuple(sorted(set(vertices), key=vkey))
    if not s:
        raise ComplexError("empty simplex")
    return s


def faces(s: Simplex, max_dim: int | None = None) -> Iterable[Simplex]:
    """All nonempty faces of ``s`` (including ``s``), optionally capped by dimension."""
    top = len(s) if max_dim is None else min(len(s), max_dim + 1)
    for size in range(1, top + 1):
        yield from itertools.combinations(s, size)


class SimplicialComplex:
    """Immutable, downward-closed set of simplices.

    Simplices are sorted vertex tuples. Construct with :meth:`from_maximal`
    (or :func:`from_maximal`), which takes the downward closure.
    """

    __slots__ = ("_simplices", "_vertices", "_dim")

    def __init__(self, simplices: Iterable[Simplex]):
        simps = frozenset(simplex(s) for s in simplices)
        for s in simps:
            for f in faces(s, len(s) - 2):
                if f not in simps:
                    raise ComplexError(f"not downward closed: {f!r} missing from {s!r}")
        self._simplices = simps
        self._vertices = tuple(sorted({v for s in simps for v in s}, key=vkey))
        self._dim = max((len(s) - 1 for s in simps), default=-1)

    @classmethod
    def from_maximal(cls, maximal: Iterable[Iterable[Vertex]], max_dim: int | None = None) -> SimplicialComplex:
        closure: set[Simplex] = set()
        for m in maximal:
            s = simplex(m)
            closure.update(faces(s, max_dim))
        obj = cls.__new__(cls)
        obj._simplices = frozenset(closure)
        obj._vertices = tuple(sorted({v for s in closure for v in s}, key=vkey))
        obj._dim = max((len(s) - 1 for s in closure), default=-1)
        return obj

    @property
    def simplices(self) -> frozenset[Simplex]:
        return self._simplices

    @property
    def vertices(self) -> tuple[Vertex, ...]:
        return self._vertices

    @property
    def dim(self) -> int:
        return self._dim

    def __contains__(self, s: Iterable[Vertex]) -> bool:
        try:
            return simplex(s) in self._simplices
        except ComplexError:
            return False

    def __len__(self) -> int:
        return len(self._simplices)

    def __iter__(self):
        return iter(sorted(self._simplices, key=lambda s: (len(s), [vkey(v) for v in s])))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SimplicialComplex) and self._simplices == other._simplices

    def __hash__(self) -> int:
        return hash(self._simplices)

    def __repr__(self) -> str:
        return f"SimplicialComplex(n_vertices={len(self._vertices)}, n_simplices={len(self)}, dim={self._dim})"

    def of_dim(self, k: int) -> list[Simplex]:
        return [s for s in self if len(s) == k + 1]

    def maximal(self) -> list[Simplex]:
        out = []
        for s in self:
            ss = set(s)
            if not any(len(t) > len(s) and ss.issubset(t) for t in self._simplices):
                out.append(s)
        return out

    def skeleton(self, k: int) -> SimplicialComplex:
        return skeleton(self, k)

    def to_json(self) -> str:
        return json.dumps([list(s) for s in self.maximal()])

    @classmethod
    def from_json(cls, text: str) -> SimplicialComplex:
        return cls.from_maximal(json.loads(text))


def from_maximal(simplices: Iterable[Iterable[Vertex]]) -> SimplicialComplex:
    return SimplicialComplex.from_maximal(simplices)


def skeleton(K: SimplicialComplex, k: int) -> SimplicialComplex:
    if k < 0:
        raise ComplexError("skeleton dimension must be >= 0")
    obj = SimplicialComplex.__new__(SimplicialComplex)
    obj._simplices = frozenset(s for s in K.simplices if len(s) <= k + 1)
    obj._vertices = tuple(sorted({v for s in obj._simplices for v in s}, key=vkey))
    obj._dim = min(K.dim, k)
    return obj


def image(f: Mapping[Vertex, Vertex], s: Simplex) -> Simplex:
    return simplex(f[v] for v in s)


def check_simplicial_map(f: Mapping[Vertex, Vertex], K1: SimplicialComplex, K2: SimplicialComplex) -> Simplex | None:
    """Return ``None`` if ``f`` is simplicial ``K1 -> K2``, else a violating simplex of ``K1``."""
    for v in K1.vertices:
        if v not in f:
            raise ComplexError(f"unmapped vertex {v!r}")
    for s in K1:
        if image(f, s) not in K2.simplices:
            return s
    return None


def compose(g: Mapping[Vertex, Vertex], f: Mapping[Vertex, Vertex]) -> dict:
    """``g ∘ f`` on vertices."""
    return {v: g[w] for v, w in f.items()}


def is_isomorphism(f: Mapping[Vertex, Vertex], K1: SimplicialComplex, K2: SimplicialComplex) -> bool:
    if check_simplicial_map(f, K1, K2) is not None:
        return False
    if set(f.values()) != set(K2.vertices) or len(set(f.values())) != len(K1.vertices):
        return False
    inv = {w: v for v, w in f.items()}
    return check_simplicial_map(inv, K2, K1) is None
