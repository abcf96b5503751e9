"""Discretized domains: sample points with coordinates, adjacency and metric."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


class DomainError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Domain:
    """Finite sample of a compact set in R^d (d <= 2).

    Grid domains keep ``shape``/``lo``/``step`` so that grid-specific tools
    (distance transforms, triangulations) apply; points are in C order.
    """

    points: np.ndarray
    edges: np.ndarray
    shape: tuple | None = None
    lo: np.ndarray | None = None
    step: float | None = None

    @classmethod
    def grid(cls, lo, hi, shape) -> Domain:
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        shape = tuple(int(s) for s in np.atleast_1d(shape))
        if not (len(lo) == len(hi) == len(shape)) or len(shape) > 2:
            raise DomainError("grid needs matching lo/hi/shape with dimension <= 2")
        if any(s < 2 for s in shape):
            raise DomainError("grid needs at least 2 points per axis")
        steps = (hi - lo) / (np.array(shape) - 1)
        if not np.allclose(steps, steps[0]):
            raise DomainError("grid steps must be equal along all axes")
        axes = [lo[i] + steps[i] * np.arange(shape[i]) for i in range(len(shape))]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(shape))
        idx = np.arange(pts.shape[0]).reshape(shape)
        edges = []
        for ax in range(len(shape)):
            a = np.take(idx, np.arange(shape[ax] - 1), axis=ax).ravel()
            b = np.take(idx, np.arange(1, shape[ax]), axis=ax).ravel()
            edges.append(np.stack([a, b], axis=1))
        return cls(pts, np.vstack(edges), shape, lo, float(steps[0]))

    @classmethod
    def interval(cls, a: float, b: float, n: int) -> Domain:
        return cls.grid([a], [b], [n])

    @classmethod
    def from_points(cls, points, edges=()) -> Domain:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        e = np.asarray(edges, dtype=int).reshape(-1, 2)
        return cls(pts, e)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def is_grid(self) -> bool:
        return self.shape is not None

    def metric(self, i: int, j: int) -> float:
        return float(np.linalg.norm(self.points[i] - self.points[j]))

    @cached_property
    def diameter(self) -> float:
        lo, hi = self.points.min(axis=0), self.points.max(axis=0)
        return float(np.linalg.norm(hi - lo))

    @cached_property
    def neighbors(self) -> list[np.ndarray]:
        nb = [[] for _ in range(self.n)]
        for a, b in self.edges:
            nb[a].append(b)
            nb[b].append(a)
        return [np.array(sorted(x), dtype=int) for x in nb]

    def grid_index(self, multi) -> int:
        return int(np.ravel_multi_index(tuple(multi), self.shape))

    # -- coarse triangulations of grid domains ------------------------------

    def coarse_lines(self, s: int) -> list[np.ndarray]:
        return [np.unique(np.r_[np.arange(0, n, s), n - 1]) for n in self.shape]

    def star_weights(self, s: int) -> tuple[np.ndarray, np.ndarray]:
        """Barycentric weights of every point in the scale-``s`` coarse triangulation.

        Coarse vertices sit at every ``s``-th grid line (plus the last); in 2-D each
        coarse rectangle is split along its main diagonal.  Returns ``(vertex_ids,
        W)`` where ``W[i, j]`` is the weight of coarse vertex ``vertex_ids[j]``
        (a flat grid index) at point ``i``.
        """
        if not self.is_grid:
            raise DomainError("triangulations need a grid domain")
        lines = self.coarse_lines(s)
        multi = np.array(np.unravel_index(np.arange(self.n), self.shape)).T
        cell_lo, frac = [], []
        for ax, L in enumerate(lines):
            c = np.clip(np.searchsorted(L, multi[:, ax], side="right") - 1, 0, len(L) - 2)
            a, b = L[c], L[c + 1]
            cell_lo.append(c)
            frac.append((multi[:, ax] - a) / (b - a))
        if self.d == 1:
            c, t = cell_lo[0], frac[0]
            L = lines[0]
            verts = [L[c], L[c + 1]]
            wts = [1 - t, t]
        else:
            ci, cj = cell_lo
            a, b = frac
            L0, L1 = lines
            v00 = self.flat(L0[ci], L1[cj])
            v10 = self.flat(L0[ci + 1], L1[cj])
            v01 = self.flat(L0[ci], L1[cj + 1])
            v11 = self.flat(L0[ci + 1], L1[cj + 1])
            lower = a >= b
            vmid = np.where(lower, v10, v01)
            wmid = np.where(lower, a - b, b - a)
            w00 = np.where(lower, 1 - a, 1 - b)
            w11 = np.where(lower, b, a)
            verts = [v00, vmid, v11]
            wts = [w00, wmid, w11]
        V = np.stack(verts, axis=1)
        Wt = np.stack(wts, axis=1)
        ids = np.unique(V)
        col = np.searchsorted(ids, V)
        W = np.zeros((self.n, len(ids)))
        np.add.at(W, (np.repeat(np.arange(self.n), V.shape[1]), col.ravel()), Wt.ravel())
        W[W < 1e-12] = 0.0
        return ids, W

    def flat(self, i, j) -> np.ndarray:
        return np.ravel_multi_index((i, j), self.shape)

    def scales(self) -> list[int]:
        """Coarse triangulation scales from the grid extent down to 1 (halving)."""
        if not self.is_grid:
            return [1]
        s = 1
        while s < max(self.shape) - 1:
            s *= 2
        out = []
        while s >= 1:
            out.append(s)
            s //= 2
        return out
