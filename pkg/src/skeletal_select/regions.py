"""Geometric values in R^m and piecewise-constant set-valued mappings.

A :class:`Region` wraps a shape tree built from primitives (ball, box, convex
polygon, grid mask), each carrying a Minkowski padding radius, combined with
unions, intersections and dilations of intersections.  Every shape exposes a
signed distance ``sd`` (exact sign, i.e. exact membership; magnitude exact
outside for primitives and unions) and an exact or grid-resolved ``dist``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.spatial import ConvexHull

TOL = 1e-9
DYKSTRA_ITERS = 4000


class RegionError(ValueError):
    pass


def _as2d(Y, m: int) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y.reshape(-1, m) if m > 1 or Y.size != 1 else Y.reshape(1, 1)
        if m == 1:
            Y = Y.reshape(-1, 1)
    return Y


def _box_sd(Y: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    out = np.maximum(np.maximum(lo - Y, Y - hi), 0.0)
    outside = np.linalg.norm(out, axis=1)
    inside = np.minimum((Y - lo).min(axis=1), (hi - Y).min(axis=1))
    return np.where(outside > 0, outside, -inside)


def _seg_dist(Y: np.ndarray, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ab = b - a
    L = float(ab @ ab)
    t = np.zeros(len(Y)) if L == 0 else np.clip((Y - a) @ ab / L, 0.0, 1.0)
    P = a + t[:, None] * ab
    return np.linalg.norm(Y - P, axis=1), P


class Shape:
    m: int
    convex: bool = False

    def sd(self, Y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def dist(self, Y: np.ndarray) -> np.ndarray:
        return np.maximum(self.sd(Y), 0.0)

    def project(self, Y: np.ndarray) -> np.ndarray:
        raise RegionError("projection needs a convex shape")

    def samples(self) -> np.ndarray:
        raise NotImplementedError

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def dilate(self, r: float) -> Shape:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Prim(Shape):
    """A primitive ``core`` dilated by ``pad``: ball, box, convex polygon or grid mask."""

    kind: str
    data: dict
    pad: float = 0.0

    def __post_init__(self):
        d = self.data
        if self.kind == "ball":
            d["c"] = np.atleast_1d(np.asarray(d["c"], dtype=float))
            d["r"] = float(d["r"])
            if d["r"] < 0:
                raise RegionError("negative radius")
        elif self.kind == "box":
            d["lo"] = np.atleast_1d(np.asarray(d["lo"], dtype=float))
            d["hi"] = np.atleast_1d(np.asarray(d["hi"], dtype=float))
            if np.any(d["hi"] < d["lo"]):
                raise RegionError("box with hi < lo")
        elif self.kind == "poly":
            V = np.asarray(d["verts"], dtype=float)
            if V.ndim != 2 or len(V) == 0:
                raise RegionError("poly needs a nonempty vertex list")
            if V.shape[1] != 2:
                raise RegionError("poly primitives are supported for m = 2 (use box for m = 1)")
            d["verts"] = V
            d["hull"] = _hull(V)
        elif self.kind == "mask":
            bits = np.asarray(d["bits"], dtype=bool)
            d["bits"] = bits
            d["origin"] = np.atleast_1d(np.asarray(d["origin"], dtype=float))
            d["step"] = float(d["step"])
            if bits.ndim != len(d["origin"]):
                raise RegionError("mask bits rank must match origin dimension")
            if not bits.any():
                raise RegionError("empty mask")
            if d["step"] <= 0:
                raise RegionError("mask step must be positive")
        else:
            raise RegionError(f"unknown primitive {self.kind!r}")
        if self.pad < 0:
            raise RegionError("negative padding")

    @property
    def m(self) -> int:
        d = self.data
        return {"ball": lambda: len(d["c"]), "box": lambda: len(d["lo"]), "poly": lambda: 2,
                "mask": lambda: len(d["origin"])}[self.kind]()

    @property
    def convex(self) -> bool:
        return self.kind != "mask"

    def _cells(self, bits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        d = self.data
        idx = np.argwhere(bits)
        c = d["origin"] + idx * d["step"]
        return c - d["step"] / 2, c + d["step"] / 2

    def core_sd(self, Y: np.ndarray) -> np.ndarray:
        d = self.data
        if self.kind == "ball":
            return np.linalg.norm(Y - d["c"], axis=1) - d["r"]
        if self.kind == "box":
            return _box_sd(Y, d["lo"], d["hi"])
        if self.kind == "poly":
            hull = d["hull"]
            if hull["normals"] is None:
                seg = hull["pts"]
                dd = np.full(len(Y), np.inf)
                for i in range(len(seg)):
                    dd = np.minimum(dd, _seg_dist(Y, seg[i], seg[(i + 1) % len(seg)])[0])
                return dd
            h = Y @ hull["normals"].T - hull["offsets"]
            hmax = h.max(axis=1)
            pts = hull["pts"]
            out = np.full(len(Y), np.inf)
            for i in range(len(pts)):
                out = np.minimum(out, _seg_dist(Y, pts[i], pts[(i + 1) % len(pts)])[0])
            return np.where(hmax > 0, out, hmax)
        # mask
        lo, hi = self._cells(d["bits"])
        D = np.linalg.norm(np.maximum(np.maximum(lo[None] - Y[:, None], Y[:, None] - hi[None]), 0.0), axis=2)
        outside = D.min(axis=1)
        res = outside.copy()
        ins = outside <= 0
        if ins.any():
            Yi = Y[ins]
            glo = d["origin"] - d["step"] / 2
            ghi = d["origin"] + (np.array(d["bits"].shape) - 1) * d["step"] + d["step"] / 2
            depth = np.minimum((Yi - glo).min(axis=1), (ghi - Yi).min(axis=1))
            if (~d["bits"]).any():
                ulo, uhi = self._cells(~d["bits"])
                Du = np.linalg.norm(np.maximum(np.maximum(ulo[None] - Yi[:, None], Yi[:, None] - uhi[None]), 0.0), axis=2)
                depth = np.minimum(depth, Du.min(axis=1))
            res[ins] = -depth
        return res

    def sd(self, Y):
        return self.core_sd(Y) - self.pad

    def project_core(self, Y: np.ndarray) -> np.ndarray:
        d = self.data
        if self.kind == "ball":
            v = Y - d["c"]
            n = np.linalg.norm(v, axis=1)
            scale = np.where(n > d["r"], d["r"] / np.where(n > 0, n, 1.0), 1.0)
            return d["c"] + v * scale[:, None]
        if self.kind == "box":
            return np.clip(Y, d["lo"], d["hi"])
        if self.kind == "poly":
            hull = d["hull"]
            pts = hull["pts"]
            best = np.full(len(Y), np.inf)
            P = Y.copy()
            for i in range(len(pts)):
                dd, Pi = _seg_dist(Y, pts[i], pts[(i + 1) % len(pts)])
                better = dd < best
                best = np.where(better, dd, best)
                P[better] = Pi[better]
            if hull["normals"] is not None:
                inside = (Y @ hull["normals"].T - hull["offsets"]).max(axis=1) <= 0
                P[inside] = Y[inside]
            return P
        raise RegionError("mask is not convex")

    def project(self, Y):
        P = self.project_core(Y)
        if self.pad == 0:
            return P
        v = Y - P
        n = np.linalg.norm(v, axis=1)
        scale = np.where(n > self.pad, self.pad / np.where(n > 0, n, 1.0), 1.0)
        return P + v * scale[:, None]

    def center(self) -> np.ndarray:
        d = self.data
        if self.kind == "ball":
            return d["c"]
        if self.kind == "box":
            return (d["lo"] + d["hi"]) / 2
        if self.kind == "poly":
            return d["hull"]["pts"].mean(axis=0)
        return self._cells(d["bits"])[0].mean(axis=0) + d["step"] / 2

    def samples(self) -> np.ndarray:
        d = self.data
        m = self.m
        if self.kind == "ball":
            c, r = d["c"], d["r"]
            if r == 0:
                S = c[None]
            elif m == 1:
                S = np.array([c, c - r, c + r, c - r / 2, c + r / 2])
            elif m == 2:
                t = np.linspace(0, 2 * np.pi, 16, endpoint=False)
                ring = np.stack([np.cos(t), np.sin(t)], axis=1)
                S = np.vstack([c, c + r * ring, c + 0.5 * r * ring[::2]])
            else:
                E = np.vstack([np.eye(m), -np.eye(m)])
                S = np.vstack([c, c + r * E, c + 0.5 * r * E])
        elif self.kind == "box":
            lo, hi = d["lo"], d["hi"]
            axes = [np.linspace(lo[i], hi[i], 5 if m <= 2 else 3) for i in range(m)]
            S = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)
        elif self.kind == "poly":
            pts = d["hull"]["pts"]
            c = pts.mean(axis=0)
            mids = (pts + np.roll(pts, -1, axis=0)) / 2
            S = np.vstack([c, pts, mids, (pts + c) / 2, (mids + c) / 2])
        else:
            lo, hi = self._cells(d["bits"])
            S = (lo + hi) / 2
            if len(S) > 400:
                S = S[:: int(np.ceil(len(S) / 400))]
        c = self.center()
        return c + (S - c) * (1 - 1e-6)

    def bbox(self):
        d = self.data
        if self.kind == "ball":
            lo, hi = d["c"] - d["r"], d["c"] + d["r"]
        elif self.kind == "box":
            lo, hi = d["lo"], d["hi"]
        elif self.kind == "poly":
            lo, hi = d["verts"].min(axis=0), d["verts"].max(axis=0)
        else:
            clo, chi = self._cells(d["bits"])
            lo, hi = clo.min(axis=0), chi.max(axis=0)
        return lo - self.pad, hi + self.pad

    def dilate(self, r):
        return replace(self, data=dict(self.data), pad=self.pad + r)

    def to_dict(self):
        d = self.data
        if self.kind == "ball":
            body = {"c": d["c"].tolist(), "r": d["r"]}
        elif self.kind == "box":
            body = {"lo": d["lo"].tolist(), "hi": d["hi"].tolist()}
        elif self.kind == "poly":
            body = {"verts": d["verts"].tolist()}
        else:
            body = {"origin": d["origin"].tolist(), "step": d["step"], "bits": d["bits"].astype(int).tolist()}
        out = {self.kind: body}
        if self.pad:
            out["pad"] = self.pad
        return out


def _hull(V: np.ndarray) -> dict:
    V = np.unique(V, axis=0)
    if len(V) >= 3:
        try:
            h = ConvexHull(V)
            pts = V[h.vertices]  # counter-clockwise
            e = np.roll(pts, -1, axis=0) - pts
            normals = np.stack([e[:, 1], -e[:, 0]], axis=1)
            normals /= np.linalg.norm(normals, axis=1, keepdims=True)
            offsets = np.einsum("ij,ij->i", normals, pts)
            return {"pts": pts, "normals": normals, "offsets": offsets}
        except Exception:  # collinear input
            pass
    if len(V) == 1:
        return {"pts": V, "normals": None, "offsets": None}
    d = V - V[0]
    u = d[np.argmax(np.linalg.norm(d, axis=1))]
    t = d @ u
    return {"pts": np.array([V[np.argmin(t)], V[np.argmax(t)]]), "normals": None, "offsets": None}


@dataclass(frozen=True, eq=False)
class Union(Shape):
    parts: tuple

    @property
    def m(self):
        return self.parts[0].m

    @property
    def convex(self):
        return len(self.parts) == 1 and self.parts[0].convex

    def sd(self, Y):
        return np.min([p.sd(Y) for p in self.parts], axis=0)

    def dist(self, Y):
        return np.min([p.dist(Y) for p in self.parts], axis=0)

    def project(self, Y):
        best = np.full(len(Y), np.inf)
        P = Y.copy()
        for p in self.parts:
            if not p.convex:
                continue
            Pi = p.project(Y)
            dd = np.linalg.norm(Y - Pi, axis=1)
            ok = np.isfinite(Pi).all(axis=1)
            better = ok & (dd < best)
            best = np.where(better, dd, best)
            P[better] = Pi[better]
        return P

    def samples(self):
        return np.vstack([p.samples() for p in self.parts])

    def bbox(self):
        bs = [p.bbox() for p in self.parts]
        return np.min([b[0] for b in bs], axis=0), np.max([b[1] for b in bs], axis=0)

    def dilate(self, r):
        return Union(tuple(p.dilate(r) for p in self.parts))

    def to_dict(self):
        return {"union": [p.to_dict() for p in self.parts]}


@dataclass(frozen=True, eq=False)
class Inter(Shape):
    parts: tuple

    @property
    def m(self):
        return self.parts[0].m

    @property
    def convex(self):
        return all(p.convex for p in self.parts)

    def sd(self, Y):
        return np.max([p.sd(Y) for p in self.parts], axis=0)

    def _empty_bbox(self) -> bool:
        lo, hi = self.bbox()
        return bool(np.any(lo > hi + TOL))

    def _ball_and_rest(self):
        """``(ball, other)`` when this is a ball meeting one other convex part, else ``None``."""
        if len(self.parts) != 2:
            return None
        a, b = self.parts
        for ball, other in ((a, b), (b, a)):
            if isinstance(ball, Prim) and ball.kind == "ball" and other.convex and not isinstance(other, Inter):
                return ball, other
        return None

    @cached_property
    def void(self) -> bool:
        """True when the intersection is known to be empty (bbox or exact ball test)."""
        if self._empty_bbox():
            return True
        pair = self._ball_and_rest()
        if pair is None:
            return False
        ball, other = pair
        c = ball.data["c"]
        q = other.project(c[None])[0]
        return bool(np.linalg.norm(q - c) > ball.data["r"] + ball.pad + TOL)

    def project(self, Y):
        if not self.convex:
            raise RegionError("projection needs a convex shape")
        if self.void:
            return np.full_like(Y, np.nan)
        x = Y.copy()
        incs = [np.zeros_like(Y) for _ in self.parts]
        act = np.arange(len(Y))
        for _ in range(DYKSTRA_ITERS):
            xa = x[act]
            prev = xa
            for i, p in enumerate(self.parts):
                z = xa + incs[i][act]
                xa = p.project(z)
                incs[i][act] = z - xa
            x[act] = xa
            act = act[np.max(np.abs(xa - prev), axis=1) >= 1e-12]
            if len(act) == 0:
                break
        bad = self.sd(x) > 1e-7
        x[bad] = np.nan
        return x

    def dist(self, Y):
        if self.convex and self.void:
            return np.full(len(Y), np.inf)
        s = self.sd(Y)
        out = np.zeros(len(Y))
        outside = s > 0
        if not outside.any():
            return out
        Yo = Y[outside]
        if self.convex:
            P = self.project(Yo)
            d = np.linalg.norm(Yo - P, axis=1)
            out[outside] = np.where(np.isfinite(d), d, np.inf)
        else:
            S = grid_samples(self, 48 if self.m <= 2 else 10)
            S = np.vstack([S, self.samples()]) if len(S) else self.samples()
            S = S[self.sd(S) <= 0]
            if len(S) == 0:
                out[outside] = np.inf
            else:
                out[outside] = np.min(np.linalg.norm(Yo[:, None] - S[None], axis=2), axis=1)
        return out

    def samples(self):
        if self.void:
            return np.zeros((0, self.m))
        S = np.vstack([p.samples() for p in self.parts])
        S = S[self.sd(S) < -TOL]
        pair = self._ball_and_rest()
        if len(S) == 0 and pair is not None:
            # exact: the point of the other part nearest the ball centre
            ball, other = pair
            c = ball.data["c"]
            q = other.project(c[None])
            if np.linalg.norm(q[0] - c) > ball.data["r"] + ball.pad + TOL:
                return np.zeros((0, self.m))
            return q
        if len(S) == 0:
            c = 0.5 * np.add(*self.bbox())
            if self.convex:
                P = self.project(c[None])
                if np.isfinite(P).all():
                    S = P
            G = grid_samples(self, 16 if self.m <= 2 else 5)
            if len(G):
                S = np.vstack([S, G[[np.argmin(self.sd(G))]]]) if len(S) else G[[np.argmin(self.sd(G))]]
        return S.reshape(-1, self.m)

    def bbox(self):
        bs = [p.bbox() for p in self.parts]
        return np.max([b[0] for b in bs], axis=0), np.min([b[1] for b in bs], axis=0)

    def dilate(self, r):
        return Dilate(self, r)

    def to_dict(self):
        return {"inter": [p.to_dict() for p in self.parts]}


@dataclass(frozen=True, eq=False)
class Dilate(Shape):
    part: Shape
    r: float

    @property
    def m(self):
        return self.part.m

    @property
    def convex(self):
        return self.part.convex

    def sd(self, Y):
        s = self.part.sd(Y)
        out = s - self.r
        outside = s > 0
        if outside.any():
            out[outside] = self.part.dist(Y[outside]) - self.r
        return out

    def dist(self, Y):
        return np.maximum(self.part.dist(Y) - self.r, 0.0)

    def project(self, Y):
        P = self.part.project(Y)
        v = Y - P
        n = np.linalg.norm(v, axis=1)
        scale = np.where(n > self.r, self.r / np.where(n > 0, n, 1.0), 1.0)
        return P + v * scale[:, None]

    def samples(self):
        return self.part.samples()

    def bbox(self):
        lo, hi = self.part.bbox()
        return lo - self.r, hi + self.r

    def dilate(self, r):
        return Dilate(self.part, self.r + r)

    def to_dict(self):
        return {"dilate": {"r": self.r, "of": self.part.to_dict()}}


def intersect_shapes(a: Shape, b: Shape) -> Shape:
    """Intersection, distributed over unions so pieces stay intersections of convex parts."""
    ap = a.parts if isinstance(a, Union) else (a,)
    bp = b.parts if isinstance(b, Union) else (b,)
    pieces = []
    for x in ap:
        for y in bp:
            xs = x.parts if isinstance(x, Inter) else (x,)
            ys = y.parts if isinstance(y, Inter) else (y,)
            pieces.append(Inter(xs + ys))
    return pieces[0] if len(pieces) == 1 else Union(tuple(pieces))


def grid_samples(shape: Shape, res: int) -> np.ndarray:
    """Grid points of the bounding box lying strictly inside ``shape``."""
    lo, hi = shape.bbox()
    if np.any(hi < lo):
        return np.zeros((0, shape.m))
    axes = [np.linspace(lo[i], hi[i], res) for i in range(shape.m)]
    G = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, shape.m)
    return G[shape.sd(G) < -TOL]


def shape_from_dict(d: dict) -> Shape:
    d = dict(d)
    pad = float(d.pop("pad", 0.0))
    if len(d) != 1:
        raise RegionError(f"expected exactly one shape key, got {sorted(d)}")
    (kind, body), = d.items()
    if kind in ("ball", "box", "poly", "mask"):
        if kind == "ball":
            body = {"c": body["c"], "r": body["r"]}
        return Prim(kind, dict(body), pad)
    if kind == "union":
        return Union(tuple(shape_from_dict(x) for x in body))
    if kind == "inter":
        return Inter(tuple(shape_from_dict(x) for x in body))
    if kind == "dilate":
        return Dilate(shape_from_dict(body["of"]), float(body["r"]))
    raise RegionError(f"unknown shape {kind!r}")


@dataclass(frozen=True, eq=False)
class Region:
    """A nonempty subset of R^m.  ``open`` selects strict membership (tolerance ``TOL``)."""

    shape: Shape
    open: bool = False
    star_center: np.ndarray | None = None

    @property
    def m(self) -> int:
        return self.shape.m

    # constructors
    @classmethod
    def ball(cls, c, r, open=True) -> Region:
        return cls(Prim("ball", {"c": c, "r": r}), open, np.atleast_1d(np.asarray(c, dtype=float)))

    @classmethod
    def box(cls, lo, hi, open=False) -> Region:
        p = Prim("box", {"lo": lo, "hi": hi})
        return cls(p, open, p.center())

    @classmethod
    def poly(cls, verts, open=False) -> Region:
        p = Prim("poly", {"verts": verts})
        return cls(p, open, p.center())

    @classmethod
    def mask(cls, origin, step, bits, open=False) -> Region:
        return cls(Prim("mask", {"origin": origin, "step": step, "bits": bits}), open)

    @classmethod
    def point(cls, p) -> Region:
        return cls(Prim("ball", {"c": p, "r": 0.0}), False, np.atleast_1d(np.asarray(p, dtype=float)))

    @classmethod
    def union_of(cls, regions: list[Region], star_center=None) -> Region:
        parts = []
        for r in regions:
            parts.extend(r.shape.parts if isinstance(r.shape, Union) else (r.shape,))
        sc = None if star_center is None else np.asarray(star_center, dtype=float)
        return cls(Union(tuple(parts)), all(r.open for r in regions), sc)

    # queries
    def _Y(self, Y) -> np.ndarray:
        Y = np.asarray(Y, dtype=float)
        if Y.ndim <= 1:
            Y = Y.reshape(1, -1) if Y.size == self.m else Y.reshape(-1, 1)
        return Y

    def sd(self, Y) -> np.ndarray:
        return self.shape.sd(self._Y(Y))

    def contains(self, Y) -> np.ndarray:
        s = self.sd(Y)
        return s < -TOL if self.open else s <= TOL

    def contains_all(self, Y) -> bool:
        Y = np.asarray(Y, dtype=float)
        return len(Y) == 0 or bool(self.contains(Y).all())

    def dist(self, Y) -> np.ndarray:
        return self.shape.dist(self._Y(Y))

    def depth(self, Y) -> np.ndarray:
        return -self.sd(Y)

    def bbox(self):
        return self.shape.bbox()

    def samples(self) -> np.ndarray:
        """Finite sample of the core: vertices/centres of primitives plus interior grid points."""
        S = self.shape.samples()
        return S[self.contains(S)] if len(S) else S

    def candidates(self, res: int | None = None) -> np.ndarray:
        res = res or (24 if self.m <= 2 else 6)
        parts = [self.shape.samples(), grid_samples(self.shape, res)]
        if self.star_center is not None:
            parts.append(self.star_center[None])
        S = np.vstack([p for p in parts if len(p)]) if any(len(p) for p in parts) else np.zeros((0, self.m))
        return S

    def find_point(self) -> np.ndarray | None:
        """Deepest candidate point strictly inside (deterministic), or ``None`` if none found."""
        S = self.candidates()
        if len(S) == 0:
            return None
        dep = self.depth(S)
        ok = self.contains(S)
        if not ok.any():
            return None
        dep = np.where(ok, dep, -np.inf)
        return S[int(np.argmax(dep))].copy()

    def is_empty(self) -> bool:
        return self.find_point() is None

    # algebra
    def neighborhood(self, eps: float) -> Region:
        if eps <= 0:
            raise RegionError("neighborhood radius must be positive")
        return Region(self.shape.dilate(eps), True, self.star_center)

    def intersect(self, other: Region) -> Region:
        sc = self.star_center if self.star_center is not None else other.star_center
        if sc is not None and not (Region(intersect_shapes(self.shape, other.shape), True).contains(sc).all()):
            sc = None
        return Region(intersect_shapes(self.shape, other.shape), self.open or other.open, sc)

    def closure(self) -> Region:
        return Region(self.shape, False, self.star_center)

    def with_star_center(self, c) -> Region:
        return Region(self.shape, self.open, None if c is None else np.asarray(c, dtype=float))

    # serialization
    def to_dict(self) -> dict:
        s = self.shape
        parts = s.parts if isinstance(s, Union) else (s,)
        out = {"union": [p.to_dict() for p in parts], "open": self.open}
        if self.star_center is not None:
            out["star_center"] = np.asarray(self.star_center).tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> Region:
        if "union" not in d:
            raise RegionError("region needs a 'union' list")
        if not d["union"]:
            raise RegionError("empty union")
        parts = tuple(shape_from_dict(x) for x in d["union"])
        ms = {p.m for p in parts}
        if len(ms) != 1:
            raise RegionError("mixed ambient dimensions in region")
        sc = d.get("star_center")
        return cls(Union(parts) if len(parts) > 1 else parts[0], bool(d.get("open", False)),
                   None if sc is None else np.asarray(sc, dtype=float))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> Region:
        return cls.from_dict(json.loads(text))


def dist(y, S: Region) -> float:
    return float(S.dist(np.atleast_1d(np.asarray(y, dtype=float)).reshape(1, -1))[0])


def neighborhood(S: Region, eps: float) -> Region:
    return S.neighborhood(eps)


# -- set-valued mappings ------------------------------------------------------


@dataclass(eq=False)
class SetValuedMap:
    """Piecewise-constant mapping: point ``i`` of the domain gets ``values[cells[i]]``."""

    cells: np.ndarray
    values: list

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=int)
        if len(self.values) == 0 or self.cells.min() < 0 or self.cells.max() >= len(self.values):
            raise RegionError("every cell must be assigned a value")

    @classmethod
    def constant(cls, region: Region, n_points: int) -> SetValuedMap:
        return cls(np.zeros(n_points, dtype=int), [region])

    @classmethod
    def per_point(cls, regions: list[Region]) -> SetValuedMap:
        return cls(np.arange(len(regions)), list(regions))

    @classmethod
    def around(cls, g: np.ndarray, eps: float) -> SetValuedMap:
        """``O[g, eps]`` for a single-valued map ``g`` given by its values on the domain."""
        g = np.asarray(g, dtype=float).reshape(len(g), -1)
        return cls.per_point([Region.ball(y, eps, open=True) for y in g])

    @property
    def n_points(self) -> int:
        return len(self.cells)

    @property
    def m(self) -> int:
        return self.values[0].m

    def __getitem__(self, i: int) -> Region:
        return self.values[self.cells[i]]

    @cached_property
    def groups(self) -> dict[int, np.ndarray]:
        order = np.argsort(self.cells, kind="stable")
        cs = self.cells[order]
        cuts = np.flatnonzero(np.diff(cs)) + 1
        return {int(self.cells[s[0]]): s for s in (order[a:b] for a, b in zip(np.r_[0, cuts], np.r_[cuts, len(cs)]))}

    def dist_of(self, F: np.ndarray) -> np.ndarray:
        F = np.asarray(F, dtype=float).reshape(self.n_points, -1)
        out = np.empty(self.n_points)
        for c, idx in self.groups.items():
            out[idx] = self.values[c].dist(F[idx])
        return out

    def contains_of(self, F: np.ndarray) -> np.ndarray:
        F = np.asarray(F, dtype=float).reshape(self.n_points, -1)
        out = np.empty(self.n_points, dtype=bool)
        for c, idx in self.groups.items():
            out[idx] = self.values[c].contains(F[idx])
        return out


def o_map(phi: SetValuedMap, eps: float) -> SetValuedMap:
    return SetValuedMap(phi.cells.copy(), [v.neighborhood(eps) for v in phi.values])


def closure(phi: SetValuedMap) -> SetValuedMap:
    return SetValuedMap(phi.cells.copy(), [v.closure() for v in phi.values])


def intersect(phi: SetValuedMap, psi: SetValuedMap, check: bool = True) -> SetValuedMap:
    if phi.n_points != psi.n_points:
        raise RegionError("mappings live on different domains")
    pairs, cells = np.unique(np.stack([phi.cells, psi.cells], axis=1), axis=0, return_inverse=True)
    vals = []
    for ci, (a, b) in enumerate(pairs):
        r = phi.values[a].intersect(psi.values[b])
        if check and r.is_empty():
            pts = np.flatnonzero(cells.reshape(-1) == ci)
            raise RegionError(f"empty value at cell {ci} (points {pts[:5].tolist()})")
        vals.append(r)
    return SetValuedMap(cells.reshape(-1), vals)


@dataclass
class SelectionCheck:
    ok: bool
    dists: np.ndarray
    worst: int
    worst_dist: float

    def __bool__(self):
        return self.ok


def is_eps_selection(F: np.ndarray, phi: SetValuedMap, eps: float) -> SelectionCheck:
    d = phi.dist_of(F)
    w = int(np.argmax(d))
    return SelectionCheck(bool(np.all(d < eps)), d, w, float(d[w]))


@dataclass
class LlcWitness:
    x: int
    z: int
    point: np.ndarray


def is_llc(phi: SetValuedMap, edges: np.ndarray) -> LlcWitness | None:
    """Discrete lower-local-constancy check across domain adjacency.

    For every adjacent pair ``(x, z)`` in different constancy cells, the core
    sample ``K`` of ``phi(x)`` must lie in ``phi(z)``; returns the first failure.
    """
    seen = set()
    samples: dict[int, np.ndarray] = {}
    for a, b in np.asarray(edges, dtype=int).reshape(-1, 2):
        for x, z in ((a, b), (b, a)):
            cx, cz = int(phi.cells[x]), int(phi.cells[z])
            if cx == cz or (cx, cz) in seen:
                continue
            seen.add((cx, cz))
            if cx not in samples:
                samples[cx] = phi.values[cx].samples()
            K = samples[cx]
            if len(K) == 0:
                continue
            inside = phi.values[cz].contains(K)
            if not inside.all():
                return LlcWitness(int(x), int(z), K[int(np.argmin(inside))])
    return None


def one_sided_gap(phi: SetValuedMap, edges: np.ndarray) -> float:
    """Max over adjacent cells of ``sup_{y in core(phi(x))} dist(y, phi(z))``."""
    gap = 0.0
    for a, b in np.asarray(edges, dtype=int).reshape(-1, 2):
        for x, z in ((a, b), (b, a)):
            if phi.cells[x] != phi.cells[z]:
                K = phi[x].samples()
                if len(K):
                    gap = max(gap, float(phi[z].dist(K).max()))
    return gap
