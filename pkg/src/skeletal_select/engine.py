"""Skeletal selections over nerves of covers and their stepwise lifting.

A k-skeletal selection for ``phi`` is a cover ``U`` of the domain with a PL map
``u`` on the k-skeleton of its nerve such that the image of every simplex of
dimension <= k made of members containing ``x`` lies in ``phi(x)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .complex import Simplex, SimplicialComplex, faces, image, vkey
from .covers import (
    Cover,
    canonical_map,
    low_order_refinement,
    nerve,
    partition_of_unity,
    refining_map,
    star_cover,
    verify_canonical,
)
from .domain import Domain
from .fillers import FillerError, FillerOracle, SphereMap, fill
from .realization import (
    DEFAULT_DEPTH,
    BaryPoint,
    PLMap,
    affine_extension,
    carrier,
    cell_lipschitz,
    eval_pl,
    lattice_key,
    lattice_keys,
)
from .regions import SetValuedMap, is_llc


class EngineError(RuntimeError):
    def __init__(self, message: str, stage: str | None = None, witness=None):
        super().__init__(message if stage is None else f"[{stage}] {message}")
        self.message = message
        self.stage = stage
        self.witness = witness


@lru_cache(maxsize=None)
def _keys(s: Simplex, depth: int) -> tuple:
    return tuple(lattice_keys(s, depth))


def map_key(key, r) -> tuple:
    """Image of a lattice key under the affine extension of a vertex map."""
    acc: dict = {}
    for v, i in key:
        w = r[v]
        acc[w] = acc.get(w, 0) + i
    return tuple(sorted(acc.items(), key=lambda t: vkey(t[0])))


@dataclass(eq=False)
class SkeletalSelection:
    k: int
    cover: Cover
    u: PLMap

    def values_on(self, s: Simplex) -> np.ndarray:
        return np.array([self.u.values[key] for key in _keys(s, self.u.depth)])


@dataclass
class SkeletalCheck:
    ok: bool
    checked: int
    violations: list = field(default_factory=list)  # (x, simplex, value)


def check_skeletal(s: SkeletalSelection, phi: SetValuedMap, limit: int = 20) -> SkeletalCheck:
    """Sampled skeletal condition: lattice values of ``u`` on ``|Σ^k(x)|`` lie in ``phi(x)``."""
    seen: dict = {}
    bad = []
    checked = 0
    for x, sg in enumerate(s.cover.sigmas):
        key = (sg, int(phi.cells[x]))
        if key in seen:
            continue
        seen[key] = x
        simps = list(faces(sg, s.k))
        Y = np.vstack([s.values_on(t) for t in simps])
        inside = phi.values[key[1]].contains(Y)
        checked += len(Y)
        if not inside.all():
            j = int(np.argmin(inside))
            off = np.cumsum([len(_keys(t, s.u.depth)) for t in simps])
            t = simps[int(np.searchsorted(off, j, side="right"))]
            bad.append((x, t, Y[j]))
            if len(bad) >= limit:
                break
    return SkeletalCheck(not bad, checked, bad)


def _labels(prefix: str, n: int) -> list[str]:
    return [f"{prefix}{i:05d}" for i in range(n)]


def values_contain(phi: SetValuedMap, Y: np.ndarray) -> np.ndarray:
    """Boolean matrix ``M[q, z] = Y[q] ∈ phi(z)``, with a bounding-box prefilter."""
    Y = np.asarray(Y, dtype=float)
    M = np.zeros((len(Y), phi.n_points), dtype=bool)
    for c, idx in phi.groups.items():
        R = phi.values[c]
        lo, hi = R.bbox()
        cand = np.flatnonzero(np.all((Y >= lo - 1e-9) & (Y <= hi + 1e-9), axis=1))
        if len(cand) == 0:
            continue
        inside = R.contains(Y[cand])
        M[np.ix_(cand[inside], idx)] = True
    return M


def zero_skeletal(phi: SetValuedMap, domain: Domain, depth: int = DEFAULT_DEPTH, check_llc: bool = True,
                  prefix: str = "U") -> SkeletalSelection:
    """One point ``y(x)`` per constancy cell; members ``U(x) = {z : y(x) ∈ phi(z)}``."""
    if check_llc:
        w = is_llc(phi, domain.edges)
        if w is not None:
            raise EngineError("not lower locally constant", "zero", w)
    cells = sorted(phi.groups)
    ys = []
    for c in cells:
        y = phi.values[c].find_point()
        if y is None:
            raise EngineError(f"empty value at cell {c}", "zero")
        ys.append(y)
    Y = np.array(ys)
    _, first = np.unique(Y, axis=0, return_index=True)
    Y = Y[np.sort(first)]
    M = values_contain(phi, Y)
    _, keep = np.unique(np.packbits(M, axis=1), axis=0, return_index=True)
    keep = np.sort(keep)
    Y, M = Y[keep], M[keep]
    labels = _labels(prefix, len(Y))
    cover = Cover(domain, labels, M)
    D = 2**depth
    u = PLMap(SimplicialComplex.from_maximal([(lab,) for lab in labels]), depth)
    for lab, y in zip(labels, Y):
        u[((lab, D),)] = y
    return SkeletalSelection(0, cover, u)


def transfer(s: SkeletalSelection, w: Cover) -> SkeletalSelection:
    """Compose ``u`` with the realization of the refining map ``N(w) -> N(s.cover)``."""
    r = refining_map(w, s.cover)
    K = nerve(w, max_dim=s.k)
    u = PLMap(K, s.u.depth)
    for t in K:
        for key in _keys(t, s.u.depth):
            u.values[key] = s.u.values[map_key(key, r)]
    u.m = s.u.m
    return SkeletalSelection(s.k, w, u)


# -- lifting -----------------------------------------------------------------


def _triangle_pos(nums, D: int) -> tuple[float, float]:
    """Boundary position (loop a->b->c->a, ``D`` units per edge) and radius parameter."""
    lam = np.asarray(nums, dtype=float) / D
    d = lam - 1 / 3
    neg = d < -1e-15
    if not neg.any():
        return 0.0, 1.0
    s = np.min((1 / 3) / -d[neg])
    q = 1 / 3 + s * d
    z = int(np.argmin(q))
    t = 1 - 1 / s
    if z == 2:
        return D * q[1], t
    if z == 0:
        return D + D * q[2], t
    return 2 * D + D * q[0], t


@dataclass(eq=False)
class LiftTrace:
    """Proof objects of one lift: fills, K(x), W-sets, star refinement (V, ℓ, p) and q, π."""

    k: int
    scale: int
    source: Cover
    refinement: Cover
    fills: dict  # simplex -> list of {lattice key: value}
    class_of: np.ndarray  # point -> class id
    classes: list  # (sigma, cell, {simplex: fill id})
    K: list  # class id -> samples of K(x)
    p: dict  # V label -> point
    ell: dict  # V label -> U label
    q: dict  # simplex of N(V) -> vertex
    pi: dict  # simplex of N(V) -> point

    def W(self, x: int, U, phi: SetValuedMap) -> np.ndarray:
        K = self.K[self.class_of[x]]
        m = self.source.member[self.source.index[U]].copy()
        for z in np.flatnonzero(m):
            m[z] = phi[z].contains_all(K)
        return m

    def audit(self, phi: SetValuedMap) -> dict:
        """Re-check every recorded relation directly from the stored objects."""
        V, Uc = self.refinement, self.source
        out = {"union_in_inter": 0, "K_in_phi": 0, "star_in_W": 0, "pi_in_sigma": 0,
               "n_simplices": 0, "n_points": int(V.domain.n), "n_members": V.size}
        for s in self.q:
            out["n_simplices"] += 1
            union = V.member[[V.index[a] for a in s]].any(axis=0)
            inter = Uc.member[[Uc.index[self.ell[a]] for a in s]].all(axis=0)
            if np.any(union & ~inter):
                out["union_in_inter"] += 1
            if not inter[self.pi[s]]:
                out["pi_in_sigma"] += 1
        for x in range(V.domain.n):
            if not phi[x].contains_all(self.K[self.class_of[x]]):
                out["K_in_phi"] += 1
        stars = V.stars()
        for i, lab in enumerate(V.labels):
            st = np.flatnonzero(stars[i])
            Kp = self.K[self.class_of[self.p[lab]]]
            inU = Uc.member[Uc.index[self.ell[lab]], st].all()
            if not inU or not all(phi[z].contains_all(Kp) for z in st):
                out["star_in_W"] += 1
        out["ok"] = not (out["union_in_inter"] or out["K_in_phi"] or out["star_in_W"] or out["pi_in_sigma"])
        return out

    def to_dict(self) -> dict:
        V = self.refinement
        return {
            "k": self.k,
            "scale": self.scale,
            "classes": [
                {"sigma": list(sg), "cell": c, "fills": [[list(t), f] for t, f in sorted(fl.items())],
                 "K_size": int(len(self.K[i]))}
                for i, (sg, c, fl) in enumerate(self.classes)
            ],
            "fills": {"|".join(t): [_fill_json(fv) for fv in lst] for t, lst in sorted(self.fills.items())},
            "refinement": [
                {"label": lab, "points": V.points_of(lab).tolist(), "p": int(self.p[lab]), "ell": self.ell[lab]}
                for lab in V.labels
            ],
            "simplices": [{"sigma": list(s), "q": self.q[s], "pi": int(self.pi[s])} for s in sorted(self.q)],
        }


def _fill_json(values: dict) -> list:
    return [[[list(kv) for kv in key], np.asarray(v).tolist()] for key, v in sorted(values.items())]


class _FillBank:
    def __init__(self, s: SkeletalSelection, oracle: FillerOracle):
        self.s = s
        self.oracle = oracle
        self.D = 2**s.u.depth
        self.fills: dict = {}

    def get(self, t: Simplex, B, x: int, stage: str) -> int:
        lst = self.fills.setdefault(t, [])
        for i, vals in enumerate(lst):
            if B.contains_all(np.array(list(vals.values()))):
                return i
        try:
            vals = self._build(t, B)
        except FillerError as e:
            raise EngineError(f"filler failure at (x={x}, sigma={t}): {e}", stage, (x, t)) from e
        Y = np.array(list(vals.values()))
        if not B.contains_all(Y):
            raise EngineError(f"filler failure at (x={x}, sigma={t}): fill leaves phi(x)", stage, (x, t))
        lst.append(vals)
        return len(lst) - 1

    def _build(self, t: Simplex, B) -> dict:
        u, D = self.s.u, self.D
        if len(t) == 2:
            a, b = t
            h = fill(SphereMap(0, [u.values[((a, D),)], u.values[((b, D),)]]), B, self.oracle)
            lv = h.lattice_values(D)
            return {lattice_key(t, (D - i, i)): lv[i] for i in range(D + 1)}
        if len(t) == 3:
            a, b, c = t
            loop = []
            for va, vb, ia, ib in ((a, b, 0, 1), (b, c, 1, 2), (c, a, 2, 0)):
                for j in range(D):
                    nums = [0, 0, 0]
                    nums[ia], nums[ib] = D - j, j
                    loop.append(u.values[lattice_key(t, nums)])
            h = fill(SphereMap.loop(np.array(loop)), B, self.oracle)
            out = {}
            for key in _keys(t, u.depth):
                if key in u.values:
                    out[key] = u.values[key]
                    continue
                nums = [dict(key).get(v, 0) for v in t]
                pos, tp = _triangle_pos(nums, D)
                out[key] = h.eval(pos, tp)
            return out
        raise EngineError("only k in {0, 1} fills are available", "lift")


def lift(s: SkeletalSelection, phi: SetValuedMap, oracle: FillerOracle | None = None, check_llc: bool = False,
         prefix: str | None = None) -> tuple[SkeletalSelection, LiftTrace]:
    """Lift a k-skeletal selection for ``psi`` to a (k+1)-skeletal selection for ``phi``."""
    k = s.k
    stage = f"lift{k}->{k + 1}"
    U = s.cover
    dom = U.domain
    depth = s.u.depth
    oracle = oracle or FillerOracle()
    if check_llc:
        w = is_llc(phi, dom.edges)
        if w is not None:
            raise EngineError("not lower locally constant", stage, w)
    bank = _FillBank(s, oracle)

    # (1)-(2): extensions u_(x, σ) and K(x), per class of points sharing σ(x) and phi(x)
    class_id: dict = {}
    class_of = np.empty(dom.n, dtype=int)
    classes = []
    K = []
    for x, sg in enumerate(U.sigmas):
        key = (sg, int(phi.cells[x]))
        if key not in class_id:
            B = phi.values[key[1]]
            fl = {}
            pts = [s.values_on(t) for t in faces(sg, k)]
            for t in itertools.combinations(sg, k + 2):
                fid = bank.get(t, B, x, stage)
                fl[t] = fid
                pts.append(np.array(list(bank.fills[t][fid].values())))
            class_id[key] = len(classes)
            classes.append((sg, key[1], fl))
            K.append(np.unique(np.vstack(pts), axis=0))
        class_of[x] = class_id[key]

    # (3)-(4): W_(x,U) = {z ∈ U : K(x) ⊆ phi(z)} and a star refinement with p(V) ∈ V
    memo: dict = {}

    def K_in(ci: int, z: int) -> bool:
        key = (ci, int(phi.cells[z]))
        if key not in memo:
            memo[key] = phi.values[key[1]].contains_all(K[ci])
        return memo[key]

    P = dom.points
    chosen = None
    for scale in dom.scales():
        V = star_cover(dom, scale, prefix or f"L{k + 1}_")
        stars = V.stars()
        inU = _first_containing(stars, U.member)
        if np.any(inU < 0):
            continue
        p, ell, ok = {}, {}, True
        for i, lab in enumerate(V.labels):
            st = np.flatnonzero(stars[i])
            found = None
            for x in V.points_of(lab):
                order = st[np.argsort(-np.linalg.norm(P[st] - P[x], axis=1), kind="stable")]
                ci = class_of[x]
                if all(K_in(ci, z) for z in order):
                    found = int(x)
                    break
            if found is None:
                ok = False
                break
            p[lab] = found
            ell[lab] = U.labels[inU[i]]
        if ok:
            chosen = (scale, V, p, ell)
            break
    if chosen is None:
        raise EngineError("llc hypothesis violated in practice", stage)
    scale, V, p, ell = chosen

    # (5): v on σ is u_(π(σ), ℓ(σ)) composed with |ℓ|
    NV = nerve(V, max_dim=k + 1)
    v = PLMap(NV, depth)
    qmap, pimap = {}, {}
    for sig in NV:
        qv = sig[0]
        pi = p[qv]
        qmap[sig], pimap[sig] = qv, pi
        tau = image(ell, sig)
        ci = class_of[pi]
        if len(tau) <= k + 1:
            src = s.u.values
        else:
            fid = classes[ci][2].get(tau)
            if fid is None:
                raise EngineError(f"simplex {tau} missing at point {pi}", stage)
            src = bank.fills[tau][fid]
        for key in _keys(sig, depth):
            val = src[map_key(key, ell)]
            old = v.values.get(key)
            if old is not None and np.max(np.abs(old - val)) > 1e-12:
                raise EngineError(f"inconsistent values on {sig}", stage)
            v.values[key] = val
    v.m = s.u.m
    trace = LiftTrace(k, scale, U, V, bank.fills, class_of, classes, K, p, ell, qmap, pimap)
    return SkeletalSelection(k + 1, V, v), trace


def _first_containing(sub: np.ndarray, sup: np.ndarray) -> np.ndarray:
    from .covers import _contained_first

    return _contained_first(sub, sup)


# -- assembly ----------------------------------------------------------------


@dataclass(eq=False)
class Assembly:
    f: np.ndarray
    h: list
    refinement: Cover
    r: dict
    canonical_ok: bool
    selection: SkeletalSelection

    def continuity(self, edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-edge measured ``|f(x) - f(x')|`` and the PL bound computed from ``u`` and ``h``."""
        u = self.selection.u
        K = u.complex
        lip: dict = {}
        meas, bound = [], []
        for a, b in np.asarray(edges, dtype=int):
            ha, hb = self.h[a], self.h[b]
            meas.append(float(np.linalg.norm(self.f[a] - self.f[b])))
            joint = tuple(sorted(set(carrier(ha)) | set(carrier(hb)), key=vkey))
            if joint in K.simplices:
                if joint not in lip:
                    lip[joint] = cell_lipschitz(u, joint)
                da, db = ha.as_dict(), hb.as_dict()
                l1 = sum(abs(da.get(v, 0.0) - db.get(v, 0.0)) for v in joint)
                bound.append(lip[joint] * l1 + 1e-12)
            else:
                Y = np.vstack([self.selection.values_on(carrier(ha)), self.selection.values_on(carrier(hb))])
                diam = np.max(np.linalg.norm(Y[:, None] - Y[None], axis=2))
                bound.append(float(diam) + 1e-12)
        return np.array(meas), np.array(bound)


def assemble(s: SkeletalSelection, n: int | None = None) -> Assembly:
    """``f = u ∘ |r| ∘ g`` with ``g`` canonical for a low-order refinement of the cover."""
    n = s.k if n is None else n
    dom = s.cover.domain
    if dom.d > n:
        raise EngineError("dimension exceeds order bound", "assemble")
    V = low_order_refinement(s.cover, n)
    r = refining_map(V, s.cover)
    g = canonical_map(partition_of_unity(V))
    h = [affine_extension(r, g(x)) for x in range(dom.n)]
    ok = verify_canonical(h, s.cover).ok
    f = np.array([eval_pl(s.u, p) for p in h])
    return Assembly(f, h, V, r, ok, s)
