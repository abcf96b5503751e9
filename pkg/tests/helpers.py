"""Random instance generators and brute-force oracles shared by the tests."""

import itertools
from functools import reduce

import numpy as np

from skeletal_select.complex import SimplicialComplex
from skeletal_select.covers import Cover
from skeletal_select.domain import Domain
from skeletal_select.moduli import Modulus
from skeletal_select.realization import BaryPoint
from skeletal_select.regions import Region, SetValuedMap


def random_grid(rng, dim):
    if dim == 1:
        return Domain.interval(0.0, 1.0, int(rng.integers(21, 401)))
    side = int(rng.integers(11, 101))
    return Domain.grid([0.0, 0.0], [1.0, 1.0], [side, side])


def random_cover(rng, dom, n_members=None):
    """Random ball/box cover; extra balls are added around uncovered points."""
    d = dom.d
    items = []
    n0 = n_members or int(rng.integers(2, 9))
    for i in range(n0):
        c = rng.uniform(0, 1, size=d)
        if rng.random() < 0.5:
            items.append({"label": f"M{i:03d}", "shape": {"ball": {"center": c.tolist(),
                                                                    "radius": float(rng.uniform(0.1, 0.5))}}})
        else:
            h = rng.uniform(0.05, 0.4, size=d)
            items.append({"label": f"M{i:03d}", "shape": {"box": {"lo": (c - h).tolist(), "hi": (c + h).tolist()}}})
    items = [it for it in items if _mask(dom, it["shape"]).any()]
    covered = np.zeros(dom.n, dtype=bool)
    for it in items:
        covered |= _mask(dom, it["shape"])
    j = n0  # fresh labels even when empty members were dropped
    while not covered.all():
        x = dom.points[np.flatnonzero(~covered)[0]]
        sh = {"ball": {"center": x.tolist(), "radius": float(rng.uniform(0.15, 0.35))}}
        items.append({"label": f"M{j:03d}", "shape": sh})
        covered |= _mask(dom, sh)
        j += 1
    return Cover.from_shapes(dom, items)


def _mask(dom, shape):
    P = dom.points
    if "ball" in shape:
        return np.linalg.norm(P - np.asarray(shape["ball"]["center"]), axis=1) < shape["ball"]["radius"]
    lo, hi = np.asarray(shape["box"]["lo"]), np.asarray(shape["box"]["hi"])
    return np.all((P >= lo - 1e-12) & (P <= hi + 1e-12), axis=1)


def random_bary_maps(rng, cover, count):
    """Point-wise random barycentric maps; some are canonical, many are not."""
    labels = list(cover.labels)
    out = []
    for _ in range(count):
        f = []
        mode = rng.integers(0, 3)
        bad = int(rng.integers(0, cover.domain.n))
        for x in range(cover.domain.n):
            sig = list(cover.sigma(x))
            if mode == 0 or (mode == 1 and x != bad):
                pool = sig
            else:
                pool = labels
            k = int(rng.integers(1, min(3, len(pool)) + 1))
            chosen = rng.choice(len(pool), size=k, replace=False)
            f.append(BaryPoint.of({pool[i]: float(rng.uniform(0.1, 1.0)) for i in chosen}))
        out.append(f)
    return out


def brute_nerve(cover):
    """All subfamilies with a common point, by direct set intersection."""
    sets = {lab: set(np.flatnonzero(cover.member[i]).tolist()) for i, lab in enumerate(cover.labels)}
    out = set()
    labels = sorted(sets)
    for r in range(1, len(labels) + 1):
        found = False
        for combo in itertools.combinations(labels, r):
            if set.intersection(*(sets[c] for c in combo)):
                out.add(combo)
                found = True
        if not found:
            break
    return out


def random_complex(rng, n_vertices, n_max=6, max_dim=3):
    verts = [f"v{i:02d}" for i in range(n_vertices)]
    maximal = []
    for _ in range(int(rng.integers(1, n_max + 1))):
        k = int(rng.integers(1, max_dim + 2))
        maximal.append(tuple(rng.choice(verts, size=min(k, n_vertices), replace=False).tolist()))
    used = {v for m in maximal for v in m}
    maximal += [(v,) for v in verts if v not in used]
    return SimplicialComplex.from_maximal(maximal)


def finite_instance(rng, n_x, n_y):
    """Discrete X (no adjacency) and a tabulated φ over a finite Y ⊂ R^2."""
    Y = rng.uniform(-1, 1, size=(n_y, 2)).round(3)
    dom = Domain.from_points(rng.uniform(size=(n_x, 1)))
    table = []
    for _ in range(n_x):
        k = int(rng.integers(1, n_y + 1))
        table.append(sorted(rng.choice(n_y, size=k, replace=False).tolist()))
    vals = [Region.union_of([Region.point(Y[j]) for j in row]) for row in table]
    return dom, Y, table, SetValuedMap(np.arange(n_x), vals)


# -- independent fold oracle ----------------------------------------------------
# Written from the recursions alone: each chain is a left fold over its levels.


def fold_iterate(delta, n, eps):
    return reduce(lambda v, _: delta(v), range(n), eps)


def fold_eta(delta, n, k, eps):
    return reduce(lambda v, _: delta(v) / 2, range(n + 1 - k), eps)


def fold_lam(delta, n, k, eps, mu):
    # λ_{n+1} = μ;  λ_j = δ_n(min(η(η_{j+1}(ε)), λ_{j+1}))
    def step(v, j):
        e = fold_eta(delta, n, j + 1, eps)
        return fold_iterate(delta, n, min(delta(e) / 2, v))

    return reduce(step, range(n, k - 1, -1), mu)


def fold_gamma54(deltas, k, eps):
    return reduce(lambda v, j: deltas[j](v), range(len(deltas) - 1, k - 1, -1), eps)


def random_modulus(rng):
    if rng.random() < 0.5:
        return Modulus.linear(float(rng.uniform(0.05, 1.0)))
    e = np.sort(rng.uniform(0.01, 5.0, size=4))
    d = np.sort(e * rng.uniform(0.1, 0.9, size=4))
    return Modulus.tabulated(np.stack([e, d], axis=1).tolist())


# -- acceptance report ------------------------------------------------------------

ACCEPTANCE: list[str] = []


def record(n: int, ok: bool, detail: str) -> str:
    line = f"AC{n:<2d} {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return line
