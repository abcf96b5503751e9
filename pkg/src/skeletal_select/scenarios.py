"""Parametric instance families: arcs over an interval, crosses over a square."""

from __future__ import annotations

import numpy as np

from .domain import Domain
from .regions import Region, SetValuedMap


def arc_region(theta_mid: float, span: float, r_in: float = 0.9, r_out: float = 1.1, pieces: int = 8,
               center=(0.0, 0.0)) -> Region:
    """Closed annular sector as a union of convex quadrilaterals (angles in radians)."""
    c = np.asarray(center, dtype=float)
    a = np.linspace(theta_mid - span / 2, theta_mid + span / 2, pieces + 1)
    u = np.stack([np.cos(a), np.sin(a)], axis=1)
    quads = []
    for i in range(pieces):
        verts = [c + r_in * u[i], c + r_out * u[i], c + r_out * u[i + 1], c + r_in * u[i + 1]]
        quads.append(Region.poly(verts))
    return Region.union_of(quads)


def cross_region(center, half_len: float = 0.3, half_width: float = 0.06, half_len_y: float | None = None) -> Region:
    """Closed plus-shaped union of two boxes, star-shaped about ``center``."""
    c = np.asarray(center, dtype=float)
    hy = half_len if half_len_y is None else half_len_y
    h = Region.box(c - [half_len, half_width], c + [half_len, half_width])
    v = Region.box(c - [half_width, hy], c + [half_width, hy])
    return Region.union_of([h, v], star_center=c)


def block_cells(domain: Domain, block: int) -> np.ndarray:
    """Cells of ``block``-sized index blocks of a grid domain (C order of block indices)."""
    multi = np.array(np.unravel_index(np.arange(domain.n), domain.shape)).T
    nb = [int(np.ceil(s / block)) for s in domain.shape]
    b = np.minimum(multi // block, np.array(nb) - 1)
    return np.ravel_multi_index(tuple(b.T), nb)


def arc_family(domain: Domain, n_cells: int = 10, step_deg: float = 2.0, span_deg: float = 120.0,
               base_deg: float = 60.0) -> SetValuedMap:
    """Arc values over a 1-D domain cut into ``n_cells`` equal cells, rotating ``step_deg`` per cell."""
    x = domain.points[:, 0]
    lo, hi = float(x.min()), float(x.max())
    t = (x - lo) / (hi - lo) if hi > lo else np.zeros_like(x)
    cells = np.minimum((t * n_cells).astype(int), n_cells - 1)
    vals = [arc_region(np.deg2rad(base_deg + step_deg * c), np.deg2rad(span_deg)) for c in range(n_cells)]
    return SetValuedMap(cells, vals)


def cross_family(domain: Domain, block: int = 5, drift: float = 0.04, arm_growth: float = 0.02,
                 half_len: float = 0.28, half_width: float = 0.06) -> SetValuedMap:
    """Cross values over blocks of a 2-D grid; centre and arm lengths move slowly across blocks."""
    if not domain.is_grid or domain.d != 2:
        raise ValueError("cross family needs a 2-D grid domain")
    cells = block_cells(domain, block)
    nb = [int(np.ceil(s / block)) for s in domain.shape]
    mid = domain.lo + domain.step * (np.array(domain.shape) - 1) / 2
    vals = []
    for c in range(nb[0] * nb[1]):
        bi, bj = divmod(c, nb[1])
        s = np.array([bi / max(nb[0] - 1, 1), bj / max(nb[1] - 1, 1)])
        center = mid + drift * (s - 0.5)
        vals.append(cross_region(center, half_len + arm_growth * s[0], half_width, half_len + arm_growth * s[1]))
    return SetValuedMap(cells, vals)


def scenario_a(n_points: int = 101, **kw):
    """1-D domain [0, 1]; arc values rotating from one cell to the next."""
    dom = Domain.interval(0.0, 1.0, n_points)
    return dom, arc_family(dom, **kw)


def scenario_b(side: int = 41, **kw):
    """2-D grid on the unit square; cross values whose centre and arms move slowly across blocks."""
    dom = Domain.grid([0.0, 0.0], [1.0, 1.0], [side, side])
    return dom, cross_family(dom, **kw)


def constant_instance(domain: Domain, region: Region) -> SetValuedMap:
    return SetValuedMap.constant(region, domain.n)
