"""Selection drivers built on the engine: aspherical pipeline, Cauchy refinement, Michael selection."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .covers import low_order_refinement
from .domain import Domain
from .engine import (
    Assembly,
    EngineError,
    SkeletalCheck,
    LiftTrace,
    SkeletalSelection,
    assemble,
    check_skeletal,
    lift,
    transfer,
    zero_skeletal,
)
from .fillers import FillerOracle
from .moduli import chain_53, chain_54, iterate, iterated_levels, stage_count
from .realization import DEFAULT_DEPTH
from .regions import Region, SetValuedMap, intersect, is_eps_selection, is_llc, o_map


@dataclass(eq=False)
class PipelineResult:
    f: np.ndarray
    assembly: Assembly
    selections: list
    skeletal_checks: list  # (stage name, SkeletalCheck)
    traces: list
    membership: np.ndarray  # distance of f(x) to phi_N(x)
    inside: np.ndarray
    phis: list = field(default_factory=list)


def run_aspherical(phis: list[SetValuedMap], domain: Domain, oracle: FillerOracle | None = None,
                   depth: int = DEFAULT_DEPTH, check_llc: bool = True, verify: bool = True) -> PipelineResult:
    """Continuous selection of ``phis[-1]`` from an aspherical sequence ``phis[0] ↪_0 ... ``.

    Runs the 0-skeletal construction, transfers to a cover of order <= N, lifts
    through every level and assembles with a canonical map.
    """
    N = len(phis) - 1
    if domain.d > N:
        raise EngineError(f"domain dimension {domain.d} exceeds the top level {N}", "pipeline")
    checks: list = []
    s = zero_skeletal(phis[0], domain, depth, check_llc=check_llc)
    if verify:
        checks.append(("zero", check_skeletal(s, phis[0])))
    W = low_order_refinement(s.cover, N)
    s = transfer(s, W)
    if verify:
        checks.append(("transfer", check_skeletal(s, phis[0])))
    sels = [s]
    traces = []
    for k in range(N):
        s, tr = lift(s, phis[k + 1], oracle, check_llc=check_llc)
        sels.append(s)
        traces.append(tr)
        if verify:
            checks.append((f"lift{k}->{k + 1}", check_skeletal(s, phis[k + 1])))
    A = assemble(s, N)
    dist = phis[N].dist_of(A.f)
    inside = phis[N].contains_of(A.f)
    return PipelineResult(A.f, A, sels, checks, traces, dist, inside, list(phis))


def local_select(psis: list[SetValuedMap], g: np.ndarray, delta, eps: float, domain: Domain,
                 oracle: FillerOracle | None = None, depth: int = DEFAULT_DEPTH) -> np.ndarray:
    """Selection ``f`` of ``psis[n]`` with ``|f - g| < eps``, given a δ_n(ε)-selection ``g`` of ``psis[0]``."""
    n = len(psis) - 1
    g = np.asarray(g, dtype=float).reshape(domain.n, -1)
    pre = is_eps_selection(g, psis[0], iterate(delta, n, eps))
    if not pre:
        raise EngineError(f"g is not a δ_n(ε)-selection at point {pre.worst}", "local")
    phis = [intersect(SetValuedMap.around(g, iterate(delta, n - k, eps)), psis[k]) for k in range(n + 1)]
    res = run_aspherical(phis, domain, oracle, depth, check_llc=False)
    return res.f


# -- Cauchy refinement -------------------------------------------------------


@dataclass
class StageRecord:
    n: int
    mu: float
    eps: float
    drift: float
    bound: float
    membership: float
    fixed_point: bool
    seconds: float

    @property
    def ok(self) -> bool:
        return self.drift < self.bound


@dataclass(eq=False)
class CauchyResult:
    f: np.ndarray
    g0: np.ndarray
    stages: list
    eps: float
    tol: float
    extras: list = field(default_factory=list)

    @property
    def total_drift(self) -> float:
        return float(np.max(np.linalg.norm(self.f - self.g0, axis=1), initial=0.0))


def cauchy_refine(Phi: SetValuedMap, g0: np.ndarray, xi, eps: float, inner, tol: float = 1e-6,
                  shortcut: bool = True) -> CauchyResult:
    """Iterate ``f_{n+1} = inner(Phi, ξ(2^{-(n+1)} ε), f_n, 2^{-n} ε)`` from ``f_1 = g0``.

    ``inner(Phi, mu, g, eps_n)`` returns a selection of ``O[Phi, mu] ∧ O[g, eps_n]``
    (or ``(f, extra)``).  Runs ``ceil(log2(ε / tol))`` stages.  With ``shortcut``
    a stage whose input already selects ``O[Phi, mu]`` returns it unchanged.
    """
    g0 = np.asarray(g0, dtype=float).reshape(Phi.n_points, -1)
    pre = is_eps_selection(g0, Phi, xi(eps / 2))
    if not pre:
        raise EngineError(f"g0 is not a ξ(ε/2)-selection at point {pre.worst}", "cauchy")
    f = g0
    stages, extras = [], []
    for n in range(1, stage_count(eps, tol) + 1):
        t0 = time.perf_counter()
        mu, eps_n = xi(2.0 ** (-(n + 1)) * eps), 2.0 ** (-n) * eps
        fixed = shortcut and bool(np.all(Phi.dist_of(f) < mu))
        if fixed:
            f_new = f
        else:
            try:
                out = inner(Phi, mu, f, eps_n)
            except EngineError as e:
                raise EngineError(f"stage {n}: {e}", f"cauchy-{n}") from e
            if isinstance(out, tuple):
                f_new, extra = out
                extras.append(extra)
            else:
                f_new = out
        drift = float(np.max(np.linalg.norm(f_new - f, axis=1), initial=0.0))
        memb = float(np.max(Phi.dist_of(f_new)))
        stages.append(StageRecord(n, mu, eps_n, drift, eps_n, memb, fixed, time.perf_counter() - t0))
        f = f_new
    return CauchyResult(f, g0, stages, eps, tol, extras)


# -- top-level drivers ---------------------------------------------------------


def near_inner(domain: Domain, delta, n: int, oracle: FillerOracle | None = None, depth: int = DEFAULT_DEPTH):
    """Inner solver selecting ``O[Phi, mu] ∧ O[g, eps]`` through the chain ``φ_k``."""
    ch = chain_53(delta, n)

    def inner(Phi: SetValuedMap, mu: float, g: np.ndarray, eps: float):
        phis = []
        for k in range(n + 2):
            ball = SetValuedMap.per_point([Region.point(y).neighborhood(ch.eta(k, eps)) for y in g])
            phis.append(intersect(o_map(Phi, ch.lam(k, eps, mu)), ball, check=False))
        res = run_aspherical(phis, domain, oracle, depth, check_llc=False)
        return res.f, res

    return inner


def select_near(Phi: SetValuedMap, g: np.ndarray, eps: float, delta, n: int, domain: Domain,
                oracle: FillerOracle | None = None, tol: float = 1e-6, depth: int = DEFAULT_DEPTH,
                shortcut: bool = True) -> CauchyResult:
    """Selection of the closure of ``Phi`` within ``eps`` of a γ(ε)-selection ``g``."""
    ch = chain_53(delta, n)
    xi = lambda e: ch.eta(0, e)  # noqa: E731
    return cauchy_refine(Phi, g, xi, eps, near_inner(domain, delta, n, oracle, depth), tol, shortcut)


def select_eps(Phis: list[SetValuedMap], eps: float, deltas, domain: Domain, oracle: FillerOracle | None = None,
               depth: int = DEFAULT_DEPTH, check_llc: bool = True) -> PipelineResult:
    """ε-selection of ``Phis[-1]`` from ``φ_k = O[Φ_k, γ_k(ε)]``."""
    n = len(Phis) - 2
    ch = chain_54(deltas, n)
    phis = [o_map(Phis[k], ch.gamma(k, eps)) for k in range(n + 2)]
    return run_aspherical(phis, domain, oracle, depth, check_llc=check_llc)


@dataclass(eq=False)
class MichaelResult:
    f: np.ndarray
    g: np.ndarray
    eps_stage: PipelineResult
    near_stage: CauchyResult
    gamma: float
    membership: np.ndarray
    inside: np.ndarray


def michael_select(Phi: SetValuedMap, eps0: float, delta, n: int, domain: Domain,
                   oracle: FillerOracle | None = None, tol: float = 1e-6, depth: int = DEFAULT_DEPTH,
                   shortcut: bool = True, jitter: np.ndarray | None = None) -> MichaelResult:
    """γ(ε0)-selection via ``select_eps`` (Φ_k = Φ), then ``select_near`` into the closure of Φ.

    ``jitter`` is added to the first-stage output before refinement (for stress runs);
    the sum must still be a γ(ε0)-selection.
    """
    gamma = chain_53(delta, n).gamma(eps0)
    try:
        first = select_eps([Phi] * (n + 2), gamma, iterated_levels(delta, n), domain, oracle, depth)
    except EngineError as e:
        raise EngineError(f"{e.message} (required scale γ = {gamma:.3g})", "eps-stage", e.witness) from e
    try:
        g = first.f if jitter is None else first.f + np.asarray(jitter, dtype=float).reshape(first.f.shape)
        near = select_near(Phi, g, eps0, delta, n, domain, oracle, tol, depth, shortcut)
    except EngineError as e:
        raise EngineError(str(e), "near-stage") from e
    closed = SetValuedMap(Phi.cells, [v.closure() for v in Phi.values])
    return MichaelResult(near.f, near.g0, first, near, gamma, closed.dist_of(near.f), closed.contains_of(near.f))
