"""Task execution, check reports, selection CSV and verification of third-party selections."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .complex import ComplexError
from .covers import (CoverError, canonical_map, low_order_refinement, nerve, partition_of_unity, sigma_at,
                     verify_canonical)
from .engine import EngineError, check_skeletal, lift, transfer, zero_skeletal
from .fillers import FillerError
from .instance import Instance
from .moduli import ModulusError, iterated_levels, stage_count
from .regions import RegionError, closure, is_eps_selection
from .selection import PipelineResult, michael_select, run_aspherical, select_eps

PIPELINE_ERRORS = (EngineError, CoverError, FillerError, RegionError, ModulusError, ComplexError)


class PipelineFailure(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def _num(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.ndarray):
        return [_num(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_num(x) for x in v]
    return v


@dataclass
class Report:
    """Per-check records ``{name, property, pass, witness, bound, measured}``."""

    task: str
    records: list = field(default_factory=list)

    def add(self, name: str, prop: str, ok: bool, witness=None, bound=None, measured=None):
        self.records.append({"name": name, "property": prop, "pass": bool(ok), "witness": _num(witness),
                             "bound": _num(bound), "measured": _num(measured)})

    @property
    def ok(self) -> bool:
        return all(r["pass"] for r in self.records)

    def failures(self) -> list:
        return [r for r in self.records if not r["pass"]]

    def to_dict(self) -> dict:
        return {"task": self.task, "pass": self.ok, "records": self.records}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


@dataclass
class Outcome:
    report: Report
    f: np.ndarray | None = None
    membership: np.ndarray | None = None
    drift: np.ndarray | None = None
    files: dict = field(default_factory=dict)  # name -> text


# -- report helpers ----------------------------------------------------------


def _pipeline_records(rep: Report, tag: str, res: PipelineResult, edges: np.ndarray):
    for name, chk in res.skeletal_checks:
        w = None if chk.ok else [int(chk.violations[0][0]), list(chk.violations[0][1])]
        rep.add(f"{tag}/{name}/containment", "skeletal containment u(|Σ^k(x)|) ⊆ φ(x) on lattice samples",
                chk.ok, w, 0, len(chk.violations))
    for tr, phi in zip(res.traces, res.phis[1:]):
        a = tr.audit(phi)
        bad = {k: a[k] for k in ("union_in_inter", "K_in_phi", "star_in_W", "pi_in_sigma")}
        rep.add(f"{tag}/lift{tr.k}->{tr.k + 1}/audit", "lift trace: ⋃σ ⊆ ⋂ℓ(σ), K(x) ⊆ φ(x), V* ⊆ W, π(σ) ∈ ⋂ℓ(σ)",
                a["ok"], None if a["ok"] else bad, 0, sum(bad.values()))
    rep.add(f"{tag}/assemble/canonical", "refined canonical map is canonical for the selection cover",
            res.assembly.canonical_ok)
    _continuity_record(rep, f"{tag}/assemble/continuity", res, edges)


def _continuity_record(rep: Report, name: str, res: PipelineResult, edges: np.ndarray):
    if len(edges) == 0:
        rep.add(name, "adjacent-sample jump within the PL bound", True, None, None, 0.0)
        return
    meas, bound = res.assembly.continuity(edges)
    excess = meas - bound
    w = int(np.argmax(excess))
    rep.add(name, "adjacent-sample jump within the PL bound", bool(np.all(meas <= bound)),
            [int(edges[w][0]), int(edges[w][1])], float(bound[w]), float(meas[w]))


def _membership_record(rep: Report, name: str, dists: np.ndarray, bound: float, strict: bool = False):
    w = int(np.argmax(dists))
    ok = bool(np.all(dists < bound)) if strict else bool(np.all(dists <= bound))
    rep.add(name, "distance of f(x) to the target value", ok, w, bound, float(dists[w]))


# -- tasks -------------------------------------------------------------------


def _task_nerve(inst: Instance) -> Outcome:
    c = inst.cover
    K = nerve(c)
    rep = Report("nerve")
    sig = set(c.sigmas)
    ok = all(any(set(s) <= set(t) for t in sig) for s in K) and all(t in K.simplices for t in sig)
    rep.add("nerve/simplices", "simplices are exactly the subfamilies with a common point", ok,
            None, None, len(K.simplices))
    rep.add("nerve/sigma_at", "Σ(x) is a subcomplex of the nerve at every point",
            all(s in K.simplices for x in range(c.domain.n) for s in sigma_at(c, x)))
    return Outcome(rep, files={"nerve.json": K.to_json() + "\n"})


def _task_canonical(inst: Instance) -> Outcome:
    c = inst.cover
    pou = partition_of_unity(c)
    rep = Report("canonical")
    err = np.abs(pou.sums() - 1.0)
    w = int(np.argmax(err))
    rep.add("canonical/pou-sum", "partition of unity sums to 1", bool(err[w] <= 1e-9), w, 1e-9, float(err[w]))
    rep.add("canonical/cozero", "cozero set of ξ_U lies in U", pou.cozero_ok())
    f = canonical_map(pou)
    chk = verify_canonical(f, c)
    rep.add("canonical/star", "f⁻¹(st⟨U⟩) ⊆ U for every member", chk.ok_star, chk.violation)
    rep.add("canonical/carrier", "carrier of f(x) lies in Σ(x) at every point", chk.ok_carrier, chk.carrier_violation)
    rep.add("canonical/agree", "the two canonical characterizations agree", chk.agree)
    data = [{"point": x, "weights": [[lab, _num(wt)] for lab, wt in f(x).coords]} for x in range(c.domain.n)]
    return Outcome(rep, files={"canonical.json": json.dumps(data) + "\n"})


def _task_skeletal(inst: Instance) -> Outcome:
    phis, dom, p = inst.mappings, inst.domain, inst.params
    rep = Report("skeletal")
    N = len(phis) - 1
    s = zero_skeletal(phis[0], dom, p.depth)
    stages = [("zero", s, phis[0])]
    s = transfer(s, low_order_refinement(s.cover, N))
    stages.append(("transfer", s, phis[0]))
    traces = []
    for k in range(N):
        s, tr = lift(s, phis[k + 1], inst.oracle)
        stages.append((f"lift{k}->{k + 1}", s, phis[k + 1]))
        traces.append((tr, phis[k + 1]))
    for name, sel, phi in stages:
        chk = check_skeletal(sel, phi)
        rep.add(f"skeletal/{name}/containment", "skeletal containment u(|Σ^k(x)|) ⊆ φ(x) on lattice samples",
                chk.ok, None, 0, len(chk.violations))
    out = []
    for tr, phi in traces:
        a = tr.audit(phi)
        rep.add(f"skeletal/lift{tr.k}->{tr.k + 1}/audit",
                "lift trace: ⋃σ ⊆ ⋂ℓ(σ), K(x) ⊆ φ(x), V* ⊆ W, π(σ) ∈ ⋂ℓ(σ)", a["ok"], None, 0,
                a["union_in_inter"] + a["K_in_phi"] + a["star_in_W"] + a["pi_in_sigma"])
        out.append({"stage": f"lift{tr.k}->{tr.k + 1}", "audit": a, "trace": tr.to_dict()})
    return Outcome(rep, files={"traces.json": json.dumps(out) + "\n"})


def _task_select(inst: Instance) -> Outcome:
    rep = Report("select")
    res = run_aspherical(inst.mappings, inst.domain, inst.oracle, inst.params.depth)
    _pipeline_records(rep, "select", res, inst.domain.edges)
    d = res.membership
    _membership_record(rep, "select/membership", d, 1e-6 + inst.value_resolution)
    return Outcome(rep, res.f, d, files={"traces.json": _traces_json([("select", res)])})


def _task_select_eps(inst: Instance) -> Outcome:
    p = inst.params
    Phis = inst.mappings
    n = len(Phis) - 2
    deltas = inst.moduli if inst.moduli is not None else iterated_levels(inst.modulus, n)
    rep = Report("select-eps")
    res = select_eps(Phis, p.eps, deltas, inst.domain, inst.oracle, p.depth)
    _pipeline_records(rep, "select-eps", res, inst.domain.edges)
    target = closure(Phis[-1])
    d = target.dist_of(res.f)
    _membership_record(rep, "select-eps/eps-selection", d, p.eps, strict=True)
    return Outcome(rep, res.f, d, files={"traces.json": _traces_json([("select-eps", res)])})


def _task_michael(inst: Instance) -> Outcome:
    p = inst.params
    Phi = inst.mapping
    jitter = None
    if p.perturb > 0:
        rng = np.random.default_rng(p.seed)
        v = rng.normal(size=(inst.domain.n, Phi.m))
        jitter = p.perturb * v / np.maximum(np.linalg.norm(v, axis=1, keepdims=True), 1e-300)
    rep = Report("michael")
    try:
        m = michael_select(Phi, p.eps, inst.modulus, p.n, inst.domain, inst.oracle, p.tol, p.depth, jitter=jitter)
    except EngineError as e:
        raise PipelineFailure(e.stage or "michael", e.message) from e
    first = m.eps_stage
    _pipeline_records(rep, "eps-stage", first, inst.domain.edges)
    rep.add("eps-stage/selection", "first stage selects the γ-neighbourhood of Φ", bool(first.inside.all()),
            None if first.inside.all() else int(np.argmin(first.inside)), 0, int(np.sum(~first.inside)))
    near = m.near_stage
    for st in near.stages:
        rep.add(f"near-stage/{st.n}/drift", "stage drift sup|f_(n+1) - f_n| < 2^-n ε", st.ok, None, st.bound, st.drift)
    rep.add("near-stage/count", "stage count equals ceil(log2(ε/tol))",
            len(near.stages) == stage_count(p.eps, p.tol), None, stage_count(p.eps, p.tol), len(near.stages))
    rep.add("near-stage/total-drift", "sup|f - g| < ε", near.total_drift < p.eps, None, p.eps, near.total_drift)
    last = first
    for extra in near.extras:
        if isinstance(extra, PipelineResult):
            last = extra
    for i, extra in enumerate(near.extras):
        if isinstance(extra, PipelineResult):
            for name, chk in extra.skeletal_checks:
                rep.add(f"near-stage/run{i}/{name}/containment", "skeletal containment u(|Σ^k(x)|) ⊆ φ(x) on lattice samples",
                        chk.ok, None, 0, len(chk.violations))
    if last is not first:
        _continuity_record(rep, "near-stage/continuity", last, inst.domain.edges)
    _membership_record(rep, "michael/membership", m.membership, p.tol + inst.value_resolution)
    drift = np.linalg.norm(m.f - m.g, axis=1)
    runs = [("eps-stage", first)] + [(f"near-stage/{i}", e) for i, e in enumerate(near.extras)
                                      if isinstance(e, PipelineResult)]
    return Outcome(rep, m.f, m.membership, drift, files={"traces.json": _traces_json(runs)})


def _traces_json(runs) -> str:
    out = []
    for tag, res in runs:
        for tr, phi in zip(res.traces, res.phis[1:]):
            out.append({"stage": f"{tag}/lift{tr.k}->{tr.k + 1}", "audit": tr.audit(phi), "trace": tr.to_dict()})
    return json.dumps(out) + "\n"


TASK_RUNNERS = {
    "nerve": _task_nerve,
    "canonical": _task_canonical,
    "skeletal": _task_skeletal,
    "select": _task_select,
    "select-eps": _task_select_eps,
    "michael": _task_michael,
}


def execute(inst: Instance) -> Outcome:
    """Run the instance's task; pipeline errors become :class:`PipelineFailure` with a stage tag."""
    try:
        out = TASK_RUNNERS[inst.task](inst)
    except PipelineFailure:
        raise
    except EngineError as e:
        raise PipelineFailure(e.stage or inst.task, e.message) from e
    except PIPELINE_ERRORS as e:
        raise PipelineFailure(inst.task, str(e)) from e
    if out.f is not None:
        out.files["selection.csv"] = selection_csv(inst, out.f, out.membership, out.drift)
        if inst.domain.d == 1:
            out.files["selection.svg"] = polyline_svg(inst.domain.points[:, 0], out.f)
    out.files["report.json"] = out.report.to_json()
    return out


# -- CSV / SVG ---------------------------------------------------------------


def _fmt(v: float) -> str:
    return repr(float(v))


def selection_csv(inst: Instance, f: np.ndarray, membership: np.ndarray, drift: np.ndarray | None = None) -> str:
    d, m = inst.domain.d, f.shape[1]
    head = [f"x{i}" for i in range(d)] + [f"f{i}" for i in range(m)] + ["membership"]
    if drift is not None:
        head.append("drift")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(head)
    for i in range(inst.domain.n):
        row = [_fmt(v) for v in inst.domain.points[i]] + [_fmt(v) for v in f[i]] + [_fmt(membership[i])]
        if drift is not None:
            row.append(_fmt(drift[i]))
        w.writerow(row)
    return buf.getvalue()


def polyline_svg(x: np.ndarray, f: np.ndarray, size: int = 400) -> str:
    """Polyline of ``f`` over a 1-D domain: the image curve for m = 2, else the graph of f0."""
    P = f[:, :2] if f.shape[1] >= 2 else np.stack([x, f[:, 0]], axis=1)
    lo, hi = P.min(axis=0), P.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    Q = 10 + (P - lo) / span * (size - 20)
    Q[:, 1] = size - Q[:, 1]
    pts = " ".join(f"{a:.3f},{b:.3f}" for a, b in Q)
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">\n'
            f'<polyline fill="none" stroke="black" stroke-width="1" points="{pts}"/>\n</svg>\n')


# -- verification ------------------------------------------------------------


class VerifyInputError(ValueError):
    """CSV and instance disagree about the domain (or the task has no selection)."""


def read_selection_csv(text: str, inst: Instance):
    """Rows matched to domain points by coordinates: ``(F, present)`` with NaN rows for missing points."""
    d = inst.domain.d
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r]
    if not rows:
        return np.full((inst.domain.n, 0), np.nan), np.zeros(inst.domain.n, dtype=bool)
    head = rows[0]
    xs = [i for i, h in enumerate(head) if h.startswith("x")]
    fs = [i for i, h in enumerate(head) if h.startswith("f")]
    if len(xs) != d:
        raise VerifyInputError(f"CSV has {len(xs)} domain columns, instance domain has dimension {d}")
    if not fs:
        raise VerifyInputError("CSV has no value columns")
    F = np.full((inst.domain.n, len(fs)), np.nan)
    present = np.zeros(inst.domain.n, dtype=bool)
    if len(rows) == 1:
        return F, present
    try:
        X = np.array([[float(r[i]) for i in xs] for r in rows[1:]])
        V = np.array([[float(r[i]) for i in fs] for r in rows[1:]])
    except (ValueError, IndexError) as e:
        raise VerifyInputError(f"malformed CSV row: {e}") from e
    tree = cKDTree(inst.domain.points)
    dist, idx = tree.query(X)
    scale = max(inst.domain.diameter, 1.0)
    bad = np.flatnonzero(dist > 1e-9 * scale)
    if len(bad):
        raise VerifyInputError(f"CSV row {int(bad[0]) + 1} at {X[bad[0]].tolist()} is not a domain point")
    if len(np.unique(idx)) != len(idx):
        raise VerifyInputError("CSV lists a domain point twice")
    F[idx] = V
    present[idx] = True
    return F, present


def verify(text: str, inst: Instance) -> Report:
    """Re-check a selection CSV against the instance without running any construction."""
    if inst.task not in ("select", "select-eps", "michael"):
        raise VerifyInputError(f"task {inst.task!r} produces no selection to verify")
    F, present = read_selection_csv(text, inst)
    rep = Report(f"verify:{inst.task}")
    missing = np.flatnonzero(~present)
    rep.add("verify/points", "every domain point has a value", len(missing) == 0,
            missing[:20].tolist() if len(missing) else None, 0, len(missing))
    if len(missing):
        return rep
    maps = inst.mappings if inst.mapping is None else [inst.mapping]
    target = maps[-1]
    if F.shape[1] != target.m:
        raise VerifyInputError(f"CSV has {F.shape[1]} value columns, values live in dimension {target.m}")
    p = inst.params
    res = inst.value_resolution
    if inst.task == "select":
        _membership_record(rep, "verify/membership", target.dist_of(F), 1e-6 + res)
    else:
        closed = closure(target)
        if inst.task == "michael":
            _membership_record(rep, "verify/membership", closed.dist_of(F), p.tol + res)
        chk = is_eps_selection(F, closed, p.eps)
        rep.add("verify/eps-selection", "f is an ε-selection", chk.ok, chk.worst, p.eps, chk.worst_dist)
    E = inst.domain.edges
    if len(E):
        jump = np.linalg.norm(F[E[:, 0]] - F[E[:, 1]], axis=1)
        w = int(np.argmax(jump))
        bound = p.max_jump
        rep.add("verify/continuity", "max adjacent-sample jump (bounded when params.max_jump is set)",
                True if bound is None else bool(jump[w] <= bound), E[w].tolist(), bound, float(jump[w]))
    return rep
