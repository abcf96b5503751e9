import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import finite_instance
from skeletal_select.covers import _contained_first, star_cover
from skeletal_select.domain import Domain
from skeletal_select.engine import EngineError, assemble, check_skeletal, lift, transfer, zero_skeletal
from skeletal_select.fillers import FillerOracle
from skeletal_select.moduli import Modulus, iterate
from skeletal_select.regions import Region, SetValuedMap, o_map
from skeletal_select.scenarios import scenario_a, scenario_b
from skeletal_select.selection import local_select, run_aspherical


def test_zero_skeletal_constant():
    dom = Domain.interval(0, 1, 9)
    S = Region.box([0, 0], [1, 1])
    s = zero_skeletal(SetValuedMap.constant(S, dom.n), dom)
    assert s.cover.size == 1 and s.cover.member.all()
    y = s.u.values[((s.cover.labels[0], 8),)]
    assert S.contains(y)[0]
    A = assemble(s, 1)
    np.testing.assert_allclose(A.f, np.tile(y, (dom.n, 1)), atol=1e-15)


def test_zero_skeletal_two_overlapping_cells():
    dom = Domain.interval(0, 1, 10)
    cells = (np.arange(10) >= 5).astype(int)
    phi = SetValuedMap(cells, [Region.box([0, 0], [2, 1]), Region.box([1, 0], [3, 1])])
    phi = o_map(phi, 1.05)  # one-sided gap between the values is 1
    s = zero_skeletal(phi, dom)
    assert check_skeletal(s, phi).ok
    # exhaustive: x ∈ U  ⇒  u(U) ∈ φ(x), at every grid point and member
    for i, lab in enumerate(s.cover.labels):
        y = s.u.values[((lab, 8),)]
        for x in np.flatnonzero(s.cover.member[i]):
            assert phi[x].contains(y)[0]
        # and U is exactly the set of points whose value holds u(U)
        np.testing.assert_array_equal(s.cover.member[i], phi.contains_of(np.tile(y, (dom.n, 1))))


def test_zero_skeletal_rejects_non_llc():
    dom = Domain.interval(0, 1, 10)
    cells = (np.arange(10) >= 5).astype(int)
    phi = SetValuedMap(cells, [Region.ball([0, 0], 0.5), Region.ball([3, 0], 0.5)])
    with pytest.raises(EngineError, match="not lower locally constant") as e:
        zero_skeletal(phi, dom)
    assert e.value.witness is not None


@given(st.integers(0, 10_000))
def test_zero_skeletal_finite_brute_force(seed):
    rng = np.random.default_rng(seed)
    dom, Y, table, phi = finite_instance(rng, int(rng.integers(2, 7)), int(rng.integers(2, 9)))
    s = zero_skeletal(phi, dom)
    # exhaustive sets Z(y) = {x : y ∈ φ(x)} for every y ∈ Y
    Z = {j: frozenset(x for x in range(dom.n) if j in table[x]) for j in range(len(Y))}
    covered = np.zeros(dom.n, dtype=bool)
    for i, lab in enumerate(s.cover.labels):
        y = s.u.values[((lab, 8),)]
        j = int(np.argmin(np.linalg.norm(Y - y, axis=1)))
        assert np.linalg.norm(Y[j] - y) <= 1e-12
        members = frozenset(np.flatnonzero(s.cover.member[i]).tolist())
        assert members == Z[j]
        assert all(j in table[x] for x in members)
        covered |= s.cover.member[i]
    assert covered.all()


def test_transfer_identity_and_composition():
    dom, Phi = scenario_a(41)
    phi = o_map(Phi, 0.05)
    s = zero_skeletal(phi, dom)
    same = transfer(s, s.cover)
    for key, val in s.u.values.items():
        np.testing.assert_array_equal(same.u.values[key], val)
    w1 = next(star_cover(dom, sc) for sc in dom.scales()
              if np.all(_contained_first(star_cover(dom, sc).member, s.cover.member) >= 0))
    w2 = star_cover(dom, 1, "S")
    a = transfer(transfer(s, w1), w2)
    b = transfer(s, w2)
    assert check_skeletal(transfer(s, w1), phi).ok
    for key, val in b.u.values.items():
        np.testing.assert_allclose(a.u.values[key], val, atol=1e-9)


def test_lift_single_member_is_cone():
    dom = Domain.interval(0, 1, 7)
    phi = SetValuedMap.constant(Region.ball([0, 0], 1.0, open=False), dom.n)
    s = zero_skeletal(phi, dom)
    s1, tr = lift(s, phi)
    assert s1.k == 1 and check_skeletal(s1, phi).ok
    assert tr.audit(phi)["ok"]
    A = assemble(s1, 1)
    assert np.all(phi.contains_of(A.f))


def test_lift_convex_values_passes_invariant():
    dom, Phi = scenario_b(11, block=3, drift=0.0, arm_growth=0.0)
    box = SetValuedMap(Phi.cells, [Region.box(v.star_center - 0.1, v.star_center + 0.1) for v in Phi.values])
    res = run_aspherical([o_map(box, 0.05)] * 3, dom, FillerOracle("convex-linear"))
    assert all(chk.ok for _, chk in res.skeletal_checks)
    assert all(tr.audit(p)["ok"] for tr, p in zip(res.traces, res.phis[1:]))
    assert np.all(res.inside)


def test_assemble_rejects_dimension():
    dom = Domain.grid([0, 0], [1, 1], [4, 4])
    s = zero_skeletal(SetValuedMap.constant(Region.ball([0, 0], 1), dom.n), dom)
    with pytest.raises(EngineError, match="dimension"):
        assemble(s, 1)


def test_assemble_scenario_a_membership_and_continuity():
    dom, Phi = scenario_a(41)
    phis = [o_map(Phi, 0.05)] * 2
    res = run_aspherical(phis, dom)
    assert np.all(res.inside)
    meas, bound = res.assembly.continuity(dom.edges)
    assert np.all(meas <= bound)
    assert res.assembly.canonical_ok


def test_local_select_constant_convex():
    dom = Domain.interval(0, 1, 21)
    S = Region.box([0, 0], [1, 1])
    psis = [SetValuedMap.constant(S, dom.n)] * 2
    delta = Modulus.linear(0.5)
    eps = 0.3
    g = np.column_stack([np.linspace(0.1, 0.9, dom.n), np.full(dom.n, 1.0 + 0.5 * iterate(delta, 1, eps))])
    f = local_select(psis, g, delta, eps, dom)
    assert np.all(S.contains(f))
    assert np.all(np.linalg.norm(f - g, axis=1) < eps)


def test_local_select_precondition_names_point():
    dom = Domain.interval(0, 1, 5)
    psis = [SetValuedMap.constant(Region.box([0, 0], [1, 1]), dom.n)] * 2
    g = np.tile([0.5, 0.5], (5, 1))
    g[3] = [5.0, 5.0]
    with pytest.raises(EngineError, match="at point 3"):
        local_select(psis, g, Modulus.linear(0.5), 0.3, dom)


def test_lift_trace_serializes():
    dom = Domain.interval(0, 1, 7)
    phi = SetValuedMap.constant(Region.ball([0, 0], 1.0, open=False), dom.n)
    _, tr = lift(zero_skeletal(phi, dom), phi)
    d = tr.to_dict()
    assert d["k"] == 0 and len(d["refinement"]) == tr.refinement.size
    assert all(isinstance(v, list) for v in d["fills"].values())
    assert list(itertools.chain.from_iterable(r["points"] for r in d["refinement"]))
