import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import null_space

from _oracles import exact_vertices, inequality_slack, lp_bounds, t1_cells, type_matrix
from ivbias import bounds as bd
from ivbias import scenario as sc
from ivbias.errors import IncompatibleLaw


def law_from_cond(cond, pg=0.5):
    """cond[(g, x, y)] -> ObservationalLaw."""
    p = np.zeros((2, 2, 2))
    for (g, x, y), v in cond.items():
        p[y, x, g] = float(v) * (pg if g else 1 - pg)
    return sc.ObservationalLaw(p)


UNIFORM = sc.ObservationalLaw(np.full((2, 2, 2), 0.125))


def perfect_compliance():
    p = np.zeros((2, 2, 2))
    p[0, 0, 0] = p[1, 1, 1] = 0.5
    return sc.ObservationalLaw(p)


def violating_law():
    cond = {k: 0.0 for k in itertools.product((0, 1), repeat=3)}
    cond[0, 1, 1] = 0.8  # P(Y=1, X=1 | G=0)
    cond[0, 0, 0] = 0.2
    cond[1, 1, 0] = 0.8  # P(Y=0, X=1 | G=1)
    cond[1, 0, 0] = 0.2
    return law_from_cond(cond)


def _q_law(q, pg=0.5):
    """Observed law induced by a type distribution, using the oracle's own matrix."""
    labels, rows, _ = type_matrix()
    cond = dict(zip(labels, np.array(rows, dtype=float) @ q))
    return law_from_cond(cond, pg), cond


# -- construction ------------------------------------------------------------

def test_uniform_polytope_contains_uniform_types():
    poly = bd.build_polytope(UNIFORM)
    q = np.full(16, 1 / 16)
    np.testing.assert_allclose(poly.A @ q, poly.b, atol=1e-15)
    assert poly.dimension == 16


def test_constraint_rows_are_indicator_sums():
    assert set(np.unique(bd.OBS_MATRIX)) == {0.0, 1.0}
    for g in (0, 1):
        # for each g, the four (y, x) rows partition the types
        np.testing.assert_array_equal(bd.OBS_MATRIX[4 * g:4 * g + 4].sum(axis=0), np.ones(16))


def test_perfect_compliance_is_a_single_vertex():
    v = bd.enumerate_vertices(bd.build_polytope(perfect_compliance()))
    assert len(v) == 1
    types = [(bd.RESPONSE[i], bd.RESPONSE[j]) for i, j in bd.TYPES]
    (k,) = np.flatnonzero(v[0] > 0)
    assert types[k] == ((0, 1), (0, 1))  # complier whose outcome equals exposure
    assert v[0, k] == pytest.approx(1.0)


def test_violating_law_is_incompatible():
    law = violating_law()
    with pytest.raises(IncompatibleLaw):
        bd.build_polytope(law)
    report = bd.instrumental_inequality(law)
    assert not report.satisfied
    assert report.worst_slack >= 0.6 - 1e-12


def test_inequality_on_uniform_law():
    report = bd.instrumental_inequality(UNIFORM)
    assert report.satisfied
    assert report.worst_slack == pytest.approx(-0.5, abs=1e-15)


def test_uniform_vertices_match_exact_enumeration():
    exact = exact_vertices({k: Fraction(1, 4) for k in itertools.product((0, 1), repeat=3)})
    got = bd.enumerate_vertices(bd.build_polytope(UNIFORM))
    assert len(got) == len(exact) == 36
    _assert_same_vertex_set(got, exact)


def test_t1_vertices_match_exact_enumeration():
    cells = t1_cells()
    cond = {(g, x, y): cells[y, x, g] / Fraction(1, 2) for g, x, y in itertools.product((0, 1), repeat=3)}
    exact = exact_vertices(cond)
    got = bd.enumerate_vertices(bd.build_polytope(law_from_cond(cond)))
    assert len(got) == len(exact)
    _assert_same_vertex_set(got, exact)


def _assert_same_vertex_set(got, exact):
    # the oracle orders types as (exposure function, outcome function) with the
    # same lexicographic convention, so columns line up one to one
    exact = np.array([[float(v) for v in q] for q in exact])
    key = lambda a: sorted(map(tuple, np.round(a, 9)))
    assert key(got) == key(exact)


def test_vertices_satisfy_constraints():
    s = sc.calibrate(sc.CalibrationSpec(target_crr=3.03, alpha3=2, alpha4=-1, beta4=1))
    poly = bd.build_polytope(sc.observational_law(s))
    v = bd.enumerate_vertices(poly)
    assert np.max(np.abs(v @ poly.A.T - poly.b)) < 1e-10
    assert v.min() >= 0.0


# -- bounds ------------------------------------------------------------------

def test_perfect_compliance_point_identifies():
    b = bd.bound_all(perfect_compliance())
    assert (b["ace"].lower, b["ace"].upper) == (1.0, 1.0)
    assert (b["ey_do1"].lower, b["ey_do1"].upper) == (1.0, 1.0)
    assert (b["ey_do0"].lower, b["ey_do0"].upper) == (0.0, 0.0)
    assert b["crr"].lower == math.inf and b["crr"].unbounded


def test_unknown_quantity():
    with pytest.raises(ValueError):
        bd.bound(UNIFORM, "lcrr")


def test_crr_upper_infinite_when_denominator_can_vanish():
    # Y=1 is never seen with X=0, so E(Y | do(X=0)) can be zero
    cond = {k: 0.0 for k in itertools.product((0, 1), repeat=3)}
    for g in (0, 1):
        cond[g, 0, 0] = cond[g, 1, 1] = 0.5
    b = bd.bound(law_from_cond(cond), "crr")
    assert b.unbounded and b.lower == pytest.approx(lp_bounds(cond)["crr"][0])
    assert b.to_dict()["upper"] == "inf"
    assert bd.bound(UNIFORM, "crr").upper == pytest.approx(3.0)


law_weights = st.lists(st.floats(0.001, 1.0), min_size=16, max_size=16)


@given(law_weights, st.floats(0.1, 0.9))
@settings(max_examples=150, deadline=None)
def test_bounds_match_lp_oracle(w, pg):
    q = np.array(w) / np.sum(w)
    law, cond = _q_law(q, pg)
    ours = bd.bound_all(law)
    ref = lp_bounds(cond)
    for name in ("ey_do0", "ey_do1", "ace"):
        assert ours[name].lower == pytest.approx(ref[name][0], abs=1e-8)
        assert ours[name].upper == pytest.approx(ref[name][1], abs=1e-8)
    lo, hi = ref["crr"]
    assert ours["crr"].lower == pytest.approx(lo, rel=1e-7, abs=1e-8)
    if math.isinf(hi):
        assert ours["crr"].unbounded
    else:
        assert ours["crr"].upper == pytest.approx(hi, rel=1e-7)
    # soundness for the generating type distribution
    do0 = float(q @ bd.DO0)
    do1 = float(q @ bd.DO1)
    assert ours["ey_do0"].contains(do0) and ours["ey_do1"].contains(do1)
    assert ours["ace"].contains(do1 - do0)
    assert ours["crr"].contains(do1 / do0, tol=1e-9 * max(1.0, do1 / do0))


@given(law_weights)
@settings(max_examples=100, deadline=None)
def test_interval_invariants(w):
    law, _ = _q_law(np.array(w) / np.sum(w))
    b = bd.bound_all(law)
    for name in ("ey_do0", "ey_do1"):
        assert 0.0 <= b[name].lower <= b[name].upper <= 1.0
        assert b[name].width <= 1.0
    assert -1.0 <= b["ace"].lower <= b["ace"].upper <= 1.0
    assert b["crr"].lower <= b["crr"].upper


# -- instrumental inequality -------------------------------------------------

def test_inequality_agrees_with_feasibility_on_random_laws():
    rng = np.random.default_rng(2024)
    disagreements = []
    violated = 0
    for i in range(10_000):
        # sparse Dirichlet draws put mass near the faces, where violations live
        c = rng.dirichlet(np.full(4, 0.3), size=2)
        cond = {(g, x, y): float(c[g, 2 * x + y]) for g, x, y in itertools.product((0, 1), repeat=3)}
        law = law_from_cond(cond, pg=float(rng.uniform(0.1, 0.9)))
        report = bd.instrumental_inequality(law)
        assert report.worst_slack == pytest.approx(inequality_slack(cond), abs=1e-12)
        try:
            bd.build_polytope(law)
            feasible = True
        except IncompatibleLaw:
            feasible = False
        violated += not report.satisfied
        if feasible != report.satisfied:
            disagreements.append((i, report.worst_slack))
    assert violated > 1000  # the test exercises both branches
    assert disagreements == []


def test_scenario_laws_satisfy_inequality():
    rng = np.random.default_rng(7)
    for _ in range(300):
        coef = rng.uniform(-4, 4, size=8)
        s = sc.Scenario(*coef, pg=float(rng.uniform(0.05, 0.95)))
        assert bd.instrumental_inequality(sc.observational_law(s)).satisfied


# -- vertex optimality -------------------------------------------------------

def test_interior_points_never_beat_vertices():
    """Hit-and-run samples from 1000 polytopes stay within the vertex extremes."""
    rng = np.random.default_rng(11)
    labels, rows, _ = type_matrix()
    A = np.vstack([np.array(rows, dtype=float), np.ones(16)])
    N = null_space(A)  # directions that keep every constraint
    n_laws, chains, steps = 1000, 50, 2000  # 10^5 points per polytope
    q0 = rng.dirichlet(np.ones(16), size=n_laws)
    lo = {k: np.empty(n_laws) for k in ("ey_do0", "ey_do1", "ace", "crr")}
    hi = {k: np.empty(n_laws) for k in lo}
    for i in range(n_laws):
        law, _ = _q_law(q0[i])
        b = bd.bound_all(law)
        for k in lo:
            lo[k][i], hi[k][i] = b[k].lower, b[k].upper
    q = np.repeat(q0[:, None, :], chains, axis=1)
    seen_lo = {k: np.full(n_laws, np.inf) for k in lo}
    seen_hi = {k: np.full(n_laws, -np.inf) for k in lo}
    do0, do1 = bd.DO0, bd.DO1
    for _ in range(steps):
        d = rng.standard_normal((n_laws, chains, N.shape[1])) @ N.T
        with np.errstate(divide="ignore", invalid="ignore"):
            t = -q / d
        tmax = np.where(d < 0, t, np.inf).min(axis=2)
        tmin = np.where(d > 0, t, -np.inf).max(axis=2)
        step = rng.uniform(tmin, tmax)
        q = np.clip(q + step[..., None] * d, 0.0, None)
        e0, e1 = q @ do0, q @ do1
        vals = {"ey_do0": e0, "ey_do1": e1, "ace": e1 - e0,
                "crr": np.where(e0 > 1e-12, e1 / np.maximum(e0, 1e-300), np.nan)}
        for k, v in vals.items():
            seen_lo[k] = np.fmin(seen_lo[k], np.nanmin(v, axis=1))
            seen_hi[k] = np.fmax(seen_hi[k], np.nanmax(v, axis=1))
    for k in lo:
        slack = 1e-9 * np.maximum(1.0, np.abs(hi[k]))
        assert np.all(seen_lo[k] >= lo[k] - 1e-9), k
        finite = np.isfinite(hi[k])
        assert np.all(seen_hi[k][finite] <= hi[k][finite] + slack[finite]), k


# -- bound width and instrument strength --------------------------------------

def test_bounds_narrow_as_instrument_strengthens():
    widths = []
    for rr in (1.5, 2.4, 5.0, 20.0):
        s = sc.calibrate(sc.CalibrationSpec(target_crr=1.33, alpha3=1, target_rr_xg=rr))
        b = bd.bound_all(sc.observational_law(s))
        widths.append([b[k].width for k in ("ey_do0", "ey_do1", "ace")])
    widths = np.array(widths)
    assert np.all(np.diff(widths, axis=0) < 0)
