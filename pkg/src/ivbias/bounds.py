"""Nonparametric bounds for binary (G, X, Y) via the response-type polytope.

Each unit has an exposure type ``(x(0), x(1))`` giving its exposure under
each instrument value, and an outcome type ``(y(0), y(1))`` giving its
outcome under each exposure.  A distribution ``q`` over the 16 joint types
reproduces the observed law iff ``P(y, x | g) = sum of q over types with
x(g) = x and y(x) = y``.  Interventional means are linear in ``q``, so their
extremes over the feasible polytope are attained at its vertices; so is the
extreme of the causal relative risk, being a ratio of two linear functionals
with a positive denominator.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IncompatibleLaw, UndefinedEstimand
from .scenario import ObservationalLaw

FEASIBILITY_TOL = 1e-10
PIVOT_TOL = 1e-12
INEQUALITY_TOL = 1e-10

RESPONSE = ((0, 0), (0, 1), (1, 0), (1, 1))
TYPES = tuple(itertools.product(range(4), range(4)))  # (exposure type, outcome type)
QUANTITIES = ("ey_do0", "ey_do1", "ace", "crr")


def _constraint_rows() -> np.ndarray:
    rows = []
    for g in (0, 1):
        for y in (0, 1):
            for x in (0, 1):
                rows.append([float(RESPONSE[i][g] == x and RESPONSE[j][x] == y) for i, j in TYPES])
    return np.array(rows)


OBS_MATRIX = _constraint_rows()
DO0 = np.array([float(RESPONSE[j][0]) for _, j in TYPES])
DO1 = np.array([float(RESPONSE[j][1]) for _, j in TYPES])


@functools.lru_cache(maxsize=1)
def _reduced_system():
    """Independent rows of [observational rows; simplex row] and basis inverses."""
    full = np.vstack([OBS_MATRIX, np.ones(16)])
    keep = []
    for r in range(full.shape[0]):
        trial = full[keep + [r]]
        if np.linalg.matrix_rank(trial, tol=PIVOT_TOL) > len(keep):
            keep.append(r)
    dropped = [r for r in range(full.shape[0]) if r not in keep]
    kept = full[keep]
    # Dropped rows as combinations of kept rows, for the consistency check on b.
    combo = np.linalg.lstsq(kept.T, full[dropped].T, rcond=None)[0].T
    rank = len(keep)
    bases, inverses = [], []
    for cols in itertools.combinations(range(16), rank):
        B = kept[:, cols]
        if abs(np.linalg.det(B)) > 0.5:  # integer matrix; singular iff det == 0
            bases.append(cols)
            inverses.append(np.linalg.inv(B))
    return full, np.array(keep), np.array(dropped), combo, np.array(bases), np.array(inverses)


@dataclass
class ResponsePolytope:
    """Feasible set ``{q >= 0 : A q = b}`` of response-type distributions.

    ``A`` stacks the eight observational rows (ordered by g, y, x) and the
    simplex row; ``b`` holds ``P(y, x | g)`` and 1.
    """

    A: np.ndarray
    b: np.ndarray
    vertices: np.ndarray = field(repr=False)

    @property
    def dimension(self) -> int:
        return self.A.shape[1]


def _basic_solutions(b_full: np.ndarray) -> np.ndarray:
    full, keep, dropped, combo, bases, inverses = _reduced_system()
    if np.max(np.abs(combo @ b_full[keep] - b_full[dropped]), initial=0.0) > FEASIBILITY_TOL:
        return np.empty((0, 16))
    xb = inverses @ b_full[keep]
    ok = np.all(xb >= -FEASIBILITY_TOL, axis=1)
    if not ok.any():
        return np.empty((0, 16))
    sol = np.zeros((int(ok.sum()), 16))
    rows = np.arange(sol.shape[0])[:, None]
    sol[rows, bases[ok]] = np.clip(xb[ok], 0.0, None)
    # Deduplicate degenerate vertices reached from several bases.
    _, idx = np.unique(np.round(sol / FEASIBILITY_TOL).astype(np.int64), axis=0, return_index=True)
    sol = sol[np.sort(idx)]
    resid = np.max(np.abs(sol @ full.T - b_full), axis=1)
    return sol[resid < FEASIBILITY_TOL]


def build_polytope(law: ObservationalLaw) -> ResponsePolytope:
    """Response-type polytope of ``law``; raises IncompatibleLaw when empty."""
    cond = law.conditional()
    b_obs = np.array([cond[y, x, g] for g in (0, 1) for y in (0, 1) for x in (0, 1)])
    A = np.vstack([OBS_MATRIX, np.ones(16)])
    b = np.append(b_obs, 1.0)
    vertices = _basic_solutions(b)
    if len(vertices) == 0:
        raise IncompatibleLaw("no response-type distribution reproduces the observed law")
    return ResponsePolytope(A=A, b=b, vertices=vertices)


def enumerate_vertices(p: ResponsePolytope) -> np.ndarray:
    """All vertices (basic feasible solutions) of the polytope, one per row."""
    return p.vertices


@dataclass(frozen=True)
class BoundInterval:
    lower: float
    upper: float
    quantity: str

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.upper)

    def contains(self, value: float, tol: float = 1e-9) -> bool:
        return self.lower - tol <= value <= self.upper + tol

    def to_dict(self) -> dict:
        def enc(v):
            return "inf" if math.isinf(v) else v
        return {"quantity": self.quantity, "lower": enc(self.lower), "upper": enc(self.upper)}


def _interval(vertices: np.ndarray, quantity: str) -> BoundInterval:
    if quantity == "crr":
        num = vertices @ DO1
        den = vertices @ DO0
        pos = den > FEASIBILITY_TOL
        # 0/0 vertices are skipped: along any edge into them the ratio is constant.
        upper = math.inf if np.any(~pos & (num > FEASIBILITY_TOL)) else None
        ratio = num[pos] / den[pos]
        if ratio.size == 0:
            # E(Y|do(X=0)) vanishes on the whole polytope
            if upper is None:
                raise UndefinedEstimand("both interventional means are zero on the polytope")
            return BoundInterval(math.inf, math.inf, quantity)
        lo = float(ratio.min())
        hi = upper if upper is not None else float(ratio.max())
        return BoundInterval(lo, hi, quantity)
    c = {"ey_do0": DO0, "ey_do1": DO1, "ace": DO1 - DO0}[quantity]
    v = vertices @ c
    return BoundInterval(float(v.min()), float(v.max()), quantity)


def bound(law: ObservationalLaw, quantity: str) -> BoundInterval:
    """Tight assumption-free interval for ``quantity`` in ey_do0, ey_do1, ace, crr."""
    if quantity not in QUANTITIES:
        raise ValueError(f"unknown quantity {quantity!r}; choose from {QUANTITIES}")
    return _interval(build_polytope(law).vertices, quantity)


def bound_all(law: ObservationalLaw) -> dict[str, BoundInterval]:
    """Intervals for every quantity; an undefined CRR interval is (nan, nan)."""
    vertices = build_polytope(law).vertices
    out = {}
    for q in QUANTITIES:
        try:
            out[q] = _interval(vertices, q)
        except UndefinedEstimand:
            out[q] = BoundInterval(math.nan, math.nan, q)
    return out


@dataclass(frozen=True)
class InequalityReport:
    satisfied: bool
    worst_slack: float

    def to_dict(self) -> dict:
        return {"satisfied": self.satisfied, "worst_slack": self.worst_slack}


def instrumental_inequality(law: ObservationalLaw) -> InequalityReport:
    """Check max over x of sum_y max_g P(y, x | g) <= 1."""
    cond = law.conditional()
    slack = float(np.max(cond.max(axis=2).sum(axis=0))) - 1.0
    return InequalityReport(satisfied=slack <= INEQUALITY_TOL, worst_slack=slack)
