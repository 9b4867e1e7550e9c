"""Logistic data-generating model for binary (G, X, Y) with a uniform latent confounder U.

Outcome and exposure follow

    logit P(Y=1 | X=x, U=u) = alpha1 + alpha2*x + alpha3*u + alpha4*x*u
    logit P(X=1 | G=g, U=u) = beta1 + beta2*g + beta3*u + beta4*g*u

with G ~ Bernoulli(pg) independent of U ~ Uniform[0, 1].  The outcome model is
assumed invariant under intervention on X, so interventional means are obtained
by integrating the outcome model over the marginal law of U.
"""

from __future__ import annotations

import dataclasses
import functools
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit

from .errors import CalibrationInfeasible, DegenerateLaw, UndefinedEstimand

DEFAULT_NODES = 64
COEF_BRACKET = (-20.0, 20.0)
CALIBRATION_TOL = 1e-9


@functools.lru_cache(maxsize=32)
def _gauss_legendre(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(nodes)
    u = 0.5 * (x + 1.0)
    w = 0.5 * w
    u.setflags(write=False)
    w.setflags(write=False)
    return u, w


def integrate_u(f: Callable[[np.ndarray], np.ndarray], nodes: int = DEFAULT_NODES) -> float:
    """Integrate ``f`` over [0, 1] with a ``nodes``-point Gauss-Legendre rule.

    ``f`` is called once with the array of nodes and must be vectorised.
    The rule is exact for polynomials of degree up to ``2*nodes - 1``.
    """
    if nodes < 1:
        raise ValueError("nodes must be a positive integer")
    u, w = _gauss_legendre(int(nodes))
    values = np.broadcast_to(np.asarray(f(u), dtype=float), u.shape)
    return float(w @ values)


@dataclass(frozen=True)
class Scenario:
    """Coefficients of the logistic model plus the instrument frequency.

    ``atoms=None`` selects the continuous uniform confounder on [0, 1],
    integrated with ``nodes``-point Gauss-Legendre quadrature.  An integer
    ``atoms=K`` replaces it by the discrete uniform law on the midpoints
    ``(k + 1/2)/K``, which allows exact finite summation in tests.
    """

    alpha1: float = 0.0
    alpha2: float = 0.0
    alpha3: float = 0.0
    alpha4: float = 0.0
    beta1: float = 0.0
    beta2: float = 0.0
    beta3: float = 0.0
    beta4: float = 0.0
    pg: float = 0.5
    atoms: Optional[int] = None
    nodes: int = DEFAULT_NODES

    def __post_init__(self):
        if not 0.0 < self.pg < 1.0:
            raise ValueError(f"pg must lie strictly inside (0, 1), got {self.pg}")
        if self.atoms is not None and self.atoms < 1:
            raise ValueError("a discrete-uniform confounder needs at least one atom")
        if self.nodes < 1:
            raise ValueError("nodes must be a positive integer")

    @property
    def alphas(self) -> tuple[float, float, float, float]:
        return (self.alpha1, self.alpha2, self.alpha3, self.alpha4)

    @property
    def betas(self) -> tuple[float, float, float, float]:
        return (self.beta1, self.beta2, self.beta3, self.beta4)

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    def confounder_grid(self) -> tuple[np.ndarray, np.ndarray]:
        """Support points and probability weights representing the law of U."""
        if self.atoms is None:
            return _gauss_legendre(self.nodes)
        k = self.atoms
        u = (np.arange(k) + 0.5) / k
        return u, np.full(k, 1.0 / k)

    def to_dict(self) -> dict:
        d = {name: float(getattr(self, name)) for name in
             ("alpha1", "alpha2", "alpha3", "alpha4", "beta1", "beta2", "beta3", "beta4", "pg")}
        if self.atoms is None:
            d["confounder"] = {"kind": "uniform", "nodes": self.nodes}
        else:
            d["confounder"] = {"kind": "discrete", "atoms": self.atoms}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        kwargs = {k: float(d[k]) for k in
                  ("alpha1", "alpha2", "alpha3", "alpha4", "beta1", "beta2", "beta3", "beta4", "pg")
                  if k in d}
        conf = d.get("confounder") or {}
        if conf.get("kind", "uniform") == "discrete":
            kwargs["atoms"] = int(conf["atoms"])
        elif "nodes" in conf:
            kwargs["nodes"] = int(conf["nodes"])
        return cls(**kwargs)


def outcome_mean(s: Scenario, x, u):
    """P(Y=1 | X=x, U=u), identical to P(Y=1 | do(X=x), U=u)."""
    a1, a2, a3, a4 = s.alphas
    return expit(a1 + a2 * x + a3 * u + a4 * np.multiply(x, u))


def exposure_prob(s: Scenario, g, u):
    """P(X=1 | G=g, U=u)."""
    b1, b2, b3, b4 = s.betas
    return expit(b1 + b2 * g + b3 * u + b4 * np.multiply(g, u))


class ObservationalLaw:
    """Joint law of binary (Y, X, G), stored as ``p[y, x, g]``."""

    __slots__ = ("p",)

    def __init__(self, p):
        p = np.array(p, dtype=float).reshape(2, 2, 2)
        if np.any(p < -1e-15) or np.any(p > 1 + 1e-15):
            raise ValueError("law entries must lie in [0, 1]")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"law entries must sum to 1, got {p.sum()!r}")
        p = np.clip(p, 0.0, 1.0)
        if np.any(p.sum(axis=(0, 1)) <= 0.0):
            raise DegenerateLaw("both instrument values need positive probability")
        p.setflags(write=False)
        self.p = p

    @classmethod
    def from_conditionals(cls, cond, pg: float = 0.5) -> "ObservationalLaw":
        """Build from ``cond[g][y][x] = P(Y=y, X=x | G=g)``."""
        cond = np.asarray(cond, dtype=float).reshape(2, 2, 2)
        pgv = np.array([1.0 - pg, pg])
        return cls(np.transpose(cond, (1, 2, 0)) * pgv)

    @property
    def pg1(self) -> float:
        return float(self.p[:, :, 1].sum())

    def conditional(self) -> np.ndarray:
        """``c[y, x, g] = P(Y=y, X=x | G=g)``."""
        return self.p / self.p.sum(axis=(0, 1))

    def to_dict(self) -> dict:
        return {"p": self.p.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ObservationalLaw":
        if "p" in d:
            return cls(d["p"])
        if "conditional" in d:
            return cls.from_conditionals(d["conditional"], d.get("pg", 0.5))
        raise ValueError("law JSON needs a 'p' (indexed [y][x][g]) or 'conditional' entry")

    def __repr__(self):
        return f"ObservationalLaw({self.p.tolist()!r})"


def observational_law(s: Scenario) -> ObservationalLaw:
    """Marginalise U out of p(y|x,u) p(x|g,u) p(u) p(g)."""
    u, w = s.confounder_grid()
    p = np.empty((2, 2, 2))
    for g in (0, 1):
        px1 = exposure_prob(s, g, u)
        pgv = s.pg if g else 1.0 - s.pg
        for x in (0, 1):
            px = px1 if x else 1.0 - px1
            py1 = outcome_mean(s, x, u)
            p[1, x, g] = pgv * (w @ (px * py1))
            p[0, x, g] = pgv * (w @ (px * (1.0 - py1)))
    return ObservationalLaw(p)


@dataclass(frozen=True)
class CausalTargets:
    ey_do0: float
    ey_do1: float
    crr: float
    ace: float
    cor: float
    lcrr: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _interventional_means(s: Scenario) -> tuple[float, float]:
    u, w = s.confounder_grid()
    return float(w @ outcome_mean(s, 0, u)), float(w @ outcome_mean(s, 1, u))


def causal_relative_risk(s: Scenario) -> float:
    ey0, ey1 = _interventional_means(s)
    if ey0 <= 0.0:
        raise UndefinedEstimand("E(Y | do(X=0)) is zero; CRR undefined")
    return ey1 / ey0


def causal_targets(s: Scenario) -> CausalTargets:
    u, w = s.confounder_grid()
    q0 = outcome_mean(s, 0, u)
    q1 = outcome_mean(s, 1, u)
    ey0, ey1 = float(w @ q0), float(w @ q1)
    if ey0 <= 0.0:
        raise UndefinedEstimand("E(Y | do(X=0)) is zero; CRR undefined")
    # P(X=1 | U=u) with G marginalised; p(u | X=1) is proportional to it.
    px1_u = s.pg * exposure_prob(s, 1, u) + (1.0 - s.pg) * exposure_prob(s, 0, u)
    px1 = float(w @ px1_u)
    ey_x1 = float(w @ (px1_u * q1)) / px1
    ey0_x1 = float(w @ (px1_u * q0)) / px1
    if ey1 >= 1.0:
        cor = math.inf
    else:
        cor = ey1 * (1.0 - ey0) / ((1.0 - ey1) * ey0)
    return CausalTargets(
        ey_do0=ey0,
        ey_do1=ey1,
        crr=ey1 / ey0,
        ace=ey1 - ey0,
        cor=cor,
        lcrr=ey_x1 / ey0_x1,
    )


# -- calibration ------------------------------------------------------------


@dataclass(frozen=True)
class CalibrationSpec:
    """Marginal targets and fixed coefficients from which a Scenario is solved.

    ``target_rr_xg`` is the U-marginal ratio P(X=1|G=1)/P(X=1|G=0).
    """

    target_crr: float
    alpha3: float = 0.0
    alpha4: float = 0.0
    beta3: float = 2.0
    beta4: float = 0.0
    target_px1: float = 0.13
    target_rr_xg: float = 2.4
    target_py1: float = 0.03
    pg: float = 0.5
    atoms: Optional[int] = None
    nodes: int = DEFAULT_NODES

    def __post_init__(self):
        for name in ("target_px1", "target_py1", "pg"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        for name in ("target_rr_xg", "target_crr"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")

    def base_scenario(self) -> Scenario:
        return Scenario(alpha3=self.alpha3, alpha4=self.alpha4, beta3=self.beta3,
                        beta4=self.beta4, pg=self.pg, atoms=self.atoms, nodes=self.nodes)

    def to_dict(self) -> dict:
        d = {
            "targets": {"px1": self.target_px1, "rr_xg": self.target_rr_xg,
                        "py1": self.target_py1, "crr": self.target_crr},
            "alpha3": self.alpha3, "alpha4": self.alpha4,
            "beta3": self.beta3, "beta4": self.beta4, "pg": self.pg,
        }
        if self.atoms is None:
            d["confounder"] = {"kind": "uniform", "nodes": self.nodes}
        else:
            d["confounder"] = {"kind": "discrete", "atoms": self.atoms}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CalibrationSpec":
        t = d.get("targets", {})
        kwargs = dict(target_crr=float(t["crr"]))
        for key, name in (("px1", "target_px1"), ("rr_xg", "target_rr_xg"), ("py1", "target_py1")):
            if key in t:
                kwargs[name] = float(t[key])
        for name in ("alpha3", "alpha4", "beta3", "beta4", "pg"):
            if name in d:
                kwargs[name] = float(d[name])
        conf = d.get("confounder") or {}
        if conf.get("kind", "uniform") == "discrete":
            kwargs["atoms"] = int(conf["atoms"])
        elif "nodes" in conf:
            kwargs["nodes"] = int(conf["nodes"])
        return cls(**kwargs)


def _root(f, lo, hi, what):
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise CalibrationInfeasible(f"no sign change for {what} in [{lo}, {hi}]")
    return brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def _scanned_root(f, lo, hi, what, steps=80):
    """Root of ``f`` on [lo, hi] where ``f`` may be infeasible near the ends.

    Scans outward from the midpoint, skipping points where ``f`` raises
    CalibrationInfeasible, and polishes the first sign change with Brent.
    """
    grid = np.linspace(lo, hi, steps + 1)
    mid = steps // 2
    order = [mid]
    for k in range(1, mid + 1):
        order += [mid - k, mid + k]
    vals = {}
    for i in order:
        if i < 0 or i > steps:
            continue
        try:
            vals[i] = f(grid[i])
        except CalibrationInfeasible:
            continue
        if vals[i] == 0.0:
            return float(grid[i])
        for j in (i - 1, i + 1):
            if j in vals and np.sign(vals[j]) != np.sign(vals[i]):
                a, b = sorted((grid[i], grid[j]))
                return brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    raise CalibrationInfeasible(f"no attainable sign change for {what} in [{lo}, {hi}]")


def _exposure_margins(s: Scenario, b1: float, b2: float) -> tuple[float, float]:
    u, w = s.confounder_grid()
    t = s.replace(beta1=b1, beta2=b2)
    return float(w @ exposure_prob(t, 0, u)), float(w @ exposure_prob(t, 1, u))


def calibrate_exposure(spec: CalibrationSpec) -> tuple[float, float]:
    """Solve (beta1, beta2) for the targeted P(X=1) and G-X relative risk."""
    base = spec.base_scenario()
    lo, hi = COEF_BRACKET

    def solve_beta1(b2):
        def marginal(b1):
            p0, p1 = _exposure_margins(base, b1, b2)
            return spec.pg * p1 + (1.0 - spec.pg) * p0 - spec.target_px1
        return _root(marginal, lo, hi, "beta1")

    def rr_residual(b2):
        b1 = solve_beta1(b2)
        p0, p1 = _exposure_margins(base, b1, b2)
        if p0 <= 0.0:
            raise CalibrationInfeasible("P(X=1 | G=0) underflows")
        return p1 / p0 - spec.target_rr_xg

    b2 = _scanned_root(rr_residual, lo, hi, "beta2")
    return solve_beta1(b2), b2


def calibrate_outcome(spec: CalibrationSpec, s_exposure: Scenario) -> tuple[float, float]:
    """Solve (alpha1, alpha2) for the targeted CRR and P(Y=1).

    CRR depends on both alpha1 and alpha2, so alpha2 is solved on the CRR
    for each trial alpha1 and alpha1 on the outcome prevalence outside.
    """
    base = s_exposure.replace(alpha3=spec.alpha3, alpha4=spec.alpha4)
    lo, hi = COEF_BRACKET

    def solve_alpha2(a1):
        def crr_residual(a2):
            return causal_relative_risk(base.replace(alpha1=a1, alpha2=a2)) - spec.target_crr
        return _root(crr_residual, lo, hi, "alpha2")

    def prevalence_residual(a1):
        a2 = solve_alpha2(a1)
        law = observational_law(base.replace(alpha1=a1, alpha2=a2))
        return float(law.p[1].sum()) - spec.target_py1

    a1 = _scanned_root(prevalence_residual, lo, hi, "alpha1")
    return a1, solve_alpha2(a1)


def calibrate(spec: CalibrationSpec) -> Scenario:
    """Exposure side first (the outcome prevalence depends on it), then outcome side."""
    b1, b2 = calibrate_exposure(spec)
    s = spec.base_scenario().replace(beta1=b1, beta2=b2)
    a1, a2 = calibrate_outcome(spec, s)
    s = s.replace(alpha1=a1, alpha2=a2)
    _check_calibration(spec, s)
    return s


def _check_calibration(spec: CalibrationSpec, s: Scenario) -> None:
    law = observational_law(s)
    p0, p1 = _exposure_margins(s, s.beta1, s.beta2)
    residuals = {
        "P(X=1)": law.p[:, 1].sum() - spec.target_px1,
        "RR(X|G)": p1 / p0 - spec.target_rr_xg,
        "P(Y=1)": law.p[1].sum() - spec.target_py1,
        "CRR": causal_relative_risk(s) - spec.target_crr,
    }
    bad = {k: v for k, v in residuals.items() if not abs(v) < CALIBRATION_TOL}
    if bad:
        raise CalibrationInfeasible(f"calibration residuals too large: {bad}")


def simulate(s: Scenario, n: int, seed: int):
    """Draw ``n`` i.i.d. records by ancestral sampling G -> U -> X -> Y."""
    from .empirical import Dataset

    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    g = (rng.random(n) < s.pg).astype(np.int8)
    if s.atoms is None:
        u = rng.random(n)
    else:
        u = (rng.integers(0, s.atoms, n) + 0.5) / s.atoms
    x = (rng.random(n) < exposure_prob(s, g, u)).astype(np.int8)
    y = (rng.random(n) < outcome_mean(s, x, u)).astype(np.int8)
    return Dataset(g=g, x=x, y=y)
