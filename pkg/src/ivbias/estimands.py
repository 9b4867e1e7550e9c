"""IV estimands as exact functionals of (Y, X, G) moments.

Every estimand consumes :class:`JointMoments`, so the same code serves exact
observational laws and empirical plug-in moments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import DegenerateLaw, DegenerateSample, IVBiasError, UndefinedEstimand, WeakInstrument
from .scenario import ObservationalLaw

WEAK_INSTRUMENT_FLOOR = 1e-10
INTERCEPT_FLOOR = 1e-12  # smaller alpha or 1 - alpha - beta is rounding residue of a zero


@dataclass(frozen=True)
class JointMoments:
    """Conditional means and covariances of (Y, X, G).

    ``ey_x`` is ``None`` when X is not binary.  For empirical moments an
    individual entry may be ``None`` when its conditioning cell is empty.
    ``var_g`` is the (population-normalised) variance of G.
    """

    ey_g: tuple[float, float]
    ex_g: tuple[float, float]
    eyx_g: tuple[float, float]
    ey_x: Optional[tuple[Optional[float], Optional[float]]]
    px1: float
    py1: float
    pg1: float
    cov_yg: float
    cov_xg: float
    var_g: float
    x_binary: bool = True

    @property
    def delta(self) -> float:
        """Coefficient of G in the linear regression of X on G."""
        return self.cov_xg / self.var_g


def moments(law: ObservationalLaw) -> JointMoments:
    p = law.p
    pg = p.sum(axis=(0, 1))
    px = p.sum(axis=(0, 2))
    if not (pg > 0).all():
        raise DegenerateLaw("P(G=g) is zero for some g")
    if not (px > 0).all():
        raise DegenerateLaw("P(X=x) is zero for some x")
    ey_g = tuple(float(p[1, :, g].sum() / pg[g]) for g in (0, 1))
    ex_g = tuple(float(p[:, 1, g].sum() / pg[g]) for g in (0, 1))
    eyx_g = tuple(float(p[1, 1, g] / pg[g]) for g in (0, 1))
    ey_x = tuple(float(p[1, x, :].sum() / px[x]) for x in (0, 1))
    pg1 = float(pg[1])
    py1 = float(p[1].sum())
    px1 = float(px[1])
    var_g = pg1 * (1.0 - pg1)
    return JointMoments(
        ey_g=ey_g,
        ex_g=ex_g,
        eyx_g=eyx_g,
        ey_x=ey_x,
        px1=px1,
        py1=py1,
        pg1=pg1,
        cov_yg=float(p[1, :, 1].sum()) - py1 * pg1,
        cov_xg=float(p[:, 1, 1].sum()) - px1 * pg1,
        var_g=var_g,
    )


def nrr(m: JointMoments) -> float:
    """Naive relative risk P(Y=1|X=1) / P(Y=1|X=0)."""
    if m.ey_x is None:
        raise UndefinedEstimand("naive relative risk needs a binary exposure")
    e0, e1 = m.ey_x
    if e0 is None or e1 is None:
        raise DegenerateSample("an exposure cell of the sample is empty")
    if e0 <= 0.0:
        raise UndefinedEstimand("P(Y=1 | X=0) is zero")
    return e1 / e0


def livae(m: JointMoments) -> float:
    """Linear IV average effect Cov(Y,G)/Cov(X,G)."""
    if abs(m.cov_xg) < WEAK_INSTRUMENT_FLOOR:
        raise WeakInstrument(f"|Cov(X,G)| = {abs(m.cov_xg):.3g} below floor")
    return m.cov_yg / m.cov_xg


def livrr_livor(m: JointMoments) -> tuple[float, float, bool]:
    """Risk and odds ratios of the linear IV model.

    The intercept is recovered as E(Y) - beta*E(X).  The returned flag is
    False when the implied probabilities alpha, alpha+beta leave (0, 1);
    the algebraic values are returned regardless.
    """
    beta = livae(m)
    alpha = m.py1 - beta * m.px1
    if abs(alpha) < INTERCEPT_FLOOR:
        raise UndefinedEstimand(f"linear IV intercept |alpha| = {abs(alpha):.3g} is zero")
    rr = (alpha + beta) / alpha
    rest = 1.0 - alpha - beta
    odds = (alpha + beta) * (1.0 - alpha) / (alpha * rest) if abs(rest) >= INTERCEPT_FLOOR else math.inf
    valid = 0.0 < alpha < 1.0 and 0.0 < alpha + beta < 1.0
    return rr, odds, valid


def safe_exp(v: float) -> float:
    """exp that saturates to inf instead of raising OverflowError."""
    try:
        return math.exp(v)
    except OverflowError:
        return math.inf


def _power(base: float, exponent: float) -> float:
    return safe_exp(exponent * math.log(base))


def wald(m: JointMoments) -> tuple[float, float, float]:
    """(delta, WaldRR, WaldOR) with delta the G-coefficient of X on G."""
    delta = m.delta
    if abs(delta) < WEAK_INSTRUMENT_FLOOR:
        raise WeakInstrument(f"|delta| = {abs(delta):.3g} below floor")
    e0, e1 = m.ey_g
    if e0 <= 0.0 or e1 <= 0.0:
        raise UndefinedEstimand("P(Y=1 | G=g) is zero; RR(Y|G) undefined")
    rr = _power(e1 / e0, 1.0 / delta)
    if e0 >= 1.0 or e1 >= 1.0:
        odds = math.nan
    else:
        odds = _power((e1 / (1.0 - e1)) / (e0 / (1.0 - e0)), 1.0 / delta)
    return delta, rr, odds


def msmm(m: JointMoments) -> tuple[float, float]:
    """Closed-form multiplicative SMM for binary X and G: (gamma_L, MSMMRR)."""
    if not m.x_binary:
        raise UndefinedEstimand("closed-form MSMM requires a binary exposure")
    dyx = m.eyx_g[1] - m.eyx_g[0]
    if abs(dyx) < WEAK_INSTRUMENT_FLOOR:
        raise WeakInstrument("E(YX | G) does not vary with G")
    inv = 1.0 - (m.ey_g[1] - m.ey_g[0]) / dyx
    if inv <= 0.0:
        raise UndefinedEstimand(f"exp(-gamma_L) = {inv:.6g} is not positive")
    gamma = -math.log(inv)
    return gamma, 1.0 / inv


def msmm_ace_cor(m: JointMoments, gamma_l: float) -> tuple[float, float, bool]:
    """ACE and COR implied by an MSMM without X-U interaction.

    Returns (ace, cor, valid); ``valid`` is False when an implied
    interventional mean leaves (0, 1).
    """
    if m.ey_x is None:
        raise UndefinedEstimand("MSMM-implied ACE needs a binary exposure")
    if None in m.ey_x:
        raise DegenerateSample("an exposure cell of the sample is empty")
    e0, e1 = m.ey_x
    p1 = m.px1
    p0 = 1.0 - p1
    do0 = safe_exp(-gamma_l) * e1 * p1 + e0 * p0
    do1 = e1 * p1 + safe_exp(gamma_l) * e0 * p0
    ace = do1 - do0
    valid = 0.0 < do0 < 1.0 and 0.0 < do1 < 1.0
    if do0 == 0.0 or do1 == 1.0:
        cor = math.inf
    else:
        cor = do1 * (1.0 - do0) / ((1.0 - do1) * do0)
    return ace, cor, valid


def relative_bias(estimand: float, target: float) -> float:
    if target == 0.0:
        raise UndefinedEstimand("relative bias against a zero target")
    return (estimand - target) / target


ESTIMAND_FIELDS = (
    "nrr", "livae", "livrr", "livor", "wald_delta", "wald_rr", "wald_or",
    "msmm_gamma", "msmm_rr", "msmm_ace", "msmm_cor",
)


@dataclass
class EstimandSet:
    """All point estimands computed from one set of moments.

    Missing values are NaN; ``errors`` names the reason for each, and
    ``valid`` is False for values computed from out-of-range intermediates.
    """

    nrr: float = math.nan
    livae: float = math.nan
    livrr: float = math.nan
    livor: float = math.nan
    wald_delta: float = math.nan
    wald_rr: float = math.nan
    wald_or: float = math.nan
    msmm_gamma: float = math.nan
    msmm_rr: float = math.nan
    msmm_ace: float = math.nan
    msmm_cor: float = math.nan
    valid: dict = field(default_factory=lambda: {k: False for k in ESTIMAND_FIELDS})
    errors: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ESTIMAND_FIELDS}
        d["valid"] = dict(self.valid)
        d["errors"] = dict(self.errors)
        return d


def _attempt(out: EstimandSet, names, fn):
    try:
        result = fn()
    except IVBiasError as exc:
        for name in names:
            out.errors[name] = f"{type(exc).__name__}: {exc}"
        return None
    return result


def estimate(m: JointMoments) -> EstimandSet:
    """Compute every estimand, recording failures per field instead of raising."""
    out = EstimandSet()

    def put(name, value, valid=True):
        setattr(out, name, float(value))
        out.valid[name] = bool(valid) and math.isfinite(value)

    r = _attempt(out, ["nrr"], lambda: nrr(m))
    if r is not None:
        put("nrr", r)
    r = _attempt(out, ["livae"], lambda: livae(m))
    if r is not None:
        put("livae", r)
    r = _attempt(out, ["livrr", "livor"], lambda: livrr_livor(m))
    if r is not None:
        put("livrr", r[0], r[2])
        put("livor", r[1], r[2])
    r = _attempt(out, ["wald_delta", "wald_rr", "wald_or"], lambda: wald(m))
    if r is not None:
        put("wald_delta", r[0])
        put("wald_rr", r[1])
        put("wald_or", r[2])
        if math.isnan(r[2]):
            out.errors["wald_or"] = "UndefinedEstimand: P(Y=1 | G=g) is one"
    r = _attempt(out, ["msmm_gamma", "msmm_rr", "msmm_ace", "msmm_cor"], lambda: msmm(m))
    if r is not None:
        put("msmm_gamma", r[0])
        put("msmm_rr", r[1])
        r2 = _attempt(out, ["msmm_ace", "msmm_cor"], lambda: msmm_ace_cor(m, r[0]))
        if r2 is not None:
            put("msmm_ace", r2[0])
            put("msmm_cor", r2[1], r2[2])
    return out


def estimands_of_law(law: ObservationalLaw) -> EstimandSet:
    return estimate(moments(law))
