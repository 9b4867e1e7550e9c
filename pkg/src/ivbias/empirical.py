"""Sample-based moments, plug-in estimates and SMM estimating equations."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.optimize import brentq

from . import estimands
from .errors import (
    DegenerateSample,
    EmptyData,
    IVBiasError,
    MultipleRoots,
    NoRoot,
    ParseError,
    WeakInstrument,
)
from .estimands import EstimandSet, JointMoments
from .scenario import ObservationalLaw

GAMMA_BRACKET = 10.0
GAMMA_LIMIT = 1e3
EXP_CLAMP = 700.0
SCAN_POINTS = 2001


def _is_binary(a: np.ndarray) -> bool:
    return bool(np.all((a == 0) | (a == 1)))


class Dataset:
    """Immutable i.i.d. sample of (g, x, y)."""

    __slots__ = ("g", "x", "y", "exposure_kind", "outcome_kind")

    def __init__(self, g, x, y):
        g = np.asarray(g)
        x = np.asarray(x)
        y = np.asarray(y)
        if not (g.ndim == x.ndim == y.ndim == 1 and len(g) == len(x) == len(y)):
            raise ValueError("g, x, y must be one-dimensional and of equal length")
        if len(g) == 0:
            raise EmptyData("dataset has no records")
        if not _is_binary(g):
            raise ValueError("g must be 0/1")
        if np.any(y < 0):
            raise ValueError("y must be nonnegative")
        for a in (g, x, y):
            a.setflags(write=False)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "exposure_kind", "binary" if _is_binary(x) else "continuous")
        object.__setattr__(self, "outcome_kind", "binary" if _is_binary(y) else "nonnegative")

    def __setattr__(self, name, value):
        raise AttributeError("Dataset is immutable")

    @property
    def n(self) -> int:
        return len(self.g)

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"Dataset(n={self.n}, exposure={self.exposure_kind}, outcome={self.outcome_kind})"


def _parse_number(text, name, line):
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"{name}={text!r} is not a number", line) from None
    if not math.isfinite(v):
        raise ParseError(f"{name}={text!r} is not finite", line)
    return v


def read_dataset(source: Union[str, os.PathLike, io.TextIOBase]) -> Dataset:
    """Read a CSV with header ``g,x,y`` from a path or an open text stream."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="", encoding="utf-8") as fh:
            return read_dataset(fh)
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None:
        raise EmptyData("input is empty")
    header = [h.strip() for h in header]
    if sorted(header) != ["g", "x", "y"]:
        raise ParseError(f"header must name g,x,y; got {','.join(header)}", 1)
    col = {name: header.index(name) for name in ("g", "x", "y")}
    g, x, y = [], [], []
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", line)
        gv = _parse_number(row[col["g"]], "g", line)
        xv = _parse_number(row[col["x"]], "x", line)
        yv = _parse_number(row[col["y"]], "y", line)
        if gv not in (0.0, 1.0):
            raise ParseError(f"g={row[col['g']].strip()} is not 0 or 1", line)
        if yv < 0:
            raise ParseError(f"y={row[col['y']].strip()} is negative", line)
        g.append(gv)
        x.append(xv)
        y.append(yv)
    if not g:
        raise EmptyData("input has a header but no records")
    g = np.array(g, dtype=np.int8)
    x = np.array(x)
    y = np.array(y)
    if _is_binary(x):
        x = x.astype(np.int8)
    if _is_binary(y):
        y = y.astype(np.int8)
    return Dataset(g, x, y)


def _format(a: np.ndarray):
    if np.issubdtype(a.dtype, np.integer):
        return [str(int(v)) for v in a]
    return [repr(float(v)) for v in a]


def write_dataset(d: Dataset, dest: Union[str, os.PathLike, io.TextIOBase]) -> None:
    """Write ``d`` as ``g,x,y`` CSV; floats use repr so values round-trip exactly."""
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", newline="", encoding="utf-8") as fh:
            write_dataset(d, fh)
        return
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(["g", "x", "y"])
    writer.writerows(zip(_format(d.g), _format(d.x), _format(d.y)))


@dataclass(frozen=True)
class EmpiricalMoments(JointMoments):
    """Sample analogues of :class:`JointMoments` with cell counts."""

    n: int = 0
    n_g: tuple[int, int] = (0, 0)
    n_x: Optional[tuple[int, int]] = None


def empirical_moments(d: Dataset) -> EmpiricalMoments:
    g = d.g.astype(bool)
    x = d.x.astype(float)
    y = d.y.astype(float)
    n = d.n
    n1 = int(g.sum())
    n_g = (n - n1, n1)
    if 0 in n_g:
        raise DegenerateSample("one instrument group is empty")
    groups = (~g, g)
    ey_g = tuple(float(y[m].mean()) for m in groups)
    ex_g = tuple(float(x[m].mean()) for m in groups)
    eyx_g = tuple(float((y[m] * x[m]).mean()) for m in groups)
    pg1 = n1 / n
    gc = g - pg1
    x_binary = d.exposure_kind == "binary"
    if x_binary:
        xb = d.x.astype(bool)
        nx1 = int(xb.sum())
        n_x = (n - nx1, nx1)
        ey_x = tuple(float(y[m].mean()) if m.any() else None for m in (~xb, xb))
    else:
        n_x = None
        ey_x = None
    return EmpiricalMoments(
        ey_g=ey_g,
        ex_g=ex_g,
        eyx_g=eyx_g,
        ey_x=ey_x,
        px1=float(x.mean()),
        py1=float(y.mean()),
        pg1=pg1,
        cov_yg=float(np.mean(y * gc)),
        cov_xg=float(np.mean(x * gc)),
        var_g=pg1 * (1.0 - pg1),
        x_binary=x_binary,
        n=n,
        n_g=n_g,
        n_x=n_x,
    )


def plugin_estimates(m: JointMoments) -> EstimandSet:
    return estimands.estimate(m)


def _support(data) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(g, x, y, weight) arrays; a Dataset has unit weights, a law its eight cells."""
    if isinstance(data, ObservationalLaw):
        y, x, g = (a.ravel().astype(float) for a in np.indices((2, 2, 2)))
        return g, x, y, data.p.ravel().copy()
    rows = np.column_stack([data.g, data.x, data.y]).astype(float)
    atoms, counts = np.unique(rows, axis=0, return_counts=True)
    return atoms[:, 0], atoms[:, 1], atoms[:, 2], counts / data.n


def _moments_of(data) -> JointMoments:
    if isinstance(data, ObservationalLaw):
        return estimands.moments(data)
    return empirical_moments(data)


def solve_additive_smm(data) -> float:
    """Root of the linear moment condition E((Y - beta X)(G - E G)) = 0.

    ``data`` is a :class:`Dataset` or an :class:`ObservationalLaw`.
    """
    g, x, y, w = _support(data)
    gc = g - w @ g
    slope = w @ (x * gc)
    if abs(slope) < estimands.WEAK_INSTRUMENT_FLOOR:
        raise WeakInstrument("Cov(X, G) is zero")
    return float((w @ (y * gc)) / slope)


def _bracket_ok(x: np.ndarray, half_width: float) -> bool:
    return half_width * float(np.max(np.abs(x))) <= EXP_CLAMP


def msmm_roots(data) -> list[float]:
    """All roots of E(Y exp(-gamma X)(G - E G)) = 0 in the search bracket.

    The bracket starts at [-10, 10] and doubles until a sign change is seen,
    stopping at 1e3 or when exp(-gamma x) would overflow.
    """
    g, x, y, w = _support(data)
    gc = g - w @ g
    if abs(w @ (x * gc)) < estimands.WEAK_INSTRUMENT_FLOOR:
        raise WeakInstrument("Cov(X, G) is zero")
    wyg = w * y * gc

    def f(gamma):
        return float(wyg @ np.exp(-gamma * x))

    xmax = max(float(np.max(np.abs(x))), 1e-300)
    half = min(GAMMA_BRACKET, EXP_CLAMP / xmax)
    while True:
        grid = np.linspace(-half, half, SCAN_POINTS)
        if len(x) <= 4096:
            vals = np.exp(-np.outer(grid, x)) @ wyg
        else:
            vals = np.array([f(t) for t in grid])
        roots = []
        for i in range(len(grid) - 1):
            a, b = vals[i], vals[i + 1]
            if a == 0.0:
                roots.append(float(grid[i]))
            elif np.sign(a) * np.sign(b) < 0.0:
                roots.append(brentq(f, grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15, maxiter=500))
        if vals[-1] == 0.0:
            roots.append(float(grid[-1]))
        if roots:
            return roots
        nxt = 2.0 * half
        if nxt > GAMMA_LIMIT or not _bracket_ok(x, nxt):
            raise NoRoot(f"no sign change of the MSMM moment function in [-{half:g}, {half:g}]")
        half = nxt


def solve_msmm_general(data) -> float:
    """gamma_L solving the multiplicative SMM estimating equation; continuous X allowed.

    With more than one root, MultipleRoots carries all of them and flags as
    default the root closest to log(LIVRR), or to 0 if LIVRR is undefined.
    """
    roots = msmm_roots(data)
    if len(roots) == 1:
        return roots[0]
    try:
        rr, _, _ = estimands.livrr_livor(_moments_of(data))
        ref = math.log(rr) if rr > 0 else 0.0
    except IVBiasError:
        ref = 0.0
    default = min(roots, key=lambda r: abs(r - ref))
    raise MultipleRoots(roots, default)
