"""Asymptotic relative-bias study over grids of calibrated scenarios."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from . import bounds, estimands
from .errors import EmptyGrid, IVBiasError
from .scenario import DEFAULT_NODES, CalibrationSpec, calibrate, causal_targets, observational_law

# Estimand columns compared against each causal target, in table order.
COLUMNS = {
    "crr": (("nrr", "NRR"), ("livrr", "LIVRR"), ("wald_rr", "WaldRR"), ("msmm_rr", "MSMM")),
    "ace": (("naive_rd", "NRD"), ("livae", "LIVAE"), ("msmm_ace", "MSMM")),
    "cor": (("naive_or", "NOR"), ("livor", "LIVOR"), ("wald_or", "WaldOR"), ("msmm_cor", "MSMM")),
}
FORMATS = ("csv", "md", "json")


@dataclass(frozen=True)
class GridSpec:
    """Cross product of effect sizes, confounding and interaction settings.

    Rows are ordered by crr target, then ``beta4_set``, ``alpha4_set`` and
    ``alpha3_set`` in the order given, and kept only when |alpha4| <= |alpha3|.
    ``target`` picks the causal contrast the biases are measured against.
    """

    crr_targets: tuple = (1.33,)
    alpha3_set: tuple = (0.1, 1.0, 2.0)
    alpha4_set: tuple = (0.0, 1.0, -1.0)
    beta4_set: tuple = (0.0, 1.0, -1.0)
    beta3: float = 2.0
    target_px1: float = 0.13
    target_rr_xg: float = 2.4
    target_py1: float = 0.03
    pg: float = 0.5
    nonzero_alpha4: bool = False
    target: str = "crr"
    atoms: Optional[int] = None
    nodes: int = DEFAULT_NODES

    def __post_init__(self):
        for name in ("crr_targets", "alpha3_set", "alpha4_set", "beta4_set"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if self.target not in COLUMNS:
            raise ValueError(f"target must be one of {tuple(COLUMNS)}, got {self.target!r}")

    def replace(self, **changes) -> "GridSpec":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = {
            "targets": {"px1": self.target_px1, "rr_xg": self.target_rr_xg,
                        "py1": self.target_py1, "crr": list(self.crr_targets)},
            "alpha3": list(self.alpha3_set), "alpha4": list(self.alpha4_set),
            "beta4": list(self.beta4_set), "beta3": self.beta3, "pg": self.pg,
            "nonzero_alpha4": self.nonzero_alpha4, "target": self.target,
        }
        if self.atoms is None:
            d["confounder"] = {"kind": "uniform", "nodes": self.nodes}
        else:
            d["confounder"] = {"kind": "discrete", "atoms": self.atoms}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        """Parse the JSON dialect of :meth:`to_dict`; ``"preset"`` names a base grid."""
        base = PRESETS[d["preset"]] if "preset" in d else cls()
        kw = {}
        t = d.get("targets", {})
        for key, name in (("px1", "target_px1"), ("rr_xg", "target_rr_xg"), ("py1", "target_py1")):
            if key in t:
                kw[name] = float(t[key])
        if "crr" in t:
            kw["crr_targets"] = _as_tuple(t["crr"])
        for key in ("alpha3", "alpha4", "beta4"):
            if key in d:
                kw[key + "_set"] = _as_tuple(d[key])
        for key in ("beta3", "pg"):
            if key in d:
                kw[key] = float(d[key])
        if "nonzero_alpha4" in d:
            kw["nonzero_alpha4"] = bool(d["nonzero_alpha4"])
        if "target" in d:
            kw["target"] = str(d["target"])
        conf = d.get("confounder")
        if conf:
            if conf.get("kind", "uniform") == "discrete":
                kw["atoms"] = int(conf["atoms"])
            else:
                kw["atoms"] = None
                kw["nodes"] = int(conf.get("nodes", base.nodes))
        return base.replace(**kw)


def _as_tuple(v) -> tuple:
    return tuple(v) if isinstance(v, (list, tuple)) else (v,)


TABLE1 = GridSpec(crr_targets=(1.0,), alpha4_set=(1.0, -1.0), nonzero_alpha4=True)
TABLE2 = GridSpec(crr_targets=(1.33,))
TABLE3 = GridSpec(crr_targets=(3.03,))
PRESETS = {"table1": TABLE1, "table2": TABLE2, "table3": TABLE3}


def expand_grid(spec: GridSpec) -> list[CalibrationSpec]:
    out = []
    for crr in spec.crr_targets:
        for b4 in spec.beta4_set:
            for a4 in spec.alpha4_set:
                if spec.nonzero_alpha4 and a4 == 0.0:
                    continue
                for a3 in spec.alpha3_set:
                    if abs(a4) > abs(a3):
                        continue
                    out.append(CalibrationSpec(
                        target_crr=crr, alpha3=a3, alpha4=a4, beta3=spec.beta3, beta4=b4,
                        target_px1=spec.target_px1, target_rr_xg=spec.target_rr_xg,
                        target_py1=spec.target_py1, pg=spec.pg,
                        atoms=spec.atoms, nodes=spec.nodes,
                    ))
    if not out:
        raise EmptyGrid("the |alpha4| <= |alpha3| filter leaves no scenarios")
    return out


@dataclass
class BiasRow:
    """One calibrated scenario with its estimands, targets and relative biases.

    ``error`` is set, and every numeric field is NaN, when calibration or
    evaluation failed for this row.
    """

    crr_target: float
    alpha3: float
    alpha4: float
    beta4: float
    target: str = "crr"
    true_value: float = math.nan
    estimates: dict = field(default_factory=dict)
    biases: dict = field(default_factory=dict)
    valid: dict = field(default_factory=dict)
    coefficients: dict = field(default_factory=dict)
    targets: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _naive_contrasts(m: estimands.JointMoments) -> dict:
    e0, e1 = m.ey_x
    out = {"naive_rd": e1 - e0}
    out["naive_or"] = (e1 * (1 - e0)) / ((1 - e1) * e0) if 0 < e0 < 1 and 0 < e1 < 1 else math.nan
    return out


def evaluate_row(cs: CalibrationSpec, target: str = "crr") -> BiasRow:
    """Calibrate one grid point and compute every bias against ``target``."""
    row = BiasRow(crr_target=cs.target_crr, alpha3=cs.alpha3, alpha4=cs.alpha4,
                  beta4=cs.beta4, target=target)
    cols = [name for name, _ in COLUMNS[target]]
    try:
        s = calibrate(cs)
        law = observational_law(s)
        m = estimands.moments(law)
        est = estimands.estimate(m)
        tg = causal_targets(s)
        values = est.to_dict()
        values.update(_naive_contrasts(m))
        truth = getattr(tg, target)
        row.true_value = truth
        row.coefficients = {k: v for k, v in s.to_dict().items() if k != "confounder"}
        row.targets = tg.to_dict()
        row.bounds = {q: b.to_dict() for q, b in bounds.bound_all(law).items()}
        for name in cols:
            v = float(values[name])
            row.estimates[name] = v
            row.biases[name] = (v - truth) / truth if math.isfinite(v) else math.nan
            row.valid[name] = bool(est.valid.get(name, math.isfinite(v)))
    except IVBiasError as exc:
        row.error = f"{type(exc).__name__}: {exc}"
        for name in cols:
            row.estimates[name] = math.nan
            row.biases[name] = math.nan
            row.valid[name] = False
    return row


def run_bias_study(spec: GridSpec, workers: int = 1) -> list[BiasRow]:
    """Evaluate every grid row; per-row failures are recorded, not raised.

    With ``workers > 1`` rows run in separate processes; results keep grid order.
    """
    grid = expand_grid(spec)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(evaluate_row, grid, [spec.target] * len(grid)))
    return [evaluate_row(cs, spec.target) for cs in grid]


def _fmt_bias(v: float) -> str:
    return "NA" if not math.isfinite(v) else f"{v:.3f}"


def _fmt_setting(v: float) -> str:
    return f"{v:g}"


def _table(rows: list[BiasRow]) -> tuple[list[str], list[list[str]]]:
    target = rows[0].target
    if any(r.target != target for r in rows):
        raise ValueError("rows measure biases against different targets")
    cols = COLUMNS[target]
    header = ["crr", "alpha3", "alpha4", "beta4"] + [label for _, label in cols]
    body = []
    for r in rows:
        body.append([_fmt_setting(r.crr_target), _fmt_setting(r.alpha3),
                     _fmt_setting(r.alpha4), _fmt_setting(r.beta4)]
                    + [_fmt_bias(r.biases.get(name, math.nan)) for name, _ in cols])
    return header, body


def _json_default(v):
    raise TypeError(f"cannot serialise {type(v).__name__}")


def json_safe(obj):
    """Replace non-finite floats so the result is strict JSON (NaN -> null, inf -> "inf")."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: json_safe(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [json_safe(v) for v in obj]
    return obj


def render(rows: list[BiasRow], fmt: str = "md") -> str:
    """Render rows as CSV, aligned markdown (biases to 3 decimals) or full-precision JSON."""
    if not rows:
        raise ValueError("nothing to render: empty row list")
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")
    if fmt == "json":
        return json.dumps([json_safe(r.to_dict()) for r in rows], indent=2,
                          default=_json_default) + "\n"
    header, body = _table(rows)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(body)
        return buf.getvalue()
    widths = [max(len(header[i]), *(len(b[i]) for b in body)) for i in range(len(header))]
    lines = ["| " + " | ".join(h.rjust(w) for h, w in zip(header, widths)) + " |",
             "|" + "|".join("-" * (w + 1) + ":" for w in widths) + "|"]
    for b in body:
        lines.append("| " + " | ".join(c.rjust(w) for c, w in zip(b, widths)) + " |")
    return "\n".join(lines) + "\n"
