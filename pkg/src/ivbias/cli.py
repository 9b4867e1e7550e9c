"""Command-line interface: ``ivbias <subcommand> [options]``."""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
from pathlib import Path

from . import bounds, empirical, estimands, scenario, study
from .errors import IncompatibleLaw, IVBiasError, MultipleRoots

NODES_ENV = "IVBIAS_QUAD_NODES"
COMMANDS = ("calibrate", "targets", "estimate", "bounds", "check-iv", "simulate", "bias-table")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(config: dict, overrides: list[str]) -> dict:
    """Apply ``key=value`` overrides in order; dotted keys address nested objects."""
    for item in overrides or ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ValueError(f"override {item!r} is not of the form key=value")
        node = config
        parts = key.split(".")
        for part in parts[:-1]:
            child = node.get(part)
            if not isinstance(child, dict):
                child = {}
                node[part] = child
            node = child
        node[parts[-1]] = _parse_value(value)
    return config


def _load_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ValueError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ValueError(f"{path}: top-level JSON value must be an object")
    return data


def _default_nodes(config: dict) -> dict:
    env = os.environ.get(NODES_ENV)
    if env and "confounder" not in config:
        try:
            nodes = int(env)
        except ValueError:
            raise ValueError(f"{NODES_ENV}={env!r} is not an integer") from None
        config["confounder"] = {"kind": "uniform", "nodes": nodes}
    return config


def _config(args) -> dict:
    if not args.config:
        raise ValueError(f"{args.command} needs --config")
    return _default_nodes(apply_overrides(_load_json(args.config), args.set))


def _is_calibration(config: dict) -> bool:
    return "crr" in config.get("targets", {})


def _is_law(config: dict) -> bool:
    return "p" in config or "conditional" in config


def _scenario(config: dict) -> scenario.Scenario:
    if _is_calibration(config):
        return scenario.calibrate(scenario.CalibrationSpec.from_dict(config))
    return scenario.Scenario.from_dict(config)


def _law(args) -> scenario.ObservationalLaw:
    if args.law:
        config = apply_overrides(_load_json(args.law), args.set)
        return scenario.ObservationalLaw.from_dict(config)
    config = _config(args)
    if _is_law(config):
        return scenario.ObservationalLaw.from_dict(config)
    return scenario.observational_law(_scenario(config))


def _json(obj) -> str:
    return json.dumps(study.json_safe(obj), indent=2) + "\n"


def _estimate_data(path: str) -> dict:
    d = empirical.read_dataset(path)
    m = empirical.empirical_moments(d)
    est = empirical.plugin_estimates(m)
    if d.exposure_kind == "continuous":
        try:
            gamma = empirical.solve_msmm_general(d)
        except MultipleRoots as exc:
            gamma = exc.default
        est.msmm_gamma = gamma
        est.msmm_rr = estimands.safe_exp(gamma)
        est.valid["msmm_gamma"] = est.valid["msmm_rr"] = True
        for name in ("msmm_gamma", "msmm_rr"):
            est.errors.pop(name, None)
    out = est.to_dict()
    out["n"] = d.n
    return out


def cmd_calibrate(args) -> tuple[str, int]:
    config = _config(args)
    if not _is_calibration(config):
        raise ValueError("calibrate needs a config with targets.crr")
    s = scenario.calibrate(scenario.CalibrationSpec.from_dict(config))
    return _json(s.to_dict()), 0


def cmd_targets(args) -> tuple[str, int]:
    return _json(scenario.causal_targets(_scenario(_config(args))).to_dict()), 0


def cmd_estimate(args) -> tuple[str, int]:
    if args.data:
        return _json(_estimate_data(args.data)), 0
    return _json(estimands.estimands_of_law(_law(args)).to_dict()), 0


def cmd_bounds(args) -> tuple[str, int]:
    result = bounds.bound_all(_law(args))
    return _json({q: b.to_dict() for q, b in result.items()}), 0


def cmd_check_iv(args) -> tuple[str, int]:
    report = bounds.instrumental_inequality(_law(args))
    if not report.satisfied:
        print(f"error: {IncompatibleLaw.__name__}: instrumental inequality violated "
              f"(worst slack {report.worst_slack:.6g})", file=sys.stderr)
    return _json(report.to_dict()), 0 if report.satisfied else 1


def cmd_simulate(args) -> tuple[str, int]:
    s = _scenario(_config(args))
    if args.n is None:
        raise ValueError("simulate needs --n")
    d = scenario.simulate(s, args.n, args.seed)
    buf = io.StringIO()
    empirical.write_dataset(d, buf)
    return buf.getvalue(), 0


def cmd_bias_table(args) -> tuple[str, int]:
    if not args.grid:
        raise ValueError("bias-table needs --grid (a JSON file or a preset name)")
    if args.grid in study.PRESETS and not Path(args.grid).exists():
        config = {"preset": args.grid}
    else:
        config = _load_json(args.grid)
    config = _default_nodes(apply_overrides(config, args.set))
    spec = study.GridSpec.from_dict(config)
    rows = study.run_bias_study(spec, workers=args.workers)
    return study.render(rows, args.format or "md"), 0


HANDLERS = {
    "calibrate": cmd_calibrate, "targets": cmd_targets, "estimate": cmd_estimate,
    "bounds": cmd_bounds, "check-iv": cmd_check_iv, "simulate": cmd_simulate,
    "bias-table": cmd_bias_table,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ivbias", description=(
        "IV estimands, structural mean models, nonparametric bounds and "
        "asymptotic bias tables for binary instrument, exposure and outcome."))
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")
    helps = {
        "calibrate": "solve intercepts and main effects from marginal targets",
        "targets": "true causal contrasts of a scenario",
        "estimate": "IV estimands from a scenario, a law or CSV data",
        "bounds": "assumption-free bounds on interventional quantities",
        "check-iv": "test the instrumental inequality (exit 1 when violated)",
        "simulate": "draw an i.i.d. CSV sample from a scenario",
        "bias-table": "relative-bias table over a scenario grid",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", help="scenario, calibration or law JSON")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config field (dotted keys, repeatable)")
        p.add_argument("--out", help="write output here instead of stdout")
        if name in ("estimate", "bounds", "check-iv"):
            p.add_argument("--law", help="observational law JSON")
        if name == "estimate":
            p.add_argument("--data", help="CSV with columns g,x,y")
        if name == "simulate":
            p.add_argument("--n", type=int)
            p.add_argument("--seed", type=int, default=0)
        if name == "bias-table":
            p.add_argument("--grid", help="grid JSON or one of " + ", ".join(study.PRESETS))
            p.add_argument("--format", choices=study.FORMATS)
            p.add_argument("--workers", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text, status = HANDLERS[args.command](args)
        if args.out:
            Path(args.out).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
    except (IVBiasError, ValueError, KeyError, OSError) as exc:
        name = type(exc).__name__
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        if isinstance(exc, KeyError):
            msg = f"missing field {msg!r}"
        print(f"error: {name}: {msg}", file=sys.stderr)
        return 2
    return status


if __name__ == "__main__":
    sys.exit(main())
