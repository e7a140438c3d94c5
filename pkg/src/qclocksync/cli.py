"""Command-line experiment runner.

    qclocksync qcs --pairs 40000 --t 0.7 --seed 7 --out qcs.json
    qclocksync master-eq --gamma 1 --format csv --out trajectory.csv

Exit status: 0 when every derived check passes, 1 when any fails, 2 on a
usage or configuration error.  ``QCLOCKSYNC_OUT_DIR`` sets a default output
directory when ``--out`` is not given.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .experiments import EXPERIMENTS, EXTRA_RULES, Check

OUT_DIR_ENV = "QCLOCKSYNC_OUT_DIR"
FORMATS = ("json", "csv")

# flag name -> parameter key
FLAGS = {
    "omega": "omega", "t": "t", "delta-lag": "delta_lag", "eta": "eta", "fidelity": "fidelity",
    "delta-phase": "delta_phase", "pairs": "pairs", "rounds": "rounds", "gamma": "gamma", "seed": "seed",
    "transit": "transit", "kind": "kind", "noise": "noise", "sigma": "sigma", "states": "states",
}


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class ExperimentConfig:
    experiment: str
    parameters: dict = field(default_factory=dict)
    output: str | None = None
    format: str = "json"

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, "parameters": dict(self.parameters),
                "output": self.output, "format": self.format}


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    results: dict
    derived_checks: list[Check]
    table: dict | None
    runtime_ms: float

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.derived_checks)

    def to_dict(self) -> dict:
        return {
            "experiment": self.config.experiment,
            "config": self.config.to_dict(),
            "results": self.results,
            "table": self.table,
            "derived_checks": [c.to_dict() for c in self.derived_checks],
            "all_passed": self.all_passed,
            "runtime_ms": self.runtime_ms,
        }


def resolve_parameters(experiment: str, given: dict) -> dict:
    """Fill defaults and validate every parameter before any computation."""
    if experiment not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {experiment!r}; valid subcommands: {', '.join(EXPERIMENTS)}")
    _, specs = EXPERIMENTS[experiment]
    unknown = sorted(set(given) - set(specs))
    if unknown:
        raise ConfigError(unknown[0], f"not a parameter of {experiment!r} (accepted: {', '.join(specs)})")
    out = {}
    for key, spec in specs.items():
        raw = given.get(key, spec.default)
        try:
            if spec.kind is int:
                if isinstance(raw, float) and not raw.is_integer():
                    raise ValueError
                value = int(raw)
            else:
                value = spec.kind(raw)
        except (TypeError, ValueError):
            raise ConfigError(key, f"expected {spec.kind.__name__}, got {raw!r}") from None
        if isinstance(value, float) and not math.isfinite(value):
            raise ConfigError(key, "must be finite")
        if spec.check is not None and not spec.check(value):
            raise ConfigError(key, f"{spec.rule} (got {value!r})")
        out[key] = value
    for key, rule, message in EXTRA_RULES.get(experiment, []):
        if not rule(out):
            raise ConfigError(key, message)
    return out


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, complex):
        return {"real": obj.real, "imag": obj.imag}
    return obj


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    if config.format not in FORMATS:
        raise ConfigError("format", f"unsupported format {config.format!r}; choose from {FORMATS}")
    params = resolve_parameters(config.experiment, config.parameters)
    resolved = ExperimentConfig(config.experiment, params, config.output, config.format)
    fn, _ = EXPERIMENTS[config.experiment]
    start = time.perf_counter()
    outcome = fn(params)
    runtime = (time.perf_counter() - start) * 1000.0
    checks = [Check(c.claim, _jsonable(c.expected), _jsonable(c.observed), c.tolerance, c.passed)
              for c in outcome.checks]
    return ExperimentReport(resolved, _jsonable(outcome.results), checks, _jsonable(outcome.table), runtime)


def render(report: ExperimentReport, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(_jsonable(report.to_dict()), indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        if not report.table:
            raise ValueError(f"experiment {report.config.experiment!r} has no tabular result block")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(report.table["columns"])
        for row in report.table["rows"]:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
        return buf.getvalue()
    raise ValueError(f"unsupported format {fmt!r}")


def emit_report(report: ExperimentReport, fmt: str, path: str | Path) -> Path:
    """Write the report atomically (temporary file in the target directory, then rename)."""
    text = render(report, fmt)
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    if not directory.is_dir():
        raise OSError(f"output directory {directory} does not exist")
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def load_config_file(path: str | Path) -> tuple[str | None, dict]:
    """Read flags from JSON: either a flat ``{flag: value}`` mapping or a report's ``config`` block."""
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigError("config", "config file must hold a JSON object")
    if "config" in data and isinstance(data["config"], dict):
        data = data["config"]
    experiment = data.get("experiment")
    params = dict(data.get("parameters", {}))
    for k, v in data.items():
        if k in ("experiment", "parameters", "output", "format"):
            continue
        params[FLAGS.get(k, k.replace("-", "_"))] = v
    return experiment, params


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    for flag in FLAGS:
        common.add_argument(f"--{flag}", dest=FLAGS[flag], default=None)
    common.add_argument("--config", default=None, help="JSON file supplying any flag; flags override it")
    common.add_argument("--out", default=None)
    common.add_argument("--format", default="json", choices=FORMATS)
    parser = argparse.ArgumentParser(prog="qclocksync", description="Clock-synchronization experiments.")
    sub = parser.add_subparsers(dest="experiment", metavar="EXPERIMENT")
    sub.required = True
    for name in EXPERIMENTS:
        sub.add_parser(name, parents=[common], help=f"run the {name} experiment")
    return parser


def _default_output(experiment: str, fmt: str) -> Path | None:
    directory = os.environ.get(OUT_DIR_ENV)
    return Path(directory) / f"{experiment}.{fmt}" if directory else None


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    params: dict = {}
    try:
        if args.config:
            file_exp, params = load_config_file(args.config)
            if file_exp and file_exp != args.experiment:
                raise ConfigError("experiment", f"config file is for {file_exp!r}, not {args.experiment!r}")
        specs = EXPERIMENTS[args.experiment][1]
        for key in set(FLAGS.values()):
            value = getattr(args, key, None)
            if value is not None:
                if key not in specs:
                    raise ConfigError(key, f"not a parameter of {args.experiment!r} (accepted: {', '.join(specs)})")
                params[key] = value
        config = ExperimentConfig(args.experiment, params, args.out, args.format)
        report = run_experiment(config)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for c in report.derived_checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.claim}: observed={c.observed} expected={c.expected} "
              f"tol={c.tolerance}", file=sys.stderr)
    out = Path(args.out) if args.out else _default_output(args.experiment, args.format)
    try:
        if out is None:
            sys.stdout.write(render(report, args.format))
        else:
            emit_report(report, args.format, out)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0 if report.all_passed else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
