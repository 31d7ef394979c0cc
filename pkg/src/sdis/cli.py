"""Command-line harness for replicated benchmark estimation runs.

Configuration may come from a YAML file, from flags, or both; flags win.
The report goes to stdout (or --out) in json, csv or table form.  Any
failure writes a one-line JSON error object to stderr and exits 2, so
scripted callers never have to parse prose.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import yaml

from .engine import SdisParams
from .experiment import ExperimentConfig, emit, run_experiment
from .sus import SusParams

__all__ = ["main", "build_parser", "assemble_config"]

_TOP_KEYS = {"benchmark", "dim", "method", "reps", "seed", "workers",
             "format", "out", "sdis", "sus"}
_METHOD_ALIASES = {"enhanced-sdis": "sdis"}


class _CliError(Exception):
    def __init__(self, message: str, kind: str = "config"):
        super().__init__(message)
        self.kind = kind


class _Parser(argparse.ArgumentParser):
    # argparse prints prose usage errors; route them through the JSON path
    def error(self, message):
        raise _CliError(message, kind="usage")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sdis",
                description="Replicated rare-event probability estimation "
                            "on the built-in benchmark suite.")
    p.add_argument("--config", type=Path, default=None,
                   help="YAML config file; explicit flags override it")
    p.add_argument("--benchmark", default=None,
                   help="benchmark name (see sdis.benchmark_names())")
    p.add_argument("--dim", type=int, default=None,
                   help="input dimension, for benchmarks that take one")
    p.add_argument("--method", default=None,
                   choices=("sdis", "enhanced-sdis", "sus"),
                   help="estimator (enhanced-sdis is an alias of sdis)")
    p.add_argument("--reps", type=int, default=None,
                   help="number of independent replications")
    p.add_argument("--seed", type=int, default=None,
                   help="base seed; replication i uses seed + i")
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes for replications")
    p.add_argument("--out", type=Path, default=None,
                   help="output file (default: stdout)")
    p.add_argument("--format", default=None, choices=("json", "csv", "table"),
                   help="output format (default json)")
    return p


def _load_yaml(path: Path) -> dict:
    try:
        text = path.read_text()
    except OSError as e:
        raise _CliError(f"cannot read config {path}: {e}", kind="io")
    data = yaml.safe_load(text)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise _CliError(f"config {path} must be a mapping at top level")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise _CliError(f"unknown config keys: {sorted(unknown)}")
    return data


def _params_from(section, cls, label: str):
    if section is None:
        return cls()
    if not isinstance(section, dict):
        raise _CliError(f"config section '{label}' must be a mapping")
    try:
        return cls(**section)
    except (TypeError, ValueError) as e:
        raise _CliError(f"bad '{label}' parameters: {e}")


def assemble_config(ns: argparse.Namespace) -> tuple[ExperimentConfig, str, Path | None]:
    """Merge config file and flags into a validated run configuration."""
    data = _load_yaml(ns.config) if ns.config else {}

    def pick(flag, key, default=None):
        return flag if flag is not None else data.get(key, default)

    benchmark = pick(ns.benchmark, "benchmark")
    if benchmark is None:
        raise _CliError("a benchmark is required (--benchmark or config)")
    method = pick(ns.method, "method", "sdis")
    method = _METHOD_ALIASES.get(method, method)
    fmt = pick(ns.format, "format", "json")
    if fmt not in ("json", "csv", "table"):
        raise _CliError("format must be json, csv or table")
    out = pick(ns.out, "out")
    try:
        cfg = ExperimentConfig(
            benchmark=str(benchmark),
            dim=pick(ns.dim, "dim"),
            method=method,
            reps=int(pick(ns.reps, "reps", 100)),
            seed=int(pick(ns.seed, "seed", 0)),
            workers=int(pick(ns.workers, "workers", 1)),
            sdis=_params_from(data.get("sdis"), SdisParams, "sdis"),
            sus=_params_from(data.get("sus"), SusParams, "sus"),
        )
    except (TypeError, ValueError) as e:
        raise _CliError(str(e))
    return cfg, fmt, Path(out) if out is not None else None


def main(argv=None) -> int:
    parser = build_parser()
    try:
        try:
            ns = parser.parse_args(argv)
        except SystemExit as e:  # --help and friends
            return int(e.code or 0)
        cfg, fmt, out = assemble_config(ns)
        report = run_experiment(cfg)
        text = emit(report, fmt)
        if out is None:
            sys.stdout.write(text if text.endswith("\n") else text + "\n")
        else:
            try:
                out.write_text(text)
            except OSError as e:
                raise _CliError(f"cannot write {out}: {e}", kind="io")
        return 0
    except _CliError as e:
        json.dump({"error": str(e), "kind": e.kind}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except Exception as e:  # estimator failures, bad numerics, interrupts
        json.dump({"error": f"{type(e).__name__}: {e}", "kind": "runtime"},
                  sys.stderr)
        sys.stderr.write("\n")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
