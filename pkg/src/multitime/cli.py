"""Command-line experiment runner.

Usage::

    multitime run --config exp.json [--out result.json] [--format json|csv]
                  [--seed N] [--verbose]

The config is validated against ``schemas/experiment-config.v1.json``.

Result documents
----------------
``json`` (default) holds ``kind``, ``config`` (echo of the validated input),
``outputs``, ``table`` ({columns, rows}), ``checks`` (one object per check
with ``measured``, ``comparator``, ``tolerance``/``target`` and ``passed``),
overall ``passed`` and a ``timestamp``.  Floats carry 17 significant digits
and keys are sorted, so identical configs give identical bytes apart from
the timestamp.

``csv`` writes the data table with a header row of the documented columns,
preceded by comment lines ``# kind: ...``, ``# passed: ...`` and one
``# check: name,measured,comparator,tolerance,target,passed`` per check.

Wave fields requested with ``dump_field`` are written in the layout of
:mod:`multitime.wavegrid` (``.csv`` suffix selects the CSV variant, anything
else the binary one): a one-line JSON header
``{"axes": [{"dq", "n", "q_min"}, ...], "format": "multitime.wavefield",
"version": 1}`` followed by little-endian complex128 values in C order
(q1 index major).

Exit status: 0 when every check passes, 1 when a check fails or the
computation raises a numeric error, 2 for unreadable, malformed or
schema-invalid configs.  Errors are reported on stderr as
``multitime: error [<code>]: <message>``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import jsonschema

from . import __version__, wavegrid
from .errors import MultitimeError
from .experiments import RUNNERS

log = logging.getLogger("multitime")

SCHEMA_NAME = "experiment-config.v1.json"
RESULT_FORMAT = "multitime.result/1"

# codes that describe a bad config rather than a failed computation
CONFIG_CODES = {
    "expression.invalid", "path.invalid", "path.not_a_loop", "grid.invalid",
    "operator.not_hermitian", "operator.dimension_mismatch", "kernel.degenerate_interval",
}


class ConfigError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def load_schema() -> dict:
    text = resources.files("multitime").joinpath("schemas", SCHEMA_NAME).read_text()
    return json.loads(text)


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("config.io", f"cannot read {path}: {exc.strerror}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("config.json", f"{path}: invalid JSON: {exc}") from None
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/".join(str(x) for x in e.absolute_path) or "<root>"
        raise ConfigError("config.schema", f"{where}: {e.message}")
    return cfg


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"NaN"'
    if math.isinf(x):
        return '"Infinity"' if x > 0 else '"-Infinity"'
    s = format(x, ".17g")
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """Deterministic JSON with sorted keys and 17-significant-digit floats."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if hasattr(obj, "tolist"):
        return dumps(obj.tolist(), indent, _level)
    if isinstance(obj, complex):
        return dumps([obj.real, obj.imag], indent, _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}"
                 for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _csv_cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def render_csv(kind: str, outcome) -> str:
    buf = io.StringIO()
    buf.write(f"# kind: {kind}\n")
    buf.write(f"# passed: {'true' if outcome.passed else 'false'}\n")
    for c in outcome.checks:
        d = c.to_dict()
        target = json.dumps(d.get("target")) if "target" in d else ""
        tol = _csv_cell(d["tolerance"]) if "tolerance" in d else ""
        buf.write(f"# check: {c.name},{_csv_cell(float(c.measured))},{c.comparator},"
                  f"{tol},{target},{'true' if c.passed else 'false'}\n")
    w = csv.writer(buf, lineterminator="\n")
    if outcome.columns:
        w.writerow(outcome.columns)
        for row in outcome.rows:
            w.writerow([_csv_cell(v) for v in row])
    return buf.getvalue()


def result_document(cfg: dict, outcome, timestamp: str) -> dict:
    return {
        "format": RESULT_FORMAT,
        "version": __version__,
        "kind": cfg["kind"],
        "config": cfg,
        "outputs": outcome.outputs,
        "table": {"columns": outcome.columns, "rows": outcome.rows},
        "checks": [c.to_dict() for c in outcome.checks],
        "passed": outcome.passed,
        "timestamp": timestamp,
    }


class RunContext:
    def __init__(self, seed=None, base_dir: Path | None = None):
        self.seed = seed
        self.base_dir = base_dir or Path.cwd()

    def dump(self, field, path: str):
        target = Path(path)
        if not target.is_absolute():
            target = self.base_dir / target
        fmt = "csv" if target.suffix.lower() == ".csv" else "bin"
        wavegrid.write_field(field, target, fmt)
        log.info("wrote wave field to %s", target)


def _error(code: str, message: str) -> None:
    print(f"multitime: error [{code}]: {message}", file=sys.stderr)


def run(config_path, out=None, fmt=None, seed=None) -> int:
    """Execute one experiment; returns the process exit status."""
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        _error(exc.code, str(exc))
        return 2
    output = cfg.get("output", {})
    fmt = fmt or output.get("format", "json")
    out = out or output.get("path")
    kind = cfg["kind"]
    log.info("running %s", kind)
    ctx = RunContext(seed, Path(config_path).resolve().parent)
    try:
        outcome = RUNNERS[kind](cfg["params"], ctx)
    except MultitimeError as exc:
        _error(exc.code, str(exc))
        return 2 if exc.code in CONFIG_CODES else 1
    except (ValueError, KeyError, IndexError) as exc:
        # raised while interpreting parameters that pass the schema
        _error("config.invalid", str(exc))
        return 2
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    if fmt == "csv":
        text = render_csv(kind, outcome)
    else:
        text = dumps(result_document(cfg, outcome, stamp)) + "\n"
    if out:
        try:
            Path(out).write_text(text)
        except OSError as exc:
            _error("output.io", f"cannot write {out}: {exc.strerror}")
            return 2
    else:
        sys.stdout.write(text)
    for c in outcome.checks:
        log.info("check %s: measured %.6g -> %s", c.name, c.measured, "pass" if c.passed else "FAIL")
    return 0 if outcome.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multitime",
                                     description="Run multi-time evolution consistency experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment described by a JSON config")
    r.add_argument("--config", required=True, help="path to the experiment config (JSON)")
    r.add_argument("--out", help="result file; stdout when omitted")
    r.add_argument("--format", choices=["json", "csv"], help="result format (default json)")
    r.add_argument("--seed", type=int, help="seed for experiments that draw random loops or points")
    r.add_argument("--verbose", action="store_true", help="log progress to stderr")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        _error("config.seed", "seed must fit in an unsigned 64-bit integer")
        return 2
    return run(args.config, args.out, args.format, args.seed)


if __name__ == "__main__":
    sys.exit(main())
