"""
Command-line front end.

::

    covbasis run <config.toml> [--parallel N]
    covbasis verify <family> [--seed N] [--points K] [--scheme S] [--output PATH]
    covbasis sweep <config.toml> --halvings K

Exit status is 0 when every scenario gate passes, 1 when any scenario fails or
errors, and 2 for configuration problems.  ``COVBASIS_OUTPUT_DIR`` overrides
the output directory of a config file.  File layouts are documented in
``docs/config.md``.
"""
import argparse
from concurrent.futures import ThreadPoolExecutor
import dataclasses
import json
import math
import os
import re
import sys

import numpy as np

from .config import OUTPUT_DIR_ENV, RunConfig, Scenario, load_config
from .errors import ConfigParseError
from .tasks import DEFAULT_BOXES, run_task

__all__ = ["main", "run", "verify", "sweep", "emit_log", "emit_result", "log_table", "format_float"]

FLOAT_FORMAT = "%.17g"


def format_float(x):
    return FLOAT_FORMAT % x


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format_float(float(v) + 0.0)  # no signed zeros


def _jsonable(obj):
    """Recursively convert arrays, complex numbers and non-finite floats."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return {"re": _jsonable(obj.real.tolist()), "im": _jsonable(obj.imag.tolist())}
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _jsonable(float(obj.real)), "im": _jsonable(float(obj.imag))}
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _prepare_path(path):
    """Create parent directories; warn on stderr when an existing file is replaced."""
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    if os.path.exists(path):
        print(f"warning: overwriting existing output {path}", file=sys.stderr)


def _write_csv(path, header, rows):
    _prepare_path(path)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")


def _write_json(path, payload):
    _prepare_path(path)
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def log_table(log):
    """CSV header and rows for an :class:`~covbasis.propagators.ObservableLog`."""
    k = log.n_states
    p = log.berry.shape[1]
    header = (["step", "time"] + [f"norm_{n}" for n in range(k)] + [f"energy_{n}" for n in range(k)]
              + ["ortho_dev"])
    for i in range(p):
        header += [f"berry_re_{i}", f"berry_im_{i}"]
    header += list(log.extra)
    rows = []
    for n in range(len(log)):
        row = [int(log.step[n]), log.time[n], *log.norms[n], *log.energies[n], log.ortho_dev[n]]
        for i in range(p):
            row += [log.berry[n, i].real, log.berry[n, i].imag]
        row += [log.extra[name][n] for name in log.extra]
        rows.append(row)
    return header, rows


def emit_log(log, path, fmt="csv", fit=None):
    """Write a trajectory log.

    Parameters
    ----------
    fmt : {"csv", "json"}
        JSON holds the metadata, the same columns as lists and the
        convergence fit (``fitted_order``, ``r_squared``; null without a fit).
    fit : dict, optional

    Raises
    ------
    ValueError
        For an empty log or unknown format.
    OSError
        When the file cannot be written.
    """
    if len(log) == 0:
        raise ValueError("cannot emit an empty log")
    header, rows = log_table(log)
    if fmt == "csv":
        _write_csv(path, header, rows)
    elif fmt == "json":
        fit = fit or {}
        cols = {name: [row[j] for row in rows] for j, name in enumerate(header)}
        _write_json(path, {"meta": log.meta, "columns": cols,
                           "fitted_order": fit.get("fitted_order"), "r_squared": fit.get("r_squared")})
    else:
        raise ValueError(f"unknown output format {fmt!r}")
    return path


def emit_result(result, scenario, path):
    """Write a task result as CSV (table or log) or JSON (summary plus status)."""
    if scenario.output_format == "csv":
        if result.log is not None:
            return emit_log(result.log, path, "csv")
        header, rows = result.table
        _write_csv(path, header, rows)
        return path
    payload = {"scenario": scenario.name, "task": scenario.task, "family": scenario.family,
               "params": scenario.params, "seed": scenario.seed, "passed": result.passed,
               "failures": result.failures, "result": result.summary}
    if result.log is not None:
        header, rows = log_table(result.log)
        payload["columns"] = {name: [row[j] for row in rows] for j, name in enumerate(header)}
    _write_json(path, payload)
    return path


def _slug(name):
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name).strip("_") or "scenario"


def _output_path(sc, out_dir):
    path = sc.output_path or f"{_slug(sc.name)}.{sc.output_format}"
    return path if os.path.isabs(path) else os.path.join(out_dir, path)


def _execute(sc, out_dir):
    """Run one scenario; errors become failures instead of propagating."""
    try:
        result = run_task(sc)
    except ConfigParseError as exc:
        return None, [f"config error: {exc}"], None
    except Exception as exc:  # reported in the summary, later scenarios still run
        return False, [f"{type(exc).__name__}: {exc}"], None
    try:
        path = emit_result(result, sc, _output_path(sc, out_dir))
    except OSError as exc:
        return False, [f"cannot write output: {exc}"], None
    return result.passed, result.failures, path


def run_config(cfg, parallel=1, out=None):
    """Run every scenario in ``cfg``; returns the exit code.

    A scenario whose settings turn out to be invalid only when it runs is
    reported like any failure, but the exit code becomes 2.
    """
    out = sys.stdout if out is None else out
    scenarios = cfg.scenarios
    if parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            outcomes = list(pool.map(lambda s: _execute(s, cfg.output_dir), scenarios))
    else:
        outcomes = [_execute(s, cfg.output_dir) for s in scenarios]
    n_fail = 0
    bad_config = False
    for sc, (ok, fails, path) in zip(scenarios, outcomes):
        bad_config |= ok is None
        status = "PASS" if ok else "FAIL"
        where = f" -> {path}" if path else ""
        print(f"{status} {sc.name} [{sc.task}]{where}", file=out)
        for msg in fails:
            print(f"    {msg}", file=out)
        n_fail += not ok
    print(f"{len(scenarios) - n_fail}/{len(scenarios)} scenarios passed", file=out)
    if bad_config:
        return 2
    return 0 if n_fail == 0 else 1


def run(config_path, parallel=1):
    """Run a config file; exit code 0 (all gates pass), 1 (failures) or 2 (bad config)."""
    try:
        cfg = load_config(config_path)
        return run_config(cfg, parallel)
    except ConfigParseError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


def verify(family, seed=42, points=20, scheme="analytic", output=None):
    """Identity suite for a family with its default settings."""
    sc = Scenario(name=f"verify_{family}", task="verify_identities", family={"kind": family},
                  params={"seed": seed, "points": points, "scheme": scheme},
                  output_path=output, output_format="json")
    out_dir = os.environ.get(OUTPUT_DIR_ENV, ".")
    if output is None:
        try:
            result = run_task(sc)
        except ConfigParseError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        except Exception as exc:
            print(f"FAIL {sc.name}: {type(exc).__name__}: {exc}")
            return 1
        print(json.dumps(_jsonable({"family": family, "seed": seed, "passed": result.passed,
                                    "worst": result.summary["worst"],
                                    "group_max": result.summary["group_max"]}), indent=2, sort_keys=True))
        return 0 if result.passed else 1
    try:
        return run_config(RunConfig([sc], out_dir, seed))
    except ConfigParseError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


def sweep(config_path, halvings):
    """Run only the ``dt_sweep`` scenarios of a config with ``halvings`` overridden."""
    try:
        cfg = load_config(config_path)
        picked = [dataclasses.replace(s, params={**s.params, "halvings": int(halvings)})
                  for s in cfg.scenarios if s.task == "dt_sweep"]
        if not picked:
            raise ConfigParseError("config has no dt_sweep scenario", field="scenario.task")
        if halvings < 1:
            raise ConfigParseError("--halvings must be at least 1", field="halvings")
        return run_config(dataclasses.replace(cfg, scenarios=picked))
    except ConfigParseError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


def _parser():
    p = argparse.ArgumentParser(prog="covbasis", description="Moving non-orthogonal basis simulator.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run every scenario in a TOML config")
    r.add_argument("config")
    r.add_argument("--parallel", type=int, default=1, metavar="N", help="run scenarios on N threads")
    v = sub.add_parser("verify", help="connection identity suite for one family")
    v.add_argument("family", choices=sorted(k for k in DEFAULT_BOXES if k != "static"))
    v.add_argument("--seed", type=int, default=42)
    v.add_argument("--points", type=int, default=20)
    v.add_argument("--scheme", choices=("analytic", "central_fd"), default="analytic")
    v.add_argument("--output", default=None, help="write a JSON report instead of printing")
    s = sub.add_parser("sweep", help="dt convergence sweeps from a config")
    s.add_argument("config")
    s.add_argument("--halvings", type=int, required=True)
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.command == "run":
        return run(args.config, max(1, args.parallel))
    if args.command == "verify":
        return verify(args.family, args.seed, args.points, args.scheme, args.output)
    return sweep(args.config, args.halvings)


if __name__ == "__main__":
    sys.exit(main())
