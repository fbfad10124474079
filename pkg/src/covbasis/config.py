"""
Scenario configuration (TOML).

Layout::

    [run]                     # optional
    output_dir = "results"
    seed = 42

    [[scenario]]
    name = "rotating identities"
    task = "verify_identities"
    [scenario.family]         # kind + kind-specific keys
    kind = "rotating2d"
    theta = [0.0, 1.0]
    [scenario.hamiltonian]    # propagate / forces only
    kind = "zero"
    [scenario.params]         # task parameters
    points = 20
    [scenario.output]
    path = "rot.json"
    format = "json"           # or "csv"

See ``docs/config.md`` for every key.
"""
from dataclasses import dataclass, field
import os

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigParseError

__all__ = ["TASKS", "Scenario", "RunConfig", "load_config", "parse_config", "OUTPUT_DIR_ENV"]

OUTPUT_DIR_ENV = "COVBASIS_OUTPUT_DIR"
TASKS = ("verify_identities", "propagate", "dt_sweep", "curvature", "chern", "forces", "compare_dg")
FORMATS = ("csv", "json")
DEFAULT_SEED = 42

# parameters that must be strictly positive when present
_POSITIVE = {"dt", "dt0", "n_steps", "points", "h", "dt_fd", "n_theta", "n_phi", "tolerance",
             "halvings", "sc_tol", "sc_max_iter", "fd_tolerance", "radius"}
_INTEGER = {"n_steps", "points", "n_theta", "n_phi", "halvings", "sc_max_iter", "seed", "state", "n_states",
            "ortho_every"}
_NEEDS_TWO_PARAMS = {"curvature", "chern"}


@dataclass
class Scenario:
    name: str
    task: str
    family: dict
    params: dict = field(default_factory=dict)
    hamiltonian: dict = field(default_factory=dict)
    output_path: str = None
    output_format: str = "json"
    index: int = 0

    @property
    def seed(self):
        return int(self.params.get("seed", DEFAULT_SEED))


@dataclass
class RunConfig:
    scenarios: list
    output_dir: str = "."
    seed: int = DEFAULT_SEED
    source: str = None


def load_config(path):
    """Read and validate a scenario file.

    Raises
    ------
    ConfigParseError
        With ``field`` and ``line`` set where they can be determined.
    """
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigParseError(f"cannot read config {path}: {exc}") from exc
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigParseError(f"config is not UTF-8: {exc}") from exc
    cfg = parse_config(text)
    cfg.source = str(path)
    return cfg


def _line_of(text, needle, start=0, after=None):
    """1-based line of the ``start``-th occurrence of ``needle`` (best effort).

    With ``after`` (a 1-based line) the search begins on that line.
    """
    pos = -1
    if after is not None:
        pos = sum(len(ln) + 1 for ln in text.split("\n")[:after - 1]) - 1
    for _ in range(start + 1):
        pos = text.find(needle, pos + 1)
        if pos < 0:
            return None
    return text.count("\n", 0, pos) + 1


def parse_config(text):
    """Parse TOML text into a :class:`RunConfig`."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigParseError(f"malformed TOML: {exc}", line=line) from exc

    run = data.get("run", {})
    if not isinstance(run, dict):
        raise ConfigParseError("[run] must be a table", field="run", line=_line_of(text, "run"))
    unknown_top = set(data) - {"run", "scenario"}
    if unknown_top:
        key = sorted(unknown_top)[0]
        raise ConfigParseError(f"unknown top-level key {key!r}", field=key, line=_line_of(text, key))
    unknown_run = set(run) - {"output_dir", "seed"}
    if unknown_run:
        key = sorted(unknown_run)[0]
        raise ConfigParseError(f"unknown [run] key {key!r}", field=f"run.{key}", line=_line_of(text, key))
    seed = run.get("seed", DEFAULT_SEED)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigParseError("run.seed must be an integer", field="run.seed", line=_line_of(text, "seed"))
    out_dir = os.environ.get(OUTPUT_DIR_ENV) or run.get("output_dir", ".")

    raw = data.get("scenario")
    if not isinstance(raw, list) or not raw:
        raise ConfigParseError("config needs at least one [[scenario]] table", field="scenario")
    scenarios = []
    names = set()
    for k, sc in enumerate(raw):
        where = f"scenario[{k}]"
        line = _line_of(text, "[[scenario]]", k)
        if not isinstance(sc, dict):
            raise ConfigParseError(f"{where} must be a table", field=where, line=line)
        for req in ("name", "task", "family"):
            if req not in sc:
                raise ConfigParseError(f"{where} is missing '{req}'", field=f"{where}.{req}", line=line)
        unknown = set(sc) - {"name", "task", "family", "params", "hamiltonian", "output"}
        if unknown:
            key = sorted(unknown)[0]
            raise ConfigParseError(f"{where} has unknown key {key!r}", field=f"{where}.{key}", line=line)
        name = sc["name"]
        if not isinstance(name, str) or not name:
            raise ConfigParseError(f"{where}.name must be a non-empty string", field=f"{where}.name", line=line)
        if name in names:
            raise ConfigParseError(f"duplicate scenario name {name!r}", field=f"{where}.name", line=line)
        names.add(name)
        task = sc["task"]
        if task not in TASKS:
            raise ConfigParseError(f"{where}.task {task!r} is not one of {TASKS}", field=f"{where}.task",
                                   line=_line_of(text, "task", after=line) or line)
        fam = sc["family"]
        if not isinstance(fam, dict) or "kind" not in fam:
            raise ConfigParseError(f"{where}.family must be a table with a 'kind'", field=f"{where}.family",
                                   line=line)
        params = sc.get("params", {})
        if not isinstance(params, dict):
            raise ConfigParseError(f"{where}.params must be a table", field=f"{where}.params", line=line)
        params = dict(params)
        params.setdefault("seed", seed)
        for key, val in params.items():
            fld = f"{where}.params.{key}"
            if key in _INTEGER and (not isinstance(val, int) or isinstance(val, bool)):
                raise ConfigParseError(f"{fld} must be an integer", field=fld,
                                       line=_line_of(text, key, after=line))
            if key in _POSITIVE:
                if not isinstance(val, (int, float)) or isinstance(val, bool) or not val > 0:
                    raise ConfigParseError(f"{fld} must be a positive number, got {val!r}", field=fld,
                                           line=_line_of(text, key, after=line))
        if task in _NEEDS_TWO_PARAMS and fam.get("kind") in ("rotating2d", "breathing2d",
                                                             "overlap_pair_symmetric", "overlap_pair_pinned"):
            raise ConfigParseError(f"{where}: task {task} needs a family with at least two parameters",
                                   field=f"{where}.family.kind",
                                   line=_line_of(text, "kind", after=line) or line)
        ham = sc.get("hamiltonian", {})
        if not isinstance(ham, dict):
            raise ConfigParseError(f"{where}.hamiltonian must be a table", field=f"{where}.hamiltonian",
                                   line=line)
        out = sc.get("output", {})
        if not isinstance(out, dict):
            raise ConfigParseError(f"{where}.output must be a table", field=f"{where}.output", line=line)
        fmt = out.get("format", "json")
        if fmt not in FORMATS:
            raise ConfigParseError(f"{where}.output.format must be one of {FORMATS}",
                                   field=f"{where}.output.format", line=_line_of(text, "format", after=line))
        path = out.get("path")
        if path is not None and not isinstance(path, str):
            raise ConfigParseError(f"{where}.output.path must be a string", field=f"{where}.output.path",
                                   line=line)
        scenarios.append(Scenario(name, task, dict(fam), params, dict(ham), path, fmt, k))
    return RunConfig(scenarios, out_dir, seed)
