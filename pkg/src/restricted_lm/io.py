"""CSV ingestion, run configuration files and report serialization."""

from __future__ import annotations

import configparser
import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .errors import ConfigError, IoError, MissingColumn, NonFiniteValue, ParseError

REPORT_COLUMNS = ("method", "group", "metric", "value", "se")


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _read_rows(path):
    """Header and ``(line_number, row)`` pairs; ``#`` comment lines and blank lines skipped."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None
    numbered = [(i, ln) for i, ln in enumerate(lines, 1) if ln.strip() and not ln.lstrip().startswith("#")]
    if not numbered:
        raise ParseError(f"{path} has no header row")
    parsed = list(csv.reader([ln for _, ln in numbered]))
    header = [h.strip() for h in parsed[0]]
    rows = [(numbered[j][0], r) for j, r in enumerate(parsed[1:], 1)]
    return header, rows


def read_table(path, columns=None) -> dict:
    """Numeric columns of a CSV file as float arrays.

    Row numbers in errors are file line numbers (the header is line 1 when
    there are no comment lines).
    """
    header, rows = _read_rows(path)
    columns = list(header) if columns is None else list(columns)
    missing = [c for c in columns if c not in header]
    if missing:
        raise MissingColumn(f"{path}: missing column(s) {', '.join(missing)}; found {', '.join(header)}")
    pos = {c: header.index(c) for c in columns}
    out = {c: np.empty(len(rows)) for c in columns}
    for k, (lineno, r) in enumerate(rows):
        if len(r) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(r)}", row=lineno)
        for c in columns:
            text = r[pos[c]].strip()
            try:
                v = float(text)
            except ValueError:
                raise ParseError(f"cannot parse {text!r} as a number", row=lineno, column=c) from None
            if not math.isfinite(v):
                raise NonFiniteValue(f"non-finite value {text!r}", row=lineno, column=c)
            out[c][k] = v
    return out


def load_csv(path, response: str, design=(), intercept: bool = False, group: str | None = None):
    """Load a regression dataset.

    Parameters
    ----------
    path : str or Path
    response : str
        Response column.
    design : sequence of str
        Design columns, in the order they enter ``X``.
    intercept : bool
        Prepend a column of ones.
    group : str, optional
        Grouping column; when given, a dict ``label -> Dataset`` is returned
        with labels in order of first appearance.
    """
    design = list(design)
    cols = [response] + design + ([group] if group else [])
    tab = read_table(path, cols)
    y = tab[response]
    parts = ([np.ones(y.shape[0])] if intercept else []) + [tab[c] for c in design]
    if not parts:
        raise ConfigError("the design is empty: give design columns or request an intercept")
    X = np.column_stack(parts)
    if group is None:
        return Dataset(y, X)
    labels = tab[group]
    return {lab: Dataset(y[labels == lab], X[labels == lab]) for lab in dict.fromkeys(labels.tolist())}


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, columns: dict) -> None:
    """Write equal-length columns; floats use ``repr`` so a re-read is bit-identical."""
    names = list(columns)
    arrays = [np.asarray(columns[c]) for c in names]
    if len({a.shape[0] for a in arrays}) > 1:
        raise ConfigError("columns must have equal length")
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names)
            for row in zip(*arrays):
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, Path):
        return str(v)
    return v


def dump_json(path, obj) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None


def emit_report(rows, fmt: str, path, config: dict | None = None, seed: int | None = None) -> Path:
    """Serialize ``(method, group, metric, value, se)`` rows as CSV or JSON.

    The JSON form carries the rows plus the resolved config and seed.
    """
    path = Path(path)
    rows = [tuple(r) for r in rows]
    if any(len(r) != len(REPORT_COLUMNS) for r in rows):
        raise ConfigError(f"report rows need {len(REPORT_COLUMNS)} fields")
    if fmt == "csv":
        cols = {c: [r[j] for r in rows] for j, c in enumerate(REPORT_COLUMNS)}
        if not rows:
            cols = {c: np.array([]) for c in REPORT_COLUMNS}
        write_csv(path, cols)
    elif fmt == "json":
        dump_json(path, {"seed": seed, "config": config or {},
                         "rows": [dict(zip(REPORT_COLUMNS, r)) for r in rows]})
    else:
        raise ConfigError(f"unknown report format {fmt!r}")
    return path


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------


def _floats(text: str) -> list:
    return [float(t) for t in text.replace(",", " ").split()]


@dataclass
class RunConfig:
    """Resolved settings for a ``fit`` / ``evaluate`` / ``simulate`` run."""

    seed: int
    model: str = "normal"              # normal | t
    estimator: str = "huber"           # huber | tukey | ls | none
    efficiency: float = 0.95
    data: str | None = None
    response: str = "y"
    design: list = field(default_factory=list)
    intercept: bool = True
    group: str | None = None
    prior_mean: list = field(default_factory=lambda: [0.0])
    prior_var: list = field(default_factory=lambda: [100.0])
    a0: float = 2.0
    b0: float = 1.0
    nu: float = 5.0
    iterations: int = 20000
    burn_in: int = 5000
    thin: int = 5
    proposal: str = "uniform"
    kappa: float | None = None
    coarea: bool = False
    alpha: float = 0.3
    train_fraction: float = 0.5
    splits: int = 10
    K: int = 2
    replicates: int = 1
    sim_a_s: list = field(default_factory=lambda: [5.0])
    sim_c: list = field(default_factory=lambda: [1.0])
    out: str = "out"

    def as_dict(self) -> dict:
        return asdict(self)

    def validate(self, base_dir=None) -> "RunConfig":
        if self.seed is None or int(self.seed) < 0:
            raise ConfigError("a non-negative seed is required")
        if self.data is not None:
            p = Path(self.data)
            if base_dir is not None and not p.is_absolute():
                p = Path(base_dir) / p
            if not p.exists():
                raise ConfigError(f"data file {p} does not exist")
            self.data = str(p)
        if self.model not in ("normal", "t"):
            raise ConfigError(f"unknown model {self.model!r}")
        return self


_SECTIONS = {
    "run": {"seed": int, "model": str, "out": str},
    "estimator": {"estimator": str, "efficiency": float},
    "data": {"data": str, "response": str, "design": str, "intercept": bool, "group": str},
    "prior": {"prior_mean": str, "prior_var": str, "a0": float, "b0": float, "nu": float},
    "chain": {"iterations": int, "burn_in": int, "thin": int, "proposal": str, "kappa": float,
              "coarea": bool},
    "evaluation": {"alpha": float, "train_fraction": float, "splits": int},
    "simulation": {"K": int, "replicates": int, "sim_a_s": str, "sim_c": str},
}
_KEY_ALIASES = {("estimator", "kind"): "estimator", ("data", "path"): "data", ("prior", "mean"): "prior_mean",
                ("prior", "var"): "prior_var", ("simulation", "k"): "K", ("simulation", "a_s"): "sim_a_s",
                ("simulation", "c"): "sim_c"}


def load_config(path, overrides: dict | None = None) -> RunConfig:
    """Read an INI-style run configuration.

    Unknown sections or keys are rejected so that typos do not pass silently.
    ``overrides`` (e.g. a ``--seed`` flag) take precedence over the file.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    vals = {}
    for sec in cp.sections():
        if sec not in _SECTIONS:
            raise ConfigError(f"unknown config section [{sec}]")
        for key, raw in cp.items(sec):
            name = _KEY_ALIASES.get((sec, key), key)
            typ = _SECTIONS[sec].get(name)
            if typ is None:
                raise ConfigError(f"unknown key {key!r} in section [{sec}]")
            try:
                if typ is bool:
                    v = cp.getboolean(sec, key)
                elif name in ("prior_mean", "prior_var", "sim_a_s", "sim_c"):
                    v = _floats(raw)
                elif name == "design":
                    v = [c.strip() for c in raw.split(",") if c.strip()]
                else:
                    v = typ(raw)
            except ValueError as exc:
                raise ConfigError(f"[{sec}] {key}: {exc}") from None
            vals[name] = v
    vals.update({k: v for k, v in (overrides or {}).items() if v is not None})
    if "seed" not in vals:
        raise ConfigError("config must set a seed ([run] seed = ...) or pass --seed")
    try:
        cfg = RunConfig(**vals)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate(base_dir=os.path.dirname(os.path.abspath(path)))
