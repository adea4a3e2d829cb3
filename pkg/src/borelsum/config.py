"""Equation specs from YAML files, the numerical defaults table, and the
config hash stamped on every artifact.

Schema (all keys lower case unless shown)::

    name: canonical                 # optional label
    k: 2
    terms:                          # l = 1..D in order
      - {d: 4, delta: 1, Delta: 1, R: [1]}
      - {d: 3, delta: 2, Delta: 2, R: [1]}
    Q:  [-1, 0, 1]                  # coefficients, constant term first
    Q1: [1]                         # a complex coefficient is a pair [re, im]
    Q2: [1]
    R0: [1]
    grid: {half_width: 10, points: 201}
    norms: {beta: 1, mu: 2, nu: 1, rho: 0.3, eps0: 3.2, T0: 1, K0: 1}
    coeff_series:                   # C_{0,0}, C_{0,1}, ...
      - {builtin: gaussian, amplitude: 0.02}
    forcing_series:                 # F_1, F_2, ...
      - {builtin: sech, amplitude: 0.2, width: 1.5}
      - {values: [...]}             # tabulated on the grid nodes
      - {csv: profile.csv}          # columns m, re[, im]; linear interpolation

Built-in profiles: ``gaussian`` (a exp(-((m-c)/w)^2)), ``sech``
(a / cosh((m-c)/w)) and ``zero``; parameters ``amplitude``, ``width``,
``center``.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
import yaml

from .grid_core import GridFunction, MGrid
from .problem_model import EquationSpec, OperatorTerm, PolynomialSpec, SpecError

# Numerical defaults used by the command line front end.
DEFAULTS = {
    "orders": 16,             # formal recursion depth N
    "sectors": 5,             # number of sectors in the good covering
    "r_T": 1.0,               # outer radius of the time sector
    "kappa_fraction": 0.1,    # where the E_p aperture sits inside its admissible range
    "eps": [0.03, 0.05, 0.1], # eps moduli for solve / sum
    "tol": 1e-10,             # fixed point stopping tolerance (F^d distance)
    "threads": 1,
    "n_t": 5,                 # (t, z) sample grid
    "n_z": 5,
    "z_max": 2.0,
    "flat_n_eps": 6,          # flatness samples |eps| = eps0/2 * ratio^j
    "flat_ratio": 0.89,
    "flat_h_scale": 0.5,      # h'' = h_scale * h'
    "flat_floor_rel": 1e-9,   # differences below this times |u| count as round-off
    "gevrey_n_max": 2,
    "gevrey_h": 0.04,
    "seed": 0,
}


class ConfigError(ValueError):
    """Malformed config; ``field`` is a dotted path, ``line`` 1-based or None."""

    def __init__(self, message: str, field: str = "", line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(f"field '{field}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


# ------------------------------------------------------------ yaml with lines

def _to_python(node, path: str, lines: dict):
    lines[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for kn, vn in node.value:
            key = kn.value
            out[key] = _to_python(vn, f"{path}.{key}" if path else key, lines)
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_to_python(v, f"{path}[{i}]", lines) for i, v in enumerate(node.value)]
    return _scalar(node)


def _scalar(node):
    loader = yaml.SafeLoader("")
    try:
        return loader.construct_object(node, deep=True)
    finally:
        loader.dispose()


def parse_yaml(text: str) -> tuple:
    """(data, lines) where lines maps dotted field paths to source lines."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}",
                          line=mark.line + 1 if mark else None) from None
    lines: dict = {}
    if node is None:
        raise ConfigError("empty config")
    return _to_python(node, "", lines), lines


# ------------------------------------------------------------ builders

class _Reader:
    def __init__(self, data: dict, lines: dict, base: Path):
        self.data = data
        self.lines = lines
        self.base = base

    def err(self, msg: str, field: str):
        # fall back to the nearest parent that has a line
        f = field
        while f and f not in self.lines:
            f = f.rsplit(".", 1)[0] if "." in f else ""
        raise ConfigError(msg, field, self.lines.get(f))

    def get(self, d: dict, key: str, path: str, kind=None, default=...):
        full = f"{path}.{key}" if path else key
        if not isinstance(d, dict):
            self.err("expected a mapping", path)
        if key not in d:
            if default is ...:
                self.err("missing required field", full)
            return default
        v = d[key]
        if kind is int:
            if isinstance(v, bool) or not isinstance(v, int):
                self.err(f"expected an integer, got {v!r}", full)
        elif kind is float:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                self.err(f"expected a number, got {v!r}", full)
            v = float(v)
        return v

    def number(self, v, path: str) -> complex:
        if isinstance(v, bool):
            self.err("expected a number", path)
        if isinstance(v, (int, float)):
            return complex(v)
        if isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) and not isinstance(x, bool)
                                                       for x in v):
            return complex(v[0], v[1])
        self.err(f"expected a real number or a pair [re, im], got {v!r}", path)

    def poly(self, v, path: str) -> PolynomialSpec:
        if not isinstance(v, list) or not v:
            self.err("expected a non-empty coefficient list", path)
        return PolynomialSpec(tuple(self.number(c, f"{path}[{i}]") for i, c in enumerate(v)))

    def profile(self, v, path: str, grid: MGrid) -> GridFunction:
        if not isinstance(v, dict):
            self.err("expected a mapping with 'builtin', 'values' or 'csv'", path)
        keys = [k for k in ("builtin", "values", "csv") if k in v]
        if len(keys) != 1:
            self.err("give exactly one of 'builtin', 'values', 'csv'", path)
        m = grid.nodes
        if keys[0] == "builtin":
            name = v["builtin"]
            a = self.get(v, "amplitude", path, float, 1.0)
            w = self.get(v, "width", path, float, 1.0)
            c = self.get(v, "center", path, float, 0.0)
            if w <= 0:
                self.err("width must be positive", f"{path}.width")
            if name == "gaussian":
                return GridFunction(grid, a * np.exp(-(((m - c) / w) ** 2)))
            if name == "sech":
                return GridFunction(grid, a / np.cosh((m - c) / w))
            if name == "zero":
                return GridFunction.zeros(grid)
            self.err(f"unknown built-in profile {name!r}", f"{path}.builtin")
        if keys[0] == "values":
            vals = v["values"]
            if not isinstance(vals, list) or len(vals) != grid.points:
                self.err(f"expected {grid.points} values (one per grid node)", f"{path}.values")
            return GridFunction(grid, np.array([self.number(x, f"{path}.values[{i}]") for i, x in enumerate(vals)]))
        fname = self.base / str(v["csv"])
        try:
            tab = np.loadtxt(fname, delimiter=",", comments="#", ndmin=2)
        except (OSError, ValueError) as exc:
            self.err(f"cannot read table {fname}: {exc}", f"{path}.csv")
        if tab.shape[1] not in (2, 3) or tab.shape[0] < 2:
            self.err("table needs columns m, re[, im] and at least two rows", f"{path}.csv")
        if np.any(np.diff(tab[:, 0]) <= 0):
            self.err("table m column must be increasing", f"{path}.csv")
        re = np.interp(m, tab[:, 0], tab[:, 1], left=0.0, right=0.0)
        im = np.interp(m, tab[:, 0], tab[:, 2], left=0.0, right=0.0) if tab.shape[1] == 3 else 0.0
        return GridFunction(grid, re + 1j * im)


def spec_from_dict(data: dict, lines: dict | None = None, base: Path | str = ".") -> EquationSpec:
    r = _Reader(data, lines or {}, Path(base))
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping")
    k = r.get(data, "k", "", int)
    if k < 1:
        r.err("k must be >= 1", "k")
    raw_terms = r.get(data, "terms", "")
    if not isinstance(raw_terms, list) or not raw_terms:
        r.err("expected a non-empty list of operator terms", "terms")
    terms = []
    for i, t in enumerate(raw_terms):
        p = f"terms[{i}]"
        try:
            terms.append(OperatorTerm(r.get(t, "d", p, int), r.get(t, "delta", p, int),
                                      r.get(t, "Delta", p, int), r.poly(r.get(t, "R", p), f"{p}.R")))
        except SpecError as exc:
            r.err(str(exc), p)
    g = r.get(data, "grid", "", default={"half_width": 10.0, "points": 201})
    try:
        grid = MGrid(r.get(g, "half_width", "grid", float), r.get(g, "points", "grid", int))
    except ValueError as exc:
        r.err(str(exc), "grid")
    norms = r.get(data, "norms", "", default={})
    kw = {}
    for key, dflt in (("beta", 1.0), ("mu", 2.0), ("nu", 1.0), ("rho", 0.3), ("eps0", 3.2), ("T0", 1.0),
                      ("K0", 1.0)):
        kw[key] = r.get(norms, key, "norms", float, dflt)
        if kw[key] <= 0:
            r.err("must be positive", f"norms.{key}")
    series = {}
    for key in ("coeff_series", "forcing_series"):
        lst = r.get(data, key, "", default=[])
        if not isinstance(lst, list):
            r.err("expected a list of profiles", key)
        series[key] = [r.profile(v, f"{key}[{i}]", grid) for i, v in enumerate(lst)]
    polys = {}
    for key in ("Q", "Q1", "Q2", "R0"):
        polys[key] = r.poly(r.get(data, key, ""), key)
    return EquationSpec(k=k, terms=terms, grid=grid, name=str(data.get("name", "spec")), **polys, **series, **kw)


def load_spec(path: str | Path) -> EquationSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    data, lines = parse_yaml(text)
    return spec_from_dict(data, lines, path.parent)


def config_hash(path: str | Path | None = None, extra: dict | None = None) -> str:
    """Short sha256 of the parsed config (canonical JSON) plus run parameters."""
    payload = {}
    if path is not None:
        data, _ = parse_yaml(Path(path).read_text())
        payload["spec"] = data
    payload["run"] = extra or {}
    blob = json.dumps(payload, sort_keys=True, default=repr).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
