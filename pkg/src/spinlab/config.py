"""Run configuration: schema validation, canonical serialization and field builders.

Scalar expressions use a small arithmetic grammar over the coordinates
``x1 .. xm`` (and ``t`` for evolution backgrounds)::

    expr    := term (("+" | "-") term)*
    term    := unary ("*" unary)*
    unary   := ("+" | "-") unary | primary
    primary := NUMBER | "pi" | NAME | FUNC "(" expr ")" | "(" expr ")"
    FUNC    := "sin" | "cos" | "exp"
"""

from __future__ import annotations

import hashlib
import json
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from spinlab.grid import MetricField, field_from_json
from spinlab.metric import signature as form_signature
from spinlab.metric import signature_matrix
from spinlab.spinors import SpinorField


class ConfigError(ValueError):
    """Schema violation in a run configuration."""


# expression language

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|\d+(?:[eE][-+]?\d+)?)|([A-Za-z_][A-Za-z_0-9]*)|(.))")
FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
CONSTANTS = {"pi": np.pi}


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ConfigError(f"cannot tokenize expression at {text[pos:]!r}")
        num, name, op = m.groups()
        if num is not None:
            tokens.append(("num", num))
        elif name is not None:
            tokens.append(("name", name))
        elif op is not None and not op.isspace():
            if op not in "+-*()":
                raise ConfigError(f"unexpected character {op!r} in expression {text!r}")
            tokens.append(("op", op))
        pos = m.end()
    tokens.append(("end", ""))
    return tokens


class _Parser:
    def __init__(self, text: str, variables: tuple[str, ...]):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0
        self.variables = variables

    def peek(self) -> tuple[str, str]:
        return self.tokens[self.pos]

    def take(self, kind: str, value: str | None = None) -> str:
        k, v = self.tokens[self.pos]
        if k != kind or (value is not None and v != value):
            want = value or kind
            raise ConfigError(f"expected {want!r} but found {v or 'end of input'!r} in {self.text!r}")
        self.pos += 1
        return v

    def parse(self):
        node = self.expr()
        self.take("end")
        return node

    def expr(self):
        node = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take("op")
            node = (op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek() == ("op", "*"):
            self.take("op")
            node = ("*", node, self.unary())
        return node

    def unary(self):
        if self.peek() in (("op", "+"), ("op", "-")):
            op = self.take("op")
            inner = self.unary()
            return ("neg", inner) if op == "-" else inner
        return self.primary()

    def primary(self):
        kind, value = self.peek()
        if kind == "num":
            self.take("num")
            return ("const", float(value))
        if kind == "name":
            self.take("name")
            if value in FUNCTIONS:
                self.take("op", "(")
                arg = self.expr()
                self.take("op", ")")
                return ("call", value, arg)
            if value in CONSTANTS:
                return ("const", CONSTANTS[value])
            if value in self.variables:
                return ("var", value)
            raise ConfigError(f"unknown name {value!r} in {self.text!r}; allowed variables are {list(self.variables)}")
        if (kind, value) == ("op", "("):
            self.take("op", "(")
            node = self.expr()
            self.take("op", ")")
            return node
        raise ConfigError(f"unexpected {value or 'end of input'!r} in {self.text!r}")


def parse_expression(text: str, variables: tuple[str, ...]):
    """Parse ``text`` into a small tuple-based syntax tree."""
    if not isinstance(text, str):
        raise ConfigError(f"expression must be a string, got {text!r}")
    return _Parser(text, variables).parse()


def evaluate(node, env: dict[str, np.ndarray]):
    kind = node[0]
    if kind == "const":
        return node[1]
    if kind == "var":
        return env[node[1]]
    if kind == "neg":
        return -evaluate(node[1], env)
    if kind == "call":
        return FUNCTIONS[node[1]](evaluate(node[2], env))
    a, b = evaluate(node[1], env), evaluate(node[2], env)
    if kind == "+":
        return a + b
    if kind == "-":
        return a - b
    return a * b


def expression_variables(text: str, variables: tuple[str, ...]) -> set[str]:
    """Names of the variables that occur in ``text``."""
    found = set()

    def walk(node):
        if node[0] == "var":
            found.add(node[1])
        elif node[0] == "neg":
            walk(node[1])
        elif node[0] == "call":
            walk(node[2])
        elif node[0] in ("+", "-", "*"):
            walk(node[1])
            walk(node[2])

    walk(parse_expression(text, variables))
    return found


def coordinate_names(m: int) -> tuple[str, ...]:
    return tuple(f"x{i + 1}" for i in range(m))


def evaluate_expression(text: str, coords: list[np.ndarray], extra: dict | None = None) -> np.ndarray:
    env = dict(zip(coordinate_names(len(coords)), coords))
    env.update(extra or {})
    node = parse_expression(text, tuple(env))
    shape = np.shape(coords[0]) if coords else ()
    return np.broadcast_to(np.asarray(evaluate(node, env), dtype=float), shape).copy()


# schema

METRIC_KINDS = ("flat", "constant", "conformal", "grid-file")
SPINOR_KINDS = ("zero", "plane-wave", "grid-file")
ONE_FORM_KINDS = ("zero", "constant", "expression", "grid-file")
TOP_LEVEL_KEYS = ("dimension", "signature", "grid", "metric", "twist", "spinors", "potential", "params", "options")


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and np.isfinite(x)


def _check_keys(spec: dict, allowed: tuple[str, ...], where: str) -> None:
    _require(isinstance(spec, dict), f"{where} must be an object")
    extra = sorted(set(spec) - set(allowed))
    _require(not extra, f"unknown keys {extra} in {where}")


def _check_complex_vector(v, where: str) -> None:
    _require(isinstance(v, list) and len(v) > 0, f"{where} must be a non-empty list")
    for entry in v:
        ok = _is_number(entry) or (isinstance(entry, list) and len(entry) == 2 and all(_is_number(e) for e in entry))
        _require(ok, f"{where} entries must be numbers or [re, im] pairs")


def validate_metric_spec(spec: dict, m: int, where: str = "metric") -> dict:
    _check_keys(spec, ("kind", "matrix", "u", "path"), where)
    kind = spec.get("kind")
    _require(kind in METRIC_KINDS, f"{where}.kind must be one of {list(METRIC_KINDS)}")
    if kind == "constant":
        M = spec.get("matrix")
        ok = isinstance(M, list) and len(M) == m and all(isinstance(r, list) and len(r) == m and all(_is_number(e) for e in r) for r in M)
        _require(ok, f"{where}.matrix must be a {m} x {m} numeric matrix")
    elif kind == "conformal":
        _require(isinstance(spec.get("u"), str), f"{where}.u must be an expression string")
    elif kind == "grid-file":
        _require(isinstance(spec.get("path"), str), f"{where}.path must be a string")
    return dict(spec)


def validate_spinor_spec(spec: dict, m: int, where: str) -> dict:
    _check_keys(spec, ("kind", "momentum", "amplitude", "path"), where)
    kind = spec.get("kind")
    _require(kind in SPINOR_KINDS, f"{where}.kind must be one of {list(SPINOR_KINDS)}")
    if kind == "plane-wave":
        k = spec.get("momentum")
        _require(isinstance(k, list) and len(k) == m and all(_is_number(e) for e in k), f"{where}.momentum must have {m} numbers")
        _check_complex_vector(spec.get("amplitude"), f"{where}.amplitude")
    elif kind == "grid-file":
        _require(isinstance(spec.get("path"), str), f"{where}.path must be a string")
    return dict(spec)


def validate_one_form_spec(spec: dict, ncomp: int, where: str) -> dict:
    _check_keys(spec, ("kind", "components", "path"), where)
    kind = spec.get("kind")
    _require(kind in ONE_FORM_KINDS, f"{where}.kind must be one of {list(ONE_FORM_KINDS)}")
    comps = spec.get("components")
    if kind == "constant":
        _require(isinstance(comps, list) and len(comps) == ncomp and all(_is_number(c) for c in comps), f"{where}.components must have {ncomp} numbers")
    elif kind == "expression":
        _require(isinstance(comps, list) and len(comps) == ncomp and all(isinstance(c, str) for c in comps), f"{where}.components must have {ncomp} expression strings")
    elif kind == "grid-file":
        _require(isinstance(spec.get("path"), str), f"{where}.path must be a string")
    return dict(spec)


@dataclass(frozen=True)
class RunConfig:
    grid: tuple[int, ...]
    signature: tuple[int, int]
    metric: dict = field(default_factory=lambda: {"kind": "flat"})
    twist: tuple[float, ...] = ()
    spinors: tuple[dict, ...] = ()
    potential: dict = field(default_factory=lambda: {"kind": "zero"})
    params: dict = field(default_factory=lambda: {"lambda": [], "q": []})
    options: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return len(self.grid)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        _check_keys(data, TOP_LEVEL_KEYS, "config")
        grid = data.get("grid")
        _require(isinstance(grid, list) and len(grid) >= 1 and all(isinstance(n, int) and not isinstance(n, bool) for n in grid), "grid must be a list of integers")
        _require(all(n >= 8 and n % 2 == 0 for n in grid), "grid sizes must be even and at least 8")
        m = data.get("dimension", len(grid))
        _require(m == len(grid), f"dimension {m} does not match grid {grid}")
        sig = data.get("signature", [m, 0])
        _require(isinstance(sig, list) and len(sig) == 2 and all(isinstance(v, int) and v >= 0 for v in sig), "signature must be [r, s]")
        twist = data.get("twist", [0.0] * m)
        _require(isinstance(twist, list) and len(twist) == m and all(_is_number(d) and float(d) in (0.0, 0.5) for d in twist), f"twist must list {m} entries from {{0, 0.5}}")
        options = data.get("options", {})
        _require(isinstance(options, dict), "options must be an object")
        # evolution describes a 1+1 background over a circle grid
        metric_dim = m + 1 if options.get("spacetime", False) else m
        if not options.get("spacetime", False):
            _require(sig[0] + sig[1] == m, f"signature {sig} does not match dimension {m}")
        else:
            _require(sig[0] + sig[1] == m + 1, f"signature {sig} must describe the {m + 1}-dimensional spacetime")
        metric = validate_metric_spec(data.get("metric", {"kind": "flat"}), metric_dim)
        if metric["kind"] == "constant":
            try:
                found = form_signature(np.array(metric["matrix"], dtype=float))
            except Exception as exc:  # degenerate matrix
                raise ConfigError(f"metric.matrix is not a valid form: {exc}") from exc
            _require(list(found) == list(sig), f"metric.matrix has signature {list(found)}, config says {sig}")
        spinors = data.get("spinors", [])
        _require(isinstance(spinors, list), "spinors must be a list")
        spinors = tuple(validate_spinor_spec(s, m, f"spinors[{i}]") for i, s in enumerate(spinors))
        for i, s in enumerate(spinors):
            if s["kind"] == "plane-wave":
                off = np.array(s["momentum"], dtype=float) - np.array(twist, dtype=float)
                _require(bool(np.all(np.abs(off - np.round(off)) < 1e-12)), f"spinors[{i}].momentum is inconsistent with twist {twist}")
        potential = validate_one_form_spec(data.get("potential", {"kind": "zero"}), metric_dim, "potential")
        names = coordinate_names(m) + (("t",) if options.get("spacetime", False) else ())
        if metric["kind"] == "conformal":
            parse_expression(metric["u"], names)
        if potential["kind"] == "expression":
            for c in potential["components"]:
                parse_expression(c, names)
        params = data.get("params", {"lambda": [], "q": []})
        _check_keys(params, ("lambda", "q"), "params")
        lam, q = params.get("lambda", []), params.get("q", [])
        _require(isinstance(lam, list) and isinstance(q, list) and all(_is_number(v) for v in lam + q), "params.lambda and params.q must be numeric lists")
        _require(len(lam) == len(q), "params.lambda and params.q must have equal length")
        return cls(
            grid=tuple(grid),
            signature=(sig[0], sig[1]),
            metric=metric,
            twist=tuple(float(d) for d in twist),
            spinors=spinors,
            potential=potential,
            params={"lambda": [float(v) for v in lam], "q": [float(v) for v in q]},
            options=json.loads(json.dumps(options)),
        )

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "signature": list(self.signature),
            "grid": list(self.grid),
            "metric": json.loads(json.dumps(self.metric)),
            "twist": list(self.twist),
            "spinors": [json.loads(json.dumps(s)) for s in self.spinors],
            "potential": json.loads(json.dumps(self.potential)),
            "params": {"lambda": list(self.params["lambda"]), "q": list(self.params["q"])},
            "options": json.loads(json.dumps(self.options)),
        }

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def load_config(source: str | None) -> RunConfig:
    """Read a config from a file path, or from stdin when ``source`` is ``None`` or ``"-"``."""
    try:
        if source in (None, "-"):
            data = json.load(sys.stdin)
        else:
            with open(source) as fh:
                data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return RunConfig.from_dict(data)


# builders


def complex_vector(v) -> np.ndarray:
    return np.array([complex(e[0], e[1]) if isinstance(e, list) else complex(e) for e in v])


def _read_field(path: str, grid, comps: tuple[int, ...]) -> np.ndarray:
    try:
        with open(Path(path)) as fh:
            fgrid, values = field_from_json(json.load(fh))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise ConfigError(f"cannot read grid file {path!r}: {exc}") from exc
    _require(fgrid.sizes == grid.sizes, f"grid file {path!r} has grid {fgrid.sizes}, expected {grid.sizes}")
    _require(values.shape == grid.shape + comps, f"grid file {path!r} has components {values.shape[grid.m:]}, expected {comps}")
    return values


def metric_values(spec: dict, grid, signature: tuple[int, int], coords=None, extra=None) -> np.ndarray:
    m = sum(signature)
    eta = signature_matrix(*signature)
    shape = grid.shape if coords is None else np.shape(coords[0])
    kind = spec["kind"]
    if kind == "flat":
        return np.broadcast_to(eta, shape + (m, m)).copy()
    if kind == "constant":
        return np.broadcast_to(np.array(spec["matrix"], dtype=float), shape + (m, m)).copy()
    if kind == "conformal":
        u = evaluate_expression(spec["u"], grid.coords() if coords is None else coords, extra)
        return np.exp(2 * u)[..., None, None] * eta
    return _read_field(spec["path"], grid, (m, m)).real


def build_metric(spec: dict, grid, signature: tuple[int, int]):
    return MetricField(grid, metric_values(spec, grid, signature), signature)


def build_spinor(spec: dict, grid, rep, twist):
    kind = spec["kind"]
    if kind == "zero":
        return SpinorField.zeros(grid, rep, twist)
    if kind == "plane-wave":
        v = complex_vector(spec["amplitude"])
        _require(v.shape == (rep.N,), f"plane-wave amplitude needs {rep.N} entries, got {v.shape[0]}")
        return SpinorField.plane_wave(grid, rep, twist, spec["momentum"], v)
    return SpinorField(grid, rep, twist, _read_field(spec["path"], grid, (rep.N,)))


def slice_spinor_values(spec: dict, grid, N: int, twist) -> np.ndarray:
    """Component array for a spinor of an ``N``-dimensional module that need not match the grid dimension."""
    kind = spec["kind"]
    if kind == "zero":
        return np.zeros(grid.shape + (N,), dtype=complex)
    if kind == "plane-wave":
        v = complex_vector(spec["amplitude"])
        _require(v.shape == (N,), f"plane-wave amplitude needs {N} entries, got {v.shape[0]}")
        off = np.array(spec["momentum"], dtype=float) - np.array(twist.delta)
        _require(bool(np.all(np.abs(off - np.round(off)) < 1e-12)), "plane-wave momentum is inconsistent with the twist")
        phase = np.exp(1j * sum(k * x for k, x in zip(spec["momentum"], grid.coords())))
        return phase[..., None] * v
    return _read_field(spec["path"], grid, (N,)).astype(complex)


def build_one_form(spec: dict, grid, ncomp: int) -> np.ndarray:
    kind = spec["kind"]
    if kind == "zero":
        return np.zeros(grid.shape + (ncomp,))
    if kind == "constant":
        return np.broadcast_to(np.array(spec["components"], dtype=float), grid.shape + (ncomp,)).copy()
    if kind == "expression":
        return np.stack([evaluate_expression(c, grid.coords()) for c in spec["components"]], axis=-1)
    return _read_field(spec["path"], grid, (ncomp,)).real
