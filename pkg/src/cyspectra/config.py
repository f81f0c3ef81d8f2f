"""Experiment configuration files.

A config is a TOML document naming one or more experiments, each with a
table of parameters under the experiment's name::

    experiment = "gap"

    [gap]
    ell = 1.0
    theta0 = "pi/3"

    [output]
    dir = "results/gap"

Real-valued parameters accept arithmetic strings over ``pi``, ``e`` and
``sqrt``/``sin``/``cos``/``tan``/``log``/``exp``.
"""
from __future__ import annotations

import ast
import math
import operator
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import tomli


class ConfigError(ValueError):
    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None,
                 field_name: Optional[str] = None):
        where = path or "<config>"
        if line is not None:
            where += f":{line}"
        if field_name:
            where += f" [{field_name}]"
        super().__init__(f"{where}: {message}")
        self.path, self.line, self.field_name = path, line, field_name


_NAMES = {"pi": math.pi, "e": math.e}
_FUNCS = {"sqrt": math.sqrt, "sin": math.sin, "cos": math.cos, "tan": math.tan,
          "log": math.log, "exp": math.exp}
_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def eval_expr(text: str) -> float:
    """Evaluate a small arithmetic expression without ``eval``."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords):
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ValueError(f"unsupported expression element {ast.dump(node)[:40]}")

    try:
        return float(ev(ast.parse(text.strip(), mode="eval")))
    except (SyntaxError, ValueError, ZeroDivisionError, OverflowError) as exc:
        raise ValueError(f"cannot evaluate {text!r}: {exc}") from exc


@dataclass(frozen=True)
class Param:
    kind: str  # real | int | bool | str | reals | ints
    default: Any = None
    required: bool = False
    choices: Optional[tuple] = None


@dataclass
class ExperimentConfig:
    experiments: List[str]
    params: Dict[str, dict]
    output_dir: Path
    path: Optional[Path] = None


def _line_of(text: str, table: Optional[str], key: str) -> Optional[int]:
    lines = text.splitlines()
    start = 0
    if table:
        for i, ln in enumerate(lines):
            if re.match(rf"\s*\[\s*{re.escape(table)}\s*\]", ln):
                start = i + 1
                break
    for i in range(start, len(lines)):
        if table and i > start and re.match(r"\s*\[", lines[i]):
            break
        if re.match(rf"\s*{re.escape(key)}\s*=", lines[i]):
            return i + 1
        if not table and re.match(rf"\s*\[\s*{re.escape(key)}\s*\]", lines[i]):
            return i + 1
    return None


def coerce(value, spec: Param):
    k = spec.kind
    if k == "real":
        if isinstance(value, bool):
            raise ValueError("expected a real number")
        if isinstance(value, (int, float)):
            return float(value)
        if isinstance(value, str):
            return eval_expr(value)
        raise ValueError("expected a real number or expression string")
    if k == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValueError("expected an integer")
        return int(value)
    if k == "bool":
        if not isinstance(value, bool):
            raise ValueError("expected true or false")
        return value
    if k == "str":
        if not isinstance(value, str):
            raise ValueError("expected a string")
        if spec.choices and value not in spec.choices:
            raise ValueError(f"expected one of {', '.join(spec.choices)}")
        return value
    if k in ("reals", "ints"):
        if not isinstance(value, list) or not value:
            raise ValueError("expected a non-empty list")
        inner = Param("real" if k == "reals" else "int")
        return [coerce(v, inner) for v in value]
    if k == "strs":
        if not isinstance(value, list):
            raise ValueError("expected a list of strings")
        out = [coerce(v, Param("str", choices=spec.choices)) for v in value]
        return out
    raise ValueError(f"unknown parameter kind {k}")


def parse_config(text: str, schemas: Dict[str, Dict[str, Param]], path: Optional[str] = None,
                 default_out: str = "results") -> ExperimentConfig:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"TOML syntax error: {exc}", path, int(m.group(1)) if m else None) from exc

    if "experiment" not in doc:
        raise ConfigError("missing top-level key 'experiment'", path, None, "experiment")
    names = doc["experiment"]
    names = [names] if isinstance(names, str) else names
    if not isinstance(names, list) or not names or not all(isinstance(n, str) for n in names):
        raise ConfigError("'experiment' must be a name or a list of names", path,
                          _line_of(text, None, "experiment"), "experiment")
    allowed_tables = set(names) | {"experiment", "output"}
    for key in doc:
        if key not in allowed_tables:
            raise ConfigError(f"unexpected key or table '{key}'", path, _line_of(text, None, key), key)

    params = {}
    for name in names:
        if name not in schemas:
            raise ConfigError(f"unknown experiment '{name}' (known: {', '.join(sorted(schemas))})",
                              path, _line_of(text, None, "experiment"), "experiment")
        table = doc.get(name, {})
        if not isinstance(table, dict):
            raise ConfigError(f"'{name}' must be a table", path, _line_of(text, None, name), name)
        schema = schemas[name]
        for key in table:
            if key not in schema:
                raise ConfigError(f"unknown parameter (known: {', '.join(sorted(schema))})",
                                  path, _line_of(text, name, key), f"{name}.{key}")
        resolved = {}
        for key, spec in schema.items():
            if key in table:
                try:
                    resolved[key] = coerce(table[key], spec)
                except ValueError as exc:
                    raise ConfigError(str(exc), path, _line_of(text, name, key), f"{name}.{key}") from exc
            elif spec.required:
                raise ConfigError("required parameter missing", path, _line_of(text, None, name),
                                  f"{name}.{key}")
            else:
                resolved[key] = spec.default
        params[name] = resolved

    out = doc.get("output", {})
    if not isinstance(out, dict):
        raise ConfigError("'output' must be a table", path, _line_of(text, None, "output"), "output")
    extra = sorted(set(out) - {"dir"})
    if extra:
        raise ConfigError("[output] accepts only 'dir'", path, _line_of(text, "output", extra[0]),
                          f"output.{extra[0]}")
    out_dir = out.get("dir", default_out)
    if not isinstance(out_dir, str):
        raise ConfigError("expected a string", path, _line_of(text, "output", "dir"), "output.dir")
    return ExperimentConfig(names, params, Path(out_dir), Path(path) if path else None)


def load_config(path, schemas) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(p)) from exc
    return parse_config(text, schemas, str(p))
