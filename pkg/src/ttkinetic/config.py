"""Run configuration files: INI-style sections of ``key = value`` lines.

Numbers may be written as arithmetic expressions over literals and ``pi``
(``1/32``, ``4*pi``, ``1e-5``); vectors are comma separated.  Unknown
sections or keys are errors, so typos never fall back to defaults silently.
See README for the full grammar.
"""

from __future__ import annotations

import ast
import configparser
import math
import operator
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

from .models import ModelConfig

__all__ = ["ConfigError", "RunConfig", "ConvergenceSpec", "load_config", "parse_config", "parse_number"]


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def parse_number(text: str) -> float:
    """Evaluate a numeric literal expression (``+ - * / **``, parentheses, ``pi``)."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return node.value
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        raise ConfigError(f"not a number: {text!r}")

    try:
        value = ev(ast.parse(text.strip(), mode="eval"))
    except (SyntaxError, ZeroDivisionError, OverflowError) as exc:
        raise ConfigError(f"not a number: {text!r} ({exc})") from None
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"not a finite number: {text!r}")
    return value


def _int(text: str) -> int:
    v = parse_number(text)
    if v != int(v):
        raise ConfigError(f"expected an integer, got {text!r}")
    return int(v)


def _vector(text: str) -> Tuple[float, ...]:
    return tuple(parse_number(p) for p in text.split(",") if p.strip())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


@dataclass
class ConvergenceSpec:
    """Refinement ladder over ``dt`` or ``n_v``."""

    parameter: str
    values: Tuple[float, ...]


@dataclass
class RunConfig:
    model: ModelConfig
    output_dir: Optional[str] = None
    cadence: int = 1
    energy: bool = True
    ranks: bool = True
    moments: bool = True
    error: bool = True
    snapshots: bool = False
    phase: bool = False
    field_times: Tuple[float, ...] = ()
    delta: float = 1e-5
    fit_window: Tuple[float, float] = (5.0, 35.0)
    seed: int = 0
    threads: int = 1
    convergence: Optional[ConvergenceSpec] = None

    def __post_init__(self):
        if self.cadence < 1:
            raise ConfigError("cadence must be >= 1")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")


# key -> (ModelConfig field, converter)
_MODEL_KEYS = {
    "model": {"name": ("model", str.strip), "eta": ("eta", parse_number), "scheme": ("scheme", str.strip),
              "rank": ("rank", lambda s: tuple(_int(p) for p in s.split(",")))},
    "velocity": {"v_min": ("v_min", parse_number), "v_max": ("v_max", parse_number), "n_v": ("n_v", _int)},
    "space": {"length": ("length", parse_number), "n_x": ("n_x", _int)},
    "time": {"t_final": ("t_final", parse_number), "dt": ("dt", parse_number), "dt_rule": ("dt_rule", str.strip),
             "cfl_safety": ("cfl_safety", parse_number), "collision_number": ("collision_number", parse_number)},
}
_OUTPUT_KEYS = {
    "directory": ("output_dir", str.strip), "cadence": ("cadence", _int), "energy": ("energy", _bool),
    "ranks": ("ranks", _bool), "moments": ("moments", _bool), "error": ("error", _bool),
    "snapshots": ("snapshots", _bool), "phase": ("phase", _bool), "field_times": ("field_times", _vector), "delta": ("delta", parse_number),
    "fit_window": ("fit_window", _vector), "seed": ("seed", _int), "threads": ("threads", _int),
}
_IC_STRING_KEYS = {"kind"}


def _ic_value(key: str, text: str):
    if key in _IC_STRING_KEYS:
        return text.strip()
    vec = _vector(text)
    return vec[0] if len(vec) == 1 else vec


def parse_config(text: str) -> RunConfig:
    """Parse configuration text; raises :class:`ConfigError` on any problem."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"syntax error: {exc}".replace("\n", " ")) from None
    allowed = set(_MODEL_KEYS) | {"initial", "output", "convergence"}
    for sec in cp.sections():
        if sec not in allowed:
            raise ConfigError(f"unknown section [{sec}]")
    if not cp.has_section("model") or "name" not in cp["model"]:
        raise ConfigError("missing [model] name")

    kwargs, run_kw, ic = {}, {}, {}
    try:
        for sec, keys in _MODEL_KEYS.items():
            if not cp.has_section(sec):
                continue
            for k, v in cp[sec].items():
                if k not in keys:
                    raise ConfigError(f"unknown key {k!r} in [{sec}]")
                name, conv = keys[k]
                kwargs[name] = conv(v)
        if cp.has_section("initial"):
            for k, v in cp["initial"].items():
                ic[k] = _ic_value(k, v)
        if cp.has_section("output"):
            for k, v in cp["output"].items():
                if k not in _OUTPUT_KEYS:
                    raise ConfigError(f"unknown key {k!r} in [output]")
                name, conv = _OUTPUT_KEYS[k]
                run_kw[name] = conv(v)
        if "fit_window" in run_kw and len(run_kw["fit_window"]) != 2:
            raise ConfigError("fit_window needs two numbers")
        if cp.has_section("convergence"):
            sec = cp["convergence"]
            extra = set(sec) - {"parameter", "values"}
            if extra:
                raise ConfigError(f"unknown key(s) {sorted(extra)} in [convergence]")
            param = sec.get("parameter", "dt").strip()
            if param not in ("dt", "n_v"):
                raise ConfigError(f"convergence parameter must be 'dt' or 'n_v', got {param!r}")
            values = _vector(sec.get("values", ""))
            if len(values) < 2:
                raise ConfigError("convergence needs at least two values")
            run_kw["convergence"] = ConvergenceSpec(param, values)
        model = ModelConfig(ic=ic, **kwargs)
        return RunConfig(model=model, **run_kw)
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)
