"""Experiment configuration: flat `key = value` files with namespaced keys.

    # comment
    preset = desk
    physics.beta = 397.89
    physics.s = 0.127
    sweep.axis = s
    sweep.values = 0, 0.05, 0.1

Numeric values may be simple arithmetic expressions in `pi`, e.g. `160*pi`.
"""
from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .grid import PotentialSpec, build_grid, points_for_resolution

PAPER_L_A = 160 * math.pi


class ConfigError(ValueError):
    pass


_OPS = {
    ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
    ast.Div: operator.truediv, ast.Pow: operator.pow, ast.USub: operator.neg, ast.UAdd: operator.pos,
}


def parse_number(text: str) -> float:
    """Evaluate a numeric literal or arithmetic expression in `pi`."""
    def ev(node):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ConfigError(f"not a number: {text!r}")
    try:
        return float(ev(ast.parse(text.strip(), mode="eval").body))
    except SyntaxError as exc:
        raise ConfigError(f"not a number: {text!r}") from exc


def parse_list(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    return tuple(parse_number(part) for part in text.split(","))


def parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    # geometry
    L_A: float = 160 * math.pi
    L: float = 10 * math.pi
    L_B: float = 326 * math.pi
    wall_height: float = 500.0
    wall_width: float = 2.0
    padding: float = 4.0
    # physics
    beta: float = 397.89
    s: float = 0.127
    v: float = 0.0
    # numerics
    num_points: int = 0  # 0: derived from points_per_period
    points_per_period: int = 16
    dt: float = 5e-3
    t_end: float = 1500.0
    imag_dt: float = 1e-2
    imag_tol: float = 1e-10
    imag_max_iter: int = 1_000_000
    observer_stride: int = 100
    # probes
    probe_positions: tuple = ()  # empty: lattice entrance and exit
    snapshot_times: tuple = ()
    # plateau detection (0 means default rule)
    plateau_window: float = 0.0
    plateau_threshold: float = 0.0
    # sweep
    sweep_axis: str = ""
    sweep_values: tuple = ()
    workers: int = 0
    # output
    out_dir: str = "out"
    write_snapshots: bool = True

    def validate(self) -> "ExperimentConfig":
        if min(self.L_A, self.L, self.L_B) <= 0:
            raise ConfigError("geometry lengths must be positive")
        if self.wall_height <= 0 or self.wall_width <= 0:
            raise ConfigError("wall parameters must be positive")
        if self.padding < self.wall_width:
            raise ConfigError("padding must be at least the wall width")
        if self.beta < 0:
            raise ConfigError("physics.beta must be non-negative")
        if self.s < 0:
            raise ConfigError("physics.s must be non-negative")
        if self.dt <= 0 or self.t_end < 0 or (self.t_end > 0 and self.dt > self.t_end):
            raise ConfigError("need 0 < numerics.dt <= numerics.t_end")
        if self.imag_dt <= 0 or self.imag_tol <= 0 or self.imag_max_iter < 1:
            raise ConfigError("imaginary-time settings must be positive")
        if self.num_points and (self.num_points < 16 or self.num_points & (self.num_points - 1)):
            raise ConfigError("numerics.num_points must be a power of two >= 16")
        if self.points_per_period < 4:
            raise ConfigError("numerics.points_per_period must be >= 4")
        if self.observer_stride < 1:
            raise ConfigError("numerics.observer_stride must be >= 1")
        if any(t < 0 or t > self.t_end for t in self.snapshot_times):
            raise ConfigError("probes.snapshot_times must lie in [0, t_end]")
        if self.sweep_axis and self.sweep_axis not in ("s", "v", "beta"):
            raise ConfigError(f"sweep.axis must be one of s, v, beta; got {self.sweep_axis!r}")
        if self.sweep_axis and not self.sweep_values:
            raise ConfigError("sweep.values is empty")
        return self

    # derived objects

    def potential_spec(self, shutter_closed: bool = False) -> PotentialSpec:
        return PotentialSpec(self.L_A, self.L, self.L_B, self.s, self.v,
                             self.wall_height, self.wall_width, shutter_closed)

    def grid(self):
        z_min = -self.L_A - self.padding
        z_max = self.L + self.L_B + self.padding
        n = self.num_points or points_for_resolution(z_max - z_min, self.points_per_period)
        return build_grid(z_min, z_max, n)

    @property
    def probes(self) -> tuple:
        return self.probe_positions or (0.0, self.L)

    def with_value(self, axis: str, value: float) -> "ExperimentConfig":
        return replace(self, **{axis: float(value)})


# key in file -> (field name, parser)
KEYS = {
    "geometry.L_A": ("L_A", parse_number),
    "geometry.L": ("L", parse_number),
    "geometry.L_B": ("L_B", parse_number),
    "geometry.wall_height": ("wall_height", parse_number),
    "geometry.wall_width": ("wall_width", parse_number),
    "geometry.padding": ("padding", parse_number),
    "physics.beta": ("beta", parse_number),
    "physics.s": ("s", parse_number),
    "physics.v": ("v", parse_number),
    "numerics.num_points": ("num_points", lambda x: int(parse_number(x))),
    "numerics.points_per_period": ("points_per_period", lambda x: int(parse_number(x))),
    "numerics.dt": ("dt", parse_number),
    "numerics.t_end": ("t_end", parse_number),
    "numerics.imag_dt": ("imag_dt", parse_number),
    "numerics.imag_tol": ("imag_tol", parse_number),
    "numerics.imag_max_iter": ("imag_max_iter", lambda x: int(parse_number(x))),
    "numerics.observer_stride": ("observer_stride", lambda x: int(parse_number(x))),
    "probes.currents": ("probe_positions", parse_list),
    "probes.snapshot_times": ("snapshot_times", parse_list),
    "plateau.window": ("plateau_window", parse_number),
    "plateau.threshold": ("plateau_threshold", parse_number),
    "sweep.axis": ("sweep_axis", str.strip),
    "sweep.values": ("sweep_values", parse_list),
    "sweep.workers": ("workers", lambda x: int(parse_number(x))),
    "output.dir": ("out_dir", str.strip),
    "output.snapshots": ("write_snapshots", parse_bool),
}

PRESETS = {
    "paper": dict(L_A=160 * math.pi, L=10 * math.pi, L_B=326 * math.pi, beta=397.89,
                  points_per_period=32),
    # full geometry on the standard grid; shorter reservoirs drain before a
    # plateau can form
    "desk": dict(L_A=160 * math.pi, L=10 * math.pi, L_B=326 * math.pi,
                 beta=397.89, points_per_period=16),
}


def preset(name: str) -> ExperimentConfig:
    try:
        return ExperimentConfig(**PRESETS[name])
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def parse_lines(lines, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Apply `key = value` lines on top of `base` (or the preset named in the lines)."""
    pairs = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        pairs.append((lineno, key, value))

    config = base if base is not None else ExperimentConfig()
    for lineno, key, value in pairs:
        if key == "preset":
            config = preset(value)
    changes = {}
    mu_tf = None
    for lineno, key, value in pairs:
        if key == "preset":
            continue
        if key == "physics.mu_tf":
            mu_tf = parse_number(value)
            continue
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        name, parser = KEYS[key]
        try:
            changes[name] = parser(value)
        except (ConfigError, ValueError) as exc:
            raise ConfigError(f"line {lineno}: {key}: {exc}") from None
    config = replace(config, **changes)
    if mu_tf is not None:
        # Thomas-Fermi box: mu = beta / L_A
        config = replace(config, beta=mu_tf * config.L_A)
    return config.validate()


def load_config(path=None, overrides=(), base: ExperimentConfig | None = None) -> ExperimentConfig:
    lines = []
    if path is not None:
        try:
            lines = Path(path).read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must be key=value, got {item!r}")
        lines.append(item)
    return parse_lines(lines, base)


def dump_config(config: ExperimentConfig) -> str:
    inverse = {name: key for key, (name, _) in KEYS.items()}
    out = []
    for f in fields(config):
        value = getattr(config, f.name)
        if isinstance(value, tuple):
            text = ", ".join(repr(float(x)) for x in value)
        elif isinstance(value, float):
            text = repr(value)
        elif isinstance(value, bool):
            text = "true" if value else "false"
        else:
            text = str(value)
        out.append(f"{inverse[f.name]} = {text}")
    return "\n".join(out) + "\n"
