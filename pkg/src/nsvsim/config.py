"""Run configuration: a UTF-8 key-value document with dotted section paths.

Grammar, line by line: blank lines and `#` comments are skipped; everything
else must be `path = value` where `path` is identifiers joined by dots
(`grid.n_x = 64`).  Values are typed by the schema below: integers, floats
(`repr` precision survives a round trip), booleans `true`/`false`, or bare
words for enumerated choices.  Unknown keys and out-of-range values are hard
errors naming the offending path; the only required key is `time.t_end`.

`render_config` writes the canonical form (schema order, one key per line),
so `render(parse(text))` normalizes any accepted document and
`parse_config(render_config(cfg))` reproduces `cfg` exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable

from .coupling import PicardConfig

TAU = 2.0 * math.pi


class ConfigError(ValueError):
    """Malformed document, unknown key, or out-of-range value."""


@dataclass(frozen=True)
class RunConfig:
    n_x: int = 32
    length: float = TAU
    n_v: int = 32
    v_max: float = 6.0
    t_end: float = 0.0
    window: float = 0.01
    tol: float = 1e-10
    max_iter: int = 12
    quadrature_nodes: int = 5
    sweep: str = "jacobi"
    char_substep: float = 0.0
    generator: str = "composite"
    fluid: str = "taylor_green"
    kinetic: str = "maxwellian_bump"
    amplitude: float = 1.0
    bump_amplitude: float = 0.08
    bump_width: float = 1.2
    sigma: float = 1.2
    mean_velocity_x: float = 0.4
    mean_velocity_y: float = 0.2
    directory: str = "out"
    cadence: int = 1
    snapshot_final: bool = True
    snapshot_every: int = 0
    seed: int = 0

    def picard(self) -> PicardConfig:
        return PicardConfig(
            window=self.window,
            tol=self.tol,
            max_iter=self.max_iter,
            quadrature_nodes=self.quadrature_nodes,
            sweep=self.sweep,
            char_substep=self.char_substep if self.char_substep > 0.0 else None,
        )


_REQUIRED = object()


def _check(cond: Callable[[Any], bool], expect: str) -> Callable[[str, Any], None]:
    def run(path: str, value: Any) -> None:
        if not cond(value):
            raise ConfigError(f"{path} must be {expect}, got {value!r}")

    return run


def _enum(*choices: str) -> Callable[[str, Any], None]:
    def run(path: str, value: Any) -> None:
        if value not in choices:
            raise ConfigError(f"{path} must be one of {', '.join(choices)}, got {value!r}")

    return run


def _finite(path: str, value: Any) -> None:
    if not math.isfinite(value):
        raise ConfigError(f"{path} must be finite, got {value!r}")


FLUID_GENERATORS = ("taylor_green_fluid", "zero_fluid")
KINETIC_GENERATORS = ("maxwellian_bump", "zero_kinetic")


def _valid_generator(path: str, value: Any) -> None:
    """`composite`, or `+`-joined atomic names with at most one per half.

    A missing half means that half is zero, so `maxwellian_bump` alone is a
    quiescent fluid carrying a particle bump.
    """
    if value == "composite":
        return
    parts = value.split("+")
    known = set(FLUID_GENERATORS) | set(KINETIC_GENERATORS)
    bad = [p for p in parts if p not in known]
    if bad or not parts:
        raise ConfigError(
            f"{path}: unknown generator {bad[0]!r}; expected 'composite' or '+'-joined "
            f"names from {', '.join(sorted(known))}"
        )
    if len(parts) != len(set(parts)):
        raise ConfigError(f"{path}: generator names may appear once each, got {value!r}")
    if sum(p in FLUID_GENERATORS for p in parts) > 1:
        raise ConfigError(f"{path}: at most one fluid generator, got {value!r}")
    if sum(p in KINETIC_GENERATORS for p in parts) > 1:
        raise ConfigError(f"{path}: at most one kinetic generator, got {value!r}")


# path -> (attribute, type, default, validator)
SCHEMA: dict[str, tuple[str, type, Any, Callable[[str, Any], None]]] = {
    "grid.n_x": ("n_x", int, 32, _check(lambda v: v >= 8 and v % 2 == 0, "even and >= 8")),
    "grid.length": ("length", float, TAU, _check(lambda v: v > 0.0, "positive")),
    "kinetic.n_v": ("n_v", int, 32, _check(lambda v: v >= 8, ">= 8")),
    "kinetic.v_max": ("v_max", float, 6.0, _check(lambda v: v > 0.0, "positive")),
    "time.t_end": ("t_end", float, _REQUIRED, _check(lambda v: v > 0.0, "positive")),
    "time.window": ("window", float, 0.01, _check(lambda v: v > 0.0, "positive")),
    "picard.tol": ("tol", float, 1e-10, _check(lambda v: v > 0.0, "positive")),
    "picard.max_iter": ("max_iter", int, 12, _check(lambda v: 1 <= v <= 200, "in 1..200")),
    "picard.quadrature_nodes": (
        "quadrature_nodes",
        int,
        5,
        _check(lambda v: 2 <= v <= 12, "in 2..12"),
    ),
    "picard.sweep": ("sweep", str, "jacobi", _enum("jacobi", "gauss_seidel")),
    "picard.char_substep": (
        "char_substep",
        float,
        0.0,
        _check(lambda v: v >= 0.0, ">= 0 (0 selects the per-window default)"),
    ),
    "initial_data.generator": ("generator", str, "composite", _valid_generator),
    "initial_data.fluid": ("fluid", str, "taylor_green", _enum("taylor_green", "zero")),
    "initial_data.kinetic": ("kinetic", str, "maxwellian_bump", _enum("maxwellian_bump", "zero")),
    "initial_data.amplitude": ("amplitude", float, 1.0, _finite),
    "initial_data.bump_amplitude": (
        "bump_amplitude",
        float,
        0.08,
        _check(lambda v: v >= 0.0 and math.isfinite(v), "finite and >= 0"),
    ),
    "initial_data.bump_width": (
        "bump_width",
        float,
        1.2,
        _check(lambda v: v > 0.0, "positive"),
    ),
    "initial_data.sigma": ("sigma", float, 1.2, _check(lambda v: v > 0.0, "positive")),
    "initial_data.mean_velocity_x": ("mean_velocity_x", float, 0.4, _finite),
    "initial_data.mean_velocity_y": ("mean_velocity_y", float, 0.2, _finite),
    "output.directory": ("directory", str, "out", lambda p, v: None),
    "output.cadence": ("cadence", int, 1, _check(lambda v: v >= 1, ">= 1")),
    "output.snapshot_final": ("snapshot_final", bool, True, lambda p, v: None),
    "output.snapshot_every": (
        "snapshot_every",
        int,
        0,
        _check(lambda v: v >= 0, ">= 0 (0 disables periodic snapshots)"),
    ),
    "seed": ("seed", int, 0, _check(lambda v: v >= 0, ">= 0")),
}

def _parse_value(path: str, kind: type, text: str) -> Any:
    if kind is bool:
        if text == "true":
            return True
        if text == "false":
            return False
        raise ConfigError(f"{path} must be true or false, got {text!r}")
    if kind is int:
        try:
            return int(text, 10)
        except ValueError:
            raise ConfigError(f"{path} must be an integer, got {text!r}") from None
    if kind is float:
        try:
            value = float(text)
        except ValueError:
            raise ConfigError(f"{path} must be a number, got {text!r}") from None
        return value
    return text


def parse_config(text: str) -> RunConfig:
    seen: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        path, _, value_text = line.partition("=")
        path = path.strip()
        value_text = value_text.strip()
        if path not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key '{path}'")
        if path in seen:
            raise ConfigError(f"line {lineno}: duplicate key '{path}'")
        if not value_text:
            raise ConfigError(f"line {lineno}: empty value for '{path}'")
        attr, kind, _, validate = SCHEMA[path]
        value = _parse_value(path, kind, value_text)
        validate(path, value)
        seen[path] = value

    values: dict[str, Any] = {}
    for path, (attr, _, default, _) in SCHEMA.items():
        if path in seen:
            values[attr] = seen[path]
        elif default is _REQUIRED:
            raise ConfigError(f"missing required key '{path}'")
        else:
            values[attr] = default
    return RunConfig(**values)


def _render_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_config(cfg: RunConfig) -> str:
    lines = []
    for path, (attr, _, _, _) in SCHEMA.items():
        lines.append(f"{path} = {_render_value(getattr(cfg, attr))}")
    return "\n".join(lines) + "\n"


def normalize_config(text: str) -> str:
    return render_config(parse_config(text))


def validate_config(cfg: RunConfig) -> None:
    """Re-run every schema check on an already-built RunConfig."""
    for path, (attr, kind, _, validate) in SCHEMA.items():
        value = getattr(cfg, attr)
        if kind is float and isinstance(value, int):
            value = float(value)
        if not isinstance(value, kind):
            raise ConfigError(f"{path} must be {kind.__name__}, got {type(value).__name__}")
        validate(path, value)
