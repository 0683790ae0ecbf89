"""Run configuration: a line-oriented ``key = value`` document.

Grammar::

    document := line*
    line     := blank | comment | key "=" value [comment]
    comment  := "#" anything
    key      := section "." name        (e.g. grid.n, model.p, solver.tol)

Only ``solver.*`` keys, ``model.q``, ``model.gamma_scale``, ``output.dir`` and
``check.level`` have defaults.  Unknown or repeated keys are errors.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, fields

from .field_core import GridSpec
from .material import KINDS, NonlinearityModel, WeightSpec
from .solver import INIT_KINDS, METRICS, SolverConfig

CHECK_LEVELS = ("quick", "full")
REQUIRED = ("grid.n", "grid.l", "model.kind", "model.p", "model.alpha")


class ConfigError(ValueError):
    """Parse or validation failure; ``line`` is 1-based when it applies."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


# -- value converters ----------------------------------------------------------

def _float(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise ValueError(f"expected a finite number, got {text!r}")
    return v


def _int(text: str) -> int:
    return int(text, 10)


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(f"expected true or false, got {text!r}")


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(_float(t.strip()) for t in text.split(",") if t.strip())


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(_int(t.strip()) for t in text.split(",") if t.strip())


def _choice(options):
    def conv(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}; got {text!r}")
        return text

    return conv


def _str(text: str) -> str:
    if not text:
        raise ValueError("empty value")
    return text


KEYS = {
    "grid.n": _int,
    "grid.l": _float,
    "model.kind": _choice(KINDS),
    "model.p": _float,
    "model.q": _float,
    "model.alpha": _float,
    "model.gamma_scale": _float,
    "model.table_s": _float_list,
    "model.table_f": _float_list,
    "solver.max_iters": _int,
    "solver.tol": _float,
    "solver.step0": _float,
    "solver.backtrack": _float,
    "solver.armijo": _float,
    "solver.seed": _int,
    "solver.init": _choice(INIT_KINDS),
    "solver.init_file": _str,
    "solver.metric": _choice(METRICS),
    "solver.inner_tol": _float,
    "solver.inner_max_iters": _int,
    "solver.noise": _float,
    "solver.normalize_init": _bool,
    "solver.stall_window": _int,
    "solver.seeds": _int_list,
    "solver.workers": _int,
    "output.dir": _str,
    "check.level": _choice(CHECK_LEVELS),
}

# solver.* keys that are not SolverConfig fields
_RUN_SOLVER_KEYS = ("seeds", "workers")


@dataclass(frozen=True)
class RunConfig:
    grid: GridSpec
    model: NonlinearityModel
    solver: SolverConfig
    output_dir: str = "output"
    check_level: str = "quick"
    seeds: tuple[int, ...] = ()
    workers: int = 1
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def echo(self) -> str:
        """Canonical ``key = value`` text; parsing it gives back an equal config."""
        m = self.model
        out = [
            f"grid.n = {self.grid.n}",
            f"grid.l = {self.grid.l!r}",
            f"model.kind = {m.kind}",
            f"model.p = {m.p!r}",
            f"model.q = {m.q!r}",
            f"model.alpha = {m.weight.alpha!r}",
            f"model.gamma_scale = {m.weight.scale!r}",
        ]
        if m.kind == "custom_monotone":
            out.append("model.table_s = " + ", ".join(repr(v) for v in m.table_s))
            out.append("model.table_f = " + ", ".join(repr(v) for v in m.table_f))
        for f in fields(SolverConfig):
            v = getattr(self.solver, f.name)
            if v is None:
                continue
            if isinstance(v, bool):
                v = str(v).lower()
            elif isinstance(v, float):
                v = repr(v)
            out.append(f"solver.{f.name} = {v}")
        if self.seeds:
            out.append("solver.seeds = " + ", ".join(str(s) for s in self.seeds))
        out.append(f"solver.workers = {self.workers}")
        out.append(f"output.dir = {self.output_dir}")
        out.append(f"check.level = {self.check_level}")
        return "\n".join(out) + "\n"


def _tokenize(text: str) -> dict[str, tuple[str, int]]:
    entries: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in entries:
            raise ConfigError(f"key {key!r} repeats the one on line {entries[key][1]}", lineno)
        entries[key] = (value, lineno)
    return entries


def parse_config(text) -> RunConfig:
    """Parse and validate a configuration document.

    Every input yields either a :class:`RunConfig` or a :class:`ConfigError`.
    """
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ConfigError(f"config is not valid UTF-8: {exc}") from None
    entries = _tokenize(text)
    values = {}
    for key, (raw, lineno) in entries.items():
        try:
            values[key] = KEYS[key](raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}", lineno) from None
    missing = [k for k in REQUIRED if k not in values]
    if missing:
        raise ConfigError("missing required key(s): " + ", ".join(missing))

    def where(key):
        return entries[key][1] if key in entries else None

    try:
        grid = GridSpec(values["grid.n"], values["grid.l"])
    except ValueError as exc:
        raise ConfigError(str(exc), where("grid.n")) from None

    alpha = values["model.alpha"]
    if not 0.0 < alpha < 3.0:
        raise ConfigError(f"model.alpha must satisfy 0 < alpha < 3, got {alpha}", where("model.alpha"))
    scale = values.get("model.gamma_scale", 1.0)
    if not scale > 0:
        raise ConfigError(f"model.gamma_scale must be positive, got {scale}", where("model.gamma_scale"))
    kind = values["model.kind"]
    p = values["model.p"]
    if kind == "double_power" and "model.q" not in values:
        raise ConfigError("double_power needs model.q", where("model.kind"))
    has_table = "model.table_s" in values or "model.table_f" in values
    if (kind == "custom_monotone") != has_table:
        raise ConfigError("model.table_s and model.table_f belong to custom_monotone only", where("model.kind"))
    if not 2.0 < p < 6.0:
        raise ConfigError(f"model.p must satisfy 2 < p < 6 (growth assumption on f), got {p}", where("model.p"))
    q = values.get("model.q")
    if q is not None and kind == "pure_power" and q != p:
        raise ConfigError("pure_power uses a single exponent; model.q must equal model.p", where("model.q"))
    if q is not None and q < p:
        raise ConfigError(f"model.q must satisfy q >= p, got q = {q} < p = {p}", where("model.q"))
    caught: list[str] = []
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        try:
            model = NonlinearityModel(
                kind=kind,
                p=p,
                weight=WeightSpec(alpha, scale),
                q=q,
                table_s=values.get("model.table_s"),
                table_f=values.get("model.table_f"),
            )
        except ValueError as exc:
            raise ConfigError(str(exc), where("model.table_s") or where("model.kind")) from None
        caught.extend(str(w.message) for w in rec)

    solver_kwargs = {
        k.split(".", 1)[1]: v
        for k, v in values.items()
        if k.startswith("solver.") and k.split(".", 1)[1] not in _RUN_SOLVER_KEYS
    }
    try:
        solver = SolverConfig(**solver_kwargs)
    except ValueError as exc:
        name = str(exc).split()[0]
        raise ConfigError(str(exc), where(f"solver.{name}")) from None
    workers = values.get("solver.workers", 1)
    if workers < 1:
        raise ConfigError(f"solver.workers must be >= 1, got {workers}", where("solver.workers"))
    seeds = values.get("solver.seeds", ())
    if any(s < 0 for s in seeds):
        raise ConfigError("solver.seeds must be nonnegative", where("solver.seeds"))
    return RunConfig(
        grid=grid,
        model=model,
        solver=solver,
        output_dir=values.get("output.dir", "output"),
        check_level=values.get("check.level", "quick"),
        seeds=seeds,
        workers=workers,
        warnings=tuple(caught),
    )


def load_config(path) -> RunConfig:
    """Read and parse a config file; I/O failures surface as ``OSError``."""
    with open(path, "rb") as fh:
        return parse_config(fh.read())
