"""Run configuration: flat ``key = value`` files plus command-line overrides."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

from .dynamics import InitialCondition, RadialGrid, build_grid
from .exceptions import ConfigError, SirTreeError
from .model import EpidemicParams

MODELS = ("sir", "kpp")
STARTS = ("above", "below", "both")
SPACINGS = ("linear", "log")


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_optional_float(text):
    if text.strip().lower() in ("", "none", "auto"):
        return None
    return float(text)


def _parse_int(text):
    value = float(text)
    if not value.is_integer():
        raise ValueError(f"not an integer: {text!r}")
    return int(value)


def _parse_int_list(text):
    items = [t for t in text.replace(";", ",").split(",") if t.strip()]
    if not items:
        raise ValueError("empty list")
    return tuple(_parse_int(t) for t in items)


def _choice(options):
    def parse(text):
        value = text.strip().lower()
        if value not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return value
    return parse


def _format(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


@dataclass(frozen=True)
class RunConfig:
    """Every knob of a run.  Field names match the config keys, with ``.`` -> ``_``."""

    s0: float = 0.9
    tau: float = 2.0
    eta: float = 1.0
    lam: float = 1.0
    k: int = 2
    n_shells: int = 400
    i0: float = 0.01
    support: Optional[int] = None  # block half-width on the lattice; None = default shape
    model: str = "sir"
    dt: Optional[float] = None
    t_end: float = 110.0
    snapshot_every: Optional[float] = 1.0
    theta: Optional[float] = None
    fit_fraction: float = 0.5
    margin: int = 10
    tol: float = 1e-8
    start: str = "below"
    t_max: float = 1e4
    sweep_k: tuple = (1, 2, 3, 4, 5)
    sweep_lambda_min: float = 0.01
    sweep_lambda_max: Optional[float] = None  # None: up to lambda_c per k (100 for k = 1)
    sweep_count: int = 50
    sweep_spacing: str = "linear"
    sweep_empirical: bool = False
    sweep_include_critical: bool = True

    def params(self) -> EpidemicParams:
        return EpidemicParams(tau=self.tau, eta=self.eta, lam=self.lam, s0=self.s0, k=self.k)

    def grid(self) -> RadialGrid:
        return build_grid(self.k, self.n_shells)

    def initial(self, grid: Optional[RadialGrid] = None) -> InitialCondition:
        grid = self.grid() if grid is None else grid
        if self.support is not None and grid.is_lattice:
            return InitialCondition.block(self.s0, self.i0, self.support)
        return InitialCondition.default_for(grid, self.s0, self.i0)

    def to_dict(self) -> dict:
        return {key: getattr(self, attr) for key, attr in _KEY_TO_ATTR.items()}

    def validate(self) -> "RunConfig":
        """Check cross-field consistency; raises :class:`ConfigError`."""
        try:
            self.params()
            self.grid()
        except SirTreeError as exc:
            raise ConfigError(str(exc)) from exc
        checks = [
            (self.i0 > 0, "i0 must be positive"),
            (self.t_end > 0, "t_end must be positive"),
            (self.snapshot_every is None or self.snapshot_every > 0,
             "snapshot_every must be positive"),
            (0 < self.fit_fraction <= 1, "fit_fraction must be in (0, 1]"),
            (self.margin >= 0, "margin must be nonnegative"),
            (self.tol > 0, "tol must be positive"),
            (self.t_max > 0, "t_max must be positive"),
            (self.support is None or self.support >= 0, "support must be nonnegative"),
            (self.sweep_count >= 2, "sweep.count must be at least 2"),
            (self.sweep_lambda_min > 0, "sweep.lambda_min must be positive"),
            (self.sweep_lambda_max is None or self.sweep_lambda_max > self.sweep_lambda_min,
             "sweep.lambda_max must exceed sweep.lambda_min"),
            (all(k >= 1 for k in self.sweep_k), "sweep.k entries must be >= 1"),
            (self.theta is None or self.theta > 0, "theta must be positive"),
            (self.dt is None or self.dt > 0, "dt must be positive"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        # dt above the stability bound is not a config error: the integrator
        # rejects it as a numerical abort
        return self


_PARSERS = {
    "s0": float, "tau": float, "eta": float, "lambda": float, "k": _parse_int,
    "n_shells": _parse_int, "i0": float, "support": lambda t: None if t.strip().lower()
    in ("", "none", "auto") else _parse_int(t),
    "model": _choice(MODELS), "dt": _parse_optional_float, "t_end": float,
    "snapshot_every": _parse_optional_float, "theta": _parse_optional_float,
    "fit_fraction": float, "margin": _parse_int, "tol": float, "start": _choice(STARTS),
    "t_max": float, "sweep.k": _parse_int_list, "sweep.lambda_min": float,
    "sweep.lambda_max": _parse_optional_float, "sweep.count": _parse_int,
    "sweep.spacing": _choice(SPACINGS), "sweep.empirical": _parse_bool,
    "sweep.include_critical": _parse_bool,
}
_KEY_TO_ATTR = {key: "lam" if key == "lambda" else key.replace(".", "_") for key in _PARSERS}
KEYS = tuple(_PARSERS)


def _apply(values: dict, key: str, text: str, where: str):
    key = key.strip()
    if key not in _PARSERS:
        raise ConfigError(f"{where}: unknown key {key!r}")
    try:
        value = _PARSERS[key](text.strip())
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for {key!r}: {exc}") from None
    if isinstance(value, float) and not math.isfinite(value):
        raise ConfigError(f"{where}: {key!r} must be finite")
    values[_KEY_TO_ATTR[key]] = value


def _split(line: str, where: str):
    if "=" not in line:
        raise ConfigError(f"{where}: expected key = value, got {line.strip()!r}")
    key, _, text = line.partition("=")
    return key, text


def parse_config(text: str, overrides=(), source: str = "<config>") -> RunConfig:
    """Parse config text, then apply ``key=value`` overrides in order (later wins)."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        _apply(values, *_split(line, where), where)
    for item in overrides:
        where = f"--set {item}"
        _apply(values, *_split(item, where), where)
    return replace(RunConfig(), **values).validate()


def load_config(path: Optional[str] = None, overrides=()) -> RunConfig:
    text = ""
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, overrides, source=path or "<defaults>")


def serialize_config(cfg: RunConfig) -> str:
    """Inverse of :func:`parse_config`: one ``key = value`` line per field."""
    return "".join(f"{key} = {_format(value)}\n" for key, value in cfg.to_dict().items())

