"""
Experiment configuration: a flat ``key=value`` text format.

One pair per line; ``#`` starts a comment; blank lines are ignored. Vectors
are written as comma-separated components (``V1=-2,2,0``). Unknown keys,
unparseable values and violated invariants raise :class:`ConfigError` with
the offending line number.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ParameterError
from .particles import MASK64, MixtureSpec
from .reduction import ReductionScheme

REFERENCE_KINDS = ("hierarchy", "equilibrium")


@dataclass(frozen=True)
class ExperimentConfig:
    scheme: ReductionScheme = ReductionScheme.PTHF
    m0: int = 1024
    N: int = 500
    t_end: float = 3.0
    time_grid_points: int = 31
    mixture: MixtureSpec = field(default_factory=MixtureSpec)
    seed: int = 1
    trigger_factor: float = 4.0
    target_factor: float = 0.25
    output_path: str = "swpm_results.csv"
    workers: int = 0
    ci_alpha: float = 1e-3
    reference: str = "hierarchy"
    moments: tuple[str, ...] = ("Pi11", "h2", "s")

    def __post_init__(self):
        object.__setattr__(self, "scheme", ReductionScheme.parse(self.scheme))
        object.__setattr__(self, "moments", tuple(self.moments))
        self.validate()

    def validate(self) -> None:
        from .moments import SCALAR_INDEX

        if self.m0 < 1:
            raise ConfigError(f"m0 must be a positive integer, got {self.m0}")
        if self.N < 1:
            raise ConfigError(f"N must be a positive integer, got {self.N}")
        if not (math.isfinite(self.t_end) and self.t_end >= 0.0):
            raise ConfigError(f"tEnd must be finite and >= 0, got {self.t_end}")
        if self.time_grid_points < 1:
            raise ConfigError(f"timeGridPoints must be a positive integer, got {self.time_grid_points}")
        if not self.trigger_factor > 1.0:
            raise ConfigError(f"reductionTriggerFactor must exceed 1, got {self.trigger_factor}")
        if not 0.0 < self.target_factor < self.trigger_factor:
            raise ConfigError(
                f"reductionTargetFactor must lie in (0, reductionTriggerFactor), got {self.target_factor}"
            )
        if self.workers < 0:
            raise ConfigError(f"workerCount must be >= 0, got {self.workers}")
        if not 0.0 < self.ci_alpha < 1.0:
            raise ConfigError(f"ciAlpha must lie in (0, 1), got {self.ci_alpha}")
        if not 0 <= self.seed <= MASK64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.reference not in REFERENCE_KINDS:
            raise ConfigError(f"reference must be one of {REFERENCE_KINDS}, got {self.reference!r}")
        for name in self.moments:
            if name not in SCALAR_INDEX:
                raise ConfigError(f"moments names an unknown component {name!r}")
        if not self.moments:
            raise ConfigError("moments must name at least one component")

    @property
    def time_grid(self) -> np.ndarray:
        if self.time_grid_points == 1:
            return np.array([self.t_end])
        return np.linspace(0.0, self.t_end, self.time_grid_points)

    def replace(self, **changes) -> ExperimentConfig:
        return dataclasses.replace(self, **changes)


def _int(text):
    return int(text)


def _float(text):
    x = float(text)
    if math.isnan(x):
        raise ValueError("NaN is not allowed")
    return x


def _vec(text):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise ValueError(f"expected 3 components, got {len(parts)}")
    return tuple(_float(p) for p in parts)


def _fmt_float(x: float) -> str:
    return repr(float(x))


# file key -> (field, parser, formatter); mixture fields are routed separately
_TOP = {
    "scheme": ("scheme", ReductionScheme.parse, lambda s: s.value),
    "m0": ("m0", _int, str),
    "N": ("N", _int, str),
    "tEnd": ("t_end", _float, _fmt_float),
    "timeGridPoints": ("time_grid_points", _int, str),
    "seed": ("seed", _int, str),
    "reductionTriggerFactor": ("trigger_factor", _float, _fmt_float),
    "reductionTargetFactor": ("target_factor", _float, _fmt_float),
    "outputPath": ("output_path", str, str),
    "workerCount": ("workers", _int, str),
    "ciAlpha": ("ci_alpha", _float, _fmt_float),
    "reference": ("reference", str, str),
    "moments": ("moments", lambda t: tuple(p.strip() for p in t.split(",") if p.strip()), ",".join),
}
_MIX = {
    "alpha": ("alpha", _float, _fmt_float),
    "V1": ("V1", _vec, lambda v: ",".join(_fmt_float(x) for x in v)),
    "V2": ("V2", _vec, lambda v: ",".join(_fmt_float(x) for x in v)),
    "T1": ("T1", _float, _fmt_float),
    "T2": ("T2", _float, _fmt_float),
}
KEYS = tuple(_TOP) + tuple(_MIX)


def parse_config(text: str) -> ExperimentConfig:
    """Parse a ``key=value`` document, applying defaults for absent keys."""
    top: dict = {}
    mix: dict = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got {raw.strip()!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key in lines:
            raise ConfigError(f"duplicate key {key!r} (first on line {lines[key]})", lineno)
        if key in _TOP:
            name, parse, _ = _TOP[key]
            target = top
        elif key in _MIX:
            name, parse, _ = _MIX[key]
            target = mix
        else:
            raise ConfigError(f"unknown key {key!r}", lineno)
        try:
            target[name] = parse(value)
        except (ValueError, ParameterError) as exc:
            raise ConfigError(f"cannot parse {key}={value!r}: {exc}", lineno) from None
        lines[key] = lineno
    try:
        mixture = MixtureSpec(**mix)
    except ParameterError as exc:
        bad = next((k for k in _MIX if k in lines and k in str(exc)), None)
        raise ConfigError(str(exc), lines.get(bad)) from None
    try:
        return ExperimentConfig(mixture=mixture, **top)
    except ConfigError as exc:
        # point at the line of the first key named in the message, when there is one
        for key, lineno in lines.items():
            if str(exc).startswith(key + " "):
                raise ConfigError(str(exc), lineno) from None
        raise
    except ParameterError as exc:
        raise ConfigError(str(exc), lines.get("scheme")) from None


def serialize_config(config: ExperimentConfig) -> str:
    """Inverse of :func:`parse_config` (every key written explicitly)."""
    out = []
    for key, (name, _, fmt) in _TOP.items():
        out.append(f"{key}={fmt(getattr(config, name))}")
    for key, (name, _, fmt) in _MIX.items():
        out.append(f"{key}={fmt(getattr(config.mixture, name))}")
    return "\n".join(out) + "\n"


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    return parse_config(text)
