"""Run configuration: one YAML file with nested sections, every field defaulted."""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .potential import FourierPotential

DEFAULTS = {
    "potential": {"cos": [0.0, 1.0], "sin": [], "strip": 1.0},
    "mode": "A",
    "window": {"center": 1.0, "radius": 0.3, "transverse": 0.05},
    "h_ladder": [0.2, 0.1, 0.05],
    "k_range": None,
    "j_range": None,
    "stage2": True,
    "tolerances": {"quadrature": 1e-12, "newton": 1e-12, "integrator": 1e-11,
                   "count": 1e-8},
    "output": {"dir": "out", "prefix": "run"},
    "seed": 0,
    "threads": 1,
}


def _complex(v, name):
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ConfigError(f"{name}: expected [re, im]")
        return complex(float(v[0]), float(v[1]))
    try:
        return complex(str(v).replace(" ", "").replace("i", "j"))
    except ValueError as exc:
        raise ConfigError(f"{name}: cannot read {v!r} as a complex number") from exc


def _float(v, name):
    try:
        return float(v)         # PyYAML reads 1e-12 (no dot) as a string
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: cannot read {v!r} as a number") from exc


def _range(v, name):
    if v is None:
        return None
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ConfigError(f"{name}: expected [lo, hi]")
    lo, hi = int(v[0]), int(v[1])
    if lo > hi:
        raise ConfigError(f"{name}: lo > hi")
    return lo, hi


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if k not in base:
            raise ConfigError(f"unknown config key {k!r}")
        if isinstance(base[k], dict) and isinstance(v, dict):
            for kk in v:
                if kk not in base[k] and k != "potential":
                    raise ConfigError(f"unknown config key {k}.{kk}")
            out[k] = {**base[k], **v}
        else:
            out[k] = v
    return out


@dataclass
class RunConfig:
    potential: FourierPotential
    mode: str = "A"
    center: complex = 1.0
    radius: float = 0.3
    transverse: float = 0.05
    h_ladder: tuple = (0.2, 0.1, 0.05)
    k_range: tuple | None = None
    j_range: tuple | None = None
    stage2: bool = True
    quad_tol: float = 1e-12
    newton_tol: float = 1e-12
    integrator_tol: float = 1e-11
    count_tol: float = 1e-8
    out_dir: str = "out"
    prefix: str = "run"
    seed: int = 0
    threads: int = 1
    raw: dict = field(default_factory=dict, repr=False)

    def validate(self) -> "RunConfig":
        if self.mode not in ("A", "B"):
            raise ConfigError(f"mode must be A or B, got {self.mode!r}")
        if not self.radius > 0:
            raise ConfigError("window radius must be positive")
        if not self.transverse > 0:
            raise ConfigError("window transverse half-width must be positive")
        hs = self.h_ladder
        if not hs or any(h <= 0 for h in hs):
            raise ConfigError("h ladder must hold positive values")
        if any(b >= a for a, b in zip(hs, hs[1:])):
            raise ConfigError("h ladder must be strictly decreasing")
        if self.mode == "B" and self.center.real != 0.0:
            raise ConfigError("mode-B window center must be purely imaginary")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        return self

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)


def from_dict(d: dict | None) -> RunConfig:
    raw = _merge(DEFAULTS, d or {})
    pot = raw["potential"]
    if not isinstance(pot, dict):
        raise ConfigError("potential must be a mapping with cos/sin/strip")
    try:
        V = FourierPotential.from_config(pot)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"potential: {exc}") from exc
    win, tol, out = raw["window"], raw["tolerances"], raw["output"]
    cfg = RunConfig(
        potential=V,
        mode=str(raw["mode"]).upper(),
        center=_complex(win["center"], "window.center"),
        radius=_float(win["radius"], "window.radius"),
        transverse=_float(win["transverse"], "window.transverse"),
        h_ladder=tuple(_float(h, "h_ladder") for h in raw["h_ladder"]),
        k_range=_range(raw["k_range"], "k_range"),
        j_range=_range(raw["j_range"], "j_range"),
        stage2=bool(raw["stage2"]),
        quad_tol=_float(tol["quadrature"], "tolerances.quadrature"),
        newton_tol=_float(tol["newton"], "tolerances.newton"),
        integrator_tol=_float(tol["integrator"], "tolerances.integrator"),
        count_tol=_float(tol["count"], "tolerances.count"),
        out_dir=str(out["dir"]),
        prefix=str(out["prefix"]),
        seed=int(raw["seed"]),
        threads=int(raw["threads"]),
        raw=raw,
    )
    return cfg.validate()


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return from_dict({})
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    return from_dict(data)
