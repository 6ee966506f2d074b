"""Run configuration: flat INI sections, canonicalized before hashing.

The canonical form (sorted section.key = normalized value lines) defines the
configuration digest used as the cache key prefix, so identical runs hit
identical cache entries byte for byte.
"""

from __future__ import annotations

import configparser
import hashlib
import os
from dataclasses import dataclass, field, fields

from .errors import ConfigError
from .quantization import MODEL_NAMES, model_field_bands


@dataclass
class RunConfig:
    # [run]
    model: str = "two_speed_perturbed"
    eps: float = 0.1
    speeds: tuple = (1.0, 2.0)
    depth: int = 3
    lambdas: tuple = (8, 16)
    seed: int = 1234
    alpha: float = 4.0
    trust_frac: float = 0.45
    output_dir: str = "out"
    cache_dir: str | None = None
    jobs: int = 0
    # [stages]
    stage_partition: bool = True
    stage_weyl: bool = False
    stage_hyperbolic: bool = False
    # [bands]
    x_band: int | None = None
    theta_band: int | None = None
    band_tol: float = 1e-10
    res_tol: float = 1e-8
    gap_tol: float | None = None
    # [partition]
    partition_lambda: int | None = None
    n_max: int | None = None
    # [weyl]
    t0: float = 1.0
    heat_t: float = 0.4
    density_points: int = 400
    # [hyperbolic]
    hyperbolic_lambda: int | None = None
    shells: tuple = (6.0, 12.0)
    evolve_t: float = 1.0
    packet_eta: tuple = (6.0, 0.0)
    packet_times: tuple = (-1.0, -0.5, 0.5, 1.0)

    def bands(self) -> tuple:
        xb, tb = model_field_bands(self.model, self.eps)
        return (self.x_band if self.x_band is not None else xb,
                self.theta_band if self.theta_band is not None else tb)

    def model_params(self) -> dict:
        if self.model == "diag_multiplier":
            return {"speeds": self.speeds}
        if self.model in ("two_speed_perturbed", "second_order_nonneg"):
            return {"eps": self.eps}
        return {}

    def order(self) -> float:
        return 2.0 if self.model == "second_order_nonneg" else 1.0

    def enabled_stages(self) -> list:
        out = ["check-symbols", "spectrum"]
        if self.stage_partition:
            out.append("partition")
        if self.stage_weyl:
            out.append("weyl")
        if self.stage_hyperbolic:
            out.append("evolve")
        out.append("report")
        return out


_SCHEMA = {
    "run": {
        "model": str, "eps": float, "speeds": "floats", "depth": int,
        "lambdas": "ints", "seed": int, "alpha": float, "trust_frac": float,
        "output_dir": str, "cache_dir": str, "jobs": int,
    },
    "stages": {"partition": bool, "weyl": bool, "hyperbolic": bool},
    "bands": {
        "x_band": int, "theta_band": int, "band_tol": float,
        "res_tol": float, "gap_tol": float,
    },
    "partition": {"lambda": int, "n_max": int},
    "weyl": {"t0": float, "heat_t": float, "density_points": int},
    "hyperbolic": {
        "lambda": int, "shells": "floats", "t": float,
        "packet_eta": "floats", "packet_times": "floats",
    },
}

_DEST = {
    ("stages", "partition"): "stage_partition",
    ("stages", "weyl"): "stage_weyl",
    ("stages", "hyperbolic"): "stage_hyperbolic",
    ("partition", "lambda"): "partition_lambda",
    ("hyperbolic", "lambda"): "hyperbolic_lambda",
    ("hyperbolic", "t"): "evolve_t",
}


def _convert(raw: str, kind, where: str):
    raw = raw.strip()
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind == "ints":
            return tuple(int(p) for p in raw.replace(",", " ").split())
        if kind == "floats":
            return tuple(float(p) for p in raw.replace(",", " ").split())
        return raw
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def parse_config(path: str) -> RunConfig:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    cfg = RunConfig()
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            dest = _DEST.get((section, key), key)
            value = _convert(raw, _SCHEMA[section][key], f"[{section}] {key}")
            setattr(cfg, dest, value)
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    if cfg.model not in MODEL_NAMES:
        raise ConfigError(f"unknown model {cfg.model!r}; known: {MODEL_NAMES}")
    if not 0 <= cfg.eps < 0.5:
        raise ConfigError(
            f"eps={cfg.eps} out of range: the eigenvalue gap needs eps < gap/2 = 0.5"
        )
    if cfg.depth < 0 or cfg.depth > 8:
        raise ConfigError("depth must be in 0..8")
    if not cfg.lambdas or any(l < 4 for l in cfg.lambdas):
        raise ConfigError("lambdas must be a nonempty list of integers >= 4")
    if not 0 < cfg.trust_frac <= 1:
        raise ConfigError("trust_frac must lie in (0, 1]")
    if cfg.alpha <= 0:
        raise ConfigError("alpha must be positive")
    if cfg.band_tol <= 0 or cfg.res_tol <= 0:
        raise ConfigError("band_tol and res_tol must be positive")
    if cfg.t0 <= 0:
        raise ConfigError("t0 must be positive")
    if cfg.heat_t <= 0:
        raise ConfigError("heat_t must be positive")
    if cfg.seed < 0:
        raise ConfigError("seed must be nonnegative")


def canonical_text(cfg: RunConfig) -> str:
    """Sorted key = value lines with normalized numbers (cache identity)."""
    lines = []
    for f in sorted(fields(cfg), key=lambda f: f.name):
        if f.name in ("output_dir", "cache_dir", "jobs"):
            continue  # location and parallelism do not affect results
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            sval = ",".join(repr(float(x)) if isinstance(x, float) else repr(x) for x in v)
        elif isinstance(v, float):
            sval = repr(v)
        else:
            sval = repr(v)
        lines.append(f"{f.name}={sval}")
    return "\n".join(lines) + "\n"


def config_digest(cfg: RunConfig) -> str:
    return hashlib.sha256(canonical_text(cfg).encode()).hexdigest()


def resolve_cache_dir(cfg: RunConfig) -> str | None:
    env = os.environ.get("SPECPART_CACHE")
    if env:
        return env
    return cfg.cache_dir
