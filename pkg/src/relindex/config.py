"""Flat ``key: value`` experiment configs.

One key per line, ``#`` starts a comment, blank lines are ignored.  Every
key other than ``kind`` has a default (see ``FIELDS``); unknown keys,
malformed values and out-of-range values raise :class:`ConfigError`
carrying the offending line number.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError

KINDS = ("index-identities", "spectral-flow", "hamiltonian-witness", "dirac-witness", "dual-solve")


def _positive(x):
    return x > 0


def _nonneg(x):
    return x >= 0


# name: (type, default, range check, description)
FIELDS: dict[str, tuple] = {
    "kind": (str, None, lambda v: v in KINDS, "experiment kind"),
    "seed": (int, 0, lambda v: 0 <= v < 2**64, "root seed (u64)"),
    "count": (int, 100, _nonneg, "number of random cases"),
    "dim_min": (int, 2, lambda v: v >= 1, "smallest random dimension"),
    "dim_max": (int, 40, lambda v: v >= 1, "largest random dimension"),
    "shifts": (int, 3, lambda v: v >= 1, "shifts k per crossing-formula case"),
    "r": (float, 0.5, _positive, "tent plateau radius"),
    "r1": (float, 1.0, _positive, "L vanishes on |t| <= r1"),
    "r2": (float, 2.0, _positive, "L saturates for |t| >= r2"),
    "b_max": (float, 3.0, _positive, "gap half width"),
    "R": (float, 1.0, _positive, "well radius"),
    "T": (float, 6.0, _positive, "truncation half length"),
    "n": (int, 2000, lambda v: v >= 3, "interior grid nodes"),
    "N": (int, 1, lambda v: v >= 1, "degrees of freedom (2N components)"),
    "n_dirac": (int, 400, lambda v: v >= 3, "grid nodes for the 1-D Dirac operator"),
    "tol": (float, 1e-8, _positive, "kernel tolerance"),
    "num_rtol": (float, 0.02, _positive, "relative tolerance on (Az0, Az0)"),
    "den_rtol": (float, 0.01, _positive, "relative tolerance on (z0, z0)"),
    "eig_rtol": (float, 0.01, _positive, "relative tolerance on eigenvalue checks"),
    "grad_tol": (float, 1e-6, _positive, "dual gradient-norm tolerance"),
    "residual_tol": (float, 1e-5, _positive, "equation residual tolerance"),
    "budget": (int, 10_000, lambda v: v >= 1, "dual evaluation budget"),
    "a_value": (float, 0.5, lambda v: math.isfinite(v), "eigenvalue of the scalar dual model"),
    "dual_nodes": (int, 1, lambda v: v >= 1, "copies of the scalar dual model"),
    "slope_inf": (float, -0.45, lambda v: math.isfinite(v), "Hessian of R at infinity"),
    "bump": (float, 1.25, _positive, "Hessian excess at the origin"),
    "width": (float, 1.0, _positive, "saturation width"),
    "lower": (float, -0.5, lambda v: math.isfinite(v), "lower twisting level B1"),
    "upper": (float, -0.4, lambda v: math.isfinite(v), "upper twisting level B2"),
    "out_dir": (str, "out", lambda v: bool(v), "output directory"),
    "plots": (bool, True, None, "render PNG figures"),
    "record_timing": (bool, False, None, "fill the ms column (breaks byte identity)"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int = 0
    count: int = 100
    dim_min: int = 2
    dim_max: int = 40
    shifts: int = 3
    r: float = 0.5
    r1: float = 1.0
    r2: float = 2.0
    b_max: float = 3.0
    R: float = 1.0
    T: float = 6.0
    n: int = 2000
    N: int = 1
    n_dirac: int = 400
    tol: float = 1e-8
    num_rtol: float = 0.02
    den_rtol: float = 0.01
    eig_rtol: float = 0.01
    grad_tol: float = 1e-6
    residual_tol: float = 1e-5
    budget: int = 10_000
    a_value: float = 0.5
    dual_nodes: int = 1
    slope_inf: float = -0.45
    bump: float = 1.25
    width: float = 1.0
    lower: float = -0.5
    upper: float = -0.4
    out_dir: str = "out"
    plots: bool = True
    record_timing: bool = False

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def params(self) -> dict:
        return dataclasses.asdict(self)


_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def _convert(key: str, raw: str, line: int):
    typ = FIELDS[key][0]
    try:
        if typ is bool:
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError
        if typ is int:
            return int(raw, 0)
        if typ is float:
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            return v
        return raw
    except ValueError:
        raise ConfigError(f"{key}: expected {typ.__name__}, got {raw!r}", line) from None


def parse_config_text(text: str) -> ExperimentConfig:
    values: dict = {}
    lines: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        content = raw.split("#", 1)[0].strip()
        if not content:
            continue
        if ":" not in content:
            raise ConfigError(f"expected 'key: value', got {content!r}", lineno)
        key, _, value = (s.strip() for s in content.partition(":"))
        if key not in FIELDS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r} (first on line {lines[key]})", lineno)
        v = _convert(key, value, lineno)
        check = FIELDS[key][2]
        if check is not None and not check(v):
            raise ConfigError(f"{key}: value {value!r} out of range ({FIELDS[key][3]})", lineno)
        values[key] = v
        lines[key] = lineno
    if "kind" not in values:
        raise ConfigError(f"missing required key 'kind' (one of {', '.join(KINDS)})")
    cfg = ExperimentConfig(**values)
    _cross_checks(cfg, lines)
    return cfg


def _cross_checks(cfg: ExperimentConfig, lines: dict):
    def fail(msg, *keys):
        present = [lines[k] for k in keys if k in lines]
        raise ConfigError(msg, max(present) if present else None)

    if cfg.dim_min > cfg.dim_max:
        fail("dim_min exceeds dim_max", "dim_min", "dim_max")
    if not cfg.r < cfg.r1 < cfg.r2:
        fail("need r < r1 < r2", "r", "r1", "r2")
    if cfg.kind == "hamiltonian-witness" and cfg.r1 > cfg.T:
        fail("r1 exceeds the truncation T", "r1", "T")
    if not cfg.lower < cfg.slope_inf < cfg.upper:
        fail("need lower < slope_inf < upper", "lower", "slope_inf", "upper")


def parse_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"config file {str(p)!r} not found") from None
    except UnicodeDecodeError as exc:
        raise ConfigError(f"config is not UTF-8 ({exc.reason})") from None
    return parse_config_text(text)


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_config(cfg: ExperimentConfig) -> str:
    """Serialize every field, one per line, in ``FIELDS`` order."""
    return "".join(f"{k}: {_format(getattr(cfg, k))}\n" for k in FIELDS)
