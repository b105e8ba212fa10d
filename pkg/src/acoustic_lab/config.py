"""Plain key=value experiment configs.

    # comment
    experiment = sweep
    n = 201
    eps_grid = 1e-1, 3e-2, 1e-2

    [sweep]
    T = 5

Keys before the first section apply to every experiment; a section named
after an experiment overrides them when that experiment is selected.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Optional

EXPERIMENTS = ("energy_audit", "absorbing_set", "split_decay", "compare", "sweep",
               "omega_limit", "robin_demo")

# per-experiment horizon when T is not given
DEFAULT_T = {"energy_audit": 10.0, "absorbing_set": 15.0, "split_decay": 50.0, "compare": 5.0,
             "sweep": 5.0, "omega_limit": 20.0, "robin_demo": 10.0}
DEFAULT_EPS_GRID = {"energy_audit": (1.0, 0.1, 0.01), "absorbing_set": (1.0, 0.1, 0.01),
                    "split_decay": (1.0, 0.1), "omega_limit": (1e-1, 1e-2, 1e-3)}
EPS_GRID_EXPERIMENTS = set(DEFAULT_EPS_GRID) | {"sweep"}
EPS_EXPERIMENTS = {"compare"}


class ConfigError(ValueError):
    def __init__(self, msg: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {msg}" if line else msg)
        self.line = line


@dataclass
class Config:
    experiment: str
    n: int = 201
    L: float = 1.0
    nonlinearity: str = "double_well"
    k: float = 1.0
    a3: float = 0.0
    a1: float = 0.0
    a0: float = 0.0
    dt: float = 1e-3
    T: Optional[float] = None
    sample_dt: float = 0.05
    eps: Optional[float] = None
    eps_grid: Optional[tuple[float, ...]] = None
    transport: bool = True
    seeds: int = 3
    rng_seed: int = 0
    radius: float = 5.0
    aic2: Optional[bool] = None
    T_b: Optional[float] = None
    T_w: float = 5.0
    cadence: float = 0.5
    retry_halvings: int = 1
    output_dir: str = "out"
    lines: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def horizon(self) -> float:
        return self.T if self.T is not None else DEFAULT_T[self.experiment]

    @property
    def grid(self) -> tuple[float, ...]:
        return self.eps_grid if self.eps_grid is not None else DEFAULT_EPS_GRID.get(self.experiment, ())

    @property
    def use_aic2(self) -> bool:
        return self.aic2 if self.aic2 is not None else self.experiment in ("compare", "sweep")

    @property
    def coeffs(self) -> tuple[float, float, float]:
        return (self.a3, self.a1, self.a0)


_INT = {"n", "seeds", "rng_seed", "retry_halvings"}
_BOOL = {"transport", "aic2"}
_STR = {"experiment", "nonlinearity", "output_dir"}
_POSITIVE = {"n", "L", "dt", "T", "sample_dt", "seeds", "radius", "T_w", "cadence"}
KEYS = {f.name for f in fields(Config)} - {"lines"}


def _number(key: str, raw: str, line: int):
    try:
        if key in _INT:
            val = int(raw)
        else:
            val = float(raw)
    except ValueError:
        raise ConfigError(f"malformed number for {key!r}: {raw!r}", line) from None
    if val != val or val in (float("inf"), float("-inf")):
        raise ConfigError(f"{key} must be finite", line)
    return val


def _convert(key: str, raw: str, line: int):
    if key in _STR:
        return raw
    if key in _BOOL:
        low = raw.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ConfigError(f"expected a boolean for {key!r}, got {raw!r}", line)
    if key == "eps_grid":
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        if not parts:
            raise ConfigError("eps_grid is empty", line)
        return tuple(_number(key, p, line) for p in parts)
    return _number(key, raw, line)


def parse_config(text: str) -> Config:
    """Parse and validate; every error names the offending line."""
    base: dict[str, tuple[object, int]] = {}
    sections: dict[str, dict[str, tuple[object, int]]] = {}
    current = base
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in EXPERIMENTS:
                raise ConfigError(f"unknown section [{name}]", lineno)
            current = sections.setdefault(name, {})
            continue
        if "=" not in line:
            raise ConfigError(f"expected key = value, got {line!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in current:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        if not value:
            raise ConfigError(f"empty value for {key!r}", lineno)
        current[key] = (_convert(key, value, lineno), lineno)

    if "experiment" not in base:
        raise ConfigError("missing required key 'experiment'", 1 if text.strip() else None)
    exp, exp_line = base["experiment"]
    if exp not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp!r}", exp_line)
    merged = dict(base)
    merged.update(sections.get(exp, {}))
    return _validate(exp, merged, text)


def _validate(exp: str, items: dict[str, tuple[object, int]], text: str) -> Config:
    last = max(1, len(text.splitlines()))
    for key, (val, line) in items.items():
        if key in _POSITIVE and not val > 0:
            raise ConfigError(f"{key} must be positive", line)
    if "n" in items and items["n"][0] < 3:
        raise ConfigError("n must be at least 3", items["n"][1])
    if "eps_grid" in items and exp not in EPS_GRID_EXPERIMENTS:
        raise ConfigError(f"eps_grid is not accepted by experiment {exp} (it takes a single eps)"
                          if exp in EPS_EXPERIMENTS else f"eps_grid is not accepted by {exp}",
                          items["eps_grid"][1])
    if "eps" in items and exp not in EPS_EXPERIMENTS:
        raise ConfigError(f"eps is not accepted by {exp}; use eps_grid", items["eps"][1])
    if exp in EPS_EXPERIMENTS and "eps" not in items:
        raise ConfigError(f"missing required key 'eps' for {exp}", last)
    if exp == "sweep" and "eps_grid" not in items:
        raise ConfigError("missing required key 'eps_grid' for sweep", last)
    if "eps" in items and not 0 < items["eps"][0] <= 1:
        raise ConfigError("eps must lie in (0, 1]", items["eps"][1])
    if "eps_grid" in items:
        grid, line = items["eps_grid"]
        if any(not 0 < e <= 1 for e in grid):
            raise ConfigError("eps_grid entries must lie in (0, 1]", line)
        if any(b >= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("eps_grid must be strictly decreasing", line)
        if exp == "sweep" and len(grid) < 2:
            raise ConfigError("sweep needs at least two eps values", line)
    if "nonlinearity" in items:
        kind, line = items["nonlinearity"]
        if kind not in ("zero", "double_well", "cubic_poly"):
            raise ConfigError(f"unknown nonlinearity {kind!r}", line)
    if "dt" in items and "sample_dt" in items and items["sample_dt"][0] < items["dt"][0]:
        raise ConfigError("sample_dt must be at least dt", items["sample_dt"][1])
    if "retry_halvings" in items and items["retry_halvings"][0] < 0:
        raise ConfigError("retry_halvings must be nonnegative", items["retry_halvings"][1])
    if "T_b" in items and items["T_b"][0] < 0:
        raise ConfigError("T_b must be nonnegative", items["T_b"][1])
    cfg = Config(**{k: v for k, (v, _) in items.items()})
    cfg.lines = {k: line for k, (_, line) in items.items()}
    return cfg
