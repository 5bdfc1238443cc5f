"""INI-style run configuration: parsing, validation, and hashing.

The config hash is a SHA-256 over the fully resolved key=value listing, so
any two runs with the same hash used identical settings (seed included).
"""

from __future__ import annotations

import configparser
import hashlib
import os
from dataclasses import dataclass, field, fields, replace

from .credit import SimConfig
from .errors import ConfigError


@dataclass(frozen=True)
class RunConfig:
    sim: SimConfig = field(default_factory=SimConfig)
    income_table: str = "data/income_synthetic.csv"
    markov_spec: str | None = None
    epsilon: float = 0.02
    alpha: float = 0.01
    bin_width: float = 0.05

    def __post_init__(self):
        if not (0 < self.epsilon) or not (0 < self.alpha < 1):
            raise ConfigError("epsilon must be > 0 and alpha in (0,1)")
        if not (0 < self.bin_width <= 1):
            raise ConfigError("bin_width must be in (0,1]")

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, sim=replace(self.sim, seed=seed))

    def resolved_items(self) -> list[tuple[str, str]]:
        items = []
        for f in fields(self.sim):
            v = getattr(self.sim, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            items.append((f"simulation.{f.name}", str(v)))
        items.append(("paths.income_table", os.path.basename(self.income_table)))
        items.append(("report.epsilon", str(self.epsilon)))
        items.append(("report.alpha", str(self.alpha)))
        items.append(("report.bin_width", str(self.bin_width)))
        return sorted(items)

    def config_hash(self) -> str:
        payload = "\n".join(f"{k}={v}" for k, v in self.resolved_items())
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


_SIM_PARSERS = {
    "users": int, "start_year": int, "end_year": int,
    "mortgage_multiple": float, "annual_rate": float, "living_cost": float,
    "income_code_threshold": float, "bernoulli_slope": float, "cutoff": float,
    "free_approval_steps": int, "trials": int, "l2_lambda": float,
    "top_bin_cap": float, "seed": int,
}


def load_config(path) -> RunConfig:
    """Read the sectioned key-value config file; unknown keys are errors."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc

    sim_kwargs = {}
    if parser.has_section("simulation"):
        for key, raw in parser.items("simulation"):
            if key in _SIM_PARSERS:
                try:
                    sim_kwargs[key] = _SIM_PARSERS[key](raw)
                except ValueError as exc:
                    raise ConfigError(f"{path}: bad value for simulation.{key}: {raw}") from exc
            elif key == "races":
                sim_kwargs["races"] = tuple(s.strip() for s in raw.split("|"))
            elif key == "race_distribution":
                sim_kwargs["race_distribution"] = tuple(float(s) for s in raw.split(","))
            elif key == "include_denied_as_default":
                sim_kwargs["include_denied_as_default"] = raw.strip().lower() in ("1", "true", "yes")
            else:
                raise ConfigError(f"{path}: unknown key simulation.{key}")

    kwargs = {}
    if parser.has_section("paths"):
        for key, raw in parser.items("paths"):
            if key == "income_table":
                kwargs["income_table"] = raw.strip()
            elif key == "markov_spec":
                kwargs["markov_spec"] = raw.strip()
            else:
                raise ConfigError(f"{path}: unknown key paths.{key}")
    if parser.has_section("report"):
        for key, raw in parser.items("report"):
            if key in ("epsilon", "alpha", "bin_width"):
                try:
                    kwargs[key] = float(raw)
                except ValueError as exc:
                    raise ConfigError(f"{path}: bad value for report.{key}: {raw}") from exc
            else:
                raise ConfigError(f"{path}: unknown key report.{key}")

    try:
        cfg = RunConfig(sim=SimConfig(**sim_kwargs), **kwargs)
    except Exception as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    # paths are resolved relative to the config file's directory
    base = os.path.dirname(os.path.abspath(path))
    table = cfg.income_table
    if not os.path.isabs(table):
        table = os.path.normpath(os.path.join(base, table))
    spec = cfg.markov_spec
    if spec is not None and not os.path.isabs(spec):
        spec = os.path.normpath(os.path.join(base, spec))
    cfg = replace(cfg, income_table=table, markov_spec=spec)
    if not os.path.exists(cfg.income_table):
        raise ConfigError(f"income table not found: {cfg.income_table}")
    return cfg
