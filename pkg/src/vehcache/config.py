"""JSON experiment files: parsing, defaults and validation.

A config file looks like::

    {
      "scenario": {"rates": {"lam": 1.0}, "control": {"policy": "online"}, "n_slots": 2000},
      "sweep": {"rates.lam": [0.5, 1.0, 2.0], "control.policy": ["online", "offline", "none"]},
      "seeds": [0, 1, 2],
      "output_dir": "results/example",
      "emit_traces": false
    }

Every scenario field is optional and falls back to the defaults of
:class:`vehcache.sim.ScenarioConfig`.  Radio powers may be given in dBm through
the ``*_dbm`` aliases.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .energy import EnergyParams
from .errors import DomainError, ParseError, ValidationError
from .interaction import InteractionRates
from .phy import RadioParams, dbm_to_watt
from .sim import CatalogConfig, ControlConfig, PopulationConfig, ScenarioConfig

__all__ = ["ExperimentSpec", "load_config", "parse_config", "scenario_from_dict", "scenario_to_dict"]

SECTIONS = {
    "population": PopulationConfig,
    "rates": InteractionRates,
    "catalog": CatalogConfig,
    "radio": RadioParams,
    "energy": EnergyParams,
    "control": ControlConfig,
}
SCALARS = ("n_slots",)
TOP_LEVEL = ("scenario", "sweep", "seeds", "output_dir", "emit_traces")
DBM_ALIASES = {"p_mbs_tx_dbm": "p_mbs_tx", "p_veh_tx_dbm": "p_veh_tx", "noise_power_dbm": "noise_power"}


@dataclass(frozen=True)
class ExperimentSpec:
    base: ScenarioConfig
    sweep: tuple[tuple[str, tuple], ...] = ()
    seeds: tuple[int, ...] = (0,)
    output_dir: str = "results"
    emit_traces: bool = False
    source: dict = field(default_factory=dict, compare=False, repr=False)

    def grid(self) -> list[dict]:
        """Every combination of sweep values, in axis order."""
        if not self.sweep:
            return [{}]
        names = [name for name, _ in self.sweep]
        return [dict(zip(names, combo)) for combo in itertools.product(*(v for _, v in self.sweep))]

    def scenario(self, point: dict, seed: int) -> ScenarioConfig:
        cfg = self.base
        for path, value in point.items():
            cfg = cfg.with_value(path, value)
        return cfg.with_value("seed", seed)

    def resolved(self) -> dict:
        """Plain-dict form with every default filled in; loads back unchanged."""
        return {
            "scenario": scenario_to_dict(self.base),
            "sweep": {name: list(values) for name, values in self.sweep},
            "seeds": list(self.seeds),
            "output_dir": self.output_dir,
            "emit_traces": self.emit_traces,
        }


def defaults_of(section: str) -> dict:
    return asdict(getattr(ScenarioConfig(), section))


def _type_ok(default, value) -> bool:
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, int):
        return isinstance(value, int) and not isinstance(value, bool)
    if isinstance(default, float):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if isinstance(default, str):
        return isinstance(value, str)
    return value is None or (isinstance(value, int) and not isinstance(value, bool))


def _coerce(default, value):
    if isinstance(default, float) and not isinstance(default, bool):
        return float(value)
    return value


def _section(name: str, cls, values, where: str):
    if not isinstance(values, dict):
        raise ParseError(f"{where}: section {name!r} must be an object")
    defaults = defaults_of(name)
    out = dict(defaults)
    for key, value in values.items():
        target = key
        if name == "radio" and key in DBM_ALIASES:
            target = DBM_ALIASES[key]
            if not _type_ok(0.0, value):
                raise ParseError(f"{where}: field {name}.{key} must be a number")
            value = dbm_to_watt(float(value))
        if target not in defaults:
            raise ParseError(f"{where}: unknown field {name}.{key!r}")
        if not _type_ok(defaults[target], value):
            raise ParseError(f"{where}: field {name}.{key} has the wrong type ({type(value).__name__})")
        out[target] = _coerce(defaults[target], value)
    return out


def scenario_from_dict(data: dict, where: str = "config") -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ParseError(f"{where}: 'scenario' must be an object")
    parts = {}
    for key in data:
        if key not in SECTIONS and key not in SCALARS:
            raise ParseError(f"{where}: unknown field scenario.{key!r}")
    try:
        for name, cls in SECTIONS.items():
            parts[name] = cls(**_section(name, cls, data.get(name, {}), where))
        n_slots = data.get("n_slots", ScenarioConfig.n_slots)
        if not _type_ok(0, n_slots):
            raise ParseError(f"{where}: field scenario.n_slots must be an integer")
        return ScenarioConfig(**parts, n_slots=n_slots)
    except DomainError as exc:
        raise ValidationError(f"{where}: {exc}") from exc


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    d = asdict(cfg)
    d.pop("seed")
    return d


def parse_config(data: dict, where: str = "config") -> ExperimentSpec:
    if not isinstance(data, dict):
        raise ParseError(f"{where}: top level must be an object")
    if "config" in data and "code_version" in data:
        # a run manifest: rerun the configuration it recorded
        return parse_config(data["config"], where)
    for key in data:
        if key not in TOP_LEVEL:
            raise ParseError(f"{where}: unknown field {key!r}")
    base = scenario_from_dict(data.get("scenario", {}), where)

    raw_sweep = data.get("sweep", {})
    if not isinstance(raw_sweep, dict):
        raise ParseError(f"{where}: 'sweep' must map parameter paths to value lists")
    axes = []
    for path, values in raw_sweep.items():
        if not isinstance(values, list):
            raise ParseError(f"{where}: sweep axis {path!r} must be a list")
        section, _, name = path.partition(".")
        valid = path in SCALARS or (section in SECTIONS and name in defaults_of(section))
        if not valid:
            raise ValidationError(f"{where}: sweep axis {path!r} is not a scalar scenario field")
        default = base.get_value(path)
        for v in values:
            if not _type_ok(default, v):
                raise ParseError(f"{where}: sweep value {v!r} has the wrong type for {path}")
            try:
                base.with_value(path, _coerce(default, v))
            except DomainError as exc:
                raise ValidationError(f"{where}: sweep {path}={v!r}: {exc}") from exc
        if values:
            axes.append((path, tuple(_coerce(default, v) for v in values)))

    seeds = data.get("seeds", [0])
    if not isinstance(seeds, list) or not seeds or not all(_type_ok(0, s) and s >= 0 for s in seeds):
        raise ValidationError(f"{where}: 'seeds' must be a nonempty list of nonnegative integers")
    out_dir = data.get("output_dir", "results")
    emit = data.get("emit_traces", False)
    if not isinstance(out_dir, str):
        raise ParseError(f"{where}: 'output_dir' must be a string")
    if not isinstance(emit, bool):
        raise ParseError(f"{where}: 'emit_traces' must be true or false")
    return ExperimentSpec(base, tuple(axes), tuple(seeds), out_dir, emit, source=data)


def load_config(path) -> ExperimentSpec:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return parse_config(data, str(path))
