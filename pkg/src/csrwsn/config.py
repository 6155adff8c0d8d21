"""Experiment configuration: YAML with one section per subsystem."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from dataclasses import field as dc_field
from pathlib import Path

import yaml

from .basis import BASIS_KINDS
from .errors import ConfigError


@dataclass
class TopologyConfig:
    n_sensors: int = 75
    radius: float = 0.2
    seed: int = 1
    sink_id: int | None = None


@dataclass
class FieldConfig:
    mean: float = 50.0
    variance: float = 4.0
    length_scale: float = 0.3
    ar_coeff: float = 0.98
    seed: int = 2


@dataclass
class RoutingConfig:
    link_failure_prob: float = 0.2
    rand_pool: int = 3


@dataclass
class TomographyConfig:
    recovery_prob: float = 0.9838


@dataclass
class BasisConfig:
    kinds: list = dc_field(default_factory=lambda: list(BASIS_KINDS))
    epsilon: float = 1e-4
    step: float = 1.0
    iters: int = 200


@dataclass
class SolverConfig:
    names: list = dc_field(default_factory=lambda: ["l1"])
    l1_tol: float = 1e-6
    l1_max_iters: int = 20000
    sl0_sigma_decrease: float = 0.7
    sl0_mu: float = 2.0
    sl0_inner_iters: int = 3
    sl0_sigma_min_ratio: float = 1e-4


@dataclass
class ExperimentSection:
    cycles: int = 87
    train_count: int = 10
    M: int = 12
    M_list: list = dc_field(default_factory=lambda: [4, 8, 12, 16, 25, 37])
    k_values: list = dc_field(default_factory=lambda: [1, 2, 3, 5, 10, 20])
    seed: int = 0
    threads: int = 1


SECTIONS = {
    "topology": TopologyConfig,
    "field": FieldConfig,
    "routing": RoutingConfig,
    "tomography": TomographyConfig,
    "basis": BasisConfig,
    "solver": SolverConfig,
    "experiment": ExperimentSection,
}


@dataclass
class ExperimentConfig:
    topology: TopologyConfig = dc_field(default_factory=TopologyConfig)
    field: FieldConfig = dc_field(default_factory=FieldConfig)
    routing: RoutingConfig = dc_field(default_factory=RoutingConfig)
    tomography: TomographyConfig = dc_field(default_factory=TomographyConfig)
    basis: BasisConfig = dc_field(default_factory=BasisConfig)
    solver: SolverConfig = dc_field(default_factory=SolverConfig)
    experiment: ExperimentSection = dc_field(default_factory=ExperimentSection)

    @property
    def N(self):
        return self.topology.n_sensors

    def to_dict(self):
        return dataclasses.asdict(self)

    def dump(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=True, default_flow_style=None)

    def with_seed(self, seed):
        d = self.to_dict()
        d["experiment"]["seed"] = int(seed)
        return config_from_dict(d)

    def validate(self):
        t, f, r, tm, b, s, e = (
            self.topology, self.field, self.routing, self.tomography,
            self.basis, self.solver, self.experiment,
        )
        _req(t.n_sensors >= 1, "topology.n_sensors", ">= 1")
        _req(0 < t.radius <= math.sqrt(2), "topology.radius", "in (0, sqrt(2)]")
        if t.sink_id is not None:
            _req(0 <= t.sink_id <= t.n_sensors, "topology.sink_id", "in [0, n_sensors]")
        _req(f.variance > 0, "field.variance", "> 0")
        _req(f.length_scale > 0, "field.length_scale", "> 0")
        _req(0 <= f.ar_coeff < 1, "field.ar_coeff", "in [0, 1)")
        _req(0 <= r.link_failure_prob < 1, "routing.link_failure_prob", "in [0, 1)")
        _req(r.rand_pool >= 1, "routing.rand_pool", ">= 1")
        _req(0 <= tm.recovery_prob <= 1, "tomography.recovery_prob", "in [0, 1]")
        _req(len(b.kinds) >= 1, "basis.kinds", "non-empty")
        for k in b.kinds:
            _req(k in BASIS_KINDS, "basis.kinds", f"each of {list(BASIS_KINDS)}")
        _req(b.epsilon > 0, "basis.epsilon", "> 0")
        _req(b.step > 0, "basis.step", "> 0")
        _req(b.iters >= 1, "basis.iters", ">= 1")
        _req(len(s.names) >= 1, "solver.names", "non-empty")
        for n in s.names:
            _req(n in ("l1", "sl0"), "solver.names", "each of ['l1', 'sl0']")
        _req(s.l1_tol > 0, "solver.l1_tol", "> 0")
        _req(s.l1_max_iters >= 1, "solver.l1_max_iters", ">= 1")
        _req(0 < s.sl0_sigma_decrease < 1, "solver.sl0_sigma_decrease", "in (0, 1)")
        _req(s.sl0_mu > 0, "solver.sl0_mu", "> 0")
        _req(s.sl0_inner_iters >= 1, "solver.sl0_inner_iters", ">= 1")
        _req(s.sl0_sigma_min_ratio > 0, "solver.sl0_sigma_min_ratio", "> 0")
        _req(e.cycles >= 2, "experiment.cycles", ">= 2")
        _req(1 <= e.train_count < e.cycles, "experiment.train_count", f"in [1, cycles={e.cycles})")
        _req(1 <= e.M <= t.n_sensors, "experiment.M", f"in [1, N={t.n_sensors}]")
        for m in e.M_list:
            _req(1 <= m <= t.n_sensors, "experiment.M_list", f"each in [1, N={t.n_sensors}]")
        for k in e.k_values:
            _req(0 <= k <= t.n_sensors, "experiment.k_values", f"each in [0, N={t.n_sensors}]")
        _req(e.threads >= 1, "experiment.threads", ">= 1")
        return self


def _req(ok, key, constraint):
    if not ok:
        raise ConfigError(key, constraint)


def _coerce(section, name, value, default):
    key = f"{section}.{name}"
    if default is None or value is None:
        if value is not None and not isinstance(value, int):
            raise ConfigError(key, "must be an integer or null")
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(key, "must be a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, "must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, "must be a number")
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(key, "must be a list")
        return list(value)
    return value


def config_from_dict(d) -> ExperimentConfig:
    d = d or {}
    if not isinstance(d, dict):
        raise ConfigError("<root>", "must be a mapping of sections")
    kwargs = {}
    for sec, body in d.items():
        if sec not in SECTIONS:
            raise ConfigError(sec, f"unknown section; expected one of {sorted(SECTIONS)}")
        body = body or {}
        if not isinstance(body, dict):
            raise ConfigError(sec, "section must be a mapping")
        cls = SECTIONS[sec]
        defaults = cls()
        known = {f.name for f in fields(cls)}
        vals = {}
        for k, v in body.items():
            if k not in known:
                raise ConfigError(f"{sec}.{k}", "unknown key")
            vals[k] = _coerce(sec, k, v, getattr(defaults, k))
        kwargs[sec] = cls(**vals)
    return ExperimentConfig(**kwargs).validate()


def parse_config(path=None) -> ExperimentConfig:
    """Read a YAML config; missing sections and keys take their defaults."""
    if path is None:
        return ExperimentConfig().validate()
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"malformed YAML: {exc}") from exc
    return config_from_dict(data)
