"""Scenario configuration: a strict JSON document, MHz at the boundary.

Frequencies are given as nu = omega / 2pi in MHz and times in seconds.
Unknown keys are rejected so a typo never silently falls back to a
default.
"""
import dataclasses
import json
from dataclasses import dataclass, field

from .bath import BathParams
from .cpt import MHZ, CptParams
from .estimators import EstimatorConfig
from .photons import MAX_GAMMA_DT

_EST_DEFAULTS = {f.name: f.default for f in dataclasses.fields(EstimatorConfig)}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CptSection:
    rabi_mhz: float = 2.8
    gamma_mhz: float = 13.0
    bias_mhz: float = 0.25
    kappa_mhz: float = None
    gamma_s_mhz: float = 0.0
    eta: float = 0.016


@dataclass(frozen=True)
class BathSection:
    tau_n_s: float = 1e-3
    sigma_mhz: float = 0.13


@dataclass(frozen=True)
class AssumedBathSection:
    tau_n_s: float = None
    sigma_mhz: float = None


@dataclass(frozen=True)
class SimSection:
    duration_s: float = 10e-3
    t_discard_s: float = 2e-3
    update_interval_s: float = 10e-6
    bath_dt_s: float = None  # update_interval_s for Poisson counts, 0.1 us with sse
    sse: bool = False
    sse_dt_s: float = None  # 0.05 / gamma


SSE_BATH_DT = 1e-7


@dataclass(frozen=True)
class ScenarioConfig:
    cpt: CptSection = field(default_factory=CptSection)
    bath: BathSection = field(default_factory=BathSection)
    assumed_bath: AssumedBathSection = field(default_factory=AssumedBathSection)
    sim: SimSection = field(default_factory=SimSection)
    runs: int = 100
    master_seed: int = 0

    def __post_init__(self):
        # surface invalid physics at load time rather than mid-run
        self.cpt_params()
        self.bath_params()
        self.assumed_bath_params()
        s = self.sim
        for name in ("duration_s", "update_interval_s"):
            if not getattr(s, name) > 0:
                raise ConfigError(f"sim.{name} must be > 0")
        if s.t_discard_s < 0 or s.t_discard_s >= s.duration_s:
            raise ConfigError("sim.t_discard_s must lie in [0, duration_s)")
        if self.bath_dt > s.update_interval_s * (1 + 1e-9):
            raise ConfigError("sim.bath_dt_s must not exceed update_interval_s")
        ratio = s.update_interval_s / self.bath_dt
        if abs(ratio - round(ratio)) > 1e-6 * ratio:
            raise ConfigError("sim.update_interval_s must be a multiple of bath_dt_s")
        if isinstance(self.runs, bool) or not isinstance(self.runs, int) or self.runs < 1:
            raise ConfigError("runs must be a positive integer")
        if isinstance(self.master_seed, bool) or not isinstance(self.master_seed, int) \
                or self.master_seed < 0:
            raise ConfigError("master_seed must be a nonnegative integer")

    def cpt_params(self):
        c = self.cpt
        return CptParams.from_mhz(c.rabi_mhz, c.gamma_mhz, c.bias_mhz, c.kappa_mhz,
                                  c.gamma_s_mhz, c.eta)

    def bath_params(self):
        return BathParams.from_mhz(self.bath.tau_n_s, self.bath.sigma_mhz)

    def assumed_bath_params(self):
        a = self.assumed_bath
        return BathParams.from_mhz(
            self.bath.tau_n_s if a.tau_n_s is None else a.tau_n_s,
            self.bath.sigma_mhz if a.sigma_mhz is None else a.sigma_mhz)

    @property
    def bath_dt(self):
        if self.sim.bath_dt_s is not None:
            return self.sim.bath_dt_s
        return SSE_BATH_DT if self.sim.sse else self.sim.update_interval_s

    @property
    def sse_dt(self):
        if self.sim.sse_dt_s is not None:
            return self.sim.sse_dt_s
        return MAX_GAMMA_DT / self.cpt_params().gamma

    def with_updates(self, **sections):
        """Copy with fields replaced, e.g. ``with_updates(cpt={"rabi_mhz": 2.0}, runs=10)``."""
        kw = {}
        for name, value in sections.items():
            current = getattr(self, name)
            if dataclasses.is_dataclass(current) and isinstance(value, dict):
                kw[name] = dataclasses.replace(current, **value)
            else:
                kw[name] = value
        return dataclasses.replace(self, **kw)

    def to_dict(self):
        return dataclasses.asdict(self)

    def resolved(self):
        """Config plus every derived quantity in internal units."""
        p, b, a = self.cpt_params(), self.bath_params(), self.assumed_bath_params()
        return {
            "config": self.to_dict(),
            "resolved": {
                "cpt_rad_s": dataclasses.asdict(p),
                "bath": {"tau_n_s": b.tau_n, "sigma_rad_s": b.sigma},
                "assumed_bath": {"tau_n_s": a.tau_n, "sigma_rad_s": a.sigma},
                "bath_dt_s": self.bath_dt,
                "sse_dt_s": self.sse_dt if self.sim.sse else None,
                "avg_window_bins": _EST_DEFAULTS["avg_window_bins"],
                "grid_halfwidth_sigma": _EST_DEFAULTS["grid_halfwidth"],
                "grid_size": _EST_DEFAULTS["grid_size"],
                "mhz_to_rad_s": MHZ,
            },
        }


_SECTIONS = {"cpt": CptSection, "bath": BathSection, "assumed_bath": AssumedBathSection,
             "sim": SimSection}


def config_from_dict(data):
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    top = {f.name for f in dataclasses.fields(ScenarioConfig)}
    unknown = set(data) - top
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    kw = {}
    for name, value in data.items():
        if name in _SECTIONS:
            cls = _SECTIONS[name]
            if value is None:
                value = {}
            if not isinstance(value, dict):
                raise ConfigError(f"{name} must be an object")
            allowed = {f.name for f in dataclasses.fields(cls)}
            bad = set(value) - allowed
            if bad:
                raise ConfigError(f"unknown fields in {name}: {sorted(bad)}")
            kw[name] = cls(**value)
        else:
            kw[name] = value
    try:
        return ScenarioConfig(**kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path):
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(data)
