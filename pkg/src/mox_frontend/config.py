"""Circuit configuration and its ``key = value`` file format.

Sections::

    [sim]       dt_s
    [rails]     v_low, v_high
    [cd.N]      gain, tau_rise_s, tau_fall_s, dc_offset_v, threshold_v, hysteresis_v
    [hpf]       tau_s
    [em.N]      reset_value_v, gain_per_s, threshold_v, hysteresis_v
    [timer]     ramp_rate_v_per_s, ramp_threshold_v, vpulse_duration_s

with N = 1, 2, 3 for the sensors of the array. The single-sensor pipeline
uses the section matching the trace's sensor id.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import asdict, dataclass, fields, replace
from importlib import resources
from pathlib import Path

from .analog_blocks import Rails


@dataclass(frozen=True)
class CDParams:
    gain: float
    tau_rise_s: float
    tau_fall_s: float
    dc_offset_v: float
    threshold_v: float
    hysteresis_v: float = 0.0


@dataclass(frozen=True)
class EMParams:
    reset_value_v: float
    gain_per_s: float
    threshold_v: float
    hysteresis_v: float = 0.0


@dataclass(frozen=True)
class TimerParams:
    ramp_rate_v_per_s: float
    ramp_threshold_v: float
    vpulse_duration_s: float

    @property
    def width_s(self) -> float:
        return self.ramp_threshold_v / self.ramp_rate_v_per_s


@dataclass(frozen=True)
class CircuitConfig:
    cd: tuple[CDParams, ...]
    hpf_tau_s: float
    em: tuple[EMParams, ...]
    timer: TimerParams
    rails: Rails = Rails()
    dt_s: float = 1e-3

    def __post_init__(self):
        if len(self.cd) != len(self.em) or not self.cd:
            raise ValueError("need one CD and one EM section per sensor")
        if not self.dt_s > 0:
            raise ValueError("dt_s must be positive")
        if not self.hpf_tau_s > 0:
            raise ValueError("hpf tau must be positive")
        thresholds = [c.threshold_v for c in self.cd] + [e.threshold_v for e in self.em]
        thresholds.append(self.timer.ramp_threshold_v)
        for v in thresholds:
            if not self.rails.v_low <= v <= self.rails.v_high:
                raise ValueError(f"threshold {v} V lies outside the rails")
        for e in self.em:
            if not e.threshold_v > e.reset_value_v:
                raise ValueError("EM threshold must sit above the integrator reset level")
        for c in self.cd:
            if min(c.tau_rise_s, c.tau_fall_s) < 10 * self.dt_s:
                raise ValueError("dt_s must not exceed a tenth of the CD time constants")
        t = self.timer
        if not (t.ramp_rate_v_per_s > 0 and t.vpulse_duration_s > 0):
            raise ValueError("ramp rate and V_pulse duration must be positive")
        if t.vpulse_duration_s >= t.width_s:
            raise ValueError("V_pulse must be much shorter than the timer width")

    @property
    def n_sensors(self) -> int:
        return len(self.cd)

    def with_dt(self, dt_s: float) -> CircuitConfig:
        return replace(self, dt_s=dt_s)

    def with_em(self, sensor_id: int, **changes) -> CircuitConfig:
        em = list(self.em)
        em[sensor_id - 1] = replace(em[sensor_id - 1], **changes)
        return replace(self, em=tuple(em))

    def with_cd(self, sensor_id: int, **changes) -> CircuitConfig:
        cd = list(self.cd)
        cd[sensor_id - 1] = replace(cd[sensor_id - 1], **changes)
        return replace(self, cd=tuple(cd))

    def with_timer(self, **changes) -> CircuitConfig:
        return replace(self, timer=replace(self.timer, **changes))

    def to_ini(self) -> str:
        return dumps(self)

    def digest(self) -> str:
        """sha256 over the canonical serialization."""
        return hashlib.sha256(dumps(self).encode()).hexdigest()


def _section(obj) -> dict[str, str]:
    return {k: repr(float(v)) for k, v in asdict(obj).items()}


def dumps(cfg: CircuitConfig) -> str:
    parser = configparser.ConfigParser()
    parser["sim"] = {"dt_s": repr(float(cfg.dt_s))}
    parser["rails"] = _section(cfg.rails)
    for i, c in enumerate(cfg.cd, start=1):
        parser[f"cd.{i}"] = _section(c)
    parser["hpf"] = {"tau_s": repr(float(cfg.hpf_tau_s))}
    for i, e in enumerate(cfg.em, start=1):
        parser[f"em.{i}"] = _section(e)
    parser["timer"] = _section(cfg.timer)
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def _read(section, cls, name):
    kwargs = {}
    for f in fields(cls):
        if f.name in section:
            try:
                kwargs[f.name] = float(section[f.name])
            except ValueError:
                raise ValueError(f"[{name}] {f.name}: not a number") from None
    unknown = set(section) - {f.name for f in fields(cls)}
    if unknown:
        raise ValueError(f"[{name}] unknown keys {sorted(unknown)}")
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ValueError(f"[{name}] {exc}") from None


def loads(text: str) -> CircuitConfig:
    parser = configparser.ConfigParser()
    parser.read_string(text)
    n = 0
    while parser.has_section(f"cd.{n + 1}"):
        n += 1
    if n == 0:
        raise ValueError("config has no [cd.1] section")
    for required in ["sim", "hpf", "timer"] + [f"em.{i}" for i in range(1, n + 1)]:
        if not parser.has_section(required):
            raise ValueError(f"config lacks section [{required}]")
    rails = _read(parser["rails"], Rails, "rails") if parser.has_section("rails") else Rails()
    return CircuitConfig(
        cd=tuple(_read(parser[f"cd.{i}"], CDParams, f"cd.{i}") for i in range(1, n + 1)),
        hpf_tau_s=float(parser["hpf"]["tau_s"]),
        em=tuple(_read(parser[f"em.{i}"], EMParams, f"em.{i}") for i in range(1, n + 1)),
        timer=_read(parser["timer"], TimerParams, "timer"),
        rails=rails,
        dt_s=float(parser["sim"]["dt_s"]),
    )


def load_config(path: str | Path) -> CircuitConfig:
    return loads(Path(path).read_text())


def save_config(cfg: CircuitConfig, path: str | Path) -> None:
    Path(path).write_text(dumps(cfg))


def default_config() -> CircuitConfig:
    """The shipped, documented parameter file ``data/default_circuit.ini``."""
    text = resources.files("mox_frontend").joinpath("data/default_circuit.ini").read_text()
    return loads(text)
