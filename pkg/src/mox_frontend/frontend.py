"""Single-sensor and 3-sensor front-end pipelines.

The per-timestep loops run in the compiled ``_kernels`` extension when it
is importable and fall back to ``_pyloops`` otherwise. Set
``MOX_FRONTEND_BACKEND=python`` to force the fallback.
"""

from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _pyloops
from .config import CircuitConfig
from .signal_model import SensorTrace

try:
    from . import _kernels
except ImportError:  # pragma: no cover - depends on the build
    _kernels = None

BACKENDS = ("cython", "python") if _kernels is not None else ("python",)


def default_backend() -> str:
    forced = os.environ.get("MOX_FRONTEND_BACKEND", "").strip().lower()
    if forced:
        if forced not in ("cython", "python"):
            raise ValueError(f"unknown backend {forced!r}")
        if forced not in BACKENDS:
            raise RuntimeError("compiled kernel requested but not built")
        return forced
    return BACKENDS[0]


class Edge(str, enum.Enum):
    RISING = "rising"
    FALLING = "falling"


@dataclass(frozen=True)
class EventLog:
    """Edges of every named digital signal of one run.

    Each signal starts low, so its edges alternate rising/falling beginning
    with a rising edge.
    """

    signals: dict[str, tuple[tuple[float, Edge], ...]]
    dt_s: float
    t_start_s: float
    waveforms: dict[str, np.ndarray] | None = field(default=None, compare=False)

    def edges(self, name: str) -> tuple[tuple[float, Edge], ...]:
        return self.signals.get(name, ())

    def rising(self, name: str) -> list[float]:
        return [t for t, e in self.edges(name) if e is Edge.RISING]

    def falling(self, name: str) -> list[float]:
        return [t for t, e in self.edges(name) if e is Edge.FALLING]

    def first_rising(self, name: str) -> float | None:
        r = self.rising(name)
        return r[0] if r else None

    def pulses(self, name: str) -> list[tuple[float, float]]:
        """Complete (rise, fall) pairs."""
        e = self.edges(name)
        return [(e[i][0], e[i + 1][0]) for i in range(0, len(e) - 1, 2)]

    def interval(self, earlier: float, later: float) -> float:
        """``later - earlier`` snapped to a whole number of timesteps."""
        return round((later - earlier) / self.dt_s) * self.dt_s

    def n_edges(self) -> int:
        return sum(len(v) for v in self.signals.values())


def _to_log(named_edges: dict[str, list[int]], dt: float, t0: float, waves) -> EventLog:
    signals = {}
    for name, idx in named_edges.items():
        signals[name] = tuple(
            (t0 + i * dt, Edge.RISING if j % 2 == 0 else Edge.FALLING) for j, i in enumerate(idx)
        )
    return EventLog(signals, dt, t0, waves)


def _cd_row(cfg: CircuitConfig, s: int) -> list[float]:
    p = cfg.cd[s]
    return [
        p.gain,
        math.exp(-cfg.dt_s / p.tau_fall_s),
        math.exp(-cfg.dt_s / p.tau_rise_s),
        p.dc_offset_v,
        p.threshold_v,
        p.hysteresis_v,
    ]


def _em_row(cfg: CircuitConfig, s: int) -> list[float]:
    p = cfg.em[s]
    return [p.reset_value_v, p.gain_per_s, p.threshold_v, p.hysteresis_v]


def _check_dt(trace: SensorTrace, cfg: CircuitConfig) -> None:
    if trace.dt_s != cfg.dt_s:
        raise ValueError(
            f"trace dt ({trace.dt_s} s) does not match config dt ({cfg.dt_s} s); resample upstream"
        )


def run_single_sensor(
    trace: SensorTrace,
    config: CircuitConfig,
    *,
    record: bool = False,
    backend: str | None = None,
) -> EventLog:
    """Change-detection pulse ``Out_CD`` gates the exposure measurement ``Out_EM``.

    Circuit parameters come from the config section of ``trace.sensor_id``.
    """
    _check_dt(trace, config)
    s = trace.sensor_id - 1
    if not 0 <= s < config.n_sensors:
        raise ValueError(f"config has no section for sensor {trace.sensor_id}")
    backend = backend or default_backend()
    if backend == "cython":
        cd_e, em_e, waves = _kernels.run_single(
            np.ascontiguousarray(trace.samples),
            config.dt_s,
            np.array(_cd_row(config, s)),
            math.exp(-config.dt_s / config.hpf_tau_s),
            np.array(_em_row(config, s)),
            config.rails.v_low,
            config.rails.v_high,
            record,
        )
    elif backend == "python":
        cd_e, em_e, waves = _pyloops.run_single(trace.samples, config, s, record)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return _to_log({"Out_CD": cd_e, "Out_EM": em_e}, trace.dt_s, trace.t_start_s, waves)


def array_signal_names(k: int = 3) -> list[str]:
    return [f"CD{i}" for i in range(1, k + 1)] + ["CD_out", "Q_out"] + [
        f"EM{i}" for i in range(1, k + 1)
    ]


def run_array(
    traces: Sequence[SensorTrace],
    config: CircuitConfig,
    *,
    record: bool = False,
    backend: str | None = None,
) -> EventLog:
    """Per-sensor CD, OR-combined ``CD_out``, SR-latch/ramp timer ``Q_out``,
    and per-sensor EM globally triggered by ``Q_out``."""
    k = len(traces)
    if k != config.n_sensors:
        raise ValueError(f"expected {config.n_sensors} traces, got {k}")
    first = traces[0]
    for tr in traces:
        _check_dt(tr, config)
        if len(tr) != len(first) or tr.t_start_s != first.t_start_s:
            raise ValueError("array traces must share one time axis")
    x = np.ascontiguousarray(np.vstack([tr.samples for tr in traces]))
    backend = backend or default_backend()
    if backend == "cython":
        edges, waves = _kernels.run_array(
            x,
            config.dt_s,
            np.array([_cd_row(config, s) for s in range(k)]),
            math.exp(-config.dt_s / config.hpf_tau_s),
            np.array([_em_row(config, s) for s in range(k)]),
            config.timer.ramp_rate_v_per_s,
            config.timer.ramp_threshold_v,
            _pyloops.vpulse_steps(config),
            config.rails.v_low,
            config.rails.v_high,
            record,
        )
    elif backend == "python":
        edges, waves = _pyloops.run_array(x, config, record)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return _to_log(dict(zip(array_signal_names(k), edges)), first.dt_s, first.t_start_s, waves)


class NoPulseError(ValueError):
    pass


def q_out_width(log: EventLog) -> float:
    """Width of the first complete ``Q_out`` pulse."""
    pulses = log.pulses("Q_out")
    if not pulses:
        raise NoPulseError("no pulse: Q_out has no complete pulse")
    rise, fall = pulses[0]
    return log.interval(rise, fall)
