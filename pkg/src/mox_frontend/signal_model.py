"""Sensor voltage traces: a first-order MOx response model and CSV trial I/O.

The synthetic model is a single-exponential charge during gas exposure and a
single-exponential discharge afterwards, per (sensor, gas) pair::

    v(t) = baseline                                        t < onset
    v(t) = baseline + A * (1 - exp(-(t - onset) / tau_rise))    onset <= t <= offset
    v(t) = baseline + v_off * exp(-(t - offset) / tau_decay)     t > offset

with ``A = sensitivity[gas] * relative_concentration`` and ``v_off`` the
excursion reached at stimulus offset. White Gaussian noise is added per sample.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

GASES: tuple[str, ...] = ("EB", "Eu", "IA")
LEVELS: tuple[int, ...] = (1, 2, 3, 4, 5)
N_SENSORS = 3

_known_gases: set[str] = set(GASES)


def register_gas(label: str) -> None:
    """Make ``label`` acceptable to the trial reader and campaign builder."""
    if not label or not re.fullmatch(r"[A-Za-z0-9_\-]+", label):
        raise ValueError(f"invalid gas label {label!r}")
    _known_gases.add(label)


def known_gases() -> frozenset[str]:
    return frozenset(_known_gases)


def level_fraction(level: int) -> float:
    """Relative concentration of a campaign level (C1 = 0.2 ... C5 = 1.0)."""
    if level not in LEVELS:
        raise ValueError(f"concentration level must be in 1..5, got {level}")
    return 0.2 * level


@dataclass(frozen=True)
class Stimulus:
    gas: str
    level: int
    onset_s: float = 0.0
    duration_s: float = 1.0
    relative_concentration: float | None = None

    def __post_init__(self):
        if self.gas not in _known_gases:
            raise ValueError(f"unknown gas label {self.gas!r}")
        if not self.duration_s > 0:
            raise ValueError("stimulus duration must be positive")
        if self.relative_concentration is None:
            object.__setattr__(self, "relative_concentration", level_fraction(self.level))
        elif not 0.0 <= self.relative_concentration <= 1.0:
            raise ValueError("relative concentration must lie in [0, 1]")

    @property
    def offset_s(self) -> float:
        return self.onset_s + self.duration_s


@dataclass(frozen=True)
class SensorTrace:
    """Uniformly sampled load-resistor voltage of one sensor over one trial."""

    sensor_id: int
    dt_s: float
    t_start_s: float
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("trace samples must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(samples)):
            raise ValueError("trace samples must be finite")
        if not (math.isfinite(self.dt_s) and self.dt_s > 0):
            raise ValueError("dt_s must be positive and finite")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def times(self) -> np.ndarray:
        return self.t_start_s + np.arange(self.samples.size) * self.dt_s

    def __eq__(self, other):
        if not isinstance(other, SensorTrace):
            return NotImplemented
        return (
            self.sensor_id == other.sensor_id
            and self.dt_s == other.dt_s
            and self.t_start_s == other.t_start_s
            and np.array_equal(self.samples, other.samples)
        )

    __hash__ = None


@dataclass
class SensorModelParams:
    sensor_id: int
    baseline_v: float
    sensitivity: dict[str, float]
    tau_rise_s: dict[str, float]
    tau_decay_s: dict[str, float]
    noise_sigma_v: float = 0.0
    load_resistance_ohm: float | None = None

    def __post_init__(self):
        values = [self.baseline_v, self.noise_sigma_v]
        for table in (self.sensitivity, self.tau_rise_s, self.tau_decay_s):
            values.extend(table.values())
        if not all(math.isfinite(v) for v in values):
            raise ValueError("sensor model parameters must be finite")
        if self.baseline_v < 0 or self.noise_sigma_v < 0:
            raise ValueError("baseline and noise sigma must be non-negative")
        if any(v < 0 for v in self.sensitivity.values()):
            raise ValueError("sensitivities must be non-negative")
        if any(v <= 0 for v in (*self.tau_rise_s.values(), *self.tau_decay_s.values())):
            raise ValueError("time constants must be positive")

    def replace(self, **changes) -> SensorModelParams:
        data = {
            "sensor_id": self.sensor_id,
            "baseline_v": self.baseline_v,
            "sensitivity": dict(self.sensitivity),
            "tau_rise_s": dict(self.tau_rise_s),
            "tau_decay_s": dict(self.tau_decay_s),
            "noise_sigma_v": self.noise_sigma_v,
            "load_resistance_ohm": self.load_resistance_ohm,
        }
        data.update(changes)
        return SensorModelParams(**data)


# Fit targets, not measured values. Sensor 1 (RED) responds fastest and has
# the steepest code, sensor 3 (NH3) is the slowest and least sensitive.
_DEFAULT_TABLE = {
    1: dict(
        baseline_v=0.60,
        sensitivity={"EB": 0.80, "Eu": 0.60, "IA": 0.70},
        tau_rise_s={"EB": 0.35, "Eu": 0.45, "IA": 0.40},
        tau_decay_s={"EB": 3.0, "Eu": 3.5, "IA": 3.2},
        load_resistance_ohm=27e3,
    ),
    2: dict(
        baseline_v=0.30,
        sensitivity={"EB": 0.40, "Eu": 0.40, "IA": 0.35},
        tau_rise_s={"EB": 0.80, "Eu": 0.70, "IA": 0.90},
        tau_decay_s={"EB": 4.0, "Eu": 4.5, "IA": 4.2},
        load_resistance_ohm=6.8e3,
    ),
    3: dict(
        baseline_v=0.90,
        sensitivity={"EB": 0.25, "Eu": 0.20, "IA": 0.22},
        tau_rise_s={"EB": 1.60, "Eu": 1.80, "IA": 1.70},
        tau_decay_s={"EB": 6.0, "Eu": 6.5, "IA": 6.2},
        load_resistance_ohm=27e3,
    ),
}

DEFAULT_NOISE_SIGMA_V = 0.002


def default_sensor_params(noise_sigma_v: float = DEFAULT_NOISE_SIGMA_V) -> list[SensorModelParams]:
    """The shipped three-sensor parameter table."""
    out = []
    for sid, row in _DEFAULT_TABLE.items():
        row = {k: (dict(v) if isinstance(v, dict) else v) for k, v in row.items()}
        out.append(SensorModelParams(sensor_id=sid, noise_sigma_v=noise_sigma_v, **row))
    return out


def response_curve(params: SensorModelParams, stim: Stimulus, t: np.ndarray) -> np.ndarray:
    """Noiseless sensor voltage at times ``t``."""
    amplitude = params.sensitivity.get(stim.gas)
    if amplitude is None:
        raise ValueError(f"sensor {params.sensor_id} has no sensitivity entry for {stim.gas!r}")
    amplitude *= stim.relative_concentration
    tau_r = params.tau_rise_s[stim.gas]
    tau_d = params.tau_decay_s[stim.gas]
    t = np.asarray(t, dtype=np.float64)
    rel = t - stim.onset_s
    during = (rel >= 0) & (t <= stim.offset_s)
    after = t > stim.offset_s
    v = np.full(t.shape, params.baseline_v, dtype=np.float64)
    v[during] += amplitude * -np.expm1(-rel[during] / tau_r)
    v_off = amplitude * -math.expm1(-stim.duration_s / tau_r)
    v[after] += v_off * np.exp(-(t[after] - stim.offset_s) / tau_d)
    return v


def synthesize_trace(
    params: SensorModelParams,
    stim: Stimulus,
    dt_s: float = 1e-3,
    t_start_s: float = -1.0,
    t_end_s: float = 10.0,
    seed: int = 0,
) -> SensorTrace:
    """Sample the response model on ``[t_start_s, t_end_s)`` and add noise."""
    for name, value in (("dt_s", dt_s), ("t_start_s", t_start_s), ("t_end_s", t_end_s)):
        if not math.isfinite(value):
            raise ValueError(f"{name} must be finite")
    if dt_s <= 0:
        raise ValueError("dt_s must be positive")
    if not t_start_s < stim.onset_s < t_end_s:
        raise ValueError("stimulus onset must lie strictly inside the trace window")
    n = int(round((t_end_s - t_start_s) / dt_s))
    t = t_start_s + np.arange(n) * dt_s
    v = response_curve(params, stim, t)
    if params.noise_sigma_v > 0:
        rng = np.random.default_rng([seed, params.sensor_id])
        v = v + rng.normal(0.0, params.noise_sigma_v, size=n)
    return SensorTrace(params.sensor_id, dt_s, t_start_s, v)


@dataclass
class Trial:
    """One stimulus presentation with the traces of every sensor."""

    stimulus: Stimulus
    traces: tuple[SensorTrace, ...]
    trial: int = 1
    seed: int | None = field(default=None, compare=False)

    def __iter__(self):
        # allows ``stim, traces = trial``
        yield self.stimulus
        yield self.traces


def _trial_seeds(schedule_seed: int, n: int) -> list[int]:
    ss = np.random.SeedSequence(schedule_seed)
    seeds = [int(s) for s in ss.generate_state(n, dtype=np.uint64)]
    if len(set(seeds)) != n:  # pragma: no cover - 64-bit collision
        raise RuntimeError("trial seed collision")
    return seeds


def campaign_schedule(
    gases: Sequence[str],
    levels: Sequence[int],
    n_trials: int,
    schedule_seed: int,
    *,
    onset_s: float = 0.0,
    duration_s: float = 1.0,
) -> list[tuple[Stimulus, int, int]]:
    """Presentation order as (stimulus, repetition, noise seed) triples."""
    if not gases or not levels:
        raise ValueError("campaign needs at least one gas and one level")
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    conditions = [(g, lv, k + 1) for g in gases for lv in levels for k in range(n_trials)]
    order = np.random.default_rng(schedule_seed).permutation(len(conditions))
    seeds = _trial_seeds(schedule_seed, len(conditions))
    schedule = []
    for pos, idx in enumerate(order):
        gas, level, rep = conditions[idx]
        stim = Stimulus(gas, level, onset_s=onset_s, duration_s=duration_s)
        schedule.append((stim, rep, seeds[pos]))
    return schedule


def synthesize_trial(
    params: Sequence[SensorModelParams],
    stim: Stimulus,
    rep: int,
    seed: int,
    dt_s: float = 1e-3,
    t_start_s: float = -1.0,
    t_end_s: float = 10.0,
) -> Trial:
    traces = tuple(synthesize_trace(p, stim, dt_s, t_start_s, t_end_s, seed=seed) for p in params)
    return Trial(stim, traces, trial=rep, seed=seed)


def campaign(
    gases: Sequence[str],
    levels: Sequence[int],
    n_trials: int,
    params: Sequence[SensorModelParams],
    schedule_seed: int,
    *,
    dt_s: float = 1e-3,
    t_start_s: float = -1.0,
    t_end_s: float = 10.0,
    onset_s: float = 0.0,
    duration_s: float = 1.0,
) -> list[Trial]:
    """Every (gas, level) pair ``n_trials`` times, in a seeded random order."""
    schedule = campaign_schedule(
        gases, levels, n_trials, schedule_seed, onset_s=onset_s, duration_s=duration_s
    )
    return [
        synthesize_trial(params, stim, rep, seed, dt_s, t_start_s, t_end_s)
        for stim, rep, seed in schedule
    ]


# --- CSV trial files --------------------------------------------------------

FLOAT_FMT = "%.12g"
_PREAMBLE = re.compile(r"#\s*(.*)$")


def _fmt(x: float) -> str:
    return FLOAT_FMT % x


def save_trial(trial: Trial, path: str | Path) -> None:
    stim = trial.stimulus
    traces = trial.traces
    if len(traces) != N_SENSORS:
        raise ValueError(f"a trial file holds exactly {N_SENSORS} traces")
    dt = traces[0].dt_s
    n = len(traces[0])
    if any(tr.dt_s != dt or len(tr) != n or tr.t_start_s != traces[0].t_start_s for tr in traces):
        raise ValueError("traces of one trial must share a time axis")
    meta = f"# gas={stim.gas} level={stim.level} trial={trial.trial} dt_s={_fmt(dt)}"
    if stim.onset_s != 0.0:
        meta += f" onset_s={_fmt(stim.onset_s)}"
    if stim.duration_s != 1.0:
        meta += f" duration_s={_fmt(stim.duration_s)}"
    if stim.relative_concentration != level_fraction(stim.level):
        meta += f" rel_conc={_fmt(stim.relative_concentration)}"
    data = np.column_stack([traces[0].times] + [tr.samples for tr in traces])
    header = "t_s," + ",".join(f"s{i + 1}_v" for i in range(N_SENSORS))
    path = Path(path)
    with path.open("w", newline="\n") as fh:
        fh.write(meta + "\n" + header + "\n")
        np.savetxt(fh, data, fmt=FLOAT_FMT, delimiter=",")


def save_trials(trials: Iterable[Trial], path: str | Path) -> None:
    """Write a campaign as one CSV per trial into directory ``path``.

    Files are named ``trial_0000.csv`` ... in presentation order.
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    for old in path.glob("trial_*.csv"):
        old.unlink()
    for i, trial in enumerate(trials):
        save_trial(trial, path / f"trial_{i:04d}.csv")


def _parse_meta(line: str, source) -> dict[str, str]:
    m = _PREAMBLE.match(line.strip())
    if not m:
        raise ValueError(f"{source}: missing '# gas=... level=... trial=... dt_s=...' preamble")
    meta = {}
    for tok in m.group(1).split():
        key, sep, value = tok.partition("=")
        if not sep:
            raise ValueError(f"{source}: malformed preamble token {tok!r}")
        meta[key] = value
    missing = {"gas", "level", "trial", "dt_s"} - meta.keys()
    if missing:
        raise ValueError(f"{source}: preamble lacks {sorted(missing)}")
    return meta


def load_trial(path: str | Path) -> Trial:
    path = Path(path)
    with path.open() as fh:
        meta = _parse_meta(fh.readline(), path)
        header = fh.readline().strip()
        expected = "t_s," + ",".join(f"s{i + 1}_v" for i in range(N_SENSORS))
        if header != expected:
            raise ValueError(f"{path}: expected header {expected!r}, got {header!r}")
        try:
            data = np.loadtxt(fh, delimiter=",", dtype=np.float64, ndmin=2)
        except ValueError as exc:
            raise ValueError(f"{path}: malformed row ({exc})") from None
    if data.size == 0:
        raise ValueError(f"{path}: no samples")
    if data.shape[1] != N_SENSORS + 1:
        raise ValueError(f"{path}: malformed row")
    if not np.all(np.isfinite(data)):
        raise ValueError(f"{path}: non-finite values")
    gas = meta["gas"]
    if gas not in _known_gases:
        raise ValueError(f"{path}: unknown gas label {gas!r}")
    try:
        level = int(meta["level"])
        rep = int(meta["trial"])
        dt = float(meta["dt_s"])
    except ValueError:
        raise ValueError(f"{path}: malformed preamble values") from None
    t = data[:, 0]
    if t.size > 1:
        steps = np.diff(t)
        if np.any(np.abs(steps - dt) > 1e-6 * dt + 1e-9):
            raise ValueError(f"{path}: non-uniform sampling")
    stim = Stimulus(
        gas,
        level,
        onset_s=float(meta.get("onset_s", 0.0)),
        duration_s=float(meta.get("duration_s", 1.0)),
        relative_concentration=float(meta["rel_conc"]) if "rel_conc" in meta else None,
    )
    traces = tuple(
        SensorTrace(i + 1, dt, float(t[0]), data[:, i + 1]) for i in range(N_SENSORS)
    )
    return Trial(stim, traces, trial=rep)


def load_trials(path: str | Path) -> list[Trial]:
    """Read one trial file, or every ``*.csv`` of a campaign directory in name order."""
    path = Path(path)
    if path.is_dir():
        return [load_trial(p) for p in sorted(path.glob("*.csv"))]
    if not path.exists():
        raise FileNotFoundError(path)
    return [load_trial(path)]
