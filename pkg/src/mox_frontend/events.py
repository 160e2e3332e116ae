"""Time-difference codes extracted from event logs.

Absent values (no EM pulse, no trigger) are ``None`` throughout.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .frontend import EventLog

RESULT_COLUMNS = ("gas", "level", "trial", "sensor", "dt_s", "inv_dt_per_s")
SUMMARY_COLUMNS = ("gas", "level", "sensor", "n_present", "n_trials", "mean_inv_dt_per_s", "std_inv_dt_per_s", "mean_dt_s")


@dataclass(frozen=True)
class ConcentrationVector:
    """Per-sensor time differences for one stimulus presentation."""

    per_sensor: tuple[float | None, ...]
    gas: str | None = None
    level: int | None = None
    trial: int | None = None

    def __post_init__(self):
        cleaned = []
        for v in self.per_sensor:
            if v is not None:
                v = float(v)
                if not (math.isfinite(v) and v > 0):
                    raise ValueError("time differences must be positive and finite")
            cleaned.append(v)
        object.__setattr__(self, "per_sensor", tuple(cleaned))

    def __len__(self) -> int:
        return len(self.per_sensor)

    def present(self) -> list[int]:
        return [i for i, v in enumerate(self.per_sensor) if v is not None]


def _positive_diff(log: EventLog, later: float | None, earlier: float | None) -> float | None:
    if later is None or earlier is None:
        return None
    d = log.interval(earlier, later)
    return d if d > 0 else None


def delta_t_single(log: EventLog) -> float | None:
    """First ``Out_EM`` rise minus first ``Out_CD`` rise."""
    return _positive_diff(log, log.first_rising("Out_EM"), log.first_rising("Out_CD"))


def concentration_vector(log: EventLog, n_sensors: int = 3, **meta) -> ConcentrationVector:
    """``EM_i`` first rise minus ``Q_out`` first rise, for each sensor."""
    q = log.first_rising("Q_out")
    values = tuple(_positive_diff(log, log.first_rising(f"EM{i}"), q) for i in range(1, n_sensors + 1))
    return ConcentrationVector(values, **meta)


def inverse_code(v):
    """Reciprocal of every present entry; accepts a vector, a sequence or a scalar."""
    if isinstance(v, ConcentrationVector):
        return tuple(None if d is None else 1.0 / d for d in v.per_sensor)
    if v is None:
        return None
    if isinstance(v, (int, float)):
        return 1.0 / v
    return tuple(None if d is None else 1.0 / d for d in v)


# --- tables ----------------------------------------------------------------


def _fmt(x: float | None) -> str:
    return "" if x is None else "%.12g" % x


def result_rows(vectors: Iterable[ConcentrationVector], sensor_ids: Sequence[int] | None = None):
    """One row per (trial, sensor). ``sensor_ids`` labels the vector entries."""
    for v in vectors:
        ids = sensor_ids or range(1, len(v) + 1)
        for sid, d in zip(ids, v.per_sensor):
            yield {
                "gas": v.gas,
                "level": v.level,
                "trial": v.trial,
                "sensor": sid,
                "dt_s": d,
                "inv_dt_per_s": None if d is None else 1.0 / d,
            }


def write_results(rows: Iterable[dict], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in rows:
            w.writerow([r["gas"], r["level"], r["trial"], r["sensor"], _fmt(r["dt_s"]), _fmt(r["inv_dt_per_s"])])


def read_results(path: str | Path) -> list[dict]:
    rows = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RESULT_COLUMNS:
            raise ValueError(f"{path}: expected columns {','.join(RESULT_COLUMNS)}")
        for r in reader:
            rows.append(
                {
                    "gas": r["gas"],
                    "level": int(r["level"]),
                    "trial": int(r["trial"]),
                    "sensor": int(r["sensor"]),
                    "dt_s": float(r["dt_s"]) if r["dt_s"] else None,
                    "inv_dt_per_s": float(r["inv_dt_per_s"]) if r["inv_dt_per_s"] else None,
                }
            )
    return rows


def vectors_from_rows(rows: Iterable[dict], n_sensors: int = 3) -> list[ConcentrationVector]:
    """Regroup result rows into per-trial vectors, in first-appearance order."""
    grouped: dict[tuple, list] = {}
    for r in rows:
        key = (r["gas"], r["level"], r["trial"])
        slot = grouped.setdefault(key, [None] * n_sensors)
        slot[r["sensor"] - 1] = r["dt_s"]
    return [ConcentrationVector(tuple(v), gas=g, level=lv, trial=t) for (g, lv, t), v in grouped.items()]


def _mean_std(values: list[float]) -> tuple[float, float]:
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / n
    return mean, math.sqrt(var)


def summarize(rows: Iterable[dict], invert_first: bool = True) -> list[dict]:
    """Mean and population std of 1/dt per (gas, level, sensor).

    With ``invert_first`` (the default) each trial's 1/dt is averaged; else the
    mean dt is inverted and the std is propagated to first order.
    """
    groups: dict[tuple, list] = {}
    for r in rows:
        groups.setdefault((r["gas"], r["level"], r["sensor"]), []).append(r["dt_s"])
    out = []
    for (gas, level, sensor) in sorted(groups):
        dts = groups[(gas, level, sensor)]
        present = [d for d in dts if d is not None]
        row = {
            "gas": gas,
            "level": level,
            "sensor": sensor,
            "n_present": len(present),
            "n_trials": len(dts),
            "mean_inv_dt_per_s": None,
            "std_inv_dt_per_s": None,
            "mean_dt_s": None,
        }
        if present:
            mean_dt, std_dt = _mean_std(present)
            row["mean_dt_s"] = mean_dt
            if invert_first:
                row["mean_inv_dt_per_s"], row["std_inv_dt_per_s"] = _mean_std([1.0 / d for d in present])
            else:
                row["mean_inv_dt_per_s"] = 1.0 / mean_dt
                row["std_inv_dt_per_s"] = std_dt / mean_dt**2
        out.append(row)
    return out


def write_summary(summary: Iterable[dict], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for r in summary:
            w.writerow(
                [r["gas"], r["level"], r["sensor"], r["n_present"], r["n_trials"]]
                + [_fmt(r[c]) for c in SUMMARY_COLUMNS[5:]]
            )
