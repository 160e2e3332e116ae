"""Nearest-centroid decoding of gas identity and level from 1/dt vectors.

Distances only use coordinates present in both the query and the class
centroid, so a sensor that produced no EM pulse is simply left out and the
remaining sensors carry the decision.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .events import ConcentrationVector, inverse_code
from .signal_model import Stimulus

SCHEMA_VERSION = 1
STD_FLOOR = 1e-6
PRESENCE_FRACTION = 0.5

ClassKey = tuple[str, int]


class DecodeError(ValueError):
    pass


@dataclass(frozen=True)
class Calibration:
    centroids: dict[ClassKey, tuple[float | None, ...]]
    dispersion: dict[ClassKey, tuple[float | None, ...]]
    config_hash: str = ""
    campaign_id: str = ""
    epsilon: float = STD_FLOOR
    counts: dict[ClassKey, tuple[int, ...]] = field(default_factory=dict, compare=False)

    @property
    def classes(self) -> list[ClassKey]:
        return sorted(self.centroids)

    def to_json(self) -> str:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "config_hash": self.config_hash,
            "campaign_id": self.campaign_id,
            "epsilon": self.epsilon,
            "classes": [
                {
                    "gas": gas,
                    "level": level,
                    "mean_inv_dt": list(self.centroids[(gas, level)]),
                    "std_inv_dt": list(self.dispersion[(gas, level)]),
                    "n_present": list(self.counts.get((gas, level), ())),
                }
                for gas, level in self.classes
            ],
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> Calibration:
        doc = json.loads(text)
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise DecodeError(f"unsupported calibration schema {doc.get('schema_version')!r}")
        centroids, dispersion, counts = {}, {}, {}
        for c in doc["classes"]:
            key = (str(c["gas"]), int(c["level"]))
            centroids[key] = tuple(c["mean_inv_dt"])
            dispersion[key] = tuple(c["std_inv_dt"])
            counts[key] = tuple(c.get("n_present", ()))
        if not centroids:
            raise DecodeError("calibration has no classes")
        return cls(centroids, dispersion, doc.get("config_hash", ""), doc.get("campaign_id", ""),
                   float(doc.get("epsilon", STD_FLOOR)), counts)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> Calibration:
        return cls.from_json(Path(path).read_text())


def _key(stim) -> ClassKey:
    if isinstance(stim, Stimulus):
        return (stim.gas, stim.level)
    gas, level = stim
    return (gas, int(level))


def calibrate(
    labeled: Iterable[tuple[Stimulus | ClassKey, ConcentrationVector]],
    *,
    config_hash: str = "",
    campaign_id: str = "",
    epsilon: float = STD_FLOOR,
) -> Calibration:
    """Per-class mean and population std of each sensor's 1/dt.

    A sensor entry is kept for a class only when it is present in at least
    half of that class's trials.
    """
    per_class: dict[ClassKey, list[tuple]] = {}
    width = None
    for stim, vec in labeled:
        inv = inverse_code(vec)
        if width is None:
            width = len(inv)
        elif len(inv) != width:
            raise DecodeError("concentration vectors differ in length")
        per_class.setdefault(_key(stim), []).append(inv)
    if not per_class:
        raise DecodeError("empty calibration set")

    gases = sorted({g for g, _ in per_class})
    levels = sorted({lv for _, lv in per_class})
    uncovered = [(g, lv) for g in gases for lv in levels if (g, lv) not in per_class]
    if uncovered:
        raise DecodeError(f"uncovered class: no trials for {uncovered}")

    centroids, dispersion, counts = {}, {}, {}
    for key, rows in per_class.items():
        means, stds, present_counts = [], [], []
        for j in range(width):
            vals = [r[j] for r in rows if r[j] is not None]
            present_counts.append(len(vals))
            if vals and len(vals) >= PRESENCE_FRACTION * len(rows):
                mean = math.fsum(vals) / len(vals)
                means.append(mean)
                stds.append(math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / len(vals)))
            else:
                means.append(None)
                stds.append(None)
        if all(m is None for m in means):
            raise DecodeError(f"class {key} has zero usable sensors")
        centroids[key] = tuple(means)
        dispersion[key] = tuple(stds)
        counts[key] = tuple(present_counts)
    return Calibration(centroids, dispersion, config_hash, campaign_id, epsilon, counts)


def class_distance(inv: Sequence[float | None], key: ClassKey, cal: Calibration) -> float | None:
    """Mean squared z-score over coordinates shared by ``inv`` and the centroid."""
    terms = []
    for x, mu, sd in zip(inv, cal.centroids[key], cal.dispersion[key]):
        if x is None or mu is None:
            continue
        z = (x - mu) / max(sd, cal.epsilon)
        terms.append(z * z)
    if not terms:
        return None
    return math.fsum(terms) / len(terms)


def infer(v: ConcentrationVector, cal: Calibration) -> tuple[str, int, float]:
    """Best (gas, level) and its distance; ties go to the lexicographically first class."""
    inv = inverse_code(v)
    if all(x is None for x in inv):
        raise DecodeError("all entries absent")
    best = None
    for key in cal.classes:
        d = class_distance(inv, key, cal)
        if d is not None and (best is None or d < best[1]):
            best = (key, d)
    if best is None:
        raise DecodeError("no calibration class shares a present coordinate with the vector")
    (gas, level), score = best
    return gas, level, score


@dataclass
class Evaluation:
    gas_labels: list[str]
    level_labels: list[int]
    gas_confusion: list[list[int]]
    level_confusion: list[list[int]]
    n: int
    n_correct: int
    n_gas_correct: int
    n_level_correct: int
    n_unclassified: int

    @property
    def accuracy(self) -> float:
        return self.n_correct / self.n

    @property
    def gas_accuracy(self) -> float:
        return self.n_gas_correct / self.n

    @property
    def level_accuracy(self) -> float:
        return self.n_level_correct / self.n

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "accuracy": self.accuracy,
            "gas_accuracy": self.gas_accuracy,
            "level_accuracy": self.level_accuracy,
            "n_unclassified": self.n_unclassified,
            "gas_labels": self.gas_labels,
            "level_labels": self.level_labels,
            "gas_confusion": self.gas_confusion,
            "level_confusion": self.level_confusion,
        }


def evaluate(labeled: Iterable[tuple[Stimulus | ClassKey, ConcentrationVector]], cal: Calibration) -> Evaluation:
    """Confusion matrices (rows = truth, columns = prediction) and accuracies.

    Vectors that cannot be decoded count as wrong and are tallied separately;
    they do not appear in the confusion matrices.
    """
    labeled = list(labeled)
    if not labeled:
        raise DecodeError("empty test set")
    truths = [_key(s) for s, _ in labeled]
    preds = []
    for _, vec in labeled:
        try:
            g, lv, _ = infer(vec, cal)
            preds.append((g, lv))
        except DecodeError:
            preds.append(None)
    gases = sorted({g for g, _ in truths} | {p[0] for p in preds if p})
    levels = sorted({lv for _, lv in truths} | {p[1] for p in preds if p})
    gconf = [[0] * len(gases) for _ in gases]
    lconf = [[0] * len(levels) for _ in levels]
    n_ok = n_gas = n_lvl = n_none = 0
    for t, p in zip(truths, preds):
        if p is None:
            n_none += 1
            continue
        gconf[gases.index(t[0])][gases.index(p[0])] += 1
        lconf[levels.index(t[1])][levels.index(p[1])] += 1
        n_gas += t[0] == p[0]
        n_lvl += t[1] == p[1]
        n_ok += t == p
    return Evaluation(gases, levels, gconf, lconf, len(labeled), n_ok, n_gas, n_lvl, n_none)
