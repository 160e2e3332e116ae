"""Behavioral discrete-time models of the front-end primitives.

Each block is a small state machine advanced with ``step``. Filters use
exponential-Euler updates, which are exact when the input is held constant
over a step. Switches and transistors are ideal. Every analog output is
clamped to the supply rails.

The fused loops in ``_kernels.pyx`` replicate these updates operation for
operation; keep the two in sync.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class LatchRaceError(RuntimeError):
    """Set and reset of the SR latch were asserted in the same step."""


@dataclass(frozen=True)
class Rails:
    v_low: float = 0.0
    v_high: float = 1.8

    def __post_init__(self):
        if not self.v_low < self.v_high:
            raise ValueError("v_low must be below v_high")

    def clamp(self, v: float) -> float:
        if v < self.v_low:
            return self.v_low
        if v > self.v_high:
            return self.v_high
        return v

    def contains(self, v: float) -> bool:
        return self.v_low <= v <= self.v_high


DEFAULT_RAILS = Rails()


def _decay(dt_s: float, tau_s: float) -> float:
    return math.exp(-dt_s / tau_s)


def _check_dt(dt_s: float) -> None:
    if not dt_s > 0:
        raise ValueError("dt_s must be positive")


class HighPass:
    """First-order RC high-pass with a unity-gain buffer.

    The output is referenced to ``ref_v`` (zero by default) so a single-supply
    stage can swing both ways around a bias point.
    """

    def __init__(self, tau_s: float, ref_v: float = 0.0, rails: Rails = DEFAULT_RAILS):
        if not tau_s > 0:
            raise ValueError("tau_s must be positive")
        self.tau_s = tau_s
        self.ref_v = ref_v
        self.rails = rails
        self.memory = 0.0
        self._dt = None
        self._a = 0.0

    def prime(self, v: float) -> None:
        """Settle the capacitor on a constant input ``v``."""
        self.memory = v

    def step(self, input_v: float, dt_s: float) -> float:
        if dt_s != self._dt:
            _check_dt(dt_s)
            self._dt, self._a = dt_s, _decay(dt_s, self.tau_s)
        out = self.rails.clamp(self.ref_v + (input_v - self.memory))
        self.memory = input_v + (self.memory - input_v) * self._a
        return out


class BandPassDiff:
    """Inverting band-pass difference amplifier of the change detector.

    A high-pass section (``tau_fall_s``) feeds a low-pass section
    (``tau_rise_s``); the result is inverted around ``dc_offset_v``::

        H(s) = -gain * s*tau_fall / ((1 + s*tau_fall) * (1 + s*tau_rise))

    A rising input pulls the output below the offset; a constant input leaves
    it at the offset.
    """

    def __init__(
        self,
        gain: float,
        tau_rise_s: float,
        tau_fall_s: float,
        dc_offset_v: float,
        rails: Rails = DEFAULT_RAILS,
    ):
        if not (tau_rise_s > 0 and tau_fall_s > 0):
            raise ValueError("time constants must be positive")
        if not gain > 0:
            raise ValueError("gain must be positive")
        self.gain = gain
        self.tau_rise_s = tau_rise_s
        self.tau_fall_s = tau_fall_s
        self.dc_offset_v = dc_offset_v
        self.rails = rails
        self.hp_memory = 0.0
        self.lp_memory = 0.0
        self._dt = None
        self._a_fall = self._a_rise = 0.0

    def prime(self, v: float) -> None:
        self.hp_memory = v
        self.lp_memory = 0.0

    def step(self, input_v: float, dt_s: float) -> float:
        if dt_s != self._dt:
            _check_dt(dt_s)
            if dt_s > min(self.tau_rise_s, self.tau_fall_s) / 10:
                raise ValueError("dt_s must not exceed a tenth of the smallest time constant")
            self._dt = dt_s
            self._a_fall = _decay(dt_s, self.tau_fall_s)
            self._a_rise = _decay(dt_s, self.tau_rise_s)
        if not math.isfinite(input_v):
            raise ValueError("band-pass input must be finite")
        hp = input_v - self.hp_memory
        self.hp_memory = input_v + (self.hp_memory - input_v) * self._a_fall
        self.lp_memory = hp + (self.lp_memory - hp) * self._a_rise
        return self.rails.clamp(self.dc_offset_v - self.gain * self.lp_memory)

    def transfer_magnitude(self, omega: float) -> float:
        """Analytic |H(j omega)|."""
        wf = omega * self.tau_fall_s
        wr = omega * self.tau_rise_s
        return self.gain * wf / math.sqrt((1 + wf * wf) * (1 + wr * wr))


class Comparator:
    """Ideal comparator with optional symmetric hysteresis.

    With ``inverting=True`` the signal drives the inverting terminal, so the
    output is high while the input sits below the threshold.
    """

    def __init__(
        self,
        threshold_v: float,
        hysteresis_v: float = 0.0,
        inverting: bool = False,
        rails: Rails = DEFAULT_RAILS,
    ):
        if hysteresis_v < 0:
            raise ValueError("hysteresis must be non-negative")
        self.threshold_v = threshold_v
        self.hysteresis_v = hysteresis_v
        self.inverting = inverting
        self.rails = rails
        self.high = False

    @property
    def output_v(self) -> float:
        return self.rails.v_high if self.high else self.rails.v_low

    def step(self, input_v: float) -> float:
        upper = self.threshold_v + 0.5 * self.hysteresis_v
        lower = self.threshold_v - 0.5 * self.hysteresis_v
        if self.inverting:
            if input_v < lower:
                self.high = True
            elif input_v > upper:
                self.high = False
        else:
            if input_v > upper:
                self.high = True
            elif input_v < lower:
                self.high = False
        return self.output_v


class GatedIntegrator:
    """Integrator with an ideal reset switch across its capacitor.

    While enabled it integrates ``input - reset_value_v``; while disabled its
    output is held at ``reset_value_v``.
    """

    def __init__(self, gain_per_s: float, reset_value_v: float, rails: Rails = DEFAULT_RAILS):
        self.gain_per_s = gain_per_s
        self.reset_value_v = reset_value_v
        self.rails = rails
        self.accumulator = rails.clamp(reset_value_v)

    def step(self, input_v: float, enable: bool, dt_s: float) -> float:
        _check_dt(dt_s)
        if enable:
            acc = self.accumulator + self.gain_per_s * (input_v - self.reset_value_v) * dt_s
            self.accumulator = self.rails.clamp(acc)
        else:
            self.accumulator = self.rails.clamp(self.reset_value_v)
        return self.accumulator


class SrLatch:
    def __init__(self, q: bool = False):
        self.q = q

    def step(self, s: bool, r: bool) -> bool:
        if s and r:
            raise LatchRaceError("latch race: set and reset asserted together")
        if s:
            self.q = True
        elif r:
            self.q = False
        return self.q


class RampGenerator:
    """Constant-current source charging C_ramp; discharged instantly when disabled."""

    def __init__(self, ramp_rate_v_per_s: float, rails: Rails = DEFAULT_RAILS):
        if not ramp_rate_v_per_s > 0:
            raise ValueError("ramp rate must be positive")
        self.ramp_rate_v_per_s = ramp_rate_v_per_s
        self.rails = rails
        self.cap_voltage = rails.v_low

    def step(self, enable: bool, dt_s: float) -> float:
        _check_dt(dt_s)
        if enable:
            v = self.cap_voltage + self.ramp_rate_v_per_s * dt_s
            self.cap_voltage = v if v < self.rails.v_high else self.rails.v_high
        else:
            self.cap_voltage = self.rails.v_low
        return self.cap_voltage


def or_gate(*inputs: bool) -> bool:
    return any(inputs)
