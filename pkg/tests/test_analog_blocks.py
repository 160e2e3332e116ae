import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mox_frontend.analog_blocks import (
    BandPassDiff,
    Comparator,
    GatedIntegrator,
    HighPass,
    LatchRaceError,
    Rails,
    RampGenerator,
    SrLatch,
    or_gate,
)

WIDE = Rails(-100.0, 100.0)


def drive(block, xs, dt):
    return np.array([block.step(float(x), dt) for x in xs])


def sine_amplitude(y, t, omega):
    """Least-squares amplitude of the omega component."""
    basis = np.column_stack([np.sin(omega * t), np.cos(omega * t), np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    return math.hypot(coef[0], coef[1])


def measured_gain(make, omega, dt, settle, periods=5):
    period = 2 * math.pi / omega
    n_settle = int(settle / dt)
    n_meas = int(round(periods * period / dt))
    t = np.arange(n_settle + n_meas) * dt
    y = drive(make(), np.sin(omega * t), dt)
    return sine_amplitude(y[n_settle:], t[n_settle:], omega)


# --- band-pass difference amplifier ---------------------------------------


def test_bandpass_rejects_dc():
    bp = BandPassDiff(5.0, 0.02, 0.2, 1.2)
    bp.prime(0.7)
    out = drive(bp, np.full(5000, 0.7), 1e-3)
    assert np.all(out == 1.2)


def test_bandpass_dc_settles_from_step():
    bp = BandPassDiff(5.0, 0.02, 0.2, 1.2, WIDE)
    out = drive(bp, np.full(10000, 0.3), 1e-3)
    assert abs(out[-1] - 1.2) < 1e-6 * 1.8


def test_bandpass_ramp_response():
    # H(s) ~ -gain*tau_fall*s at low frequency: a ramp of slope m settles at
    # offset - gain*m*tau_fall
    gain, tr, tf, m = 3.0, 0.02, 0.25, 0.4
    dt = tr / 100
    bp = BandPassDiff(gain, tr, tf, 0.0, WIDE)
    t = np.arange(int(3.0 / dt)) * dt
    out = drive(bp, m * t, dt)
    expected = -gain * m * tf
    assert out[-1] == pytest.approx(expected, rel=0.01)


@pytest.mark.parametrize("omega", [0.4, 2.0, 10.0, 40.0, 200.0])
def test_bandpass_bode_magnitude(omega):
    tr, tf = 0.02, 0.5
    dt = tr / 100
    make = lambda: BandPassDiff(1.0, tr, tf, 0.0, WIDE)
    got = measured_gain(make, omega, dt, settle=6 * tf)
    assert got == pytest.approx(make().transfer_magnitude(omega), rel=0.02)


def test_bandpass_gain_peaks_between_corners():
    tr, tf = 0.02, 0.5
    dt = tr / 100
    make = lambda: BandPassDiff(1.0, tr, tf, 0.0, WIDE)
    omegas = np.geomspace(0.2, 500, 13)
    gains = [measured_gain(make, w, dt, settle=6 * tf, periods=3) for w in omegas]
    peak = omegas[int(np.argmax(gains))]
    assert 1 / tf < peak < 1 / tr
    assert gains[0] < max(gains) and gains[-1] < max(gains)


def test_bandpass_rising_input_pulls_output_down():
    bp = BandPassDiff(10.0, 0.02, 0.2, 1.2)
    out = drive(bp, np.linspace(0.0, 0.5, 500), 1e-3)
    assert out[-1] < 1.2


def test_bandpass_rejects_coarse_dt_and_nan():
    bp = BandPassDiff(1.0, 0.02, 0.2, 0.0)
    with pytest.raises(ValueError):
        bp.step(0.0, 0.01)
    with pytest.raises(ValueError):
        BandPassDiff(1.0, 0.02, 0.2, 0.0).step(float("nan"), 1e-3)


# --- comparator -----------------------------------------------------------


def test_comparator_far_below_stays_low():
    c = Comparator(0.9)
    assert c.step(-0.1) == 0.0


def test_comparator_transitions_at_crossing_step():
    c = Comparator(0.9)
    outs = [c.step(v) for v in (0.5, 0.8, 0.95, 1.0)]
    assert outs == [0.0, 0.0, 1.8, 1.8]


def test_comparator_hysteresis_holds_high():
    c = Comparator(0.9, hysteresis_v=0.1)
    c.step(1.0)
    assert c.high
    # hand trace: band is (0.85, 0.95); +-0.04 never leaves it
    for v in (0.94, 0.86, 0.93, 0.87, 0.9):
        assert c.step(v) == 1.8
    assert c.step(0.84) == 0.0


def test_comparator_inverting():
    c = Comparator(1.0, inverting=True)
    assert c.step(1.1) == 0.0
    assert c.step(0.9) == 1.8
    assert c.step(1.05) == 0.0


# --- high-pass ----------------------------------------------------------


def test_highpass_dc_rejection():
    hp = HighPass(0.1)
    out = drive(hp, np.full(5000, 1.0), 1e-3)
    assert abs(out[-1]) < 1e-3 * 1.8


def test_highpass_step_response():
    tau = 0.2
    dt = tau / 100
    hp = HighPass(tau)
    out = drive(hp, np.ones(500), dt)
    t = np.arange(500) * dt
    assert out[0] == 1.0
    np.testing.assert_allclose(out, np.exp(-t / tau), rtol=0.01)


def test_highpass_corner_gain():
    tau = 0.1
    got = measured_gain(lambda: HighPass(tau, rails=WIDE), 1 / tau, tau / 100, settle=10 * tau)
    assert got == pytest.approx(1 / math.sqrt(2), abs=0.01)


def test_highpass_reference_offset():
    hp = HighPass(0.1, ref_v=0.9)
    hp.prime(0.4)
    assert hp.step(0.4, 1e-3) == 0.9
    assert hp.step(0.5, 1e-3) == pytest.approx(1.0)


# --- gated integrator ------------------------------------------------------


def test_integrator_disabled_holds_reset():
    g = GatedIntegrator(50.0, 0.9)
    out = [g.step(1.5, False, 1e-3) for _ in range(100)]
    assert set(out) == {0.9}


def test_integrator_constant_input_closed_form():
    gain, reset, c, dt, n = 2.5, 0.2, 0.35, 1e-3, 400
    g = GatedIntegrator(gain, reset)
    for _ in range(n):
        out = g.step(c, True, dt)
    T = n * dt
    assert out - reset == pytest.approx(gain * (c - reset) * T, rel=1e-9)


def test_integrator_clamps_at_rail():
    g = GatedIntegrator(100.0, 0.9)
    out = [g.step(1.8, True, 1e-3) for _ in range(1000)]
    assert out[-1] == 1.8 and all(math.isfinite(v) for v in out)


def test_integrator_reset_on_disable():
    g = GatedIntegrator(10.0, 0.9)
    for _ in range(50):
        g.step(1.2, True, 1e-3)
    assert g.accumulator > 0.9
    assert g.step(1.2, False, 1e-3) == 0.9


# --- SR latch ---------------------------------------------------------------


@pytest.mark.parametrize("q0", [False, True])
def test_latch_set(q0):
    assert SrLatch(q0).step(True, False) is True


@pytest.mark.parametrize("q0", [False, True])
def test_latch_hold_and_reset(q0):
    assert SrLatch(q0).step(False, False) is q0
    assert SrLatch(q0).step(False, True) is False


def test_latch_race():
    with pytest.raises(LatchRaceError, match="latch race"):
        SrLatch().step(True, True)


# --- ramp generator -------------------------------------------------------


def test_ramp_closed_form():
    r = RampGenerator(0.3)
    n, dt = 2000, 1e-3
    for _ in range(n):
        v = r.step(True, dt)
    assert v == pytest.approx(0.3 * n * dt, rel=1e-12)


@pytest.mark.parametrize("width", [0.5, 2.0, 3.0])
def test_ramp_comparator_fires_after_width(width):
    dt = 1e-3
    r = RampGenerator(0.9 / width)
    c = Comparator(0.9)
    i = 0
    while not c.high:
        c.step(r.step(True, dt))
        i += 1
    assert i * dt == pytest.approx(width, abs=dt)


def test_ramp_discharges_when_disabled():
    r = RampGenerator(1.0)
    for _ in range(500):
        r.step(True, 1e-3)
    assert r.step(False, 1e-3) == 0.0


def test_ramp_clamps_at_rail():
    r = RampGenerator(10.0)
    for _ in range(1000):
        v = r.step(True, 1e-3)
    assert v == 1.8


def test_or_gate():
    assert or_gate(False, False, False) is False
    assert or_gate(False, True, False) is True
    assert or_gate(True, False, False) is True


# --- convergence and bounds -----------------------------------------------


def _at_time(make, f, T, dt, enable=None):
    block = make()
    n = int(round(T / dt))
    out = None
    for i in range(n):
        x = f(i * dt)
        out = block.step(x, True, dt) if enable else block.step(x, dt)
    return out


SMOOTH = lambda t: 0.5 + 0.3 * math.sin(3.0 * t) + 0.2 * (1 - math.exp(-t / 0.3))


@pytest.mark.parametrize(
    "make,enable",
    [
        (lambda: HighPass(0.2, rails=WIDE), False),
        (lambda: BandPassDiff(2.0, 0.05, 0.3, 0.0, WIDE), False),
        (lambda: GatedIntegrator(3.0, 0.1, WIDE), True),
    ],
    ids=["highpass", "bandpass", "integrator"],
)
def test_richardson_first_order(make, enable):
    T, dt = 0.8, 2e-3
    y1, y2, y4 = (_at_time(make, SMOOTH, T, d, enable) for d in (dt, dt / 2, dt / 4))
    ratio = (y1 - y2) / (y2 - y4)
    assert 1.7 < ratio < 2.3


def test_ramp_is_exact_at_any_dt():
    values = []
    for dt in (4e-3, 2e-3, 1e-3):
        r = RampGenerator(0.25)
        for _ in range(int(round(1.0 / dt))):
            v = r.step(True, dt)
        values.append(v)
    np.testing.assert_allclose(values, 0.25, rtol=1e-12)


voltages = st.floats(-5.0, 5.0, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(st.lists(voltages, min_size=1, max_size=200), st.lists(st.booleans(), min_size=200, max_size=200))
def test_outputs_stay_within_rails(xs, enables):
    rails = Rails()
    dt = 1e-3
    blocks = [
        BandPassDiff(20.0, 0.01, 0.1, 1.2),
        HighPass(0.05, ref_v=0.9),
    ]
    integ = GatedIntegrator(500.0, 0.9)
    ramp = RampGenerator(50.0)
    cmp = Comparator(0.9)
    for x, en in zip(xs, enables):
        for b in blocks:
            assert rails.contains(b.step(x, dt))
        assert rails.contains(integ.step(x, en, dt))
        assert rails.contains(ramp.step(en, dt))
        assert cmp.step(x) in (rails.v_low, rails.v_high)


@settings(max_examples=30, deadline=None)
@given(st.lists(voltages, min_size=1, max_size=100))
def test_steps_are_deterministic(xs):
    def run():
        bp, hp = BandPassDiff(5.0, 0.01, 0.1, 1.0), HighPass(0.1, ref_v=0.9)
        return [(bp.step(x, 1e-3), hp.step(x, 1e-3)) for x in xs]

    assert run() == run()
