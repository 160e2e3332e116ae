"""Pure-Python pipeline loops built from the block classes.

Used when the compiled kernel is unavailable, and as the reference the
kernel is tested against. Both return edge indices in the same layout.
"""

from __future__ import annotations

import numpy as np

from .analog_blocks import (
    BandPassDiff,
    Comparator,
    GatedIntegrator,
    HighPass,
    RampGenerator,
    SrLatch,
    or_gate,
)


def _cd_blocks(cfg, s, x0):
    p = cfg.cd[s]
    bp = BandPassDiff(p.gain, p.tau_rise_s, p.tau_fall_s, p.dc_offset_v, cfg.rails)
    bp.prime(x0)
    return bp, Comparator(p.threshold_v, p.hysteresis_v, inverting=True, rails=cfg.rails)


def _em_blocks(cfg, s, x0):
    p = cfg.em[s]
    hpf = HighPass(cfg.hpf_tau_s, ref_v=p.reset_value_v, rails=cfg.rails)
    hpf.prime(x0)
    integ = GatedIntegrator(p.gain_per_s, p.reset_value_v, cfg.rails)
    return hpf, integ, Comparator(p.threshold_v, p.hysteresis_v, rails=cfg.rails)


def run_single(x, cfg, s, record=False):
    """Change detection gates the exposure measurement of sensor index ``s``."""
    dt = cfg.dt_s
    n = len(x)
    x = [float(v) for v in x]
    bp, cd_cmp = _cd_blocks(cfg, s, x[0])
    hpf, integ, em_cmp = _em_blocks(cfg, s, x[0])
    reset_v = cfg.em[s].reset_value_v

    cd_edges, em_edges = [], []
    waves = None
    if record:
        waves = {k: np.empty(n) for k in ("bandpass", "passgate", "integrator")}
    cd_prev = False
    for i in range(n):
        bp_out = bp.step(x[i], dt)
        was = cd_cmp.high
        cd_cmp.step(bp_out)
        if cd_cmp.high != was:
            cd_edges.append(i)

        hpf_out = hpf.step(x[i], dt)
        # pass-gate: the enable seen here is the CD level of the previous step
        gate = hpf_out if cd_prev else reset_v
        acc = integ.step(gate, cd_prev, dt)
        was = em_cmp.high
        em_cmp.step(acc)
        if em_cmp.high != was:
            em_edges.append(i)
        cd_prev = cd_cmp.high

        if record:
            waves["bandpass"][i] = bp_out
            waves["passgate"][i] = gate
            waves["integrator"][i] = acc
    return cd_edges, em_edges, waves


def run_array(x, cfg, record=False):
    dt = cfg.dt_s
    k, n = x.shape
    rows = [[float(v) for v in x[s]] for s in range(k)]
    cds = [_cd_blocks(cfg, s, rows[s][0]) for s in range(k)]
    ems = [_em_blocks(cfg, s, rows[s][0]) for s in range(k)]
    timer = cfg.timer
    ramp_cmp = Comparator(timer.ramp_threshold_v, 0.0, rails=cfg.rails)
    latch = SrLatch()
    ramp = RampGenerator(timer.ramp_rate_v_per_s, cfg.rails)
    n_vpulse = vpulse_steps(cfg)

    edges = [[] for _ in range(2 * k + 2)]
    waves = None
    if record:
        waves = {
            "bandpass": np.empty((k, n)),
            "passgate": np.empty((k, n)),
            "integrator": np.empty((k, n)),
            "ramp": np.empty(n),
        }
    cd_out_prev = False
    q_prev = False
    for i in range(n):
        for s, (bp, cmp) in enumerate(cds):
            bp_out = bp.step(rows[s][i], dt)
            was = cmp.high
            cmp.step(bp_out)
            if cmp.high != was:
                edges[s].append(i)
            if record:
                waves["bandpass"][s, i] = bp_out
        cd_out = or_gate(*(cmp.high for _, cmp in cds))
        if cd_out != cd_out_prev:
            edges[k].append(i)
            cd_out_prev = cd_out

        ramp_cmp.step(ramp.cap_voltage)
        was = latch.q
        q = latch.step(cd_out, or_gate(i < n_vpulse, ramp_cmp.high))
        if q != was:
            edges[k + 1].append(i)
        cap = ramp.step(q, dt)
        if record:
            waves["ramp"][i] = cap

        for s, (hpf, integ, cmp) in enumerate(ems):
            hpf_out = hpf.step(rows[s][i], dt)
            gate = hpf_out if q_prev else cfg.em[s].reset_value_v
            acc = integ.step(gate, q_prev, dt)
            was = cmp.high
            cmp.step(acc)
            if cmp.high != was:
                edges[k + 2 + s].append(i)
            if record:
                waves["passgate"][s, i] = gate
                waves["integrator"][s, i] = acc
        q_prev = q
    return edges, waves


def vpulse_steps(cfg) -> int:
    return max(1, int(round(cfg.timer.vpulse_duration_s / cfg.dt_s)))
