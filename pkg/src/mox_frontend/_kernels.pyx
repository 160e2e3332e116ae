# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Fused per-timestep loops for the single-sensor and array front-ends.

Arithmetic mirrors the block classes in ``analog_blocks`` operation for
operation so both backends produce identical event logs.
"""

import numpy as np

from .analog_blocks import LatchRaceError


cdef inline double _clamp(double v, double lo, double hi) noexcept nogil:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


cdef inline bint _cmp(bint high, double v, double thr, double hyst, bint inverting) noexcept nogil:
    cdef double upper = thr + 0.5 * hyst
    cdef double lower = thr - 0.5 * hyst
    if inverting:
        if v < lower:
            return True
        if v > upper:
            return False
    else:
        if v > upper:
            return True
        if v < lower:
            return False
    return high


def run_single(
    const double[::1] x,
    double dt,
    const double[::1] cd,
    double a_hp,
    const double[::1] em,
    double v_low,
    double v_high,
    bint record=False,
):
    """cd = (gain, a_fall, a_rise, offset, threshold, hysteresis);
    em = (reset_value, gain_per_s, threshold, hysteresis).

    Returns (cd_edge_indices, em_edge_indices, waveforms or None).
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i
    cdef double xi, hp, bp_out, hpf_out, gate, acc
    cdef double hpm = x[0], lpm = 0.0, hfm = x[0]
    cdef double g_cd = cd[0], af = cd[1], ar = cd[2], off = cd[3], thr_cd = cd[4], hy_cd = cd[5]
    cdef double ref = em[0], g_em = em[1], thr_em = em[2], hy_em = em[3]
    cdef bint cd_hi = False, em_hi = False, cd_prev = False, new
    cdef double[::1] w_bp, w_hpf, w_int
    cd_edges = []
    em_edges = []

    if record:
        waves = {
            "bandpass": np.empty(n),
            "passgate": np.empty(n),
            "integrator": np.empty(n),
        }
        w_bp = waves["bandpass"]
        w_hpf = waves["passgate"]
        w_int = waves["integrator"]
    else:
        waves = None

    acc = _clamp(ref, v_low, v_high)
    for i in range(n):
        xi = x[i]
        hp = xi - hpm
        hpm = xi + (hpm - xi) * af
        lpm = hp + (lpm - hp) * ar
        bp_out = _clamp(off - g_cd * lpm, v_low, v_high)
        new = _cmp(cd_hi, bp_out, thr_cd, hy_cd, True)
        if new != cd_hi:
            cd_edges.append(i)
            cd_hi = new

        hpf_out = _clamp(ref + (xi - hfm), v_low, v_high)
        hfm = xi + (hfm - xi) * a_hp
        if cd_prev:
            gate = hpf_out
            acc = _clamp(acc + g_em * (gate - ref) * dt, v_low, v_high)
        else:
            gate = ref
            acc = _clamp(ref, v_low, v_high)
        new = _cmp(em_hi, acc, thr_em, hy_em, False)
        if new != em_hi:
            em_edges.append(i)
            em_hi = new
        cd_prev = cd_hi

        if record:
            w_bp[i] = bp_out
            w_hpf[i] = gate
            w_int[i] = acc
    return cd_edges, em_edges, waves


def run_array(
    const double[:, ::1] x,
    double dt,
    const double[:, ::1] cd,
    double a_hp,
    const double[:, ::1] em,
    double ramp_rate,
    double ramp_threshold,
    Py_ssize_t n_vpulse,
    double v_low,
    double v_high,
    bint record=False,
):
    """x has one row per sensor. Returns (edges, waveforms or None) where
    edges lists edge indices for CD1..CDk, CD_out, Q_out, EM1..EMk.
    """
    cdef Py_ssize_t k = x.shape[0]
    cdef Py_ssize_t n = x.shape[1]
    cdef Py_ssize_t i, s
    cdef double xi, hp, bp_out, hpf_out, gate, cap = v_low, v
    cdef bint cd_out, cd_out_prev = False, vp, rc = False, q = False, q_prev = False, new
    cdef double[::1] hpm = np.empty(k), lpm = np.zeros(k), hfm = np.empty(k), acc = np.empty(k)
    cdef double[::1] w_cap, w_q
    cdef double[:, ::1] w_bp, w_gate, w_int
    cdef unsigned char[::1] cd_hi = np.zeros(k, dtype=np.uint8)
    cdef unsigned char[::1] em_hi = np.zeros(k, dtype=np.uint8)

    edges = [[] for _ in range(2 * k + 2)]
    for s in range(k):
        hpm[s] = x[s, 0]
        hfm[s] = x[s, 0]
        acc[s] = _clamp(em[s, 0], v_low, v_high)

    if record:
        waves = {
            "bandpass": np.empty((k, n)),
            "passgate": np.empty((k, n)),
            "integrator": np.empty((k, n)),
            "ramp": np.empty(n),
        }
        w_bp = waves["bandpass"]
        w_gate = waves["passgate"]
        w_int = waves["integrator"]
        w_cap = waves["ramp"]
    else:
        waves = None

    for i in range(n):
        cd_out = False
        for s in range(k):
            xi = x[s, i]
            hp = xi - hpm[s]
            hpm[s] = xi + (hpm[s] - xi) * cd[s, 1]
            lpm[s] = hp + (lpm[s] - hp) * cd[s, 2]
            bp_out = _clamp(cd[s, 3] - cd[s, 0] * lpm[s], v_low, v_high)
            new = _cmp(cd_hi[s], bp_out, cd[s, 4], cd[s, 5], True)
            if new != cd_hi[s]:
                edges[s].append(i)
                cd_hi[s] = new
            if cd_hi[s]:
                cd_out = True
            if record:
                w_bp[s, i] = bp_out
        if cd_out != cd_out_prev:
            edges[k].append(i)
            cd_out_prev = cd_out

        vp = i < n_vpulse
        rc = _cmp(rc, cap, ramp_threshold, 0.0, False)
        if cd_out and (vp or rc):
            raise LatchRaceError("latch race: set and reset asserted together")
        if cd_out:
            new = True
        elif vp or rc:
            new = False
        else:
            new = q
        if new != q:
            edges[k + 1].append(i)
            q = new
        if q:
            v = cap + ramp_rate * dt
            cap = v if v < v_high else v_high
        else:
            cap = v_low
        if record:
            w_cap[i] = cap

        for s in range(k):
            xi = x[s, i]
            hpf_out = _clamp(em[s, 0] + (xi - hfm[s]), v_low, v_high)
            hfm[s] = xi + (hfm[s] - xi) * a_hp
            if q_prev:
                gate = hpf_out
                acc[s] = _clamp(acc[s] + em[s, 1] * (gate - em[s, 0]) * dt, v_low, v_high)
            else:
                gate = em[s, 0]
                acc[s] = _clamp(em[s, 0], v_low, v_high)
            new = _cmp(em_hi[s], acc[s], em[s, 2], em[s, 3], False)
            if new != em_hi[s]:
                edges[k + 2 + s].append(i)
                em_hi[s] = new
            if record:
                w_gate[s, i] = gate
                w_int[s, i] = acc[s]
        q_prev = q
    return edges, waves
