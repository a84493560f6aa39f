"""Per-packet sample-path kernels.

Both backends take pre-drawn arrays for packets ``0..n`` (plus one extra
transmission time so the last packet's fate is known) and return

``peaks, areas, spans, delivered, waits, gaps``

where ``peaks/areas/spans`` are per counted delivery (peak age, area under
the age curve since the previous delivery, and that interval's length),
``delivered`` flags every packet, ``waits`` are queueing delays and ``gaps``
the inter-generation times ``Z``. Deliveries of packets with index below
``warm`` only serve as reference points and are not counted.
"""
import numpy as np

from .._accel import njit


@njit(cache=True)
def _nonpreemptive_loop(T, C, xi, warm):
    n = C.shape[0]
    waits = np.zeros(n)
    gaps = np.zeros(n)
    delivered = np.ones(n, dtype=np.bool_)
    m = n - warm if warm < n else 0
    peaks = np.empty(m)
    areas = np.empty(m)
    spans = np.empty(m)
    # packet 0 goes out at -T0 - C0 and is delivered at 0
    s_prev = -T[0] - C[0]
    d_prev = 0.0
    gaps[0] = T[0] + min(xi[0], C[0])
    j = 0
    for k in range(1, n):
        s = s_prev + gaps[k - 1]
        w = d_prev - s - T[k]
        if w < 0.0:
            w = 0.0
        d = s + T[k] + w + C[k]
        waits[k] = w
        gaps[k] = T[k] + w + min(xi[k], C[k])
        if k >= warm:
            span = d - d_prev
            age0 = d_prev - s_prev
            peaks[j] = d - s_prev
            areas[j] = age0 * span + 0.5 * span * span
            spans[j] = span
            j += 1
        s_prev = s
        d_prev = d
    return peaks[:j], areas[:j], spans[:j], delivered, waits, gaps


@njit(cache=True)
def _preemptive_loop(T, C, xi, warm):
    n = C.shape[0]
    gaps = np.empty(n)
    delivered = np.zeros(n, dtype=np.bool_)
    peaks = np.empty(n)
    areas = np.empty(n)
    spans = np.empty(n)
    for i in range(n):
        gaps[i] = T[i] + min(xi[i], C[i])
    delivered[0] = True
    s = -T[0] - C[0]
    s_ref = s
    d_ref = 0.0
    j = 0
    for i in range(1, n):
        s = s + gaps[i - 1]
        # ties count as delivered
        if C[i] <= xi[i] + T[i + 1]:
            delivered[i] = True
            d = s + T[i] + C[i]
            if i >= warm:
                span = d - d_ref
                age0 = d_ref - s_ref
                peaks[j] = d - s_ref
                areas[j] = age0 * span + 0.5 * span * span
                spans[j] = span
                j += 1
            s_ref = s
            d_ref = d
    return peaks[:j], areas[:j], spans[:j], delivered, np.zeros(n), gaps


def nonpreemptive_numba(T, C, xi, warm):
    return _nonpreemptive_loop(T, C, xi, warm)


def preemptive_numba(T, C, xi, warm):
    return _preemptive_loop(T, C, xi, warm)


def nonpreemptive_numpy(T, C, xi, warm):
    n = C.shape[0]
    T = T[:n]
    served = np.minimum(xi, C)
    # the server is still busy for C - min(xi, C) after the next generation
    waits = np.zeros(n)
    waits[1:] = np.maximum(C[:-1] - served[:-1] - T[1:], 0.0)
    gaps = T + waits + served
    s = np.cumsum(np.concatenate(([-T[0] - C[0]], gaps[:-1])))
    d = s + T + waits + C
    d[0] = 0.0
    return _collect(s, d, np.arange(n), warm) + (np.ones(n, dtype=bool), waits, gaps)


def preemptive_numpy(T, C, xi, warm):
    n = C.shape[0]
    gaps = T[:n] + np.minimum(xi, C)
    s = np.cumsum(np.concatenate(([-T[0] - C[0]], gaps[:-1])))
    delivered = C <= xi + T[1:]
    delivered[0] = True
    idx = np.flatnonzero(delivered)
    d = s[idx] + T[idx] + C[idx]
    d[0] = 0.0
    return _collect(s[idx], d, idx, warm) + (delivered, np.zeros(n), gaps)


def _collect(s, d, idx, warm):
    keep = idx[1:] >= warm
    span = (d[1:] - d[:-1])[keep]
    age0 = (d[:-1] - s[:-1])[keep]
    peaks = (d[1:] - s[:-1])[keep]
    return peaks, age0 * span + 0.5 * span * span, span


KERNELS = {
    ("non_preemptive", "numba"): nonpreemptive_numba,
    ("preemptive", "numba"): preemptive_numba,
    ("non_preemptive", "numpy"): nonpreemptive_numpy,
    ("preemptive", "numpy"): preemptive_numpy,
}
