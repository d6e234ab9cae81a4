# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sampling kernels; drop-in replacements for ``_fallback``.

Both backends consume the same pre-drawn uniforms, so for a given seed they
produce the same spike trains (barring floating-point ties between a uniform
and a spike probability, which differ only in summation order).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()

NEVER = -(10**9)


cdef inline double _gain(long long since, long tau, long ramp) nogil:
    if since <= tau:
        return 0.0
    if ramp > 0 and since <= tau + ramp:
        return (since - tau) / (ramp + 1.0)
    return 1.0


def sample_batch(const double[:, ::1] W, const double[:, :, ::1] ctx_drive,
                 const long long[:, ::1] last_spike, const double[:, :, ::1] uniforms,
                 double u0, double scale, long tau, long ramp):
    """Simulate ``n`` independent chains; see ``_fallback.sample_batch``."""
    cdef Py_ssize_t n = uniforms.shape[0], T = uniforms.shape[1], K = uniforms.shape[2]
    if W.shape[0] != K or W.shape[1] != K:
        raise ValueError("W does not match the number of neurons")
    if ctx_drive.shape[0] != n or ctx_drive.shape[1] != T or ctx_drive.shape[2] != K:
        raise ValueError("ctx_drive shape mismatch")
    if last_spike.shape[0] != n or last_spike.shape[1] != K:
        raise ValueError("last_spike shape mismatch")
    out_arr = np.zeros((n, T, K), dtype=np.uint8)
    cdef unsigned char[:, :, ::1] out = out_arr
    last_arr = np.array(last_spike, dtype=np.int64, copy=True)
    cdef long long[:, ::1] last = last_arr
    u_arr = np.empty(K, dtype=np.float64)
    cdef double[::1] u = u_arr
    active_arr = np.empty(K, dtype=np.intp)
    cdef Py_ssize_t[::1] active = active_arr
    cdef Py_ssize_t b, t, k, i, j, na
    cdef long long since
    cdef double p, g
    with nogil:
        for b in range(n):
            for t in range(T):
                na = 0
                for k in range(K):
                    since = t - last[b, k]
                    if since >= 1 and since <= tau:
                        active[na] = k
                        na += 1
                for i in range(K):
                    u[i] = 0.0
                for j in range(na):
                    k = active[j]
                    for i in range(K):
                        u[i] += W[k, i]
                for i in range(K):
                    since = t - last[b, i]
                    g = _gain(since, tau, ramp)
                    if g == 0.0:
                        continue
                    p = 1.0 / (1.0 + exp(-((u[i] + ctx_drive[b, t, i]) - u0) / scale))
                    p *= g
                    if uniforms[b, t, i] < p:
                        out[b, t, i] = 1
                        last[b, i] = t
    return out_arr


def refractory_filter(candidates, long tau):
    """Drop candidate spikes within the ``tau`` steps following an earlier spike."""
    cand_arr = np.ascontiguousarray(candidates, dtype=np.uint8)
    if cand_arr.ndim != 2:
        raise ValueError("candidates must be T x K")
    cdef unsigned char[:, ::1] cand = cand_arr
    cdef Py_ssize_t T = cand.shape[0], K = cand.shape[1], t, k
    out_arr = np.zeros((T, K), dtype=np.uint8)
    cdef unsigned char[:, ::1] out = out_arr
    last_arr = np.full(K, NEVER, dtype=np.int64)
    cdef long long[::1] last = last_arr
    with nogil:
        for t in range(T):
            for k in range(K):
                if cand[t, k] != 0 and t - last[k] > tau:
                    out[t, k] = 1
                    last[k] = t
    return out_arr
