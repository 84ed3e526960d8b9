"""Compiled inner loops for the GN integrand and the split-step solver."""

from __future__ import annotations

import cmath
import math

import numpy as np
from numba import njit


@njit(cache=True)
def _interp_index(freq, x):
    n = freq.size
    if n == 1:
        return 0, 0.0
    j = np.searchsorted(freq, x, side="right") - 1
    if j < 0:
        j = 0
    elif j > n - 2:
        j = n - 2
    return j, (x - freq[j]) / (freq[j + 1] - freq[j])


@njit(cache=True)
def _row_value(rows, jz, j, t, nf):
    if nf == 1:
        return rows[jz, 0]
    return rows[jz, j] * (1.0 - t) + rows[jz, j + 1] * t


@njit(cache=True)
def _log_amplitude(rows, j, j1, t1, j2, t2, j3, t3, jf, tf, nf):
    return 0.5 * (_row_value(rows, j, j1, t1, nf) + _row_value(rows, j, j2, t2, nf)
                  + _row_value(rows, j, j3, t3, nf) - _row_value(rows, j, jf, tf, nf))


@njit(cache=True)
def link_power_segments(u, v, f, beta2, beta3, z, h, rows, freq, asymptotic):
    """``|int a(z) exp(j k z) dz|^2`` with ``ln a`` linear on each z segment.

    ``rows[j, :]`` holds ``ln rho`` at ``z[j]`` on ``freq``; ``ln a`` is half
    the sum of the three mixing-frequency rows minus the row at ``f``. When
    ``|k|`` exceeds ``asymptotic`` times the end-point log-slopes, the
    integral is replaced by three terms of its integration-by-parts series.
    """
    n = u.size
    nseg = h.size
    nf = freq.size
    length = z[nseg]
    out = np.empty(n)
    jf, tf = _interp_index(freq, f)
    for i in range(n):
        ui = u[i]
        vi = v[i]
        k = -4.0 * math.pi**2 * ui * vi * (beta2 + math.pi * beta3 * (2.0 * f + ui + vi))
        j1, t1 = _interp_index(freq, f + ui)
        j2, t2 = _interp_index(freq, f + vi)
        j3, t3 = _interp_index(freq, f + ui + vi)
        l0 = _log_amplitude(rows, 0, j1, t1, j2, t2, j3, t3, jf, tf, nf)
        l1 = _log_amplitude(rows, 1, j1, t1, j2, t2, j3, t3, jf, tf, nf)
        lm = _log_amplitude(rows, nseg - 1, j1, t1, j2, t2, j3, t3, jf, tf, nf)
        ln = _log_amplitude(rows, nseg, j1, t1, j2, t2, j3, t3, jf, tf, nf)
        d0 = (l1 - l0) / h[0]
        dn = (ln - lm) / h[nseg - 1]
        if abs(k) > asymptotic * max(abs(d0), abs(dn)):
            ik = 1.0 / complex(0.0, k)
            head = math.exp(l0) * ik * (1.0 - d0 * ik + d0 * d0 * ik * ik)
            tail = cmath.exp(complex(ln, k * length)) * ik * (1.0 - dn * ik + dn * dn * ik * ik)
            acc = tail - head
            out[i] = acc.real**2 + acc.imag**2
            continue
        prev = l0
        acc = 0j
        for j in range(nseg):
            nxt = _log_amplitude(rows, j + 1, j1, t1, j2, t2, j3, t3, jf, tf, nf)
            s = complex(nxt - prev, k * h[j])
            if abs(s) < 1e-3:
                ratio = 1.0 + s * (0.5 + s * (1.0 / 6.0 + s / 24.0))
            else:
                ratio = (cmath.exp(s) - 1.0) / s
            acc += h[j] * cmath.exp(complex(prev, k * z[j])) * ratio
            prev = nxt
        out[i] = acc.real**2 + acc.imag**2
    return out


@njit(cache=True)
def phase_rotate(ex, ey, phase, factor):
    """In place ``E *= exp(-j factor phase)`` for both polarizations."""
    for i in range(ex.size):
        ph = factor * phase[i]
        c = math.cos(ph)
        s = -math.sin(ph)
        a = ex[i]
        ex[i] = complex(a.real * c - a.imag * s, a.real * s + a.imag * c)
        b = ey[i]
        ey[i] = complex(b.real * c - b.imag * s, b.real * s + b.imag * c)


@njit(cache=True)
def total_power(ex, ey, out):
    for i in range(ex.size):
        a = ex[i]
        b = ey[i]
        out[i] = a.real * a.real + a.imag * a.imag + b.real * b.real + b.imag * b.imag


@njit(cache=True)
def dispersion_apply(sx, sy, beta_phase, dz, scale):
    """In place spectrum ``*= scale * exp(-j beta_phase dz)`` for both polarizations."""
    for i in range(sx.size):
        ph = beta_phase[i] * dz
        c = math.cos(ph) * scale
        s = -math.sin(ph) * scale
        a = sx[i]
        sx[i] = complex(a.real * c - a.imag * s, a.real * s + a.imag * c)
        b = sy[i]
        sy[i] = complex(b.real * c - b.imag * s, b.real * s + b.imag * c)
