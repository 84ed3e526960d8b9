"""Independent reference computations used to check the library.

Nothing here imports the package's numerical routines; each oracle is a
direct, slow evaluation of the defining formula.
"""

from __future__ import annotations

import numpy as np
from scipy.constants import c as C0, pi
from scipy.integrate import quad


def dispersion_from_phase(beta2: float, beta3: float, lambda0: float, h: float = 1e-11) -> tuple[float, float]:
    """D and S by finite differences of the group delay of the cubic phase.

    The group delay per metre of ``beta(w) = beta2 w^2 / 2 + beta3 w^3 / 6``
    is ``tau(w) = beta2 w + beta3 w^2 / 2`` with ``w`` the offset from the
    carrier. ``D = d tau / d lambda`` and ``S = d D / d lambda``.
    """
    w0 = 2 * pi * C0 / lambda0

    def tau(lam):
        w = 2 * pi * C0 / lam - w0
        return beta2 * w + beta3 * w**2 / 2

    def dee(lam):
        return (tau(lam + h) - tau(lam - h)) / (2 * h)

    D = dee(lambda0)
    S = (dee(lambda0 + h) - dee(lambda0 - h)) / (2 * h)
    return D, S


def raman_gain_fit(f, slope=3.87e-27, support=30e12, amp=4.2e-15, rate=7.20e-13):
    """Triangle plus sine co-polarized gain (m/W), zero outside the support."""
    f = np.asarray(f, dtype=float)
    return np.where(np.abs(f) <= support / 2, slope * f + amp * np.sin(rate * f), 0.0)


def principal_value_real(f: float, gain=raman_gain_fit, support: float = 30e12) -> float:
    """``(1/pi) p.v. int g(x) / (x - f) dx`` by Cauchy-weighted adaptive quadrature."""
    lo, hi = -support / 2, support / 2
    if lo < f < hi:
        val, _ = quad(gain, lo, hi, weight="cauchy", wvar=f, limit=400)
    else:
        val, _ = quad(lambda x: gain(x) / (x - f), lo, hi, limit=400)
    return val / pi


def brute_force_gn(alpha, beta2, beta3, gamma, length, lo, hi, height, f, n, prefactor=16 / 27):
    """Conventional GN NLI PSD of one rectangular channel on an ``n x n`` midpoint grid.

    Uses the exact loss-only distance integral ``(1 - exp((-alpha + j k) L)) / (alpha - j k)``.
    """
    d = (hi - lo) / n
    x = lo + (np.arange(n) + 0.5) * d
    total = 0.0
    for f2 in x:
        f1 = x
        f3 = f1 + f2 - f
        inside = (f3 >= lo) & (f3 <= hi)
        k = -4 * pi**2 * (f1 - f) * (f2 - f) * (beta2 + pi * beta3 * (f1 + f2))
        s = (-alpha + 1j * k) * length
        link = np.abs(-np.expm1(s) / (alpha - 1j * k)) ** 2
        total += np.sum(link[inside])
    return prefactor * gamma**2 * height**3 * total * d * d


def flat_band_triangular_rho(alpha, c_r, p_tot, f_lo, f_hi, z, f):
    """Triangular-gain profile of a flat PSD, with the band integral done analytically."""
    leff = z if alpha == 0 else (1 - np.exp(-alpha * z)) / alpha
    x = p_tot * c_r * leff
    if x == 0:
        return np.exp(-alpha * z) * np.ones_like(np.asarray(f, dtype=float))
    mean_exp = (np.exp(-x * f_lo) - np.exp(-x * f_hi)) / (x * (f_hi - f_lo))
    return np.exp(-alpha * z - x * np.asarray(f)) / mean_exp


def two_tone_powers(p_low, p_high, coupling, alpha, z):
    """Hand-solved two-tone Raman exchange ``dP_l = -a P_l + c P_l P_h``, ``dP_h = -a P_h - c P_l P_h``.

    The total decays as ``exp(-a z)``; the low-tone share follows a logistic
    law in the effective length.
    """
    total = p_low + p_high
    leff = z if alpha == 0 else (1 - np.exp(-alpha * z)) / alpha
    r = (p_low / p_high) * np.exp(coupling * total * leff)
    share = r / (1 + r)
    return total * np.exp(-alpha * z) * share, total * np.exp(-alpha * z) * (1 - share)


def two_tone_field_rk4(e, coupling, alpha, length, tol=1e-10):
    """Four coupled field equations (x/y of a low and a high tone) by RK4 with step doubling.

    ``e = [ex0, ey0, exk, eyk]``; ``coupling`` is ``gamma f_r g_r(separation)``.
    """

    def rhs(v):
        ex0, ey0, exk, eyk = v
        return np.array([
            -alpha / 2 * ex0 + coupling * (ex0 * abs(exk) ** 2 + ey0 * np.conj(eyk) * exk),
            -alpha / 2 * ey0 + coupling * (ey0 * abs(eyk) ** 2 + ex0 * np.conj(exk) * eyk),
            -alpha / 2 * exk - coupling * (exk * abs(ex0) ** 2 + ex0 * eyk * np.conj(ey0)),
            -alpha / 2 * eyk - coupling * (eyk * abs(ey0) ** 2 + ey0 * exk * np.conj(ex0)),
        ])

    def rk4(v, h):
        k1 = rhs(v)
        k2 = rhs(v + h / 2 * k1)
        k3 = rhs(v + h / 2 * k2)
        k4 = rhs(v + h * k3)
        return v + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

    v = np.asarray(e, dtype=complex)
    z, h = 0.0, length / 200
    scale = np.abs(v).max()
    while z < length:
        h = min(h, length - z)
        full = rk4(v, h)
        half = rk4(rk4(v, h / 2), h / 2)
        err = np.abs(full - half).max() / scale
        if err > tol:
            h /= 2
            continue
        v, z = half, z + h
        if err < tol / 64:
            h *= 2
    return v
