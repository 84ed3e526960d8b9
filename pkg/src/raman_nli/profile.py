"""Normalized signal power evolution under loss and inter-channel Raman scattering."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.integrate import solve_ivp

from .errors import CoverageError, DegenerateInputError, InvalidArgumentError, StiffnessError
from .fiber import DB_PER_NEPER, FiberSpec, SignalPsd
from .raman import RamanSpectrum


def default_z_grid(length: float, n: int = 1000, first: float | None = None) -> np.ndarray:
    """Logarithmically spaced distances on ``[0, length]`` starting with 0."""
    if n < 2:
        raise InvalidArgumentError("z grid needs at least two points")
    first = length * 1e-4 if first is None else first
    z = np.concatenate(([0.0], np.geomspace(first, length, n - 1)))
    z[-1] = length
    return z


@dataclass(frozen=True, eq=False)
class PowerProfile:
    """Per-frequency signal power normalized to its launch value.

    Attributes
    ----------
    z : ndarray, shape (nz,)
        Distances (m), starting at 0.
    freq : ndarray, shape (nf,)
        Increasing frequency offsets (Hz).
    rho : ndarray, shape (nz, nf)
        Linear power ratio ``P(z, f) / P(0, f)``.
    """

    z: np.ndarray
    freq: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        if self.rho.shape != (self.z.size, self.freq.size):
            raise InvalidArgumentError("rho must have shape (len(z), len(freq))")
        if np.any(~(self.rho > 0)):
            raise InvalidArgumentError("power profile must be strictly positive")

    @property
    def length(self) -> float:
        return float(self.z[-1])

    @property
    def rho_db(self) -> np.ndarray:
        return 10 * np.log10(self.rho)

    @property
    def is_flat(self) -> bool:
        """True when every frequency sees the same evolution."""
        return bool(np.all(self.rho == self.rho[:, :1]))

    def log_rho(self, z, f) -> np.ndarray:
        """``ln rho`` at distances ``z`` (1-D) and frequencies ``f`` (any shape).

        Linear interpolation in both variables; linear extrapolation in
        frequency beyond the stored grid (exact for exponential tilts).
        Returns an array of shape ``(len(z),) + f.shape``.
        """
        z = np.atleast_1d(np.asarray(z, dtype=float))
        f = np.asarray(f, dtype=float)
        if z.min() < self.z[0] - 1e-9 or z.max() > self.z[-1] * (1 + 1e-12) + 1e-9:
            raise CoverageError("requested distances outside the profile")
        logr = np.log(self.rho)
        iz = np.clip(np.searchsorted(self.z, z, side="right") - 1, 0, self.z.size - 2)
        tz = ((z - self.z[iz]) / (self.z[iz + 1] - self.z[iz]))[:, None]
        rows = logr[iz] * (1 - tz) + logr[iz + 1] * tz
        if self.freq.size == 1:
            return np.broadcast_to(rows[:, :1].reshape((z.size,) + (1,) * f.ndim), (z.size,) + f.shape).copy()
        flat = f.ravel()
        jf = np.clip(np.searchsorted(self.freq, flat, side="right") - 1, 0, self.freq.size - 2)
        tf = (flat - self.freq[jf]) / (self.freq[jf + 1] - self.freq[jf])
        out = rows[:, jf] * (1 - tf) + rows[:, jf + 1] * tf
        return out.reshape((z.size,) + f.shape)

    def at(self, z, f) -> np.ndarray:
        return np.exp(self.log_rho(z, f))

    def mirrored(self) -> "PowerProfile":
        return PowerProfile(self.z, -self.freq[::-1].copy(), self.rho[:, ::-1].copy())


def uniform_loss_profile(fiber: FiberSpec, z_grid=None, f_grid=None) -> PowerProfile:
    """Profile without Raman scattering, ``rho = exp(-alpha z)``."""
    z = default_z_grid(fiber.length) if z_grid is None else np.asarray(z_grid, dtype=float)
    f = np.array([0.0]) if f_grid is None else np.asarray(f_grid, dtype=float)
    rho = np.repeat(np.exp(-fiber.alpha * z)[:, None], f.size, axis=1)
    return PowerProfile(z, f, rho)


def triangular_profile(psd: SignalPsd, fiber: FiberSpec, z_grid=None, f_grid=None) -> PowerProfile:
    """Closed-form profile for a linear (triangular) Raman gain slope.

    ``rho(z, f) = exp(-alpha z - x f) * P_tot / int G(v) exp(-x v) dv`` with
    ``x = P_tot C_r L_eff(z)``; the integral is a trapezoid on the PSD grid.
    """
    if not psd.total_power > 0:
        raise DegenerateInputError("triangular profile needs a signal with non-zero power")
    z = default_z_grid(fiber.length) if z_grid is None else np.asarray(z_grid, dtype=float)
    f = psd.freq if f_grid is None else np.asarray(f_grid, dtype=float)
    x = psd.total_power * fiber.c_r * fiber.effective_length_at(z)
    tilt_db = DB_PER_NEPER * abs(x[-1]) * (psd.band[1] - psd.band[0])
    if tilt_db > 2.0:
        warnings.warn(f"Raman tilt {tilt_db:.2f} dB exceeds the 2 dB first-order validity range", stacklevel=2)
    weight = np.trapezoid(psd.psd, psd.freq)
    # shift the exponent by the band centre to keep exp() well scaled
    centre = 0.5 * (psd.band[0] + psd.band[1])
    denom = np.trapezoid(psd.psd[None, :] * np.exp(-x[:, None] * (psd.freq[None, :] - centre)), psd.freq, axis=1)
    log_rho = -fiber.alpha * z[:, None] - x[:, None] * (f[None, :] - centre) - np.log(denom / weight)[:, None]
    rho = np.exp(log_rho)
    rho[0] = 1.0
    return PowerProfile(z, f, rho)


def _channelize(psd: SignalPsd, bin_width: float) -> tuple[np.ndarray, np.ndarray]:
    """Split each PSD block into equal bins; return power-weighted centres and bin powers."""
    centres, powers = [], []
    for lo, hi, height in psd.blocks:
        n = max(2, int(np.ceil((hi - lo) / bin_width - 1e-9)))
        edges = np.linspace(lo, hi, n + 1)
        centres.append(0.5 * (edges[:-1] + edges[1:]))
        powers.append(np.full(n, height * (hi - lo) / n))
    return np.concatenate(centres), np.concatenate(powers)


def raman_ode_profile(
    psd: SignalPsd,
    spectrum: RamanSpectrum,
    fiber: FiberSpec,
    z_grid=None,
    channelization: float | None = None,
    photon_ratio: bool = False,
    rtol: float = 1e-10,
) -> PowerProfile:
    """Integrate the coupled Raman gain equations over a binned PSD.

    ``dP_i/dz = -alpha P_i + sum_k g(f_k - f_i) / (2 A_eff) P_k P_i``
    with ``g`` the co-polarized gain of ``spectrum``. Each PSD block is
    divided into at least two bins of width ``channelization`` (default:
    half the narrowest block).

    Parameters
    ----------
    photon_ratio : bool
        Scale the depletion of a bin by the photon-energy ratio of the pair.

    Returns
    -------
    PowerProfile
        Frequencies are the bin centres.
    """
    if not psd.total_power > 0:
        raise DegenerateInputError("Raman ODE needs a signal with non-zero power")
    z = default_z_grid(fiber.length) if z_grid is None else np.asarray(z_grid, dtype=float)
    widths = psd.blocks[:, 1] - psd.blocks[:, 0]
    bin_width = widths.min() / 2 if channelization is None else channelization
    f, p0 = _channelize(psd, bin_width)
    coupling = spectrum.gain_coefficient(f[None, :] - f[:, None], fiber.a_eff)
    if photon_ratio:
        nu = SPEED_OF_LIGHT / fiber.lambda0 + f
        ratio = nu[:, None] / nu[None, :]
        coupling = np.where(coupling < 0, coupling * ratio, coupling)

    def rhs(_, y):
        # evolve the log-power to keep relative accuracy in every bin
        return -fiber.alpha + coupling @ np.exp(y)

    sol = solve_ivp(rhs, (z[0], z[-1]), np.log(p0), method="DOP853", t_eval=z, rtol=rtol, atol=rtol * 1e-3)
    if not sol.success:
        raise StiffnessError(f"Raman ODE integration failed at z = {sol.t[-1]:.6g} m: {sol.message}")
    log_rho = sol.y.T - np.log(p0)[None, :]
    log_rho[0] = 0.0
    return PowerProfile(z, f, np.exp(log_rho))


def two_tone_closed_form(p_low: float, p_high: float, gain_coefficient: float, alpha: float, z):
    """Exact powers of two tones under loss and Raman transfer.

    Solves ``dP_l/dz = -alpha P_l + c P_h P_l`` and
    ``dP_h/dz = -alpha P_h - c P_h P_l`` where ``c`` is the gain coefficient
    (1/W/m) from the high- to the low-frequency tone.

    Returns
    -------
    p_low_z, p_high_z : ndarray
    """
    z = np.asarray(z, dtype=float)
    total = p_low + p_high
    leff = z if alpha == 0 else -np.expm1(-alpha * z) / alpha
    share0 = p_low / total
    growth = np.exp(gain_coefficient * total * leff)
    share = share0 * growth / (1 - share0 + share0 * growth)
    power = total * np.exp(-alpha * z)
    return power * share, power * (1 - share)


@dataclass(frozen=True)
class TwoToneState:
    """Complex field amplitudes (sqrt(W)) of two tones in both polarizations.

    Tone ``0`` sits at 0 Hz and tone ``k`` at ``separation`` Hz.
    """

    ex0: complex
    ey0: complex
    exk: complex
    eyk: complex
    separation: float

    def __post_init__(self):
        if not self.separation > 0:
            raise InvalidArgumentError("tone separation must be positive")

    @property
    def powers(self) -> tuple[float, float]:
        """Total power of the low and the high tone (W)."""
        return abs(self.ex0) ** 2 + abs(self.ey0) ** 2, abs(self.exk) ** 2 + abs(self.eyk) ** 2

    def as_vector(self) -> np.ndarray:
        return np.array([self.ex0, self.ey0, self.exk, self.eyk], dtype=complex)


def two_tone_field_ode(
    state: TwoToneState,
    spectrum: RamanSpectrum,
    fiber: FiberSpec,
    length: float | None = None,
    rtol: float = 1e-11,
) -> TwoToneState:
    """Propagate two tones through the gain-only field equations.

    Only loss and the imaginary Raman response act; dispersion and the
    real (instantaneous and Raman) nonlinearity are absent. The coupling is
    ``gamma f_r g_r(separation)``, including the cross-polarization products.
    """
    length = fiber.length if length is None else length
    k = fiber.gamma * spectrum.fraction * float(spectrum.normalized_gain(state.separation))
    half_alpha = fiber.alpha / 2

    def rhs(_, v):
        e = v[:4] + 1j * v[4:]
        ex0, ey0, exk, eyk = e
        d = np.empty(4, dtype=complex)
        d[0] = -half_alpha * ex0 + k * (ex0 * abs(exk) ** 2 + ey0 * np.conj(eyk) * exk)
        d[1] = -half_alpha * ey0 + k * (ey0 * abs(eyk) ** 2 + ex0 * np.conj(exk) * eyk)
        d[2] = -half_alpha * exk - k * (exk * abs(ex0) ** 2 + ex0 * eyk * np.conj(ey0))
        d[3] = -half_alpha * eyk - k * (eyk * abs(ey0) ** 2 + ey0 * exk * np.conj(ex0))
        return np.concatenate((d.real, d.imag))

    v0 = state.as_vector()
    sol = solve_ivp(rhs, (0.0, length), np.concatenate((v0.real, v0.imag)), method="DOP853",
                    rtol=rtol, atol=rtol * 1e-3 * np.abs(v0).max())
    if not sol.success:
        raise StiffnessError(f"two-tone integration failed at z = {sol.t[-1]:.6g} m: {sol.message}")
    e = sol.y[:4, -1] + 1j * sol.y[4:, -1]
    return TwoToneState(complex(e[0]), complex(e[1]), complex(e[2]), complex(e[3]), state.separation)
