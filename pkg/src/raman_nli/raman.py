"""Complex Raman spectrum and the nonlinear transfer function of the fiber.

The co-polarized Raman gain ``g(f)`` (m/W) is odd in frequency and its
real counterpart ``n(f)`` is even; the two form a Hilbert pair. Dividing
both by ``n(0)`` gives the dimensionless parts entering the transfer
function, and ``f_r = lambda0 n(0) / (4 pi n2)`` is the share of the
delayed response in the total Kerr nonlinearity.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Callable, Literal

import numpy as np
from scipy import signal
from scipy.constants import pi
from scipy.interpolate import CubicSpline, PchipInterpolator
from scipy.fft import next_fast_len

from .errors import InconsistentMeasurementError, InvalidArgumentError, InvalidGridError, InvalidStateError

Polarization = Literal["dual", "single"]


@dataclass(frozen=True)
class RamanFitParams:
    """Parameters of the triangle-plus-sine Raman gain approximation.

    Attributes
    ----------
    slope : float
        Slope of the triangular gain (m/W/Hz).
    support : float
        Full width of the rectangular window (Hz); gain vanishes for
        ``|f| > support / 2``.
    ripple_amplitude : float
        Amplitude of the sinusoidal correction (m/W).
    ripple_rate : float
        Angular rate of the sinusoidal correction (rad/Hz).
    offset : float
        Constant added to the real part (m/W).
    """

    slope: float = 3.87e-27
    support: float = 30e12
    ripple_amplitude: float = 4.2e-15
    ripple_rate: float = 7.20e-13
    offset: float = -2.12e-15

    def __post_init__(self):
        if not self.support > 0:
            raise InvalidArgumentError(f"support must be positive, got {self.support!r}")
        if not self.slope > 0:
            raise InvalidArgumentError(f"slope must be positive, got {self.slope!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.slope, self.support, self.ripple_amplitude, self.ripple_rate, self.offset])

    @classmethod
    def from_array(cls, x) -> "RamanFitParams":
        return cls(*(float(v) for v in x))


def analytic_gain_spectrum(params: RamanFitParams, f):
    """Co-polarized Raman gain of the triangle-plus-sine fit (m/W).

    The expression is evaluated on ``|f|`` and given the sign of ``f`` so
    that the result is exactly odd in floating point.
    """
    f = np.asarray(f, dtype=float)
    af = np.abs(f)
    g = params.slope * af + params.ripple_amplitude * np.sin(params.ripple_rate * af)
    g = np.where(af <= params.support / 2, g, 0.0)
    return np.sign(f) * g


def analytic_real_spectrum(params: RamanFitParams, f):
    """Real part of the Raman spectrum matching :func:`analytic_gain_spectrum` (m/W).

    At the logarithmic singularities ``|f| = support / 2`` the expression is
    evaluated a relative 1e-9 outside the support edge.
    """
    f = np.asarray(f, dtype=float)
    af = np.abs(f)
    b = params.support
    af = np.where(2 * af == b, af * (1 + 1e-9), af)
    with np.errstate(divide="ignore"):
        log_term = np.where(af > 0, af * np.log(np.abs((2 * af - b) / (2 * af + b))), 0.0)
    return (
        params.slope / pi * (log_term + b)
        + params.ripple_amplitude * np.cos(params.ripple_rate * af)
        + params.offset
    )


def _raised_cosine_taper(n: int, fraction: float = 0.05) -> np.ndarray:
    """Symmetric window equal to one except a cosine roll-off on the outer ``fraction`` of each side."""
    x = np.abs(np.linspace(-1.0, 1.0, n))
    start = 1.0 - fraction
    w = np.ones(n)
    edge = x > start
    w[edge] = 0.5 * (1 + np.cos(pi * (x[edge] - start) / fraction))
    return w


def hilbert_real_from_gain(freq, gain, padding: int = 4, taper: float = 0.05) -> np.ndarray:
    """Real Raman part from a sampled gain via the discrete Hilbert transform.

    Computes ``(1/pi) p.v. int g(f') / (f' - f) df'`` with the analytic-signal
    method.

    Parameters
    ----------
    freq : array_like
        Uniform grid symmetric about zero.
    gain : array_like
        Odd gain samples on ``freq`` (m/W).
    padding : int
        Zero-padding factor applied to the table length (at least 4).
    taper : float
        Fraction of each side rolled off by a raised cosine.

    Returns
    -------
    ndarray
        Even real part on ``freq`` (m/W).
    """
    freq = np.asarray(freq, dtype=float)
    gain = np.asarray(gain, dtype=float)
    if freq.shape != gain.shape or freq.ndim != 1 or freq.size < 3:
        raise InvalidGridError("freq and gain must be 1-D arrays of equal length >= 3")
    step = np.diff(freq)
    if not np.allclose(step, step[0], rtol=1e-9, atol=0) or step[0] <= 0:
        raise InvalidGridError("Hilbert transform needs a strictly increasing uniform grid")
    if not np.isclose(freq[0], -freq[-1], rtol=0, atol=1e-6 * step[0]):
        raise InvalidGridError("Hilbert transform needs a grid symmetric about zero")
    if padding < 4:
        raise InvalidArgumentError("zero padding factor must be at least 4")
    n = freq.size
    x = gain * _raised_cosine_taper(n, taper)
    analytic = signal.hilbert(x, N=next_fast_len(padding * n))
    real = -analytic.imag[:n]
    # enforce exact evenness of the returned table
    return 0.5 * (real + real[::-1])


def fractional_contribution(real_at_zero: float, lambda0: float, n2: float) -> float:
    """Fraction of the Kerr nonlinearity due to the delayed Raman response."""
    if not (lambda0 > 0 and n2 > 0):
        raise InvalidArgumentError("lambda0 and n2 must be positive")
    f_r = lambda0 * real_at_zero / (4 * pi * n2)
    if not 0 < f_r < 1:
        raise InconsistentMeasurementError(f"fractional Raman contribution {f_r!r} outside (0, 1)")
    return f_r


def raman_time_constant(params: RamanFitParams, lambda0: float, n2: float) -> float:
    """First-order Raman time constant ``lambda0 * slope / (8 pi^2 n2)`` in s."""
    if not (lambda0 > 0 and n2 > 0):
        raise InvalidArgumentError("lambda0 and n2 must be positive")
    return lambda0 * params.slope / (8 * pi**2 * n2)


def default_grid(span: float = 40e12, resolution: float = 10e9) -> np.ndarray:
    n = int(round(span / resolution))
    return np.arange(-n, n + 1) * resolution


@dataclass(frozen=True, eq=False)
class RamanSpectrum:
    """Complex Raman spectrum with its normalization.

    Use :meth:`analytic` or :meth:`measured` to construct one.

    Attributes
    ----------
    mode : {"analytic", "measured"}
    freq : ndarray
        Symmetric storage grid (Hz).
    gain_table, real_table : ndarray
        Co-polarized gain (odd) and real part (even) on ``freq`` (m/W).
    fraction : float
        Fractional Raman contribution ``f_r``.
    norm : float or None
        ``lambda0 / (4 pi f_r n2)`` (W/m); ``None`` marks an unnormalized spectrum.
    """

    mode: str
    freq: np.ndarray
    gain_table: np.ndarray
    real_table: np.ndarray
    fraction: float
    norm: float | None
    lambda0: float
    n2: float
    params: RamanFitParams | None = None
    _gain_fn: Callable | None = None
    _real_fn: Callable | None = None

    @classmethod
    def analytic(
        cls,
        params: RamanFitParams | None = None,
        lambda0: float = 1550e-9,
        n2: float = 2.1e-20,
        grid=None,
    ) -> "RamanSpectrum":
        params = params or RamanFitParams()
        freq = default_grid() if grid is None else np.asarray(grid, dtype=float)
        real0 = float(analytic_real_spectrum(params, 0.0))
        f_r = fractional_contribution(real0, lambda0, n2)
        return cls(
            mode="analytic",
            freq=freq,
            gain_table=analytic_gain_spectrum(params, freq),
            real_table=analytic_real_spectrum(params, freq),
            fraction=f_r,
            norm=1.0 / real0,
            lambda0=lambda0,
            n2=n2,
            params=params,
            _gain_fn=lambda f: analytic_gain_spectrum(params, f),
            _real_fn=lambda f: analytic_real_spectrum(params, f),
        )

    @classmethod
    def measured(
        cls,
        freq,
        gain,
        lambda0: float = 1550e-9,
        n2: float = 2.1e-20,
        real_offset: float = 0.0,
        resolution: float = 10e9,
        span: float = 40e12,
    ) -> "RamanSpectrum":
        """Spectrum from a one-sided co-polarized gain table.

        The table (starting at 0 Hz) is resampled with a monotone cubic
        interpolant onto a uniform grid, extended as an odd function and
        zero beyond its last entry, and Hilbert transformed. ``real_offset``
        is added to the resulting real part.
        """
        freq = np.asarray(freq, dtype=float)
        gain = np.asarray(gain, dtype=float)
        if freq.size < 3:
            raise InvalidGridError("gain table needs at least three rows for interpolation")
        if freq[0] != 0 or np.any(np.diff(freq) <= 0):
            raise InvalidGridError("gain table frequencies must start at 0 and increase strictly")
        if freq[-1] < 30e12:
            warnings.warn(
                f"gain table ends at {freq[-1] / 1e12:.3g} THz; Kramers-Kronig accuracy is degraded "
                "below 30 THz coverage",
                stacklevel=2,
            )
        span = max(span, freq[-1])
        grid = default_grid(span, resolution)
        interp = PchipInterpolator(freq, gain, extrapolate=False)
        ag = np.abs(grid)
        one_sided = np.nan_to_num(interp(ag), nan=0.0)
        table_gain = np.sign(grid) * one_sided
        table_real = hilbert_real_from_gain(grid, table_gain) + real_offset
        real0 = float(table_real[grid.size // 2])
        f_r = fractional_contribution(real0, lambda0, n2)
        real_interp = CubicSpline(grid[grid.size // 2:], table_real[grid.size // 2:], extrapolate=False)

        def gain_fn(f):
            f = np.asarray(f, dtype=float)
            return np.sign(f) * np.nan_to_num(interp(np.abs(f)), nan=0.0)

        def real_fn(f):
            f = np.asarray(f, dtype=float)
            return np.nan_to_num(real_interp(np.abs(f)), nan=0.0)

        return cls(
            mode="measured",
            freq=grid,
            gain_table=table_gain,
            real_table=table_real,
            fraction=f_r,
            norm=1.0 / real0,
            lambda0=lambda0,
            n2=n2,
            _gain_fn=gain_fn,
            _real_fn=real_fn,
        )

    def gain(self, f):
        """Co-polarized Raman gain ``g(f)`` in m/W."""
        return self._gain_fn(f)

    def real(self, f):
        """Real Raman part ``n(f)`` in m/W."""
        return self._real_fn(f)

    def _require_norm(self) -> float:
        if self.norm is None:
            raise InvalidStateError("Raman spectrum is not normalized")
        return self.norm

    def normalized_real(self, f):
        return self.real(f) * self._require_norm()

    def normalized_gain(self, f):
        return self.gain(f) * self._require_norm()

    def recomputed_fraction(self) -> float:
        """``f_r`` recovered from the normalized spectrum (consistency check)."""
        real0 = float(self.normalized_real(0.0)) / self._require_norm()
        return self.lambda0 * real0 / (4 * pi * self.n2)

    def unnormalized(self) -> "RamanSpectrum":
        return replace(self, norm=None)

    def mirrored(self) -> "RamanSpectrum":
        """Spectrum of the frequency-reflected fiber: ``g(-f)``, ``n(-f)``."""
        gain_fn, real_fn = self._gain_fn, self._real_fn
        return replace(
            self,
            gain_table=-self.gain_table,
            _gain_fn=lambda f: -gain_fn(f),
            _real_fn=real_fn,
        )

    def gain_coefficient(self, f, a_eff: float):
        """Polarization averaged Raman gain coefficient ``g(f) / (2 A_eff)`` (1/W/m)."""
        return self.gain(f) / (2 * a_eff)


@dataclass(frozen=True)
class NonlinearTransfer:
    """Frequency response of the total (instantaneous plus delayed) nonlinearity.

    Parameters
    ----------
    spectrum : RamanSpectrum
    polarization : {"dual", "single"}
    real_raman : bool
        If False, the delayed response keeps only its imaginary (gain) part
        and the real part equals the purely instantaneous value.
    kerr_real : bool
        If False, the whole real part is dropped; only Raman gain remains.
    flat_real : float or None
        Constant used for the real part when ``real_raman`` is False;
        defaults to the instantaneous weight.
    """

    spectrum: RamanSpectrum
    polarization: str = "dual"
    real_raman: bool = True
    kerr_real: bool = True
    flat_real: float | None = None

    def __post_init__(self):
        if self.polarization not in ("dual", "single"):
            raise InvalidArgumentError(f"polarization must be 'dual' or 'single', got {self.polarization!r}")

    @property
    def fraction(self) -> float:
        return self.spectrum.fraction

    @property
    def instantaneous_weight(self) -> float:
        return 8.0 / 9.0 if self.polarization == "dual" else 1.0

    def real_part(self, f):
        f = np.asarray(f, dtype=float)
        if not self.kerr_real:
            return np.zeros_like(f)
        w = self.instantaneous_weight
        f_r = self.fraction
        if not self.real_raman:
            return np.full_like(f, w if self.flat_real is None else self.flat_real)
        return w * (1 - f_r) + f_r * self.spectrum.normalized_real(f)

    def imag_part(self, f):
        return self.fraction * self.spectrum.normalized_gain(f)

    def __call__(self, f):
        return self.real_part(f) + 1j * self.imag_part(f)

    def sampled(self, freq=None) -> tuple[np.ndarray, np.ndarray]:
        freq = self.spectrum.freq if freq is None else np.asarray(freq, dtype=float)
        return freq, self(freq)

    @property
    def kerr_scale(self) -> float:
        """``Re H(0)`` relative to the instantaneous weight (effective over nominal Kerr coefficient)."""
        return float(self.real_part(0.0)) / self.instantaneous_weight

    def without_real_raman(self) -> "NonlinearTransfer":
        return replace(self, real_raman=False, flat_real=None)

    def with_flat_real(self) -> "NonlinearTransfer":
        """Real part frozen at its zero-frequency value; Raman gain kept."""
        return replace(self, real_raman=False, flat_real=float(self.real_part(0.0)))

    def gain_only(self) -> "NonlinearTransfer":
        return replace(self, kerr_real=False)


def nonlinear_transfer(spectrum: RamanSpectrum, mode: str = "dual") -> NonlinearTransfer:
    """Transfer function ``w (1 - f_r) + f_r (n_r + j g_r)`` with ``w = 8/9`` (dual) or 1 (single)."""
    spectrum._require_norm()
    return NonlinearTransfer(spectrum, mode)


def instantaneous_spectrum(lambda0: float = 1550e-9, n2: float = 2.1e-20) -> RamanSpectrum:
    """Spectrum with no delayed response (``f_r = 0``)."""
    freq = default_grid(1e12, 10e9)
    zero = lambda f: np.zeros_like(np.asarray(f, dtype=float))
    return RamanSpectrum(
        mode="analytic", freq=freq, gain_table=np.zeros_like(freq), real_table=np.zeros_like(freq),
        fraction=0.0, norm=1.0, lambda0=lambda0, n2=n2, _gain_fn=zero, _real_fn=zero,
    )


def synthetic_gain_table(params: RamanFitParams | None = None, f_max: float = 40e12, resolution: float = 10e9):
    """One-sided ``(freq, gain)`` table sampled from the analytic fit."""
    params = params or RamanFitParams()
    freq = np.arange(0, int(round(f_max / resolution)) + 1) * resolution
    return freq, analytic_gain_spectrum(params, freq)
