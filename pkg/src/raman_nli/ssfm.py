"""Split-step Fourier propagation of dual-polarization fields with a delayed nonlinear response.

Spectra follow the numpy FFT convention: a field sample is
``E(t) = sum_k S_k exp(+j 2 pi f_k t)``. In this convention the linear step
multiplies the spectrum by ``exp((-alpha/2 - j beta2 w^2/2 - j beta3 w^3/6) dz)``
and the nonlinear step rotates both polarizations by
``exp(-j gamma dz q(t))`` with ``q = IFFT{conj(H) FFT{|E_x|^2 + |E_y|^2}}``.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.fft as sfft

from .errors import (
    ConvergenceError,
    CoverageError,
    DivergenceError,
    InvalidArgumentError,
    InvalidGridError,
    InvalidStateError,
    ProtocolError,
)
from .fiber import ChannelPlan, FiberSpec
from .raman import NonlinearTransfer
from ._kernels import dispersion_apply, phase_rotate, total_power

MIN_STEPS = 100
MIN_OVERSAMPLING = 1.2


@dataclass(eq=False)
class DualPolField:
    """Complex envelopes of both polarizations on a periodic time grid.

    Attributes
    ----------
    ex, ey : ndarray
        Samples in sqrt(W); same length and dtype.
    sample_rate : float
        Hz.
    center : float
        Frequency offset (Hz) of the grid centre from the fiber reference.
    distance : float
        Fiber length (m) the field has travelled without dispersion
        compensation; the receiver undoes dispersion over this length.
    symbols : dict
        Transmitted symbols per occupied-channel index, shape ``(2, n)``.
    seed : int or None
        Seed the symbols were drawn with.
    """

    ex: np.ndarray
    ey: np.ndarray
    sample_rate: float
    center: float = 0.0
    distance: float = 0.0
    symbols: dict = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        if self.ex.shape != self.ey.shape or self.ex.ndim != 1:
            raise InvalidArgumentError("both polarizations need equal one-dimensional sample arrays")
        if self.ex.dtype != self.ey.dtype:
            raise InvalidArgumentError("both polarizations need the same dtype")
        if not self.sample_rate > 0:
            raise InvalidArgumentError("sample rate must be positive")

    @property
    def n(self) -> int:
        return self.ex.size

    @property
    def resolution(self) -> float:
        return self.sample_rate / self.n

    @property
    def freq(self) -> np.ndarray:
        """Absolute frequency offsets of the FFT bins (numpy order)."""
        return sfft.fftfreq(self.n, 1.0 / self.sample_rate) + self.center

    @property
    def power(self) -> float:
        """Time-averaged total power (W)."""
        return float(np.mean(np.abs(self.ex) ** 2 + np.abs(self.ey) ** 2))

    def spectra(self) -> tuple[np.ndarray, np.ndarray]:
        return sfft.fft(self.ex), sfft.fft(self.ey)

    def copy(self) -> "DualPolField":
        return replace(self, ex=self.ex.copy(), ey=self.ey.copy())

    def band_power(self, lo: float, hi: float) -> float:
        """Power (W) in the absolute frequency interval ``[lo, hi]``."""
        sx, sy = self.spectra()
        f = self.freq
        sel = (f >= lo) & (f <= hi)
        return float((np.sum(np.abs(sx[sel]) ** 2) + np.sum(np.abs(sy[sel]) ** 2)) / self.n**2)


@dataclass(frozen=True)
class SsfmConfig:
    """Split-step and experiment settings.

    Attributes
    ----------
    steps : int
        Steps per span.
    distribution : {"log", "uniform"}
        ``"log"`` makes every step accumulate the same nonlinear phase for
        a loss-only power decay (uniform in effective length).
    response : {"full", "instantaneous"}
        ``"instantaneous"`` replaces the transfer function by its
        instantaneous weight (conventional Manakov equation).
    seed : int
        Seed of the first realization; realization ``r`` uses ``seed + r``.
    realizations : int
    n_symbols : int
        Symbols per channel and polarization (power of two).
    oversampling : float
        Minimum ratio of sample rate to occupied optical bandwidth.
    precision : {"double", "single"}
    debug : bool
        Assert per step that the filtered power is real.
    """

    steps: int = 10000
    distribution: str = "log"
    response: str = "full"
    seed: int = 0
    realizations: int = 1
    n_symbols: int = 2**13
    oversampling: float = 2.0
    precision: str = "double"
    debug: bool = False

    def __post_init__(self):
        if self.steps < MIN_STEPS:
            raise ConvergenceError(f"{self.steps} steps per span is below the floor of {MIN_STEPS}")
        if self.distribution not in ("log", "uniform"):
            raise InvalidArgumentError(f"unknown step distribution {self.distribution!r}")
        if self.response not in ("full", "instantaneous"):
            raise InvalidArgumentError(f"unknown nonlinear response mode {self.response!r}")
        if self.realizations < 1:
            raise InvalidArgumentError("at least one realization is required")
        if self.n_symbols < 2 or self.n_symbols & (self.n_symbols - 1):
            raise InvalidArgumentError(f"symbol count must be a power of two, got {self.n_symbols}")
        if self.oversampling < MIN_OVERSAMPLING:
            raise InvalidArgumentError(f"oversampling must be at least {MIN_OVERSAMPLING}")
        if self.precision not in ("double", "single"):
            raise InvalidArgumentError(f"unknown precision {self.precision!r}")

    @property
    def dtype(self):
        return np.complex128 if self.precision == "double" else np.complex64


@dataclass(frozen=True, eq=False)
class TxRxResult:
    """Received symbols of one channel after the receiver chain.

    ``received`` already includes the fitted complex gain, so
    ``noise_variance == mean(|transmitted - received|^2)``.
    """

    transmitted: np.ndarray
    received: np.ndarray
    signal_power: float
    noise_variance: float

    @property
    def snr(self) -> float:
        return self.signal_power / self.noise_variance

    @property
    def snr_db(self) -> float:
        return float(10 * np.log10(self.snr))


# --------------------------------------------------------------------------
# transmitter


def rrc_spectrum(f, symbol_rate: float, roll_off: float) -> np.ndarray:
    """Root-raised-cosine amplitude response, 1 in the flat part."""
    f = np.abs(np.asarray(f, dtype=float))
    lo = (1 - roll_off) * symbol_rate / 2
    hi = (1 + roll_off) * symbol_rate / 2
    out = np.where(f <= lo, 1.0, 0.0)
    if roll_off > 0:
        edge = (f > lo) & (f <= hi)
        out[edge] = np.sqrt(0.5 * (1 + np.cos(np.pi / (roll_off * symbol_rate) * (f[edge] - lo))))
    return out


def _occupied_edges(plan: ChannelPlan) -> tuple[float, float]:
    occ = plan.occupied
    lo = min(ch.frequency - ch.spectral_width / 2 for ch in occ)
    hi = max(ch.frequency + ch.spectral_width / 2 for ch in occ)
    return lo, hi


def sample_count(plan: ChannelPlan, n_symbols: int, oversampling: float = 2.0) -> int:
    """Smallest power-of-two sample count whose grid holds ``plan`` without aliasing."""
    occ = plan.occupied
    if not occ:
        raise InvalidArgumentError("plan has no occupied channels")
    lo, hi = _occupied_edges(plan)
    rate = min(ch.symbol_rate for ch in occ)
    window = n_symbols / rate
    need = max(oversampling * (hi - lo), 2 * max(abs(lo), abs(hi)) * 1.001)
    n = n_symbols
    while n / window < need:
        n *= 2
    return n


@dataclass(frozen=True)
class _ChannelBins:
    first: int
    offsets: np.ndarray
    taps: np.ndarray
    n_symbols: int


def _channel_bins(plan: ChannelPlan, index: int, n: int, sample_rate: float, center: float,
                  window: float) -> _ChannelBins:
    occ = plan.occupied
    if not 0 <= index < len(occ):
        raise InvalidArgumentError(f"channel index {index} not in plan with {len(occ)} occupied channels")
    ch = occ[index]
    df = sample_rate / n
    n_sym = ch.symbol_rate * window
    if abs(n_sym - round(n_sym)) > 1e-6 * n_sym:
        raise InvalidGridError(f"channel {index}: symbol rate is not commensurate with the time window")
    n_sym = int(round(n_sym))
    centre_bin = int(round((ch.frequency - center) / df))
    half = int(np.floor(ch.spectral_width / 2 / df))
    offsets = np.arange(-half, half + 1)
    if abs(centre_bin) + half >= n // 2:
        raise InvalidGridError(f"channel {index} extends beyond the Nyquist frequency")
    taps = rrc_spectrum(offsets * df, ch.symbol_rate, ch.roll_off)
    return _ChannelBins(centre_bin, offsets, taps, n_sym)


def _symbol_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def tx_generate(
    plan: ChannelPlan,
    seed: int,
    n_symbols: int,
    polarization: str = "dual",
    n_samples: int | None = None,
    oversampling: float = 2.0,
    precision: str = "double",
) -> DualPolField:
    """Gaussian-constellation WDM field with root-raised-cosine pulses.

    Symbols are circular complex Gaussian, normalized to unit mean power per
    polarization, and the channel is scaled to its launch power. Channel
    centres are rounded to the frequency grid spacing.
    """
    if n_symbols < 2 or n_symbols & (n_symbols - 1):
        raise InvalidArgumentError(f"symbol count must be a power of two, got {n_symbols}")
    if polarization not in ("dual", "single"):
        raise InvalidArgumentError(f"polarization must be 'dual' or 'single', got {polarization!r}")
    occ = plan.occupied
    if not occ:
        raise InvalidArgumentError("plan has no occupied channels")
    n = sample_count(plan, n_symbols, oversampling) if n_samples is None else int(n_samples)
    window = n_symbols / min(ch.symbol_rate for ch in occ)
    sample_rate = n / window
    lo, hi = _occupied_edges(plan)
    if sample_rate < MIN_OVERSAMPLING * (hi - lo) * (1 - 1e-12):
        raise InvalidGridError(f"sample rate {sample_rate:g} Hz is below {MIN_OVERSAMPLING} x occupied bandwidth")
    spectra = np.zeros((2, n), dtype=np.complex128)
    symbols = {}
    for i, ch in enumerate(occ):
        bins = _channel_bins(plan, i, n, sample_rate, 0.0, window)
        rng = _symbol_rng(seed, i)
        x = rng.standard_normal((2, bins.n_symbols)) + 1j * rng.standard_normal((2, bins.n_symbols))
        if polarization == "single":
            x[1] = 0.0
            x[0] /= np.sqrt(np.mean(np.abs(x[0]) ** 2))
            amp = np.sqrt(ch.power)
        else:
            x /= np.sqrt(np.mean(np.abs(x) ** 2, axis=1, keepdims=True))
            amp = np.sqrt(ch.power / 2)
        symbols[i] = x
        xf = sfft.fft(x, axis=1)
        scale = amp * n / bins.n_symbols
        idx = (bins.first + bins.offsets) % n
        spectra[:, idx] += scale * xf[:, bins.offsets % bins.n_symbols] * bins.taps[None, :]
    dtype = np.complex128 if precision == "double" else np.complex64
    e = sfft.ifft(spectra, axis=1).astype(dtype)
    return DualPolField(e[0].copy(), e[1].copy(), sample_rate, 0.0, 0.0, symbols, seed)


# --------------------------------------------------------------------------
# propagation


def step_sizes(fiber: FiberSpec, steps: int, distribution: str = "log", length: float | None = None) -> np.ndarray:
    """Step lengths (m) covering one span."""
    length = fiber.length if length is None else length
    if distribution == "uniform" or fiber.alpha == 0:
        return np.full(steps, length / steps)
    leff = -np.expm1(-fiber.alpha * length) / fiber.alpha
    z = -np.log1p(-fiber.alpha * leff * np.arange(steps + 1) / steps) / fiber.alpha
    z[0], z[-1] = 0.0, length
    return np.diff(z)


def _dispersion_phase(freq: np.ndarray, beta2: float, beta3: float) -> np.ndarray:
    w = 2 * np.pi * freq
    return beta2 / 2 * w**2 + beta3 / 6 * w**3


def _filter_taps(H: NonlinearTransfer, n: int, sample_rate: float) -> np.ndarray:
    """``conj(H)`` on the non-negative beat frequencies of the power."""
    f = sfft.rfftfreq(n, 1.0 / sample_rate)
    spec_max = float(np.max(np.abs(H.spectrum.freq)))
    if H.spectrum.mode == "measured" and f[-1] > spec_max * (1 + 1e-9):
        raise CoverageError(f"transfer function grid ends at {spec_max:g} Hz below {f[-1]:g} Hz")
    taps = np.conj(H(f))
    if n % 2 == 0:
        # the Nyquist bin is its own mirror image
        taps[-1] = taps[-1].real
    return taps


class _Stepper:
    """Holds transforms and filters for repeated symmetric split steps."""

    def __init__(self, n: int, sample_rate: float, center: float, fiber: FiberSpec, H: NonlinearTransfer,
                 response: str, dtype, debug: bool, sign: float = 1.0):
        self.n = n
        self.dtype = dtype
        self.real_dtype = np.float64 if dtype == np.complex128 else np.float32
        freq = sfft.fftfreq(n, 1.0 / sample_rate) + center
        self.beta_phase = sign * _dispersion_phase(freq, fiber.beta2, fiber.beta3)
        self.half_alpha = sign * fiber.alpha / 2
        self.gamma = sign * fiber.gamma
        self.response = response
        self.weight = H.instantaneous_weight
        self.taps = None
        if response == "full":
            self.taps = _filter_taps(H, n, sample_rate).astype(dtype)
        self.debug = debug
        self.full_taps = None
        if debug and self.taps is not None:
            self.full_taps = np.conj(H(sfft.fftfreq(n, 1.0 / sample_rate)))
            if n % 2 == 0:
                self.full_taps[n // 2] = self.full_taps[n // 2].real
        self.power = np.empty(n, dtype=self.real_dtype)

    def linear(self, ex, ey, dz: float):
        sx = sfft.fft(ex, overwrite_x=True)
        sy = sfft.fft(ey, overwrite_x=True)
        dispersion_apply(sx, sy, self.beta_phase, dz, np.exp(-self.half_alpha * dz))
        return sfft.ifft(sx, overwrite_x=True), sfft.ifft(sy, overwrite_x=True)

    def nonlinear(self, ex, ey, dz: float):
        p = self.power
        total_power(ex, ey, p)
        if self.taps is None:
            phase_rotate(ex, ey, p, self.gamma * self.weight * dz)
            return
        if self.full_taps is not None:
            q_full = sfft.ifft(self.full_taps * sfft.fft(p.astype(np.float64)))
            tol = (1e-12 if self.dtype == np.complex128 else 1e-5) * float(np.max(p))
            if np.max(np.abs(q_full.imag)) > tol:
                raise InvalidStateError("filtered power has an imaginary part; transfer function is not Hermitian")
        q = sfft.irfft(sfft.rfft(p) * self.taps, self.n)
        phase_rotate(ex, ey, q, self.gamma * dz)

    def run(self, ex, ey, steps: np.ndarray, check_every: int = 200):
        pending = 0.5 * steps[0]
        for k, h in enumerate(steps):
            ex, ey = self.linear(ex, ey, pending)
            self.nonlinear(ex, ey, h)
            pending = 0.5 * h + (0.5 * steps[k + 1] if k + 1 < steps.size else 0.0)
            if (k + 1) % check_every == 0 or k + 1 == steps.size:
                peak = float(np.max(self.power))
                if not np.isfinite(peak):
                    raise DivergenceError(
                        f"non-finite field after step {k + 1} of {steps.size} "
                        f"(z = {np.sum(steps[:k + 1]):.6g} m, step {h:.4g} m, peak power {peak:.4g} W)"
                    )
        ex, ey = self.linear(ex, ey, pending)
        if not (np.all(np.isfinite(ex)) and np.all(np.isfinite(ey))):
            raise DivergenceError(f"non-finite field at the span end after {steps.size} steps")
        return ex, ey


def propagate_gme(field_in: DualPolField, fiber: FiberSpec, H: NonlinearTransfer,
                  config: SsfmConfig = SsfmConfig()) -> DualPolField:
    """Propagate a field over one span with the symmetric split-step method.

    Raman gain is not modelled separately: it arises from the imaginary part
    of ``H`` acting on the power beat notes.
    """
    dtype = config.dtype
    stepper = _Stepper(field_in.n, field_in.sample_rate, field_in.center, fiber, H, config.response, dtype,
                       config.debug)
    ex = field_in.ex.astype(dtype, copy=True)
    ey = field_in.ey.astype(dtype, copy=True)
    ex, ey = stepper.run(ex, ey, step_sizes(fiber, config.steps, config.distribution))
    return replace(field_in, ex=ex, ey=ey, distance=field_in.distance + fiber.length)


# --------------------------------------------------------------------------
# receiver


def _window(field_in: DualPolField) -> float:
    return field_in.n / field_in.sample_rate


def compensate_dispersion(field_in: DualPolField, fiber: FiberSpec) -> DualPolField:
    """Undo dispersion over ``field.distance`` for the whole band."""
    if field_in.distance == 0:
        return field_in
    sx, sy = field_in.spectra()
    undo = np.exp(1j * _dispersion_phase(field_in.freq, fiber.beta2, fiber.beta3) * field_in.distance)
    return replace(field_in, ex=sfft.ifft(sx * undo).astype(field_in.ex.dtype),
                   ey=sfft.ifft(sy * undo).astype(field_in.ey.dtype), distance=0.0)


def rx_process(field_in: DualPolField, plan: ChannelPlan, channel_index: int, fiber: FiberSpec) -> TxRxResult:
    """Dispersion compensation, matched filtering, symbol sampling and complex-gain fit."""
    if channel_index not in field_in.symbols:
        raise InvalidArgumentError(f"no transmitted symbols recorded for channel {channel_index}")
    bins = _channel_bins(plan, channel_index, field_in.n, field_in.sample_rate, field_in.center,
                         _window(field_in))
    sx, sy = field_in.spectra()
    idx = (bins.first + bins.offsets) % field_in.n
    freq = field_in.freq[idx]
    band = np.stack((sx[idx], sy[idx])).astype(np.complex128)
    if field_in.distance:
        band *= np.exp(1j * _dispersion_phase(freq, fiber.beta2, fiber.beta3) * field_in.distance)[None, :]
    band *= bins.taps[None, :]
    folded = np.zeros((2, bins.n_symbols), dtype=np.complex128)
    for p in range(2):
        np.add.at(folded[p], bins.offsets % bins.n_symbols, band[p])
    y = sfft.ifft(folded, axis=1)
    x = field_in.symbols[channel_index]
    active = np.any(x != 0, axis=1)
    x, y = x[active], y[active]
    gain = np.vdot(y, x) / np.vdot(y, y)
    y = gain * y
    signal = float(np.mean(np.abs(x) ** 2))
    noise = float(np.mean(np.abs(x - y) ** 2))
    if not noise > 0:
        noise = np.finfo(float).tiny
    return TxRxResult(x, y, signal, noise)


def single_channel_dbp(field_in: DualPolField, plan: ChannelPlan, channel_index: int, fiber: FiberSpec,
                       H: NonlinearTransfer, config: SsfmConfig = SsfmConfig()) -> DualPolField:
    """Back-propagate one channel alone and put it back into the compensated band.

    The channel band is cut out with a brick-wall filter, moved to a small
    grid, propagated through the inverse equation (negated loss, dispersion
    and nonlinearity, same step schedule in reverse) with the nonlinearity
    taken as the instantaneous value ``Re H(0)``, and written back. All
    other bands receive linear dispersion compensation, so the result has
    ``distance == 0``.
    """
    if field_in.distance == 0:
        raise InvalidStateError("field has not been propagated")
    bins = _channel_bins(plan, channel_index, field_in.n, field_in.sample_rate, field_in.center,
                         _window(field_in))
    ch = plan.occupied[channel_index]
    m = 4 * bins.n_symbols
    small_rate = m * field_in.sample_rate / field_in.n
    sx, sy = field_in.spectra()
    idx = (bins.first + bins.offsets) % field_in.n
    scale = m / field_in.n
    small = np.zeros((2, m), dtype=np.complex128)
    small[:, bins.offsets % m] = np.stack((sx[idx], sy[idx])) * scale
    e = sfft.ifft(small, axis=1)
    centre = field_in.center + bins.first * field_in.resolution
    stepper = _Stepper(m, small_rate, centre, fiber, H, "instantaneous", np.complex128, False, sign=-1.0)
    stepper.weight = float(H.real_part(0.0))
    steps = step_sizes(fiber, config.steps, config.distribution)[::-1].copy()
    ex, ey = stepper.run(e[0].copy(), e[1].copy(), steps)
    out = compensate_dispersion(field_in, fiber)
    ox, oy = out.spectra()
    loss = np.exp(fiber.alpha * field_in.distance / 2)
    ox *= loss
    oy *= loss
    bx, by = sfft.fft(ex), sfft.fft(ey)
    ox[idx] = bx[bins.offsets % m] / scale
    oy[idx] = by[bins.offsets % m] / scale
    return replace(out, ex=sfft.ifft(ox).astype(field_in.ex.dtype), ey=sfft.ifft(oy).astype(field_in.ey.dtype))


def channel_powers(field_in: DualPolField, plan: ChannelPlan, margin: float = 0.1) -> np.ndarray:
    """Power (W) in each occupied channel band widened by ``margin`` symbol rates."""
    sx, sy = field_in.spectra()
    density = (np.abs(sx) ** 2 + np.abs(sy) ** 2) / field_in.n**2
    f = field_in.freq
    out = []
    for ch in plan.occupied:
        half = ch.spectral_width / 2 + margin * ch.symbol_rate
        out.append(float(np.sum(density[np.abs(f - ch.frequency) <= half])))
    return np.array(out)


# --------------------------------------------------------------------------
# experiments


@dataclass(frozen=True, eq=False)
class SsfmRun:
    """Pooled receiver statistics of a set of realizations.

    Attributes
    ----------
    seeds : tuple of int
    channels : tuple of int
        Occupied-channel indices.
    signal_power, noise_variance : ndarray
        Per channel, pooled over polarizations and realizations.
    dbp : bool
    fraction : float
        ``f_r`` of the transfer function used.
    polarization : str
    steps : int
    converged : bool or None
        None when no step-halving check was made.
    """

    seeds: tuple[int, ...]
    channels: tuple[int, ...]
    signal_power: np.ndarray
    noise_variance: np.ndarray
    dbp: bool
    fraction: float
    polarization: str
    steps: int
    converged: bool | None = None
    elapsed: float = 0.0
    kerr_scale: float = 1.0

    @property
    def snr(self) -> np.ndarray:
        return self.signal_power / self.noise_variance

    @property
    def snr_db(self) -> np.ndarray:
        return 10 * np.log10(self.snr)


def _receive_all(out: DualPolField, plan: ChannelPlan, channels: Sequence[int], fiber: FiberSpec,
                 H: NonlinearTransfer, config: SsfmConfig, dbp: bool) -> list[TxRxResult]:
    results = []
    for i in channels:
        f = single_channel_dbp(out, plan, i, fiber, H, config) if dbp else out
        results.append(rx_process(f, plan, i, fiber))
    return results


def run_ssfm(
    plan: ChannelPlan,
    fiber: FiberSpec,
    transfers: Sequence[NonlinearTransfer],
    config: SsfmConfig = SsfmConfig(),
    channels: Sequence[int] | None = None,
    dbp_modes: Sequence[bool] = (False,),
) -> list[list[SsfmRun]]:
    """Propagate every realization once per transfer function and receive the selected channels.

    Returns
    -------
    list of list of SsfmRun
        ``result[t][d]`` for transfer ``t`` and DBP mode ``d``.
    """
    channels = tuple(range(len(plan.occupied))) if channels is None else tuple(channels)
    polarization = transfers[0].polarization
    seeds = tuple(config.seed + r for r in range(config.realizations))
    sig = np.zeros((len(transfers), len(dbp_modes), len(channels)))
    noise = np.zeros_like(sig)
    start = time.perf_counter()
    for seed in seeds:
        tx = tx_generate(plan, seed, config.n_symbols, polarization, oversampling=config.oversampling,
                         precision=config.precision)
        for t, H in enumerate(transfers):
            out = propagate_gme(tx, fiber, H, config)
            for d, dbp in enumerate(dbp_modes):
                for c, res in enumerate(_receive_all(out, plan, channels, fiber, H, config, dbp)):
                    sig[t, d, c] += res.signal_power
                    noise[t, d, c] += res.noise_variance
    elapsed = time.perf_counter() - start
    return [
        [SsfmRun(seeds, channels, sig[t, d] / len(seeds), noise[t, d] / len(seeds), bool(dbp), H.fraction,
                 polarization, config.steps, None, elapsed, H.kerr_scale)
         for d, dbp in enumerate(dbp_modes)]
        for t, H in enumerate(transfers)
    ]


def check_convergence(plan: ChannelPlan, fiber: FiberSpec, H: NonlinearTransfer, config: SsfmConfig,
                      channels: Sequence[int] | None = None, tolerance_db: float = 0.02) -> tuple[bool, np.ndarray]:
    """Compare SNR at ``config.steps`` against half the steps.

    Returns
    -------
    converged : bool
    change_db : ndarray
        Per-channel SNR difference (dB).
    """
    full = run_ssfm(plan, fiber, [H], config, channels)[0][0]
    half = run_ssfm(plan, fiber, [H], replace(config, steps=max(MIN_STEPS, config.steps // 2)), channels)[0][0]
    change = full.snr_db - half.snr_db
    return bool(np.all(np.abs(change) < tolerance_db)), change


def delta_eta_from_runs(with_real: SsfmRun, without_real: SsfmRun) -> np.ndarray:
    """Impact of the real Raman spectrum (dB) from two matched runs.

    The SNR^-1 ratio is normalized by the squared ratio of the effective
    Kerr coefficients ``Re H(0)`` of the two runs.
    """
    if with_real.seeds != without_real.seeds:
        raise ProtocolError(f"runs used different seeds {with_real.seeds} and {without_real.seeds}")
    if with_real.channels != without_real.channels or with_real.dbp != without_real.dbp:
        raise ProtocolError("runs cover different channels or DBP settings")
    if with_real.steps != without_real.steps or with_real.polarization != without_real.polarization:
        raise ProtocolError("runs used different step counts or polarization modes")
    norm = (without_real.kerr_scale / with_real.kerr_scale) ** 2
    return 10 * np.log10(norm * without_real.snr / with_real.snr)


@dataclass(frozen=True, eq=False)
class DeltaEtaMeasurement:
    channels: tuple[int, ...]
    frequencies: np.ndarray
    delta_eta_db: dict
    runs: dict


def measure_delta_eta(
    plan: ChannelPlan,
    fiber: FiberSpec,
    H: NonlinearTransfer,
    config: SsfmConfig = SsfmConfig(),
    channels: Sequence[int] | None = None,
    dbp_modes: Sequence[bool] = (False,),
    matched_reference: bool = True,
) -> DeltaEtaMeasurement:
    """Simulated real-Raman impact per channel.

    Each realization is propagated with ``H`` and with a reference transfer
    whose real part is flat (Raman gain kept), from the same transmitted
    field. With ``matched_reference`` the flat value is ``Re H(0)``, so both
    runs share the effective Kerr coefficient and higher-order NLI terms
    cancel in the ratio; otherwise it is the instantaneous weight and the
    ratio is rescaled by the Kerr coefficients.
    """
    reference = H.with_flat_real() if matched_reference else H.without_real_raman()
    runs = run_ssfm(plan, fiber, [H, reference], config, channels, dbp_modes)
    out, by_mode = {}, {}
    for d, dbp in enumerate(dbp_modes):
        out[bool(dbp)] = delta_eta_from_runs(runs[0][d], runs[1][d])
        by_mode[bool(dbp)] = (runs[0][d], runs[1][d])
    ch = runs[0][0].channels
    return DeltaEtaMeasurement(ch, plan.frequencies[list(ch)], out, by_mode)


def resource_estimate(plan: ChannelPlan, config: SsfmConfig, n_transfers: int = 1) -> dict:
    """Grid size, memory and a rough runtime for a planned simulation."""
    n = sample_count(plan, config.n_symbols, config.oversampling)
    item = np.dtype(config.dtype).itemsize
    seconds_per_step = 5 * 5e-9 * n * np.log2(n) * (0.5 if config.precision == "single" else 1.0)
    total = seconds_per_step * config.steps * config.realizations * n_transfers
    return {"samples": n, "memory_bytes": int(6 * n * item), "steps": config.steps,
            "propagations": config.realizations * n_transfers, "estimated_seconds": float(total)}


# --------------------------------------------------------------------------
# snapshots


def save_snapshot(field_in: DualPolField, path) -> tuple[Path, Path]:
    """Write ``path.bin`` (little-endian interleaved complex64, x then y) and ``path.json``."""
    path = Path(path)
    data = np.concatenate((field_in.ex, field_in.ey)).astype("<c8")
    bin_path = path.with_suffix(".bin")
    meta_path = path.with_suffix(".json")
    data.tofile(bin_path)
    meta = {
        "format": "complex64-le-interleaved",
        "order": ["x", "y"],
        "samples": int(field_in.n),
        "sample_rate_hz": float(field_in.sample_rate),
        "center_hz": float(field_in.center),
        "distance_m": float(field_in.distance),
        "time_step_s": 1.0 / float(field_in.sample_rate),
        "frequency_resolution_hz": float(field_in.resolution),
        "seed": field_in.seed,
    }
    meta_path.write_text(json.dumps(meta, indent=2))
    return bin_path, meta_path


def load_snapshot(path) -> DualPolField:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    data = np.fromfile(path.with_suffix(".bin"), dtype="<c8")
    n = meta["samples"]
    if data.size != 2 * n:
        raise InvalidGridError(f"snapshot holds {data.size} samples, expected {2 * n}")
    return DualPolField(data[:n].astype(np.complex64), data[n:].astype(np.complex64), meta["sample_rate_hz"],
                        meta["center_hz"], meta["distance_m"], {}, meta.get("seed"))
