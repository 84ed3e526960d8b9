"""Fiber constants, WDM channel plans and transmit power spectral densities.

All quantities are SI. Frequencies are offsets from the reference carrier
``c / lambda0``; absolute optical frequencies are never used internally.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT, pi

from .errors import InvalidArgumentError, InvalidGridError, InvalidPlanError

DB_PER_NEPER = 10.0 * np.log10(np.e)


def db_km_to_per_m(alpha_db_km: float) -> float:
    """Convert a power attenuation in dB/km to a field-independent 1/m rate."""
    return alpha_db_km / DB_PER_NEPER / 1e3


def per_m_to_db_km(alpha: float) -> float:
    return alpha * DB_PER_NEPER * 1e3


def dbm_to_w(p_dbm):
    return 1e-3 * 10.0 ** (np.asarray(p_dbm, dtype=float) / 10.0)


def w_to_dbm(p_w):
    return 10.0 * np.log10(np.asarray(p_w, dtype=float) / 1e-3)


def dispersion_coefficients(D: float, S: float, lambda0: float) -> tuple[float, float]:
    """Convert dispersion parameter and slope to propagation-constant derivatives.

    Parameters
    ----------
    D : float
        Dispersion parameter in s/m^2 (16.4 ps/nm/km is 16.4e-6).
    S : float
        Dispersion slope in s/m^3 (0.067 ps/nm^2/km is 0.067e3).
    lambda0 : float
        Reference wavelength in m.

    Returns
    -------
    beta2 : float
        Group-velocity dispersion in s^2/m.
    beta3 : float
        Third-order dispersion in s^3/m.
    """
    if not lambda0 > 0:
        raise InvalidArgumentError(f"lambda0 must be positive, got {lambda0!r}")
    k = lambda0**2 / (2 * pi * SPEED_OF_LIGHT)
    beta2 = -D * k
    beta3 = k**2 * (S + 2 * D / lambda0)
    return beta2, beta3


def dispersion_parameters(beta2: float, beta3: float, lambda0: float) -> tuple[float, float]:
    """Inverse of :func:`dispersion_coefficients`, returning ``(D, S)`` in SI."""
    if not lambda0 > 0:
        raise InvalidArgumentError(f"lambda0 must be positive, got {lambda0!r}")
    k = lambda0**2 / (2 * pi * SPEED_OF_LIGHT)
    D = -beta2 / k
    S = beta3 / k**2 - 2 * D / lambda0
    return D, S


def kerr_coefficient(n2: float, lambda0: float, a_eff: float) -> float:
    """Nonlinear coefficient 2 pi n2 / (lambda0 A_eff) in 1/W/m."""
    return 2 * pi * n2 / (lambda0 * a_eff)


@dataclass(frozen=True)
class FiberSpec:
    """Single-span fiber description in SI units.

    Attributes
    ----------
    alpha : float
        Power attenuation coefficient (1/m).
    beta2, beta3 : float
        Dispersion coefficients (s^2/m, s^3/m).
    gamma : float
        Kerr nonlinearity coefficient (1/W/m).
    a_eff : float
        Effective core area (m^2).
    lambda0 : float
        Reference wavelength (m).
    n2 : float
        Nonlinear refractive index (m^2/W).
    c_r : float
        Slope of the polarization averaged Raman gain (1/W/m/Hz).
    length : float
        Span length (m).
    """

    alpha: float
    beta2: float
    beta3: float
    gamma: float
    a_eff: float
    lambda0: float
    n2: float
    c_r: float
    length: float

    def __post_init__(self):
        if not self.alpha >= 0:
            raise InvalidArgumentError(f"alpha must be non-negative, got {self.alpha!r}")
        if not self.a_eff > 0:
            raise InvalidArgumentError(f"a_eff must be positive, got {self.a_eff!r}")
        if not self.gamma >= 0:
            raise InvalidArgumentError(f"gamma must be non-negative, got {self.gamma!r}")
        if not self.length > 0:
            raise InvalidArgumentError(f"length must be positive, got {self.length!r}")
        if not 1.2e-6 < self.lambda0 < 1.7e-6:
            raise InvalidArgumentError(f"lambda0 {self.lambda0!r} m outside (1.2e-6, 1.7e-6)")

    @classmethod
    def from_engineering(
        cls,
        alpha_db_km: float = 0.16,
        D_ps_nm_km: float = 16.4,
        S_ps_nm2_km: float = 0.067,
        gamma_per_w_km: float | None = None,
        a_eff_um2: float = 81.8,
        lambda0_nm: float = 1550.0,
        n2: float = 2.1e-20,
        c_r_per_w_km_thz: float = 0.0236,
        length_km: float = 100.0,
    ) -> "FiberSpec":
        """Build a fiber from datasheet units.

        When ``gamma_per_w_km`` is omitted it is derived from ``n2``,
        ``lambda0`` and ``a_eff``.
        """
        lambda0 = lambda0_nm * 1e-9
        a_eff = a_eff_um2 * 1e-12
        beta2, beta3 = dispersion_coefficients(D_ps_nm_km * 1e-6, S_ps_nm2_km * 1e3, lambda0)
        if gamma_per_w_km is None:
            gamma = kerr_coefficient(n2, lambda0, a_eff)
        else:
            gamma = gamma_per_w_km * 1e-3
        return cls(
            alpha=db_km_to_per_m(alpha_db_km),
            beta2=beta2,
            beta3=beta3,
            gamma=gamma,
            a_eff=a_eff,
            lambda0=lambda0,
            n2=n2,
            c_r=c_r_per_w_km_thz * 1e-3 * 1e-12,
            length=length_km * 1e3,
        )

    @property
    def effective_length(self) -> float:
        return float(self.effective_length_at(self.length))

    def effective_length_at(self, z):
        z = np.asarray(z, dtype=float)
        if self.alpha == 0:
            return z.copy()
        return -np.expm1(-self.alpha * z) / self.alpha

    def with_(self, **changes) -> "FiberSpec":
        return replace(self, **changes)


@dataclass(frozen=True)
class Channel:
    """One WDM channel slot.

    ``frequency`` is the centre offset from the reference carrier (Hz),
    ``symbol_rate`` in baud and ``power`` the launch power in W.
    """

    frequency: float
    symbol_rate: float
    power: float
    roll_off: float = 1e-4
    occupied: bool = True

    @property
    def spectral_width(self) -> float:
        return self.symbol_rate * (1.0 + self.roll_off)


@dataclass(frozen=True)
class ChannelPlan:
    """Immutable list of channels with validated spectral separation."""

    channels: tuple[Channel, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        occupied = [ch for ch in self.channels if ch.occupied]
        for ch in occupied:
            if not ch.power > 0:
                raise InvalidPlanError(f"channel at {ch.frequency:g} Hz has non-positive power")
            if not ch.symbol_rate > 0:
                raise InvalidPlanError(f"channel at {ch.frequency:g} Hz has non-positive symbol rate")
            if ch.roll_off < 0:
                raise InvalidPlanError(f"channel at {ch.frequency:g} Hz has negative roll-off")
        order = sorted(occupied, key=lambda ch: ch.frequency)
        for a, b in zip(order[:-1], order[1:]):
            need = 0.5 * (a.symbol_rate + b.symbol_rate) * (1.0 + max(a.roll_off, b.roll_off))
            if b.frequency - a.frequency < need * (1.0 - 1e-12):
                raise InvalidPlanError(
                    f"channels at {a.frequency:g} Hz and {b.frequency:g} Hz overlap "
                    f"(separation {b.frequency - a.frequency:g} Hz < {need:g} Hz)"
                )

    def __len__(self) -> int:
        return len(self.channels)

    def __iter__(self):
        return iter(self.channels)

    def __getitem__(self, i) -> Channel:
        return self.channels[i]

    @property
    def occupied(self) -> tuple[Channel, ...]:
        return tuple(ch for ch in self.channels if ch.occupied)

    @property
    def total_power(self) -> float:
        return float(sum(ch.power for ch in self.occupied))

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([ch.frequency for ch in self.occupied])

    @property
    def powers(self) -> np.ndarray:
        return np.array([ch.power for ch in self.occupied])

    @property
    def symbol_rates(self) -> np.ndarray:
        return np.array([ch.symbol_rate for ch in self.occupied])

    @classmethod
    def uniform_grid(
        cls,
        n_channels: int,
        spacing: float,
        symbol_rate: float,
        power: float,
        roll_off: float = 1e-4,
        center: float = 0.0,
    ) -> "ChannelPlan":
        """Equally spaced, fully occupied grid centred on ``center``."""
        k = np.arange(n_channels) - (n_channels - 1) / 2
        return cls(tuple(Channel(float(center + kk * spacing), symbol_rate, power, roll_off) for kk in k))

    def only_occupied(self) -> "ChannelPlan":
        return ChannelPlan(self.occupied)

    def mirrored(self) -> "ChannelPlan":
        """Plan reflected about the reference carrier."""
        return ChannelPlan(tuple(replace(ch, frequency=-ch.frequency) for ch in reversed(self.channels)))

    def scaled_power(self, factor: float) -> "ChannelPlan":
        return ChannelPlan(tuple(replace(ch, power=ch.power * factor) for ch in self.channels))


@dataclass(frozen=True, eq=False)
class SignalPsd:
    """Sampled transmit PSD together with the exact rectangular blocks.

    Attributes
    ----------
    freq : ndarray
        Uniform frequency grid (Hz), symmetric about 0.
    psd : ndarray
        Cell-averaged PSD samples (W/Hz).
    total_power : float
        Sum of occupied launch powers (W).
    blocks : ndarray, shape (n, 3)
        Rows of ``(lower edge, upper edge, height)`` sorted by frequency.
    """

    freq: np.ndarray
    psd: np.ndarray
    total_power: float
    blocks: np.ndarray

    @property
    def resolution(self) -> float:
        return float(self.freq[1] - self.freq[0])

    @property
    def band(self) -> tuple[float, float]:
        if len(self.blocks) == 0:
            return 0.0, 0.0
        return float(self.blocks[0, 0]), float(self.blocks[-1, 1])

    def value(self, f):
        """Exact block PSD at arbitrary frequencies."""
        f = np.asarray(f, dtype=float)
        out = np.zeros_like(f)
        if len(self.blocks) == 0:
            return out
        edges = self.blocks[:, :2].ravel()
        idx = np.searchsorted(edges, f, side="right")
        inside = idx % 2 == 1
        out[inside] = self.blocks[(idx[inside] - 1) // 2, 2]
        return out

    def mirrored(self) -> "SignalPsd":
        blocks = self.blocks[::-1, [1, 0, 2]].copy()
        blocks[:, :2] *= -1
        return SignalPsd(-self.freq[::-1].copy(), self.psd[::-1].copy(), self.total_power, blocks)


def _cell_average(grid: np.ndarray, df: float, lo: float, hi: float) -> np.ndarray:
    """Fraction of each grid cell ``[f - df/2, f + df/2]`` covered by ``[lo, hi]``."""
    left = np.maximum(grid - 0.5 * df, lo)
    right = np.minimum(grid + 0.5 * df, hi)
    return np.clip(right - left, 0.0, None) / df


def build_psd(plan: ChannelPlan, grid_resolution: float) -> SignalPsd:
    """Assemble the transmit PSD of a channel plan.

    Each occupied channel contributes a rectangle of width equal to its
    symbol rate and height ``P_i / B_i``. The sampled values are cell
    averages on a zero-padded symmetric grid, so the trapezoidal integral
    of the samples equals the total launch power.
    """
    occupied = sorted(plan.occupied, key=lambda ch: ch.frequency)
    if occupied:
        min_width = min(ch.symbol_rate for ch in occupied)
        if grid_resolution > min_width / 8 * (1 + 1e-12):
            raise InvalidGridError(
                f"grid resolution {grid_resolution:g} Hz exceeds min bandwidth/8 = {min_width / 8:g} Hz"
            )
    if not grid_resolution > 0:
        raise InvalidGridError("grid resolution must be positive")
    if not occupied:
        freq = np.array([-grid_resolution, 0.0, grid_resolution])
        return SignalPsd(freq, np.zeros(3), 0.0, np.zeros((0, 3)))

    blocks = np.array(
        [(ch.frequency - ch.symbol_rate / 2, ch.frequency + ch.symbol_rate / 2, ch.power / ch.symbol_rate)
         for ch in occupied]
    )
    extent = max(abs(blocks[0, 0]), abs(blocks[-1, 1]))
    n_half = int(np.ceil(extent / grid_resolution)) + 2
    freq = np.arange(-n_half, n_half + 1) * grid_resolution
    psd = np.zeros_like(freq)
    for lo, hi, height in blocks:
        i0 = max(int(np.floor(lo / grid_resolution)) + n_half - 1, 0)
        i1 = min(int(np.ceil(hi / grid_resolution)) + n_half + 2, freq.size)
        psd[i0:i1] += height * _cell_average(freq[i0:i1], grid_resolution, lo, hi)
    return SignalPsd(freq, psd, plan.total_power, blocks)


def sample_network_occupancy(
    slots: int,
    occupancy: float,
    seed: int,
    spacing: float = 5.005e9,
    symbol_rate: float = 5e9,
    power: float = 10 ** (-8 / 10) * 1e-3,
    roll_off: float = 1e-4,
    low_to_high_ratio: float = 0.1,
) -> ChannelPlan:
    """Draw a mesh-network style spectrum with occupancy biased to high frequencies.

    Slot ``k`` of ``slots`` is centred at ``(k - (slots - 1)/2) * spacing``.
    Occupation weights grow exponentially from the lowest slot to the
    highest one, the lowest slot being ``low_to_high_ratio`` times as likely
    as the highest. ``round(occupancy * slots)`` distinct slots are drawn
    without replacement.

    Returns
    -------
    ChannelPlan
        All slots, with ``occupied`` set on the drawn ones.
    """
    if not 0 < occupancy <= 1:
        raise InvalidArgumentError(f"occupancy must be in (0, 1], got {occupancy!r}")
    if slots < 1:
        raise InvalidArgumentError(f"slots must be >= 1, got {slots!r}")
    n_occ = max(1, int(round(occupancy * slots)))
    k = np.arange(slots)
    if slots > 1:
        weights = np.exp(-np.log(low_to_high_ratio) * k / (slots - 1))
    else:
        weights = np.ones(1)
    rng = np.random.default_rng(seed)
    chosen = set(rng.choice(slots, size=n_occ, replace=False, p=weights / weights.sum()).tolist())
    centers = (k - (slots - 1) / 2) * spacing
    return ChannelPlan(
        tuple(Channel(float(fc), symbol_rate, power, roll_off, occupied=i in chosen) for i, fc in enumerate(centers))
    )


def plan_from_arrays(
    frequencies: Iterable[float],
    symbol_rates: Sequence[float] | float,
    powers: Sequence[float] | float,
    roll_off: float = 1e-4,
) -> ChannelPlan:
    """Convenience constructor from parallel arrays (scalars broadcast)."""
    f = np.atleast_1d(np.asarray(list(frequencies), dtype=float))
    b = np.broadcast_to(np.asarray(symbol_rates, dtype=float), f.shape)
    p = np.broadcast_to(np.asarray(powers, dtype=float), f.shape)
    return ChannelPlan(tuple(Channel(float(fi), float(bi), float(pi_), roll_off) for fi, bi, pi_ in zip(f, b, p)))
