"""Gaussian-noise model of nonlinear interference with the full Raman response.

The NLI power spectral density at frequency ``f`` is the double integral

    G(f) = k gamma^2 int int G_Tx(f1) G_Tx(f2) G_Tx(f1 + f2 - f)
           |int_0^L a(z) exp(j phi z) dz|^2 W(f - f1, f - f2) df1 df2

with ``k = 16/27`` (dual polarization) or 2 (single), ``a`` the square root
of the power profile ratio of the four mixing frequencies, ``phi`` the
four-wave-mixing phase mismatch and ``W`` a weighting built from the real
part of the nonlinear transfer function. ``W = 1`` when there is no delayed
response.

Integration uses relative coordinates ``u = f1 - f`` and ``v = f2 - f``.
The outer ``v`` integral is adaptive (:func:`scipy.integrate.quad_vec`) with
breakpoints at block edges and graded towards ``v = 0``. For each ``v`` the
inner ``u`` integral uses Gauss-Legendre panels graded towards the ridge
``u = 0`` whose width scales as ``alpha / (4 pi^2 |beta2 v|)``. The distance
integral uses exponential-linear segments, exact for a pure exponential
profile.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.constants import pi
from scipy.integrate import quad_vec
from scipy.optimize import minimize

from .errors import CoverageError, DegenerateInputError, IncompleteInputError, InvalidArgumentError
from .fiber import ChannelPlan, FiberSpec, SignalPsd
from .profile import PowerProfile
from .raman import NonlinearTransfer, RamanFitParams, RamanSpectrum, nonlinear_transfer
from ._kernels import link_power_segments


def worker_count() -> int:
    """Worker cap from ``RAMAN_NLI_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("RAMAN_NLI_THREADS", "1")))
    except ValueError:
        return 1


# --------------------------------------------------------------------------
# scaling factors


def r_weight(H: NonlinearTransfer, f):
    """Weight ``R(f)`` such that the NLI bracket equals one without Raman response."""
    if H.polarization == "dual":
        return 9.0 / (8.0 * np.sqrt(3.0)) * H.real_part(f)
    return H.real_part(f) / np.sqrt(2.0)


def scaling_spm(H: NonlinearTransfer) -> float:
    """SPM scaling ``3 R(0)^2`` (dual) or ``2 R(0)^2`` (single)."""
    if H.polarization == "single":
        # 2 R(0)^2 with R = Re H / sqrt(2), written without the rounding of sqrt(2)
        return float(H.real_part(0.0)) ** 2
    return 3.0 * float(r_weight(H, 0.0)) ** 2


def scaling_xpm(H: NonlinearTransfer, delta_f):
    """XPM scaling factor for an interferer ``delta_f`` away from the channel."""
    delta_f = np.asarray(delta_f, dtype=float)
    if np.any(delta_f < 0):
        raise InvalidArgumentError("frequency separation must be non-negative")
    if H.polarization == "single":
        return 0.25 * (H.real_part(delta_f) + float(H.real_part(0.0))) ** 2
    r0 = float(r_weight(H, 0.0))
    r = r_weight(H, delta_f)
    return r**2 + r * r0 + r0**2


@dataclass(frozen=True, eq=False)
class ScalingFactors:
    """Closed-form scaling factors sampled on a separation grid."""

    delta_f: np.ndarray
    r: np.ndarray
    r_spm: float
    r_xpm: np.ndarray
    polarization: str

    @property
    def r_xpm_db(self) -> np.ndarray:
        return 10 * np.log10(self.r_xpm)

    @property
    def r_spm_db(self) -> float:
        return float(10 * np.log10(self.r_spm))


def scaling_factors(H: NonlinearTransfer, delta_f) -> ScalingFactors:
    delta_f = np.asarray(delta_f, dtype=float)
    return ScalingFactors(delta_f, r_weight(H, delta_f), scaling_spm(H), scaling_xpm(H, delta_f), H.polarization)


def fit_raman_params(
    delta_f,
    r_xpm_db,
    initial: RamanFitParams | None = None,
    lambda0: float = 1550e-9,
    n2: float = 2.1e-20,
    polarization: str = "dual",
    max_iter: int = 4000,
) -> RamanFitParams:
    """Fit the analytic Raman parameters to a measured ``R_XPM(delta_f)`` curve.

    Minimizes the squared dB error with a Nelder-Mead simplex over the
    parameters scaled by their initial values.
    """
    delta_f = np.asarray(delta_f, dtype=float)
    target = np.asarray(r_xpm_db, dtype=float)
    if delta_f.shape != target.shape or delta_f.size < 5:
        raise InvalidArgumentError("need at least five matching (delta_f, r_xpm_db) samples")
    x0 = (initial or RamanFitParams()).as_array()

    def cost(scale):
        try:
            params = RamanFitParams.from_array(x0 * scale)
            H = nonlinear_transfer(RamanSpectrum.analytic(params, lambda0, n2, grid=np.zeros(1)), polarization)
            model = 10 * np.log10(scaling_xpm(H, delta_f))
        except (InvalidArgumentError, FloatingPointError, ValueError):
            return np.inf
        err = float(np.sum((model - target) ** 2))
        return err if np.isfinite(err) else np.inf

    res = minimize(cost, np.ones(x0.size), method="Nelder-Mead",
                   options={"maxiter": max_iter, "xatol": 1e-8, "fatol": 1e-14})
    return RamanFitParams.from_array(x0 * res.x)


def delta_eta(eta_with: float, eta_without: float, fraction: float, polarization: str = "dual") -> float:
    """Impact of the real Raman spectrum in dB, normalized by the effective Kerr coefficient.

    ``eta_without`` is computed with the real part of the Raman response
    removed (imaginary part kept). In dual polarization the effective Kerr
    coefficient is ``gamma (8 + f_r) / 8``; in single polarization it is
    ``gamma``.
    """
    if not eta_without > 0:
        raise DegenerateInputError("reference NLI coefficient must be positive")
    norm = (8.0 / (8.0 + fraction)) ** 2 if polarization == "dual" else 1.0
    return float(10 * np.log10(norm * eta_with / eta_without))


# --------------------------------------------------------------------------
# configuration and report types


@dataclass(frozen=True)
class NliConfig:
    """Settings of a GN-model evaluation.

    Attributes
    ----------
    polarization : {"dual", "single"}
    profile : {"triangular", "ode", "none"}
        Source of the power profile when the caller lets the model build it.
    resolution : float or None
        Integration grid resolution (Hz); used as the finest outer panel seed
        and for PSD sampling. Defaults to a quarter of the narrowest channel.
    channels : tuple of int or None
        Indices (into the occupied channels) to evaluate; all when None.
    dbp : bool
        Exclude the self-channel (SPM) region of the integral.
    rel_tol : float
        Relative tolerance of the adaptive outer integral.
    z_segments : int
        Exponential-linear segments of the distance integral.
    gauss_order : int
        Gauss-Legendre points per inner panel.
    band_points : int
        Points averaging G over the channel band for ``eta`` (1 = centre only).
    """

    polarization: str = "dual"
    profile: str = "triangular"
    resolution: float | None = None
    channels: tuple[int, ...] | None = None
    dbp: bool = False
    rel_tol: float = 1e-3
    z_segments: int = 16
    gauss_order: int = 8
    band_points: int = 1

    def __post_init__(self):
        if self.polarization not in ("dual", "single"):
            raise InvalidArgumentError(f"polarization must be 'dual' or 'single', got {self.polarization!r}")
        if self.profile not in ("triangular", "ode", "none"):
            raise InvalidArgumentError(f"unknown profile source {self.profile!r}")
        if self.z_segments < 1 or self.gauss_order < 2 or self.band_points < 1:
            raise InvalidArgumentError("quadrature orders must be positive")

    def checked_resolution(self, plan: ChannelPlan) -> float:
        narrowest = plan.symbol_rates.min()
        res = narrowest / 4 if self.resolution is None else self.resolution
        if res > narrowest / 4 * (1 + 1e-12):
            raise InvalidArgumentError(f"resolution {res:g} Hz exceeds min bandwidth/4 = {narrowest / 4:g} Hz")
        return res


@dataclass(frozen=True)
class ChannelNli:
    """GN-model outcome for one channel."""

    index: int
    frequency: float
    power: float
    symbol_rate: float
    psd_nli: float
    eta: float
    snr_db: float
    r_spm: float
    eta_without_real: float | None = None
    delta_eta_db: float | None = None


@dataclass(frozen=True)
class NliReport:
    """Per-channel NLI results plus the scaling-factor table."""

    channels: tuple[ChannelNli, ...]
    scaling: ScalingFactors
    source: str = "gn"

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(ch, name) for ch in self.channels], dtype=float)


# --------------------------------------------------------------------------
# integration machinery


# |k| / |d ln a / dz| above which the distance integral uses its asymptotic series
_ASYMPTOTIC_RATIO = 40.0

_XGL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss(order: int) -> tuple[np.ndarray, np.ndarray]:
    if order not in _XGL_CACHE:
        _XGL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _XGL_CACHE[order]


class _Blocks:
    """Subset of PSD rectangles with fast lookup."""

    def __init__(self, blocks: np.ndarray, ids: np.ndarray):
        order = np.argsort(blocks[:, 0])
        self.blocks = blocks[order]
        self.ids = ids[order]
        self.edges = self.blocks[:, :2].ravel()

    def lookup(self, x):
        """Return (height, block id) at ``x``; id -1 outside every block."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.edges, x, side="right")
        inside = idx % 2 == 1
        pos = np.where(inside, (idx - 1) // 2, 0)
        height = np.where(inside, self.blocks[pos, 2], 0.0)
        ident = np.where(inside, self.ids[pos], -1)
        return height, ident

    @property
    def empty(self) -> bool:
        return self.blocks.shape[0] == 0


class _LogProfileTable:
    """``ln rho`` sampled at the z-nodes of the distance integral."""

    def __init__(self, profile: PowerProfile, fiber: FiberSpec, segments: int):
        alpha = fiber.alpha
        leff = fiber.effective_length
        if alpha > 0:
            self.z = -np.log1p(-alpha * leff * np.arange(segments + 1) / segments) / alpha
        else:
            self.z = np.linspace(0.0, fiber.length, segments + 1)
        self.z[-1] = fiber.length
        self.h = np.diff(self.z)
        self.freq = profile.freq
        self.rows = profile.log_rho(self.z, profile.freq)
        expected = -alpha * self.z
        flat = profile.freq.size == 1 or profile.is_flat
        self.pure_loss = flat and np.allclose(self.rows[:, 0], expected, rtol=0, atol=1e-10)
        self.flat = flat
        if self.flat:
            self.freq = profile.freq[:1]
            self.rows = np.ascontiguousarray(self.rows[:, :1])


class _Integrand:
    """Evaluates the GN integrand for a fixed channel-of-interest frequency."""

    def __init__(self, fiber: FiberSpec, profile: PowerProfile, f: float, weights, config: NliConfig):
        self.fiber = fiber
        self.f = f
        self.weights = weights
        self.table = _LogProfileTable(profile, fiber, config.z_segments)

    def link(self, u: np.ndarray, v: float) -> np.ndarray:
        """``|int_0^L a(z) exp(j k z) dz|^2`` at each ``(u, v)``."""
        fib = self.fiber
        tab = self.table
        if tab.pure_loss:
            k = -4 * pi**2 * u * v * (fib.beta2 + pi * fib.beta3 * (2 * self.f + u + v))
            s = (-fib.alpha + 1j * k) * fib.length
            val = -np.expm1(s) / (fib.alpha - 1j * k)
            return val.real**2 + val.imag**2
        return link_power_segments(u, np.full_like(u, v), self.f, fib.beta2, fib.beta3, tab.z, tab.h,
                                   tab.rows, tab.freq, _ASYMPTOTIC_RATIO)

    def brackets(self, u: np.ndarray, v: float) -> np.ndarray:
        out = np.empty((len(self.weights), u.size))
        for i, (pol, rfun) in enumerate(self.weights):
            if rfun is None:
                out[i] = 1.0
                continue
            ru, rv = rfun(u), float(rfun(v))
            if pol == "dual":
                out[i] = ru**2 + rv**2 + ru * rv
            else:
                out[i] = 0.5 * (ru**2 + rv**2) + ru * rv
        return out


def _graded(width: float, extent: float, ratio: float = 2.0) -> np.ndarray:
    """Symmetric breakpoints ``+-width/4 * ratio^k`` up to ``extent``."""
    if not np.isfinite(width) or width <= 0 or width / 4 >= extent:
        return np.zeros(0)
    n = int(np.ceil(np.log(4 * extent / width) / np.log(ratio)))
    pts = width / 4 * ratio ** np.arange(n + 1)
    pts = pts[pts < extent]
    return np.concatenate((-pts[::-1], pts))


def _merge_points(fixed: np.ndarray, extra: np.ndarray, gap: float) -> np.ndarray:
    """Union of ``fixed`` and those ``extra`` points at least ``gap`` away from every kept point."""
    kept = np.unique(fixed)
    for x in np.unique(extra):
        i = np.searchsorted(kept, x)
        near = (i < kept.size and kept[i] - x < gap) or (i > 0 and x - kept[i - 1] < gap)
        if not near:
            kept = np.insert(kept, i, x)
    return kept


def _ridge_width(fiber: FiberSpec, f: float, v: float) -> float:
    b = abs(fiber.beta2 + pi * fiber.beta3 * (2 * f + v))
    denom = 4 * pi**2 * b * abs(v)
    return np.inf if denom == 0 else fiber.alpha / denom


def _window_blocks(psd: SignalPsd, window) -> tuple[_Blocks, _Blocks, _Blocks]:
    ids = np.arange(psd.blocks.shape[0])
    if window is None:
        full = _Blocks(psd.blocks, ids)
        return full, full, full
    sets = []
    for sel in window:
        sel = np.asarray(sorted(sel), dtype=int)
        sets.append(_Blocks(psd.blocks[sel], ids[sel]) if sel.size else _Blocks(np.zeros((0, 3)), sel))
    return tuple(sets)


def _integrate_point(
    psd: SignalPsd,
    fiber: FiberSpec,
    profile: PowerProfile,
    f: float,
    weights,
    config: NliConfig,
    window=None,
    exclude_block: int | None = None,
) -> np.ndarray:
    """Double integral (without the gamma prefactor) for each weighting."""
    a_set, b_set, c_set = _window_blocks(psd, window)
    nw = len(weights)
    if a_set.empty or b_set.empty or c_set.empty:
        return np.zeros(nw)
    integrand = _Integrand(fiber, profile, f, weights, config)
    x_gl, w_gl = _gauss(config.gauss_order)
    x_lo, w_lo = _gauss(max(2, config.gauss_order // 2))
    a_edges = a_set.edges - f
    c_edges = c_set.edges - f
    u_lo, u_hi = a_edges[0], a_edges[-1]
    widest = float(np.max(psd.blocks[:, 1] - psd.blocks[:, 0]))

    def inner(v: float) -> np.ndarray:
        height_b, id_b = b_set.lookup(np.array([f + v]))
        if height_b[0] == 0:
            return np.zeros(nw)
        w = _ridge_width(fiber, f, v)
        pts = np.concatenate((a_edges, c_edges - v, [0.0], _graded(w, max(abs(u_lo), abs(u_hi)))))
        pts = np.unique(np.clip(pts, u_lo, u_hi))
        lo, hi = pts[:-1], pts[1:]
        mid = 0.5 * (lo + hi)
        ha, ida = a_set.lookup(f + mid)
        hc, idc = c_set.lookup(f + v + mid)
        prod = ha * hc
        if exclude_block is not None and id_b[0] == exclude_block:
            prod = np.where((ida == exclude_block) & (idc == exclude_block), 0.0, prod)
        keep = prod > 0
        if not np.any(keep):
            return np.zeros(nw)
        lo, hi, mid, prod = lo[keep], hi[keep], mid[keep], prod[keep]
        half = 0.5 * (hi - lo)
        # panels far from the ridge relative to their width get the low order rule
        far = np.minimum(np.abs(lo), np.abs(hi)) * (lo * hi > 0) >= 4 * half
        u_parts, w_parts = [], []
        for sel, (x, wq) in ((~far, (x_gl, w_gl)), (far, (x_lo, w_lo))):
            if np.any(sel):
                u_parts.append((mid[sel][:, None] + half[sel][:, None] * x[None, :]).ravel())
                w_parts.append(((half[sel] * prod[sel])[:, None] * wq[None, :]).ravel())
        u = np.concatenate(u_parts)
        wt = np.concatenate(w_parts)
        vals = integrand.link(u, v) * wt
        return height_b[0] * (integrand.brackets(u, v) @ vals)

    b_edges = b_set.edges - f
    v_lo, v_hi = b_edges[0], b_edges[-1]
    _, own = a_set.lookup(np.array([f]))
    if own[0] >= 0:
        row = psd.blocks[own[0]]
        near = np.array([row[0], row[1]]) - f
    else:
        near = a_edges[np.argsort(np.abs(a_edges))[:2]]
    kinks = (c_edges[None, :] - near[:, None]).ravel()
    coi_width = float(near.max() - near.min()) if near.size == 2 else widest
    v_scale = _ridge_width(fiber, f, coi_width)
    grading = _graded(4 * v_scale, max(abs(v_lo), abs(v_hi)))
    points = _merge_points(b_edges, np.concatenate(([0.0], kinks, grading)), 1e-3 * coi_width)
    points = points[(points > v_lo) & (points < v_hi)]
    result, _ = quad_vec(inner, v_lo, v_hi, epsrel=config.rel_tol, epsabs=0.0, points=points,
                         norm="max", limit=100000)
    return np.asarray(result, dtype=float)


def _prefactor(fiber: FiberSpec, polarization: str) -> float:
    return (16.0 / 27.0 if polarization == "dual" else 2.0) * fiber.gamma**2


def _check_coverage(psd: SignalPsd, fiber: FiberSpec, profile: PowerProfile):
    if profile.length < fiber.length * (1 - 1e-9):
        raise CoverageError(f"profile ends at {profile.length:g} m before the span end {fiber.length:g} m")
    if profile.freq.size > 1 and len(psd.blocks):
        lo, hi = psd.band
        tol = 0.5 * (profile.freq[1] - profile.freq[0]) + 1e-9 * max(abs(lo), abs(hi), 1.0)
        # binned profiles stop half a bin inside the band edges
        span = (profile.freq[0], profile.freq[-1])
        edge_bins = np.max(np.diff(profile.freq))
        if lo < span[0] - max(tol, edge_bins) or hi > span[1] + max(tol, edge_bins):
            raise CoverageError(
                f"profile band [{span[0]:g}, {span[1]:g}] Hz does not cover the PSD band [{lo:g}, {hi:g}] Hz"
            )


def _weights_for(transfers: Sequence[NonlinearTransfer | None], polarization: str):
    out = []
    for H in transfers:
        if H is None:
            out.append((polarization, None))
        else:
            if H.polarization != polarization:
                raise InvalidArgumentError("transfer function polarization differs from the configuration")
            out.append((polarization, lambda x, H=H: r_weight(H, x)))
    return out


def nli_psd_multi(
    psd: SignalPsd,
    fiber: FiberSpec,
    transfers: Sequence[NonlinearTransfer | None],
    profile: PowerProfile,
    f: float,
    config: NliConfig = NliConfig(),
    window=None,
    exclude_block: int | None = None,
) -> np.ndarray:
    """NLI PSD at ``f`` for several transfer functions sharing one quadrature.

    ``None`` in ``transfers`` stands for a unit weighting (no delayed response).
    ``window`` restricts the three mixing frequencies to block index sets
    ``(set_f1, set_f2, set_f3)``; ``exclude_block`` removes the region where
    all three lie in that block.
    """
    _check_coverage(psd, fiber, profile)
    if psd.total_power == 0:
        return np.zeros(len(transfers))
    weights = _weights_for(transfers, config.polarization)
    val = _integrate_point(psd, fiber, profile, float(f), weights, config, window, exclude_block)
    return _prefactor(fiber, config.polarization) * np.maximum(val, 0.0)


def nli_psd(psd: SignalPsd, fiber: FiberSpec, H: NonlinearTransfer | None, profile: PowerProfile, f,
            config: NliConfig = NliConfig()):
    """NLI power spectral density ``G(f)`` in W/Hz at one or more frequencies.

    With ``config.dbp`` the region where all mixing frequencies fall inside
    the block containing ``f`` is excluded.
    """
    f_arr = np.atleast_1d(np.asarray(f, dtype=float))
    out = np.empty(f_arr.size)
    ids = np.arange(psd.blocks.shape[0])
    for i, fi in enumerate(f_arr):
        excl = None
        if config.dbp and len(psd.blocks):
            _, ident = _Blocks(psd.blocks, ids).lookup(np.array([fi]))
            excl = int(ident[0]) if ident[0] >= 0 else None
        out[i] = nli_psd_multi(psd, fiber, [H], profile, fi, config, exclude_block=excl)[0]
    return out if np.ndim(f) else float(out[0])


def eta_and_snr(psd_nli: float, power: float, symbol_rate: float, p_ase: float = 0.0, n_spans: int = 1,
                total_bandwidth: float | None = None) -> tuple[float, float]:
    """NLI coefficient (1/W^2) and linear SNR of a channel under the locally-flat assumption."""
    if not power > 0:
        raise InvalidArgumentError("channel power must be positive")
    if total_bandwidth is not None and symbol_rate > total_bandwidth / 10:
        warnings.warn("channel bandwidth exceeds a tenth of the signal band; NLI PSD may not be flat",
                      stacklevel=2)
    eta = symbol_rate * psd_nli / power**3
    eta_n = n_spans * eta
    noise = n_spans * p_ase + eta_n * power**3
    snr = np.inf if noise == 0 else power / noise
    return eta, snr


def _band_offsets(symbol_rate: float, points: int) -> tuple[np.ndarray, np.ndarray]:
    if points == 1:
        return np.zeros(1), np.ones(1)
    x, w = _gauss(points)
    return 0.5 * symbol_rate * x * (1 - 1e-9), 0.5 * w


def channel_eta(
    psd: SignalPsd,
    fiber: FiberSpec,
    transfers: Sequence[NonlinearTransfer | None],
    profile: PowerProfile,
    block: int,
    config: NliConfig = NliConfig(),
) -> np.ndarray:
    """NLI coefficient of the channel in PSD block ``block`` for each transfer function.

    The NLI PSD is averaged over ``config.band_points`` Gauss-Legendre
    points across the channel band.
    """
    lo, hi, height = psd.blocks[block]
    rate = hi - lo
    power = height * rate
    offsets, w = _band_offsets(rate, config.band_points)
    excl = block if config.dbp else None
    acc = np.zeros(len(transfers))
    for off, wi in zip(offsets, w):
        acc += wi * nli_psd_multi(psd, fiber, transfers, profile, 0.5 * (lo + hi) + off, config, exclude_block=excl)
    return rate * acc / power**3


def pair_etas(
    psd: SignalPsd,
    fiber: FiberSpec,
    profile: PowerProfile,
    block: int,
    config: NliConfig = NliConfig(),
    interferers: Sequence[int] | None = None,
) -> tuple[float, dict[int, float]]:
    """Unweighted SPM and per-interferer XPM NLI coefficients of one channel.

    The XPM window of interferer ``k`` has one mixing frequency in the
    channel and the other two in ``k``; both orderings are included.

    Returns
    -------
    eta_spm : float
    eta_xpm : dict
        Block index of the interferer mapped to its coefficient.
    """
    lo, hi, height = psd.blocks[block]
    rate = hi - lo
    power = height * rate
    offsets, w = _band_offsets(rate, config.band_points)
    others = [k for k in range(psd.blocks.shape[0]) if k != block] if interferers is None else list(interferers)

    def eta_window(window, factor):
        acc = 0.0
        for off, wi in zip(offsets, w):
            acc += wi * nli_psd_multi(psd, fiber, [None], profile, 0.5 * (lo + hi) + off, config, window=window)[0]
        return factor * rate * acc / power**3

    eta_spm = eta_window(({block}, {block}, {block}), 1.0)
    eta_xpm = {k: eta_window(({block}, {k}, {k}), 2.0) for k in others}
    return eta_spm, eta_xpm


def xpm_closed_form_total(
    plan: ChannelPlan,
    H: NonlinearTransfer,
    eta_spm: float,
    eta_xpm: dict[int, float],
    channel_index: int,
    dbp: bool = False,
) -> float:
    """Scaled sum ``R_SPM eta_SPM + sum_k R_XPM(|f_i - f_k|) eta_XPM^(k)``.

    Indices refer to ``plan.occupied``. Every occupied channel other than
    ``channel_index`` must have an entry in ``eta_xpm``.
    """
    occ = plan.occupied
    missing = [k for k in range(len(occ)) if k != channel_index and k not in eta_xpm]
    if missing:
        raise IncompleteInputError(f"missing XPM coefficients for interferers {missing}")
    fi = occ[channel_index].frequency
    total = 0.0 if dbp else scaling_spm(H) * eta_spm
    for k, eta in sorted(eta_xpm.items()):
        total += float(scaling_xpm(H, abs(fi - occ[k].frequency))) * eta
    return total


def _block_of_channel(psd: SignalPsd, plan: ChannelPlan) -> list[int]:
    """Map occupied-channel index to PSD block index (both sorted by frequency)."""
    order = np.argsort([ch.frequency for ch in plan.occupied], kind="stable")
    mapping = [0] * len(order)
    for block, idx in enumerate(order):
        mapping[idx] = block
    return mapping


def _map_ordered(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def nli_report(
    plan: ChannelPlan,
    psd: SignalPsd,
    fiber: FiberSpec,
    H: NonlinearTransfer,
    profile: PowerProfile,
    config: NliConfig = NliConfig(),
    p_ase: float = 0.0,
    with_delta_eta: bool = True,
    delta_f_grid=None,
) -> NliReport:
    """Full-integral NLI, SNR and real-spectrum impact for the selected channels."""
    occ = plan.occupied
    blocks = _block_of_channel(psd, plan)
    selection = range(len(occ)) if config.channels is None else config.channels
    transfers = [H, H.without_real_raman()] if with_delta_eta else [H]
    band = psd.band[1] - psd.band[0]

    def one(i: int) -> ChannelNli:
        ch = occ[i]
        etas = channel_eta(psd, fiber, transfers, profile, blocks[i], config)
        g = etas[0] * ch.power**3 / ch.symbol_rate
        eta, snr = eta_and_snr(g, ch.power, ch.symbol_rate, p_ase)
        d_eta = delta_eta(etas[0], etas[1], H.fraction, H.polarization) if with_delta_eta else None
        return ChannelNli(
            index=i, frequency=ch.frequency, power=ch.power, symbol_rate=ch.symbol_rate, psd_nli=g, eta=eta,
            snr_db=float(10 * np.log10(snr)), r_spm=scaling_spm(H),
            eta_without_real=float(etas[1]) if with_delta_eta else None, delta_eta_db=d_eta,
        )

    rows = _map_ordered(one, list(selection), worker_count())
    grid = np.linspace(0, max(band, 1.0), 101) if delta_f_grid is None else np.asarray(delta_f_grid)
    return NliReport(tuple(rows), scaling_factors(H, grid), "gn")


def closed_form_report(
    plan: ChannelPlan,
    psd: SignalPsd,
    fiber: FiberSpec,
    H: NonlinearTransfer,
    profile: PowerProfile,
    config: NliConfig = NliConfig(),
    p_ase: float = 0.0,
) -> NliReport:
    """NLI from per-pair restricted integrals combined with closed-form scaling factors."""
    occ = plan.occupied
    blocks = _block_of_channel(psd, plan)
    selection = range(len(occ)) if config.channels is None else config.channels
    inverse = {b: i for i, b in enumerate(blocks)}
    band = psd.band[1] - psd.band[0]

    def one(i: int) -> ChannelNli:
        ch = occ[i]
        e_spm, e_xpm_blocks = pair_etas(psd, fiber, profile, blocks[i], config)
        e_xpm = {inverse[b]: val for b, val in e_xpm_blocks.items()}
        eta = xpm_closed_form_total(plan, H, e_spm, e_xpm, i, config.dbp)
        eta_ref = (0.0 if config.dbp else e_spm) + sum(e_xpm.values())
        g = eta * ch.power**3 / ch.symbol_rate
        _, snr = eta_and_snr(g, ch.power, ch.symbol_rate, p_ase)
        return ChannelNli(
            index=i, frequency=ch.frequency, power=ch.power, symbol_rate=ch.symbol_rate, psd_nli=g, eta=eta,
            snr_db=float(10 * np.log10(snr)), r_spm=scaling_spm(H), eta_without_real=eta_ref,
            delta_eta_db=delta_eta(eta, eta_ref, H.fraction, H.polarization) if eta_ref > 0 else 0.0,
        )

    rows = _map_ordered(one, list(selection), worker_count())
    return NliReport(tuple(rows), scaling_factors(H, np.linspace(0, max(band, 1.0), 101)), "cf")
