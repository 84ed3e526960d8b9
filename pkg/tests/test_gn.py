import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_force_gn
from raman_nli import ChannelPlan, build_psd, nonlinear_transfer
from raman_nli.errors import DegenerateInputError, IncompleteInputError, InvalidArgumentError
from raman_nli.fiber import plan_from_arrays
from raman_nli.gn import (
    NliConfig,
    closed_form_report,
    delta_eta,
    eta_and_snr,
    fit_raman_params,
    nli_psd,
    nli_report,
    r_weight,
    scaling_spm,
    scaling_xpm,
    xpm_closed_form_total,
)
from raman_nli.profile import triangular_profile, uniform_loss_profile
from raman_nli.raman import RamanFitParams, RamanSpectrum, instantaneous_spectrum

R_SPM_DB = 0.24543660388196606
R0 = 0.5938970975554047


@pytest.fixture(scope="module")
def flat_dual():
    return nonlinear_transfer(instantaneous_spectrum(), "dual")


@pytest.fixture(scope="module")
def flat_single():
    return nonlinear_transfer(instantaneous_spectrum(), "single")


def test_r_weight_values(transfer, flat_dual, flat_single):
    assert float(r_weight(flat_dual, 3e12)) == pytest.approx(1 / np.sqrt(3), rel=1e-15)
    assert float(r_weight(flat_single, 3e12)) == pytest.approx(1 / np.sqrt(2), rel=1e-15)
    r = float(r_weight(transfer, 0.0))
    assert r == pytest.approx(R0, rel=1e-12)
    assert r == pytest.approx((8 + transfer.fraction) / (8 * np.sqrt(3)), rel=1e-12)
    # the dual bracket reduces to one without a delayed response
    rf = 1 / np.sqrt(3)
    assert 2 * rf**2 + rf * rf == pytest.approx(1.0, rel=1e-15)


def test_spm_scaling(transfer, flat_dual, flat_single):
    assert 10 * np.log10(scaling_spm(transfer)) == pytest.approx(R_SPM_DB, rel=1e-12)
    assert 10 * np.log10(scaling_spm(transfer)) == pytest.approx(0.2456, abs=0.005)
    assert 10 * np.log10(scaling_spm(transfer)) == pytest.approx(20 * np.log10((8 + transfer.fraction) / 8), rel=1e-12)
    assert scaling_spm(flat_dual) == pytest.approx(1.0, rel=1e-15)
    assert scaling_spm(flat_single) == pytest.approx(1.0, rel=1e-15)


def test_xpm_scaling_limits(transfer, transfer_single):
    for H in (transfer, transfer_single):
        assert float(scaling_xpm(H, 1.0)) == pytest.approx(scaling_spm(H), rel=1e-9)
    assert 10 * np.log10(float(scaling_xpm(transfer, 0.0))) == pytest.approx(0.2456, abs=0.005)


def test_xpm_drop_at_6_thz(transfer):
    drop = 10 * np.log10(float(scaling_xpm(transfer, 0.0)) / float(scaling_xpm(transfer, 6e12)))
    assert drop == pytest.approx(0.32, abs=0.05)


def test_xpm_decreasing_trend(transfer):
    # the cosine ripple of the fitted real part adds a 0.02 dB bump near 6 THz
    df = np.linspace(1e12, 10e12, 451)
    db = 10 * np.log10(scaling_xpm(transfer, df))
    assert np.all(np.diff(db[df <= 5.3e12]) < 0)
    assert np.max(np.diff(db)) < 1e-3
    assert db[-1] < db[df < 7.2e12].min() - 0.2
    assert np.all(np.diff(db[df >= 7.2e12]) < 0)


@given(st.floats(0.0, 40e12))
def test_xpm_unity_without_delayed_response(df):
    for mode in ("dual", "single"):
        H = nonlinear_transfer(instantaneous_spectrum(), mode)
        assert float(scaling_xpm(H, df)) == pytest.approx(1.0, rel=1e-15)
    assert float(scaling_xpm(nonlinear_transfer(instantaneous_spectrum(), "single"), df)) == 1.0


def test_xpm_rejects_negative_separation(transfer):
    with pytest.raises(InvalidArgumentError):
        scaling_xpm(transfer, -1.0)


def test_eta_and_snr_examples():
    eta, snr = eta_and_snr(0.0, 1e-3, 40e9, p_ase=1e-5)
    assert eta == 0 and snr == pytest.approx(100.0)
    # choose G so that NLI power equals ASE power
    g = 1e-5 / 40e9
    eta, snr = eta_and_snr(g, 1e-3, 40e9, p_ase=1e-5)
    assert eta * 1e-9 == pytest.approx(1e-5)
    assert snr == pytest.approx(50.0)
    with pytest.raises(InvalidArgumentError):
        eta_and_snr(g, 0.0, 40e9)
    with pytest.warns(UserWarning, match="flat"):
        eta_and_snr(g, 1e-3, 40e9, total_bandwidth=100e9)


def test_delta_eta_cases():
    assert delta_eta(1.0, 1.0, 0.0) == 0.0
    assert delta_eta(1.0, 1.0, 0.0, "single") == 0.0
    assert delta_eta(1.0, 1.0, 0.23) == pytest.approx(-20 * np.log10(8.23 / 8))
    with pytest.raises(DegenerateInputError):
        delta_eta(1.0, 0.0, 0.23)


@pytest.fixture(scope="module")
def single_channel(fiber):
    fib = fiber.with_(c_r=0.0)
    plan = ChannelPlan.uniform_grid(1, 50e9, 40e9, 1e-3)
    return fib, plan, build_psd(plan, 40e9 / 8), uniform_loss_profile(fib)


def test_zero_psd_gives_zero(fiber, flat_dual):
    psd = build_psd(ChannelPlan(()), 1e9)
    assert nli_psd(psd, fiber, flat_dual, uniform_loss_profile(fiber), 0.0) == 0.0


def test_single_channel_matches_brute_force(single_channel, flat_dual):
    fib, plan, psd, prof = single_channel
    lo, hi, height = psd.blocks[0]
    got = nli_psd(psd, fib, flat_dual, prof, 0.0, NliConfig(rel_tol=1e-5))
    ref = brute_force_gn(fib.alpha, fib.beta2, fib.beta3, fib.gamma, fib.length, lo, hi, height, 0.0, 1024)
    assert got == pytest.approx(ref, rel=1e-2)
    # the weighting-free path is the same integral
    assert nli_psd(psd, fib, None, prof, 0.0, NliConfig(rel_tol=1e-5)) == pytest.approx(got, rel=1e-12)


def test_single_polarization_prefactor(single_channel, flat_dual, flat_single):
    fib, _, psd, prof = single_channel
    dual = nli_psd(psd, fib, flat_dual, prof, 0.0)
    single = nli_psd(psd, fib, flat_single, prof, 0.0, NliConfig(polarization="single"))
    assert single / dual == pytest.approx(2 / (16 / 27), rel=1e-12)


@settings(max_examples=5)
@given(st.floats(0.01, 100.0))
def test_cubic_power_scaling(single_channel, flat_dual, x):
    fib, plan, psd, prof = single_channel
    base = nli_psd(psd, fib, flat_dual, prof, 5e9)
    scaled = build_psd(plan.scaled_power(x), 40e9 / 8)
    assert nli_psd(scaled, fib, flat_dual, prof, 5e9) == pytest.approx(x**3 * base, rel=1e-9)


def test_mirror_symmetry(fiber, spectrum):
    plan = plan_from_arrays([-60e9, 0.0, 90e9], 32e9, [1e-3, 2e-3, 1.5e-3])
    psd = build_psd(plan, 4e9)
    # an exaggerated Raman slope makes the tilt visible over 180 GHz
    prof = triangular_profile(psd, fiber.with_(c_r=fiber.c_r * 800))
    H = nonlinear_transfer(spectrum)
    fib_m = fiber.with_(c_r=-fiber.c_r * 800, beta3=-fiber.beta3)
    H_m = nonlinear_transfer(spectrum.mirrored())
    config = NliConfig()
    for f in (-60e9, 10e9):
        a = nli_psd(psd, fiber, H, prof, f, config)
        b = nli_psd(psd.mirrored(), fib_m, H_m, prof.mirrored(), -f, config)
        assert b == pytest.approx(a, rel=1e-6)


def test_closed_form_total_cases(transfer, flat_dual):
    plan = plan_from_arrays([0.0, 1e12], 5e9, 1e-3)
    assert xpm_closed_form_total(plan, flat_dual, 2.0, {1: 3.0}, 0) == pytest.approx(5.0)
    one = plan_from_arrays([0.0], 5e9, 1e-3)
    assert xpm_closed_form_total(one, transfer, 2.0, {}, 0) == pytest.approx(2.0 * scaling_spm(transfer))
    assert xpm_closed_form_total(one, transfer, 2.0, {}, 0, dbp=True) == 0.0
    with pytest.raises(IncompleteInputError):
        xpm_closed_form_total(plan, transfer, 2.0, {}, 0)


@pytest.fixture(scope="module")
def nine_channels(fiber):
    freqs = np.array([-600, -500, -300, -100, 0, 100, 200, 400, 600]) * 1e9
    plan = plan_from_arrays(freqs, 5e9, 1e-3, roll_off=1e-4)
    psd = build_psd(plan, 5e9 / 8)
    return plan, psd, triangular_profile(psd, fiber)


def test_closed_form_close_to_full_integral(nine_channels, fiber, transfer):
    plan, psd, prof = nine_channels
    config = NliConfig(channels=(0, 4, 8))
    full = nli_report(plan, psd, fiber, transfer, prof, config)
    cf = closed_form_report(plan, psd, fiber, transfer, prof, config)
    assert cf.source == "cf" and full.source == "gn"
    diff = 10 * np.log10(cf.column("eta") / full.column("eta"))
    assert np.max(np.abs(diff)) <= 0.1
    assert np.all(full.column("delta_eta_db") < 0)


def test_result_independent_of_worker_count(nine_channels, fiber, transfer, monkeypatch):
    plan, psd, prof = nine_channels
    config = NliConfig(channels=(1, 3, 7))
    monkeypatch.setenv("RAMAN_NLI_THREADS", "1")
    one = nli_report(plan, psd, fiber, transfer, prof, config).column("eta")
    monkeypatch.setenv("RAMAN_NLI_THREADS", "3")
    three = nli_report(plan, psd, fiber, transfer, prof, config).column("eta")
    assert np.array_equal(one, three)


def test_dbp_removes_self_channel(nine_channels, fiber, transfer):
    plan, psd, prof = nine_channels
    plain = nli_report(plan, psd, fiber, transfer, prof, NliConfig(channels=(4,)))
    dbp = nli_report(plan, psd, fiber, transfer, prof, NliConfig(channels=(4,), dbp=True))
    assert dbp.column("eta")[0] < plain.column("eta")[0]
    assert dbp.column("delta_eta_db")[0] < plain.column("delta_eta_db")[0] < 0


def test_resolution_limit(nine_channels):
    plan = nine_channels[0]
    with pytest.raises(InvalidArgumentError):
        NliConfig(resolution=5e9 / 3).checked_resolution(plan)
    assert NliConfig().checked_resolution(plan) == pytest.approx(5e9 / 4)


def test_refit_recovers_parameters():
    H = nonlinear_transfer(RamanSpectrum.analytic())
    df = np.linspace(0, 10e12, 41)
    target = 10 * np.log10(scaling_xpm(H, df))
    start = RamanFitParams(slope=3.5e-27, ripple_amplitude=4.6e-15, ripple_rate=7.0e-13)
    t0 = time.perf_counter()
    fitted = fit_raman_params(df, target, initial=start)
    assert time.perf_counter() - t0 < 30
    H_fit = nonlinear_transfer(RamanSpectrum.analytic(fitted))
    assert np.max(np.abs(10 * np.log10(scaling_xpm(H_fit, df)) - target)) < 5e-3


def test_refit_needs_enough_samples():
    with pytest.raises(InvalidArgumentError):
        fit_raman_params([0.0, 1e12], [0.2, 0.1])
