"""End-to-end acceptance checks.

Each test appends one ``PASS``/``FAIL`` line to ``acceptance_log.RESULTS``;
the lines are printed in the terminal summary.
"""

import time

import numpy as np
import pytest

from acceptance_log import RESULTS
from oracles import brute_force_gn
from raman_nli import ChannelPlan, RamanFitParams, RamanSpectrum, build_psd, nonlinear_transfer
from raman_nli.fiber import Channel, plan_from_arrays, sample_network_occupancy
from raman_nli.gn import NliConfig, nli_psd, nli_report, scaling_spm, scaling_xpm
from raman_nli.profile import TwoToneState, raman_ode_profile, triangular_profile, two_tone_field_ode, uniform_loss_profile
from raman_nli.raman import analytic_gain_spectrum, analytic_real_spectrum, hilbert_real_from_gain, raman_time_constant
from raman_nli.raman import default_grid, instantaneous_spectrum
from raman_nli.ssfm import DualPolField, SsfmConfig, channel_powers, measure_delta_eta, propagate_gme, run_ssfm
from raman_nli.ssfm import tx_generate


def _record(name: str, ok: bool, detail: str) -> None:
    RESULTS.append(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    assert ok, detail


def test_closed_form_scaling():
    t0 = time.perf_counter()
    H = nonlinear_transfer(RamanSpectrum.analytic())
    at0 = 10 * np.log10(float(scaling_xpm(H, 0.0)))
    drop = at0 - 10 * np.log10(float(scaling_xpm(H, 6e12)))
    elapsed = time.perf_counter() - t0
    ok = abs(at0 - 0.2456) <= 0.005 and abs(drop - 0.32) <= 0.05 and elapsed < 1
    _record("closed-form scaling", ok, f"R_XPM(0) = {at0:.4f} dB, drop to 6 THz = {drop:.4f} dB, {elapsed:.3f} s")


def test_physical_constants():
    t0 = time.perf_counter()
    P = RamanFitParams()
    f_ref = RamanSpectrum.analytic(n2=2.1e-20).fraction
    f_high = RamanSpectrum.analytic(n2=2.6e-20).fraction
    t_ref = raman_time_constant(P, 1550e-9, 2.1e-20) * 1e15
    t_high = raman_time_constant(P, 1550e-9, 2.6e-20) * 1e15
    elapsed = time.perf_counter() - t0
    checks = {
        "f_r(2.1e-20)": abs(f_ref - 0.23) <= 0.005,
        "f_r(2.6e-20)": abs(f_high - 0.18) <= 0.005,
        "T_r(2.1e-20)": abs(t_ref - 3.6) <= 0.1,
        "T_r(2.6e-20)": abs(t_high - 2.94) <= 0.1,
        "runtime": elapsed < 1,
    }
    failed = [k for k, v in checks.items() if not v]
    detail = (f"f_r = {f_ref:.4f} / {f_high:.4f}, T_r = {t_ref:.3f} / {t_high:.3f} fs, {elapsed:.3f} s"
              + (f"; out of tolerance: {', '.join(failed)}" if failed else ""))
    _record("physical constants", not failed, detail)


def test_kramers_kronig_consistency():
    t0 = time.perf_counter()
    P = RamanFitParams()
    f = default_grid(40e12, 10e9)
    real = hilbert_real_from_gain(f, analytic_gain_spectrum(P, f))
    ref = analytic_real_spectrum(P, f) - P.offset
    inner = np.abs(f) <= 10e12
    rel = np.max(np.abs(real[inner] - ref[inner])) / np.max(np.abs(ref[inner]))
    elapsed = time.perf_counter() - t0
    _record("Kramers-Kronig consistency", rel < 2e-2 and elapsed < 10,
            f"max relative deviation {rel:.2e} on |f| <= 10 THz, {elapsed:.2f} s")


def test_oracle_equivalence(fiber):
    t0 = time.perf_counter()
    fib = fiber.with_(c_r=0.0)
    H = nonlinear_transfer(instantaneous_spectrum())
    prof = uniform_loss_profile(fib)
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(5):
        rate = rng.uniform(5e9, 64e9)
        power = 10 ** (rng.uniform(-5, 5) / 10) * 1e-3
        plan = ChannelPlan.uniform_grid(1, rate * 1.25, rate, power)
        psd = build_psd(plan, rate / 8)
        lo, hi, height = psd.blocks[0]
        f = rng.uniform(lo, hi) * 0.9
        got = nli_psd(psd, fib, H, prof, f, NliConfig(rel_tol=1e-5))
        ref = brute_force_gn(fib.alpha, fib.beta2, fib.beta3, fib.gamma, fib.length, lo, hi, height, f, 4096)
        worst = max(worst, abs(got / ref - 1))
    elapsed = time.perf_counter() - t0
    _record("oracle equivalence", worst <= 1e-2 and elapsed < 300,
            f"worst relative deviation {worst:.2e} over 5 cases, {elapsed:.1f} s")


def _two_tone_transfer(spectrum, fiber, power: float, seed: int) -> float:
    # two CW tones on exact FFT bins, dispersion off
    fib = fiber.with_(beta2=0.0, beta3=0.0)
    H = nonlinear_transfer(spectrum)
    rng = np.random.default_rng(seed)
    n, fs, a = 64, 40e12, 8
    df = fs / n

    def pol():
        v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        return np.sqrt(power) * v / np.linalg.norm(v)

    e0, ek = pol(), pol()
    t = np.arange(n) / fs
    lo, hi = np.exp(-2j * np.pi * a * df * t), np.exp(2j * np.pi * a * df * t)
    field = DualPolField(e0[0] * lo + ek[0] * hi, e0[1] * lo + ek[1] * hi, fs)
    out = propagate_gme(field, fib, H.gain_only(), SsfmConfig(steps=2000))
    sx, sy = out.spectra()
    p_low = (abs(sx[-a]) ** 2 + abs(sy[-a]) ** 2) / n**2
    ref = two_tone_field_ode(TwoToneState(e0[0], e0[1], ek[0], ek[1], 2 * a * df), spectrum, fib)
    return abs(10 * np.log10(p_low / ref.powers[0]))


def test_isrs_cross_validation(fiber, spectrum):
    t0 = time.perf_counter()
    tone_err = max(_two_tone_transfer(spectrum, fiber, 5e-3, seed) for seed in (3, 4))

    plan = ChannelPlan(tuple(Channel(f * 1e12, 25e9, 15e-3, 0.01) for f in (-5, -3, -1, 1, 3, 5)))
    config = SsfmConfig(steps=500, n_symbols=512, precision="single")
    tx = tx_generate(plan, 0, config.n_symbols, precision="single")
    out = propagate_gme(tx, fiber, nonlinear_transfer(spectrum), config)
    sim = 10 * np.log10(channel_powers(out, plan, 2.0) / channel_powers(tx, plan, 2.0))
    prof = raman_ode_profile(build_psd(plan, 25e9 / 8), spectrum, fiber)
    model = 10 * np.log10(prof.at(fiber.length, plan.frequencies)[0])
    band_err = float(np.max(np.abs(sim - model)))
    elapsed = time.perf_counter() - t0
    ok = tone_err <= 0.01 and band_err <= 0.05 and elapsed < 600
    _record("ISRS cross-validation", ok,
            f"two-tone {tone_err:.4f} dB, broadband {band_err:.4f} dB, {elapsed:.0f} s")


@pytest.mark.slow
def test_desk_scale_delta_eta(fiber, transfer):
    t0 = time.perf_counter()
    plan = sample_network_occupancy(15, 10 / 15, 1).only_occupied()
    config = SsfmConfig(steps=10_000, n_symbols=2**13, realizations=2, seed=0)
    sim = measure_delta_eta(plan, fiber, transfer, config, dbp_modes=(False, True)).delta_eta_db
    psd = build_psd(plan, plan.symbol_rates[0] / 8)
    prof = triangular_profile(psd, fiber)
    model = {dbp: nli_report(plan, psd, fiber, transfer, prof, NliConfig(dbp=dbp)).column("delta_eta_db")
             for dbp in (False, True)}
    elapsed = time.perf_counter() - t0
    low_edge = int(np.argmin(plan.frequencies))
    checks = {}
    for name, d in (("model", model), ("simulation", sim)):
        checks[f"{name} sign"] = all(np.all(d[b] <= 0) for b in (False, True))
        checks[f"{name} low edge largest"] = all(int(np.argmax(np.abs(d[b]))) == low_edge for b in (False, True))
        checks[f"{name} larger with DBP"] = bool(np.all(np.abs(d[True]) > np.abs(d[False])))
    dev = max(float(np.max(np.abs(model[b] - sim[b]))) for b in (False, True))
    checks["model vs simulation"] = dev <= 0.05
    checks["runtime"] = elapsed <= 7200
    failed = [k for k, v in checks.items() if not v]
    detail = (f"max |model - simulation| = {dev:.2e} dB, low-edge model/sim "
              f"{model[False][low_edge]:.2e}/{sim[False][low_edge]:.2e} dB, {elapsed:.0f} s"
              + (f"; failed: {', '.join(failed)}" if failed else ""))
    _record("desk-scale real-Raman impact", not failed, detail)


def test_property_suites(fiber, transfer, transfer_single, spectrum):
    checks = {}
    # cubic power scaling of the NLI PSD
    fib = fiber.with_(c_r=0.0)
    plan = ChannelPlan.uniform_grid(1, 50e9, 40e9, 1e-3)
    prof = uniform_loss_profile(fib)
    base = nli_psd(build_psd(plan, 5e9), fib, transfer, prof, 5e9)
    checks["cubic scaling"] = all(
        abs(nli_psd(build_psd(plan.scaled_power(x), 5e9), fib, transfer, prof, 5e9) / (x**3 * base) - 1) <= 1e-9
        for x in (0.1, 3.0, 20.0))
    # energy conservation without loss or delayed response
    three = plan_from_arrays([-10e9, 0.0, 15e9], 5e9, 2e-3, roll_off=0.01)
    tx = tx_generate(three, 2, 256)
    out = propagate_gme(tx, fiber.with_(alpha=0.0), nonlinear_transfer(instantaneous_spectrum()),
                        SsfmConfig(steps=200))
    checks["energy conservation"] = abs(out.power / tx.power - 1) <= 1e-9
    # spectrum symmetries on the grid
    g, n = spectrum.gain_table, spectrum.real_table
    h = transfer(spectrum.freq)
    checks["spectrum symmetry"] = bool(np.all(g == -g[::-1]) and np.all(n == n[::-1]) and np.all(h[::-1] == np.conj(h)))
    # seeded determinism
    config = SsfmConfig(steps=100, n_symbols=256, seed=4)
    a = run_ssfm(three, fiber, [transfer], config)[0][0]
    b = run_ssfm(three, fiber, [transfer], config)[0][0]
    checks["determinism"] = bool(np.array_equal(a.snr, b.snr))
    # small-separation limit and single-polarization normalization
    checks["R_XPM -> R_SPM"] = all(abs(float(scaling_xpm(H, 1.0)) / scaling_spm(H) - 1) <= 1e-9
                                   for H in (transfer, transfer_single))
    flat = nonlinear_transfer(instantaneous_spectrum(), "single")
    checks["single-pol unity"] = bool(np.all(scaling_xpm(flat, np.linspace(0, 20e12, 41)) == 1.0))
    failed = [k for k, v in checks.items() if not v]
    _record("property suites", not failed,
            f"{len(checks) - len(failed)}/{len(checks)} hold" + (f"; failed: {', '.join(failed)}" if failed else ""))
