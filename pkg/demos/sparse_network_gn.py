"""Real-Raman impact on a sparsely occupied mesh-network spectrum.

Draws a 15-slot plan with occupancy biased towards high frequencies, then
evaluates per-channel NLI with and without the real part of the Raman
response, with and without single-channel back-propagation. The change
Delta eta is negative: the real Raman part reduces nonlinear interference,
and most strongly for an isolated channel at the low-frequency edge.
"""

from raman_nli import FiberSpec, RamanSpectrum, build_psd, nonlinear_transfer, sample_network_occupancy
from raman_nli.gn import NliConfig, nli_report
from raman_nli.profile import triangular_profile


def main() -> None:
    fiber = FiberSpec.from_engineering()
    H = nonlinear_transfer(RamanSpectrum.analytic())
    plan = sample_network_occupancy(15, 10 / 15, seed=1).only_occupied()
    psd = build_psd(plan, plan.symbol_rates[0] / 8)
    profile = triangular_profile(psd, fiber)

    plain = nli_report(plan, psd, fiber, H, profile, NliConfig())
    dbp = nli_report(plan, psd, fiber, H, profile, NliConfig(dbp=True))
    print("channel   frequency    SNR      Delta eta   Delta eta (DBP)")
    for a, b in zip(plain.channels, dbp.channels):
        print(f"{a.index:5d}  {a.frequency / 1e9:+8.2f} GHz  {a.snr_db:6.2f} dB"
              f"  {a.delta_eta_db:+.2e} dB  {b.delta_eta_db:+.2e} dB")
    # over a 75 GHz span the effect is tiny; it grows with the occupied bandwidth


if __name__ == "__main__":
    main()
