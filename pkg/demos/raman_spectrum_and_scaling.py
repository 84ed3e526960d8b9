"""How much does the delayed Raman response change Kerr nonlinearity?

Builds the complex Raman spectrum from the analytic fit, prints the Raman
fraction and time constant, then tabulates the SPM and XPM scaling factors
as the channel separation grows.

Run with ``python demos/raman_spectrum_and_scaling.py``.
"""

import numpy as np

from raman_nli import RamanSpectrum, nonlinear_transfer
from raman_nli.gn import scaling_spm, scaling_xpm
from raman_nli.raman import raman_time_constant


def main() -> None:
    spectrum = RamanSpectrum.analytic()
    H = nonlinear_transfer(spectrum)
    t_r = raman_time_constant(spectrum.params, spectrum.lambda0, spectrum.n2)
    print(f"Raman fraction f_r = {spectrum.fraction:.4f}, time constant T_r = {t_r * 1e15:.3f} fs")
    print(f"H(0) = {complex(H(0.0)).real:.4f} (instantaneous Kerr alone gives {8 / 9:.4f})")

    # a higher n2 only dilutes the same Raman contribution
    high = RamanSpectrum.analytic(n2=2.6e-20)
    print(f"with n2 = 2.6e-20 m^2/W: f_r = {high.fraction:.4f}")

    print(f"\nSPM scaling: {10 * np.log10(scaling_spm(H)):.4f} dB")
    print("separation   XPM scaling")
    for df in np.arange(0.0, 16e12, 2e12):
        print(f"{df / 1e12:6.1f} THz   {10 * np.log10(float(scaling_xpm(H, df))):+.4f} dB")
    # negative values: cross-phase coupling weaker than with an instantaneous Kerr response alone


if __name__ == "__main__":
    main()
