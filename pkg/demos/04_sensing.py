# %% [markdown]
# # Reading a perturbation from the spectrum or from the state
#
# A small error `lam` in one loop amplitude shifts the splitting. Near an EP the
# shift is enhanced, since `d dE / d x` scales like `1 / dE`. A second readout
# propagates the state and differentiates the `+` population across `lam`.

# %%
import math

import numpy as np

from eploom import nh_core, sense
from eploom.loops import PerturbationSpec, param_arrays, preset

# %% [markdown]
# Approaching the EP of preset 2 at `theta = pi` by raising `Gamma0` toward 0.2:
# each decade closer in the splitting gives a decade more susceptibility.

# %%
for gap in (1e-2, 1e-4, 1e-6):
    loop = preset(2, Gamma0=0.2 - gap)
    de = nh_core.splitting(*param_arrays(loop, math.pi))
    print(f"|dE| = {abs(de):.2e}   |chi_Gamma0| = {abs(sense.chi_gamma0(loop, math.pi)):.2e}")

# %% [markdown]
# Each preset is blind to one amplitude: preset 2 holds the coupling fixed and
# preset 3 holds the loss fixed. Those susceptibilities are exact zeros.

# %%
th = np.linspace(0, 2 * math.pi, 9)
print("preset 2, chi_G0:", sense.chi_g0(preset(2), th))
print("preset 3, chi_Gamma0:", sense.chi_gamma0(preset(3), th))

# %% [markdown]
# The splitting landscape over (theta, lam) for a coupling error on preset 3.
# Its largest susceptibility sits where the splitting is smallest.

# %%
land = sense.splitting_landscape(preset(3), "G0", np.linspace(-0.1, 0.1, 21), np.linspace(0, 2 * math.pi, 101))
k = np.unravel_index(np.nanargmax(np.abs(land.chi)), land.chi.shape)
print(f"max |chi| = {abs(land.chi[k]):.3g} at theta/pi = {land.thetas[k[0]] / math.pi:.2f}, lam = {land.lambdas[k[1]]:+.2f}")
print(f"|dE| there = {abs(land.delta_e[k]):.3g}, smallest |dE| on the grid = {np.min(np.abs(land.delta_e)):.3g}")

# %% [markdown]
# State readout at half a cycle for three loop families at the calibrated speed.

# %%
cases = {
    "preset 1, G0 about 0.11": (preset(1), PerturbationSpec("G0", x_ideal=0.11)),
    "preset 2, Gamma0 about 0": (preset(2), PerturbationSpec("Gamma0", x_ideal=0.0)),
    "preset 2, Gamma0 about 0.2": (preset(2), PerturbationSpec("Gamma0", x_ideal=0.2)),
    "preset 3, G0 about -0.2": (preset(3), PerturbationSpec("G0", x_ideal=-0.2)),
}
lams = np.linspace(-0.1, 0.1, 41)
for name, (loop, pert) in cases.items():
    s = sense.eigenstate_susceptibility(loop.with_(omega=0.126), pert, lams)
    peak, at = s.peak(math.pi, window=(-0.05, 0.05))
    print(f"{name:28s} peak |chi| = {peak:7.3f} at lam = {at:+.3f}")
