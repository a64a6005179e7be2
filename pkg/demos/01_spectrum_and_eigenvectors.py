# %% [markdown]
# # Spectrum of the lossy two-level system
#
# The model couples a mode with detuning and loss to a second mode through a
# real coupling `g`. Eigenvalues coalesce where the splitting vanishes, which for
# real parameters means `delta == 0` and `gamma == +-2g`.

# %%
import math

import numpy as np

from eploom import nh_core
from eploom.nh_core import ParamPoint

# %% [markdown]
# A Hermitian point first: no loss, so the splitting is real. The principal
# square root picks the negative value here.

# %%
es = nh_core.eigensystem(ParamPoint(delta=0.0, g=0.1, gamma=0.0))
print("E+ =", es.e_plus, " E- =", es.e_minus, " dE =", es.delta_e)

# %% [markdown]
# Sweep the loss through the EP at `gamma = 2g = 0.2`. Below it the splitting is
# real (both modes share the loss), above it it becomes imaginary.

# %%
gammas = np.linspace(0.0, 0.4, 9)
de = nh_core.splitting(np.zeros_like(gammas), np.full_like(gammas, 0.1), gammas)
for gm, d in zip(gammas, de):
    print(f"gamma={gm:.2f}  dE={d.real:+.4f}{d.imag:+.4f}j  at EP: {abs(d) < 1e-12}")

# %% [markdown]
# Left covectors are normalized against right vectors with the plain bilinear
# product, so `l_m . r_n` is the identity and the outer products resolve 1.

# %%
es = nh_core.eigensystem(ParamPoint(0.12, 0.07, -0.3))
gram = np.array([[es.l_plus @ es.r_plus, es.l_plus @ es.r_minus],
                 [es.l_minus @ es.r_plus, es.l_minus @ es.r_minus]])
print(np.round(gram, 14))
print(np.round(np.outer(es.r_plus, es.l_plus) + np.outer(es.r_minus, es.l_minus), 14))

# %% [markdown]
# Right at an EP the two eigenvectors are parallel and no biorthonormal pair
# exists. The eigensystem says so instead of returning garbage.

# %%
ep = nh_core.eigensystem(ParamPoint(0.0, 0.1, 0.2))
print("coalescent:", ep.at_ep)
try:
    ep.require_biorthonormal()
except Exception as exc:
    print(type(exc).__name__, "-", exc)

# %% [markdown]
# Real EPs at fixed coupling: two of them, mirrored in the loss.

# %%
from eploom import topo

print(topo.ep_locations(0.05))
