# %% [markdown]
# # Where does a loop wind around an EP?
#
# For each cell of a parameter plane we build the loop with those two amplitudes
# and count how many times the energy splitting turns around zero. A single
# encirclement gives a half-integer. Cells whose loop runs through an EP are
# flagged rather than forced into a number.

# %%
import numpy as np

from eploom import sweep, topo
from eploom.loops import preset

# %% [markdown]
# Preset 3 over the (Delta0, G0) plane on a coarse grid. The band
# `0.15 < |G0| < 0.25` encloses one EP; wider loops enclose both EPs with
# opposite orientation and the windings cancel. The column `Delta0 = 0` squashes
# the loop onto a segment through the EP.

# %%
grid = sweep.GridSpec("Delta0", "G0", nx=9, ny=21)
m = sweep.winding_map(preset(3), grid)
symbols = {0.5: "+", -0.5: "-", 0.0: "."}
print("G0 \\ Delta0", " ".join(f"{x:+.1f}" for x in grid.xs))
for j in reversed(range(grid.ny)):
    cells = [("?" if m.flags[i, j] != sweep.OK else symbols[m.values[i, j]]) for i in range(grid.nx)]
    print(f"{grid.ys[j]:+.2f}       ", "    ".join(cells))

# %% [markdown]
# The integer winding of the radicand, counted by ray crossings with no phase
# arithmetic at all, agrees with the splitting winding (up to the factor -1/2).

# %%
for G0 in (0.1, 0.2, 0.3):
    loop = preset(3, G0=G0)
    print(G0, topo.winding_number(loop).nu_quantized, topo.encircles_ep(loop).nu)

# %% [markdown]
# Preset 1 has a real radicand everywhere on the default plane, so every loop
# either misses the EPs or runs straight through them: the map is 0 throughout.

# %%
m1 = sweep.winding_map(preset(1), sweep.GridSpec("G0", "Gamma0", nx=11, ny=11))
print("all zero:", bool(np.all(m1.values == 0)), " grazing cells:", int(np.sum(m1.flags == sweep.GRAZING)))

# %% [markdown]
# Fidelity and winding side by side. A nonzero winding is needed for the state to
# come back swapped, but it does not guarantee it.

# %%
t = preset(3, omega=0.126)
g = sweep.GridSpec("Delta0", "G0", nx=11, ny=11)
corr = sweep.correlate(sweep.fidelity_map(t, g), sweep.winding_map(t, g))
print(corr.to_dict())
