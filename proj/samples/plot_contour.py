"""Plot contour.csv and contour_points.json written by `swapsim contour --format csv`."""
import json
import sys

import matplotlib.pyplot as plt
import numpy as np

out = sys.argv[1] if len(sys.argv) > 1 else "."
raw = np.genfromtxt(f"{out}/contour.csv", delimiter=",")
v = raw[0, 1:]
s = raw[1:, 0]
f = raw[1:, 1:]
fig, ax = plt.subplots(figsize=(5, 4))
cs = ax.contourf(s, v, f.T, levels=20, cmap="viridis")
fig.colorbar(cs, label="fidelity to Psi-")
for p in json.load(open(f"{out}/contour_points.json"))["points"]:
    ax.plot(p["s_norm"], p["V"], "wo")
    ax.annotate(f'{p["label"]} {p["fidelity"]:.2f}', (p["s_norm"], p["V"]), color="w", xytext=(4, 4),
                textcoords="offset points")
ax.set_xlabel("S tau_X / hbar")
ax.set_ylabel("HOM visibility")
fig.tight_layout()
fig.savefig(f"{out}/contour.png", dpi=150)
