"""Turn-on dynamics: how fast does feedback drag the qubit to its target?

Starting from thermal equilibrium (ground state) with all controls off,
the feedback is switched on at t = 0.  Toward the excited state the mean
<sigma_z> rises exponentially at roughly four relaxation rates; toward the
equator the rise is slower (~1.5 gamma1) and the coherence <sigma_y>
overshoots -- a transient bump before settling.  Exponential fits quantify
both rates.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from qfbsim import EQUATOR, EXCITED, SimSettings, measured_params, transient

params = measured_params()
g1 = params.gamma1
sim = SimSettings(n=1500, duration=30e-6, dt=4e-9, seed=3, workers=2)

fig, axes = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
for ax, target, label in ((axes[0], EXCITED, "target |e>"),
                          (axes[1], EQUATOR, "target equator (+y)")):
    table, fits = transient(params, sim, target=target)
    t_us = table.col("t") * 1e6
    for comp, marker in (("x", "-"), ("y", "-"), ("z", "-")):
        ax.plot(t_us, table.col(f"mean_{comp}"), marker, lw=1,
                label=rf"$\langle\sigma_{comp}\rangle$")
    for comp, fit in fits.items():
        print(f"{label}: sigma_{comp} rate = {fit.rate / g1:.2f} gamma1 "
              f"(asymptote {fit.asymptote:+.3f})")
    ax.set_title(label)
    ax.set_ylabel("ensemble mean")
    ax.legend(fontsize=8, loc="lower right")
axes[1].set_xlabel("feedback duration (us)")
fig.tight_layout()
out = "demos/output/04_transients.png"
fig.savefig(out, dpi=120)
print(f"figure saved to {out}")
