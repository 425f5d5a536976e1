"""Viral load and shed curves, and the stochastic symptomatic course.

Walks through the within-host building blocks: the piecewise-linear log
viral load, the logistic shed link for a family of personal shed factors,
and a histogram of drawn course outcomes per age group.

Run:  python demos/01_viral_dynamics.py   (writes demos/output/*.png)
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from tripsim import ViralCurve, draw_infection, rng, viral_load, viral_shed
from tripsim.infection import InfectionState
from tripsim.scenario_io import default_parameters

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

# A single infection's log viral load rises linearly to its peak and then
# declines until clearance; shed follows through a logistic link.
curve = ViralCurve(t_transmission=0.0, incline=2.0, peak=8.1, decline=-0.17,
                   shed_factor=0.1)
t = np.linspace(-1, 60, 600)

fig, (ax_load, ax_shed) = plt.subplots(1, 2, figsize=(11, 4))
ax_load.plot(t, viral_load(curve, t), color="k")
ax_load.set(title="log viral load", xlabel="days since transmission")

# The personal shed factor varies strongly between individuals; the curve
# family below spans the plausible range.
for s_f in np.linspace(0.01, 0.28, 8):
    c = ViralCurve(t_transmission=0.0, incline=2.0, peak=8.1, decline=-0.17,
                   shed_factor=float(s_f))
    ax_shed.plot(t, viral_shed(c, t), label=f"s_f={s_f:.2f}")
ax_shed.set(title="viral shed for varying personal factors", xlabel="days")
ax_shed.legend(fontsize=7)
fig.tight_layout()
fig.savefig(OUT / "viral_curves.png", dpi=130)
print("wrote", OUT / "viral_curves.png")

# Courses are drawn once per infection; outcomes depend strongly on age.
params = default_parameters()
terminal_dead = []
for age in range(6):
    dead = sum(
        draw_infection(rng.Stream(1, 10_000 * age + i), age, 0.0,
                       params.course, params.viral).course.terminal is InfectionState.DEAD
        for i in range(4000)
    )
    terminal_dead.append(dead / 4000)

fig, ax = plt.subplots(figsize=(6, 3.5))
ax.bar(range(6), terminal_dead, color="#8a3333")
ax.set_xticks(range(6), ["0-4", "5-14", "15-34", "35-59", "60-79", "80+"])
ax.set(title="fatal course fraction by age group", ylabel="P(death | infection)")
fig.tight_layout()
fig.savefig(OUT / "course_outcomes.png", dpi=130)
print("wrote", OUT / "course_outcomes.png")
