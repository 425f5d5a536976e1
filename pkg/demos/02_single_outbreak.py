"""One outbreak in a synthetic city, inspected through the built-in loggers.

Builds a 5,000-agent city (households, schools, workplaces, shops, event
venues, weekly trip chains), seeds a handful of infections and runs 45
days. Prints a compact daily table and saves the state curves.

Run:  python demos/02_single_outbreak.py
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from tripsim import SynthSpec, build_synthetic_world
from tripsim.engine import simulate
from tripsim.infection import InfectionState

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

world = build_synthetic_world(SynthSpec(n_agents=5000), scenario_seed=42,
                              run_key=7, initial_infections=25)
result = simulate(world, days=45, out_dir=OUT / "single_run")

# state counts arrive in long format: (hour, count, state name)
rows = result.series["state_counts"]
hours = sorted({t for t, _v, _s in rows})
by_state = {s.name: np.array([v for t, v, name in rows if name == s.name])
            for s in InfectionState}
days = np.array(hours) / 24.0

print("day  susceptible  infectious  recovered  dead  detected")
detected = result.daily("detected_cum")
for d in range(0, 45, 5):
    i = d * 24
    infectious = sum(by_state[s][i] for s in ("NO_SYMPTOMS", "MILD", "SEVERE", "CRITICAL"))
    print(f"{d:3d} {by_state['SUSCEPTIBLE'][i]:12d} {infectious:11d} "
          f"{by_state['RECOVERED'][i]:10d} {by_state['DEAD'][i]:5d} {int(detected[d]):9d}")

fig, ax = plt.subplots(figsize=(8, 4.5))
for name, color in (("SUSCEPTIBLE", "tab:blue"), ("NO_SYMPTOMS", "tab:orange"),
                    ("MILD", "tab:red"), ("RECOVERED", "tab:green")):
    ax.plot(days, by_state[name], label=name.lower(), color=color)
ax.set(xlabel="day", ylabel="agents", title="single-run infection states")
ax.legend()
fig.tight_layout()
fig.savefig(OUT / "single_outbreak.png", dpi=130)
print("wrote", OUT / "single_outbreak.png", "and CSV logs in", OUT / "single_run")
