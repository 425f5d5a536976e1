"""Instantaneous reproduction number over an outbreak.

The estimator divides the window's incidence by the summed share of each
infectious agent's lifetime shed falling inside the window, so a value of
1 marks the boundary between growth and decline.

Run:  python demos/05_rt_estimation.py
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from tripsim import SynthSpec, build_synthetic_world
from tripsim.analysis import rt_series
from tripsim.engine import simulate

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

world = build_synthetic_world(SynthSpec(n_agents=5000), scenario_seed=42,
                              run_key=3, initial_infections=25)
result = simulate(world, days=45)
times, values = rt_series(world, t_end=45.0)

t, hourly = result.as_arrays("infections_hourly")
daily = np.add.reduceat(hourly, np.arange(0, len(hourly), 24))

fig, (ax_inc, ax_rt) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
ax_inc.bar(np.arange(len(daily)), daily, color="#777")
ax_inc.set(ylabel="daily new infections")
ax_rt.plot(times, values, color="tab:blue")
ax_rt.axhline(1.0, color="k", linestyle=":")
ax_rt.set(xlabel="day", ylabel="estimated R_t")
fig.tight_layout()
fig.savefig(OUT / "rt_series.png", dpi=130)

valid = ~np.isnan(values)
print(f"R_t over days 5-15: {np.nanmean(values[(times >= 5) & (times <= 15)]):.2f}")
print(f"R_t over last 10 days: {np.nanmean(values[times >= 35]):.2f} "
      "(tail values can be unstable at low prevalence)")
print("wrote", OUT / "rt_series.png")
