"""Combined testing/quarantine effects as endpoint matrices.

Sweeps symptomatic testing probability against quarantine length on a
small city and writes one matrix CSV per aggregated endpoint (cumulative
infections, deaths, max hospitalized, max hourly infections).

Run:  python demos/04_intervention_sweep.py
"""

from pathlib import Path

from tripsim.analysis import aggregate, sweep, write_outcomes_csv
from tripsim.engine import simulate
from tripsim.interventions import QuarantinePolicy
from tripsim.scenario_io import SynthSpec, build_synthetic_world, default_parameters

OUT = Path(__file__).parent / "output" / "sweep"


def cell(p_symptomatic: float, quarantine_days: float, run_idx: int, seed: int):
    params = default_parameters()
    params.testing.p_symptomatic = p_symptomatic
    params.quarantine = QuarantinePolicy(length_days=quarantine_days, efficiency=0.5)
    world = build_synthetic_world(SynthSpec(n_agents=3000), scenario_seed=42,
                                  run_key=seed, params=params, initial_infections=15)
    return aggregate(simulate(world, days=30))


if __name__ == "__main__":
    p_s_grid = [0.01, 0.03, 0.06]
    q_d_grid = [2.0, 10.0]
    matrices = sweep(cell, p_s_grid, q_d_grid, runs=3, master_seed=9, workers=2)
    write_outcomes_csv(OUT, matrices, "p_symptomatic", "quarantine_length")
    print("cumulative infections (rows q_d, cols p_s):")
    print(matrices["cumulative_infections"].round(0))
    print("matrices in", OUT, "- render with:")
    print(f"  epiplot heatmap --matrix {OUT}/cumulative_infections.csv --out {OUT}/sweep.png")
