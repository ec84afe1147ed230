"""
Four-site SSH chain: dephasing after a superposition or a pulse
===============================================================

Runs shortened versions of the three chain experiments and writes their
time series as CSV next to this script. Pass ``--full`` for the default
100 trajectories and full durations (a few minutes on one core).
"""

import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from fermidecoh.cli import CSV_COLUMNS, format_csv, time_series
from fermidecoh.ssh.experiment import homo_lumo_gap, prepare, preset, run_ensemble

full = "--full" in sys.argv
out = Path(__file__).with_suffix("")
out.mkdir(exist_ok=True)
col = {name: i for i, name in enumerate(CSV_COLUMNS)}

setup = prepare(preset("fig1a"))
print("dimerized geometry u* (A):", np.round(setup.u_star, 4))
print("orbital energies (eV):", np.round(setup.orbital_energies, 3))
print(f"HOMO-LUMO gap {homo_lumo_gap(preset('fig1a').params):.3f} eV")

for kind in ("fig1a", "fig1b", "fig2"):
    exp = preset(kind)
    if not full:
        exp = replace(exp, run=replace(exp.run, n_traj=20, t_final=min(exp.run.t_final, 200.0)))
    rows = time_series(run_ensemble(exp))
    (out / f"{kind}.csv").write_text(format_csv(rows))

    t = rows[:, col["t_fs"]]
    print(f"\n{kind}: {exp.run.n_traj} trajectories, {t[-1]:.0f} fs")
    for k in np.linspace(0, len(t) - 1, 9).astype(int):
        r = rows[k]
        print(f"  t = {r[0]:6.1f}  P = {r[col['P']]:.3f}  dP1 energy = {r[col['dP1_energy']]:.3f}"
              f"  dP2 energy = {r[col['dP2_energy']]:.3f}  dP1 site = {r[col['dP1_site']]:.3f}")
