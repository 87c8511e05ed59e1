"""Horizons, photon sphere and two orbits for n=4, M=1, Λ=0.03.

Prints the geometry block, then integrates one orbit on the trapped set and
one nudged off it, and writes both as CSV next to this script.
"""
import json
from pathlib import Path

from trapcheck import hamiltonian_flow as hf, report as rp, sds_metric as sm

params = sm.SdsParams(4, 1.0, 0.03)
print(json.dumps(rp.geometry_block(params), indent=2))

out = Path(__file__).with_name("out")
out.mkdir(exist_ok=True)

gamma = hf.integrate(params, rp.gamma_start(params), 20.0, 1e-3)
print(f"trapped orbit: max |r - r_p| = {abs(gamma.r - params.r_photon).max():.2e}, p drift = {gamma.p_drift:.2e}")
rp.dump_trajectory_csv(gamma, out / "gamma.csv")

for delta in (1e-3, -1e-3):
    orbit = hf.integrate(params, rp.perturbed_start(params, delta), 50.0, 1e-3)
    print(f"xi0 = {delta:+g}: exits on the {orbit.exit_side} side at t = {orbit.exit_time:.3f}")
    rp.dump_trajectory_csv(orbit, out / f"perturbed_{'plus' if delta > 0 else 'minus'}.csv")
