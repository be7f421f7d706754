"""Solver validation: free-space dipole impedance and power balance, lossy attenuation, CPML reflection."""

import argparse
import time

from rfdose.fdtd.grid import GridConfig
from rfdose.fdtd.validation import cpml_reflection_db, free_space_dipole, lossy_plane_wave
from rfdose.tissues import default_table, lookup_properties


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--probe-offsets", default="8,10,13", help="CPML probe offsets from the centre (cells)")
    args = ap.parse_args()

    t = time.perf_counter()
    d = free_space_dipole()
    print(f"dipole 3 GHz, 1 mm cells: Z = {d.impedance:.2f} ohm, P_acc = {d.accepted_power:.4e} W, "
          f"P_rad/P_acc = {d.poynting_power / d.accepted_power:.4f}, {d.steps} steps, "
          f"{time.perf_counter() - t:.1f} s")

    for tid in (7, 9, 11):
        sigma, eps_r, _ = lookup_properties(tid, 3.0)
        name = default_table()[tid].name
        t = time.perf_counter()
        r = lossy_plane_wave(sigma, eps_r, 3e9)
        print(f"lossy {name:12s} 3 GHz: alpha = {r.alpha_fit:.3f} Np/m, skin depth {1e3 * r.skin_depth:.2f} mm, "
              f"{r.periods} periods, {time.perf_counter() - t:.1f} s")

    for off in (int(v) for v in args.probe_offsets.split(",")):
        for cfg in (GridConfig(), GridConfig(sigma_factor=1.5)):
            db = cpml_reflection_db(probe_offset=off, config=cfg)
            print(f"CPML probe offset {off:2d}, sigma factor {cfg.sigma_factor}: {db:.1f} dB")


if __name__ == "__main__":
    main()
