"""Parameter sweep over the normalisation margin tau or the number of training subjects.

    python scripts/sweep.py --config configs/tau_sweep.cfg
    python scripts/sweep.py --config configs/subjects_sweep.cfg --workers 2
"""

import argparse
import logging
from pathlib import Path

import numpy as np

from rfdose.config import load_config
from rfdose.pipeline import sweep

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "tau_sweep.cfg"))
    ap.add_argument("--out")
    ap.add_argument("--workers", type=int)
    ap.add_argument("--plots", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = load_config(args.config, out_dir=args.out, workers=args.workers)
    reports = sweep(cfg)
    print(f"{'value':>8} {'max sigma':>10} {'max eps':>10} {'max rho':>10} {'mean abs err (sigma)':>22}")
    for v, rep in zip(cfg.sweep_values, reports):
        mx = rep["estimate_max_normalized"]
        err = np.mean([e["sigma"] for e in rep["property_errors"].values()])
        print(f"{v:8g} {mx['sigma']:10.4f} {mx['epsilon']:10.4f} {mx['rho']:10.4f} {err:22.4f}")
    if args.plots:
        from rfdose.plots import plot_csv

        for p in plot_csv(Path(cfg.out_dir) / "sweep.csv", Path(cfg.out_dir) / "figures"):
            print("figure", p)


if __name__ == "__main__":
    main()
