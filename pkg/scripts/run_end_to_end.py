"""Run both pipelines on the synthetic head and summarise the SAR comparison.

    python scripts/run_end_to_end.py [--config configs/end_to_end.cfg] [--out DIR] [--plots]
"""

import argparse
import json
import logging
import time
from pathlib import Path

from rfdose.config import RunConfig, load_config
from rfdose.pipeline import run_pipeline

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "end_to_end.cfg"))
    ap.add_argument("--out")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--plots", action="store_true", help="render PNGs from the CSV outputs")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg: RunConfig = load_config(args.config, out_dir=args.out, seed=args.seed)
    t0 = time.perf_counter()
    report = run_pipeline(cfg)
    elapsed = time.perf_counter() - t0

    m = report["metrics"]
    print(json.dumps(report["property_errors"], indent=2))
    print(f"E (mean |dSAR|)   : {m['E']:.5f} W/kg")
    print(f"psSAR standard    : {m['psSAR_std']:.4f} W/kg at {m['psSAR_location_std']}")
    print(f"psSAR learned     : {m['psSAR_learned']:.4f} W/kg at {m['psSAR_location_learned']}")
    print(f"E_max             : {100 * m['E_max']:.2f}%  (threshold {100 * cfg.max_pssar_error:.0f}%)")
    print(f"wall time         : {elapsed / 60:.1f} min -> {cfg.out_dir}")

    if args.plots:
        from rfdose.plots import plot_csv

        out = Path(cfg.out_dir)
        for csv in [out / "tissue_stats.csv", out / "probe_std.csv", *sorted((out / "training").glob("*.csv"))]:
            for p in plot_csv(csv, out / "figures"):
                print("figure", p)


if __name__ == "__main__":
    main()
