"""
Example: run the full-size ensemble experiments and write their CSV tables

Takes hours; pass a smaller worker count on shared machines.
"""

import logging
import os
import sys

from moqa.ensemble import bin_by_ratio, full_reproduction_configs, sweep_sizes, write_bins_csv, write_rows_csv

log = logging.getLogger("moqa")


def run(master_seed=0, workers=None):
    workers = workers or os.cpu_count() or 1
    (stats_label, stats, sizes), (bins_label, bins, _) = full_reproduction_configs(master_seed)

    log.info("%s: n=%s, %d instances each", stats_label, sizes, stats.num_instances)
    rows = sweep_sizes(stats, sizes, workers)
    with open(stats_label + ".csv", "w") as f:
        write_rows_csv(rows, f)

    log.info("%s: n=%d, %d instances", bins_label, bins.n, bins.num_instances)
    bin_rows = bin_by_ratio(bins, workers)
    with open(bins_label + ".csv", "w") as f:
        write_bins_csv(bin_rows, f)


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(name)s - %(levelname)s - %(message)s")
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
    run(seed)
