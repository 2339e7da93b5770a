"""Selection time of the CCH target index and BCCH buckets for |P| = 2^10 .. 2^16.

Prints a CSV: pois, cch_ms, bcch_ms, bcch_bytes. Medians over a few random POI sets.
"""

import argparse
import csv
import sys
import time

import numpy as np

from cchknn.baselines import bcch_select
from cchknn.knn import build_target_index
from cchknn.network import build_network
from cchknn.synth import road_grid


def _median_ms(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return 1e3 * float(np.median(times))


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--rows", type=int, default=130)
    p.add_argument("--cols", type=int, default=130)
    p.add_argument("--min-exp", type=int, default=10)
    p.add_argument("--max-exp", type=int, default=16)
    p.add_argument("--sets", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    net = build_network(*road_grid(args.rows, args.cols, seed=1))
    n = net.num_vertices
    print(f"# {n} vertices, {net.cch.num_edges} upward arcs", file=sys.stderr)
    rng = np.random.default_rng(args.seed)
    build_target_index(np.arange(8), n)
    bcch_select(net.cch, np.arange(8))
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["pois", "cch_ms", "bcch_ms", "bcch_bytes"])
    for e in range(args.min_exp, args.max_exp + 1):
        sets = [rng.choice(n, min(2 ** e, n), replace=False) for _ in range(args.sets)]
        cch_ms = np.median([_median_ms(lambda s=s: build_target_index(s, n), 7) for s in sets])
        bcch_ms = np.median([_median_ms(lambda s=s: bcch_select(net.cch, s), 1) for s in sets])
        nbytes = bcch_select(net.cch, sets[0]).nbytes
        w.writerow([2 ** e, f"{cch_ms:.3f}", f"{bcch_ms:.1f}", nbytes])
        sys.stdout.flush()


if __name__ == "__main__":
    main()
