"""Mean per-trip time of CRAD and DRAD over a range of lambda values.

Prints a CSV: lambda, algorithm, trips, per_trip_us, mean_trip_length.
"""

import argparse
import csv
import sys
import time

from cchknn import cch
from cchknn.demand import DemandModel, generate_demand, make_rng
from cchknn.network import build_network
from cchknn.synth import road_grid


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--rows", type=int, default=130)
    p.add_argument("--cols", type=int, default=130)
    p.add_argument("--lambdas", default="0.99,0.999,0.9999,0.99995,0.99999")
    p.add_argument("--crad-trips", type=int, default=2000)
    p.add_argument("--drad-trips", type=int, default=400)
    p.add_argument("--mean-population", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    cch.set_debug(False)
    net = build_network(*road_grid(args.rows, args.cols, seed=1))
    pop = make_rng(args.seed).poisson(args.mean_population, net.num_vertices)
    trips = {"crad": args.crad_trips, "drad": args.drad_trips}
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["lambda", "algorithm", "trips", "per_trip_us", "mean_trip_length"])
    for lam in (float(x) for x in args.lambdas.split(",")):
        model = DemandModel(pop, lam)
        for alg, count in trips.items():
            generate_demand(model, net, alg, 3, make_rng(args.seed))
            t0 = time.perf_counter()
            d = generate_demand(model, net, alg, count, make_rng(args.seed + 1))
            us = (time.perf_counter() - t0) * 1e6 / count
            w.writerow([lam, alg, count, f"{us:.1f}", f"{d.distances.mean():.1f}"])
            sys.stdout.flush()


if __name__ == "__main__":
    main()
