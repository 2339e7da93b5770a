"""Write a synthetic road network as DIMACS .gr/.co files.

    python scripts/make_synthetic.py --rows 130 --cols 130 --out data/big
"""

import argparse
from pathlib import Path

from cchknn.graph import write_dimacs_co, write_dimacs_gr
from cchknn.synth import road_grid


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--rows", type=int, default=130)
    p.add_argument("--cols", type=int, default=130)
    p.add_argument("--subdivide", type=int, default=3)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True, help="output prefix")
    args = p.parse_args()

    g, c = road_grid(args.rows, args.cols, args.subdivide, seed=args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.with_suffix(".gr").write_text(write_dimacs_gr(g))
    out.with_suffix(".co").write_text(write_dimacs_co(c))
    print(f"{g.num_vertices} vertices, {g.num_edges} arcs")


if __name__ == "__main__":
    main()
