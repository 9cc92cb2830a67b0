"""Print maximal schedule statistics for the standard topologies and export edge lists.

Usage: python scripts/topology_report.py [--out topologies]
"""

import argparse
from pathlib import Path

from ucsma.graph import max_uniform_throughput
from ucsma.runner import TopologySpec, export_topology


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--out", default=None)
    args = p.parse_args()
    specs = [TopologySpec("torus", 9), TopologySpec("torus", 19), TopologySpec("torus", 39),
             TopologySpec("lattice", 99), TopologySpec("rgg", None, 100),
             TopologySpec("rgg", None, 400)]
    for spec in specs:
        g = spec.build()
        st = max_uniform_throughput(g)
        print(f"{spec.kind:8s} L={g.L:5d} avg_degree={st.avg_degree:.3f} "
              f"mu_max={st.mu_max:.4f} r_L={st.r_L:.4f} ({st.flag})")
        if args.out:
            export_topology(g, Path(args.out) / f"{spec.kind}_{g.L}")


if __name__ == "__main__":
    main()
