#!/usr/bin/env python3
"""
dump_chain.py

Print the saturated state list of a two-class system, the steady-state
probabilities of each state, and every transition with its case label.
With --toml, write the same data as a TOML document instead.
"""

import argparse
import sys

import tomli_w

from msjstab.config import system_params
from msjstab.model import MsjParams, free_servers
from msjstab.saturated import ctmc_steady_state, embedded_steady_state, transition_matrix


def chain_tables(params: MsjParams) -> dict:
    pi = embedded_steady_state(params)
    p, X = ctmc_steady_state(params)
    tm = transition_matrix(params)
    space = tm.space
    return {
        "params": params.as_dict(),
        "throughput": X,
        "states": [
            {"state": list(s), "idle": free_servers(s, params),
             "pi": float(pi.probs[i]), "p": float(p.probs[i])}
            for i, s in enumerate(space)
        ],
        "transitions": [
            {"src": list(space[t.src]), "dst": list(space[t.dst]),
             "case": t.case, "cls": t.cls, "prob": t.prob}
            for t in tm.transitions
        ],
    }


def print_chain(tables: dict) -> None:
    prm = tables["params"]
    print(f"n1={prm['n1']} n2={prm['n2']} n={prm['n']} "
          f"mu1={prm['mu1']} mu2={prm['mu2']} p1={prm['p1']}")
    print(f"throughput X = {tables['throughput']:.12g}")
    print(f"\n{len(tables['states'])} states")
    for row in tables["states"]:
        print(f"  {str(row['state']):<16} idle={row['idle']:<4} "
              f"pi={row['pi']:.6e}  p={row['p']:.6e}")
    print(f"\n{len(tables['transitions'])} transitions")
    for t in tables["transitions"]:
        print(f"  {str(t['src']):<16} -> {str(t['dst']):<16} {t['case']:>4}  "
              f"class {t['cls']}  {t['prob']:.6e}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    ap.add_argument("system", nargs="?", help="catalogue name, e.g. 3-10-30")
    ap.add_argument("--n1", type=int)
    ap.add_argument("--n2", type=int)
    ap.add_argument("--n", type=int)
    ap.add_argument("--mu1", type=float, default=1.0)
    ap.add_argument("--mu2", type=float, default=1.0)
    ap.add_argument("--p1", type=float, default=0.5)
    ap.add_argument("--toml", action="store_true")
    args = ap.parse_args(argv)

    values = {"mu1": args.mu1, "mu2": args.mu2, "p1": args.p1}
    if args.system:
        values.update(system_params(args.system))
    for k in ("n1", "n2", "n"):
        if getattr(args, k) is not None:
            values[k] = getattr(args, k)
    if not all(k in values for k in ("n1", "n2", "n")):
        print("Usage: dump_chain.py [system] [--n1 N1 --n2 N2 --n N] [--mu1 .. --mu2 .. --p1 ..] [--toml]")
        return 1

    tables = chain_tables(MsjParams(**values))
    if args.toml:
        sys.stdout.write(tomli_w.dumps(tables))
    else:
        print_chain(tables)
    return 0


if __name__ == "__main__":
    sys.exit(main())
