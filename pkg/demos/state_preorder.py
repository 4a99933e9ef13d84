"""Conversion graph of a handful of qubit states under DIO.

Prints each pairwise verdict, checks l1 coherence along the Feasible edges,
and emits the graph as Graphviz DOT (to stdout, or to the path given as the
first argument).

``partly-plus -> plus`` comes out Undecided. No free channel can raise the
off-diagonal weight, but that argument is not one of the two obstructions
the solver is allowed to certify with, so it does not claim a proof.
"""
import sys

import numpy as np

from coherence_wb import AtomicSystem, FreeSetSpec, Resource, SolverConfig, SystemLabel
from coherence_wb import build_preorder, evaluate_monotone
from coherence_wb import decoherence as dc
from coherence_wb.convertibility import L1_COHERENCE

q = SystemLabel.of(AtomicSystem("q", 2))
dio = FreeSetSpec("DIO", dc.DecoherenceFamily.product([dc.computational_dephasing(q)]))


def bloch(x, z):
    return 0.5 * np.array([[1 + z, x], [x, 1 - z]], dtype=complex)


states = [
    Resource.state(bloch(1.0, 0.0), q, "plus"),
    Resource.state(bloch(0.6, 0.0), q, "partly-plus"),
    Resource.state(bloch(0.0, 1.0), q, "zero"),
    Resource.state(bloch(0.0, 0.0), q, "mixed"),
]
graph = build_preorder(states, dio, SolverConfig(max_iter=2000, seed=0))

names = graph.nodes
for (i, j), res in sorted(graph.edges.items()):
    if i != j:
        print(f"{names[i]:>12} -> {names[j]:<12} {res.status}")

rep = evaluate_monotone(L1_COHERENCE, graph)
print(f"\nl1 coherence checked on {rep.checked} edges, {len(rep.violations)} violations")
dot = graph.to_dot(rep.values)
if len(sys.argv) > 1:
    with open(sys.argv[1], "w") as fh:
        fh.write(dot)
else:
    print(dot)
