"""Single-qubit tour: which channels survive computational-basis dephasing?

Run with ``python3 demos/qubit_dio_tour.py``.
"""
import numpy as np

from coherence_wb import FreeSetSpec, SystemLabel, AtomicSystem, is_dio, is_mio, separation_search
from coherence_wb import decoherence as dc
from coherence_wb import process as pr

q = SystemLabel.of(AtomicSystem("q", 2))
fam = dc.DecoherenceFamily.product([dc.computational_dephasing(q)])

X = np.array([[0, 1], [1, 0]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S = np.diag([1, 1j])

channels = {
    "identity": pr.identity(q),
    "bit flip": pr.unitary_channel(X, q),
    "phase gate": pr.unitary_channel(S, q),
    "hadamard": pr.unitary_channel(H, q),
    "dephasing": dc.computational_dephasing(q).proc,
    "reset to |+>": pr.sequential(pr.discard(q), pr.prepare(np.full((2, 2), 0.5), q)),
}

print(f"{'channel':<14} {'MIO':>5} {'DIO':>5}")
for name, f in channels.items():
    print(f"{name:<14} {is_mio(f, fam)!s:>5} {is_dio(f, fam)!s:>5}")

# MIO is strictly larger: look for a witness
rep = separation_search(FreeSetSpec("MIO", fam), FreeSetSpec("DIO", fam), q, trials=50, seed=7)
print(f"\nMIO but not DIO: {len(rep.witnesses)} witnesses in {rep.trials} trials")
if rep.found:
    f, in_a, in_b = rep.witnesses[0]
    print("first witness Choi matrix (rounded):")
    print(np.round(f.choi, 3))
