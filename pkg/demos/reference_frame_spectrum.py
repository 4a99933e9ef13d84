"""Pointer overlap and the free set it induces.

A qutrit is dephased by an environment that records which element of Z3
(generated by diag(1, w, w^2)) acted. Element g leaves the pointer state
cos(t)|0> + sin(t)|g> (element 0 leaves |0>). At t = 0 nothing is recorded
and invariance means commuting with the twirl, which is computational
dephasing, so the invariant channels are DIO. At t = pi/2 the record is
perfect and invariance is covariance (TIO).

Between the endpoints the pointers are still linearly independent, so the
record can be unscrambled and the set already equals TIO. The table below
shows the jump.
"""
import numpy as np

from coherence_wb import AtomicSystem, FreeSetSpec, SystemLabel
from coherence_wb import decoherence as dc
from coherence_wb import free_sets as fs
from coherence_wb import process as pr

t3 = SystemLabel.of(AtomicSystem("t", 3))
env = SystemLabel.of(AtomicSystem("env", 3))
w = np.exp(2j * np.pi / 3)
rep = dc.GroupRepresentation.cyclic(3, {t3: np.diag([1, w, w * w])})
fam = dc.twirl_family(rep, [t3])

rng = np.random.default_rng(11)
pool = fs.sample_members(FreeSetSpec("DIO", fam), t3, t3, 30, rng)
pool += fs.sample_members(FreeSetSpec("TIO", rep=rep), t3, t3, 30, rng)
pool += [pr.random_process(t3, t3, rng) for _ in range(20)]

n_dio = sum(fs.is_dio(f, fam) for f in pool)
n_tio = sum(fs.is_tio(f, rep) for f in pool)
print(f"pool of {len(pool)}: {n_dio} DIO, {n_tio} TIO")
print(f"{'t':>6}  invariant")
e = np.eye(3)
for t in [0.0, 1e-3, 0.1, 0.5, 1.0, np.pi / 2]:
    vecs = [e[0]] + [np.cos(t) * e[0] + np.sin(t) * e[g] for g in (1, 2)]
    mech = dc.make_reference_frame_mechanism(rep, [np.outer(v, v) for v in vecs], t3, env)
    n = sum(fs.is_mechanism_invariant(f, FreeSetSpec("mech", mech={t3: mech})) for f in pool)
    print(f"{t:6.3f}  {n}")
