import numpy as np
import pytest

from coherence_wb import decoherence as dc
from coherence_wb import free_sets as fs
from coherence_wb import linalg as la
from coherence_wb import process as pr
from coherence_wb.convertibility import separation_search
from coherence_wb.errors import BadMechanism, MissingAssignment

from conftest import H, MINUS, PLUS, W, X, Z, label


def mio_not_dio(sys):
    """E(rho) = <+|rho|+> |0><0| + <-|rho|-> |1><1|."""
    p, m = np.array([1, 1]) / np.sqrt(2), np.array([1, -1]) / np.sqrt(2)
    return pr.from_kraus([np.outer([1, 0], p), np.outer([0, 1], m)], sys, sys)


def test_mio_examples(dephasing_family, qubits):
    a = qubits[0]
    assert fs.is_mio(dephasing_family.dec(a), dephasing_family)
    assert fs.is_mio(mio_not_dio(a), dephasing_family, n_probe=20)
    assert not fs.is_mio(pr.unitary_channel(H, a), dephasing_family)


def test_mio_witness_sends_diagonal_to_maximally_mixed(qubits):
    e = mio_not_dio(qubits[0])
    for p in (0.0, 0.3, 1.0):
        assert np.allclose(pr.apply(e, np.diag([p, 1 - p])), np.eye(2) / 2)


def test_dio_examples(dephasing_family, qubits):
    a = qubits[0]
    assert fs.is_dio(pr.unitary_channel(Z, a), dephasing_family)
    assert not fs.is_dio(pr.unitary_channel(H, a), dephasing_family)
    assert not fs.is_dio(mio_not_dio(a), dephasing_family)


def test_dio_by_brute_force(dephasing_family, qubits, rng):
    # compare against the commutation identity evaluated on a spanning set of inputs
    a = qubits[0]
    d = dephasing_family.dec(a)
    for f in [pr.random_process(a, a, rng), dc.decohere(pr.random_process(a, a, rng), dephasing_family)]:
        commute = True
        for i in range(2):
            for j in range(2):
                e = np.zeros((2, 2))
                e[i, j] = 1
                commute &= np.allclose(pr.apply(f, pr.apply(d, e)), pr.apply(d, pr.apply(f, e)), atol=1e-10)
        assert commute == fs.is_dio(f, dephasing_family)


def test_membership_report(dephasing_family, qubits):
    a = qubits[0]
    rep = fs.membership(pr.unitary_channel(H, a), fs.FreeSetSpec("DIO", dephasing_family))
    assert not rep.member and rep.residual > 0.1 and rep.witness == "dec[I]"
    assert fs.membership(pr.identity(a), fs.FreeSetSpec("DIO", dephasing_family)).member


def test_cdio_equals_dio_under_product_rule(dephasing_family, qubits, rng):
    a = qubits[0]
    spec = fs.FreeSetSpec("cDIO", dephasing_family)
    members = fs.sample_members(fs.FreeSetSpec("DIO", dephasing_family), a, a, 5, rng)
    for f in members + [pr.random_process(a, a, rng) for _ in range(5)]:
        assert fs.is_cdio(f, spec) == fs.is_dio(f, dephasing_family)


def test_cdio_global_examples(z2_global, qubits):
    a, b = qubits
    spec = fs.FreeSetSpec("cDIO", z2_global)
    assert fs.is_cdio(pr.unitary_channel(np.kron(X, np.eye(2)), a + b), spec)
    cnot = np.eye(4)[[0, 1, 3, 2]]
    assert not fs.is_cdio(pr.unitary_channel(cnot, a + b), spec)


def test_cdio_missing_assignment(z2_global, qubits):
    a, b = qubits
    spec = fs.FreeSetSpec("cDIO", z2_global, ancilla_systems=(a + b,))
    with pytest.raises(MissingAssignment):
        fs.is_cdio(pr.identity(a), spec)


def test_minimal_constraint_examples(dephasing_family, qubits):
    a = qubits[0]
    spec = fs.FreeSetSpec("cDIO", dephasing_family)
    assert fs.minimal_constraint_check(pr.identity(a), spec)
    assert not fs.minimal_constraint_check(pr.unitary_channel(H, a), spec)


def test_tio_examples(qutrit, z3_rep, qubits):
    assert fs.is_tio(pr.unitary_channel(np.diag([1, 1j, -1]), qutrit), z3_rep)
    assert fs.is_tio(pr.unitary_channel(np.roll(np.eye(3), 1, axis=0), qutrit), z3_rep)
    rz = dc.GroupRepresentation.cyclic(2, {qubits[0]: Z})
    assert not fs.is_tio(pr.unitary_channel(H, qubits[0]), rz)


def test_cyclic_shift_shifts_rep_by_phase():
    s = np.roll(np.eye(3), 1, axis=0)
    r = np.diag([1, W, W * W])
    # S R S^dag is R up to a global phase, so the conjugation channels agree
    conj = s @ r @ s.conj().T
    phase = conj[0, 0] / r[0, 0]
    assert np.allclose(conj, phase * r)


def test_ctio_factorized_equals_tio(qutrit, z3_rep, rng):
    spec = fs.FreeSetSpec("cTIO", rep=z3_rep, ancilla_systems=(qutrit,))
    assert fs.is_ctio(pr.identity(qutrit), spec)
    pool = fs.sample_members(fs.FreeSetSpec("TIO", rep=z3_rep), qutrit, qutrit, 4, rng)
    pool += [pr.random_unitary_channel(qutrit, rng) for _ in range(3)]
    for f in pool:
        assert fs.is_ctio(f, spec) == fs.is_tio(f, z3_rep)


def test_ctio_separated_from_tio_by_search():
    # trivial action on a, swap action on a c: only the identity survives the ancilla test
    a, c = label("a", 2), label("c", 2)
    swap = np.eye(4)[[0, 2, 1, 3]]
    rep = dc.GroupRepresentation.cyclic(2, {a: np.eye(2), c: np.eye(2), a + c: swap})
    tio = fs.FreeSetSpec("TIO", rep=rep)
    ctio = fs.FreeSetSpec("cTIO", rep=rep, ancilla_systems=(c,))
    report = separation_search(tio, ctio, a, trials=12, seed=0)
    assert report.found
    for f, ra, rb in report.witnesses:
        assert fs.is_tio(f, rep) and not fs.is_ctio(f, ctio)


def test_separation_search_mio_dio(dephasing_family, qubits):
    a = qubits[0]
    report = separation_search(fs.FreeSetSpec("MIO", dephasing_family), fs.FreeSetSpec("DIO", dephasing_family),
                               a, trials=40, seed=1)
    assert report.found
    f, ra, rb = report.witnesses[0]
    assert fs.is_mio(f, dephasing_family) and not fs.is_dio(f, dephasing_family)


def test_separation_search_same_set_is_empty(dephasing_family, qubits):
    spec = fs.FreeSetSpec("DIO", dephasing_family)
    assert not separation_search(spec, spec, qubits[0], trials=20).found


def test_separation_search_dio_tio(qutrit, z3_rep):
    fam = dc.DecoherenceFamily.product([dc.computational_dephasing(qutrit)])
    report = separation_search(fs.FreeSetSpec("DIO", fam), fs.FreeSetSpec("TIO", rep=z3_rep), qutrit,
                               trials=20, seed=0)
    assert report.trials == 20
    for f, ra, rb in report.witnesses:
        assert fs.is_dio(f, fam) and not fs.is_tio(f, z3_rep)


def test_dio_permutation_is_not_tio(qutrit, z3_rep):
    fam = dc.DecoherenceFamily.product([dc.computational_dephasing(qutrit)])
    swap12 = pr.unitary_channel(np.eye(3)[[0, 2, 1]], qutrit)
    assert fs.is_dio(swap12, fam) and not fs.is_tio(swap12, z3_rep)


@pytest.fixture(scope="module")
def z2_mechanisms(qubits, z2_rep):
    a = qubits[0]
    env = label("E", 2)
    ortho = dc.make_reference_frame_mechanism(z2_rep, [np.diag([1, 0]), np.diag([0, 1])], a, env)
    const = dc.make_reference_frame_mechanism(z2_rep, [np.diag([1, 0]), np.diag([1, 0])], a, env)
    partial = dc.make_reference_frame_mechanism(z2_rep, [np.diag([1, 0]), PLUS], a, env)
    return (fs.FreeSetSpec("mech", mech={a: ortho}), fs.FreeSetSpec("mech", mech={a: const}),
            fs.FreeSetSpec("mech", mech={a: partial}))


def _mixed_pool(a, z2_rep, rng):
    fam = dc.twirl_family(z2_rep, [a])
    pool = fs.sample_members(fs.FreeSetSpec("TIO", rep=z2_rep), a, a, 4, rng)
    pool += fs.sample_members(fs.FreeSetSpec("DIO", fam), a, a, 4, rng)
    pool += [pr.random_process(a, a, rng) for _ in range(2)]
    return fam, pool


def test_mechanism_spectrum_endpoints(qubits, z2_rep, z2_mechanisms, rng):
    a = qubits[0]
    ortho, const, _ = z2_mechanisms
    fam, pool = _mixed_pool(a, z2_rep, rng)
    for f in pool:
        assert fs.is_mechanism_invariant(f, ortho) == fs.is_tio(f, z2_rep)
        assert fs.is_mechanism_invariant(f, const) == fs.is_dio(f, fam)


def test_partial_pointers_nested(qubits, z2_rep, z2_mechanisms, rng):
    a = qubits[0]
    ortho, const, partial = z2_mechanisms
    _, pool = _mixed_pool(a, z2_rep, rng)
    for f in pool:
        if fs.is_mechanism_invariant(f, ortho):
            assert fs.is_mechanism_invariant(f, partial)
        if fs.is_mechanism_invariant(f, partial):
            assert fs.is_mechanism_invariant(f, const)


def test_mechanisms_need_common_environment(qubits, z2_rep):
    a, b = qubits
    ma = dc.make_copy_mechanism(a, label("E1", 2))
    mb = dc.make_copy_mechanism(b, label("E2", 2))
    with pytest.raises(BadMechanism):
        fs.FreeSetSpec("mech", mech={a: ma, b: mb})


def test_sample_members_are_members(dephasing_family, qubits, qutrit, z3_rep, rng):
    a = qubits[0]
    for spec, sys in [(fs.FreeSetSpec("DIO", dephasing_family), a), (fs.FreeSetSpec("TIO", rep=z3_rep), qutrit),
                      (fs.FreeSetSpec("cDIO", dephasing_family), a)]:
        members = fs.sample_members(spec, sys, sys, 5, rng)
        assert len(members) == 5
        for f in members:
            assert pr.is_causal(f) and la.is_psd(f.choi) and fs.is_member(f, spec)


def test_sample_nonmembers(dephasing_family, qubits, rng):
    spec = fs.FreeSetSpec("DIO", dephasing_family)
    for f in fs.sample_nonmembers(spec, qubits[0], qubits[0], 4, rng):
        assert not fs.is_member(f, spec)


def test_closure_small(dephasing_family, qutrit, z3_rep):
    rep = fs.free_set_closure_test(fs.FreeSetSpec("cDIO", dephasing_family), samples=5, seed=2)
    assert rep.passed, rep.failures
    rep = fs.free_set_closure_test(fs.FreeSetSpec("TIO", rep=z3_rep), [qutrit], samples=5, seed=2)
    assert rep.passed, rep.failures


def test_parse_kind():
    assert fs.parse_kind("ctio") == "cTIO"
    assert fs.parse_kind("mech") == fs.MECH
    with pytest.raises(ValueError):
        fs.parse_kind("gio")
