import numpy as np
import pytest

from coherence_wb import decoherence as dc
from coherence_wb import linalg as la
from coherence_wb import process as pr
from coherence_wb.errors import (BadBasis, BadMechanism, BadPartition, BadRepresentation, InvalidDecoherence,
                                 MissingAssignment, PreconditionFailed)

from conftest import H, PLUS, W, X, Z, label


def amplitude_damping(sys, gamma=0.5):
    k0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]])
    k1 = np.array([[0, np.sqrt(gamma)], [0, 0]])
    return pr.from_kraus([k0, k1], sys, sys)


def test_computational_dephasing(qubits, rng):
    a = qubits[0]
    d = dc.computational_dephasing(a)
    assert np.allclose(d.choi, np.diag([1, 0, 0, 1]))
    assert np.allclose(pr.apply(d.proc, PLUS), np.eye(2) / 2)
    p = 0.3
    assert np.allclose(pr.apply(d.proc, np.diag([p, 1 - p])), np.diag([p, 1 - p]))
    rho = la.random_density(2, rng)
    assert np.allclose(pr.apply(d.proc, rho), np.diag(np.diag(rho)))


def test_dephasing_in_rotated_basis(qubits, rng):
    a = qubits[0]
    d = dc.make_dephasing(H, a)
    rho = la.random_density(2, rng)
    want = sum(np.outer(H[:, i], H[:, i].conj()) @ rho @ np.outer(H[:, i], H[:, i].conj()) for i in range(2))
    assert np.allclose(pr.apply(d.proc, rho), want)


def test_dephasing_needs_unitary_basis(qubits):
    with pytest.raises(BadBasis):
        dc.make_dephasing(np.array([[1, 1], [0, 1]]), qubits[0])


def test_block_dephasing(qutrit, rng):
    d = dc.make_block_dephasing([[0, 1], [2]], qutrit)
    rho = la.random_density(3, rng)
    mask = np.array([[1, 1, 0], [1, 1, 0], [0, 0, 1]])
    assert np.allclose(pr.apply(d.proc, rho), rho * mask)
    whole = dc.make_block_dephasing([[0, 1, 2]], qutrit)
    assert np.allclose(whole.choi, pr.identity(qutrit).choi)
    singles = dc.make_block_dephasing([[0], [1], [2]], qutrit)
    assert np.allclose(singles.choi, dc.computational_dephasing(qutrit).choi)


@pytest.mark.parametrize("blocks", [[[0, 1], [1, 2]], [[0], [1]], [[0, 1], []]])
def test_bad_partitions(qutrit, blocks):
    with pytest.raises(BadPartition):
        dc.make_block_dephasing(blocks, qutrit)


def test_z2_twirl(qubits, z2_rep, rng):
    a, b = qubits
    t = dc.make_twirl(z2_rep, a)
    rho = la.random_density(2, rng)
    assert np.allclose(pr.apply(t.proc, rho), (rho + X @ rho @ X) / 2)
    t2 = dc.make_twirl(z2_rep, a + b)
    rho2 = la.random_density(4, rng)
    xx = np.kron(X, X)
    assert np.allclose(pr.apply(t2.proc, rho2), (rho2 + xx @ rho2 @ xx) / 2)
    # the global twirl keeps correlations a product of local twirls would destroy
    bell = np.outer([1, 0, 0, 1], [1, 0, 0, 1]) / 2
    assert np.allclose(pr.apply(t2.proc, bell), bell)
    assert not np.allclose(pr.apply(pr.parallel(t.proc, dc.make_twirl(z2_rep, b).proc), bell), bell)


def test_trivial_group_twirl_is_identity(qutrit):
    rep = dc.GroupRepresentation(("e",), {qutrit: [np.eye(3)]})
    assert np.allclose(dc.make_twirl(rep, qutrit).choi, pr.identity(qutrit).choi)


def test_z3_twirl_is_dephasing(qutrit, z3_rep):
    t = dc.make_twirl(z3_rep, qutrit)
    assert np.allclose(t.choi, dc.computational_dephasing(qutrit).choi)


def test_bad_representation(qubits):
    a = qubits[0]
    with pytest.raises(BadRepresentation):
        dc.GroupRepresentation(("e", "g"), {a: [np.eye(2), np.array([[1, 1], [0, 1]])]})
    with pytest.raises(BadRepresentation):
        # not closed: H*H is the identity but the declared table says otherwise
        dc.GroupRepresentation(("e", "g"), {a: [np.eye(2), H]}, table=((0, 1), (1, 1)))


def test_validate_decoherence(qubits):
    a = qubits[0]
    assert dc.validate_decoherence(dc.computational_dephasing(a).proc).valid
    ad = dc.validate_decoherence(amplitude_damping(a))
    assert ad.failures == ["idempotent"]
    assert ad.residuals["causal"] < 1e-12 and ad.residuals["idempotent"] > 0.1
    filt = dc.validate_decoherence(pr.from_kraus([np.diag([1, 0])], a, a))
    assert filt.failures == ["causal"]
    with pytest.raises(InvalidDecoherence):
        dc.DecoherenceProcess.checked(amplitude_damping(a))


def test_amplitude_damping_idempotence_residual_by_hand(qubits):
    a = qubits[0]
    f = amplitude_damping(a)
    ff = amplitude_damping(a, 0.75)  # damping composes as 1 - (1-g)^2
    want = la.relative_residual(f.choi, ff.choi)
    assert np.isclose(dc.validate_decoherence(f).residuals["idempotent"], want)


def test_reference_frame_mechanism(qubits, z2_rep):
    a = qubits[0]
    e = label("E", 2)
    m = dc.make_reference_frame_mechanism(z2_rep, [np.diag([1, 0]), np.diag([0, 1])], a, e)
    assert la.relative_residual(m.induced.choi, dc.make_twirl(z2_rep, a).choi) < 1e-12
    assert m.validate().valid
    with pytest.raises(BadMechanism):
        dc.make_reference_frame_mechanism(z2_rep, [np.diag([1, 0])], a, e)


def test_copy_mechanism_induces_dephasing(qubits):
    a = qubits[0]
    m = dc.make_copy_mechanism(a)
    assert np.allclose(m.induced.choi, dc.computational_dephasing(a).choi)
    # the copy is an isometry: coherence moves into system-environment correlations
    out = pr.apply(m.proc, PLUS)
    assert np.allclose(out, np.outer([1, 0, 0, 1], [1, 0, 0, 1]) / 2)


def test_is_decohered(dephasing_family, qubits):
    a = qubits[0]
    s = np.array([[0.9, 0.2], [0.1, 0.8]])
    kraus = [np.sqrt(s[i, j]) * np.outer(np.eye(2)[i], np.eye(2)[j]) for i in range(2) for j in range(2)]
    classical = pr.from_kraus(kraus, a, a)
    assert dc.is_decohered(classical, dephasing_family)
    assert not dc.is_decohered(pr.unitary_channel(H, a), dephasing_family)
    assert dc.is_decohered(dephasing_family.dec(a), dephasing_family)


def test_missing_assignment(dephasing_family):
    other = label("zz", 2)
    with pytest.raises(MissingAssignment):
        dephasing_family.dec(other)


def test_product_family_rule(dephasing_family, qubits, qutrit):
    a, b = qubits
    rep = dc.check_family_rule(dephasing_family, [a, b, a + b, a + qutrit])
    assert rep.valid, rep.failures
    assert np.allclose(dephasing_family.dec(a + b).choi,
                       pr.parallel(dephasing_family.dec(a), dephasing_family.dec(b)).choi)


def test_global_family_rule(z2_global):
    rep = dc.check_family_rule(z2_global)
    assert rep.valid, rep.failures
    assert "local_left[a|b]" in rep.residuals


def test_mixed_family_fails(qubits, z2_rep):
    a, b = qubits
    fam = dc.DecoherenceFamily({a: dc.computational_dephasing(a), b: dc.computational_dephasing(b),
                                a + b: dc.make_twirl(z2_rep, a + b)}, dc.GLOBAL)
    rep = dc.check_family_rule(fam)
    assert not rep.valid
    assert {"local_left[a|b]", "local_right[a|b]"} <= set(rep.failures)


def test_product_family_with_wrong_composite_fails(qubits, z2_rep):
    a, b = qubits
    fam = dc.DecoherenceFamily({a: dc.computational_dephasing(a), b: dc.computational_dephasing(b),
                                a + b: dc.make_twirl(z2_rep, a + b)}, dc.PRODUCT)
    assert dc.check_family_rule(fam).failures == ["product[ab]"]


def test_three_qubit_global_staircase(z2_rep):
    # with a declared triple the staircase constraint is checked and fails for the X(x)X twirls
    a, b, c = label("a", 2), label("b", 2), label("c", 2)
    rep3 = dc.GroupRepresentation.cyclic(2, {a: X, b: X, c: X, a + b: np.kron(X, X), b + c: np.kron(X, X),
                                             a + b + c: np.kron(np.kron(X, X), X)})
    fam = dc.twirl_family(rep3, [a, b, c, a + b, b + c, a + b + c])
    rep = dc.check_family_rule(fam)
    assert any(f.startswith("staircase") for f in rep.failures)
    assert not any(f.startswith("local") for f in rep.failures)


def test_closure_product_family(dephasing_family):
    rep = dc.closure_property_test(dephasing_family, samples=15, seed=3)
    assert rep.passed, rep.failures
    assert rep.max_residual < 1e-8
    assert set(rep.counts) >= {"sequential", "parallel", "wire_output", "wire_input", "staircase"}


def test_closure_global_family(z2_global):
    rep = dc.closure_property_test(z2_global, samples=15, seed=3)
    assert rep.passed, rep.failures


def test_closure_refuses_broken_family(qubits, z2_rep):
    a, b = qubits
    fam = dc.DecoherenceFamily({a: dc.computational_dephasing(a), b: dc.computational_dephasing(b),
                                a + b: dc.make_twirl(z2_rep, a + b)}, dc.GLOBAL)
    with pytest.raises(PreconditionFailed):
        dc.closure_property_test(fam, samples=2)


def test_closure_is_seeded(dephasing_family):
    r1 = dc.closure_property_test(dephasing_family, samples=3, seed=9)
    r2 = dc.closure_property_test(dephasing_family, samples=3, seed=9)
    assert r1.max_residual == r2.max_residual


def test_random_decohered_is_decohered(dephasing_family, qubits, qutrit, rng):
    a, _ = qubits
    for _ in range(5):
        f = dc.random_decohered(a, qutrit, dephasing_family, rng)
        assert dc.is_decohered(f, dephasing_family)


def test_parallel_mechanisms(qubits):
    a, b = qubits
    ma, mb = dc.make_copy_mechanism(a, label("Ea", 2)), dc.make_copy_mechanism(b, label("Eb", 2))
    m = dc.parallel_mechanisms([ma, mb])
    assert m.sys == a + b and m.env == label("Ea", 2) + label("Eb", 2)
    assert np.allclose(m.induced.choi, dc.computational_dephasing(a + b).choi)
