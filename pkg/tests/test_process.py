import numpy as np
import pytest

from coherence_wb import linalg as la
from coherence_wb import process as pr
from coherence_wb.errors import NotCPTNI, ShapeError, WireMismatch
from coherence_wb.process import TRIVIAL

from conftest import H, PLUS, Z, label


@pytest.fixture
def q():
    return label("q", 2)


def choi_by_definition(kraus, din):
    """J[(a,b),(a',b')] = f(|a><a'|)[b,b'] evaluated entry by entry."""
    dout = kraus[0].shape[0]
    j = np.zeros((din * dout, din * dout), dtype=complex)
    for a in range(din):
        for a2 in range(din):
            e = np.zeros((din, din))
            e[a, a2] = 1
            out = sum(k @ e @ k.conj().T for k in kraus)
            j[a * dout:(a + 1) * dout, a2 * dout:(a2 + 1) * dout] = out
    return j


def test_identity_choi(q):
    f = pr.from_kraus([np.eye(2)], q, q)
    v = np.eye(2).reshape(-1)
    assert np.allclose(f.choi, np.outer(v, v))
    assert np.allclose(f.choi, pr.identity(q).choi)


def test_dephasing_choi(q):
    f = pr.from_kraus([np.diag([1, 0]), np.diag([0, 1])], q, q)
    assert np.allclose(f.choi, np.diag([1, 0, 0, 1]))


def test_filter_is_cptni_not_causal(q):
    f = pr.from_kraus([np.diag([1, 0])], q, q)
    assert pr.is_cptni(f) and not pr.is_causal(f)


def test_choi_matches_definition(rng):
    a, t = label("a", 2), label("t", 3)
    ks = pr.random_kraus(2, 3, rng, rank=2)
    assert np.allclose(pr.from_kraus(ks, a, t).choi, choi_by_definition(ks, 2))


def test_trace_increasing_rejected(q):
    with pytest.raises(NotCPTNI):
        pr.from_kraus([np.sqrt(2) * np.eye(2)], q, q)
    with pytest.raises(NotCPTNI):
        pr.from_choi(-np.eye(4), q, q)


def test_kraus_shape_checked(q):
    with pytest.raises(ShapeError):
        pr.from_kraus([np.eye(3)], q, q)


def test_sequential_examples(q):
    d = pr.from_kraus([np.diag([1, 0]), np.diag([0, 1])], q, q)
    f = pr.unitary_channel(H, q)
    assert np.allclose(pr.sequential(pr.identity(q), f).choi, f.choi)
    assert np.allclose(pr.sequential(d, d).choi, d.choi)
    one = pr.sequential(pr.prepare(np.diag([1, 0]), q), pr.discard(q))
    assert one.input == TRIVIAL and one.output == TRIVIAL and np.isclose(one.choi[0, 0], 1)


def test_sequential_order_matches_application(rng):
    a = label("a", 2)
    f, g = pr.random_process(a, a, rng), pr.random_process(a, a, rng)
    rho = la.random_density(2, rng)
    assert np.allclose(pr.apply(pr.sequential(f, g), rho), pr.apply(g, pr.apply(f, rho)))
    assert np.allclose(pr.compose(f, g).choi, pr.sequential(f, g).choi)


def test_sequential_type_mismatch(q):
    with pytest.raises(WireMismatch):
        pr.sequential(pr.identity(q), pr.identity(label("t", 3)))


def test_parallel_examples(rng):
    a, b = label("a", 2), label("b", 3)
    assert np.allclose(pr.parallel(pr.identity(a), pr.identity(b)).choi, pr.identity(a + b).choi)
    rho, sigma = la.random_density(2, rng), la.random_density(3, rng)
    assert np.allclose(pr.parallel(pr.prepare(rho, a), pr.prepare(sigma, b)).choi, np.kron(rho, sigma))


def test_parallel_acts_factorwise(rng):
    a, b = label("a", 2), label("b", 2)
    f, g = pr.random_process(a, a, rng), pr.random_process(b, b, rng)
    rho, sigma = la.random_density(2, rng), la.random_density(2, rng)
    out = pr.apply(pr.parallel(f, g), np.kron(rho, sigma))
    assert np.allclose(out, np.kron(pr.apply(f, rho), pr.apply(g, sigma)))


def test_discard(q, rng):
    assert np.allclose(pr.discard(TRIVIAL).choi, [[1]])
    rho = 0.6 * la.random_density(2, rng)
    assert np.isclose(pr.apply(pr.discard(q), rho)[0, 0], np.trace(rho))


def test_causality(q, rng):
    d = pr.from_kraus([np.diag([1, 0]), np.diag([0, 1])], q, q)
    assert pr.is_causal(d)
    assert pr.is_causal(pr.unitary_channel(la.random_unitary(2, rng), q))


def test_apply(q, rng):
    rho = la.random_density(2, rng)
    assert np.allclose(pr.apply(pr.identity(q), rho), rho)
    d = pr.from_kraus([np.diag([1, 0]), np.diag([0, 1])], q, q)
    assert np.allclose(pr.apply(d, PLUS), np.eye(2) / 2)
    sigma = la.random_density(2, rng)
    replace = pr.sequential(pr.discard(q), pr.prepare(sigma, q))
    assert np.allclose(pr.apply(replace, 0.5 * rho), 0.5 * sigma)


def test_apply_adjoint_is_dual(rng):
    a, t = label("a", 2), label("t", 3)
    f = pr.random_process(a, t, rng)
    rho, e = la.random_density(2, rng), la.random_density(3, rng)
    assert np.isclose(np.trace(e @ pr.apply(f, rho)), np.trace(pr.apply_adjoint(f, e) @ rho))


def test_effect_as_process(q):
    e = np.array([[0.7, 0.1j], [-0.1j, 0.2]])
    rho = np.array([[0.6, 0.2], [0.2, 0.4]])
    out = pr.sequential(pr.prepare(rho, q), pr.effect(e, q))
    assert np.isclose(out.choi[0, 0], np.trace(e @ rho))
    assert np.allclose(pr.as_effect(pr.effect(e, q)), e)


def test_permute_wires():
    a, b = label("a", 2), label("b", 2)
    v = np.array([1, 0, 0, 1]) / np.sqrt(2)
    bell = pr.prepare(np.outer(v, v), a + b)
    assert np.allclose(pr.permute_wires(bell, [], [0, 1]).choi, bell.choi)
    assert np.allclose(pr.permute_wires(bell, [], [1, 0]).choi, bell.choi)
    sw = pr.swap(a, b)
    assert np.allclose(pr.sequential(sw, pr.swap(b, a)).choi, pr.identity(a + b).choi)
    with pytest.raises(ShapeError):
        pr.permute_wires(bell, [], [0, 0])


def test_swap_exchanges_factors(rng):
    a, t = label("a", 2), label("t", 3)
    rho, sigma = la.random_density(2, rng), la.random_density(3, rng)
    assert np.allclose(pr.apply(pr.swap(a, t), np.kron(rho, sigma)), np.kron(sigma, rho))


def test_trace_out(rng):
    a, t = label("a", 2), label("t", 3)
    rho, sigma = la.random_density(2, rng), la.random_density(3, rng)
    prep = pr.prepare(np.kron(rho, sigma), a + t)
    assert np.allclose(pr.as_state(pr.trace_out(prep, [1])), rho)


def test_wire_matches_explicit_composite(rng):
    a, b, c = label("a", 2), label("b", 2), label("c", 2)
    f = pr.random_process(a, b + c, rng)
    g = pr.random_process(c, a, rng)
    got = pr.wire(f, g, 1)
    want = pr.sequential(f, pr.parallel(pr.identity(b), g))
    assert np.allclose(got.choi, want.choi)


def test_random_process_flags(rng):
    a = label("a", 2)
    assert pr.is_causal(pr.random_process(a, a, rng))
    f = pr.random_process(a, a, rng, causal=False)
    assert pr.is_cptni(f)


def test_unitary_channel_composition():
    q = label("q", 2)
    zz = pr.sequential(pr.unitary_channel(Z, q), pr.unitary_channel(Z, q))
    assert np.allclose(zz.choi, pr.identity(q).choi)


def test_extended_link_products_match_naive_route(rng):
    a, b, c, e = label("a", 2), label("b", 3), label("c", 2), label("e", 3)
    f = pr.random_process(a, b, rng)
    g = pr.random_process(b + e, c, rng)
    h = pr.random_process(c, a + e, rng)
    fe = pr.parallel(f, pr.identity(e))
    assert la.approx_eq(pr.sequential_ext(f, e, g).choi, pr.sequential(fe, g).choi)
    assert la.approx_eq(pr.ext_sequential(h, f, e).choi, pr.sequential(h, fe).choi)
    assert pr.sequential_ext(f, e, g).input == a + e
    with pytest.raises(WireMismatch):
        pr.sequential_ext(f, c, g)


def test_random_kraus_low_rank_is_still_causal(rng):
    f = pr.random_process(label("x", 4), label("y", 2), rng, rank=1)
    assert np.isfinite(f.choi).all() and pr.is_causal(f)
