import numpy as np
import pytest

from coherence_wb import decoherence as dc
from coherence_wb import envelope as ev
from coherence_wb import free_sets as fs
from coherence_wb import process as pr
from coherence_wb.errors import WireMismatch

from conftest import H, label


@pytest.fixture(scope="module")
def labels():
    q = label("q", 2)
    t = label("t", 3)
    return {"q": ev.IdempotentLabel.plain(q), "qD": ev.IdempotentLabel(q, dc.computational_dephasing(q), "D"),
            "t": ev.IdempotentLabel.plain(t), "tB": ev.IdempotentLabel(t, dc.make_block_dephasing([[0, 1], [2]], t), "B")}


def test_label_composition(labels):
    a, b = label("a", 2), label("b", 3)
    ab = ev.label_compose(ev.IdempotentLabel.plain(a), ev.IdempotentLabel.plain(b))
    assert ab.base == a + b and np.allclose(ab.proc.choi, pr.identity(a + b).choi)
    dd = ev.label_compose(labels["qD"], labels["qD"])
    d = labels["qD"].proc
    assert np.allclose(dd.proc.choi, pr.parallel(d, d).choi)
    mixed = ev.label_compose(labels["qD"], labels["q"])
    assert dc.validate_decoherence(mixed.proc).valid


def test_label_rejects_non_idempotent():
    q = label("q", 2)
    damp = pr.from_kraus([np.diag([1, np.sqrt(0.5)]), np.array([[0, np.sqrt(0.5)], [0, 0]])], q, q)
    with pytest.raises(ValueError):
        ev.IdempotentLabel.checked(q, damp)


def test_k_membership(labels, rng):
    qd, q = labels["qD"], labels["q"]
    k = pr.random_process(q.base, q.base, rng)
    assert ev.is_k_process(ev.KProcess.lift(qd, qd, k).as_dprocess())
    h = pr.unitary_channel(H, q.base)
    assert not ev.is_k_process(ev.DProcess(qd, qd, h))
    assert ev.is_k_process(ev.DProcess(q, q, k))
    with pytest.raises(ValueError):
        ev.KProcess(qd, qd, h)


def test_k_compose(labels, rng):
    qd, tb, q = labels["qD"], labels["tB"], labels["q"]
    f = ev.KProcess.lift(qd, tb, pr.random_process(qd.base, tb.base, rng))
    g = ev.KProcess.lift(tb, qd, pr.random_process(tb.base, qd.base, rng))
    assert ev.is_k_process(ev.k_compose(f, g).as_dprocess())
    plain = pr.random_process(q.base, q.base, rng)
    lifted = ev.KProcess.lift(q, q, plain)
    assert np.allclose(lifted.proc.choi, plain.choi)
    ident = ev.KProcess.lift(q, q, pr.identity(q.base))
    assert np.allclose(ev.k_compose(ident, lifted).proc.choi, plain.choi)
    with pytest.raises(WireMismatch):
        ev.k_compose(f, f)


def test_k_inside_d(labels, rng):
    for src, dst in [("qD", "tB"), ("tB", "tB"), ("q", "qD")]:
        a, b = labels[src], labels[dst]
        f = ev.KProcess.lift(a, b, pr.random_process(a.base, b.base, rng))
        assert ev.is_dp_dio(f.as_dprocess())


def test_dp_dio_examples(labels, rng):
    qd, q = labels["qD"], labels["q"]
    k = pr.random_process(q.base, q.base, rng)
    assert ev.is_dp_dio(ev.DProcess(qd, qd, pr.compose(qd.proc, k, qd.proc)))
    assert not ev.is_dp_dio(ev.DProcess(qd, qd, pr.unitary_channel(H, q.base)))
    assert ev.is_dp_dio(ev.DProcess(q, q, k))


def test_dp_dio_matches_dio(labels, rng):
    qd = labels["qD"]
    fam = dc.DecoherenceFamily.product([qd.idem])
    for _ in range(6):
        f = ev.random_dp_dio(qd, qd, rng) if rng.random() < 0.5 else \
            ev.DProcess(qd, qd, pr.random_process(qd.base, qd.base, rng))
        assert ev.is_dp_dio(f) == fs.is_dio(f.proc, fam)


def test_random_dp_dio_members(labels, rng):
    for a, b in [("qD", "tB"), ("tB", "qD"), ("tB", "tB")]:
        f = ev.random_dp_dio(labels[a], labels[b], rng)
        assert ev.is_dp_dio(f) and pr.is_causal(f.proc)


def test_d_parallel_labels(labels, rng):
    f = ev.random_dp_dio(labels["qD"], labels["qD"], rng)
    g = ev.random_dp_dio(labels["tB"], labels["tB"], rng)
    par = ev.d_parallel(f, g)
    assert par.src.base == labels["qD"].base + labels["tB"].base
    assert ev.is_dp_dio(par)


def test_dp_dio_closure_small():
    rep = ev.dp_dio_closure_test(samples=10, seed=5)
    assert rep.passed, rep.failures
    assert rep.counts == {"sequential": 10, "parallel": 10}


def test_dp_dio_closure_identity_corner(labels):
    rep = ev.dp_dio_closure_test(samples=5, labels=[labels["q"], labels["t"]])
    assert rep.passed
