import sys

import numpy as np
import pytest

from coherence_wb import decoherence as dc
from coherence_wb.process import AtomicSystem, SystemLabel

X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
W = np.exp(2j * np.pi / 3)
PLUS = np.full((2, 2), 0.5, dtype=complex)
MINUS = np.eye(2) - PLUS


def label(name, d):
    return SystemLabel.of(AtomicSystem(name, d))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def qubits():
    return label("a", 2), label("b", 2)


@pytest.fixture(scope="session")
def qutrit():
    return label("t", 3)


@pytest.fixture(scope="session")
def dephasing_family(qubits, qutrit):
    a, b = qubits
    return dc.DecoherenceFamily.product([dc.computational_dephasing(l) for l in (a, b, qutrit)])


@pytest.fixture(scope="session")
def z2_rep(qubits):
    a, b = qubits
    return dc.GroupRepresentation.cyclic(2, {a: X, b: X, a + b: np.kron(X, X)})


@pytest.fixture(scope="session")
def z2_global(qubits, z2_rep):
    a, b = qubits
    return dc.twirl_family(z2_rep, [a, b, a + b])


@pytest.fixture(scope="session")
def z3_rep(qutrit):
    return dc.GroupRepresentation.cyclic(3, {qutrit: np.diag([1, W, W * W])}, factorize=True)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.LINES, key=lambda l: int(l.split()[1][2:])):
            terminalreporter.write_line(line)
