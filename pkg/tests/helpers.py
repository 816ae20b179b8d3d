"""State builders shared by the test modules."""

import numpy as np

from noisympo.circuit import brickwork_gates
from noisympo.mpo import from_dense


def ghz_vector(n):
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = psi[-1] = 1 / np.sqrt(2)
    return psi


def ghz_mpo(n, **kw):
    psi = ghz_vector(n)
    return from_dense(np.outer(psi, psi.conj()), **kw)


def classical_pair():
    rho = np.zeros((4, 4))
    rho[0, 0] = rho[3, 3] = 0.5
    return rho


def random_gates(n, depth, p, seed):
    return list(brickwork_gates(n, depth, p, np.random.default_rng(seed)))


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def report(number, title, passed, detail):
    line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed
