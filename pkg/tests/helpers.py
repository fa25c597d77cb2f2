"""Shared helpers for the test suite."""
import numpy as np

from dqsim.circuit import Circuit


def random_unitary(rng, dim):
    """Haar-ish random unitary from a QR decomposition."""
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(m)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def basis_prep(n, x):
    """Circuit preparing the computational basis state |x> on n qubits."""
    c = Circuit(n)
    for q in range(n):
        if (x >> q) & 1:
            c.x(q)
    return c


def prepend(prep, circ):
    """New circuit running prep, then circ (same registers as circ)."""
    out = Circuit(circ.num_qubits, circ.num_clbits)
    out.extend(prep)
    out.extend(circ)
    return out
