"""Seeded random states, Hamiltonians and unitaries for tests and sweeps."""

from __future__ import annotations

import numpy as np

from .qstate import DensityMatrix, HermitianOperator, UnitaryOperator


def haar_unitaries(d: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Stack of ``n`` Haar-distributed ``d×d`` unitaries (QR of Ginibre matrices)."""
    z = (rng.standard_normal((n, d, d)) + 1j * rng.standard_normal((n, d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=1, axis2=2)
    return q * (diag / np.abs(diag))[:, None, :]


def random_unitary(d: int, rng: np.random.Generator) -> UnitaryOperator:
    return UnitaryOperator(haar_unitaries(d, 1, rng)[0], check=False)


def random_density_matrix(d: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    k = d if rank is None else rank
    g = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    rho = g @ g.conj().T
    return DensityMatrix(rho / np.trace(rho).real)


def random_diagonal_state(d: int, rng: np.random.Generator) -> DensityMatrix:
    p = rng.dirichlet(np.ones(d))
    return DensityMatrix(np.diag(p))


def random_pure_state(d: int, rng: np.random.Generator) -> DensityMatrix:
    return random_density_matrix(d, rng, rank=1)


def random_hamiltonian(d: int, rng: np.random.Generator, scale: float = 1.0, diagonal: bool = False) -> HermitianOperator:
    """Hamiltonian with eigenvalues uniform in ``[-scale, scale]``."""
    h = rng.uniform(-scale, scale, size=d)
    if diagonal:
        return HermitianOperator(np.diag(h))
    u = haar_unitaries(d, 1, rng)[0]
    return HermitianOperator((u * h) @ u.conj().T)
