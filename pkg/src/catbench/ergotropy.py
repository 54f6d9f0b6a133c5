"""Passive states, ergotropy, and a sampling oracle over the unitary orbit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qstate import DensityMatrix, HermitianOperator, energy
from .sampling import haar_unitaries


@dataclass(frozen=True)
class PassiveDecomposition:
    sorted_state_eigs: np.ndarray  # descending
    sorted_energy_eigs: np.ndarray  # ascending
    passive_state: DensityMatrix
    passive_energy: float


def passive_state(rho: DensityMatrix, H: HermitianOperator) -> PassiveDecomposition:
    """Passive state of ``rho``: its spectrum, in descending order, placed on
    the eigenvectors of ``H`` in ascending order of energy."""
    if rho.dim != H.dim:
        raise ValueError(f"dimension mismatch: state {rho.dim}, Hamiltonian {H.dim}")
    lam = np.sort(np.linalg.eigvalsh(rho.data))[::-1]
    h, vecs = H.eigh()
    sigma = (vecs * lam) @ vecs.conj().T
    return PassiveDecomposition(
        sorted_state_eigs=lam,
        sorted_energy_eigs=h,
        passive_state=DensityMatrix(sigma, check=False),
        passive_energy=float(np.dot(lam, h)),
    )


def ergotropy(rho: DensityMatrix, H: HermitianOperator) -> float:
    """Maximum energy extractable from ``rho`` by a unitary on the system alone."""
    value = energy(rho, H) - passive_state(rho, H).passive_energy
    return max(value, 0.0)


def unitary_orbit_oracle(
    rho: DensityMatrix,
    H: HermitianOperator,
    n_samples: int,
    seed: int,
    *,
    include_identity: bool = True,
    chunk: int = 4096,
) -> float:
    """Best extraction over sampled unitaries; a lower bound on the ergotropy.

    The identity is always the first sample unless ``include_identity`` is
    false, so the result is non-negative in that case.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    rng = np.random.default_rng(seed)
    r, h = rho.data, H.data
    e0 = energy(rho, H)
    best = 0.0 if include_identity else -np.inf
    remaining = n_samples - (1 if include_identity else 0)
    while remaining > 0:
        n = min(chunk, remaining)
        us = haar_unitaries(rho.dim, n, rng)
        # tr[H U rho U^dag] for every sample
        final = np.einsum("nij,jk,nlk,li->n", us, r, us.conj(), h).real
        best = max(best, float(np.max(e0 - final)))
        remaining -= n
    return best
