"""Complete energy extraction with an energy-invariant catalyst.

Protocol for a ``d``-level battery with populations ``alpha_i`` on the
battery vectors ``b_i``:

1. prepare the pure catalyst ``sum_i sqrt(alpha_i) |c_i⟩`` on eigenvectors
   ``c_i`` of the catalyst Hamiltonian;
2. swap battery and catalyst;
3. rotate the battery with ``U_g`` (catalyst vector -> ground state of H_B)
   and the catalyst with ``U_k`` (``b_i -> c_i``).

The battery ends in its ground state and the catalyst in the dephased state
``sum_i alpha_i |c_i⟩⟨c_i|`` with the same mean energy.  A battery state with
coherences is first rotated to a diagonal one by ``U_r^dag``.

Ordering convention: ``alpha`` descending (stable), paired with the
catalyst eigenvectors in descending order of energy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ergotropy import ergotropy
from .qstate import (
    DEFAULT_TOLERANCES,
    DensityMatrix,
    HermitianOperator,
    Tolerances,
    UnitaryOperator,
    ValidationError,
    energy,
    evolve,
    fidelity_with_vector,
    partial_trace,
    swap_unitary,
    tensor,
)


@dataclass(frozen=True)
class ExtractionProtocol:
    catalyst_state: DensityMatrix
    joint_unitary: UnitaryOperator
    battery_rotation: UnitaryOperator
    populations: np.ndarray
    ground_vector: np.ndarray
    coherent: bool
    degenerate_ground: bool


@dataclass(frozen=True)
class ExtractionReport:
    initial_energy: float
    final_energy: float
    extracted: float
    catalyst_energy_before: float
    catalyst_energy_after: float
    final_battery_state: DensityMatrix
    ground_fidelity: float
    ergotropy: float
    degenerate_ground: bool = False

    @property
    def catalyst_drift(self) -> float:
        return abs(self.catalyst_energy_after - self.catalyst_energy_before)

    def scalars(self) -> dict:
        return {
            "initial_energy": self.initial_energy,
            "final_energy": self.final_energy,
            "extracted": self.extracted,
            "ergotropy": self.ergotropy,
            "catalyst_energy_before": self.catalyst_energy_before,
            "catalyst_energy_after": self.catalyst_energy_after,
            "catalyst_drift": self.catalyst_drift,
            "ground_fidelity": self.ground_fidelity,
            "degenerate_ground": self.degenerate_ground,
        }


def _descending_energy_basis(H: HermitianOperator) -> tuple[np.ndarray, np.ndarray]:
    h, vecs = H.eigh()
    # reversed ascending order; ties keep the higher index first, which is
    # still deterministic
    return h[::-1], vecs[:, ::-1]


def catalyst_vector(populations, H_C: HermitianOperator) -> np.ndarray:
    """``sum_i sqrt(alpha_i) c_i`` with ``c_i`` the descending-energy eigenvectors of H_C."""
    alpha = np.clip(np.asarray(populations, dtype=float), 0.0, None)
    _, c = _descending_energy_basis(H_C)
    return c @ np.sqrt(alpha)


def build_catalyst_state(rho_B: DensityMatrix, H_C: HermitianOperator) -> DensityMatrix:
    """Pure catalyst whose squared amplitudes are the eigenvalues of ``rho_B``."""
    if rho_B.dim != H_C.dim:
        raise ValidationError("dim-match", f"battery dimension {rho_B.dim} != catalyst dimension {H_C.dim}")
    alpha = np.sort(np.linalg.eigvalsh(rho_B.data))[::-1]
    return DensityMatrix.from_vector(catalyst_vector(alpha, H_C))


def _complete_basis(first: np.ndarray) -> np.ndarray:
    """Unitary whose first column is ``first``; the rest by Gram-Schmidt on e_0, e_1, ..."""
    d = first.size
    cols = [first / np.linalg.norm(first)]
    for k in range(d):
        if len(cols) == d:
            break
        v = np.zeros(d, dtype=complex)
        v[k] = 1.0
        for c in cols:
            v -= (c.conj() @ v) * c
        n = np.linalg.norm(v)
        if n > 1e-10:
            cols.append(v / n)
    return np.column_stack(cols)


def _is_diagonal_in(rho: np.ndarray, basis: np.ndarray, tol: float) -> bool:
    m = basis.conj().T @ rho @ basis
    return float(np.max(np.abs(m - np.diag(np.diag(m))))) <= tol


def build_extraction_unitary(
    rho_B: DensityMatrix,
    H_B: HermitianOperator,
    H_C: HermitianOperator,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> ExtractionProtocol:
    """Catalyst state and joint unitary that drive ``rho_B`` to the ground state of ``H_B``."""
    d = rho_B.dim
    if not (H_B.dim == d and H_C.dim == d):
        raise ValidationError(
            "dim-match", f"battery state {d}, H_B {H_B.dim} and H_C {H_C.dim} must share one dimension"
        )
    h_b, psi = H_B.eigh()
    ground = psi[:, 0]
    degenerate_ground = bool(d > 1 and (h_b[1] - h_b[0]) < 1e-10)

    psi_desc = psi[:, ::-1]
    coherent = not _is_diagonal_in(rho_B.data, psi, tol.herm)
    if coherent:
        lam, vecs = np.linalg.eigh(rho_B.data)
        order = np.argsort(-lam, kind="stable")
        alpha = np.clip(lam[order], 0.0, None)
        # U_r maps the reference basis onto the eigenvectors of rho_B
        b = psi_desc
        u_r = vecs[:, order] @ b.conj().T
    else:
        pops = np.real(np.einsum("ij,ik,kj->j", psi_desc.conj(), rho_B.data, psi_desc))
        order = np.argsort(-pops, kind="stable")
        alpha = np.clip(pops[order], 0.0, None)
        b = psi_desc[:, order]
        u_r = np.eye(d, dtype=complex)

    _, c = _descending_energy_basis(H_C)
    phi_c = c @ np.sqrt(alpha)
    phi_c /= np.linalg.norm(phi_c)

    # after the swap the battery register carries the catalyst amplitudes
    u_g = np.column_stack([ground, np.delete(psi, 0, axis=1)]) @ _complete_basis(phi_c).conj().T
    u_k = c @ b.conj().T
    u_inco = np.kron(u_g, u_k) @ swap_unitary(d).data
    joint = u_inco @ np.kron(u_r.conj().T, np.eye(d))
    return ExtractionProtocol(
        catalyst_state=DensityMatrix.from_vector(phi_c),
        joint_unitary=UnitaryOperator(joint, tol=tol),
        battery_rotation=UnitaryOperator(u_r, tol=tol),
        populations=alpha,
        ground_vector=ground,
        coherent=coherent,
        degenerate_ground=degenerate_ground,
    )


def simulate_extraction(
    rho_B: DensityMatrix,
    H_B: HermitianOperator,
    rho_C: DensityMatrix,
    H_C: HermitianOperator,
    U: UnitaryOperator,
    ground_vector,
    degenerate_ground: bool = False,
) -> ExtractionReport:
    dims = (rho_B.dim, rho_C.dim)
    sigma = evolve(tensor(rho_B, rho_C), U)
    battery = partial_trace(sigma, "B", dims)
    catalyst = partial_trace(sigma, "C", dims)
    e0, e1 = energy(rho_B, H_B), energy(battery, H_B)
    return ExtractionReport(
        initial_energy=e0,
        final_energy=e1,
        extracted=e0 - e1,
        catalyst_energy_before=energy(rho_C, H_C),
        catalyst_energy_after=energy(catalyst, H_C),
        final_battery_state=battery,
        ground_fidelity=fidelity_with_vector(battery, ground_vector),
        ergotropy=ergotropy(rho_B, H_B),
        degenerate_ground=degenerate_ground,
    )


def run_full_extraction(
    rho_B: DensityMatrix,
    H_B: HermitianOperator,
    H_C: HermitianOperator,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> ExtractionReport:
    """Build the protocol for ``rho_B`` and simulate it."""
    proto = build_extraction_unitary(rho_B, H_B, H_C, tol)
    return simulate_extraction(
        rho_B, H_B, proto.catalyst_state, H_C, proto.joint_unitary, proto.ground_vector, proto.degenerate_ground
    )


def verify_energy_invariance(
    U: UnitaryOperator,
    rho_B: DensityMatrix,
    rho_C: DensityMatrix,
    H_C: HermitianOperator,
    tol: float = DEFAULT_TOLERANCES.cat,
) -> tuple[bool, float]:
    """Whether ``U`` leaves the catalyst's mean energy unchanged, and by how much it fails."""
    if H_C.dim != rho_C.dim or U.dim != rho_B.dim * rho_C.dim:
        raise ValidationError("dim-match", "unitary, states and catalyst Hamiltonian are inconsistent")
    sigma = evolve(tensor(rho_B, rho_C), U)
    after = energy(partial_trace(sigma, "C", (rho_B.dim, rho_C.dim)), H_C)
    violation = abs(after - energy(rho_C, H_C))
    return violation <= tol, violation


# ---------------------------------------------------------------------------
# two-level example


def two_level_matrices(k: float) -> tuple[np.ndarray, np.ndarray]:
    """Swap and battery rotation of the two-level example, in the computational basis.

    The rotation entries are ``sqrt((1 ∓ k)/2)``; these make it unitary and
    send the catalyst vector to ``|1⟩``.
    """
    u_swap = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
    a, b = np.sqrt((1 - k) / 2), np.sqrt((1 + k) / 2)
    u_g = np.array([[a, -b], [b, a]], dtype=complex)
    return u_swap, u_g


def two_level_state(k: float) -> DensityMatrix:
    return DensityMatrix(np.diag([(1 + k) / 2, (1 - k) / 2]))


def two_level_catalyst(k: float) -> DensityMatrix:
    return DensityMatrix.from_vector([np.sqrt((1 + k) / 2), np.sqrt((1 - k) / 2)])


def two_level_demo(k: float, h_B: float, h_C: float) -> ExtractionReport:
    """Two-level battery ``diag((1+k)/2, (1-k)/2)`` with ``H = h σ_z`` on both sides."""
    if not 0.0 <= k <= 1.0:
        raise ValidationError("k-range", f"k={k} outside [0, 1]")
    if h_B <= 0:
        raise ValidationError("h_B-sign", "h_B must be positive so that |1⟩ is the ground state")
    sz = np.diag([1.0, -1.0])
    H_B, H_C = HermitianOperator(h_B * sz), HermitianOperator(h_C * sz)
    u_swap, u_g = two_level_matrices(k)
    u_opt = UnitaryOperator(np.kron(u_g, np.eye(2)) @ u_swap)
    return simulate_extraction(two_level_state(k), H_B, two_level_catalyst(k), H_C, u_opt, [0.0, 1.0])
