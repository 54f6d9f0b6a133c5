"""Operator-valued passivity test for a fixed energy-invariant catalyst.

Doubled-space indexing: ``|αβ⟩`` with ``α`` the first copy (the one carrying
the Hamiltonian) as the major index and ``β`` the second copy (carrying the
transposed joint state) as the minor index.  Every formula below depends on
this ordering.

With ``K = H_B⊗1 - x 1⊗H_C`` and ``R = rho_B⊗rho_C`` one has
``C'' = K ⊗ R^T`` and ``~C'' = 1 ⊗ (R K)^T``.  For every joint unitary ``U``
the Choi state ``E(U)`` satisfies ``tr[E(U) C''] = tr[K U R U^dag]`` while
``tr[E(U) ~C''] = tr[K R]`` does not depend on ``U``.  Hence
``C'' - ~C'' >= 0`` forces ``⟨K⟩`` to be non-decreasing under every unitary,
which under the energy-invariance constraint means no extraction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nogo import CatalysisScenario, constrained_max_extraction
from .qstate import (
    DEFAULT_TOLERANCES,
    DensityMatrix,
    HermitianOperator,
    RawOperator,
    Tolerances,
    UnitaryOperator,
    ValidationError,
)

CERTIFICATE_MAX_JOINT_DIM = 9


@dataclass(frozen=True)
class ChoiPair:
    C: HermitianOperator
    C_prime: HermitianOperator
    dims: tuple[int, int]
    H_B: HermitianOperator
    H_C: HermitianOperator
    rho_B: DensityMatrix
    rho_C: DensityMatrix

    @property
    def joint_dim(self) -> int:
        return self.dims[0] * self.dims[1]

    def joint_state(self) -> np.ndarray:
        return np.kron(self.rho_B.data, self.rho_C.data)

    def battery_energy_operator(self) -> np.ndarray:
        return np.kron(self.H_B.data, np.eye(self.dims[1]))

    def catalyst_energy_operator(self) -> np.ndarray:
        return np.kron(np.eye(self.dims[0]), self.H_C.data)

    def reconstruction_defect(self) -> float:
        """Max deviation of the stored operators from their factor products."""
        rt = self.joint_state().T
        c = np.kron(self.battery_energy_operator(), rt)
        cp = np.kron(self.catalyst_energy_operator(), rt)
        return float(max(np.max(np.abs(c - self.C.data)), np.max(np.abs(cp - self.C_prime.data))))


@dataclass(frozen=True)
class MultiplierEstimate:
    x: float
    degenerate: bool
    spread: float
    consistent: bool
    n_pairs: int


@dataclass
class CertificateReport:
    x: float
    x_degenerate: bool
    x_consistency: float
    x_consistent: bool
    Cpp: RawOperator
    Ctilde: RawOperator
    hermiticity_defect: float
    min_eigenvalue: float
    passive: bool
    reliable: bool
    optimizer_best_extraction: float | None = None
    tolerances: dict = field(default_factory=dict)

    def scalars(self) -> dict:
        return {
            "x": self.x,
            "x_degenerate": self.x_degenerate,
            "x_consistency": self.x_consistency,
            "x_consistent": self.x_consistent,
            "hermiticity_defect": self.hermiticity_defect,
            "min_eigenvalue": self.min_eigenvalue,
            "passive": self.passive,
            "reliable": self.reliable,
            "optimizer_best_extraction": self.optimizer_best_extraction,
        }


def build_choi_pair(
    H_B: HermitianOperator,
    H_C: HermitianOperator,
    rho_B: DensityMatrix,
    rho_C: DensityMatrix,
    max_joint_dim: int = CERTIFICATE_MAX_JOINT_DIM,
) -> ChoiPair:
    """``C = H_B⊗1⊗(rho_B⊗rho_C)^T`` and ``C' = 1⊗H_C⊗(rho_B⊗rho_C)^T``."""
    if H_B.dim != rho_B.dim or H_C.dim != rho_C.dim:
        raise ValidationError("dim-match", "Hamiltonian and state dimensions differ")
    d_b, d_c = rho_B.dim, rho_C.dim
    if d_b * d_c > max_joint_dim:
        raise ValidationError("max-dim", f"joint dimension {d_b * d_c} exceeds certificate cap {max_joint_dim}")
    rt = np.kron(rho_B.data, rho_C.data).T
    c = np.kron(np.kron(H_B.data, np.eye(d_c)), rt)
    cp = np.kron(np.kron(np.eye(d_b), H_C.data), rt)
    return ChoiPair(
        C=HermitianOperator(c, check=False),
        C_prime=HermitianOperator(cp, check=False),
        dims=(d_b, d_c),
        H_B=H_B,
        H_C=H_C,
        rho_B=rho_B,
        rho_C=rho_C,
    )


def _multiplier_terms(a: np.ndarray, d: int) -> np.ndarray:
    """``sum_i (⟨ii|A|αβ⟩ - ⟨αβ|A|ii⟩)`` for every (α, β)."""
    a4 = a.reshape(d, d, d, d)
    return np.einsum("iiab->ab", a4) - np.einsum("abii->ab", a4)


def lagrange_multiplier_x(pair: ChoiPair, tol: float = 1e-10, eps_x: float = DEFAULT_TOLERANCES.x) -> MultiplierEstimate:
    """Multiplier of the catalyst-energy constraint.

    Every (α, β) with a denominator above ``tol`` yields a ratio; ``x`` is
    taken from the pair with the largest denominator and ``spread`` is the
    largest pairwise difference between ratios.
    """
    d = pair.joint_dim
    num = _multiplier_terms(pair.C.data, d).ravel()
    den = _multiplier_terms(pair.C_prime.data, d).ravel()
    ok = np.abs(den) > tol
    if not np.any(ok):
        return MultiplierEstimate(0.0, True, 0.0, True, 0)
    ratios = num[ok] / den[ok]
    best = int(np.argmax(np.abs(den[ok])))
    spread = float(np.max(np.abs(ratios[:, None] - ratios[None, :])))
    # a real constraint needs a real multiplier; the imaginary part counts as inconsistency
    spread = max(spread, float(np.max(np.abs(ratios.imag))))
    return MultiplierEstimate(float(ratios[best].real), False, spread, spread <= eps_x, int(ok.sum()))


def tilde_transform(A, d: int) -> RawOperator:
    """``⟨α'β'|~A|αβ⟩ = δ_{αα'} sum_i ⟨ii|A|β'β⟩`` on a ``d²``-dimensional space."""
    a = np.asarray(A, dtype=complex)
    if a.shape != (d * d, d * d):
        raise ValidationError("dims", f"operator of shape {a.shape} is not {d * d}x{d * d}")
    s = np.einsum("iiab->ab", a.reshape(d, d, d, d))
    return RawOperator(np.kron(np.eye(d), s), check=False)


def choi_state(U) -> np.ndarray:
    """``E(U) = sum_ij U|j⟩⟨i|U^dag ⊗ |j⟩⟨i|``, i.e. ``(U⊗1)|Ω⟩⟨Ω|(U⊗1)^dag`` unnormalized."""
    u = np.asarray(U)
    d = u.shape[0]
    omega = np.eye(d).reshape(d * d)
    v = np.kron(u, np.eye(d)) @ omega
    return np.outer(v, v.conj())


def choi_functional(U, A) -> complex:
    """``sum_ij tr[(U|j⟩⟨i|U^dag ⊗ |j⟩⟨i|) A]``."""
    u = np.asarray(U)
    d = u.shape[0]
    a4 = np.asarray(A).reshape(d, d, d, d)
    # entry ⟨y i|A|x j⟩ weighted by U_xj conj(U_yi)
    return complex(np.einsum("xj,yi,yixj->", u, u.conj(), a4))


def certify_passivity(
    rho_B: DensityMatrix,
    H_B: HermitianOperator,
    rho_C: DensityMatrix,
    H_C: HermitianOperator,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> CertificateReport:
    """Evaluate ``C'' - ~C'' >= 0`` on the symmetrized operator."""
    pair = build_choi_pair(H_B, H_C, rho_B, rho_C)
    est = lagrange_multiplier_x(pair, eps_x=tol.x)
    d = pair.joint_dim
    cpp = pair.C.data - est.x * pair.C_prime.data
    ct = tilde_transform(cpp, d).data
    diff = cpp - ct
    herm_def = float(np.max(np.abs(diff - diff.conj().T)))
    min_eig = float(np.linalg.eigvalsh((diff + diff.conj().T) / 2)[0])
    return CertificateReport(
        x=est.x,
        x_degenerate=est.degenerate,
        x_consistency=est.spread,
        x_consistent=est.consistent,
        Cpp=RawOperator(cpp, check=False),
        Ctilde=RawOperator(ct, check=False),
        hermiticity_defect=herm_def,
        min_eigenvalue=min_eig,
        passive=min_eig >= -tol.psd_cert,
        reliable=est.consistent,
        tolerances=tol.as_dict(),
    )


def hessian_blocks(Cpp, d: int) -> tuple[RawOperator, RawOperator]:
    """Diagonal block ``P`` and off-diagonal block ``Q`` of the Lagrangian Hessian.

    Rows are indexed by (α, β), columns by (α', β').  Diagnostic only.
    """
    c = np.asarray(Cpp, dtype=complex)
    if c.shape != (d * d, d * d):
        raise ValidationError("dims", f"operator of shape {c.shape} is not {d * d}x{d * d}")
    c_sum = c + c.conj()
    s = np.einsum("iiab->ab", c.reshape(d, d, d, d))
    t = np.einsum("iiab->ab", c_sum.reshape(d, d, d, d))
    eye = np.eye(d)
    p = c_sum.T - np.kron(eye, s.T)
    q = 1j * c + 1j * np.kron(eye, t.T)
    return RawOperator(p, check=False), RawOperator(q, check=False)


def final_energy_via_choi(pair: ChoiPair, U: UnitaryOperator) -> float:
    return float(choi_functional(U.data, pair.C.data).real)


@dataclass
class CrossValidation:
    certificate: CertificateReport
    best_extraction: float
    converged: bool
    agreement: bool | None
    restarts: int

    def scalars(self) -> dict:
        out = self.certificate.scalars()
        out.update(
            best_extraction=self.best_extraction,
            converged=self.converged,
            agreement=self.agreement,
            restarts=self.restarts,
        )
        return out


def cross_validate(scenario: CatalysisScenario, budget: int, seed: int) -> CrossValidation:
    """Compare the certificate with an energy-invariant extraction search.

    ``passive`` must coincide with ``best_extraction <= tol.opt``.  When no
    restart converges the agreement is ``None``.
    """
    tol = scenario.tolerances
    cert = certify_passivity(scenario.rho_B, scenario.H_B, scenario.rho_C, scenario.H_C, tol)
    report = constrained_max_extraction(scenario.with_kind("energy-invariant"), budget, seed)
    best = report.best_extraction
    cert.optimizer_best_extraction = best
    if not report.converged or not np.isfinite(best):
        agreement = None
    else:
        agreement = cert.passive == (best <= tol.opt)
    return CrossValidation(cert, best, report.converged, agreement, budget)
