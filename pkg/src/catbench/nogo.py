"""Numerical search for catalytic extraction beyond the ergotropy.

The search maximizes ``E_B(initial) - E_B(final) - mu * residual**2`` over
Hermitian generators of the joint unitary, with gradient-based local refinement,
random restarts, and an increasing penalty ``mu``.  Only points whose
constraint residual is at most ``Tolerances.con`` count as feasible.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .ergotropy import ergotropy
from .energy_invariant import build_extraction_unitary
from .qstate import (
    DEFAULT_TOLERANCES,
    DensityMatrix,
    HermitianOperator,
    Tolerances,
    UnitaryOperator,
    ValidationError,
    entropy_of_spectrum,
    von_neumann_entropy,
)

log = logging.getLogger(__name__)

KINDS = ("energy-invariant", "correlated", "uncorrelated")
SEARCH_MAX_JOINT_DIM = 9
PENALTY_SCHEDULE = (1e1, 1e2, 1e3, 1e4, 1e5, 1e6)
# extra stages that push converged points onto the constraint set
POLISH_SCHEDULE = (1e7, 1e8, 1e9, 1e10)
STAGE_STEPS = (0.3, 0.1, 0.03, 0.01, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5)


@dataclass(frozen=True)
class CatalysisScenario:
    rho_B: DensityMatrix
    H_B: HermitianOperator
    rho_C: DensityMatrix
    H_C: HermitianOperator
    catalyst_kind: str = "correlated"
    tolerances: Tolerances = DEFAULT_TOLERANCES
    seed: int = 0

    def __post_init__(self):
        if self.catalyst_kind not in KINDS:
            raise ValidationError("catalyst-kind", f"unknown catalyst kind {self.catalyst_kind!r}")
        if self.rho_B.dim != self.H_B.dim:
            raise ValidationError("dim-match", "battery state and Hamiltonian dimensions differ")
        if self.rho_C.dim != self.H_C.dim:
            raise ValidationError("dim-match", "catalyst state and Hamiltonian dimensions differ")

    @property
    def dims(self) -> tuple[int, int]:
        return self.rho_B.dim, self.rho_C.dim

    def with_kind(self, kind: str) -> "CatalysisScenario":
        return replace(self, catalyst_kind=kind)


@dataclass(frozen=True)
class Sample:
    restart: int
    stage: int
    extraction: float
    residual: float
    unitary: np.ndarray = field(repr=False)


@dataclass
class NoGoReport:
    kind: str
    ergotropy_value: float
    best_extraction: float
    best_violation: float
    restarts: int
    violated: bool
    feasible: bool
    converged: bool
    upper_bound: float
    best_unitary: np.ndarray | None = field(default=None, repr=False)
    samples: list[Sample] = field(default_factory=list, repr=False)
    entropy_check: bool | None = None
    delta_E: float | None = None
    max_delta_E: float | None = None
    spectrum_anomalies: int | None = None
    anomalies: list[str] = field(default_factory=list)
    exploratory: bool = False
    tolerances: dict = field(default_factory=dict)

    @property
    def feasible_samples(self) -> list[Sample]:
        return [s for s in self.samples if s.residual <= self.tolerances.get("con", DEFAULT_TOLERANCES.con)]

    def scalars(self) -> dict:
        return {
            "kind": self.kind,
            "ergotropy": self.ergotropy_value,
            "best_extraction": self.best_extraction,
            "residual": self.best_violation,
            "restarts": self.restarts,
            "violated": self.violated,
            "feasible": self.feasible,
            "converged": self.converged,
            "upper_bound": self.upper_bound,
            "n_feasible_samples": len(self.feasible_samples),
            "entropy_check": self.entropy_check,
            "delta_E": self.delta_E,
            "max_delta_E": self.max_delta_E,
            "spectrum_anomalies": self.spectrum_anomalies,
            "anomalies": list(self.anomalies),
            "exploratory": self.exploratory,
        }


class ExtractionProblem:
    """Pre-assembled arrays for fast evaluation of extraction, residual and
    the penalized objective with its gradient."""

    def __init__(self, scenario: CatalysisScenario, max_joint_dim: int | None = SEARCH_MAX_JOINT_DIM):
        d_b, d_c = scenario.dims
        d = d_b * d_c
        if max_joint_dim is not None and d > max_joint_dim:
            raise ValidationError("max-dim", f"joint dimension {d} exceeds search cap {max_joint_dim}")
        self.kind = scenario.catalyst_kind
        self.d_b, self.d_c, self.d = d_b, d_c, d
        self.R = np.kron(scenario.rho_B.data, scenario.rho_C.data)
        self.h_b = scenario.H_B.data
        self.rho_c = scenario.rho_C.data
        self.h_c = scenario.H_C.data
        self.hb_full = np.kron(self.h_b, np.eye(d_c))
        self.hc_full = np.kron(np.eye(d_b), self.h_c)
        self.e0 = float(np.einsum("ij,ji->", scenario.rho_B.data, self.h_b).real)
        self.ec0 = float(np.einsum("ij,ji->", self.rho_c, self.h_c).real)
        self.h_min = float(np.linalg.eigvalsh(self.h_b)[0])
        iu = np.triu_indices(d, 1)
        self._diag = np.diag_indices(d)
        self._iu = iu
        self._il = (iu[1], iu[0])

    @property
    def n_params(self) -> int:
        return self.d * self.d

    def generator(self, p: np.ndarray) -> np.ndarray:
        d = self.d
        g = np.zeros((d, d), dtype=complex)
        g[self._diag] = p[:d]
        upper = p[d::2] + 1j * p[d + 1 :: 2]
        g[self._iu] = upper
        g[self._il] = upper.conj()
        return g

    def unitary(self, p: np.ndarray) -> np.ndarray:
        w, v = np.linalg.eigh(self.generator(p))
        return (v * np.exp(1j * w)) @ v.conj().T

    def reduced(self, sigma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        s4 = sigma.reshape(self.d_b, self.d_c, self.d_b, self.d_c)
        return np.einsum("ijkj->ik", s4), np.einsum("ijik->jk", s4)

    def evaluate_unitary(self, u: np.ndarray) -> tuple[float, float, np.ndarray, np.ndarray]:
        """Extraction, constraint residual, final battery state and joint state."""
        sigma = u @ self.R @ u.conj().T
        battery, catalyst = self.reduced(sigma)
        extraction = self.e0 - float(np.einsum("ij,ji->", battery, self.h_b).real)
        if self.kind == "energy-invariant":
            res = abs(float(np.einsum("ij,ji->", catalyst, self.h_c).real) - self.ec0)
        else:
            res = float(np.linalg.norm(catalyst - self.rho_c))
            if self.kind == "uncorrelated":
                res += float(np.linalg.norm(sigma - np.kron(battery, self.rho_c)))
        return extraction, res, battery, sigma

    def evaluate(self, p: np.ndarray) -> tuple[float, float]:
        e, r, _, _ = self.evaluate_unitary(self.unitary(p))
        return e, r

    def penalized(self, p: np.ndarray, u0: np.ndarray, mu: float) -> tuple[float, np.ndarray]:
        """Objective ``-extraction + mu * penalty`` at ``exp(iG(p)) u0`` and its gradient in ``p``.

        The penalty is the squared residual, except for the uncorrelated kind
        where the two norms are squared separately to keep it differentiable.
        """
        w, v = np.linalg.eigh(self.generator(p))
        ew = np.exp(1j * w)
        u = (v * ew) @ v.conj().T @ u0
        sigma = u @ self.R @ u.conj().T
        battery, catalyst = self.reduced(sigma)
        # A is the observable whose linear response gives the objective's variation
        a = self.hb_full.copy()
        value = float(np.einsum("ij,ji->", battery, self.h_b).real) - self.e0
        if self.kind == "energy-invariant":
            c = float(np.einsum("ij,ji->", catalyst, self.h_c).real) - self.ec0
            value += mu * c * c
            a += (2 * mu * c) * self.hc_full
        else:
            c = catalyst - self.rho_c
            value += mu * float(np.vdot(c, c).real)
            a += (2 * mu) * np.kron(np.eye(self.d_b), c)
            if self.kind == "uncorrelated":
                b = sigma - np.kron(battery, self.rho_c)
                value += mu * float(np.vdot(b, b).real)
                n = self.reduced(b @ np.kron(np.eye(self.d_b), self.rho_c))[0]
                a += (2 * mu) * (b - np.kron((n + n.conj().T) / 2, np.eye(self.d_c)))
        # Riemannian gradient for U -> exp(i eps X) U is i[sigma, A]
        y = 1j * (sigma @ a - a @ sigma)
        yt = v.conj().T @ y @ v
        # divided differences of exp(i w), written stably
        dw = (w[:, None] - w[None, :]) / 2
        phi = 1j * np.exp(1j * (w[:, None] + w[None, :]) / 2) * np.sinc(dw / np.pi)
        z = -1j * phi.T * (ew.conj()[:, None] * yt)
        gam = v @ z @ v.conj().T
        d = self.d
        iu, il = self._iu, self._il
        grad = np.empty(d * d)
        grad[:d] = gam[self._diag].real
        grad[d::2] = (gam[il] + gam[iu]).real
        grad[d + 1 :: 2] = (1j * gam[il] - 1j * gam[iu]).real
        return value, grad


def constraint_residual(U: UnitaryOperator, scenario: CatalysisScenario) -> float:
    """Distance of ``U`` from the catalyst constraint of ``scenario``; 0 means feasible."""
    if U.dim != scenario.dims[0] * scenario.dims[1]:
        raise ValidationError("dim-match", "unitary dimension does not match the scenario")
    prob = ExtractionProblem(scenario, max_joint_dim=None)
    return prob.evaluate_unitary(U.data)[1]


def default_warm_starts(scenario: CatalysisScenario) -> list[np.ndarray]:
    """Identity, the local passivizing unitary, and (if dimensions allow) the
    complete-extraction protocol unitary."""
    d_b, d_c = scenario.dims
    starts = [np.eye(d_b * d_c, dtype=complex)]
    # U_p maps the eigenvectors of rho_B (descending) onto the energy eigenvectors (ascending)
    lam, vecs = np.linalg.eigh(scenario.rho_B.data)
    vecs = vecs[:, np.argsort(-lam, kind="stable")]
    _, h_vecs = scenario.H_B.eigh()
    starts.append(np.kron(h_vecs @ vecs.conj().T, np.eye(d_c)))
    if scenario.catalyst_kind == "energy-invariant" and d_b == d_c:
        proto = build_extraction_unitary(scenario.rho_B, scenario.H_B, scenario.H_C, scenario.tolerances)
        starts.append(proto.joint_unitary.data)
    return starts


def _nelder_mead_stage(prob, u0, mu, step, max_iter):
    n = prob.n_params
    x0 = np.zeros(n)

    def objective(p):
        e, r, _, _ = prob.evaluate_unitary(prob.unitary(p) @ u0)
        return -e + mu * r * r

    res = minimize(
        objective,
        x0,
        method="Nelder-Mead",
        options={
            "maxfev": max_iter,
            "xatol": 1e-10,
            "fatol": 1e-14,
            "adaptive": n > 16,
            "initial_simplex": np.vstack([x0, x0 + step * np.eye(n)]),
        },
    )
    return res.x, bool(res.success)


def _lbfgs_stage(prob, u0, mu, step, max_iter):
    res = minimize(
        prob.penalized,
        np.zeros(prob.n_params),
        args=(u0, mu),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": max_iter, "ftol": 1e-15, "gtol": 1e-10},
    )
    return res.x, bool(res.success)


LOCAL_SEARCHES = {"lbfgs": _lbfgs_stage, "nelder-mead": _nelder_mead_stage}


def constrained_max_extraction(
    scenario: CatalysisScenario,
    budget: int,
    seed: int,
    *,
    warm_starts: list[np.ndarray] | None = None,
    local_search: str = "lbfgs",
    max_iter: int | None = None,
    polish: bool = True,
) -> NoGoReport:
    """Best feasible extraction found over ``budget`` restarts.

    Restarts begin with the warm-start unitaries; the rest start from uniform
    random generator coordinates in ``[-pi, pi]``.  Each restart runs the
    whole penalty schedule, re-centring the generator chart on the current
    unitary before every stage.  Samples are the start and end point of each
    restart.  Per-restart seeds derive from ``seed``.
    """
    if budget < 1:
        raise ValidationError("budget", "budget must be at least one restart")
    try:
        stage_fn = LOCAL_SEARCHES[local_search]
    except KeyError:
        raise ValidationError("local-search", f"unknown local search {local_search!r}") from None
    tol = scenario.tolerances
    prob = ExtractionProblem(scenario)
    n = prob.n_params
    if max_iter is None:
        max_iter = 400 if local_search == "lbfgs" else 40 * n
    starts = default_warm_starts(scenario) if warm_starts is None else list(warm_starts)
    seeds = np.random.SeedSequence(seed).spawn(budget)

    samples: list[Sample] = []
    converged = 0

    schedule = PENALTY_SCHEDULE + (POLISH_SCHEDULE if polish else ())

    def record(restart, stage, u):
        e, r, _, _ = prob.evaluate_unitary(u)
        samples.append(Sample(restart, stage, e, r, u.copy()))
        return e, r

    for k in range(budget):
        if k < len(starts):
            u = np.asarray(starts[k], dtype=complex)
        else:
            u = prob.unitary(np.random.default_rng(seeds[k]).uniform(-np.pi, np.pi, n))
        record(k, -1, u)
        trail = []
        ok = False
        for mu, step in zip(schedule, STAGE_STEPS):
            x, ok = stage_fn(prob, u, mu, step, max_iter)
            u = prob.unitary(x) @ u
            e, r, _, _ = prob.evaluate_unitary(u)
            trail.append((e, r))
        record(k, len(schedule) - 1, u)
        (e1, r1), (e2, r2) = trail[-2], trail[-1]
        if ok or (r1 <= tol.con and r2 <= tol.con and abs(e2 - e1) <= 0.1 * tol.opt):
            converged += 1

    feasible = [s for s in samples if s.residual <= tol.con]
    erg = ergotropy(scenario.rho_B, scenario.H_B)
    upper = prob.e0 - prob.h_min
    if feasible:
        # max extraction, ties broken by the earliest restart
        best = max(feasible, key=lambda s: (s.extraction, -s.restart, -s.stage))
        best_e, best_r, best_u = best.extraction, best.residual, best.unitary
    else:
        log.warning("no feasible point found; the identity should always be feasible")
        best_e, best_r, best_u = float("nan"), float("nan"), None
    return NoGoReport(
        kind=scenario.catalyst_kind,
        ergotropy_value=erg,
        best_extraction=best_e,
        best_violation=best_r,
        restarts=budget,
        violated=bool(feasible) and best_e > erg + tol.opt,
        feasible=bool(feasible),
        converged=converged > 0,
        upper_bound=upper,
        best_unitary=best_u,
        samples=samples,
        tolerances=tol.as_dict(),
    )


def _final_battery(U: np.ndarray, scenario: CatalysisScenario) -> DensityMatrix:
    prob = ExtractionProblem(scenario, max_joint_dim=None)
    return DensityMatrix(prob.evaluate_unitary(U)[2], check=False)


def uncorrelated_nogo_check(scenario: CatalysisScenario, budget: int, seed: int, **kw) -> NoGoReport:
    """Search under the product-preserving constraint and check spectrum preservation."""
    if scenario.catalyst_kind != "uncorrelated":
        raise ValidationError("catalyst-kind", "uncorrelated_nogo_check needs catalyst_kind='uncorrelated'")
    report = constrained_max_extraction(scenario, budget, seed, **kw)
    tol = scenario.tolerances
    eps_spec = 10.0 * np.sqrt(tol.con)
    lam0 = np.sort(np.linalg.eigvalsh(scenario.rho_B.data))
    anomalies = 0
    for s in report.feasible_samples:
        lam = np.sort(np.linalg.eigvalsh(_final_battery(s.unitary, scenario).data))
        if np.max(np.abs(lam - lam0)) > eps_spec:
            anomalies += 1
    report.spectrum_anomalies = anomalies
    if anomalies:
        report.anomalies.append(f"spectrum mismatch at {anomalies} feasible sample(s)")
    if report.violated:
        report.anomalies.append("extraction above ergotropy at a feasible point")
    return report


def delta_E_qubit(rho_B: DensityMatrix, rho_B_final: DensityMatrix, H_B: HermitianOperator) -> float:
    """``(lam_1 - lam_1')(h_1 - h_2)`` with ``lam_1``, ``lam_1'`` the smaller
    eigenvalues of the initial and final battery and ``h_1 >= h_2``."""
    if rho_B.dim != 2 or rho_B_final.dim != 2 or H_B.dim != 2:
        raise ValidationError("qubit", "delta_E_qubit is defined for qubit batteries only")
    lam1 = np.linalg.eigvalsh(rho_B.data)[0]
    lam1p = np.linalg.eigvalsh(rho_B_final.data)[0]
    h2, h1 = np.linalg.eigvalsh(H_B.data)
    if h1 - h2 < 1e-12:
        return 0.0
    return float((lam1 - lam1p) * (h1 - h2))


def entropy_monotonicity_check(
    U: UnitaryOperator,
    rho_B: DensityMatrix,
    rho_C: DensityMatrix,
    eps: float = DEFAULT_TOLERANCES.entropy,
    eps_con: float = DEFAULT_TOLERANCES.con,
) -> bool:
    """``S(final battery) >= S(rho_B) - eps`` whenever the catalyst comes back
    unchanged (within ``eps_con``); vacuously true otherwise."""
    d_b, d_c = rho_B.dim, rho_C.dim
    if U.dim != d_b * d_c:
        raise ValidationError("dim-match", "unitary dimension does not match the states")
    u = U.data
    sigma = u @ np.kron(rho_B.data, rho_C.data) @ u.conj().T
    s4 = sigma.reshape(d_b, d_c, d_b, d_c)
    battery, catalyst = np.einsum("ijkj->ik", s4), np.einsum("ijik->jk", s4)
    if np.linalg.norm(catalyst - rho_C.data) > eps_con:
        return True
    s_final = entropy_of_spectrum(np.clip(np.linalg.eigvalsh(battery), 0, None))
    return s_final >= von_neumann_entropy(rho_B) - eps


def correlated_qubit_nogo_check(
    scenario: CatalysisScenario, budget: int, seed: int, *, exploratory: bool = False, **kw
) -> NoGoReport:
    """Search under the reduced-state constraint for a qubit battery.

    With ``exploratory=True`` larger batteries are accepted; the report then
    records what was found without flagging anomalies.
    """
    if scenario.catalyst_kind != "correlated":
        raise ValidationError("catalyst-kind", "correlated_qubit_nogo_check needs catalyst_kind='correlated'")
    if scenario.dims[0] != 2 and not exploratory:
        raise ValidationError("qubit", f"battery dimension {scenario.dims[0]} is outside the qubit scope")
    report = constrained_max_extraction(scenario, budget, seed, **kw)
    report.exploratory = exploratory
    tol = scenario.tolerances
    feas = report.feasible_samples
    ok = all(
        entropy_monotonicity_check(UnitaryOperator(s.unitary, check=False), scenario.rho_B, scenario.rho_C, tol.entropy, tol.con)
        for s in feas
    )
    report.entropy_check = ok
    if scenario.dims[0] == 2:
        des = [delta_E_qubit(scenario.rho_B, _final_battery(s.unitary, scenario), scenario.H_B) for s in feas]
        if report.best_unitary is not None:
            report.delta_E = delta_E_qubit(scenario.rho_B, _final_battery(report.best_unitary, scenario), scenario.H_B)
        report.max_delta_E = max(des) if des else None
    if exploratory:
        return report
    if not ok:
        report.anomalies.append("battery entropy decreased at a feasible point")
    if report.max_delta_E is not None and report.max_delta_E > tol.entropy:
        report.anomalies.append(f"delta_E = {report.max_delta_E:.3e} exceeds {tol.entropy:.1e}")
    if report.violated:
        report.anomalies.append("extraction above ergotropy at a feasible point")
    return report
