"""Dense quantum-state primitives on finite-dimensional Hilbert spaces.

Conventions used throughout the package:

* the battery is always the first tensor factor, the catalyst the second;
* entropies are in nats;
* operators are immutable wrappers around read-only ``numpy`` arrays.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace

import numpy as np

DEFAULT_MAX_JOINT_DIM = 64
DEGENERACY_GAP = 1e-10


class ValidationError(ValueError):
    """Raised when an input violates a named structural invariant."""

    def __init__(self, invariant: str, message: str):
        super().__init__(f"[{invariant}] {message}")
        self.invariant = invariant


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances shared by every module.

    ``herm``/``tr``/``uni``/``psd``/``spec`` guard the matrix invariants,
    ``cat`` the catalyst energy drift, ``psd_cert`` the passivity test,
    ``x`` the multiplier consistency, ``opt`` the extraction threshold,
    ``con`` the constraint feasibility and ``entropy`` entropy comparisons.
    """

    herm: float = 1e-9
    tr: float = 1e-9
    uni: float = 1e-9
    psd: float = 1e-10
    spec: float = 1e-10
    cat: float = 1e-9
    psd_cert: float = 1e-8
    x: float = 1e-6
    opt: float = 1e-4
    con: float = 1e-5
    entropy: float = 1e-7

    @classmethod
    def names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def with_overrides(self, overrides: dict | None) -> "Tolerances":
        if not overrides:
            return self
        unknown = set(overrides) - set(self.names())
        if unknown:
            raise ValidationError("tolerance-name", f"unknown tolerance(s): {sorted(unknown)}")
        return replace(self, **{k: float(v) for k, v in overrides.items()})

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.names()}


DEFAULT_TOLERANCES = Tolerances()


def max_joint_dim() -> int:
    """Joint-dimension cap, overridable through ``CATBENCH_MAX_DIM``."""
    raw = os.environ.get("CATBENCH_MAX_DIM")
    if raw is None:
        return DEFAULT_MAX_JOINT_DIM
    try:
        value = int(raw)
    except ValueError:
        raise ValidationError("max-dim", f"CATBENCH_MAX_DIM={raw!r} is not an integer") from None
    if value < 1:
        raise ValidationError("max-dim", "CATBENCH_MAX_DIM must be positive")
    return value


# ---------------------------------------------------------------------------
# operator wrappers


def _square_array(data) -> np.ndarray:
    a = np.array(data, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise ValidationError("square", f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError("finite", "matrix has non-finite entries")
    return a


def hermiticity_defect(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - a.conj().T)))


def _symmetrized(a: np.ndarray, tol: float, what: str) -> np.ndarray:
    defect = hermiticity_defect(a)
    if defect > tol:
        raise ValidationError("hermitian", f"{what} Hermiticity defect {defect:.3e} exceeds {tol:.1e}")
    return (a + a.conj().T) / 2


class Operator:
    """Immutable square complex matrix. Subclasses add invariants."""

    __slots__ = ("_data",)
    kind = "raw"

    def __init__(self, data, *, tol: Tolerances = DEFAULT_TOLERANCES, check: bool = True):
        a = _square_array(data)
        if check:
            a = self._validated(a, tol)
        a.setflags(write=False)
        self._data = a

    def _validated(self, a: np.ndarray, tol: Tolerances) -> np.ndarray:
        return a

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def dim(self) -> int:
        return self._data.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self._data if dtype is None else self._data.astype(dtype)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dim={self.dim})"

    def allclose(self, other, atol: float = 1e-12) -> bool:
        b = np.asarray(other)
        return b.shape == self._data.shape and bool(np.max(np.abs(self._data - b)) <= atol)


class RawOperator(Operator):
    """Square complex matrix with no structural constraint."""


class HermitianOperator(Operator):
    kind = "hermitian"

    def _validated(self, a, tol):
        return _symmetrized(a, tol.herm, "operator")

    def eigh(self):
        return eigh_canonical(self._data)


class DensityMatrix(Operator):
    kind = "density"

    def _validated(self, a, tol):
        a = _symmetrized(a, tol.herm, "state")
        trace = np.trace(a).real
        if abs(trace - 1.0) > tol.tr:
            raise ValidationError("unit-trace", f"trace {trace:.12g} differs from 1 by more than {tol.tr:.1e}")
        lam_min = np.linalg.eigvalsh(a)[0]
        if lam_min < -tol.psd:
            raise ValidationError("positive", f"minimum eigenvalue {lam_min:.3e} below -{tol.psd:.1e}")
        return a

    @classmethod
    def from_vector(cls, psi) -> "DensityMatrix":
        v = np.asarray(psi, dtype=complex).ravel()
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()))

    def eigvals(self) -> np.ndarray:
        return np.linalg.eigvalsh(self._data)


class UnitaryOperator(Operator):
    kind = "unitary"

    def _validated(self, a, tol):
        defect = unitarity_defect(a)
        if defect > tol.uni:
            raise ValidationError("unitary", f"max|U^dag U - 1| = {defect:.3e} exceeds {tol.uni:.1e}")
        return a

    @property
    def dag(self) -> "UnitaryOperator":
        return UnitaryOperator(self._data.conj().T, check=False)

    def __matmul__(self, other):
        if isinstance(other, UnitaryOperator):
            return UnitaryOperator(self._data @ other._data, check=False)
        return NotImplemented


def unitarity_defect(a: np.ndarray) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a.conj().T @ a - np.eye(a.shape[0]))))


@dataclass(frozen=True)
class GeneratorParams:
    """Real coordinates of a Hermitian generator.

    Layout: ``dim`` diagonal entries, then one (real, imaginary) pair for each
    strictly-upper-triangular entry in row-major order.
    """

    dim: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if v.size != self.dim**2:
            raise ValidationError("generator-length", f"expected {self.dim**2} values, got {v.size}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, dim: int) -> "GeneratorParams":
        return cls(dim, np.zeros(dim * dim))


# ---------------------------------------------------------------------------
# spectral helpers


def _canonical_phase(vecs: np.ndarray) -> np.ndarray:
    # largest-modulus component (first index on ties) made real positive
    out = vecs.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        mags = np.abs(col)
        k = int(np.argmax(mags >= mags.max() - 1e-12))
        out[:, j] = col * (np.conj(col[k]) / abs(col[k]))
    return out


def _cluster_basis(vecs: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of span(vecs): Gram-Schmidt of the
    projector applied to standard basis vectors."""
    n, m = vecs.shape
    proj = vecs @ vecs.conj().T
    basis: list[np.ndarray] = []
    for k in range(n):
        v = proj[:, k].copy()
        for b in basis:
            v -= (b.conj() @ v) * b
        norm = np.linalg.norm(v)
        if norm > 1e-8:
            basis.append(v / norm)
            if len(basis) == m:
                break
    return np.column_stack(basis)


def eigh_canonical(a) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and deterministic eigenvectors of a Hermitian matrix.

    Eigenvectors inside a degenerate cluster (gap below ``DEGENERACY_GAP``)
    are re-orthonormalized independently of the LAPACK output.
    """
    a = np.asarray(a)
    a = (a + a.conj().T) / 2
    w, v = np.linalg.eigh(a)
    start = 0
    for stop in range(1, len(w) + 1):
        if stop == len(w) or w[stop] - w[stop - 1] >= DEGENERACY_GAP:
            if stop - start > 1:
                v[:, start:stop] = _cluster_basis(v[:, start:stop])
            start = stop
    return w, _canonical_phase(v)


# ---------------------------------------------------------------------------
# operations


def _check_same_dim(a: Operator, b: Operator, what: str) -> None:
    if a.dim != b.dim:
        raise ValidationError("dim-match", f"{what}: dimensions {a.dim} and {b.dim} differ")


def tensor(a: Operator, b: Operator, max_dim: int | None = None) -> Operator:
    """Kronecker product ``a ⊗ b`` of two operators of the same kind."""
    if type(a) is not type(b):
        raise ValidationError("same-kind", f"cannot tensor {type(a).__name__} with {type(b).__name__}")
    cap = max_joint_dim() if max_dim is None else max_dim
    if a.dim * b.dim > cap:
        raise ValidationError("max-dim", f"joint dimension {a.dim * b.dim} exceeds cap {cap}")
    return type(a)(np.kron(a.data, b.data), check=False)


def _reduce(m: np.ndarray, keep: str, dims: tuple[int, int]) -> np.ndarray:
    d_b, d_c = dims
    m4 = m.reshape(d_b, d_c, d_b, d_c)
    if keep == "B":
        return np.einsum("ijkj->ik", m4)
    return np.einsum("ijik->jk", m4)


def partial_trace(rho: Operator, keep: str, dims: tuple[int, int]):
    """Reduced operator on subsystem ``keep`` ('B' or 'C') of a B⊗C operator."""
    if keep not in ("B", "C"):
        raise ValidationError("subsystem", f"keep must be 'B' or 'C', got {keep!r}")
    d_b, d_c = (int(d) for d in dims)
    if d_b < 1 or d_c < 1 or d_b * d_c != rho.dim:
        raise ValidationError("dims", f"dims {dims} inconsistent with dimension {rho.dim}")
    out = _reduce(rho.data, keep, (d_b, d_c))
    return type(rho)(out, check=False)


def evolve(rho: DensityMatrix, U: UnitaryOperator, tol: Tolerances = DEFAULT_TOLERANCES) -> DensityMatrix:
    """Return ``U rho U^dag``; U must satisfy the unitarity invariant."""
    _check_same_dim(rho, U, "evolve")
    u = U.data
    defect = unitarity_defect(u)
    if defect > tol.uni:
        raise ValidationError("unitary", f"evolve: max|U^dag U - 1| = {defect:.3e}")
    out = u @ rho.data @ u.conj().T
    return DensityMatrix((out + out.conj().T) / 2, check=False)


def energy(rho: Operator, H: Operator) -> float:
    """Mean energy ``tr[rho H]``."""
    _check_same_dim(rho, H, "energy")
    return float(np.einsum("ij,ji->", rho.data, H.data).real)


def entropy_of_spectrum(lam) -> float:
    lam = np.asarray(lam, dtype=float)
    lam = lam[lam > 0]
    return float(-np.sum(lam * np.log(lam)))


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """Von Neumann entropy in nats with the convention 0 ln 0 = 0."""
    lam = np.clip(np.linalg.eigvalsh(rho.data), 0.0, None)
    return max(entropy_of_spectrum(lam), 0.0)


def generator_matrix(values: np.ndarray, dim: int) -> np.ndarray:
    iu = np.triu_indices(dim, 1)
    n_off = len(iu[0])
    g = np.zeros((dim, dim), dtype=complex)
    g[np.diag_indices(dim)] = values[:dim]
    pairs = values[dim:].reshape(n_off, 2)
    upper = pairs[:, 0] + 1j * pairs[:, 1]
    g[iu] = upper
    g[iu[1], iu[0]] = upper.conj()
    return g


def unitary_from_generator(p: GeneratorParams) -> UnitaryOperator:
    """``exp(iG)`` for the Hermitian generator assembled from ``p``."""
    g = generator_matrix(p.values, p.dim)
    w, v = np.linalg.eigh(g)
    return UnitaryOperator((v * np.exp(1j * w)) @ v.conj().T, check=False)


def generator_from_unitary(U: UnitaryOperator) -> GeneratorParams:
    """A preimage of ``U`` under :func:`unitary_from_generator`."""
    from scipy.linalg import schur

    t, z = schur(U.data.astype(complex), output="complex")
    theta = np.angle(np.diag(t))
    g = (z * theta) @ z.conj().T
    g = (g + g.conj().T) / 2
    d = U.dim
    iu = np.triu_indices(d, 1)
    off = np.column_stack([g[iu].real, g[iu].imag]).ravel()
    return GeneratorParams(d, np.concatenate([np.diag(g).real, off]))


def swap_unitary(d: int) -> UnitaryOperator:
    """Swap of two ``d``-level systems: ``|a⟩⊗|b⟩ ↦ |b⟩⊗|a⟩``."""
    if d < 1:
        raise ValidationError("dims", "swap dimension must be positive")
    s = np.zeros((d * d, d * d))
    for a in range(d):
        for b in range(d):
            s[b * d + a, a * d + b] = 1.0
    return UnitaryOperator(s, check=False)


def identity(d: int) -> UnitaryOperator:
    return UnitaryOperator(np.eye(d), check=False)


def maximally_mixed(d: int) -> DensityMatrix:
    return DensityMatrix(np.eye(d) / d, check=False)


def fidelity_with_vector(rho: DensityMatrix, psi) -> float:
    v = np.asarray(psi, dtype=complex)
    return float((v.conj() @ rho.data @ v).real)


# ---------------------------------------------------------------------------
# JSON matrix format: {"dim": n, "entries": [[[re, im], ...], ...]} row-major


def matrix_to_json(m, digits: int = 17) -> dict:
    a = np.asarray(m, dtype=complex)
    fmt = (lambda x: float(f"{x:.{digits}g}"))
    return {
        "dim": int(a.shape[0]),
        "entries": [[[fmt(z.real), fmt(z.imag)] for z in row] for row in a],
    }


def matrix_from_json(obj) -> np.ndarray:
    try:
        dim = int(obj["dim"])
        entries = obj["entries"]
    except (KeyError, TypeError) as exc:
        raise ValidationError("matrix-format", f"matrix object needs 'dim' and 'entries' ({exc})") from None
    arr = np.asarray(entries, dtype=float)
    if arr.shape != (dim, dim, 2):
        raise ValidationError("matrix-format", f"entries shape {arr.shape} does not match dim {dim}")
    return arr[..., 0] + 1j * arr[..., 1]
