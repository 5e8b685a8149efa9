"""Shared dense linear algebra and constrained-direction solvers.

Everything here is plain numerics with no quantum semantics: symmetric
tridiagonal eigensolves, eigendecomposition-based matrix exponentials, and
the projected steepest-descent step used by the flow engines. Matrices are
small (dimension a few thousand at most), so dense eigendecomposition is
the single primitive for every exponential.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

HERMITICITY_TOL = 1e-12
DEGENERACY_GAP = 1e-9


@dataclass(frozen=True)
class SymTridiag:
    """Real symmetric tridiagonal matrix stored as diagonal and off-diagonal bands."""

    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        diag = np.asarray(self.diag, dtype=float)
        offdiag = np.asarray(self.offdiag, dtype=float)
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "offdiag", offdiag)
        if offdiag.shape != (max(diag.size - 1, 0),):
            raise ValueError(
                f"off-diagonal length {offdiag.size} does not match dimension {diag.size}"
            )
        if not (np.all(np.isfinite(diag)) and np.all(np.isfinite(offdiag))):
            raise ValueError("tridiagonal entries must be finite")

    @property
    def n(self) -> int:
        return self.diag.size

    def to_dense(self) -> np.ndarray:
        m = np.diag(self.diag)
        if self.offdiag.size:
            m += np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)
        return m


@dataclass(frozen=True)
class Spectrum:
    """Sorted real eigenvalues."""

    values: np.ndarray

    def __post_init__(self):
        values = np.sort(np.asarray(self.values, dtype=float))
        if values.size and not np.all(np.isfinite(values)):
            raise ValueError("spectrum must be finite")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class Propagator:
    """Unitary e^{-iHt} together with the time it was evaluated at."""

    u: np.ndarray
    t: float

    def __post_init__(self):
        u = np.asarray(self.u, dtype=complex)
        object.__setattr__(self, "u", u)
        dev = np.abs(u.conj().T @ u - np.eye(u.shape[0])).max()
        if dev > 1e-10:
            raise ValueError(f"matrix is not unitary (deviation {dev:.3e})")


@dataclass
class LinearConstraintSet:
    """Linear rows over a shared parameter vector, with right-hand sides.

    Rows with zero right-hand side express structure preservation; a nonzero
    right-hand side drives an inhomogeneous direction (for example advancing
    an interpolation parameter at unit rate).
    """

    rows: np.ndarray
    rhs: np.ndarray
    names: tuple | None = None

    def __post_init__(self):
        self.rows = np.atleast_2d(np.asarray(self.rows, dtype=float))
        self.rhs = np.asarray(self.rhs, dtype=float)
        if self.rows.shape[0] != self.rhs.size:
            raise ValueError("row count does not match right-hand side count")

    @property
    def n_params(self) -> int:
        return self.rows.shape[1]

    def homogeneous(self) -> bool:
        return bool(self.rhs.size == 0 or np.abs(self.rhs).max() == 0.0)


@dataclass
class DirectionResult:
    """Outcome of a constrained direction solve."""

    direction: np.ndarray
    stationary: bool
    constraint_rank: int
    objective_value: float = 0.0


class InfeasibleConstraints(ValueError):
    """Raised when a constraint system admits no solution; carries a rank report."""

    def __init__(self, message, rank=None, rows=None):
        super().__init__(message)
        self.rank = rank
        self.rows = rows


def eig_sym_tridiag(m: SymTridiag) -> tuple[Spectrum, np.ndarray]:
    """Eigendecomposition of a symmetric tridiagonal matrix.

    Returns the sorted spectrum and an orthonormal eigenvector matrix V with
    M = V diag(w) V^T. Eigenvectors inside a near-degenerate cluster (gap
    below 1e-9) are re-orthonormalized with a QR pass so downstream code can
    rely on orthonormality even when the backend returns a sloppy cluster.
    """
    if m.n == 0:
        raise ValueError("empty matrix")
    if m.n == 1:
        return Spectrum(m.diag.copy()), np.ones((1, 1))
    w, v = scipy.linalg.eigh_tridiagonal(m.diag, m.offdiag)
    v = _reorthonormalize_clusters(w, v)
    return Spectrum(w), v


def _reorthonormalize_clusters(w: np.ndarray, v: np.ndarray) -> np.ndarray:
    """QR-orthonormalize eigenvector columns within each degenerate cluster."""
    n = w.size
    start = 0
    for i in range(1, n + 1):
        if i == n or w[i] - w[i - 1] > DEGENERACY_GAP:
            if i - start > 1:
                q, _ = np.linalg.qr(v[:, start:i])
                v = v.copy()
                v[:, start:i] = q
            start = i
    return v


def propagator(h: np.ndarray, t: float) -> Propagator:
    """Evolution operator e^{-iHt} for a Hermitian matrix, via eigendecomposition."""
    h = np.asarray(h)
    dev = np.abs(h - h.conj().T).max() if h.size else 0.0
    scale = max(1.0, np.abs(h).max()) if h.size else 1.0
    if dev > HERMITICITY_TOL * scale:
        raise ValueError(f"matrix is not Hermitian (deviation {dev:.3e})")
    w, v = np.linalg.eigh(h)
    u = (v * np.exp(-1j * w * t)) @ v.conj().T
    return Propagator(u, t)


def antisym_exp(g: np.ndarray) -> np.ndarray:
    """Orthogonal exponential of a real antisymmetric matrix.

    Uses the Hermitian eigendecomposition of iG, so the result is orthogonal
    to machine precision with determinant +1.
    """
    g = np.asarray(g, dtype=float)
    dev = np.abs(g + g.T).max() if g.size else 0.0
    if dev > HERMITICITY_TOL * max(1.0, np.abs(g).max() if g.size else 1.0):
        raise ValueError(f"matrix is not antisymmetric (deviation {dev:.3e})")
    return propagator(1j * g, 1.0).u.real


def nullspace_basis(rows: np.ndarray, n_params: int) -> np.ndarray:
    """Orthonormal basis of the nullspace of a stack of constraint rows."""
    rows = np.atleast_2d(rows)
    if rows.size == 0 or rows.shape[0] == 0:
        return np.eye(n_params)
    return scipy.linalg.null_space(rows)


def solve_affine(constraints: LinearConstraintSet, residual_tol: float = 1e-8):
    """Minimum-norm solution of a (possibly redundant) linear system.

    Returns (solution, rank). Raises InfeasibleConstraints when the rows are
    inconsistent beyond residual_tol, carrying the rank report.
    """
    sol, _, rank, _ = np.linalg.lstsq(constraints.rows, constraints.rhs, rcond=None)
    residual = constraints.rows @ sol - constraints.rhs
    worst = np.abs(residual).max() if residual.size else 0.0
    scale = max(1.0, np.abs(constraints.rhs).max() if constraints.rhs.size else 0.0)
    if worst > residual_tol * scale:
        raise InfeasibleConstraints(
            f"constraint system inconsistent (residual {worst:.3e}, rank {rank} "
            f"of {constraints.rows.shape[0]} rows over {constraints.n_params} parameters)",
            rank=rank,
            rows=constraints.rows.shape[0],
        )
    return sol, rank


def constrained_direction(
    constraints: LinearConstraintSet,
    gradient: np.ndarray,
    delta: float,
    norm_mode: str = "two_norm",
    param_norm_scale: float = 1.0,
) -> DirectionResult:
    """Steepest-descent direction within the nullspace of homogeneous constraints.

    The objective is the linear functional gradient . params; the returned
    vector v satisfies every constraint row, has gradient . v <= 0, and is
    bounded by delta. In two_norm mode the bound is param_norm_scale * ||v||_2
    <= delta (callers building antisymmetric generators from packed upper
    triangles pass sqrt(2) so the bound applies to the Frobenius norm of the
    assembled generator). In inf_norm mode the largest entry magnitude is
    delta: the projected gradient's sign vector is re-projected onto the
    feasible space and rescaled, which maximizes descent per unit sup-norm.

    A zero projected gradient (or an empty feasible space) is reported via
    the stationary flag rather than an exception.
    """
    if delta <= 0:
        raise ValueError("step bound must be positive")
    if not constraints.homogeneous():
        raise ValueError("constrained_direction expects homogeneous constraints")
    gradient = np.asarray(gradient, dtype=float)
    n = constraints.n_params
    if gradient.shape != (n,):
        raise ValueError("gradient length does not match parameter count")

    basis = nullspace_basis(constraints.rows, n)
    rank = n - basis.shape[1] if basis.size else n
    if basis.size == 0 or basis.shape[1] == 0:
        return DirectionResult(np.zeros(n), True, rank)

    coeffs = basis.T @ gradient
    g_proj = basis @ coeffs
    gnorm = np.linalg.norm(g_proj)
    if gnorm < 1e-14 * max(1.0, np.linalg.norm(gradient)):
        return DirectionResult(np.zeros(n), True, rank)

    if norm_mode == "two_norm":
        v = -(delta / param_norm_scale) * g_proj / gnorm
    elif norm_mode == "inf_norm":
        signs = -np.sign(g_proj)
        s_proj = basis @ (basis.T @ signs)
        descent = gradient @ s_proj
        if descent >= 0 or np.abs(s_proj).max() < 1e-14:
            v = -(delta / param_norm_scale) * g_proj / gnorm
        else:
            v = s_proj * (delta / np.abs(s_proj).max())
    else:
        raise ValueError(f"unknown norm_mode {norm_mode!r}")

    return DirectionResult(v, False, rank, objective_value=float(gradient @ v))
