"""Dense linear algebra behind the fairness projection.

The central operation removes from a leaf-value vector ``y`` its component in
the column space of a constraint matrix ``Z``::

    y_hat = y - Z (Z^T Z)^+ Z^T y

which is the L2-closest vector to ``y`` with ``Z^T y_hat = 0``. The
pseudo-inverse is realised through a thin SVD of ``Z`` so that linearly
dependent constraints (intersections plus their marginals, say) collapse to
the same projector instead of producing a singular ``Z^T Z``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .config import DEFAULTS
from .errors import NumericalError, ShapeError

__all__ = [
    "ProjectionResult",
    "project_onto_nullspace",
    "noisy_update",
    "single_constraint_update",
    "solve_augmented_system",
    "column_basis",
]


@dataclass(frozen=True)
class ProjectionResult:
    perturbed_values: np.ndarray
    residual_norms: np.ndarray
    effective_rank: int
    perturbation_norm: float
    singular_values: np.ndarray


def _as_vector(y, name="y") -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ShapeError(f"{name} must be one-dimensional", expected="(L,)", got=y.shape)
    if y.size == 0:
        raise ShapeError(f"{name} must be non-empty", expected="L >= 1", got=0)
    if not np.all(np.isfinite(y)):
        raise NumericalError(f"{name} contains non-finite entries")
    return y


def _as_constraints(Z, n_rows: int) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    if Z.ndim != 2 or Z.shape[0] != n_rows:
        raise ShapeError("constraint matrix rows must match y", expected=(n_rows, "C"), got=Z.shape)
    if Z.shape[1] == 0:
        raise ShapeError("constraint matrix needs at least one column", expected="C >= 1", got=0)
    if not np.all(np.isfinite(Z)):
        raise NumericalError("constraint matrix contains non-finite entries")
    return Z


def _check_cutoff(sv_cutoff):
    if sv_cutoff is None:
        return DEFAULTS.sv_cutoff
    if not 0.0 < sv_cutoff < 1.0:
        raise ValueError(f"sv_cutoff must lie in (0, 1), got {sv_cutoff}")
    return float(sv_cutoff)


def column_basis(Z, sv_cutoff=None) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal basis of the numerically significant column space of `Z`.

    Returns ``(U_r, s)`` where ``U_r`` is ``L x r`` and ``s`` holds all
    singular values in decreasing order.
    """
    sv_cutoff = _check_cutoff(sv_cutoff)
    Z = np.asarray(Z, dtype=float)
    if not Z.any():
        return np.zeros((Z.shape[0], 0)), np.zeros(min(Z.shape))
    U, s, _ = np.linalg.svd(Z, full_matrices=False)
    rank = int(np.count_nonzero(s > sv_cutoff * s[0]))
    return U[:, :rank], s


def project_onto_nullspace(y, Z, sv_cutoff=None) -> ProjectionResult:
    """Closest vector to `y` (in L2) satisfying ``Z^T y_hat = 0``.

    Parameters
    ----------
    y : array_like, shape (L,)
        Values to perturb.
    Z : array_like, shape (L, C)
        One column per mean-equality constraint. A 1-D array is read as a
        single column.
    sv_cutoff : float, optional
        Relative singular-value cutoff in (0, 1); defaults to
        ``DEFAULTS.sv_cutoff``.
    """
    y = _as_vector(y)
    Z = _as_constraints(Z, y.size)
    basis, s = column_basis(Z, sv_cutoff)
    y_hat = y - basis @ (basis.T @ y)
    return ProjectionResult(
        perturbed_values=y_hat,
        residual_norms=np.abs(Z.T @ y_hat),
        effective_rank=basis.shape[1],
        perturbation_norm=float(np.linalg.norm(y_hat - y)),
        singular_values=s,
    )


def noisy_update(y, Z, sigma_n_sq=0.0, sv_cutoff=None) -> np.ndarray:
    """Projection followed by the ``1 / (1 + sigma_n^2)`` shrinkage of a noisy leaf prior."""
    if not np.isfinite(sigma_n_sq) or sigma_n_sq < 0:
        raise ValueError(f"sigma_n_sq must be a finite non-negative number, got {sigma_n_sq}")
    projected = project_onto_nullspace(y, Z, sv_cutoff).perturbed_values
    if sigma_n_sq == 0:
        return projected
    return projected / (1.0 + sigma_n_sq)


def single_constraint_update(y, z) -> np.ndarray:
    """Rank-one special case ``y - z (z^T y) / (z^T z)``; identity when `z` is zero."""
    y = _as_vector(y)
    z = _as_vector(z, "z")
    if z.size != y.size:
        raise ShapeError("z must match y", expected=y.size, got=z.size)
    peak = np.max(np.abs(z))
    if peak == 0:
        return y.copy()
    z = z / peak  # guards z^T z against underflow
    return y - z * ((z @ y) / (z @ z))


def solve_augmented_system(K_aug, rhs, symmetry_tol=None, sv_cutoff=None) -> np.ndarray:
    """Solve a symmetric (possibly indefinite or singular) system ``K_aug x = rhs``.

    A Bunch-Kaufman factorization is tried first. If LAPACK reports the
    matrix as singular or ill-conditioned, the minimum-norm least-squares
    solution is returned instead.
    """
    symmetry_tol = DEFAULTS.symmetry if symmetry_tol is None else symmetry_tol
    sv_cutoff = _check_cutoff(sv_cutoff)
    K = np.asarray(K_aug, dtype=float)
    b = np.asarray(rhs, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ShapeError("augmented matrix must be square", got=K.shape)
    if b.shape[0] != K.shape[0]:
        raise ShapeError("rhs length must match matrix", expected=K.shape[0], got=b.shape)
    if not (np.all(np.isfinite(K)) and np.all(np.isfinite(b))):
        raise NumericalError("augmented system contains non-finite entries")
    scale = max(float(np.max(np.abs(K))), np.finfo(float).tiny)
    if np.max(np.abs(K - K.T)) > symmetry_tol * scale:
        raise ShapeError(
            "augmented matrix is not symmetric",
            expected=f"|K - K^T| <= {symmetry_tol:g} * {scale:g}",
            got=float(np.max(np.abs(K - K.T))),
        )
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        try:
            return scipy.linalg.solve(K, b, assume_a="sym")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning):
            pass
    x, *_ = scipy.linalg.lstsq(K, b, cond=sv_cutoff)
    return x
