"""Kernel regression with subgroup-mean equality as noiseless pseudo-observations.

For a constraint between groups A and B the linear functional
``L f = mean_A f - mean_B f`` is appended to the training observations with
value 0 and no noise. Its covariances with the latent function are empirical
averages of the kernel over the group samples, giving the bordered Gram
matrix::

    [ K(X, X) + s2 I   Q^T ]
    [ Q                S   ]

with ``Q[c, i] = mean_{a in A_c} k(a, x_i) - mean_{b in B_c} k(b, x_i)`` and
``S[c, d]`` the corresponding double average. Prediction is the usual
posterior mean against the bordered system.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .config import DEFAULTS, Tolerances
from .errors import DataError, NumericalError, ShapeError
from .linalg_core import solve_augmented_system

FAMILIES = ("squared-exponential", "linear", "polynomial")


@dataclass(frozen=True)
class KernelFunction:
    """Stationary or dot-product kernel with fixed hyperparameters.

    * ``squared-exponential``: ``variance * exp(-|u - v|^2 / (2 lengthscale^2))``
    * ``linear``: ``variance * u.v``
    * ``polynomial``: ``variance * (u.v + offset) ** degree``
    """

    family: str = "squared-exponential"
    lengthscale: float = 1.0
    variance: float = 1.0
    degree: int = 2
    offset: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"kernel family must be one of {FAMILIES}, got {self.family!r}")
        if self.lengthscale <= 0 or self.variance <= 0:
            raise ValueError("lengthscale and variance must be positive")
        if self.family == "polynomial" and (self.degree < 1 or self.offset < 0):
            raise ValueError("polynomial kernel needs degree >= 1 and offset >= 0")

    def __call__(self, U, V=None) -> np.ndarray:
        same = V is None
        U = np.atleast_2d(np.asarray(U, dtype=float))
        V = U if same else np.atleast_2d(np.asarray(V, dtype=float))
        if U.shape[1] != V.shape[1]:
            raise ShapeError("kernel inputs differ in width", expected=U.shape[1], got=V.shape[1])
        if self.family == "squared-exponential":
            sq = (
                np.sum(U**2, axis=1)[:, None]
                + np.sum(V**2, axis=1)[None, :]
                - 2.0 * U @ V.T
            )
            G = self.variance * np.exp(-np.maximum(sq, 0.0) / (2.0 * self.lengthscale**2))
        elif self.family == "linear":
            G = self.variance * (U @ V.T)
        else:
            G = self.variance * (U @ V.T + self.offset) ** self.degree
        if same:
            G = 0.5 * (G + G.T)
            if self.family == "squared-exponential":
                np.fill_diagonal(G, self.variance)
        return G


@dataclass(frozen=True)
class QuadratureConstraint:
    """Empirical ``q = p_A - p_B`` given by two sample sets of input rows."""

    samples_a: np.ndarray
    samples_b: np.ndarray
    name: str = ""

    def __post_init__(self):
        for attr in ("samples_a", "samples_b"):
            s = np.atleast_2d(np.asarray(getattr(self, attr), dtype=float))
            if s.shape[0] == 0 or s.size == 0:
                raise DataError(f"quadrature constraint {self.name!r} has an empty sample set ({attr})")
            if not np.all(np.isfinite(s)):
                raise NumericalError(f"quadrature constraint {self.name!r} has non-finite samples")
            object.__setattr__(self, attr, s)


def empirical_quadrature_row(kf: KernelFunction, constraint: QuadratureConstraint, X) -> np.ndarray:
    """Entry i is ``mean_a k(a, x_i) - mean_b k(b, x_i)``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return kf(constraint.samples_a, X).mean(axis=0) - kf(constraint.samples_b, X).mean(axis=0)


def quadrature_self_term(kf: KernelFunction, c1: QuadratureConstraint, c2: QuadratureConstraint) -> float:
    """Double empirical average of ``q1(x) k(x, x') q2(x')``."""
    return float(
        kf(c1.samples_a, c2.samples_a).mean()
        - kf(c1.samples_a, c2.samples_b).mean()
        - kf(c1.samples_b, c2.samples_a).mean()
        + kf(c1.samples_b, c2.samples_b).mean()
    )


def augmented_gram(kf: KernelFunction, X, sigma_n_sq: float, constraints: Sequence[QuadratureConstraint]) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n, C = X.shape[0], len(constraints)
    G = np.zeros((n + C, n + C))
    G[:n, :n] = kf(X) + sigma_n_sq * np.eye(n)
    for c, con in enumerate(constraints):
        row = empirical_quadrature_row(kf, con, X)
        G[n + c, :n] = row
        G[:n, n + c] = row
        for d in range(c, C):
            G[n + c, n + d] = G[n + d, n + c] = quadrature_self_term(kf, con, constraints[d])
    return G


@dataclass(frozen=True, eq=False)
class ConstrainedKernelSystem:
    X: np.ndarray
    y: np.ndarray
    kernel: KernelFunction
    sigma_n_sq: float
    constraints: tuple[QuadratureConstraint, ...]
    gram: np.ndarray
    weights: np.ndarray
    y_offset: float = 0.0
    jitter: float = 0.0

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)


def _cholesky_ok(G):
    try:
        factor = scipy.linalg.cho_factor(G, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        return None
    d = np.abs(np.diag(factor[0]))
    # tiny pivots mean the matrix is numerically singular
    if d.min() ** 2 <= G.shape[0] * np.finfo(float).eps * d.max() ** 2:
        return None
    return factor


def fit(X, y, kf: KernelFunction, sigma_n_sq: float = 0.0,
        constraints: Sequence[QuadratureConstraint] = (), center: bool = False,
        tol: Tolerances = DEFAULTS) -> ConstrainedKernelSystem:
    """Solve the bordered system for the posterior-mean weights.

    With ``center=True`` the target mean is removed before fitting and added
    back at prediction time; it does not change any group-mean gap.

    Factorization order: Cholesky of the bordered matrix; on failure, retry
    with ``tol.jitter * trace / n`` on the training diagonal only; if that
    still fails and the matrix is PSD within ``tol.psd``, take the
    minimum-norm solution. An indefinite matrix raises :class:`NumericalError`.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if y.shape != (X.shape[0],):
        raise ShapeError("targets must match rows of X", expected=(X.shape[0],), got=y.shape)
    if X.shape[0] == 0:
        raise DataError("cannot fit on an empty dataset")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NumericalError("training inputs contain non-finite values")
    if not np.isfinite(sigma_n_sq) or sigma_n_sq < 0:
        raise ValueError(f"sigma_n_sq must be a finite non-negative number, got {sigma_n_sq}")
    constraints = tuple(constraints)
    for c in constraints:
        if c.samples_a.shape[1] != X.shape[1] or c.samples_b.shape[1] != X.shape[1]:
            raise ShapeError("constraint samples must match training width", expected=X.shape[1])

    n = X.shape[0]
    offset = float(y.mean()) if center else 0.0
    rhs = np.concatenate([y - offset, np.zeros(len(constraints))])
    G = augmented_gram(kf, X, sigma_n_sq, constraints)
    jitter = 0.0
    factor = _cholesky_ok(G)
    if factor is None:
        jitter = tol.jitter * max(np.trace(G[:n, :n]) / n, np.finfo(float).tiny)
        G = G.copy()
        G[np.arange(n), np.arange(n)] += jitter
        factor = _cholesky_ok(G)
    if factor is not None:
        weights = scipy.linalg.cho_solve(factor, rhs, check_finite=False)
    else:
        eig = np.linalg.eigvalsh(G)
        if eig[0] < -tol.psd * max(abs(eig[-1]), 1.0):
            raise NumericalError(
                f"augmented Gram matrix is indefinite (min eigenvalue {eig[0]:.3g}); "
                "increase sigma_n_sq or the jitter tolerance"
            )
        weights = solve_augmented_system(G, rhs, sv_cutoff=tol.sv_cutoff)
    return ConstrainedKernelSystem(X, y, kf, float(sigma_n_sq), constraints, G, weights, offset, jitter)


def predict(system: ConstrainedKernelSystem, x_star) -> np.ndarray:
    """Posterior mean at each row of `x_star` (a single row gives a length-1 array)."""
    Xs = np.atleast_2d(np.asarray(x_star, dtype=float))
    n = system.X.shape[0]
    out = system.kernel(Xs, system.X) @ system.weights[:n]
    for c, con in enumerate(system.constraints):
        out = out + empirical_quadrature_row(system.kernel, con, Xs) * system.weights[n + c]
    return out + system.y_offset


def group_mean_gap(system: ConstrainedKernelSystem, constraint: QuadratureConstraint) -> float:
    """Mean prediction over the A samples minus mean over the B samples."""
    return float(predict(system, constraint.samples_a).mean() - predict(system, constraint.samples_b).mean())


def gaussian_example_matrix(sigma_a: float, sigma_b: float, rho: float, sigma_n_sq: float) -> np.ndarray:
    """The 3x3 matrix of the two-coordinate worked example, in its reference form.

    Row/column 0 is the noiseless constrained difference, rows 1 and 2 the
    noisy observations of the two coordinates. The border carries
    ``sigma_b^2 - rho s_a s_b`` for the second coordinate, so this is a
    valid covariance only in special cases (at ``rho = 0`` it describes
    ``a + b``); :func:`gaussian_difference_covariance` is the version
    derived strictly from ``d = a - b``.
    """
    sa2, sb2, c = sigma_a**2, sigma_b**2, rho * sigma_a * sigma_b
    return np.array([
        [sa2 + sb2 - 2 * c, sa2 - c, sb2 - c],
        [sa2 - c, sigma_n_sq + sa2, c],
        [sb2 - c, c, sigma_n_sq + sb2],
    ])


def gaussian_difference_covariance(sigma_a: float, sigma_b: float, rho: float, sigma_n_sq: float) -> np.ndarray:
    """Covariance of ``(a - b, a + e_a, b + e_b)`` for a zero-mean bivariate Gaussian."""
    sa2, sb2, c = sigma_a**2, sigma_b**2, rho * sigma_a * sigma_b
    return np.array([
        [sa2 + sb2 - 2 * c, sa2 - c, c - sb2],
        [sa2 - c, sigma_n_sq + sa2, c],
        [c - sb2, c, sigma_n_sq + sb2],
    ])


def condition_on_observations(cov: np.ndarray, sigma_n_sq: float, observed) -> np.ndarray:
    """Posterior mean of the three latent coordinates given all three observations.

    The latent covariance is `cov` with the noise removed from the diagonal of
    rows 1 and 2; row 0 is noiseless already.
    """
    obs = np.asarray(observed, dtype=float)
    noise = np.array([0.0, sigma_n_sq, sigma_n_sq])
    # (cov - N) cov^-1 obs rewritten as obs - N cov^-1 obs; the noiseless row stays exact
    return obs - noise * solve_augmented_system(np.asarray(cov, dtype=float), obs)
