"""Numerical defaults shared by every solver in the package."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    """Solver tolerances. Every field can be overridden per call.

    sv_cutoff
        Singular values below ``sv_cutoff * s_max`` are treated as zero when
        revealing the rank of a constraint matrix.
    symmetry
        Maximum relative asymmetry accepted by the augmented-system solver.
    jitter
        Diagonal jitter, relative to ``trace / n``, added to a kernel training
        block whose factorization fails.
    psd
        Relative negative-eigenvalue slack before a Gram matrix is declared
        indefinite.
    small_group
        Groups with fewer rows than this trigger a reliability warning.
    """

    sv_cutoff: float = 1e-10
    symmetry: float = 1e-10
    jitter: float = 1e-8
    psd: float = 1e-10
    small_group: int = 30


DEFAULTS = Tolerances()
