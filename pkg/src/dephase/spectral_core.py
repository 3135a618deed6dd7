"""Amplitude/probability vectors, unitary maps, and their phase-averaged counterparts.

A unitary map ``A' = U A`` acting on complex amplitudes induces, once all
amplitude phases are averaged out, a linear map on probabilities
``P' = T P`` whose matrix is the elementwise squared modulus of ``U``.
That matrix is bistochastic (nonnegative, unit row and column sums), so the
phase-averaged dynamics is a doubly stochastic, entropy-non-decreasing and
generally irreversible map.  This module provides the value types, the
conversion, and a Monte Carlo oracle that estimates the phase average by
sampling uniform phases directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

__all__ = [
    "AmplitudeVector",
    "ProbabilityVector",
    "UnitaryMatrix",
    "TransitionMatrix",
    "PhaseAverageResult",
    "hadamard_square",
    "apply_noncoherent",
    "phase_average_mc",
    "random_hermitian",
    "random_unitary",
    "shannon_entropy",
]

#: Tolerance for validating invariants of user-supplied data.
VALIDATION_TOL = 1e-10

#: Tolerance expected from exact arithmetic paths (construction by the library).
EXACT_TOL = 1e-12


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class AmplitudeVector:
    """Complex amplitudes of the microstates, normalized to unit total probability."""

    entries: np.ndarray

    def __post_init__(self):
        entries = _readonly(np.asarray(self.entries, dtype=complex))
        if entries.ndim != 1 or entries.size == 0:
            raise ValidationError("amplitudes must form a nonempty 1-d sequence")
        norm_sq = float(np.sum(np.abs(entries) ** 2))
        if abs(norm_sq - 1.0) > VALIDATION_TOL:
            raise ValidationError(
                f"amplitude norm violated: sum |A|^2 = {norm_sq!r} differs from 1 "
                f"by {abs(norm_sq - 1.0):.3e} (tolerance {VALIDATION_TOL:g})"
            )
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        return self.entries.size

    def probabilities(self) -> "ProbabilityVector":
        return ProbabilityVector(np.abs(self.entries) ** 2)

    @classmethod
    def from_probabilities(
        cls, p: "ProbabilityVector", phases: np.ndarray | None = None
    ) -> "AmplitudeVector":
        """Attach phases (zero by default) to the square roots of probabilities."""
        mag = np.sqrt(p.entries)
        if phases is None:
            return cls(mag.astype(complex))
        phases = np.asarray(phases, dtype=float)
        if phases.shape != mag.shape:
            raise ValidationError("phases must have one angle per state")
        return cls(mag * np.exp(1j * phases))


@dataclass(frozen=True)
class ProbabilityVector:
    """Nonnegative entries summing to one."""

    entries: np.ndarray

    def __post_init__(self):
        entries = _readonly(np.asarray(self.entries, dtype=float))
        if entries.ndim != 1 or entries.size == 0:
            raise ValidationError("probabilities must form a nonempty 1-d sequence")
        if np.any(entries < 0.0):
            worst = int(np.argmin(entries))
            raise ValidationError(
                f"probability entry {worst} is negative: {entries[worst]!r}"
            )
        total = float(entries.sum())
        if abs(total - 1.0) > VALIDATION_TOL:
            raise ValidationError(
                f"probabilities sum to {total!r}, off by {abs(total - 1.0):.3e} "
                f"(tolerance {VALIDATION_TOL:g})"
            )
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        return self.entries.size

    @classmethod
    def delta(cls, dim: int, index: int) -> "ProbabilityVector":
        e = np.zeros(dim)
        e[index] = 1.0
        return cls(e)

    @classmethod
    def uniform(cls, dim: int) -> "ProbabilityVector":
        return cls(np.full(dim, 1.0 / dim))


@dataclass(frozen=True)
class UnitaryMatrix:
    """Square complex matrix with U^dagger U = I."""

    matrix: np.ndarray

    def __post_init__(self):
        m = _readonly(np.asarray(self.matrix, dtype=complex))
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise ValidationError("unitary matrix must be square and nonempty")
        dev = np.abs(m.conj().T @ m - np.eye(m.shape[0]))
        worst = np.unravel_index(int(np.argmax(dev)), dev.shape)
        if dev[worst] > VALIDATION_TOL:
            raise ValidationError(
                f"matrix is not unitary: |(U^H U - I)[{worst[0]},{worst[1]}]| = "
                f"{dev[worst]:.3e} exceeds {VALIDATION_TOL:g}"
            )
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class TransitionMatrix:
    """Bistochastic matrix: entries in [0, 1], unit row and column sums."""

    matrix: np.ndarray

    def __post_init__(self):
        m = _readonly(np.asarray(self.matrix, dtype=float))
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise ValidationError("transition matrix must be square and nonempty")
        if np.any(m < 0.0) or np.any(m > 1.0):
            raise ValidationError("transition matrix entries must lie in [0, 1]")
        row_dev = np.abs(m.sum(axis=1) - 1.0).max()
        col_dev = np.abs(m.sum(axis=0) - 1.0).max()
        if max(row_dev, col_dev) > VALIDATION_TOL:
            raise ValidationError(
                f"matrix is not bistochastic: max row-sum deviation {row_dev:.3e}, "
                f"max column-sum deviation {col_dev:.3e} (tolerance {VALIDATION_TOL:g})"
            )
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class PhaseAverageResult:
    """Monte Carlo estimate of a phase-averaged step with per-entry standard errors."""

    estimate: ProbabilityVector
    stderr: np.ndarray = field(repr=False)
    samples: int = 0


def hadamard_square(u: UnitaryMatrix) -> TransitionMatrix:
    """Elementwise squared modulus of a unitary matrix.

    This is the transfer matrix of the phase-averaged step: unitarity of the
    input makes every row and column sum to one exactly, so the result always
    satisfies the bistochastic invariant.
    """
    return TransitionMatrix(np.abs(u.matrix) ** 2)


def apply_noncoherent(t: TransitionMatrix, p: ProbabilityVector) -> ProbabilityVector:
    """One phase-averaged step ``P' = T P``."""
    if t.dim != p.dim:
        raise ValidationError(
            f"dimension mismatch: transition matrix is {t.dim}x{t.dim}, "
            f"probability vector has {p.dim} entries"
        )
    out = t.matrix @ p.entries
    # Column sums are 1, so the total is conserved; rounding can leave
    # harmless negative zeros behind.
    return ProbabilityVector(np.where(out < 0.0, 0.0, out))


def phase_average_mc(
    u: UnitaryMatrix,
    magnitudes: ProbabilityVector,
    samples: int,
    seed: int,
) -> PhaseAverageResult:
    """Estimate the phase-averaged step by direct sampling of uniform phases.

    Each sample draws one phase per state, i.i.d. uniform on [0, 2pi), forms
    amplitudes ``sqrt(P_b) exp(i phi_b)``, applies ``U`` and records the
    squared moduli.  The mean over samples estimates ``hadamard_square(U) P``
    and the standard error is the sample standard deviation divided by
    ``sqrt(samples)``.

    The generator is counter-based (Philox keyed by ``seed``): sample ``k``
    consumes the phase block ``[k*N, (k+1)*N)`` of the stream, so the estimate
    is reproducible for a given ``(seed, samples)`` no matter how the samples
    are scheduled.  States with zero magnitude still consume a phase; the draw
    has no observable effect since the amplitude is exactly zero.
    """
    if samples < 1:
        raise ValidationError("phase averaging needs at least one sample")
    if u.dim != magnitudes.dim:
        raise ValidationError(
            f"dimension mismatch: unitary is {u.dim}x{u.dim}, "
            f"magnitudes have {magnitudes.dim} entries"
        )
    n = u.dim
    rng = np.random.Generator(np.random.Philox(key=seed))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(samples, n))
    amps = np.sqrt(magnitudes.entries)[None, :] * np.exp(1j * phases)
    out = np.abs(u.matrix @ amps.T) ** 2  # (n, samples)
    mean = out.mean(axis=1)
    if samples > 1:
        stderr = out.std(axis=1, ddof=1) / np.sqrt(samples)
    else:
        stderr = np.full(n, np.inf)
    mean = np.where(mean < 0.0, 0.0, mean)
    return PhaseAverageResult(ProbabilityVector(mean), stderr, samples)


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Hermitian matrix with standard-normal entries (real diagonal, complex off-diagonal).

    Off-diagonal entries have variance ``scale**2`` (real and imaginary parts
    each ``scale**2/2``); diagonal entries are real with variance ``scale**2``.
    """
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    h = (x + x.conj().T) / 2.0
    np.fill_diagonal(h, rng.normal(size=dim))
    return h * scale


def random_unitary(dim: int, seed: int | np.random.Generator, t: float = 1.0) -> UnitaryMatrix:
    """Unitary ``exp(i H t)`` for a seeded random Hermitian generator ``H``.

    Computed through the eigendecomposition of ``H`` so the result is unitary
    to machine precision at any size.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    h = random_hermitian(dim, rng)
    w, v = np.linalg.eigh(h)
    u = (v * np.exp(1j * w * t)) @ v.conj().T
    return UnitaryMatrix(u)


def shannon_entropy(p: ProbabilityVector | np.ndarray) -> float:
    """Shannon entropy ``-sum P ln P`` with the convention 0 ln 0 = 0."""
    entries = p.entries if isinstance(p, ProbabilityVector) else np.asarray(p, dtype=float)
    pos = entries[entries > 0.0]
    return float(-np.sum(pos * np.log(pos)))
