"""Occupation-number kinetics on truncated Fock spaces.

States of a weakly interacting many-body system are labelled by occupation
numbers, one per single-particle mode (fermions capped at one, bosons at a
configurable ``n_max``).  Energy-conserving coupling processes generate
symmetric transition rates between those states; restricted to a fixed total
energy the chain relaxes to equidistribution.  Summing the same rates over
mode occupations yields closed rate equations for the mean occupation numbers
(the collision integrals of kinetic theory), and this module provides both
sides plus the machinery to compare them: exact state-space derivatives versus
collision right-hand sides, and microcanonical means versus collision fixed
points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.linalg import null_space

from .errors import NumericalError, ValidationError
from .master_evolution import RateMatrix, evolve_master, stationary_analysis
from .spectral_core import ProbabilityVector

__all__ = [
    "ModeSpec",
    "FockBasis",
    "ProcessSpec",
    "MeanOccupations",
    "KineticAssembly",
    "ConsistencyReport",
    "CommutativityReport",
    "build_kinetic_q",
    "mean_occupation",
    "mean_occupations",
    "product_state",
    "boltzmann_rhs_fermion_boson",
    "boltzmann_rhs_three_phonon",
    "collision_rhs",
    "collision_fixed_point",
    "verify_derivative_consistency",
    "diagram_commutativity",
    "fermi_dirac",
    "bose_einstein",
    "geometric_marginal",
    "thermal_marginal",
]

ENERGY_TOL = 1e-9

#: Kinetic matrices switch to sparse storage above this state-space size.
DENSE_KINETIC_LIMIT = 512


@dataclass(frozen=True)
class ModeSpec:
    """One single-particle mode: statistics, energy, and occupation cap."""

    statistics: str
    energy: float
    n_max: int

    def __post_init__(self):
        if self.statistics not in ("fermion", "boson"):
            raise ValidationError(
                f"statistics must be 'fermion' or 'boson', got {self.statistics!r}"
            )
        if self.statistics == "fermion" and self.n_max != 1:
            raise ValidationError("fermion modes must have n_max = 1")
        if self.statistics == "boson" and self.n_max < 1:
            raise ValidationError("boson modes need n_max >= 1")

    @classmethod
    def fermion(cls, energy: float) -> "ModeSpec":
        return cls("fermion", float(energy), 1)

    @classmethod
    def boson(cls, energy: float, n_max: int) -> "ModeSpec":
        return cls("boson", float(energy), int(n_max))


class FockBasis:
    """All occupation tuples within the per-mode caps, in stable lexicographic order.

    The first mode is the most significant digit: state ``<n_1, ..., n_m>``
    has index ``sum_i n_i * prod_{j>i} (cap_j + 1)``.  Index and occupation
    lookups are arithmetic, so bases with hundreds of thousands of states
    stay cheap.
    """

    def __init__(self, modes: Sequence[ModeSpec]):
        modes = tuple(modes)
        if not modes:
            raise ValidationError("basis needs at least one mode")
        self.modes = modes
        self._shape = tuple(m.n_max + 1 for m in modes)
        self.dim = int(np.prod(self._shape))
        self._table: np.ndarray | None = None

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def shape(self) -> tuple[int, ...]:
        return self._shape

    def index(self, occupations) -> int:
        occ = tuple(int(n) for n in occupations)
        if len(occ) != self.n_modes:
            raise ValidationError(
                f"expected {self.n_modes} occupation numbers, got {len(occ)}"
            )
        for n, cap in zip(occ, self._shape):
            if not (0 <= n < cap):
                raise ValidationError(f"occupation {occ} violates the per-mode caps")
        return int(np.ravel_multi_index(occ, self._shape))

    def occupations(self, index: int) -> tuple[int, ...]:
        if not (0 <= index < self.dim):
            raise ValidationError(f"state index {index} out of range [0, {self.dim})")
        return tuple(int(x) for x in np.unravel_index(index, self._shape))

    def occupation_table(self) -> np.ndarray:
        """(dim, n_modes) array of occupation numbers, cached."""
        if self._table is None:
            table = np.stack(
                np.unravel_index(np.arange(self.dim), self._shape), axis=1
            ).astype(np.int64)
            table.setflags(write=False)
            self._table = table
        return self._table

    def mode_energies(self) -> np.ndarray:
        return np.array([m.energy for m in self.modes])

    def state_energies(self) -> np.ndarray:
        """Total energy of every basis state."""
        return self.occupation_table() @ self.mode_energies()


@dataclass(frozen=True)
class ProcessSpec:
    """An energy-conserving coupling channel with a single base rate ``q``.

    Kinds:

    * ``fermion-boson`` with modes ``(lower, upper, boson)``: the fermion hops
      between the two levels, emitting or absorbing one boson
      (``E_upper - E_lower = E_boson``).
    * ``three-boson-merge`` with modes ``(b1, b2, b3)``: quanta of the first
      two modes merge into the third and back (``E_1 + E_2 = E_3``).
    * ``three-boson-decay`` with modes ``(b1, b2, b3)``: a quantum of the
      first mode decays into one of each of the others and back
      (``E_1 = E_2 + E_3``).
    """

    kind: str
    modes: tuple[int, ...]
    rate: float

    KINDS = ("fermion-boson", "three-boson-merge", "three-boson-decay")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValidationError(f"unknown process kind {self.kind!r}")
        modes = tuple(int(m) for m in self.modes)
        if len(modes) != 3:
            raise ValidationError("every process couples exactly three modes")
        if len(set(modes)) != 3:
            raise ValidationError("process modes must be distinct")
        if not (self.rate >= 0.0):
            raise ValidationError(f"base rate must be nonnegative, got {self.rate!r}")
        object.__setattr__(self, "modes", modes)

    def validate_for(self, basis: FockBasis) -> None:
        for m in self.modes:
            if not (0 <= m < basis.n_modes):
                raise ValidationError(f"process references unknown mode {m}")
        specs = [basis.modes[m] for m in self.modes]
        energies = [s.energy for s in specs]
        if self.kind == "fermion-boson":
            wanted = ("fermion", "fermion", "boson")
            balance = energies[1] - energies[0] - energies[2]
        elif self.kind == "three-boson-merge":
            wanted = ("boson", "boson", "boson")
            balance = energies[0] + energies[1] - energies[2]
        else:
            wanted = ("boson", "boson", "boson")
            balance = energies[0] - energies[1] - energies[2]
        for m, s, w in zip(self.modes, specs, wanted):
            if s.statistics != w:
                raise ValidationError(
                    f"process {self.kind!r} needs a {w} at mode {m}, "
                    f"found a {s.statistics}"
                )
        if abs(balance) > ENERGY_TOL:
            raise ValidationError(
                f"process {self.kind!r} violates energy conservation by {balance:.3e}"
            )

    def occupation_shift(self) -> np.ndarray:
        """Occupation change of the forward transition, one entry per coupled mode."""
        if self.kind == "fermion-boson":
            # lower-occupied state absorbs a boson and excites the fermion
            return np.array([-1, +1, -1])
        if self.kind == "three-boson-merge":
            return np.array([-1, -1, +1])
        return np.array([-1, +1, +1])


@dataclass(frozen=True)
class MeanOccupations:
    """Per-mode mean occupation numbers with the physical range checks."""

    values: np.ndarray
    statistics: tuple[str, ...]

    RANGE_SLACK = 1e-10

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (len(self.statistics),):
            raise ValidationError("one mean per mode is required")
        for i, (v, s) in enumerate(zip(values, self.statistics)):
            if v < -self.RANGE_SLACK:
                raise ValidationError(f"mean occupation of mode {i} is negative: {v!r}")
            if s == "fermion" and v > 1.0 + self.RANGE_SLACK:
                raise ValidationError(f"fermion mode {i} has mean above one: {v!r}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class KineticAssembly:
    """Rate matrix plus per-process counts of transitions dropped at the caps."""

    rates: RateMatrix
    truncated_pairs: tuple[int, ...]

    @property
    def total_truncated(self) -> int:
        return int(sum(self.truncated_pairs))


def _process_edges(basis: FockBasis, process: ProcessSpec):
    """Vectorized (source, target, weight, truncated) for one process.

    Each returned pair is one undirected edge; the symmetric rate applies in
    both directions.  ``truncated`` counts pairs dropped because the target
    would exceed a cap.
    """
    table = basis.occupation_table()
    caps = np.array(basis.shape) - 1
    a, b, c = process.modes
    q = process.rate
    na, nb, nc = table[:, a], table[:, b], table[:, c]
    if process.kind == "fermion-boson":
        # source: lower occupied, upper empty, at least one boson to absorb
        feasible = (na == 1) & (nb == 0) & (nc >= 1)
        weight = q * nc[feasible]
        # pairs lost at the cap: emission from the upper-occupied state with
        # the boson mode already full
        truncated = int(np.count_nonzero((na == 0) & (nb == 1) & (nc == caps[c])))
    elif process.kind == "three-boson-merge":
        feasible = (na >= 1) & (nb >= 1) & (nc < caps[c])
        weight = q * (na * nb * (nc + 1))[feasible]
        truncated = int(np.count_nonzero((na >= 1) & (nb >= 1) & (nc == caps[c])))
    else:  # three-boson-decay
        feasible = (na >= 1) & (nb < caps[b]) & (nc < caps[c])
        weight = q * (na * (nb + 1) * (nc + 1))[feasible]
        truncated = int(
            np.count_nonzero((na >= 1) & ((nb == caps[b]) | (nc == caps[c])))
        )
    source = np.nonzero(feasible)[0]
    strides = np.array(
        [int(np.prod(basis.shape[m + 1:], dtype=np.int64)) for m in range(basis.n_modes)]
    )
    delta = int(np.dot(process.occupation_shift(), strides[[a, b, c]]))
    target = source + delta
    return source, target, weight, truncated


def build_kinetic_q(
    basis: FockBasis, processes: Sequence[ProcessSpec]
) -> KineticAssembly:
    """Assemble the many-body rate matrix for a set of coupling processes.

    Forward and backward rates between connected occupation states are equal
    by construction, so the result is a symmetric generator.  Transitions that
    would push a mode past its cap are dropped and counted per process.  The
    matrix is dense for small bases and sparse above
    ``DENSE_KINETIC_LIMIT`` states.
    """
    processes = list(processes)
    for process in processes:
        process.validate_for(basis)
    rows, cols, vals = [], [], []
    truncated = []
    for process in processes:
        source, target, weight, lost = _process_edges(basis, process)
        truncated.append(lost)
        rows.extend((target, source))
        cols.extend((source, target))
        vals.extend((weight, weight))
    if rows:
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
    else:
        rows = np.empty(0, dtype=np.int64)
        cols = np.empty(0, dtype=np.int64)
        vals = np.empty(0, dtype=float)
    departures = np.bincount(cols, weights=vals, minlength=basis.dim)
    diag_idx = np.arange(basis.dim)
    rows = np.concatenate([rows, diag_idx])
    cols = np.concatenate([cols, diag_idx])
    vals = np.concatenate([vals, -departures])
    coo = sp.coo_matrix((vals, (rows, cols)), shape=(basis.dim, basis.dim))
    if basis.dim <= DENSE_KINETIC_LIMIT:
        matrix = coo.toarray()
    else:
        matrix = coo.tocsr()
    return KineticAssembly(
        rates=RateMatrix(matrix), truncated_pairs=tuple(truncated)
    )


def mean_occupation(p: ProbabilityVector, basis: FockBasis, mode: int) -> float:
    """Mean occupation ``sum_states n_mode(state) P(state)`` of one mode."""
    if not (0 <= mode < basis.n_modes):
        raise ValidationError(f"mode index {mode} out of range [0, {basis.n_modes})")
    if p.dim != basis.dim:
        raise ValidationError(
            f"probability vector has {p.dim} entries, basis has {basis.dim} states"
        )
    return float(basis.occupation_table()[:, mode] @ p.entries)


def mean_occupations(p: ProbabilityVector, basis: FockBasis) -> MeanOccupations:
    """Mean occupation of every mode at once."""
    if p.dim != basis.dim:
        raise ValidationError(
            f"probability vector has {p.dim} entries, basis has {basis.dim} states"
        )
    values = basis.occupation_table().T @ p.entries
    return MeanOccupations(values, tuple(m.statistics for m in basis.modes))


def product_state(basis: FockBasis, marginals: Sequence) -> ProbabilityVector:
    """Probability vector with independent per-mode occupation marginals."""
    if len(marginals) != basis.n_modes:
        raise ValidationError(
            f"expected {basis.n_modes} marginals, got {len(marginals)}"
        )
    cleaned = []
    for i, marginal in enumerate(marginals):
        m = np.asarray(marginal, dtype=float)
        if m.shape != (basis.shape[i],):
            raise ValidationError(
                f"marginal for mode {i} must have length {basis.shape[i]}, "
                f"got {m.shape}"
            )
        if np.any(m < 0.0):
            raise ValidationError(f"marginal for mode {i} has negative entries")
        if abs(float(m.sum()) - 1.0) > 1e-12:
            raise ValidationError(
                f"marginal for mode {i} sums to {m.sum()!r}, expected 1 within 1e-12"
            )
        cleaned.append(m)
    p = cleaned[0]
    for m in cleaned[1:]:
        p = np.kron(p, m)
    return ProbabilityVector(p)


def boltzmann_rhs_fermion_boson(f1: float, f2: float, n_b: float, q: float) -> float:
    """Collision rate for the mean occupation of the lower fermion level.

    ``q [ (1 - f1) f2 (N + 1) - f1 (1 - f2) N ]``: stimulated plus spontaneous
    emission filling the lower level, minus absorption emptying it.
    """
    for name, value in (("f1", f1), ("f2", f2)):
        if not (-1e-12 <= value <= 1.0 + 1e-12):
            raise ValidationError(f"{name} must lie in [0, 1], got {value!r}")
    if n_b < 0.0:
        raise ValidationError(f"boson mean must be nonnegative, got {n_b!r}")
    if q < 0.0:
        raise ValidationError(f"base rate must be nonnegative, got {q!r}")
    return q * ((1.0 - f1) * f2 * (n_b + 1.0) - f1 * (1.0 - f2) * n_b)


def boltzmann_rhs_three_phonon(
    n1: float, n2: float, n3: float, q: float, channel: str
) -> float:
    """Collision rate for the mean occupation of boson mode 1.

    ``channel='merge'`` treats mode 1 as a merging partner
    (``1 + 2 <-> 3``): ``q (N1+1)(N2+1) N3 - q N1 N2 (N3+1)``.
    ``channel='decay'`` treats mode 1 as the decaying parent
    (``1 <-> 2 + 3``): ``q (N1+1) N2 N3 - q N1 (N2+1)(N3+1)``.
    """
    for name, value in (("n1", n1), ("n2", n2), ("n3", n3)):
        if value < 0.0:
            raise ValidationError(f"{name} must be nonnegative, got {value!r}")
    if q < 0.0:
        raise ValidationError(f"base rate must be nonnegative, got {q!r}")
    if channel == "merge":
        return q * ((n1 + 1.0) * (n2 + 1.0) * n3 - n1 * n2 * (n3 + 1.0))
    if channel == "decay":
        return q * ((n1 + 1.0) * n2 * n3 - n1 * (n2 + 1.0) * (n3 + 1.0))
    raise ValidationError(f"channel must be 'merge' or 'decay', got {channel!r}")


def collision_rhs(processes: Sequence[ProcessSpec], means: np.ndarray) -> np.ndarray:
    """Full mean-occupation rate system assembled from the coupling processes."""
    means = np.asarray(means, dtype=float)
    out = np.zeros_like(means)
    for process in processes:
        a, b, c = process.modes
        q = process.rate
        if process.kind == "fermion-boson":
            r = q * (
                (1.0 - means[a]) * means[b] * (means[c] + 1.0)
                - means[a] * (1.0 - means[b]) * means[c]
            )
            out[a] += r
            out[b] -= r
            out[c] += r
        elif process.kind == "three-boson-merge":
            g = q * (
                (means[a] + 1.0) * (means[b] + 1.0) * means[c]
                - means[a] * means[b] * (means[c] + 1.0)
            )
            out[a] += g
            out[b] += g
            out[c] -= g
        else:  # three-boson-decay
            d = q * (
                (means[a] + 1.0) * means[b] * means[c]
                - means[a] * (means[b] + 1.0) * (means[c] + 1.0)
            )
            out[a] += d
            out[b] -= d
            out[c] -= d
    return out


def _conserved_directions(n_modes: int, processes: Sequence[ProcessSpec]) -> np.ndarray:
    """Orthonormal basis of linear functionals conserved by every process."""
    patterns = np.zeros((max(len(processes), 1), n_modes))
    for i, process in enumerate(processes):
        a, b, c = process.modes
        if process.kind == "fermion-boson":
            patterns[i, [a, b, c]] = (1.0, -1.0, 1.0)
        elif process.kind == "three-boson-merge":
            patterns[i, [a, b, c]] = (1.0, 1.0, -1.0)
        else:
            patterns[i, [a, b, c]] = (1.0, -1.0, -1.0)
    return null_space(patterns)


def _project_means(
    means: np.ndarray, statistics: Sequence[str], floor: float = 1e-13
) -> np.ndarray:
    out = np.maximum(means, floor)
    for i, s in enumerate(statistics):
        if s == "fermion":
            out[i] = min(out[i], 1.0 - floor)
    return out


def collision_fixed_point(
    modes: Sequence[ModeSpec],
    processes: Sequence[ProcessSpec],
    means0,
    tol: float = 1e-12,
    max_iter: int = 200,
) -> np.ndarray:
    """Stationary point of the collision system on the conservation manifold of ``means0``.

    A short relaxation of the rate equations provides the starting point, then
    damped Newton iteration drives the stacked system (collision rates plus the
    linear conservation residuals) to zero, projecting back into the physical
    range after every step.
    """
    statistics = [m.statistics for m in modes]
    means0 = np.asarray(means0, dtype=float).copy()
    n = means0.size
    if n != len(modes):
        raise ValidationError("one initial mean per mode is required")
    conserved = _conserved_directions(n, processes)
    targets = conserved.T @ means0

    rhs_scale = float(np.abs(collision_rhs(processes, means0)).max())
    if rhs_scale > 0.0:
        sol = solve_ivp(
            lambda _t, y: collision_rhs(processes, _project_means(y, statistics)),
            (0.0, 50.0 / rhs_scale),
            means0,
            method="LSODA",
            rtol=1e-10,
            atol=1e-12,
        )
        if sol.success:
            means0 = _project_means(sol.y[:, -1], statistics)

    def residual(m: np.ndarray) -> np.ndarray:
        return np.concatenate([conserved.T @ m - targets, collision_rhs(processes, m)])

    def jacobian(m: np.ndarray) -> np.ndarray:
        eps = 1e-7
        jac = np.empty((n + conserved.shape[1], n))
        jac[: conserved.shape[1]] = conserved.T
        base = collision_rhs(processes, m)
        for j in range(n):
            probe = m.copy()
            probe[j] += eps
            jac[conserved.shape[1]:, j] = (collision_rhs(processes, probe) - base) / eps
        return jac

    m = _project_means(means0, statistics)
    r = residual(m)
    for _ in range(max_iter):
        norm = float(np.abs(r).max())
        if norm < tol:
            return m
        step, *_ = np.linalg.lstsq(jacobian(m), -r, rcond=None)
        damping = 1.0
        while damping > 1e-6:
            candidate = _project_means(m + damping * step, statistics)
            r_new = residual(candidate)
            if float(np.abs(r_new).max()) < norm:
                m, r = candidate, r_new
                break
            damping /= 2.0
        else:
            raise NumericalError(
                f"fixed-point iteration stalled at residual {norm:.3e}"
            )
    raise NumericalError(
        f"fixed point not reached in {max_iter} iterations "
        f"(residual {float(np.abs(r).max()):.3e})"
    )


def _marginals_of(p: ProbabilityVector, basis: FockBasis) -> list[np.ndarray]:
    table = basis.occupation_table()
    return [
        np.bincount(table[:, i], weights=p.entries, minlength=basis.shape[i])
        for i in range(basis.n_modes)
    ]


def _check_product(p: ProbabilityVector, basis: FockBasis, tol: float = 1e-10):
    """Verify pairwise joints factor into the marginals (rank-1 test per mode pair)."""
    table = basis.occupation_table()
    marginals = _marginals_of(p, basis)
    for i in range(basis.n_modes):
        for j in range(i + 1, basis.n_modes):
            pair_index = table[:, i] * basis.shape[j] + table[:, j]
            joint = np.bincount(
                pair_index, weights=p.entries, minlength=basis.shape[i] * basis.shape[j]
            ).reshape(basis.shape[i], basis.shape[j])
            deviation = float(np.abs(joint - np.outer(marginals[i], marginals[j])).max())
            if deviation > tol:
                raise ValidationError(
                    f"initial state is not a product state: modes ({i}, {j}) "
                    f"have joint/marginal mismatch {deviation:.3e} (tolerance {tol:g})"
                )
    return marginals


@dataclass(frozen=True)
class ConsistencyReport:
    """Exact state-space derivative of the means against the collision system."""

    exact: np.ndarray = field(repr=False)
    collision: np.ndarray = field(repr=False)
    max_discrepancy: float = 0.0
    marginal_tail: np.ndarray = field(default=None, repr=False)
    truncated_pairs: tuple[int, ...] = ()

    @property
    def per_mode_discrepancy(self) -> np.ndarray:
        return np.abs(self.exact - self.collision)


def verify_derivative_consistency(
    basis: FockBasis,
    processes: Sequence[ProcessSpec],
    p0: ProbabilityVector,
) -> ConsistencyReport:
    """Compare exact ``d<n>/dt`` at t=0 from a product state with the collision rates.

    The exact side is ``sum_states n_mode (Q P0)``; the collision side feeds
    the marginals' means into :func:`collision_rhs`.  For untruncated bases
    the two agree identically; with caps the difference is controlled by the
    occupation-weighted marginal mass at the caps,
    ``(n_max + 1) * marginal(n_max)``, which the report includes per boson
    mode (fermion modes are never truncated and report zero).
    """
    marginals = _check_product(p0, basis)
    assembly = build_kinetic_q(basis, processes)
    dp = assembly.rates.matvec(p0.entries)
    table = basis.occupation_table()
    exact = table.T @ dp
    means = np.array([m @ np.arange(m.size) for m in marginals])
    collision = collision_rhs(processes, means)
    tails = np.array(
        [
            0.0 if mode.statistics == "fermion" else float(m.size * m[-1])
            for mode, m in zip(basis.modes, marginals)
        ]
    )
    return ConsistencyReport(
        exact=exact,
        collision=collision,
        max_discrepancy=float(np.abs(exact - collision).max()),
        marginal_tail=tails,
        truncated_pairs=assembly.truncated_pairs,
    )


@dataclass(frozen=True)
class CommutativityReport:
    """Microcanonical means versus collision fixed point on one energy shell.

    ``means_master`` comes from relaxing the exact chain on the anchor's
    connected component; ``means_collision`` from the fixed point of the
    collision system started at the anchor occupations.  ``gap`` is the
    sup-norm difference, a finite-size measurement rather than a quantity
    expected to vanish.
    """

    anchor: tuple[int, ...]
    shell_energy: float
    shell_size: int
    component_sizes: tuple[int, ...]
    means_master: np.ndarray = field(repr=False)
    means_collision: np.ndarray = field(repr=False)
    gap: float = 0.0
    stationarity_deviation: float = 0.0
    component_means: tuple = field(default=(), repr=False)


def _component_of(
    basis: FockBasis, processes: Sequence[ProcessSpec], start: int
) -> np.ndarray:
    """Indices reachable from ``start`` through the process transitions, sorted."""
    seen = {start}
    frontier = [start]
    caps = np.array(basis.shape) - 1
    while frontier:
        state = frontier.pop()
        occ = np.array(basis.occupations(state))
        for process in processes:
            shift = process.occupation_shift()
            idx = list(process.modes)
            for direction in (+1, -1):
                new = occ.copy()
                new[idx] += direction * shift
                if np.any(new < 0) or np.any(new > caps):
                    continue
                neighbor = basis.index(new)
                if neighbor not in seen:
                    seen.add(neighbor)
                    frontier.append(neighbor)
    return np.array(sorted(seen), dtype=np.int64)


def diagram_commutativity(
    basis: FockBasis,
    processes: Sequence[ProcessSpec],
    anchor,
    energy_tol: float = ENERGY_TOL,
    relaxation_gaps: float = 20.0,
) -> CommutativityReport:
    """Run both reduction paths from one anchor state and report their difference.

    Path A relaxes the exact chain (restricted to the anchor's connected
    component inside the fixed-total-energy shell) to stationarity and takes
    mean occupations.  Path B feeds the anchor occupations into the collision
    system and finds its fixed point.  When the shell splits into several
    components, uniform means of every component are reported alongside.
    """
    for process in processes:
        process.validate_for(basis)
    anchor = tuple(int(n) for n in anchor)
    anchor_index = basis.index(anchor)
    energies = basis.state_energies()
    shell_energy = float(energies[anchor_index])
    shell = np.nonzero(np.abs(energies - shell_energy) <= energy_tol)[0]

    component = _component_of(basis, processes, anchor_index)
    if not np.all(np.abs(energies[component] - shell_energy) <= energy_tol):
        raise NumericalError(
            "process transitions left the energy shell; check process energies"
        )
    # component census of the whole shell, anchor's component first
    remaining = set(int(s) for s in shell) - set(int(s) for s in component)
    component_sizes = [int(component.size)]
    component_means = []
    while remaining:
        seed = min(remaining)
        comp = _component_of(basis, processes, seed)
        comp_set = set(int(s) for s in comp)
        remaining -= comp_set
        component_sizes.append(int(comp.size))
        occ = basis.occupation_table()[comp]
        component_means.append(occ.mean(axis=0))

    # path A: relax the exact chain on the anchor component
    sub_table = basis.occupation_table()[component]
    if component.size == 1:
        means_master = sub_table[0].astype(float)
        stationarity_deviation = 0.0
    else:
        assembly = build_kinetic_q(basis, processes)
        m = assembly.rates.matrix
        if sp.issparse(m):
            sub = m[component][:, component].toarray()
        else:
            sub = m[np.ix_(component, component)]
        q_sub = RateMatrix(np.asarray(sub))
        report = stationary_analysis(q_sub)
        if not report.ergodic:
            raise NumericalError("anchor component unexpectedly disconnected")
        p0 = ProbabilityVector.delta(component.size, int(np.searchsorted(component, anchor_index)))
        method = "expm" if component.size <= DENSE_KINETIC_LIMIT else "uniformization"
        p_final = evolve_master(q_sub, p0, relaxation_gaps / report.gap, method=method)
        uniform = np.full(component.size, 1.0 / component.size)
        stationarity_deviation = float(np.abs(p_final.entries - uniform).max())
        means_master = sub_table.T @ p_final.entries

    # path B: collision fixed point from the anchor occupations
    means_collision = collision_fixed_point(
        basis.modes, processes, np.array(anchor, dtype=float)
    )
    gap = float(np.abs(means_master - means_collision).max())
    return CommutativityReport(
        anchor=anchor,
        shell_energy=shell_energy,
        shell_size=int(shell.size),
        component_sizes=tuple(component_sizes),
        means_master=means_master,
        means_collision=means_collision,
        gap=gap,
        stationarity_deviation=stationarity_deviation,
        component_means=tuple(component_means),
    )


def fermi_dirac(energy: float, mu: float, temperature: float) -> float:
    """Equilibrium fermion mean occupation ``1 / (exp((E - mu)/T) + 1)``."""
    if not (temperature > 0.0):
        raise ValidationError(f"temperature must be positive, got {temperature!r}")
    return 1.0 / (math.exp((energy - mu) / temperature) + 1.0)


def bose_einstein(energy: float, temperature: float) -> float:
    """Equilibrium boson mean occupation ``1 / (exp(E/T) - 1)``."""
    if not (temperature > 0.0):
        raise ValidationError(f"temperature must be positive, got {temperature!r}")
    if not (energy > 0.0):
        raise ValidationError(f"mode energy must be positive, got {energy!r}")
    return 1.0 / math.expm1(energy / temperature)


def geometric_marginal(ratio: float, n_max: int) -> np.ndarray:
    """Truncated geometric occupation marginal ``p(n) ~ ratio^n`` on ``0..n_max``.

    The untruncated distribution has mean ``ratio / (1 - ratio)``; truncation
    leaves a normalized distribution whose mass beyond the cap was
    proportionally tiny for ``ratio^n_max << 1``.
    """
    if not (0.0 <= ratio < 1.0):
        raise ValidationError(f"ratio must lie in [0, 1), got {ratio!r}")
    p = ratio ** np.arange(n_max + 1)
    return p / p.sum()


def thermal_marginal(energy: float, temperature: float, n_max: int) -> np.ndarray:
    """Truncated equilibrium occupation marginal of a boson mode."""
    return geometric_marginal(math.exp(-energy / temperature), n_max)
