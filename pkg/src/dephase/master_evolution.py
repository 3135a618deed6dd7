"""Rate-matrix construction and time evolution for phase-averaged dynamics.

A weakly coupled system whose amplitude phases are continually randomized
stops being described by a wavefunction and follows a continuous-time Markov
chain instead.  The generator is assembled from the squared interaction
matrix elements restricted to an energy shell,

    Q[a, b] = (2 / hbar^2) |V[a, b]|^2 dt   for |E_a - E_b| <= pi hbar / dt,

with diagonal entries fixed by probability conservation.  The generator is
symmetric, so the chain satisfies detailed balance and relaxes to the uniform
distribution on every connected component.  The module also carries two
oracles against which that picture can be tested: exact integration of the
oscillating amplitude equation, and a Monte Carlo protocol that alternates
short unitary steps with re-randomization of the amplitude phases.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.linalg import expm
from scipy.sparse.csgraph import connected_components

from .errors import NumericalError, ValidationError
from .spectral_core import AmplitudeVector, ProbabilityVector, random_hermitian
from .timescale_tools import WindowParams

__all__ = [
    "SystemSpec",
    "RateMatrix",
    "DensityOfStates",
    "StationaryReport",
    "ScrambleTrajectory",
    "build_q_matrix",
    "fermi_rate",
    "evolve_master",
    "master_trajectory",
    "stationary_analysis",
    "evolve_unitary_reference",
    "phase_scramble_evolution",
    "random_degenerate_system",
    "EVOLVE_METHODS",
]

logger = logging.getLogger(__name__)

EVOLVE_METHODS = ("expm", "uniformization", "rk")

#: Largest dimension for which dense linear algebra (expm, eigh) is attempted.
DENSE_LIMIT = 2048


@dataclass(frozen=True)
class SystemSpec:
    """Energies, interaction matrix, and smoothing window of a closed system.

    The interaction must be Hermitian with an exactly zero diagonal
    (self-interaction is taken to be absorbed into the energies).
    """

    energies: np.ndarray
    interaction: np.ndarray
    window: WindowParams
    hbar: float = 1.0

    def __post_init__(self):
        e = np.array(self.energies, dtype=float)
        v = np.array(self.interaction, dtype=complex)
        if e.ndim != 1 or e.size == 0:
            raise ValidationError("energies must form a nonempty 1-d sequence")
        if v.shape != (e.size, e.size):
            raise ValidationError(
                f"interaction must be {e.size}x{e.size} to match the energies, "
                f"got shape {v.shape}"
            )
        herm_dev = float(np.abs(v - v.conj().T).max())
        if herm_dev > 1e-10:
            raise ValidationError(
                f"interaction is not Hermitian: max |V - V^H| = {herm_dev:.3e}"
            )
        if np.any(v.diagonal() != 0.0):
            raise ValidationError(
                "interaction diagonal must be exactly zero "
                "(self-interaction belongs in the energies)"
            )
        if not (self.hbar > 0.0):
            raise ValidationError(f"hbar must be positive, got {self.hbar!r}")
        if not isinstance(self.window, WindowParams):
            raise ValidationError("window must be a WindowParams instance")
        if self.window.hbar != self.hbar:
            raise ValidationError(
                f"window carries hbar={self.window.hbar!r} but the system uses "
                f"hbar={self.hbar!r}"
            )
        e.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "interaction", v)

    @classmethod
    def create(
        cls,
        energies,
        interaction,
        hbar: float = 1.0,
        dt: float | None = None,
        half_width: float | None = None,
    ) -> "SystemSpec":
        """Build a spec from either the window time step or the shell half-width."""
        if (dt is None) == (half_width is None):
            raise ValidationError("specify exactly one of dt or half_width")
        if dt is not None:
            window = WindowParams(dt=dt, hbar=hbar)
        else:
            window = WindowParams.from_half_width(half_width, hbar=hbar)
        return cls(energies=energies, interaction=interaction, window=window, hbar=hbar)

    @property
    def dim(self) -> int:
        return self.energies.size

    @property
    def dt(self) -> float:
        return self.window.dt

    @property
    def half_width(self) -> float:
        return self.window.half_width

    def hamiltonian(self) -> np.ndarray:
        """Full Hamiltonian ``diag(E) + V``."""
        return np.diag(self.energies).astype(complex) + self.interaction


@dataclass(frozen=True)
class RateMatrix:
    """Generator of a symmetric continuous-time Markov chain.

    Off-diagonal entries are nonnegative transition rates, symmetric across
    the diagonal (detailed balance); each column sums to zero.  The matrix may
    be dense or ``scipy.sparse`` for large occupation-number bases.  ``dt``
    records the window step used during construction when there was one.
    """

    matrix: object
    dt: float | None = None

    def __post_init__(self):
        m = self.matrix
        if sp.issparse(m):
            m = m.tocsr()
        else:
            m = np.asarray(m, dtype=float)
            if m.ndim != 2:
                raise ValidationError("rate matrix must be 2-d")
            m.setflags(write=False)
        if m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise ValidationError("rate matrix must be square and nonempty")
        diag = m.diagonal()
        scale = max(1.0, float(np.abs(diag).max()) if diag.size else 1.0)
        tol = 1e-12 * scale
        if sp.issparse(m):
            off_min = float((m - sp.diags(diag)).min()) if m.nnz else 0.0
            asym = float(np.abs(m - m.T).max()) if m.nnz else 0.0
            col_dev = float(np.abs(np.asarray(m.sum(axis=0)).ravel()).max())
        else:
            off = m - np.diag(diag)
            off_min = float(off.min())
            asym = float(np.abs(off - off.T).max())
            col_dev = float(np.abs(m.sum(axis=0)).max())
        if off_min < -tol:
            raise ValidationError(
                f"rate matrix has a negative off-diagonal entry: {off_min:.3e}"
            )
        if asym > tol:
            raise ValidationError(
                f"rate matrix is not symmetric: max |Q - Q^T| = {asym:.3e}"
            )
        if col_dev > tol:
            raise ValidationError(
                f"rate matrix columns do not sum to zero: max deviation {col_dev:.3e}"
            )
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    def diagonal(self) -> np.ndarray:
        return np.asarray(self.matrix.diagonal())

    def toarray(self) -> np.ndarray:
        if self.is_sparse:
            if self.dim > DENSE_LIMIT:
                raise NumericalError(
                    f"refusing to densify a {self.dim}x{self.dim} sparse rate matrix"
                )
            return self.matrix.toarray()
        return np.asarray(self.matrix)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x


@dataclass(frozen=True)
class DensityOfStates:
    """Nonnegative density of states, callable or linearly interpolated from a table."""

    fn: Callable[[float], float]

    def __call__(self, energy: float) -> float:
        value = float(self.fn(energy))
        if value < 0.0:
            raise ValidationError(
                f"density of states is negative at E={energy!r}: {value!r}"
            )
        return value

    @classmethod
    def from_table(cls, energies, values) -> "DensityOfStates":
        e = np.asarray(energies, dtype=float)
        v = np.asarray(values, dtype=float)
        if e.ndim != 1 or e.shape != v.shape or e.size < 2:
            raise ValidationError("table needs matching 1-d energies and values")
        if np.any(np.diff(e) <= 0):
            raise ValidationError("table energies must be strictly increasing")
        if np.any(v < 0):
            raise ValidationError("table values must be nonnegative")
        return cls(fn=lambda x: float(np.interp(x, e, v)))


@dataclass(frozen=True)
class StationaryReport:
    """Stationary distribution, spectral gap, and connectivity of a rate matrix."""

    ergodic: bool
    n_components: int
    stationary: ProbabilityVector | None = None
    gap: float | None = None


@dataclass(frozen=True)
class ScrambleTrajectory:
    """Monte Carlo estimate of the phase-scrambled probability trajectory."""

    times: np.ndarray = field(repr=False)
    mean: np.ndarray = field(repr=False)
    stderr: np.ndarray = field(repr=False)
    samples: int = 0
    dt: float = 0.0

    @property
    def final(self) -> ProbabilityVector:
        return ProbabilityVector(np.where(self.mean[-1] < 0, 0.0, self.mean[-1]))


def build_q_matrix(spec: SystemSpec) -> RateMatrix:
    """Transition-rate matrix of the phase-averaged dynamics.

    For distinct states inside the energy shell (``|E_a - E_b| <= W``,
    boundary inclusive) the rate is ``(2 / hbar^2) |V[a, b]|^2 dt``; outside
    the shell it is zero, and diagonal entries make every column sum to zero.
    The squared couplings are symmetrized before use so the output is
    symmetric entry by entry even when the input carries Hermitian-roundoff
    noise.
    """
    dt = spec.dt
    v_sq = np.abs(spec.interaction) ** 2
    v_sq = 0.5 * (v_sq + v_sq.T)
    gaps = np.abs(spec.energies[:, None] - spec.energies[None, :])
    q = np.where(gaps <= spec.half_width, 2.0 * v_sq * dt / spec.hbar**2, 0.0)
    np.fill_diagonal(q, 0.0)
    np.fill_diagonal(q, -q.sum(axis=0))
    return RateMatrix(q, dt=dt)


def fermi_rate(v_sq: float, nu: float, hbar: float = 1.0) -> float:
    """Golden-rule rate ``(2 pi / hbar) |V|^2 nu``.

    The energy delta function is understood as aggregation over a shell of
    final states with density ``nu``; summing the shell rates of
    :func:`build_q_matrix` over a degenerate shell reproduces this value.
    """
    if v_sq < 0.0:
        raise ValidationError(f"squared coupling must be nonnegative, got {v_sq!r}")
    if nu < 0.0:
        raise ValidationError(f"density of states must be nonnegative, got {nu!r}")
    if not (hbar > 0.0):
        raise ValidationError(f"hbar must be positive, got {hbar!r}")
    return 2.0 * math.pi / hbar * v_sq * nu


def _finalize_probability(p: np.ndarray) -> ProbabilityVector:
    """Flush negative zeros/subnormals, clamp rounding negatives, warn beyond -1e-14."""
    p = np.asarray(p, dtype=float).copy()
    worst = float(p.min())
    if worst < -1e-14:
        logger.warning(
            "clamping negative probability %.3e to zero (beyond rounding noise)", worst
        )
    tiny = np.finfo(float).tiny
    p[np.abs(p) < tiny] = 0.0
    p[p < 0.0] = 0.0
    return ProbabilityVector(p)


def _evolve_expm(q: RateMatrix, p0: np.ndarray, t: float) -> np.ndarray:
    return expm(q.toarray() * t) @ p0


def _evolve_uniformization(q: RateMatrix, p0: np.ndarray, t: float) -> np.ndarray:
    """Poisson (uniformization) series with segmented time stepping.

    The jump chain uses rate ``1.1 * max |Q_aa|``; each segment keeps the
    Poisson mean below 64 and the series is truncated once the accumulated
    Poisson weight leaves a tail below the overall 1e-12 budget.
    """
    max_diag = float(np.abs(q.diagonal()).max())
    if max_diag == 0.0:
        return p0.copy()
    lam = 1.1 * max_diag
    n_segments = max(1, int(math.ceil(lam * t / 64.0)))
    s = t / n_segments
    tail_budget = 1e-12 / n_segments
    b = q.matrix * (1.0 / lam)
    if sp.issparse(b):
        b = b + sp.identity(q.dim, format="csr")
    else:
        b = b + np.eye(q.dim)
    p = p0.copy()
    for _ in range(n_segments):
        weight = math.exp(-lam * s)
        if weight == 0.0:
            raise NumericalError(
                "uniformization underflow: segment rate too large; use method='expm'"
            )
        term = p.copy()
        acc = weight * term
        cumulative = weight
        k = 0
        while cumulative < 1.0 - tail_budget:
            k += 1
            term = b @ term
            weight *= lam * s / k
            acc += weight * term
            cumulative += weight
            if k > 2000 + int(10 * lam * s):
                raise NumericalError("uniformization series failed to converge")
        p = acc
    return p


def _evolve_rk(q: RateMatrix, p0: np.ndarray, t: float) -> np.ndarray:
    sol = solve_ivp(
        lambda _t, y: q.matvec(y),
        (0.0, t),
        p0,
        method="DOP853",
        rtol=1e-10,
        atol=1e-13,
    )
    if not sol.success:
        raise NumericalError(f"adaptive integration failed: {sol.message}")
    return sol.y[:, -1]


_EVOLVERS = {
    "expm": _evolve_expm,
    "uniformization": _evolve_uniformization,
    "rk": _evolve_rk,
}


def _check_evolution_args(q: RateMatrix, p0: ProbabilityVector, t: float, method: str):
    if method not in _EVOLVERS:
        raise ValidationError(
            f"unknown method {method!r}; choose one of {sorted(_EVOLVERS)}"
        )
    if q.dim != p0.dim:
        raise ValidationError(
            f"dimension mismatch: rate matrix is {q.dim}x{q.dim}, "
            f"probability vector has {p0.dim} entries"
        )
    if t < 0.0:
        raise ValidationError(
            "backward evolution refused: stochastic maps other than permutations "
            "have no stochastic inverse, so t must be nonnegative"
        )


def evolve_master(
    q: RateMatrix, p0: ProbabilityVector, t: float, method: str = "expm"
) -> ProbabilityVector:
    """Propagate ``P(t) = exp(Q t) P(0)``.

    ``method`` selects scaling-and-squaring ``expm``, ``uniformization``
    (sparse-friendly Poisson series), or ``rk`` (adaptive Runge-Kutta); the
    three agree to high accuracy and exist to cross-check each other.
    """
    _check_evolution_args(q, p0, t, method)
    return _finalize_probability(_EVOLVERS[method](q, p0.entries, t))


def master_trajectory(
    q: RateMatrix, p0: ProbabilityVector, times, method: str = "expm"
) -> np.ndarray:
    """Evaluate the master evolution on an increasing grid of times.

    Returns an array of shape ``(len(times), dim)``; each row passes the
    probability-vector invariants.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValidationError("times must form a nonempty 1-d sequence")
    if np.any(np.diff(times) < 0.0):
        raise ValidationError("times must be non-decreasing")
    _check_evolution_args(q, p0, float(times[0]), method)
    out = np.empty((times.size, q.dim))
    propagator = None
    last_step = None
    p = p0.entries
    previous_t = 0.0
    for i, t in enumerate(times):
        step = float(t - previous_t)
        if method == "expm":
            if last_step is None or abs(step - last_step) > 1e-15 * max(1.0, step):
                propagator = expm(q.toarray() * step)
                last_step = step
            p = propagator @ p
        else:
            p = _EVOLVERS[method](q, p, step)
        out[i] = _finalize_probability(p).entries
        p = out[i]
        previous_t = t
    return out


def stationary_analysis(q: RateMatrix) -> StationaryReport:
    """Stationary distribution and spectral gap of a symmetric generator.

    On a connected transition graph the stationary distribution is uniform and
    the gap is the smallest nonzero eigenvalue of ``-Q``.  Disconnected
    generators are reported (component count), not rejected.
    """
    if q.is_sparse:
        graph = sp.csr_matrix(
            (np.ones_like(q.matrix.data), q.matrix.indices, q.matrix.indptr),
            shape=q.matrix.shape,
        )
    else:
        graph = sp.csr_matrix(q.matrix != 0)
    n_components, _ = connected_components(graph, directed=False)
    if n_components > 1:
        return StationaryReport(ergodic=False, n_components=n_components)
    w = np.linalg.eigvalsh(q.toarray())
    gap = float(-np.sort(w)[-2]) if q.dim > 1 else 0.0
    return StationaryReport(
        ergodic=True,
        n_components=1,
        stationary=ProbabilityVector.uniform(q.dim),
        gap=gap,
    )


def evolve_unitary_reference(
    spec: SystemSpec,
    a0: AmplitudeVector,
    t: float,
    t0: float = 0.0,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> AmplitudeVector:
    """Integrate the oscillating amplitude equation with full phase factors.

    Solves ``dA_a/dt = -(i/hbar) sum_b V[a,b] exp(i (E_a - E_b) t / hbar) A_b``
    adaptively from ``t0`` to ``t``.  Backward integration (``t < t0``) is
    allowed; unlike the master evolution, the unitary flow is reversible.  The
    norm must survive the trip to within 1e-9, after which it is renormalized
    exactly.
    """
    if a0.dim != spec.dim:
        raise ValidationError(
            f"amplitude vector has {a0.dim} entries but the system has {spec.dim} states"
        )
    if t == t0:
        return a0
    omega = (spec.energies[:, None] - spec.energies[None, :]) / spec.hbar
    v = spec.interaction
    coupling = -1j / spec.hbar

    def rhs(time, a):
        return coupling * ((v * np.exp(1j * omega * time)) @ a)

    sol = solve_ivp(
        rhs,
        (t0, t),
        a0.entries,
        method="DOP853",
        rtol=rtol,
        atol=atol,
    )
    if not sol.success:
        raise NumericalError(
            "amplitude integration failed (step-size underflow on stiff phases); "
            f"try weaker coupling or a shorter horizon: {sol.message}"
        )
    a = sol.y[:, -1]
    norm = float(np.linalg.norm(a))
    if abs(norm - 1.0) > 1e-9:
        raise NumericalError(
            f"norm drifted by {abs(norm - 1.0):.3e} (> 1e-9); tighten tolerances "
            "or shorten the horizon"
        )
    return AmplitudeVector(a / norm)


def phase_scramble_evolution(
    spec: SystemSpec,
    p0: ProbabilityVector,
    t: float,
    dt: float,
    samples: int,
    seed: int,
) -> ScrambleTrajectory:
    """Alternate unitary steps of length ``dt`` with re-randomization of phases.

    Each Monte Carlo sample starts from amplitudes ``sqrt(P0)`` with i.i.d.
    uniform phases, is propagated by the one-step propagator
    ``U = exp(-i (diag(E) + V) dt / hbar)``, and has its phases redrawn after
    every step while the moduli are kept.  The trajectory of squared moduli
    is averaged over samples; the result carries a per-entry standard error
    at every time point (grid ``0, dt, 2 dt, ..., t``).

    Phases come from a counter-based generator (Philox keyed by ``seed``);
    drawing event ``e`` (initialization, then one re-randomization after every
    step but the last) consumes the block ``[e*N*K, (e+1)*N*K)`` laid out as a
    C-ordered ``(N, K)`` array, so sample ``k`` is reproducible for a given
    ``(seed, samples)`` regardless of scheduling, and a shorter horizon is a
    prefix of a longer one.
    """
    if samples < 1:
        raise ValidationError("phase scrambling needs at least one sample")
    if not (dt > 0.0):
        raise ValidationError(f"scramble step must be positive, got {dt!r}")
    if p0.dim != spec.dim:
        raise ValidationError(
            f"probability vector has {p0.dim} entries but the system has "
            f"{spec.dim} states"
        )
    if t < 0.0:
        raise ValidationError("horizon must be nonnegative")
    n_steps = int(round(t / dt))
    if abs(n_steps * dt - t) > 1e-9 * max(1.0, abs(t)):
        raise ValidationError(
            f"dt={dt!r} does not divide the horizon t={t!r} within rounding"
        )
    n = spec.dim
    w, basis = np.linalg.eigh(spec.hamiltonian())
    u = (basis * np.exp(-1j * w * dt / spec.hbar)) @ basis.conj().T

    rng = np.random.Generator(np.random.Philox(key=seed))
    amps = np.sqrt(p0.entries)[:, None] * np.exp(
        1j * rng.uniform(0.0, 2.0 * np.pi, size=(n, samples))
    )
    times = np.arange(n_steps + 1) * dt
    mean = np.empty((n_steps + 1, n))
    stderr = np.empty((n_steps + 1, n))
    mean[0] = p0.entries
    stderr[0] = 0.0
    sqrt_k = math.sqrt(samples)
    for step in range(1, n_steps + 1):
        amps = u @ amps
        probs = np.abs(amps) ** 2
        mean[step] = probs.mean(axis=1)
        if samples > 1:
            stderr[step] = probs.std(axis=1, ddof=1) / sqrt_k
        else:
            stderr[step] = np.inf
        if step < n_steps:
            amps = np.sqrt(probs) * np.exp(
                1j * rng.uniform(0.0, 2.0 * np.pi, size=(n, samples))
            )
    times.setflags(write=False)
    mean.setflags(write=False)
    stderr.setflags(write=False)
    return ScrambleTrajectory(times=times, mean=mean, stderr=stderr, samples=samples, dt=dt)


def random_degenerate_system(
    n: int,
    coupling: float,
    dt: float,
    seed: int,
    energy: float = 1.0,
    hbar: float = 1.0,
) -> SystemSpec:
    """Seeded single-shell test system: ``n`` degenerate states, random coupling.

    Off-diagonal couplings are complex Gaussian with standard deviation
    ``coupling``; the diagonal is zero.  All level pairs sit inside the shell,
    whatever ``dt``.
    """
    rng = np.random.default_rng(seed)
    v = random_hermitian(n, rng, scale=coupling)
    np.fill_diagonal(v, 0.0)
    return SystemSpec.create(
        energies=np.full(n, float(energy)),
        interaction=v,
        hbar=hbar,
        dt=dt,
    )
