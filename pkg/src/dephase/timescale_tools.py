"""Finite-window smoothing kernel and applicability-window estimates.

Averaging the oscillating factor ``exp(i dE t / hbar)`` over a window of
length ``dt`` multiplies each amplitude by the kernel ``chi(dE)``; replacing
``chi`` by a box of equal L2 mass turns the windowed dynamics into a sharp
energy-shell rule with half-width ``W = pi hbar / dt``.  The estimators here
report for which window lengths that replacement is defensible: ``dt`` must
sit well above the fastest retained oscillation period and well below the
timescale on which the amplitudes themselves move.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import ValidationError

__all__ = [
    "WindowParams",
    "TimescaleReport",
    "chi",
    "chi_bar",
    "chi_squared_integral",
    "chi_bar_squared_integral",
    "applicability_window",
]


@dataclass(frozen=True)
class WindowParams:
    """Smoothing window: time step ``dt`` and the energy half-width it induces."""

    dt: float
    hbar: float = 1.0

    def __post_init__(self):
        if not (self.dt > 0.0):
            raise ValidationError(f"window time step must be positive, got {self.dt!r}")
        if not (self.hbar > 0.0):
            raise ValidationError(f"hbar must be positive, got {self.hbar!r}")

    @property
    def half_width(self) -> float:
        """Energy half-width ``W = pi hbar / dt`` of the equivalent box window."""
        return math.pi * self.hbar / self.dt

    @classmethod
    def from_half_width(cls, half_width: float, hbar: float = 1.0) -> "WindowParams":
        if not (half_width > 0.0):
            raise ValidationError(f"energy half-width must be positive, got {half_width!r}")
        return cls(dt=math.pi * hbar / half_width, hbar=hbar)


@dataclass(frozen=True)
class TimescaleReport:
    """Separation-of-timescales check for a window length ``dt``.

    ``t_fast`` is the largest oscillation period that the window is supposed
    to average away (zero when every coupled pair lies inside the shell);
    ``t_amplitude`` is the time on which amplitudes move, reported both as
    ``hbar / max |V|`` and as the inverse of the fastest total departure rate.
    The window is admissible when ``t_fast * margin <= dt <= t_slow / margin``
    with ``t_slow`` the smaller of the two amplitude timescales.
    """

    dt: float
    t_fast: float
    t_amplitude_coupling: float
    t_amplitude_rate: float
    margin: float
    admissible: bool

    @property
    def t_slow(self) -> float:
        return min(self.t_amplitude_coupling, self.t_amplitude_rate)


def chi(delta_e, dt: float, hbar: float = 1.0):
    """Window-averaged oscillation factor.

    ``chi = (1/dt) * (-i hbar / dE) * (exp(i dE dt / hbar) - 1)``, extended
    continuously by ``chi(0) = 1``.  Its modulus is ``|sinc(dE dt / 2 hbar)|``,
    so ``|chi| <= 1`` everywhere and ``chi`` vanishes whenever the window
    contains a whole number of oscillations.  Accepts scalars or arrays.
    """
    if not (dt > 0.0):
        raise ValidationError(f"dt must be positive, got {dt!r}")
    de = np.asarray(delta_e, dtype=float)
    x = de * dt / hbar
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    value = np.where(
        small,
        1.0 + 1j * x / 2.0,
        (-1j / safe) * (np.exp(1j * safe) - 1.0),
    )
    if np.isscalar(delta_e):
        return complex(value)
    return value


def chi_bar(delta_e, dt: float, hbar: float = 1.0):
    """Box replacement for :func:`chi`: 1 strictly inside ``|dE| < pi hbar / dt``, else 0.

    The box has the same L2 mass as ``chi`` (both integrate to
    ``2 pi hbar / dt``); the boundary itself maps to 0.
    """
    if not (dt > 0.0):
        raise ValidationError(f"dt must be positive, got {dt!r}")
    de = np.asarray(delta_e, dtype=float)
    value = np.where(np.abs(de) * dt < math.pi * hbar, 1.0, 0.0)
    if np.isscalar(delta_e):
        return float(value)
    return value


def chi_squared_integral(dt: float, hbar: float = 1.0) -> float:
    """Adaptive quadrature of ``int |chi(dE)|^2 dE`` over the whole real line.

    In the scaled variable ``x = dE dt / hbar`` the integrand is
    ``2 (1 - cos x) / x^2``, integrated as a smooth piece on [0, 1] plus
    ``2 - int_1^inf 2 cos(x)/x^2 dx`` where the oscillatory tail uses
    QUADPACK's infinite-range cosine-weight rule.
    """
    if not (dt > 0.0):
        raise ValidationError(f"dt must be positive, got {dt!r}")

    def integrand(x: float) -> float:
        if abs(x) < 1e-8:
            return 1.0 - x * x / 12.0
        return 2.0 * (1.0 - math.cos(x)) / (x * x)

    head, _ = quad(integrand, 0.0, 1.0)
    osc, _ = quad(lambda x: 2.0 / (x * x), 1.0, np.inf, weight="cos", wvar=1.0)
    return 2.0 * (head + 2.0 - osc) * hbar / dt


def chi_bar_squared_integral(dt: float, hbar: float = 1.0) -> float:
    """Quadrature of ``int |chi_bar(dE)|^2 dE`` (a box of height 1, half-width pi hbar/dt)."""
    if not (dt > 0.0):
        raise ValidationError(f"dt must be positive, got {dt!r}")
    w = math.pi * hbar / dt
    value, _ = quad(lambda e: chi_bar(e, dt, hbar), -2.0 * w, 2.0 * w, points=[-w, w])
    return float(value)


def applicability_window(spec, margin: float = 10.0) -> TimescaleReport:
    """Check whether a system's window length separates the relevant timescales.

    ``t_fast`` is ``hbar`` over the smallest positive energy gap among coupled
    pairs outside the shell (these are the oscillations the window must
    average away; zero when none exist).  The amplitude timescale is reported
    in two forms, ``hbar / max |V_ab|`` and the inverse of the largest total
    departure rate of the rate matrix; the admissibility flag uses the smaller
    of the two, requiring ``t_fast * margin <= dt <= t_slow / margin``.
    Systems with no coupling at all get an infinite amplitude timescale.
    """
    from .master_evolution import build_q_matrix  # deferred to avoid an import cycle

    if not (margin > 0.0):
        raise ValidationError(f"margin must be positive, got {margin!r}")
    v = spec.interaction
    e = spec.energies
    dt = spec.window.dt
    hbar = spec.hbar
    coupled = np.abs(v) > 0.0
    if not np.any(coupled):
        t_amp_coupling = math.inf
        t_amp_rate = math.inf
        t_fast = 0.0
    else:
        t_amp_coupling = hbar / float(np.abs(v).max())
        gaps = np.abs(e[:, None] - e[None, :])
        outside = coupled & (gaps > spec.window.half_width)
        t_fast = hbar / float(gaps[outside].min()) if np.any(outside) else 0.0
        q = build_q_matrix(spec)
        max_departure = float(np.abs(q.diagonal()).max())
        t_amp_rate = 1.0 / max_departure if max_departure > 0.0 else math.inf
    t_slow = min(t_amp_coupling, t_amp_rate)
    admissible = (t_fast * margin <= dt) and (dt <= t_slow / margin)
    return TimescaleReport(
        dt=dt,
        t_fast=t_fast,
        t_amplitude_coupling=t_amp_coupling,
        t_amplitude_rate=t_amp_rate,
        margin=margin,
        admissible=bool(admissible),
    )
