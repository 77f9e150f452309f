"""Periodic zero-mean dither signals u(t, theta) and their running integrals.

Built-in waveforms share the canonical period T = 2*pi; harmonic content is
carried by an integer multiplier n, so e.g. ``sine(3)`` evaluates to
sin(3*theta). All built-ins are independent of the slow-time argument t;
genuinely t-dependent inputs are supported through :func:`custom`.

Conventions for the discontinuous kinds:

* ``square(n)``  = sign(sin(n*theta)), value 0 at the crossings (odd symmetry
  keeps the average exactly zero).
* ``triangle(n)``: odd, piecewise linear, peak +1 at theta = pi/(2n).
* ``sawtooth(n)``: rises -1 -> 1 over each period with a jump at
  theta = 2*pi*k/n; the value at the jump itself is +1 (range (-1, 1]).

Jump locations are detected in phase arithmetic with a 1e-9 relative snap so
that quadrature grids that land exactly on a discontinuity sample the
midpoint value instead of an arbitrary side.

Signals are immutable after construction and safe to evaluate from any
number of concurrent workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._quadrature import even_intervals, simpson_uniform

TWO_PI = 2.0 * math.pi

SINUSOID_KINDS = ("sine", "cosine")
BUILTIN_KINDS = ("sine", "cosine", "square", "triangle", "sawtooth")

_JUMP_SNAP = 1e-9  # phase fraction within which a sample counts as "on a jump"


def _frac_phase(theta, n: int):
    """Phase of the n-th harmonic folded to [0, 1), snapped onto exact jumps."""
    r = np.asarray(theta, dtype=float) * (n / TWO_PI)
    r = r - np.floor(r)
    r = np.where(np.abs(r - 1.0) < _JUMP_SNAP, 0.0, r)
    r = np.where(np.abs(r) < _JUMP_SNAP, 0.0, r)
    r = np.where(np.abs(r - 0.5) < _JUMP_SNAP, 0.5, r)
    return r


def _waveform(kind: str, n: int, theta, at_jump_midpoint: bool = False):
    """Evaluate a built-in waveform; vectorized over theta."""
    if kind == "sine":
        return np.sin(n * np.asarray(theta, dtype=float))
    if kind == "cosine":
        return np.cos(n * np.asarray(theta, dtype=float))
    r = _frac_phase(theta, n)
    if kind == "square":
        return np.where(r == 0.0, 0.0, np.where(r == 0.5, 0.0, np.where(r < 0.5, 1.0, -1.0)))
    if kind == "triangle":
        return np.where(r <= 0.25, 4.0 * r, np.where(r <= 0.75, 2.0 - 4.0 * r, 4.0 * r - 4.0))
    if kind == "sawtooth":
        jump_value = 0.0 if at_jump_midpoint else 1.0
        return np.where(r == 0.0, jump_value, 2.0 * r - 1.0)
    raise ValueError(f"unknown waveform kind {kind!r}")


@dataclass(frozen=True)
class DitherSignal:
    """A T-periodic, zero-mean, bounded input u(t, theta).

    ``sup_bound`` and ``lipschitz_t`` are the *claimed* bound M on |u| and
    Lipschitz constant L of u(., theta); :func:`validate_assumptions`
    measures both on sample grids and can falsify, never prove.
    """

    kind: str
    harmonic: int = 1
    period: float = TWO_PI
    sup_bound: float = 1.0
    lipschitz_t: float = 0.0
    fn: Callable | None = None
    t_dependent: bool = False

    def __post_init__(self):
        if self.period <= 0.0:
            raise ValueError("dither period must be positive")
        if self.harmonic < 1 or self.harmonic != int(self.harmonic):
            raise ValueError("harmonic must be a positive integer")
        if self.sup_bound < 0.0 or self.lipschitz_t < 0.0:
            raise ValueError("claimed bounds must be nonnegative")
        if self.kind == "custom":
            if self.fn is None:
                raise ValueError("custom signals need an evaluator")
        elif self.kind not in BUILTIN_KINDS:
            raise ValueError(f"unknown signal kind {self.kind!r}")

    @property
    def name(self) -> str:
        return f"{self.kind}:{self.harmonic}" if self.kind != "custom" else "custom"

    @property
    def is_sinusoid(self) -> bool:
        return self.kind in SINUSOID_KINDS

    @property
    def angular_rate(self) -> float:
        """Fastest angular rate present in theta (used for step-size control)."""
        return TWO_PI * self.harmonic / self.period

    def __call__(self, t, theta):
        return self.eval(t, theta)

    def eval(self, t, theta):
        """u(t, theta); broadcasts over theta. Built-ins ignore t."""
        if self.kind == "custom":
            return self.fn(t, theta)
        return _waveform(self.kind, self.harmonic, theta)

    def eval_for_quadrature(self, t, theta):
        """Like :meth:`eval` but samples jump nodes at their midpoint value."""
        if self.kind == "custom":
            return self.fn(t, theta)
        return _waveform(self.kind, self.harmonic, theta, at_jump_midpoint=True)


def sine(n: int = 1) -> DitherSignal:
    return DitherSignal("sine", n)


def cosine(n: int = 1) -> DitherSignal:
    return DitherSignal("cosine", n)


def square(n: int = 1) -> DitherSignal:
    return DitherSignal("square", n)


def triangle(n: int = 1) -> DitherSignal:
    return DitherSignal("triangle", n)


def sawtooth(n: int = 1) -> DitherSignal:
    return DitherSignal("sawtooth", n)


def custom(fn: Callable, period: float = TWO_PI, sup_bound: float = 1.0,
           lipschitz_t: float = 0.0, t_dependent: bool = True,
           harmonic: int = 1) -> DitherSignal:
    """Wrap a user evaluator fn(t, theta) -> real (broadcasting over theta)."""
    return DitherSignal("custom", harmonic, period, sup_bound, lipschitz_t,
                        fn=fn, t_dependent=t_dependent)


def from_name(name: str) -> DitherSignal:
    """Parse a ``kind:n`` string as used in scenario files, e.g. ``sine:2``."""
    kind, _, tail = name.partition(":")
    kind = kind.strip()
    if kind not in BUILTIN_KINDS:
        raise ValueError(f"unknown signal name {name!r}")
    n = int(tail) if tail else 1
    return DitherSignal(kind, n)


def eval_signal(signal: DitherSignal, t: float, theta: float) -> float:
    """Functional form of :meth:`DitherSignal.eval` for scalar arguments."""
    return float(signal.eval(t, theta))


def partial_integral(signal: DitherSignal, t: float, theta: float,
                     nodes: int = 4096) -> float:
    """Running integral of u(t, .) from 0 to theta.

    Sinusoids use the closed forms (1 - cos(n*theta))/n and sin(n*theta)/n
    and ignore ``nodes``; every other kind is integrated with composite
    Simpson on ``nodes`` subintervals (rounded up to an even count).
    """
    if signal.kind == "sine":
        n = signal.harmonic
        return float((1.0 - math.cos(n * theta)) / n)
    if signal.kind == "cosine":
        n = signal.harmonic
        return float(math.sin(n * theta) / n)
    if theta == 0.0:
        return 0.0
    n_int = even_intervals(nodes)
    grid = np.linspace(0.0, theta, n_int + 1)
    h = theta / n_int
    return simpson_uniform(signal.eval_for_quadrature(t, grid), h)


@dataclass(frozen=True)
class SignalValidationReport:
    """Measured defects of the periodicity / zero-mean / bound / Lipschitz claims."""

    signal_name: str
    periodic: bool
    zero_mean: bool
    bounded: bool
    lipschitz: bool
    max_periodicity_defect: float
    max_mean_defect: float
    measured_sup: float
    claimed_sup: float
    max_lipschitz_quotient: float
    claimed_lipschitz: float

    @property
    def passed(self) -> bool:
        return self.periodic and self.zero_mean and self.bounded and self.lipschitz

    def summary(self) -> str:
        rows = [
            ("periodicity", self.periodic, f"max defect {self.max_periodicity_defect:.3e}"),
            ("zero average", self.zero_mean, f"max mean defect {self.max_mean_defect:.3e}"),
            ("sup bound", self.bounded,
             f"measured {self.measured_sup:.6g} vs claimed {self.claimed_sup:.6g}"),
            # finite quotients can only falsify the Lipschitz claim
            ("lipschitz in t", self.lipschitz,
             "no violation found" if self.lipschitz else
             f"quotient {self.max_lipschitz_quotient:.6g} exceeds {self.claimed_lipschitz:.6g}"),
        ]
        lines = [f"signal {self.signal_name}:"]
        for label, ok, detail in rows:
            lines.append(f"  [{'PASS' if ok else 'FAIL'}] {label}: {detail}")
        return "\n".join(lines)


def validate_assumptions(signal: DitherSignal, t_samples=None, theta_samples=None,
                         tol: float = 1e-9) -> SignalValidationReport:
    """Measure the periodicity, zero-average, bound and Lipschitz claims on grids.

    Default theta grid uses cell midpoints over one period so that
    discontinuous kinds are sampled away from their jump points.
    """
    if signal.period <= 0.0:
        raise ValueError("dither period must be positive")
    if tol <= 0.0:
        raise ValueError("tolerance must be positive")
    T = signal.period
    if t_samples is None:
        t_samples = np.linspace(-2.0, 2.0, 9)
    if theta_samples is None:
        cell = T / 1024
        theta_samples = np.arange(1024) * cell + 0.5 * cell
    t_samples = np.atleast_1d(np.asarray(t_samples, dtype=float))
    theta_samples = np.atleast_1d(np.asarray(theta_samples, dtype=float))
    if t_samples.size == 0 or theta_samples.size == 0:
        raise ValueError("sample grids must be non-empty")

    values = np.stack([np.broadcast_to(signal.eval(t, theta_samples), theta_samples.shape)
                       for t in t_samples])
    shifted = np.stack([np.broadcast_to(signal.eval(t, theta_samples + T), theta_samples.shape)
                        for t in t_samples])

    period_defect = float(np.max(np.abs(shifted - values)))
    measured_sup = float(np.max(np.abs(values)))

    n_int = even_intervals(4096)
    grid = np.linspace(0.0, T, n_int + 1)
    h = T / n_int
    mean_defect = max(
        abs(simpson_uniform(np.broadcast_to(signal.eval_for_quadrature(t, grid), grid.shape), h)) / T
        for t in t_samples
    )

    lip_quot = 0.0
    if t_samples.size > 1:
        for a in range(t_samples.size):
            for b in range(a + 1, t_samples.size):
                dt = abs(t_samples[a] - t_samples[b])
                if dt == 0.0:
                    continue
                q = np.max(np.abs(values[a] - values[b])) / dt
                lip_quot = max(lip_quot, float(q))

    return SignalValidationReport(
        signal_name=signal.name,
        periodic=period_defect <= tol,
        zero_mean=mean_defect <= tol,
        bounded=measured_sup <= signal.sup_bound + tol,
        lipschitz=lip_quot <= signal.lipschitz_t + tol,
        max_periodicity_defect=period_defect,
        max_mean_defect=float(mean_defect),
        measured_sup=measured_sup,
        claimed_sup=signal.sup_bound,
        max_lipschitz_quotient=lip_quot,
        claimed_lipschitz=signal.lipschitz_t,
    )
