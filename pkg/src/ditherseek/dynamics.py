"""Time-varying vector fields on R^n and the oscillatory input-affine form.

An :class:`InputAffineSystem` bundles a drift field with m (field, dither)
channels and a frequency parameter omega; :func:`assemble_rhs` turns it into
the single field

    F(t, x) = b0(t, x) + sum_i omega**gamma * u_i(t, omega*t) * b_i(t, x)

with gamma = 1/2 by default. The gamma = 1 variant is exposed only to let the
amplitude scaling be contrasted experimentally; the averaged construction in
:mod:`ditherseek.liebracket` refuses it.

Fields and systems are immutable after construction; evaluation is
reentrant and side-effect free.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .signals import DitherSignal


class FieldEvaluationError(RuntimeError):
    """A vector field produced non-finite values."""


@dataclass(frozen=True)
class VectorField:
    """A field b(t, x) on R^n with an optional analytic state-Jacobian.

    ``fn`` maps (t, x) -> array of shape (n,); ``jac`` maps (t, x) -> (n, n)
    with row i holding the gradient of component i. ``oscillation_rate`` is
    the fastest angular rate the field varies with in t (0 for autonomous
    fields); integrators use it to resolve the fast scale.
    """

    dim: int
    fn: Callable[[float, np.ndarray], np.ndarray]
    jac: Callable[[float, np.ndarray], np.ndarray] | None = None
    oscillation_rate: float = 0.0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("field dimension must be positive")

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        out = np.asarray(self.fn(t, np.asarray(x, dtype=float)), dtype=float)
        if out.shape != (self.dim,):
            raise ValueError(f"field returned shape {out.shape}, expected ({self.dim},)")
        return out

    def jacobian(self, t: float, x: np.ndarray, h: float | None = None) -> np.ndarray:
        """Analytic Jacobian when supplied, else central finite differences."""
        if self.jac is not None:
            J = np.asarray(self.jac(t, np.asarray(x, dtype=float)), dtype=float)
            if J.shape != (self.dim, self.dim):
                raise ValueError(f"jacobian returned shape {J.shape}")
            return J
        return finite_diff_jacobian(self, t, x, h)

    @property
    def has_jacobian(self) -> bool:
        return self.jac is not None

    @staticmethod
    def zero(dim: int) -> "VectorField":
        z = np.zeros(dim)
        zj = np.zeros((dim, dim))
        return VectorField(dim, lambda t, x: z, jac=lambda t, x: zj)

    @staticmethod
    def constant(vec) -> "VectorField":
        v = np.asarray(vec, dtype=float)
        zj = np.zeros((v.size, v.size))
        return VectorField(v.size, lambda t, x: v, jac=lambda t, x: zj)


def finite_diff_jacobian(fld: VectorField, t: float, x: np.ndarray,
                         h: float | None = None) -> np.ndarray:
    """Central-difference Jacobian, column k = (F(x + h e_k) - F(x - h e_k)) / 2h.

    Default step 1e-6 * max(1, |x|_inf), the usual double-precision
    compromise between truncation and roundoff.
    """
    x = np.asarray(x, dtype=float)
    if h is None:
        h = 1e-6 * max(1.0, float(np.max(np.abs(x))) if x.size else 1.0)
    if h <= 0.0:
        raise ValueError("finite-difference step must be positive")
    J = np.empty((fld.dim, x.size))
    for k in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[k] += h
        xm[k] -= h
        J[:, k] = (fld(t, xp) - fld(t, xm)) / (2.0 * h)
    if not np.all(np.isfinite(J)):
        raise FieldEvaluationError("non-finite values in finite-difference Jacobian")
    return J


@dataclass(frozen=True)
class InputAffineSystem:
    """Drift plus m dithered channels and the oscillation parameter omega."""

    drift: VectorField
    channels: tuple[tuple[VectorField, DitherSignal], ...]
    omega: float
    amplitude_exponent: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(tuple(c) for c in self.channels))
        if self.omega <= 0.0:
            raise ValueError("omega must be positive")
        if self.amplitude_exponent not in (0.5, 1.0):
            raise ValueError("amplitude exponent must be 0.5 or 1.0")
        for fld, sig in self.channels:
            if fld.dim != self.drift.dim:
                raise ValueError("all channel fields must share the drift dimension")
            if not isinstance(sig, DitherSignal):
                raise TypeError("channel dither must be a DitherSignal")

    @property
    def dim(self) -> int:
        return self.drift.dim

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    @property
    def fast_rate(self) -> float:
        """Largest effective angular rate among dithers and channel fields."""
        rates = [self.drift.oscillation_rate]
        for fld, sig in self.channels:
            rates.append(self.omega * sig.angular_rate)
            rates.append(fld.oscillation_rate)
        return max(rates)


def assemble_rhs(sys: InputAffineSystem) -> VectorField:
    """Combine drift and channels into the full oscillatory right-hand side.

    The Jacobian of the result is the same combination of the channel
    Jacobians and is supplied only when drift and every channel carry one.
    """
    drift = sys.drift
    channels = sys.channels
    gain = sys.omega ** sys.amplitude_exponent
    omega = sys.omega

    def fn(t, x):
        out = drift(t, x).copy()
        for fld, sig in channels:
            out += gain * float(sig.eval(t, omega * t)) * fld(t, x)
        if not np.all(np.isfinite(out)):
            raise FieldEvaluationError("non-finite right-hand side")
        return out

    jac = None
    if drift.has_jacobian and all(fld.has_jacobian for fld, _ in channels):
        def jac(t, x):
            J = drift.jacobian(t, x).copy()
            for fld, sig in channels:
                J += gain * float(sig.eval(t, omega * t)) * fld.jacobian(t, x)
            return J

    return VectorField(drift.dim, fn, jac=jac, oscillation_rate=sys.fast_rate)
