"""Lie brackets, dither cross-correlation coefficients, and the averaged system.

The averaged counterpart of an oscillatory input-affine system is

    dz/dt = b0(t, z) + sum_{i<j} nu_ji(t) * [b_i, b_j](t, z)

where [f, g] = (dg/dx) f - (df/dx) g and

    nu_ji(t) = (1/T) * integral_0^T u_j(t, theta) * integral_0^theta u_i(t, tau) dtau dtheta.

Index convention: the first subscript names the *outer* signal (the one the
running integral of the other is correlated against). For matched sinusoids
nu(outer=sine(n), inner=cosine(n)) = +1/(2n) and
nu(outer=cosine(n), inner=sine(n)) = -1/(2n); every other sinusoid pairing,
including distinct harmonics, gives exactly zero. The sign convention is
pinned by the scalar seeking loop: channels (alpha, cosine) and (f, sine)
must average to +(alpha/2) * grad f.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ._quadrature import cumulative_simpson, even_intervals, simpson_uniform
from .dynamics import InputAffineSystem, VectorField
from .signals import DitherSignal

# quadrature values below this are treated as structural zeros when the
# averaged field is assembled
_NU_ZERO_TOL = 1e-12


class PrecisionWarning(UserWarning):
    """A bracket fell back to finite-difference Jacobians."""


class UnsupportedSignalError(ValueError):
    """Closed-form coefficients exist only for sinusoidal dithers."""


@dataclass(frozen=True)
class NuCoefficient:
    """One averaged cross-correlation coefficient nu_ji.

    ``pair`` holds the (outer, inner) channel indices, 1-based with
    outer > inner when produced by the system builder.
    """

    value: float
    pair: tuple[int, int] = (2, 1)
    method: str = "closed_form"


def lie_bracket(f: VectorField, g: VectorField) -> VectorField:
    """The field (t, x) -> Jg(t,x) f(t,x) - Jf(t,x) g(t,x).

    Falls back to central differences for fields without analytic Jacobians
    and emits a :class:`PrecisionWarning` once when it does.
    """
    if f.dim != g.dim:
        raise ValueError("bracket operands must share a dimension")
    if not (f.has_jacobian and g.has_jacobian):
        warnings.warn(
            "lie_bracket falling back to finite-difference Jacobians; "
            "expect ~1e-5 accuracy instead of machine precision",
            PrecisionWarning, stacklevel=2)

    def fn(t, x):
        return g.jacobian(t, x) @ f(t, x) - f.jacobian(t, x) @ g(t, x)

    rate = max(f.oscillation_rate, g.oscillation_rate)
    return VectorField(f.dim, fn, oscillation_rate=rate)


def nu_closed_form(outer_kind: str, outer_n: int, inner_kind: str, inner_n: int,
                   pair: tuple[int, int] = (2, 1)) -> NuCoefficient:
    """Closed-form nu for a sinusoid pair; raises for any other kind."""
    for kind in (outer_kind, inner_kind):
        if kind not in ("sine", "cosine"):
            raise UnsupportedSignalError(
                f"no closed form for {kind!r} dithers, use nu_quadrature")
    if outer_n != inner_n or outer_kind == inner_kind:
        value = 0.0
    elif outer_kind == "sine":
        value = +0.5 / outer_n
    else:
        value = -0.5 / outer_n
    return NuCoefficient(value, pair=pair, method="closed_form")


def nu_quadrature(outer: DitherSignal, inner: DitherSignal, t: float = 0.0,
                  nodes: int = 4096, pair: tuple[int, int] = (2, 1)) -> NuCoefficient:
    """Composite-Simpson evaluation of nu over one shared period.

    The inner running integral is accumulated with cumulative Simpson on the
    same grid. ``nodes`` counts subintervals (rounded up to even, >= 8).
    """
    if nodes < 8:
        raise ValueError("nu quadrature needs at least 8 nodes")
    if abs(outer.period - inner.period) > 1e-12 * max(outer.period, inner.period):
        raise ValueError("nu is defined for signals sharing one period")
    T = outer.period
    n_int = even_intervals(nodes, minimum=8)
    grid = np.linspace(0.0, T, n_int + 1)
    h = T / n_int
    inner_running = cumulative_simpson(
        np.broadcast_to(inner.eval_for_quadrature(t, grid), grid.shape).astype(float), h)
    outer_vals = np.broadcast_to(outer.eval_for_quadrature(t, grid), grid.shape)
    value = simpson_uniform(outer_vals * inner_running, h) / T
    return NuCoefficient(value, pair=pair, method="quadrature")


def _parse_nu_method(nu_method: str, nodes: int) -> tuple[str, int]:
    if nu_method == "closed_form":
        return "closed_form", nodes
    if nu_method == "quadrature":
        return "quadrature", nodes
    if nu_method.startswith("quadrature:"):
        return "quadrature", int(nu_method.split(":", 1)[1])
    raise ValueError(f"unknown nu method {nu_method!r}")


def _nu_for_pair(outer: DitherSignal, inner: DitherSignal, method: str,
                 nodes: int, t: float, pair: tuple[int, int]) -> NuCoefficient:
    if method == "closed_form":
        return nu_closed_form(outer.kind, outer.harmonic, inner.kind, inner.harmonic,
                              pair=pair)
    return nu_quadrature(outer, inner, t=t, nodes=nodes, pair=pair)


def build_lie_bracket_system(sys: InputAffineSystem, nu_method: str = "closed_form",
                             nodes: int = 4096) -> VectorField:
    """Assemble the averaged field b0 + sum_{i<j} nu_ji [b_i, b_j].

    Only the sqrt(omega) amplitude scaling averages to this system, so any
    other ``amplitude_exponent`` is refused. Coefficients are computed once
    per channel pair; pairs involving genuinely t-dependent custom dithers
    are re-integrated at every evaluation time. Self-pairs never contribute:
    for zero-mean dithers their averaged term vanishes identically.
    """
    if sys.amplitude_exponent != 0.5:
        raise ValueError(
            "the averaged system exists only for amplitude exponent 0.5 "
            f"(got {sys.amplitude_exponent})")
    method, nodes = _parse_nu_method(nu_method, nodes)

    static_terms: list[tuple[VectorField, VectorField, float]] = []
    dynamic_terms: list[tuple[VectorField, VectorField, DitherSignal, DitherSignal, tuple[int, int]]] = []
    # only channel fields are differentiated; the drift enters undifferentiated
    fallback = False
    m = sys.n_channels
    for i in range(m):
        f_i, s_i = sys.channels[i]
        for j in range(i + 1, m):
            f_j, s_j = sys.channels[j]
            if s_i.t_dependent or s_j.t_dependent:
                if method == "closed_form":
                    raise UnsupportedSignalError(
                        "t-dependent dithers need nu_method='quadrature'")
                dynamic_terms.append((f_i, f_j, s_j, s_i, (j + 1, i + 1)))
                fallback = fallback or not (f_i.has_jacobian and f_j.has_jacobian)
                continue
            nu = _nu_for_pair(s_j, s_i, method, nodes, 0.0, (j + 1, i + 1))
            if abs(nu.value) <= _NU_ZERO_TOL:
                continue
            static_terms.append((f_i, f_j, nu.value))
            fallback = fallback or not (f_i.has_jacobian and f_j.has_jacobian)

    if fallback:
        warnings.warn(
            "averaged system uses finite-difference Jacobians for at least "
            "one bracket", PrecisionWarning, stacklevel=2)

    drift = sys.drift
    rates = [drift.oscillation_rate]
    for f_i, f_j, _ in static_terms:
        rates.extend((f_i.oscillation_rate, f_j.oscillation_rate))
    for f_i, f_j, *_ in dynamic_terms:
        rates.extend((f_i.oscillation_rate, f_j.oscillation_rate))

    def fn(t, z):
        out = drift(t, z).copy()
        for f_i, f_j, value in static_terms:
            out += value * (f_j.jacobian(t, z) @ f_i(t, z) - f_i.jacobian(t, z) @ f_j(t, z))
        for f_i, f_j, s_j, s_i, pair in dynamic_terms:
            value = nu_quadrature(s_j, s_i, t=t, nodes=nodes, pair=pair).value
            if abs(value) <= _NU_ZERO_TOL:
                continue
            out += value * (f_j.jacobian(t, z) @ f_i(t, z) - f_i.jacobian(t, z) @ f_j(t, z))
        return out

    return VectorField(sys.dim, fn, oscillation_rate=max(rates))
