"""Extremum-seeking architectures and their analytic averaged fields.

Agents live in the plane. The packed state is x = [xbar, xbar_e] where
xbar in R^(2N) stacks the agent positions and xbar_e in R^N stacks the
washout-filter states (one per agent, dx_e/dt = -h*x_e + f(xbar)).

Each agent injects a sine/cosine dither pair at its own frequency
a_i * omega. Rational frequency ratios are decomposed into integer
harmonics n_i of a common base omega/q so that every dither shares the
canonical 2*pi period; the sqrt(n_i) factor moves into the channel field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .dynamics import InputAffineSystem, VectorField
from .signals import cosine, sine


def _fd_gradient(fn: Callable[[np.ndarray], float], x: np.ndarray,
                 h: float | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if h is None:
        h = 1e-6 * max(1.0, float(np.max(np.abs(x))) if x.size else 1.0)
    g = np.empty(x.size)
    for k in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[k] += h
        xm[k] -= h
        g[k] = (fn(xp) - fn(xm)) / (2.0 * h)
    return g


@dataclass(frozen=True)
class AgentMap:
    """An individual objective f_i: R^(2N) -> R with optional analytic gradient."""

    index: int
    fn: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray] | None = None

    def __call__(self, xbar: np.ndarray) -> float:
        return float(self.fn(xbar))

    def gradient(self, xbar: np.ndarray) -> np.ndarray:
        if self.grad is not None:
            return np.asarray(self.grad(xbar), dtype=float)
        return _fd_gradient(self.fn, xbar)


@dataclass(frozen=True)
class PotentialGame:
    """N agent maps tied together by a shared potential.

    The compatibility requirement is that the agent-i position block of
    grad f_i equals the same block of grad F at every point; it is measured,
    not assumed, by :func:`check_potential_compatibility`.
    """

    maps: tuple[AgentMap, ...]
    potential: Callable[[np.ndarray], float]
    potential_grad: Callable[[np.ndarray], np.ndarray] | None = None
    maximizer: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))
        if not self.maps:
            raise ValueError("a game needs at least one agent map")
        if self.maximizer is not None:
            object.__setattr__(self, "maximizer",
                               np.asarray(self.maximizer, dtype=float))

    @property
    def n_agents(self) -> int:
        return len(self.maps)

    @property
    def dim(self) -> int:
        return 2 * self.n_agents

    def potential_gradient(self, xbar: np.ndarray) -> np.ndarray:
        if self.potential_grad is not None:
            return np.asarray(self.potential_grad(xbar), dtype=float)
        return _fd_gradient(self.potential, xbar)


@dataclass(frozen=True)
class AgentParams:
    """Per-agent loop parameters.

    c is the feedback gain, alpha the dither amplitude, h the washout pole,
    a the rational dither-frequency ratio and d the rational angular-rate
    ratio (unicycle only). c = 0 is admitted as a no-feedback diagnostic
    configuration even though the convergence theory needs c > 0.
    """

    c: float
    alpha: float
    h: float
    a: Fraction
    d: Fraction | None = None

    def __post_init__(self):
        object.__setattr__(self, "a", Fraction(self.a))
        if self.d is not None:
            object.__setattr__(self, "d", Fraction(self.d))
        if self.c < 0.0:
            raise ValueError("feedback gain c must be nonnegative")
        if self.alpha <= 0.0 or self.h <= 0.0:
            raise ValueError("alpha and h must be positive")
        if self.a <= 0:
            raise ValueError("frequency ratio a must be positive")
        if self.d is not None and self.d <= 0:
            raise ValueError("angular-rate ratio d must be positive")


@dataclass(frozen=True)
class ScenarioState:
    """Unpacked view of the stacked state [positions, filter states]."""

    positions: np.ndarray
    filters: np.ndarray

    @staticmethod
    def unpack(x: np.ndarray) -> "ScenarioState":
        x = np.asarray(x, dtype=float)
        if x.size % 3 != 0:
            raise ValueError("agent state length must be 3N")
        n = x.size // 3
        return ScenarioState(x[:2 * n].copy(), x[2 * n:].copy())

    def pack(self) -> np.ndarray:
        return np.concatenate([self.positions, self.filters])

    def agent_position(self, i: int) -> np.ndarray:
        return self.positions[2 * i:2 * i + 2]


def frequency_decomposition(ratios) -> tuple[int, list[int]]:
    """Rewrite rational ratios a_i = p_i/q_i as integer harmonics of omega/q.

    Returns q = prod q_i and n_i = p_i * prod_{j != i} q_j, which satisfy
    a_i * omega = n_i * (omega / q) exactly in rational arithmetic.
    """
    fracs = [Fraction(r) for r in ratios]
    if any(r <= 0 for r in fracs):
        raise ValueError("frequency ratios must be positive")
    q = math.prod(r.denominator for r in fracs)
    harmonics = [int(r.numerator * (q // r.denominator)) for r in fracs]
    return q, harmonics


def _check_params(game: PotentialGame, params) -> list[AgentParams]:
    params = list(params)
    if len(params) != game.n_agents:
        raise ValueError("need one parameter set per agent")
    ratios = [p.a for p in params]
    if len(set(ratios)) != len(ratios):
        raise ValueError("dither frequency ratios must be distinct across agents")
    return params


def _drift_field(game: PotentialGame, params: list[AgentParams]) -> VectorField:
    n = game.n_agents
    dim = 3 * n
    maps = game.maps
    hs = np.array([p.h for p in params])

    def fn(t, x):
        xbar = x[:2 * n]
        out = np.zeros(dim)
        for i in range(n):
            out[2 * n + i] = -hs[i] * x[2 * n + i] + maps[i](xbar)
        return out

    def jac(t, x):
        xbar = x[:2 * n]
        J = np.zeros((dim, dim))
        for i in range(n):
            J[2 * n + i, :2 * n] = maps[i].gradient(xbar)[:2 * n]
            J[2 * n + i, 2 * n + i] -= hs[i]
        return J

    return VectorField(dim, fn, jac=jac)


def build_single_integrator(game: PotentialGame, params, omega: float) -> InputAffineSystem:
    """Oscillatory multi-agent system with single-integrator position dynamics.

    Per agent the position block moves with

        dx1/dt = c*(f - x_e*h) * sqrt(w_i) * sin(w_i t) + alpha * sqrt(w_i) * cos(w_i t)
        dx2/dt = -c*(f - x_e*h) * sqrt(w_i) * cos(w_i t) + alpha * sqrt(w_i) * sin(w_i t)

    with w_i = a_i * omega, rewritten on the common base frequency so every
    channel carries a sine(n_i) or cosine(n_i) dither and a sqrt(n_i) field
    scaling. All channel Jacobians are supplied analytically.
    """
    params = _check_params(game, params)
    q, harmonics = frequency_decomposition([p.a for p in params])
    omega_tilde = omega / q
    n = game.n_agents
    dim = 3 * n

    channels = []
    for i, (p, n_i) in enumerate(zip(params, harmonics)):
        s = math.sqrt(n_i)
        m = game.maps[i]
        c, alpha, h = p.c, p.alpha, p.h
        row, col = 2 * i, 2 * i + 1
        filt = 2 * n + i

        def b1_fn(t, x, m=m, c=c, alpha=alpha, h=h, s=s, row=row, col=col, filt=filt):
            out = np.zeros(dim)
            out[row] = s * c * (m(x[:2 * n]) - x[filt] * h)
            out[col] = s * alpha
            return out

        def b1_jac(t, x, m=m, c=c, h=h, s=s, row=row, filt=filt):
            J = np.zeros((dim, dim))
            J[row, :2 * n] = s * c * m.gradient(x[:2 * n])[:2 * n]
            J[row, filt] = -s * c * h
            return J

        def b2_fn(t, x, m=m, c=c, alpha=alpha, h=h, s=s, row=row, col=col, filt=filt):
            out = np.zeros(dim)
            out[row] = s * alpha
            out[col] = -s * c * (m(x[:2 * n]) - x[filt] * h)
            return out

        def b2_jac(t, x, m=m, c=c, h=h, s=s, col=col, filt=filt):
            J = np.zeros((dim, dim))
            J[col, :2 * n] = -s * c * m.gradient(x[:2 * n])[:2 * n]
            J[col, filt] = s * c * h
            return J

        channels.append((VectorField(dim, b1_fn, jac=b1_jac), sine(n_i)))
        channels.append((VectorField(dim, b2_fn, jac=b2_jac), cosine(n_i)))

    return InputAffineSystem(_drift_field(game, params), tuple(channels), omega_tilde)


def analytic_lie_single_integrator(game: PotentialGame, params) -> VectorField:
    """Closed-form averaged field of the single-integrator architecture.

    Per agent, with g = f(zbar) - z_e*h and (d1, d2) the agent's own block
    of grad f:

        dz1/dt = (c*alpha*d1 - c^2*d2*g) / 2
        dz2/dt = (c*alpha*d2 + c^2*d1*g) / 2
        dz_e/dt = -z_e*h + f(zbar)
    """
    params = _check_params(game, params)
    for m in game.maps:
        if m.grad is None:
            raise ValueError("analytic averaged field needs analytic gradients")
    n = game.n_agents
    dim = 3 * n
    maps = game.maps

    def fn(t, z):
        zbar = z[:2 * n]
        out = np.zeros(dim)
        for i, p in enumerate(params):
            f_val = maps[i](zbar)
            grad = maps[i].gradient(zbar)
            d1, d2 = grad[2 * i], grad[2 * i + 1]
            g = f_val - z[2 * n + i] * p.h
            out[2 * i] = 0.5 * (p.c * p.alpha * d1 - p.c ** 2 * d2 * g)
            out[2 * i + 1] = 0.5 * (p.c * p.alpha * d2 + p.c ** 2 * d1 * g)
            out[2 * n + i] = -z[2 * n + i] * p.h + f_val
        return out

    return VectorField(dim, fn)


def build_unicycle(game: PotentialGame, params, Omega: float, omega: float) -> InputAffineSystem:
    """Oscillatory multi-agent system with unicycle position dynamics.

    Only the forward speed carries the seeking feedback; each heading is
    eliminated analytically as Omega_i * t (headings start at zero), which
    makes the channel fields time-varying with rate Omega_i = d_i * Omega.
    """
    params = _check_params(game, params)
    if Omega == 0.0:
        raise ValueError("base angular rate Omega must be nonzero")
    if any(p.d is None for p in params):
        raise ValueError("unicycle agents need an angular-rate ratio d")
    q, harmonics = frequency_decomposition([p.a for p in params])
    omega_tilde = omega / q
    n = game.n_agents
    dim = 3 * n

    channels = []
    for i, (p, n_i) in enumerate(zip(params, harmonics)):
        s = math.sqrt(n_i)
        m = game.maps[i]
        c, alpha, h = p.c, p.alpha, p.h
        W = float(p.d) * Omega
        row, col = 2 * i, 2 * i + 1
        filt = 2 * n + i

        def b1_fn(t, x, m=m, c=c, h=h, s=s, W=W, row=row, col=col, filt=filt):
            out = np.zeros(dim)
            g = s * c * (m(x[:2 * n]) - x[filt] * h)
            out[row] = g * math.cos(W * t)
            out[col] = g * math.sin(W * t)
            return out

        def b1_jac(t, x, m=m, c=c, h=h, s=s, W=W, row=row, col=col, filt=filt):
            J = np.zeros((dim, dim))
            grad = s * c * m.gradient(x[:2 * n])[:2 * n]
            cw, sw = math.cos(W * t), math.sin(W * t)
            J[row, :2 * n] = cw * grad
            J[row, filt] = -s * c * h * cw
            J[col, :2 * n] = sw * grad
            J[col, filt] = -s * c * h * sw
            return J

        def b2_fn(t, x, alpha=alpha, s=s, W=W, row=row, col=col):
            out = np.zeros(dim)
            out[row] = s * alpha * math.cos(W * t)
            out[col] = s * alpha * math.sin(W * t)
            return out

        zero_jac = np.zeros((dim, dim))

        def b2_jac(t, x, zero_jac=zero_jac):
            return zero_jac

        channels.append((VectorField(dim, b1_fn, jac=b1_jac, oscillation_rate=abs(W)),
                         sine(n_i)))
        channels.append((VectorField(dim, b2_fn, jac=b2_jac, oscillation_rate=abs(W)),
                         cosine(n_i)))

    return InputAffineSystem(_drift_field(game, params), tuple(channels), omega_tilde)


def analytic_lie_unicycle(game: PotentialGame, params, Omega: float) -> VectorField:
    """Closed-form averaged field of the unicycle architecture.

    Per agent, with (d1, d2) the agent's own gradient block and
    (cw, sw) = (cos(Omega_i t), sin(Omega_i t)):

        dz1/dt = (c*alpha/2) * cw * (d1*cw + d2*sw)
        dz2/dt = (c*alpha/2) * sw * (d1*cw + d2*sw)
        dz_e/dt = -z_e*h + f(zbar)

    The field is time-varying and periodic with period
    (2*pi/|Omega|) * prod(denominator(d_i)).
    """
    params = _check_params(game, params)
    if Omega == 0.0:
        raise ValueError("base angular rate Omega must be nonzero")
    if any(p.d is None for p in params):
        raise ValueError("unicycle agents need an angular-rate ratio d")
    for m in game.maps:
        if m.grad is None:
            raise ValueError("analytic averaged field needs analytic gradients")
    n = game.n_agents
    dim = 3 * n
    maps = game.maps
    rates = [float(p.d) * Omega for p in params]

    def fn(t, z):
        zbar = z[:2 * n]
        out = np.zeros(dim)
        for i, p in enumerate(params):
            f_val = maps[i](zbar)
            grad = maps[i].gradient(zbar)
            d1, d2 = grad[2 * i], grad[2 * i + 1]
            cw, sw = math.cos(rates[i] * t), math.sin(rates[i] * t)
            proj = 0.5 * p.c * p.alpha * (d1 * cw + d2 * sw)
            out[2 * i] = proj * cw
            out[2 * i + 1] = proj * sw
            out[2 * n + i] = -z[2 * n + i] * p.h + f_val
        return out

    return VectorField(dim, fn, oscillation_rate=abs(Omega) * max(float(p.d) for p in params))


def unicycle_period(params, Omega: float) -> float:
    """Shared period of the unicycle averaged field."""
    l = math.prod(Fraction(p.d).denominator for p in params)
    return 2.0 * math.pi / abs(Omega) * l


@dataclass(frozen=True)
class CompatibilityReport:
    """Block-gradient agreement between individual maps and the potential."""

    samples: int
    tol: float
    max_defect: float
    per_agent: tuple[float, ...]

    @property
    def passed(self) -> bool:
        return self.max_defect < self.tol

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        per = ", ".join(f"agent {i + 1}: {d:.3e}" for i, d in enumerate(self.per_agent))
        return (f"[{status}] potential compatibility: max block-gradient defect "
                f"{self.max_defect:.3e} over {self.samples} samples (tol {self.tol:g}); {per}")


def check_potential_compatibility(game: PotentialGame, samples: int = 1000,
                                  tol: float = 1e-6, seed: int = 0,
                                  halfwidth: float = 3.0) -> CompatibilityReport:
    """Measure max over random points of the own-block gradient discrepancy."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-halfwidth, halfwidth, size=(samples, game.dim))
    per_agent = np.zeros(game.n_agents)
    for x in pts:
        pot_grad = game.potential_gradient(x)
        for i, m in enumerate(game.maps):
            block = slice(2 * i, 2 * i + 2)
            defect = np.max(np.abs(m.gradient(x)[block] - pot_grad[block]))
            per_agent[i] = max(per_agent[i], defect)
    return CompatibilityReport(samples, tol, float(np.max(per_agent)), tuple(per_agent))


@dataclass(frozen=True)
class StationarityReport:
    """Finite-difference gradient norm of the potential at the claimed maximizer."""

    gradient_norm: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.gradient_norm < self.tol

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] maximizer stationarity: |grad F| = "
                f"{self.gradient_norm:.3e} (tol {self.tol:g})")


def check_maximizer_stationarity(game: PotentialGame,
                                 tol: float = 1e-5) -> StationarityReport:
    """Check the known-maximizer witness is a stationary point of the potential.

    Deliberately uses central finite differences of the potential itself, not
    a supplied gradient, so the witness is checked independently. A global
    verification of maximality is not attempted: it is undecidable for
    black-box maps.
    """
    if game.maximizer is None:
        raise ValueError("game has no known maximizer to check")
    grad = _fd_gradient(game.potential, game.maximizer)
    return StationarityReport(float(np.linalg.norm(grad)), tol)


def filter_equilibrium(game: PotentialGame, params, xbar: np.ndarray) -> np.ndarray:
    """Washout-state equilibrium [f_1(xbar)/h_1, ..., f_N(xbar)/h_N]."""
    params = list(params)
    xbar = np.asarray(xbar, dtype=float)
    return np.array([m(xbar) / p.h for m, p in zip(game.maps, params)])


def equilibrium_state(game: PotentialGame, params) -> np.ndarray:
    """Packed target state [maximizer, filter equilibrium at the maximizer]."""
    if game.maximizer is None:
        raise ValueError("game has no known maximizer")
    return np.concatenate([game.maximizer,
                           filter_equilibrium(game, params, game.maximizer)])


# ---------------------------------------------------------------------------
# scalar loop (one state, no washout filter)

def build_scalar_seeker(f: Callable[[float], float], grad_f: Callable[[float], float],
                        alpha: float, omega: float,
                        dithers=None) -> InputAffineSystem:
    """The basic one-dimensional seeking loop.

    dx/dt = alpha*sqrt(omega)*u_a(omega t) + f(x)*sqrt(omega)*u_b(omega t)
    with the default dither pair u_a = cosine(1), u_b = sine(1). Its averaged
    system is (alpha/2) * grad f.
    """
    if dithers is None:
        dithers = (cosine(1), sine(1))
    u_a, u_b = dithers

    const = VectorField.constant([alpha])

    def f_fn(t, x):
        return np.array([f(float(x[0]))])

    def f_jac(t, x):
        return np.array([[grad_f(float(x[0]))]])

    f_field = VectorField(1, f_fn, jac=f_jac)
    return InputAffineSystem(VectorField.zero(1), ((const, u_a), (f_field, u_b)), omega)


def analytic_lie_scalar(grad_f: Callable[[float], float], alpha: float) -> VectorField:
    """Averaged field (alpha/2) * grad f of the basic scalar loop."""

    def fn(t, z):
        return np.array([0.5 * alpha * grad_f(float(z[0]))])

    return VectorField(1, fn)


# ---------------------------------------------------------------------------
# bundled games

def three_agent_game() -> PotentialGame:
    """The bundled three-agent benchmark game.

    Agents a, b, c with coupled individual maps and the shared quadratic
    potential F(x) = -(x - x*)^T Q (x - x*) / 2, Q = diag(1,1,1,1,1,3),
    maximizer x* = [1, 1, -1, -1, -1, 1]. Cross terms in the individual maps
    involve only the *other* agents' coordinates, so own-block gradients
    agree with the potential's.
    """

    def f_a(x):
        return (-0.5 * (x[0] - 1.0) ** 2 - 0.5 * (x[1] - 1.0) ** 2
                + x[2] ** 2 + x[3] ** 2 + math.exp(-x[4] ** 2 - x[5] ** 2) - 10.0)

    def grad_f_a(x):
        e = math.exp(-x[4] ** 2 - x[5] ** 2)
        return np.array([-(x[0] - 1.0), -(x[1] - 1.0), 2.0 * x[2], 2.0 * x[3],
                         -2.0 * x[4] * e, -2.0 * x[5] * e])

    def f_b(x):
        return (-0.5 * (x[2] + 1.0) ** 2 - 0.5 * (x[3] + 1.0) ** 2
                + math.sin(x[0] + x[1]) - 10.0)

    def grad_f_b(x):
        cc = math.cos(x[0] + x[1])
        return np.array([cc, cc, -(x[2] + 1.0), -(x[3] + 1.0), 0.0, 0.0])

    def f_c(x):
        return -0.5 * (x[4] + 1.0) ** 2 - 1.5 * (x[5] - 1.0) ** 2 + 10.0

    def grad_f_c(x):
        return np.array([0.0, 0.0, 0.0, 0.0, -(x[4] + 1.0), -3.0 * (x[5] - 1.0)])

    xstar = np.array([1.0, 1.0, -1.0, -1.0, -1.0, 1.0])
    q_diag = np.array([1.0, 1.0, 1.0, 1.0, 1.0, 3.0])

    def potential(x):
        dx = np.asarray(x, dtype=float) - xstar
        return float(-0.5 * np.dot(dx, q_diag * dx))

    def potential_grad(x):
        return -q_diag * (np.asarray(x, dtype=float) - xstar)

    maps = (
        AgentMap(1, f_a, grad_f_a),
        AgentMap(2, f_b, grad_f_b),
        AgentMap(3, f_c, grad_f_c),
    )
    return PotentialGame(maps, potential, potential_grad, maximizer=xstar)


def quadratic_game(q_diag, xstar) -> PotentialGame:
    """N-agent game where every individual map equals the shared quadratic."""
    q_diag = np.asarray(q_diag, dtype=float)
    xstar = np.asarray(xstar, dtype=float)
    if q_diag.shape != xstar.shape or q_diag.size % 2 != 0:
        raise ValueError("q_diag and xstar must both have length 2N")
    if np.any(q_diag <= 0.0):
        raise ValueError("quadratic weights must be positive")

    def potential(x):
        dx = np.asarray(x, dtype=float) - xstar
        return float(-0.5 * np.dot(dx, q_diag * dx))

    def potential_grad(x):
        return -q_diag * (np.asarray(x, dtype=float) - xstar)

    n = q_diag.size // 2
    maps = tuple(AgentMap(i + 1, potential, potential_grad) for i in range(n))
    return PotentialGame(maps, potential, potential_grad, maximizer=xstar)
