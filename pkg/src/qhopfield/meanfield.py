"""Mean-field overlap dynamics of the driven-dissipative Hopfield network.

The closed equations of motion for the pattern overlaps read

    dM_z/dt = -M_z + A(M_z) + 2 Ω M_y
    dM_y/dt = -2 Ω M_z - M_y B(M_z) / 2
    dM_x/dt = -M_x B(M_z) / 2

with A and B site averages over the local energies h_i of the pattern.
Inverse temperature ``beta = math.inf`` selects the zero-temperature limit, where
tanh saturates to a sign and every sech² term vanishes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DivergenceError, NoFixedPointError


@dataclass(frozen=True)
class ModelParams:
    """A physical point (β, Ω, m) plus the solver settings used at that point.

    ``stability_omega_coeff`` is the constant multiplying Ω² in the stability
    functional evaluated by the capacity solver.
    """

    beta: float
    omega: float
    m: float
    tol: float = 1e-8
    max_iterations: int = 200
    stability_omega_coeff: float = 16.0

    def __post_init__(self):
        if not (self.beta >= 0):
            raise ValueError(f"beta must be >= 0, got {self.beta!r}")
        if not (self.omega >= 0) or math.isinf(self.omega):
            raise ValueError(f"omega must be finite and >= 0, got {self.omega!r}")
        if not (0.0 < self.m < 1.0):
            raise ValueError(f"m must lie in (0, 1), got {self.m!r}")

    @classmethod
    def from_temperature(cls, temperature, omega, m, **kw):
        if temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {temperature!r}")
        beta = math.inf if temperature == 0 else 1.0 / temperature
        return cls(beta=beta, omega=omega, m=m, **kw)

    @property
    def temperature(self) -> float:
        if math.isinf(self.beta):
            return 0.0
        return math.inf if self.beta == 0 else 1.0 / self.beta

    @property
    def zero_temperature(self) -> bool:
        return math.isinf(self.beta)


class OverlapState(NamedTuple):
    m_z: float
    m_y: float = 0.0
    m_x: float = 0.0

    def in_box(self, slack=0.0) -> bool:
        return all(abs(v) <= 1.0 + slack for v in self)


class FieldProfile:
    """Local energies h_i of one pattern; a single value is the homogeneous case."""

    def __init__(self, values):
        arr = np.atleast_1d(np.asarray(values, dtype=float))
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("a field profile needs at least one local energy")
        if not np.all(np.isfinite(arr)):
            raise ValueError("local energies must be finite")
        arr.setflags(write=False)
        self.values = arr

    @classmethod
    def homogeneous(cls, h: float) -> "FieldProfile":
        return cls([h])

    @classmethod
    def from_couplings(cls, couplings, pattern) -> "FieldProfile":
        """h_i = ξ_i / sqrt(N) Σ_{j≠i} J_ij ξ_j."""
        J = np.array(couplings, dtype=float)
        xi = np.asarray(pattern, dtype=float)
        np.fill_diagonal(J, 0.0)
        return cls(xi * (J @ xi) / math.sqrt(xi.size))

    def __len__(self):
        return self.values.size

    def __repr__(self):
        return f"FieldProfile({self.values.tolist()!r})"


def _as_fields(fields) -> FieldProfile:
    if isinstance(fields, FieldProfile):
        return fields
    return FieldProfile(fields)


def _saturated(beta, h, m_z):
    """tanh(β h m_z) and sech²(β h m_z) with the β = ∞ limit handled exactly."""
    if math.isinf(beta):
        x = h * m_z
        return np.sign(x), np.where(x == 0.0, 1.0, 0.0)
    a = np.tanh(beta * h * m_z)
    return a, 1.0 - a * a


def _drift_terms(m_z, fields, beta):
    """A, B and their derivatives with respect to M_z."""
    h = _as_fields(fields).values
    a, s = _saturated(beta, h, m_z)
    if beta == 0:
        return 0.0, 1.0, 0.0, 0.0
    if math.isinf(beta):
        # sech² vanishes faster than β² grows except on the h·m_z = 0 set
        if np.any(s > 0):
            return float(a.mean()), math.inf, math.inf, math.nan
        return float(a.mean()), 1.0, 0.0, 0.0
    q = (1.0 + m_z * a) * s
    a_m = beta * h * s
    # d/dM_z of (1 + M a)(1 - a²) with a = tanh(β h M)
    q_m = a * s + a_m * (m_z * (1.0 - 3.0 * a * a) - 2.0 * a)
    A = float(a.mean())
    B = 1.0 + 0.5 * beta**2 * float(q.mean())
    dA = float(a_m.mean())
    dB = 0.5 * beta**2 * float(q_m.mean())
    return A, B, dA, dB


def drift_a(m_z: float, fields, beta: float) -> float:
    """A(M_z) = (1/N) Σ_i tanh(β h_i M_z)."""
    return _drift_terms(m_z, fields, beta)[0]


def drift_b(m_z: float, fields, beta: float) -> float:
    """B(M_z) = 1 + β²/(2N) Σ_i (1 + M_z tanh)(1 - tanh²)."""
    return _drift_terms(m_z, fields, beta)[1]


def eom_rhs(state, params: ModelParams, fields) -> OverlapState:
    m_z, m_y, m_x = OverlapState(*state)
    A, B, _, _ = _drift_terms(m_z, fields, params.beta)
    w = params.omega
    return OverlapState(
        -m_z + A + 2.0 * w * m_y,
        -2.0 * w * m_z - 0.5 * m_y * B,
        -0.5 * m_x * B,
    )


def jacobian(state, params: ModelParams, fields) -> np.ndarray:
    """Jacobian of (dM_z/dt, dM_y/dt) with respect to (M_z, M_y)."""
    m_z, m_y, _ = OverlapState(*state)
    _, B, dA, dB = _drift_terms(m_z, fields, params.beta)
    w = params.omega
    return np.array([[dA - 1.0, 2.0 * w], [-2.0 * w - 0.5 * dB * m_y, -0.5 * B]])


class Stability(NamedTuple):
    det: float
    trace: float
    stable: bool


def stability(state, params: ModelParams, fields) -> Stability:
    m_z, m_y, _ = OverlapState(*state)
    _, B, dA, dB = _drift_terms(m_z, fields, params.beta)
    w = params.omega
    det = -0.5 * (dA - 1.0) * B + w * dB * m_y + 4.0 * w * w
    trace = dA - 1.0 - 0.5 * B
    disc = trace * trace - 4.0 * det
    if disc < 0:
        # complex pair: the real part is trace / 2
        stable = trace < 0
    else:
        stable = det > 0 and trace < 0
    return Stability(float(det), float(trace), bool(stable))


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (n, 3): m_z, m_y, m_x

    @property
    def final(self) -> OverlapState:
        return OverlapState(*map(float, self.states[-1]))

    @property
    def box_violation(self) -> float:
        """Largest excursion of any overlap beyond [-1, 1] (0 when inside)."""
        return float(max(0.0, np.max(np.abs(self.states)) - 1.0))

    def __iter__(self):
        for t, s in zip(self.times, self.states):
            yield float(t), OverlapState(*map(float, s))

    def __len__(self):
        return self.times.size


def integrate_dynamics(state0, params: ModelParams, fields, t_max: float, dt: float = 1e-3,
                       store_every: int = 1) -> Trajectory:
    """Fixed-step RK4 integration of the overlap equations.

    The overlaps are never clipped to [-1, 1]; :attr:`Trajectory.box_violation`
    reports how far the closure pushed them outside.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    if not t_max >= dt:
        raise ValueError(f"t_max must be >= dt, got t_max={t_max!r}, dt={dt!r}")
    fields = _as_fields(fields)
    n_steps = int(round(t_max / dt))

    def f(y):
        return np.array(eom_rhs(y, params, fields))

    y = np.array(OverlapState(*state0), dtype=float)
    times, states = [0.0], [y.copy()]
    for k in range(1, n_steps + 1):
        # overflow is caught by the finiteness check below
        with np.errstate(over="ignore", invalid="ignore"):
            k1 = f(y)
            k2 = f(y + 0.5 * dt * k1)
            k3 = f(y + 0.5 * dt * k2)
            k4 = f(y + dt * k3)
            y = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise DivergenceError(k * dt)
        if k % store_every == 0 or k == n_steps:
            times.append(k * dt)
            states.append(y.copy())
    return Trajectory(np.array(times), np.array(states))


class FixedPoint(NamedTuple):
    state: OverlapState
    stable: bool
    iterations: int
    residual: float


def find_fixed_point(params: ModelParams, fields, guess, tol: float = 1e-10,
                     max_iterations: int = 200) -> FixedPoint:
    """Newton iteration on dM_z/dt = dM_y/dt = 0 starting from ``guess``.

    M_x is not part of the root problem; its only fixed point is 0.
    """
    fields = _as_fields(fields)
    g = OverlapState(*guess)
    y = np.array([g.m_z, g.m_y], dtype=float)
    resid = math.inf
    for it in range(1, max_iterations + 1):
        F = np.array(eom_rhs((y[0], y[1], 0.0), params, fields)[:2])
        resid = float(np.max(np.abs(F)))
        if not np.isfinite(resid):
            break
        if resid < tol:
            state = OverlapState(float(y[0]), float(y[1]), 0.0)
            return FixedPoint(state, stability(state, params, fields).stable, it - 1, resid)
        J = jacobian((y[0], y[1], 0.0), params, fields)
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            break
        # keep Newton from leaving the physical box on the first wild step
        scale = min(1.0, 0.5 / max(np.max(np.abs(step)), 1e-300))
        y = y + scale * step
    raise NoFixedPointError(resid, max_iterations)


def classical_rhs(m_z: float, fields, beta: float) -> float:
    """dM_z/dt at Ω = 0, the scalar classical retrieval equation."""
    return -m_z + drift_a(m_z, fields, beta)


__all__: Sequence[str] = [
    "ModelParams", "OverlapState", "FieldProfile", "drift_a", "drift_b", "eom_rhs",
    "jacobian", "stability", "Stability", "integrate_dynamics", "Trajectory",
    "find_fixed_point", "FixedPoint", "classical_rhs",
]
