"""Exact small-N simulation of the open quantum Hopfield model.

The state lives in the 2^N dimensional z basis. Site n is bit N-1-n of the
basis index (so dense operators are Kronecker products with site 0 first),
and a clear bit is spin up, σ^z = +1. The generator is

    dρ/dt = -i[H, ρ] + Σ_{n,τ} Γ_{n,τ} ρ Γ_{n,τ}† - ½{Γ_{n,τ}†Γ_{n,τ}, ρ}

with H = Ω Σ_n σ_n^x and Γ_{n,τ} = f_{n,τ} σ_n^τ, where the thermal factors
f_{n,±}² = (1 ± tanh(β ΔE_n)) / 2 depend on the local field
ΔE_n = N^{-1/2} Σ_{j≠n} J_nj σ_j^z. Restricted to diagonal states the
dynamics is the Glauber master equation with heat-bath flip rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space

from .errors import IntegrationError, SizeError

MAX_SPINS = 10
HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
POSITIVITY_TOL = 1e-8

_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    "+": np.array([[0, 1], [0, 0]], dtype=complex),
    "-": np.array([[0, 0], [1, 0]], dtype=complex),
}


def _check_size(n):
    if n > MAX_SPINS:
        raise SizeError(f"exact simulation is limited to N <= {MAX_SPINS} spins, got N={n}")
    if n < 1:
        raise ValueError("need at least one spin")


@dataclass(frozen=True)
class PatternSet:
    """Patterns ξ_i^μ stored as an N x p matrix of ±1."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.array(self.entries, dtype=int)
        if e.ndim == 1:
            e = e[:, None]
        if e.ndim != 2 or e.shape[1] < 1:
            raise ValueError("patterns must form an N x p matrix with p >= 1")
        if not np.all(np.abs(e) == 1):
            raise ValueError("pattern entries must be +1 or -1")
        _check_size(e.shape[0])
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @classmethod
    def from_rows(cls, rows) -> "PatternSet":
        """One pattern per row, as read from a pattern file."""
        return cls(np.array(rows, dtype=int).T)

    @classmethod
    def random(cls, n, p, rng) -> "PatternSet":
        return cls(rng.choice([-1, 1], size=(n, p)))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def p(self) -> int:
        return self.entries.shape[1]

    def __getitem__(self, mu):
        return self.entries[:, mu]


def hebb_couplings(patterns: PatternSet, spherical: bool = True):
    """Hebb matrix Σ_μ ξ^μ ξ^μᵀ with zero diagonal.

    With ``spherical`` each row is rescaled so that Σ_j J_ij² = N. Rows are
    normalised independently, as in the coupling ensemble of the capacity
    calculation, so the result is symmetric only when all rows share a norm.
    A spin whose Hebb row vanishes identically keeps a zero row.
    """
    xi = patterns.entries.astype(float)
    n = xi.shape[0]
    J = xi @ xi.T
    np.fill_diagonal(J, 0.0)
    if not spherical:
        return J
    norm = np.sqrt((J * J).sum(axis=1))
    scale = np.divide(math.sqrt(n), norm, out=np.zeros(n), where=norm > 0)
    return J * scale[:, None]


@dataclass(frozen=True)
class SpinSystem:
    n: int
    couplings: np.ndarray
    beta: float
    omega: float = 0.0

    def __post_init__(self):
        _check_size(self.n)
        J = np.array(self.couplings, dtype=float)
        if J.shape != (self.n, self.n):
            raise ValueError(f"couplings must be {self.n} x {self.n}, got {J.shape}")
        if np.any(np.diag(J) != 0):
            raise ValueError("couplings must have a zero diagonal")
        if not self.beta >= 0 or not self.omega >= 0:
            raise ValueError("beta and omega must be non-negative")
        J.setflags(write=False)
        object.__setattr__(self, "couplings", J)

    @property
    def dim(self) -> int:
        return 1 << self.n


# ------------------------------------------------------------ configurations

def spin_table(n):
    """σ^z eigenvalues, shape (2^n, n): row k holds the spins of basis state k."""
    k = np.arange(1 << n)[:, None]
    bits = (k >> (n - 1 - np.arange(n))[None, :]) & 1
    return 1 - 2 * bits


def _masks(n):
    return [1 << (n - 1 - i) for i in range(n)]


def local_fields(system: SpinSystem):
    """ΔE_n for every configuration, shape (2^N, N)."""
    s = spin_table(system.n).astype(float)
    return s @ system.couplings.T / math.sqrt(system.n)


def _tanh_beta(beta, x):
    if math.isinf(beta):
        return np.sign(x)
    return np.tanh(beta * x)


def rate_factors(system: SpinSystem):
    """(f_+, f_-) per configuration and site, each of shape (2^N, N).

    f_± = exp(±β ΔE / 2) / sqrt(2 cosh β ΔE), written as sqrt((1 ± tanh β ΔE) / 2)
    so that it stays finite for any β.
    """
    th = _tanh_beta(system.beta, local_fields(system))
    return np.sqrt(0.5 * (1.0 + th)), np.sqrt(0.5 * (1.0 - th))


def energy(system: SpinSystem):
    """E(s) = -(1 / 2√N) Σ_ij J_ij s_i s_j for every configuration."""
    s = spin_table(system.n).astype(float)
    return -0.5 * np.einsum("ki,ij,kj->k", s, system.couplings, s) / math.sqrt(system.n)


def site_operator(n, site, which):
    """Dense single-site Pauli operator ('x', 'y', 'z', '+' or '-') on n spins."""
    return np.kron(np.kron(np.eye(1 << site), _PAULI[which]), np.eye(1 << (n - 1 - site)))


def build_jump_operators(system: SpinSystem):
    """Dense Γ_{n,+}, Γ_{n,-} for n = 0..N-1, in that order."""
    f_plus, f_minus = rate_factors(system)
    ops = []
    for i in range(system.n):
        for f, which in ((f_plus, "+"), (f_minus, "-")):
            ops.append(np.diag(f[:, i].astype(complex)) @ site_operator(system.n, i, which))
    return ops


def hamiltonian(system: SpinSystem):
    return system.omega * sum(site_operator(system.n, i, "x") for i in range(system.n))


# ------------------------------------------------------------------ dynamics

class _Generator:
    """Precomputed index maps and weights for the structured Lindblad RHS."""

    def __init__(self, system: SpinSystem):
        n, dim = system.n, system.dim
        self.system = system
        f_plus, f_minus = rate_factors(system)
        idx = np.arange(dim)
        up = spin_table(n) == 1
        self.flips = [idx ^ m for m in _masks(n)]
        self.weights = []
        decay = np.zeros(dim)
        for i in range(n):
            # factor for landing in state k: f_+ if site i is up in k, else f_-
            land = np.where(up[:, i], f_plus[:, i], f_minus[:, i])
            same = up[:, i][:, None] == up[:, i][None, :]
            self.weights.append(np.outer(land, land) * same)
            decay += np.where(up[:, i], f_minus[:, i], f_plus[:, i]) ** 2
        self.anti = 0.5 * (decay[:, None] + decay[None, :])
        self.omega = system.omega
        # classical rate matrix on probability vectors
        W = np.zeros((dim, dim))
        for i, flip in enumerate(self.flips):
            out = np.where(up[:, i], f_minus[:, i], f_plus[:, i]) ** 2
            W[flip, idx] += out
        W[idx, idx] -= decay
        self.rate_matrix = W

    def __call__(self, rho):
        out = -self.anti * rho
        for flip, w in zip(self.flips, self.weights):
            out += w * rho[np.ix_(flip, flip)]
        if self.omega:
            h_rho = sum(rho[flip, :] for flip in self.flips)
            rho_h = sum(rho[:, flip] for flip in self.flips)
            out += -1j * self.omega * (h_rho - rho_h)
        return out


def lindblad_rhs(rho, system: SpinSystem):
    return _Generator(system)(np.asarray(rho, dtype=complex))


def lindblad_rhs_dense(rho, system: SpinSystem):
    """Same generator assembled from dense operators; slow, used as a cross-check."""
    H = hamiltonian(system)
    out = -1j * (H @ rho - rho @ H)
    for G in build_jump_operators(system):
        GdG = G.conj().T @ G
        out += G @ rho @ G.conj().T - 0.5 * (GdG @ rho + rho @ GdG)
    return out


def density_violations(rho):
    """(hermiticity error, trace error, -min eigenvalue) of a candidate state."""
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    tr = float(abs(np.trace(rho) - 1.0))
    neg = float(-np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    return herm, tr, neg


def check_density(rho, time=0.0):
    herm, tr, neg = density_violations(rho)
    if herm > HERMITIAN_TOL:
        raise IntegrationError(time, herm, "hermiticity")
    if tr > TRACE_TOL:
        raise IntegrationError(time, tr, "unit trace")
    if neg > POSITIVITY_TOL:
        raise IntegrationError(time, neg, "positivity")


def pattern_state(pattern):
    """|ξ⟩⟨ξ| for a ±1 pattern."""
    xi = np.asarray(pattern)
    _check_size(xi.size)
    k = int("".join("0" if s > 0 else "1" for s in xi), 2)
    rho = np.zeros((1 << xi.size,) * 2, dtype=complex)
    rho[k, k] = 1.0
    return rho


def maximally_mixed(n):
    _check_size(n)
    return np.eye(1 << n, dtype=complex) / (1 << n)


@dataclass
class Trajectory:
    times: np.ndarray
    states: list

    def __iter__(self):
        return iter(zip(self.times, self.states))

    def __len__(self):
        return len(self.states)


def _rk4(f, y, dt):
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _steps(t_max, dt):
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    if t_max < 0:
        raise ValueError("t_max must be non-negative")
    return int(round(t_max / dt))


def evolve(rho0, system: SpinSystem, t_max: float, dt: float = 1e-3, store_every: int = 1):
    """RK4 integration of the master equation; every stored state is checked."""
    n_steps = _steps(t_max, dt)
    gen = _Generator(system)
    rho = np.array(rho0, dtype=complex)
    if rho.shape != (system.dim, system.dim):
        raise ValueError(f"state must be {system.dim} x {system.dim}")
    check_density(rho, 0.0)
    times, states = [0.0], [rho.copy()]
    for k in range(1, n_steps + 1):
        rho = _rk4(gen, rho, dt)
        if k % store_every == 0 or k == n_steps:
            check_density(rho, k * dt)
            times.append(k * dt)
            states.append(rho.copy())
    return Trajectory(np.array(times), states)


def overlap_expectation(rho, pattern, axis: str) -> float:
    """(1/N) Σ_i ξ_i tr(ρ σ_i^a) for a in {x, y, z}."""
    xi = np.asarray(pattern, dtype=float)
    n = xi.size
    dim = 1 << n
    if rho.shape != (dim, dim):
        raise ValueError("pattern length does not match the state")
    up = spin_table(n) == 1
    idx = np.arange(dim)
    total = 0.0
    for i, mask in enumerate(_masks(n)):
        if axis == "z":
            val = np.real(np.diag(rho)) @ np.where(up[:, i], 1.0, -1.0)
        elif axis == "x":
            val = np.real(rho[idx, idx ^ mask].sum())
        elif axis == "y":
            phase = np.where(up[:, i], 1j, -1j)
            val = np.real((rho[idx, idx ^ mask] * phase).sum())
        else:
            raise ValueError(f"axis must be 'x', 'y' or 'z', got {axis!r}")
        total += xi[i] * val
    return float(total / n)


# ------------------------------------------------------------ classical limit

def glauber_rate_matrix(system: SpinSystem):
    """W with dp/dt = W p for single-flip heat-bath rates f_{n,τ}²."""
    return _Generator(system).rate_matrix


def classical_glauber_evolve(p0, system: SpinSystem, t_max: float, dt: float = 1e-3,
                             store_every: int = 1):
    n_steps = _steps(t_max, dt)
    W = glauber_rate_matrix(system)
    p = np.array(p0, dtype=float)
    if p.shape != (system.dim,):
        raise ValueError(f"probability vector must have length {system.dim}")
    if abs(p.sum() - 1.0) > 1e-10 or np.any(p < 0):
        raise ValueError("p0 must be a normalised probability vector")
    times, states = [0.0], [p.copy()]
    for k in range(1, n_steps + 1):
        p = _rk4(lambda v: W @ v, p, dt)
        lo, hi = float(p.min()), float(p.max())
        if lo < -1e-10 or hi > 1.0 + 1e-10:
            raise IntegrationError(k * dt, max(-lo, hi - 1.0), "probability bounds")
        if k % store_every == 0 or k == n_steps:
            times.append(k * dt)
            states.append(p.copy())
    return Trajectory(np.array(times), states)


def glauber_stationary(system: SpinSystem):
    """Stationary distribution from the null space of the rate matrix."""
    v = null_space(glauber_rate_matrix(system))[:, 0]
    v = np.abs(v)
    return v / v.sum()


def boltzmann_distribution(system: SpinSystem):
    """exp(-β E) normalised; the Glauber stationary state for symmetric couplings."""
    e = -system.beta * energy(system)
    w = np.exp(e - e.max())
    return w / w.sum()
