"""Replica-symmetric saddle point and the maximal storage capacity α_c.

At the saddle the z-overlap is pinned to the retrieval threshold m and the
remaining unknowns are the multiplier λ₁ and the y-overlap M_y (λ₂ follows
algebraically, λ₂ = -λ₁ M_y / m). For each Gaussian variable t the local
energy profile h(t) is the global maximiser of

    Y(h, t) = -(h + t)²/2 + λ₁ a(h) - (λ₂/2) M_y b(h)
    a(h) = tanh(β m h),  b(h) = 1 + (β²/2)(1 + m a)(1 - a²)

and the saddle equations read

    r1 = -m + 2Ω M_y + ∫Dt tanh(β m h(t)) = 0
    r2 = M_y + 4Ω m / (1 + (β²/2) ∫Dt (1 + m a)(1 - a²)) = 0.

The capacity is α_c = (∫Dt (h(t) + t)²)⁻¹ provided the stability functional
of the overlap dynamics stays non-negative.

Writing ψ(h) = λ₁ a + c b - h²/2 with c = -λ₂ M_y / 2, one has
Y = ψ(h) - h t - t²/2, so h(t) is a Legendre transform: it solves ψ'(h) = t
on a branch where ψ'' < 0, and it is non-increasing in t. Near T = 0 the
maximiser jumps between branches. :class:`Profile` locates every branch on a
dense h grid, finds the jump points exactly, and integrates with a panel rule
cut at those points so that the saddle residuals stay smooth in λ₁.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import quadrature
from .errors import MaximizationError, NoSaddleError
from .meanfield import ModelParams
from .quadrature import GaussianGrid

DEFAULT_ORDER = 101
LAMBDA1_MAX = 1e6
# β at or below which a missing saddle is attributed to the critical drive
HIGH_T_BETA = 0.3
SCAN_SAMPLES = 512

# h-grid used to map the branches of ψ'(h): a dense window in x = β m h
# around the tanh step, plus a uniform cover of the integration range.
_X_WINDOW = 40.0
_X_STEP = 0.05
_COVER_POINTS = 1601
# the cover reaches far enough for the outer nodes of high-order Hermite rules
_COVER_HALF_WIDTH = 80.0


class Reason(str, enum.Enum):
    OK = "ok"
    STABILITY_VIOLATED = "stability_violated"
    NO_SADDLE = "no_saddle"
    ABOVE_OMEGA_C = "above_omega_c"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class SaddleState:
    m_z: float
    m_y: float
    lambda1: float
    lambda2: float
    h_profile: np.ndarray
    lambda_theta: float = 0.0
    iterations: int = 0
    profile: Optional["Profile"] = field(default=None, compare=False, repr=False)

    @classmethod
    def from_multipliers(cls, m_z, m_y, lambda1, **kw) -> "SaddleState":
        """Build a state with λ₂ fixed by λ₂ = -λ₁ M_y / M_z."""
        lambda2 = -lambda1 * m_y / m_z if m_z != 0 else 0.0
        return cls(m_z, m_y, lambda1, lambda2, kw.pop("h_profile", np.empty(0)), **kw)

    @property
    def y_curvature(self) -> float:
        """Coefficient c of b(h) in Y, i.e. -λ₂ M_y / 2."""
        return -0.5 * self.lambda2 * self.m_y


@dataclass
class CapacityResult:
    alpha_c: float
    converged: bool
    iterations: int
    stability_value: float
    reason: Reason
    saddle: Optional[SaddleState] = field(default=None, repr=False)
    params: Optional[ModelParams] = field(default=None, repr=False)


# ---------------------------------------------------------------- site terms

def _sech2(x):
    e = np.exp(-2.0 * np.abs(x))
    return 4.0 * e / (1.0 + e) ** 2


class _Site:
    """a(h), b(h) and their h-derivatives for fixed β and m."""

    def __init__(self, beta, m):
        self.beta = beta
        self.m = m
        self.k = beta * m
        self.half_b2 = 0.5 * beta * beta

    def terms(self, h, order=2):
        m, k = self.m, self.k
        x = k * h
        a = np.tanh(x)
        s = _sech2(x)
        q = (1.0 + m * a) * s
        out = {"a": a, "s": s, "b": 1.0 + self.half_b2 * q}
        if order >= 1:
            a_h = k * s
            q_a = m * (1.0 - 3.0 * a * a) - 2.0 * a
            out["a_h"] = a_h
            out["b_h"] = self.half_b2 * q_a * a_h
        if order >= 2:
            a_hh = -2.0 * k * k * s * a
            q_aa = -6.0 * m * a - 2.0
            out["a_hh"] = a_hh
            out["b_hh"] = self.half_b2 * (q_aa * a_h * a_h + q_a * a_hh)
        return out


def y_value(h, t, saddle: SaddleState, params: ModelParams):
    """Y(h, t) with λ_θ = 0."""
    if math.isinf(params.beta):
        x = np.sign(np.asarray(h) * saddle.m_z)
        a, b = x, np.where(x == 0, np.inf, 1.0)
    else:
        site = _Site(params.beta, saddle.m_z)
        tm = site.terms(np.asarray(h, dtype=float), order=0)
        a, b = tm["a"], tm["b"]
    h = np.asarray(h, dtype=float)
    y = -0.5 * (h + t) ** 2 + saddle.lambda1 * a - 0.5 * saddle.lambda2 * saddle.m_y * b
    return float(y) if np.ndim(y) == 0 else y


def stationarity_residual(h, t, saddle: SaddleState, params: ModelParams):
    """∂Y/∂h at (h, t); zero at an interior maximiser."""
    site = _Site(params.beta, saddle.m_z)
    tm = site.terms(np.asarray(h, dtype=float), order=1)
    r = saddle.lambda1 * tm["a_h"] + saddle.y_curvature * tm["b_h"] - h - t
    return float(r) if np.ndim(r) == 0 else r


def _perturbation_bound(beta, m, lambda1, c):
    """Upper bound on |ψ'(h) + h|, the largest shift of h(t) away from -t."""
    # |q_a| <= m + 2 and |a_h| <= β m
    return abs(lambda1) * beta * m + abs(c) * 0.5 * beta**2 * (m + 2.0) * beta * m


def maximize_y(t: float, saddle: SaddleState, params: ModelParams) -> float:
    """Global maximiser of Y(·, t) by a coarse scan and local refinement.

    The scan covers [-t-Δ, -t+Δ] with Δ bounding how far ψ' can push the
    maximiser from -t, plus the window around h = 0 where the tanh step sits.
    """
    beta, m = params.beta, saddle.m_z
    if saddle.lambda1 == 0 and saddle.y_curvature == 0:
        return -float(t)
    if beta == 0:
        return -float(t)
    if math.isinf(beta):
        raise ValueError("maximize_y needs a finite beta")
    site = _Site(beta, m)
    c = saddle.y_curvature
    delta = _perturbation_bound(beta, m, saddle.lambda1, c) + 1.0
    lo, hi = -t - delta, -t + delta
    grid = np.linspace(lo, hi, SCAN_SAMPLES)
    w = _X_WINDOW / site.k
    window = np.linspace(max(lo, -w), min(hi, w), SCAN_SAMPLES)
    h = np.unique(np.concatenate([grid, window]))
    y = y_value(h, t, saddle, params)
    k = int(np.argmax(y))
    if k == 0 or k == h.size - 1:
        raise MaximizationError(lo, hi, t)
    a, b = h[k - 1], h[k + 1]
    res = minimize_scalar(lambda v: -y_value(v, t, saddle, params), bounds=(a, b),
                          method="bounded", options={"xatol": 1e-12 * max(1.0, abs(h[k]))})
    x = float(res.x)
    # Newton polish on ∂Y/∂h = 0 inside the bracket
    for _ in range(50):
        tm = site.terms(x, order=2)
        g = saddle.lambda1 * tm["a_h"] + c * tm["b_h"] - x - t
        g2 = saddle.lambda1 * tm["a_hh"] + c * tm["b_hh"] - 1.0
        if g2 >= 0:
            break
        step = -g / g2
        x_new = min(max(x + step, a), b)
        if abs(x_new - x) <= 1e-15 * max(1.0, abs(x)):
            x = x_new
            break
        x = x_new
    return float(x)


# ------------------------------------------------------------ branch engine

class Profile:
    """The maximiser h(t) on [-L, L] resolved into branches and jump points."""

    def __init__(self, beta, m, lambda1, m_y, half_width=quadrature.PANEL_HALF_WIDTH):
        if not (0 < beta < math.inf):
            raise ValueError(f"profile needs a finite positive beta, got {beta!r}")
        self.beta, self.m = float(beta), float(m)
        self.lambda1, self.m_y = float(lambda1), float(m_y)
        self.c = self.lambda1 * self.m_y**2 / (2.0 * self.m)
        self.half_width = float(half_width)
        self.site = _Site(self.beta, self.m)
        self._map_branches()
        self._walk_envelope()

    # ψ and its derivatives
    def psi(self, h):
        tm = self.site.terms(h, order=0)
        return self.lambda1 * tm["a"] + self.c * tm["b"] - 0.5 * h * h

    def tau(self, h, order=1):
        tm = self.site.terms(h, order=2)
        d1 = self.lambda1 * tm["a_h"] + self.c * tm["b_h"] - h
        if order == 1:
            return d1
        return d1, self.lambda1 * tm["a_hh"] + self.c * tm["b_hh"] - 1.0

    def y(self, h, t):
        return self.psi(h) - h * t - 0.5 * t * t

    def _map_branches(self):
        L = self.half_width
        w = _X_WINDOW / self.site.k
        window = np.arange(-_X_WINDOW, _X_WINDOW + 0.5 * _X_STEP, _X_STEP) / self.site.k
        reach = max(L, _COVER_HALF_WIDTH) + 2.0
        cover = np.linspace(-reach, reach, _COVER_POINTS)
        # roots inside the window are found there; outside it ψ' ≈ -h
        h = np.unique(np.concatenate([window, cover[(cover < -w) | (cover > w)]]))
        tau, dtau = self.tau(h, order=2)
        stable = dtau < 0
        runs = []
        i, n = 0, h.size
        while i < n:
            if not stable[i]:
                i += 1
                continue
            j = i
            while j + 1 < n and stable[j + 1]:
                j += 1
            if j > i:
                runs.append((i, j))
            i = j + 1
        self.h_grid, self.tau_grid = h, tau
        self.runs = runs
        # t range of run r is [tau at its top h, tau at its bottom h]
        self.t_lo = np.array([tau[j] for i, j in runs])
        self.t_hi = np.array([tau[i] for i, j in runs])

    def solve_on_run(self, t, r):
        """h on run r with ψ'(h) = t; t is clipped into the run's range."""
        t = np.clip(np.atleast_1d(np.asarray(t, dtype=float)), self.t_lo[r], self.t_hi[r])
        i0, i1 = self.runs[r]
        hs = self.h_grid[i0:i1 + 1]
        ts = self.tau_grid[i0:i1 + 1]
        # ts is decreasing; find k with ts[k] >= t >= ts[k+1]
        k = np.searchsorted(-ts, -t, side="right") - 1
        k = np.clip(k, 0, hs.size - 2)
        lo, hi = hs[k].copy(), hs[k + 1].copy()
        f_lo, f_hi = ts[k] - t, ts[k + 1] - t
        denom = f_lo - f_hi
        frac = np.where(denom > 0, f_lo / np.where(denom > 0, denom, 1.0), 0.5)
        x = lo + np.clip(frac, 0.0, 1.0) * (hi - lo)
        active = np.ones(t.size, dtype=bool)
        for _ in range(100):
            xa, ta = x[active], t[active]
            f, df = self.tau(xa, order=2)
            f = f - ta
            lo_a, hi_a = lo[active], hi[active]
            lo_a = np.where(f > 0, xa, lo_a)
            hi_a = np.where(f <= 0, xa, hi_a)
            with np.errstate(divide="ignore", invalid="ignore"):
                xn = xa - f / df
            bad = ~np.isfinite(xn) | (xn <= lo_a) | (xn >= hi_a)
            xn = np.where(bad, 0.5 * (lo_a + hi_a), xn)
            scale = np.maximum(1.0, np.abs(xn))
            done = (np.abs(xn - xa) <= 4e-16 * scale) | (hi_a - lo_a <= 4e-16 * scale) | (f == 0)
            lo[active], hi[active] = lo_a, hi_a
            x[active] = np.where(f == 0, xa, xn)
            idx = np.flatnonzero(active)
            active[idx[done]] = False
            if not active.any():
                break
        return x

    def _y_on_run(self, t, r):
        h = self.solve_on_run(t, r)
        return h, self.y(h, np.atleast_1d(t))

    def _tie(self, r_hi, r_lo, lo, hi):
        """Earliest t in [lo, hi] where run r_lo overtakes r_hi, or None.

        Y_hi - Y_lo has derivative h_lo - h_hi < 0, so it has at most one root.
        """
        ts = np.linspace(lo, hi, 33)
        h1, y1 = self._y_on_run(ts, r_hi)
        h2, y2 = self._y_on_run(ts, r_lo)
        d = y1 - y2
        if d[0] <= 0:
            return lo
        if d[-1] > 0:
            return None
        k = int(np.argmax(d <= 0))
        a, b = ts[k - 1], ts[k]
        da, db = d[k - 1], d[k]
        t = a + da / (da - db) * (b - a)
        for _ in range(30):
            (g1,), (v1,) = self._y_on_run(t, r_hi)
            (g2,), (v2,) = self._y_on_run(t, r_lo)
            f = v1 - v2
            if f > 0:
                a = t
            else:
                b = t
            slope = g2 - g1
            t_new = t - f / slope if slope < 0 else 0.5 * (a + b)
            if not (a < t_new < b):
                t_new = 0.5 * (a + b)
            if abs(t_new - t) <= 1e-15 * max(1.0, abs(t)) or b - a <= 1e-15 * max(1.0, abs(t)):
                return float(t_new)
            t = t_new
        return float(t)

    def _best_run(self, t, exclude=()):
        cand = [r for r in range(len(self.runs))
                if r not in exclude and self.t_lo[r] <= t <= self.t_hi[r]]
        if not cand:
            raise MaximizationError(float(self.h_grid[0]), float(self.h_grid[-1]), t)
        ys = [self._y_on_run(t, r)[1][0] for r in cand]
        return cand[int(np.argmax(ys))]

    def _walk_envelope(self):
        L = self.half_width
        t_cur = -L
        r = self._best_run(t_cur)
        segments, jumps = [], []
        while True:
            best = None
            for r2 in range(r):
                lo = max(t_cur, self.t_lo[r2], self.t_lo[r])
                hi = min(self.t_hi[r2], self.t_hi[r], L)
                if lo >= hi:
                    continue
                tie = self._tie(r, r2, lo, hi)
                if tie is not None and (best is None or tie < best[0]):
                    best = (tie, r2)
            if best is None:
                if self.t_hi[r] >= L:
                    segments.append((t_cur, L, r))
                    break
                # the branch folds before any tie: hand over at its end
                t_sw = float(self.t_hi[r])
                segments.append((t_cur, t_sw, r))
                jumps.append(t_sw)
                t_cur, r = t_sw, self._best_run(t_sw, exclude=(r,))
                continue
            tie, r2 = best
            segments.append((t_cur, tie, r))
            jumps.append(tie)
            t_cur, r = tie, r2
        self.segments = segments
        self.jump_points = tuple(t for t in jumps if -L < t < L)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        flat = np.atleast_1d(t).ravel()
        out = np.empty_like(flat)
        edges = np.array([s[1] for s in self.segments[:-1]])
        which = np.searchsorted(edges, flat, side="left")
        for k, (_, _, r) in enumerate(self.segments):
            sel = which == k
            if sel.any():
                out[sel] = self.solve_on_run(flat[sel], r)
        return out.reshape(t.shape) if t.ndim else float(out[0])

    def breakpoints(self, order):
        """Jump points plus a geometric refinement toward t = 0.

        Near T = 0 the profile bends from h = -t to the h ≈ 0⁺ plateau over a
        t-range of order 1/(β m); the graded cuts resolve that bend.
        """
        base = 2.0 * self.half_width / quadrature.panel_count(order)
        w = 1.0 / self.site.k
        cuts = [0.0]
        while w < base:
            cuts += [w, -w]
            w *= 2.0
        return tuple(sorted(set(self.jump_points) | set(cuts)))

    def quadrature(self, order) -> GaussianGrid:
        return quadrature.build_panel_grid(order, self.breakpoints(order), self.half_width)


# -------------------------------------------------------- saddle equations

@dataclass
class _Averages:
    tanh: float
    q: float  # ∫Dt (1 + m a)(1 - a²)
    grid: GaussianGrid
    h: np.ndarray


def _averages(profile: Profile, order: int) -> _Averages:
    grid = profile.quadrature(order)
    h = profile(grid.nodes)
    tm = profile.site.terms(h, order=0)
    q = (1.0 + profile.m * tm["a"]) * tm["s"]
    return _Averages(float(grid.weights @ tm["a"]), float(grid.weights @ q), grid, h)


def _residuals_from(av: _Averages, params: ModelParams, m_y: float):
    w, m, beta = params.omega, params.m, params.beta
    r1 = -m + 2.0 * w * m_y + av.tanh
    B = 1.0 + 0.5 * beta**2 * av.q
    return r1, m_y + 4.0 * w * m / B, B


def _check_beta(params: ModelParams):
    if math.isinf(params.beta):
        raise ValueError("the saddle solver needs a finite beta; "
                         "use limits.classical_zero_t for T = 0")


def saddle_residuals(saddle: SaddleState, params: ModelParams, grid: GaussianGrid):
    """(r1, r2) evaluated from scratch for the multipliers stored in ``saddle``."""
    _check_beta(params)
    w, m = params.omega, saddle.m_z
    if params.beta == 0:
        return -m + 2.0 * w * saddle.m_y, saddle.m_y + 4.0 * w * m
    prof = Profile(params.beta, m, saddle.lambda1, saddle.m_y)
    av = _averages(prof, grid.order)
    r1, r2, _ = _residuals_from(av, replace(params, m=m), saddle.m_y)
    return r1, r2


def _default_grid(grid):
    return quadrature.build_grid(DEFAULT_ORDER) if grid is None else grid


def _solve_lambda1(params, order, m_y, guess=None):
    """Root of r1 in λ₁ at fixed M_y; returns (λ₁, profile, averages)."""
    beta, m = params.beta, params.m
    cache = {}

    def r1(lam):
        prof = Profile(beta, m, lam, m_y)
        av = _averages(prof, order)
        cache[lam] = (prof, av)
        return _residuals_from(av, params, m_y)[0]

    lo, f_lo = 0.0, -m + 2.0 * params.omega * m_y
    hi = None
    if guess is not None and guess > 0:
        f_g = r1(guess)
        if f_g == 0:
            return guess, *cache[guess]
        if f_g > 0:
            hi = guess
            trial = guess * 0.9
            if r1(trial) < 0:
                lo = trial
        else:
            lo, f_lo = guess, f_g
            trial = guess * 1.1
            if r1(trial) > 0:
                hi = trial
            else:
                lo = trial
    if hi is None:
        hi = max(10.0 / beta, 2.0 * lo)
        while r1(hi) <= 0:
            lo = hi
            hi *= 2.0
            if hi > LAMBDA1_MAX:
                raise NoSaddleError(
                    f"no root of the overlap equation for lambda1 in [0, {LAMBDA1_MAX:g}]",
                    params=params)
    lam = brentq(r1, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    if lam not in cache:
        r1(lam)
    return lam, *cache[lam]


def solve_saddle(params: ModelParams, grid: GaussianGrid = None) -> SaddleState:
    """Solve the saddle system by an outer λ₁ root search and M_y re-insertion.

    For each M_y the overlap equation r1 = 0 is solved for λ₁; M_y is then
    replaced by -4Ω m / B. When the re-insertion oscillates it is damped by
    one half; if it still fails the M_y equation is bracketed on [-4Ω m, 0]
    and solved directly.
    """
    _check_beta(params)
    grid = _default_grid(grid)
    beta, m, w, tol = params.beta, params.m, params.omega, params.tol
    if beta == 0:
        raise NoSaddleError("no saddle at infinite temperature (beta = 0)", params=params)
    order = grid.order

    def finish(lam, m_y, prof, iterations):
        h = prof(grid.nodes)
        return SaddleState.from_multipliers(m, m_y, lam, h_profile=h, iterations=iterations,
                                            profile=prof)

    if w == 0:
        lam, prof, _ = _solve_lambda1(params, order, 0.0)
        return finish(lam, 0.0, prof, 1)

    m_y, lam, damping = 0.0, None, 1.0
    prev_step = None
    for it in range(1, params.max_iterations + 1):
        lam, prof, av = _solve_lambda1(params, order, m_y, guess=lam)
        r1, r2, B = _residuals_from(av, params, m_y)
        if abs(r2) < tol and abs(r1) < tol:
            return finish(lam, m_y, prof, it)
        step = -4.0 * w * m / B - m_y
        if prev_step is not None and step * prev_step < 0 and abs(step) > 0.5 * abs(prev_step):
            damping *= 0.5
        m_y += damping * step
        prev_step = step

    # re-insertion did not settle: solve g(M_y) = r2 directly
    state = {}

    def g(my):
        lam_, prof_, av_ = _solve_lambda1(params, order, my, guess=state.get("lam"))
        state.update(lam=lam_, prof=prof_, my=my)
        return _residuals_from(av_, params, my)[1]

    try:
        my = brentq(g, -4.0 * w * m, 0.0, xtol=1e-14, maxiter=200)
    except ValueError as exc:
        raise NoSaddleError(f"M_y iteration failed to converge: {exc}", params=params,
                            iterations=params.max_iterations) from exc
    if state["my"] != my:
        g(my)
    return finish(state["lam"], my, state["prof"], params.max_iterations)


# ------------------------------------------------------------------ capacity

def stability_functional(saddle: SaddleState, params: ModelParams, grid: GaussianGrid = None):
    """D = c Ω² + ∫Dt [-2(a_M - 1) b + 4 Ω M_y b_M], derivatives taken in M_z."""
    grid = _default_grid(grid)
    prof = saddle.profile or Profile(params.beta, saddle.m_z, saddle.lambda1, saddle.m_y)
    pg = prof.quadrature(grid.order)
    h = prof(pg.nodes)
    beta, m, w = params.beta, saddle.m_z, params.omega
    tm = prof.site.terms(h, order=1)
    a, s, b = tm["a"], tm["s"], tm["b"]
    a_m = beta * h * s
    q_a = m * (1.0 - 3.0 * a * a) - 2.0 * a
    b_m = 0.5 * beta**2 * (a * s + a_m * q_a)
    integrand = -2.0 * (a_m - 1.0) * b + 4.0 * w * saddle.m_y * b_m
    return params.stability_omega_coeff * w * w + quadrature.integrate(pg, lambda _: integrand)


def capacity_from_saddle(saddle: SaddleState, params: ModelParams, grid: GaussianGrid = None):
    grid = _default_grid(grid)
    prof = saddle.profile or Profile(params.beta, saddle.m_z, saddle.lambda1, saddle.m_y)
    pg = prof.quadrature(grid.order)
    h = prof(pg.nodes)
    return 1.0 / float(pg.weights @ (h + pg.nodes) ** 2)


def compute_capacity(params: ModelParams, grid: GaussianGrid = None) -> CapacityResult:
    from .limits import omega_critical

    _check_beta(params)
    grid = _default_grid(grid)
    try:
        saddle = solve_saddle(params, grid)
    except NoSaddleError as exc:
        above = params.beta <= HIGH_T_BETA and params.omega > omega_critical(params.m)
        reason = Reason.ABOVE_OMEGA_C if above else Reason.NO_SADDLE
        return CapacityResult(0.0, False, exc.iterations, math.nan, reason, params=params)
    d = stability_functional(saddle, params, grid)
    if d < 0:
        return CapacityResult(0.0, True, saddle.iterations, d, Reason.STABILITY_VIOLATED,
                              saddle, params)
    alpha = capacity_from_saddle(saddle, params, grid)
    return CapacityResult(alpha, True, saddle.iterations, d, Reason.OK, saddle, params)
