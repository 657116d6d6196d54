"""Closed-form limits of the storage capacity, used as checks on the solver."""

from __future__ import annotations

import math

import numpy as np

from .quadrature import SQRT2, inverse_erf, normal_pdf


def classical_zero_t(m: float) -> float:
    """Capacity at T = 0, Ω = 0: (∫₀ᵃ Dt t²)⁻¹ with a = √2 erf⁻¹(m).

    The integral equals Φ(a) - 1/2 - a φ(a) = m/2 - a φ(a).
    """
    if not 0.0 < m < 1.0:
        raise ValueError(f"m must lie in (0, 1), got {m!r}")
    a = SQRT2 * inverse_erf(m)
    if a < 0.2:
        # the difference cancels to O(a³); sum the series of ∫₀ᵃ t² e^{-t²/2} dt
        series, term, k = 0.0, a**3, 0
        while abs(term) > 1e-17 * abs(series) or k == 0:
            series += term / (2 * k + 3)
            k += 1
            term *= -0.5 * a * a / k
        integral = series / math.sqrt(2.0 * math.pi)
    else:
        integral = 0.5 * m - a * float(normal_pdf(a))
    return math.inf if integral <= 0 else 1.0 / integral


def high_t_capacity(beta: float, omega: float) -> float:
    """(β / (1 + 8Ω²))², meaningful for β ≲ 0.3 and small m."""
    return (beta / (1.0 + 8.0 * omega * omega)) ** 2


def omega_critical(m: float) -> float:
    """Drive above which no saddle exists at high temperature."""
    if not 0.0 < m <= 1.0:
        raise ValueError(f"m must lie in (0, 1], got {m!r}")
    return 0.5 * math.sqrt(0.5 * (1.0 / m - 1.0))


def small_omega_coefficient(m: float, beta: float, grid=None) -> float:
    """c in α_c(Ω) ≈ α_c(0) - c Ω², from the Ω = 0 saddle.

    To second order in Ω the y-overlap is M_y ≈ -4Ω m / B, so Y gains the
    term ε K b(h) with ε = Ω² and K = 8 λ₁ m / B². The profile responds to
    λ₁ and ε through ∂h/∂p = (∂ψ'/∂p) / (1 - λ₁ a''), and each jump point
    t* moves by (∂_p Y_hi - ∂_p Y_lo) / (h_hi - h_lo). The overlap equation
    -m - 8ε m / B + ∫Dt a = 0 then fixes dλ₁/dε, and
    c = α₀² d/dε ∫Dt (h + t)².
    """
    from .capacity import DEFAULT_ORDER, capacity_from_saddle, solve_saddle
    from .meanfield import ModelParams
    from .quadrature import build_grid

    grid = build_grid(DEFAULT_ORDER) if grid is None else grid
    params = ModelParams(beta=beta, omega=0.0, m=m)
    saddle = solve_saddle(params, grid)
    prof = saddle.profile
    lam = saddle.lambda1
    pg = prof.quadrature(grid.order)
    t = pg.nodes
    h = prof(t)
    tm = prof.site.terms(h, order=2)
    B = 1.0 + 0.5 * beta**2 * float(pg.weights @ ((1.0 + m * tm["a"]) * tm["s"]))
    K = 8.0 * lam * m / B**2
    curv = 1.0 - lam * tm["a_hh"]
    dh = {"lam": tm["a_h"] / curv, "eps": K * tm["b_h"] / curv}
    f_h = {"tanh": tm["a_h"], "alpha": 2.0 * (h + t)}

    def f(name, hv, tv):
        return np.tanh(prof.site.k * hv) if name == "tanh" else (hv + tv) ** 2

    def y_partial(p, hv):
        tv = prof.site.terms(hv, order=0)
        return tv["a"] if p == "lam" else K * tv["b"]

    deriv = {}
    for name in ("tanh", "alpha"):
        for p in ("lam", "eps"):
            total = float(pg.weights @ (f_h[name] * dh[p]))
            for (_, t_star, r_hi), (_, _, r_lo) in zip(prof.segments, prof.segments[1:]):
                if not -prof.half_width < t_star < prof.half_width:
                    continue
                h_hi = prof.solve_on_run(t_star, r_hi)[0]
                h_lo = prof.solve_on_run(t_star, r_lo)[0]
                dt_star = (y_partial(p, h_hi) - y_partial(p, h_lo)) / (h_hi - h_lo)
                jump = f(name, h_hi, t_star) - f(name, h_lo, t_star)
                total += float(normal_pdf(t_star)) * jump * dt_star
            deriv[name, p] = total
    dlam = -(-8.0 * m / B + deriv["tanh", "eps"]) / deriv["tanh", "lam"]
    alpha0 = capacity_from_saddle(saddle, params, grid)
    return alpha0**2 * (deriv["alpha", "eps"] + deriv["alpha", "lam"] * dlam)
