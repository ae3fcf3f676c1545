"""Relaxation systems and their implicit-explicit splittings.

Four systems are provided, each as a set of right-hand-side closures bundled
in a :class:`SplitRHS`:

* linear relaxation        u_t + v_x = 0,  eps^2 v_t + b(u)_x = -(v - q(u))
  components (u, v); diffusion limit u_t + q(u)_x = b(u)_xx
* gradient-power relaxation (b = id, q = 0, nonlinear friction)
  u_t + v_x = 0,  eps^2 v_t + u_x = -|v|^(m-1) v
  components (u, v); limit u_t = (|u_x|^alpha u_x)_x with alpha = -1 + 1/m
* isentropic flow with strong friction, components (rho, rho*v)
  rho_t + (rho v)_x = 0,
  (rho v)_t + (rho v^2 + p(rho)/eps^2)_x = -kappa rho v / eps^2
  limit rho_t = (p(rho))_xx / kappa
* flow coupled to a two-moment radiation closure, components (rho, rho*v, e, f)
  with sources (-kappa rho v + sigma f)/eps^2 on momentum and -sigma f/eps^2
  on the flux; limit rho_t = p_xx/kappa + e_xx/(3 kappa), e_t = e_xx/(3 sigma)

Splitting kinds: the two unpenalized ones treat only the stiff source
implicitly (they differ in where the stiff gradient b(u)_x sits), the
penalized ones add and subtract a diffusion mu(eps) * b(u)_xx so the implicit
part carries a frozen-coefficient diffusion solve that removes the parabolic
step restriction in the stiff regime.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .spatial import (
    Boundary,
    FrozenDiffusionSystem,
    Grid1D,
    d_central,
    flux_divergence,
    half_point_weights,
    interface_deltas,
    weighted_divergence,
)

__all__ = [
    "SplittingKind",
    "MuRule",
    "mu_exp",
    "mu_step",
    "mu_value",
    "RelaxParams",
    "EulerParams",
    "SplitRHS",
    "linear_relaxation_split",
    "kl_split",
    "kl_penalized_problem",
    "euler_friction_split",
    "euler_m1_split",
    "eddington_chi",
    "equilibrium_closure",
    "LimitProblem",
    "limit_problem",
]


class SplittingKind(Enum):
    PARTITIONED_I = "partitioned-i"
    ADDITIVE_E = "additive-e"
    PENALIZED_BPR = "penalized-bpr"
    PENALIZED_BR = "penalized-br"


class MuRule(Enum):
    EXP = "exp"
    STEP = "step"
    ZERO = "zero"


def mu_exp(eps: float, dx: float) -> float:
    """Smooth switch exp(-eps^2/dx): 1 in the stiff regime, small when eps^2 >> dx."""
    return float(np.exp(-(eps * eps) / dx))


def mu_step(eps: float, dx: float) -> float:
    """Sharp switch: full penalization as soon as eps < dx."""
    return 1.0 if eps < dx else 0.0


def mu_value(rule: MuRule, eps: float, dx: float) -> float:
    if rule is MuRule.EXP:
        return mu_exp(eps, dx)
    if rule is MuRule.STEP:
        return mu_step(eps, dx)
    return 0.0


def _identity(u):
    return np.asarray(u, dtype=float)


def _one(u):
    return np.ones_like(np.asarray(u, dtype=float))


def _zero(u):
    return np.zeros_like(np.asarray(u, dtype=float))


def _signed_power(v: np.ndarray, m: float) -> np.ndarray:
    """|v|^(m-1) v, with v = 0 cells evaluated as 0 (the bare power divides
    by zero for m < 1)."""
    v = np.asarray(v, dtype=float)
    if m == 1.0:
        return v
    out = np.zeros_like(v)
    nz = v != 0.0
    out[nz] = np.abs(v[nz]) ** (m - 1.0) * v[nz]
    return out


@dataclass(frozen=True)
class RelaxParams:
    """Parameters of the scalar relaxation systems.

    ``m`` is the friction exponent (m = 1 gives the linear source), ``b`` and
    ``q`` the constitutive functions of the linear model, ``b_prime`` an
    optional derivative used for frozen diffusion weights (divided differences
    with an ``reg_tol`` floor otherwise).
    """

    eps: float
    m: float = 1.0
    b: Callable = _identity
    q: Callable = _zero
    b_prime: Callable | None = None
    reg_tol: float = 1e-12

    def __post_init__(self):
        if self.eps < 0.0:
            raise ValueError("eps must be nonnegative")
        if self.m <= 0.0:
            raise ValueError(f"friction exponent m must be positive, got {self.m}")
        if not self.reg_tol > 0.0:
            raise ValueError("reg_tol must be positive")

    @property
    def alpha(self) -> float:
        """Gradient exponent of the limit equation: alpha = -1 + 1/m."""
        return -1.0 + 1.0 / self.m


@dataclass(frozen=True)
class EulerParams:
    """Parameters of the flow systems: p(rho) = c_p rho^eta, friction kappa,
    opacity sigma (radiation model only)."""

    eps: float
    eta: float = 2.0
    c_p: float = 1.0
    kappa: float = 1.0
    sigma: float = 1.0
    reg_tol: float = 1e-12

    def __post_init__(self):
        if self.eps < 0.0:
            raise ValueError("eps must be nonnegative")
        if self.eta <= 1.0:
            raise ValueError(f"pressure exponent eta must exceed 1, got {self.eta}")
        if self.c_p <= 0.0 or self.kappa <= 0.0 or self.sigma <= 0.0:
            raise ValueError("c_p, kappa, sigma must be positive")

    def pressure(self, rho: np.ndarray) -> np.ndarray:
        return self.c_p * rho**self.eta

    def pressure_prime(self, rho: np.ndarray) -> np.ndarray:
        return self.c_p * self.eta * rho ** (self.eta - 1.0)


@dataclass
class SplitRHS:
    """A model plus splitting: everything one IMEX stage needs.

    ``explicit_rhs(values, grid, mu)`` is the non-stiff tableau part;
    ``implicit_apply(values, grid, mu)`` evaluates the implicit part at a
    known state; ``implicit_solve(rhs_known, sigma, frozen, grid, mu)`` solves
    Y = rhs_known + sigma * implicit(Y), freezing any nonlinear diffusion
    weights at ``frozen`` and updating non-stiff components before the stiff
    per-cell solves (so fresh gradients feed the relaxation where the
    splitting calls for it).
    """

    kind: SplittingKind
    mu_rule: MuRule
    eps: float
    components: int
    stiff_components: tuple
    conserved_components: tuple
    explicit_rhs: Callable
    implicit_apply: Callable
    implicit_solve: Callable
    params: object
    parabolic_cap: Callable | None = None
    validate_state: Callable | None = None
    component_names: tuple = ()

    def mu(self, grid: Grid1D) -> float:
        return mu_value(self.mu_rule, self.eps, grid.dx)

    def check_state(self, values: np.ndarray):
        if self.validate_state is not None:
            self.validate_state(values)


# ---------------------------------------------------------------------------
# scalar relaxation models
# ---------------------------------------------------------------------------

def _b_weights(params: RelaxParams):
    """Interface weights for the frozen diffusion of b(u)_xx.

    With a derivative available, evaluate it at interface midpoints; otherwise
    use divided differences of b with the denominator floored at reg_tol.
    Either way w * (u_R - u_L) is a consistent interface flux of b(u)_x.
    """
    b, bp, tol = params.b, params.b_prime, params.reg_tol

    def weights(u: np.ndarray, grid: Grid1D) -> np.ndarray:
        g = np.empty(u.shape[0] + 2)
        g[1:-1] = u
        if grid.boundary is Boundary.PERIODIC:
            g[0], g[-1] = u[-1], u[0]
        else:
            g[0], g[-1] = u[0], u[-1]
        if bp is not None:
            return np.asarray(bp(0.5 * (g[:-1] + g[1:])), dtype=float)
        du = g[1:] - g[:-1]
        db = np.asarray(b(g[1:]), dtype=float) - np.asarray(b(g[:-1]), dtype=float)
        denom = np.where(np.abs(du) > tol, du, np.where(du < 0, -tol, tol))
        return db / denom

    return weights


def _stack(*comps) -> np.ndarray:
    return np.stack(comps, axis=1)


def linear_relaxation_split(
    params: RelaxParams,
    kind: SplittingKind = SplittingKind.ADDITIVE_E,
    mu_rule: MuRule = MuRule.ZERO,
) -> SplitRHS:
    """Splittings of the linear-source relaxation system, components (u, v).

    * partitioned: only v sees an implicit solve, with the full stiff source
      q(u) - b(u)_x - v evaluated at the freshly updated stage u.
    * additive: b(u)_x/eps^2 is explicit; the implicit source is -(v - q(u)).
    * penalized (BPR/BR): the flux gains -mu*b(u)_x and the implicit part the
      matching +mu*b(u)_xx as a frozen-weight solve; BPR keeps b(u)_x inside
      the implicit source (fresh u), BR leaves it explicit.
    """
    eps2 = params.eps**2
    b, q = params.b, params.q
    wfun = _b_weights(params)
    penal = kind in (SplittingKind.PENALIZED_BPR, SplittingKind.PENALIZED_BR)
    if not penal and mu_rule is not MuRule.ZERO:
        raise ValueError(f"{kind.value} splitting takes mu_rule ZERO")

    def explicit_rhs(y, grid, mu):
        u, v = y[:, 0], y[:, 1]
        du = -flux_divergence(v, grid, wall="zero")
        if penal and mu != 0.0:
            du = du - mu * weighted_divergence(wfun(u, grid), u, grid)
        if kind in (SplittingKind.ADDITIVE_E, SplittingKind.PENALIZED_BR):
            dv = -d_central(b(u), grid) / eps2
        else:
            dv = np.zeros_like(v)
        return _stack(du, dv)

    def implicit_apply(y, grid, mu):
        u, v = y[:, 0], y[:, 1]
        du = np.zeros_like(u)
        if penal and mu != 0.0:
            du = mu * weighted_divergence(wfun(u, grid), u, grid)
        if kind in (SplittingKind.ADDITIVE_E, SplittingKind.PENALIZED_BR):
            dv = (q(u) - v) / eps2
        else:
            dv = (q(u) - d_central(b(u), grid) - v) / eps2
        return _stack(du, dv)

    def implicit_solve(rhs_known, sigma, frozen, grid, mu, **_solver_opts):
        eu, ev = rhs_known[:, 0], rhs_known[:, 1]
        if penal and mu != 0.0:
            system = FrozenDiffusionSystem(wfun(frozen[:, 0], grid), sigma * mu, grid)
            u = system.solve(eu)
        else:
            u = eu.copy()
        if kind in (SplittingKind.ADDITIVE_E, SplittingKind.PENALIZED_BR):
            g_of_u = q(u)
        else:
            g_of_u = q(u) - d_central(b(u), grid)
        v = (eps2 * ev + sigma * g_of_u) / (eps2 + sigma)
        return _stack(u, v)

    return SplitRHS(
        kind=kind,
        mu_rule=mu_rule,
        eps=params.eps,
        components=2,
        stiff_components=(1,),
        conserved_components=(0,),
        explicit_rhs=explicit_rhs,
        implicit_apply=implicit_apply,
        implicit_solve=implicit_solve,
        params=params,
        component_names=("u", "v"),
    )


def kl_split(
    params: RelaxParams,
    kind: SplittingKind = SplittingKind.PENALIZED_BPR,
    mu_rule: MuRule = MuRule.EXP,
) -> SplitRHS:
    """Splittings of the gradient-power relaxation system (b = id, q = 0).

    The stage solve for v reduces per cell to the scalar signed root of
    eps^2 V + C1 |V|^(m-1) V = R.  For the penalized splitting the BPR
    ordering is used: the u diffusion is solved first with weights
    (|du*| + tol)^alpha frozen at the explicitly known stage state, and its
    fresh gradient feeds the relaxation solve.  (An implicit-argument
    gradient is what keeps non stiffly-accurate pairs consistent in the
    stiff limit; with the gradient explicit, type-A pairs drive the early
    stages off equilibrium and the limit scheme loses consistency.)
    """
    from .imex import _relaxation_root_array  # local import: no cycle at module load

    eps2 = params.eps**2
    m, alpha, tol = params.m, params.alpha, params.reg_tol
    if kind is SplittingKind.PARTITIONED_I:
        raise ValueError("gradient-power model supports additive and penalized kinds")
    penal = kind in (SplittingKind.PENALIZED_BPR, SplittingKind.PENALIZED_BR)
    if not penal and mu_rule is not MuRule.ZERO:
        mu_rule = MuRule.ZERO

    def nfd(u, grid):
        return weighted_divergence(half_point_weights(u, grid, alpha, tol), u, grid)

    def friction(v):
        return _signed_power(v, m)

    def explicit_rhs(y, grid, mu):
        u, v = y[:, 0], y[:, 1]
        du = -flux_divergence(v, grid, wall="zero")
        if penal and mu != 0.0:
            du = du - mu * nfd(u, grid)
        if kind in (SplittingKind.ADDITIVE_E, SplittingKind.PENALIZED_BR):
            dv = -d_central(u, grid) / eps2
        else:
            dv = np.zeros_like(v)
        return _stack(du, dv)

    def implicit_apply(y, grid, mu):
        u, v = y[:, 0], y[:, 1]
        du = np.zeros_like(u)
        if penal and mu != 0.0:
            du = mu * nfd(u, grid)
        if kind is SplittingKind.PENALIZED_BPR:
            dv = (-d_central(u, grid) - friction(v)) / eps2
        else:
            dv = -friction(v) / eps2
        return _stack(du, dv)

    def implicit_solve(rhs_known, sigma, frozen, grid, mu,
                       newton_tol=1e-12, newton_max_iter=50):
        eu, ev = rhs_known[:, 0], rhs_known[:, 1]
        if penal and mu != 0.0:
            w_star = half_point_weights(frozen[:, 0], grid, alpha, tol)
            u = FrozenDiffusionSystem(w_star, sigma * mu, grid).solve(eu)
        else:
            u = eu.copy()
        # eps^2 V + sigma |V|^(m-1) V = R; the stiff gradient joins R for BPR
        rhs_r = eps2 * ev
        if kind is SplittingKind.PENALIZED_BPR:
            rhs_r = rhs_r - sigma * d_central(u, grid)
        v = _relaxation_root_array(eps2, sigma, rhs_r, m,
                                   tol=newton_tol, max_iter=newton_max_iter)
        return _stack(u, v)

    def parabolic_cap(y, grid):
        coef = (params.alpha + 1.0) * (
            np.abs(d_central(y[:, 0], grid)) + tol
        ) ** params.alpha
        return grid.dx**2 / float(np.max(coef))

    return SplitRHS(
        kind=kind,
        mu_rule=mu_rule,
        eps=params.eps,
        components=2,
        stiff_components=(1,),
        conserved_components=(0,),
        explicit_rhs=explicit_rhs,
        implicit_apply=implicit_apply,
        implicit_solve=implicit_solve,
        params=params,
        parabolic_cap=parabolic_cap,
        component_names=("u", "v"),
    )


def kl_penalized_problem(
    params: RelaxParams, mu_rule: MuRule = MuRule.EXP
) -> "LimitProblem":
    """Penalized gradient-power relaxation system in two-argument form.

    The double-tableau splitting of :func:`kl_split` freezes the penalization
    weights at different states on the explicit and implicit sides of the
    cancellation.  For alpha < 0 the weights are steep wherever the gradient
    flattens, the two copies drift apart, and hyperbolic-step runs lose
    convergence.  Written as F(y*, y) with both copies sharing the weights of
    the starred argument,

        u-row: -dx(v*) - mu W(u*) u* + mu W(u*) u
        v-row: (-dx(u) - |v|^(m-1) v) / eps^2

    (W(u*) = diffusion with weights frozen at u*), the cancellation is exact
    whenever the two arguments meet.  Stage solves do the u-row tridiagonal
    system first and feed its fresh gradient to the per-cell friction root,
    so the slope-form stepper (which enforces b = b~) can take the role of
    the double-tableau loop.
    """
    from .imex import _relaxation_root_array  # local import: no cycle at module load

    eps2 = params.eps**2
    m, alpha, tol = params.m, params.alpha, params.reg_tol
    if eps2 == 0.0:
        raise ValueError("penalized two-argument form needs eps > 0")

    def rhs(frozen, state, grid):
        mu = mu_value(mu_rule, params.eps, grid.dx)
        u_star, v_star = frozen[:, 0], frozen[:, 1]
        u, v = state[:, 0], state[:, 1]
        du = -flux_divergence(v_star, grid, wall="zero")
        if mu != 0.0:
            w_star = half_point_weights(u_star, grid, alpha, tol)
            du = du + mu * (weighted_divergence(w_star, u, grid)
                            - weighted_divergence(w_star, u_star, grid))
        dv = (-d_central(u, grid) - _signed_power(v, m)) / eps2
        return _stack(du, dv)

    def solve_stage(frozen, rhs_const, sigma, grid,
                    newton_tol=1e-12, newton_max_iter=50):
        mu = mu_value(mu_rule, params.eps, grid.dx)
        u_star, v_star = frozen[:, 0], frozen[:, 1]
        ru = rhs_const[:, 0] - sigma * flux_divergence(v_star, grid, wall="zero")
        if mu != 0.0:
            w_star = half_point_weights(u_star, grid, alpha, tol)
            ru = ru - sigma * mu * weighted_divergence(w_star, u_star, grid)
            u = FrozenDiffusionSystem(w_star, sigma * mu, grid).solve(ru)
        else:
            u = ru
        rhs_r = eps2 * rhs_const[:, 1] - sigma * d_central(u, grid)
        v = _relaxation_root_array(eps2, sigma, rhs_r, m,
                                   tol=newton_tol, max_iter=newton_max_iter)
        return _stack(u, v)

    return LimitProblem(2, rhs, solve_stage, ("u", "v"))


# ---------------------------------------------------------------------------
# flow models
# ---------------------------------------------------------------------------

def _pressure_weights(params: EulerParams):
    """Divided-difference weights of p at interfaces: w * (rho_R - rho_L) = p_R - p_L.

    The argument may be a coefficient-freeze state (a stage predictor), which
    on steep data can overshoot below zero where the pressure law is not
    meaningful; weights are built on the projection onto rho >= 0, where
    monotonicity of p keeps them nonnegative.
    """

    def weights(rho: np.ndarray, grid: Grid1D) -> np.ndarray:
        g = np.empty(rho.shape[0] + 2)
        g[1:-1] = np.maximum(rho, 0.0)
        if grid.boundary is Boundary.PERIODIC:
            g[0], g[-1] = rho[-1], rho[0]
        else:
            g[0], g[-1] = rho[0], rho[-1]
        drho = g[1:] - g[:-1]
        dp = params.pressure(g[1:]) - params.pressure(g[:-1])
        floored = np.where(np.abs(drho) > params.reg_tol, drho,
                           np.where(drho < 0, -params.reg_tol, params.reg_tol))
        w = np.where(np.abs(drho) > params.reg_tol, dp / floored,
                     params.pressure_prime(0.5 * (g[:-1] + g[1:])))
        return w

    return weights


def euler_friction_split(
    params: EulerParams, mu_rule: MuRule = MuRule.STEP
) -> SplitRHS:
    """Penalized splitting of the friction-dominated flow system (rho, rho*v).

    Explicit: mass flux rho*v minus the penalization flux mu*p(rho)_x, and the
    full momentum flux rho v^2 + p/eps^2 (the huge pressure gradient is damped
    through the implicit friction solve, which requires a stiffly accurate
    pair for a consistent stiff limit).  Implicit: +mu p(rho)_xx with weights
    frozen at the stage state, and the friction -kappa rho v/eps^2.
    """
    eps2 = params.eps**2
    kappa = params.kappa
    wp = _pressure_weights(params)

    def explicit_rhs(y, grid, mu):
        rho, mq = y[:, 0], y[:, 1]
        drho = -flux_divergence(mq, grid, wall="zero")
        if mu != 0.0:
            drho = drho - mu * weighted_divergence(wp(rho, grid), rho, grid)
        dmq = -flux_divergence(mq * mq / rho + params.pressure(rho) / eps2,
                               grid, wall="copy")
        return _stack(drho, dmq)

    def implicit_apply(y, grid, mu):
        rho, mq = y[:, 0], y[:, 1]
        drho = np.zeros_like(rho)
        if mu != 0.0:
            drho = mu * weighted_divergence(wp(rho, grid), rho, grid)
        return _stack(drho, -kappa * mq / eps2)

    def implicit_solve(rhs_known, sigma, frozen, grid, mu, **_solver_opts):
        erho, emq = rhs_known[:, 0], rhs_known[:, 1]
        if mu != 0.0:
            rho = FrozenDiffusionSystem(wp(frozen[:, 0], grid), sigma * mu, grid).solve(erho)
        else:
            rho = erho.copy()
        mq = eps2 * emq / (eps2 + kappa * sigma)
        return _stack(rho, mq)

    def validate_state(y):
        if np.any(y[:, 0] <= 0.0):
            raise ValueError("density must stay positive")

    return SplitRHS(
        kind=SplittingKind.PENALIZED_BR,
        mu_rule=mu_rule,
        eps=params.eps,
        components=2,
        stiff_components=(1,),
        conserved_components=(0,),
        explicit_rhs=explicit_rhs,
        implicit_apply=implicit_apply,
        implicit_solve=implicit_solve,
        params=params,
        validate_state=validate_state,
        component_names=("rho", "rho_v"),
    )


def eddington_chi(xi):
    """Two-moment closure factor chi(xi) = (3 + 4 xi^2) / (5 + 2 sqrt(4 - 3 xi^2)).

    chi(0) = 1/3 (diffusive), chi(+-1) = 1 (free streaming); |xi| <= 1.
    """
    xi = np.asarray(xi, dtype=float)
    if np.any(np.abs(xi) > 1.0 + 1e-12):
        raise ValueError("closure argument must satisfy |f|/e <= 1")
    xi = np.clip(xi, -1.0, 1.0)
    out = (3.0 + 4.0 * xi * xi) / (5.0 + 2.0 * np.sqrt(4.0 - 3.0 * xi * xi))
    return out if out.ndim else float(out)


def euler_m1_split(params: EulerParams, mu_rule: MuRule = MuRule.STEP) -> SplitRHS:
    """Penalized splitting of the flow/radiation system (rho, rho*v, e, f).

    Stage ordering inside the implicit solve: the radiative energy diffusion
    e_xx/(3 sigma) is solved first; the solved e feeds the rho equation's
    e_xx/(3 kappa) coupling as a known source next to the frozen p(rho)_xx
    solve; then the two per-cell linear relaxations, f before rho*v (the
    momentum source kappa rho v - sigma f needs the fresh f).
    """
    eps2 = params.eps**2
    kappa, sig = params.kappa, params.sigma
    wp = _pressure_weights(params)
    ones_cache = {}

    def unit_weights(grid):
        w = ones_cache.get(grid.n)
        if w is None:
            w = np.ones(grid.n + 1)
            ones_cache[grid.n] = w
        return w

    def lap(u, grid):
        return weighted_divergence(unit_weights(grid), u, grid)

    def explicit_rhs(y, grid, mu):
        rho, mq, e, f = y[:, 0], y[:, 1], y[:, 2], y[:, 3]
        drho = -flux_divergence(mq, grid, wall="zero")
        de = -flux_divergence(f, grid, wall="zero")
        if mu != 0.0:
            drho = drho - (mu / kappa) * (
                weighted_divergence(wp(rho, grid), rho, grid) + lap(e, grid) / 3.0
            )
            de = de - (mu / (3.0 * sig)) * lap(e, grid)
        dmq = -flux_divergence(mq * mq / rho + params.pressure(rho) / eps2,
                               grid, wall="copy")
        df = -flux_divergence(eddington_chi(params.eps * f / e) * e, grid,
                              wall="copy") / eps2
        return _stack(drho, dmq, de, df)

    def implicit_apply(y, grid, mu):
        rho, mq, e, f = y[:, 0], y[:, 1], y[:, 2], y[:, 3]
        if mu != 0.0:
            drho = (mu / kappa) * (
                weighted_divergence(wp(rho, grid), rho, grid) + lap(e, grid) / 3.0
            )
            de = (mu / (3.0 * sig)) * lap(e, grid)
        else:
            drho = np.zeros_like(rho)
            de = np.zeros_like(e)
        dmq = (-kappa * mq + sig * f) / eps2
        df = -sig * f / eps2
        return _stack(drho, dmq, de, df)

    def implicit_solve(rhs_known, sigma, frozen, grid, mu, **_solver_opts):
        erho, emq, ee, ef = (rhs_known[:, j] for j in range(4))
        if mu != 0.0:
            e = FrozenDiffusionSystem(unit_weights(grid), sigma * mu / (3.0 * sig),
                                      grid).solve(ee)
            rho_rhs = erho + (sigma * mu / (3.0 * kappa)) * lap(e, grid)
            rho = FrozenDiffusionSystem(wp(frozen[:, 0], grid), sigma * mu / kappa,
                                        grid).solve(rho_rhs)
        else:
            e = ee.copy()
            rho = erho.copy()
        f = eps2 * ef / (eps2 + sig * sigma)
        mq = (eps2 * emq + sigma * sig * f) / (eps2 + kappa * sigma)
        return _stack(rho, mq, e, f)

    def validate_state(y):
        if np.any(y[:, 0] <= 0.0):
            raise ValueError("density must stay positive")
        if np.any(y[:, 2] <= 0.0):
            raise ValueError("radiative energy must stay positive")
        if np.any(np.abs(params.eps * y[:, 3] / y[:, 2]) > 1.0 + 1e-12):
            raise ValueError("closure argument |eps f / e| exceeded 1")

    return SplitRHS(
        kind=SplittingKind.PENALIZED_BR,
        mu_rule=mu_rule,
        eps=params.eps,
        components=4,
        stiff_components=(1, 3),
        conserved_components=(0, 2),
        explicit_rhs=explicit_rhs,
        implicit_apply=implicit_apply,
        implicit_solve=implicit_solve,
        params=params,
        validate_state=validate_state,
        component_names=("rho", "rho_v", "e", "f"),
    )


# ---------------------------------------------------------------------------
# equilibrium closures and limit right-hand sides
# ---------------------------------------------------------------------------

def equilibrium_closure(split: SplitRHS, values: np.ndarray, grid: Grid1D) -> np.ndarray:
    """Fill the stiff components with their formal local equilibrium.

    Discrete gradients use the central difference, so the result is the
    equilibrium of the scheme up to O(dx^2).  Returns a full copy.
    """
    y = np.array(values, dtype=float, copy=True)
    p = split.params
    if isinstance(p, RelaxParams):
        u = y[:, 0]
        g = p.q(u) - d_central(p.b(u), grid)
        if p.m == 1.0:
            y[:, 1] = g
        else:
            y[:, 1] = np.sign(g) * np.abs(g) ** (1.0 / p.m)
        return y
    if split.components == 2:  # friction flow
        rho = y[:, 0]
        y[:, 1] = -d_central(p.pressure(rho), grid) / p.kappa
        return y
    rho, e = y[:, 0], y[:, 2]
    f_eq = -d_central(e, grid) / (3.0 * p.sigma)
    y[:, 3] = f_eq
    y[:, 1] = (-d_central(p.pressure(rho), grid) + p.sigma * f_eq) / p.kappa
    return y


@dataclass
class LimitProblem:
    """Right-hand side in two-argument form F(frozen, state) with a matching
    stage solve Z = rhs + sigma*F(frozen, Z).  The second argument must be
    cheap to solve for: linear for the diffusion limits, linear plus a
    per-cell friction root for the penalized relaxation system.
    """

    components: int
    rhs: Callable  # (frozen, state, grid) -> (n, k)
    solve_stage: Callable  # (frozen, rhs_const, sigma, grid) -> (n, k)
    component_names: tuple = ()


def limit_problem(model: str, params) -> LimitProblem:
    """Limit equations: 'linear' / 'kl' (scalar u), 'euler' (rho), 'm1' (rho, e)."""
    if model == "kl":
        alpha, tol = params.alpha, params.reg_tol

        def rhs(frozen, state, grid):
            w = half_point_weights(frozen[:, 0], grid, alpha, tol)
            return weighted_divergence(w, state[:, 0], grid)[:, None]

        def solve_stage(frozen, rhs_const, sigma, grid):
            w = half_point_weights(frozen[:, 0], grid, alpha, tol)
            return FrozenDiffusionSystem(w, sigma, grid).solve(rhs_const[:, 0])[:, None]

        return LimitProblem(1, rhs, solve_stage, ("u",))

    if model == "linear":
        wfun = _b_weights(params)
        q = params.q

        def advect(frozen, grid):
            # first-order upwind transport of q(u*): the interface speed is
            # the divided difference of q, the flux takes the upwind side
            u = frozen[:, 0]
            g = np.empty(u.shape[0] + 2)
            g[1:-1] = u
            if grid.boundary is Boundary.PERIODIC:
                g[0], g[-1] = u[-1], u[0]
            else:
                g[0], g[-1] = u[0], u[-1]
            qu = np.asarray(q(g), dtype=float)
            du = g[1:] - g[:-1]
            dq = qu[1:] - qu[:-1]
            tol = params.reg_tol
            speed = dq / np.where(np.abs(du) > tol, du,
                                  np.where(du < 0, -tol, tol))
            flux = np.where(speed >= 0.0, qu[:-1], qu[1:])
            return -(flux[1:] - flux[:-1]) / grid.dx

        def rhs(frozen, state, grid):
            w = wfun(frozen[:, 0], grid)
            return (advect(frozen, grid)
                    + weighted_divergence(w, state[:, 0], grid))[:, None]

        def solve_stage(frozen, rhs_const, sigma, grid):
            w = wfun(frozen[:, 0], grid)
            rc = rhs_const[:, 0] + sigma * advect(frozen, grid)
            return FrozenDiffusionSystem(w, sigma, grid).solve(rc)[:, None]

        return LimitProblem(1, rhs, solve_stage, ("u",))

    if model == "euler":
        wp = _pressure_weights(params)
        kappa = params.kappa

        def rhs(frozen, state, grid):
            w = wp(frozen[:, 0], grid)
            return (weighted_divergence(w, state[:, 0], grid) / kappa)[:, None]

        def solve_stage(frozen, rhs_const, sigma, grid):
            w = wp(frozen[:, 0], grid)
            sys = FrozenDiffusionSystem(w, sigma / kappa, grid)
            return sys.solve(rhs_const[:, 0])[:, None]

        return LimitProblem(1, rhs, solve_stage, ("rho",))

    if model == "m1":
        wp = _pressure_weights(params)
        kappa, sig = params.kappa, params.sigma

        def lap(u, grid):
            return weighted_divergence(np.ones(grid.n + 1), u, grid)

        def rhs(frozen, state, grid):
            rho, e = state[:, 0], state[:, 1]
            w = wp(frozen[:, 0], grid)
            de = lap(e, grid) / (3.0 * sig)
            drho = weighted_divergence(w, rho, grid) / kappa + lap(e, grid) / (3.0 * kappa)
            return _stack(drho, de)

        def solve_stage(frozen, rhs_const, sigma, grid):
            # one-way coupling: the e solve feeds the rho equation
            e = FrozenDiffusionSystem(np.ones(grid.n + 1), sigma / (3.0 * sig),
                                      grid).solve(rhs_const[:, 1])
            w = wp(frozen[:, 0], grid)
            rho_rhs = rhs_const[:, 0] + (sigma / (3.0 * kappa)) * lap(e, grid)
            rho = FrozenDiffusionSystem(w, sigma / kappa, grid).solve(rho_rhs)
            return _stack(rho, e)

        return LimitProblem(2, rhs, solve_stage, ("rho", "e"))

    raise ValueError(f"unknown limit model {model!r}")
