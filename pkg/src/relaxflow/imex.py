"""IMEX Runge-Kutta stepping over a splitting, and the per-cell stiff solves.

A step of the pair (explicit tableau ~A, ~b; DIRK tableau A, b) on
y' = f(y) + g(y) builds, for each stage i,

    E_i = y0 + h sum_{j<i} (~a_ij f_j + a_ij g_j)
    Y_i = E_i + h a_ii g(Y_i)

and returns y0 + h sum_i (~b_i f_i + b_i g_i).  The stage equation is handed
to the splitting's ``implicit_solve`` together with a *freeze state* — the
most recent stage value (y0 for the first solved stage) — from which any
nonlinear diffusion coefficients are taken.  Freezing must use a post-solve
state: an explicit full-derivative predictor leaves the physical regime
(negative densities, say) near steep gradients whenever the step exceeds
the parabolic scale, which is precisely the regime penalized splittings
exist for.

g_i is recovered from the solved stage as (Y_i - E_i)/(h a_ii) rather than
re-evaluated, which is exact up to roundoff and avoids forming stiff
residuals that cancel catastrophically at small eps.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .spatial import Field, Grid1D
from .tableau import ImexPair, is_globally_stiffly_accurate

__all__ = [
    "DtPolicy",
    "DtEstimate",
    "SolverConfig",
    "StageWorkspace",
    "NewtonResult",
    "solve_relaxation_newton",
    "imex_step",
    "stable_dt",
    "integrate",
]

_TINY = 1e-300


@dataclass(frozen=True)
class DtPolicy:
    """Time-step rule: ``parabolic`` (dt = C dx^2), ``hyperbolic`` (dt = C dx),
    or ``fixed`` (dt = value)."""

    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in ("parabolic", "hyperbolic", "fixed"):
            raise ValueError(f"unknown dt policy kind {self.kind!r}")
        if not self.value > 0.0:
            raise ValueError("dt policy constant must be positive")

    @classmethod
    def parabolic(cls, c: float) -> "DtPolicy":
        return cls("parabolic", float(c))

    @classmethod
    def hyperbolic(cls, c: float) -> "DtPolicy":
        return cls("hyperbolic", float(c))

    @classmethod
    def fixed(cls, dt: float) -> "DtPolicy":
        return cls("fixed", float(dt))


@dataclass(frozen=True)
class DtEstimate:
    dt: float
    feasible: bool


@dataclass(frozen=True)
class SolverConfig:
    pair: ImexPair
    dt_policy: DtPolicy
    t_final: float
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    eps: float | None = None  # informational; the splitting carries the live value

    def __post_init__(self):
        if self.t_final < 0.0:
            raise ValueError("t_final must be nonnegative")
        if not self.newton_tol > 0.0 or self.newton_max_iter < 1:
            raise ValueError("bad Newton settings")


@dataclass
class StageWorkspace:
    """Per-step scratch: stage states and the two families of stage derivatives."""

    h: float
    y: list = field(default_factory=list)
    f: list = field(default_factory=list)  # explicit-part evaluations
    g: list = field(default_factory=list)  # implicit-part evaluations


# ---------------------------------------------------------------------------
# scalar stiff solve: eps^2 V + C1 |V|^(m-1) V = eps^2 C2
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NewtonResult:
    value: float
    iterations: int
    converged: bool
    residual: float


def _newton_core(eps2, c1, r, m, tol, max_iter):
    """Solve eps2*V + c1*|V|^(m-1)*V = r elementwise.

    The equation is odd and strictly increasing, so sign(V) = sign(r) and it
    suffices to find the root of G(W) = eps2*W + c1*W^m - |r| on W >= 0.
    The guess W0 = (|r|/c1)^(1/m) has G(W0) = eps2*W0 >= 0, giving the
    bracket [0, W0]; Newton iterates falling outside the shrinking bracket
    (or hitting the singular derivative at W=0 when m < 1) are replaced by
    bisection.
    """
    r = np.asarray(r, dtype=float)
    c1 = np.broadcast_to(np.asarray(c1, dtype=float), r.shape)
    if np.any(c1 <= 0.0):
        raise ValueError("relaxation coefficient C1 must be positive")
    sgn = np.sign(r)
    rr = np.abs(r)

    w = (rr / c1) ** (1.0 / m)
    hi = w.copy()
    lo = np.zeros_like(w)
    iters = np.zeros(r.shape, dtype=np.int64)
    active = rr > 0.0
    w[~active] = 0.0

    for _ in range(max_iter):
        wm = w**m
        gv = eps2 * w + c1 * wm - rr
        scale = np.maximum(np.maximum(rr, c1 * wm), np.maximum(eps2 * w, _TINY))
        active &= np.abs(gv) > tol * scale
        if not active.any():
            break
        pos = gv > 0.0
        hi = np.where(active & pos, w, hi)
        lo = np.where(active & ~pos, w, lo)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            gp = eps2 + m * c1 * np.where(w > 0.0, w ** (m - 1.0), np.inf)
            cand = w - gv / gp
        bad = ~np.isfinite(cand) | (cand <= lo) | (cand >= hi)
        cand = np.where(bad, 0.5 * (lo + hi), cand)
        w = np.where(active, cand, w)
        iters += active

    residual = np.abs(eps2 * w + c1 * w**m - rr)
    return sgn * w, iters, ~active, residual


def solve_relaxation_newton(
    eps: float, c1: float, c2: float, m: float,
    tol: float = 1e-12, max_iter: int = 50,
) -> NewtonResult:
    """Root of eps^2 V + C1 |V|^(m-1) V = eps^2 C2 (unique, sign of C2).

    Converges in <= 2 iterations for m = 1 (the equation is linear); the
    bisection safeguard keeps every iterate inside a bracket whose width
    never grows, so convergence is unconditional.
    """
    eps2 = eps * eps
    v, it, conv, res = _newton_core(
        eps2, np.array([c1]), np.array([eps2 * c2]), m, tol, max_iter
    )
    return NewtonResult(float(v[0]), int(it[0]), bool(conv[0]), float(res[0]))


def _relaxation_root_array(eps2, c1, r, m, tol=1e-12, max_iter=50):
    """Vectorized stage solve of eps2*V + c1*|V|^(m-1)*V = r; raises on
    non-convergence (a failed cell poisons the whole stage)."""
    v, _, conv, res = _newton_core(eps2, c1, r, m, tol, max_iter)
    if not conv.all():
        raise RuntimeError(
            f"stiff relaxation solve: {int(np.sum(~conv))} cells not converged "
            f"after {max_iter} iterations (worst residual {float(res.max()):.3e})"
        )
    return v


# ---------------------------------------------------------------------------
# the step
# ---------------------------------------------------------------------------

def imex_step(
    state: Field, h: float, split, pair: ImexPair,
    newton_tol: float = 1e-12, newton_max_iter: int = 50,
) -> Field:
    """One IMEX RK step of the splitting; returns a new Field.

    Stage derivatives are only evaluated when some later coefficient or the
    output weight consumes them — with a 2-stage pair of ARS type this step
    costs exactly one explicit right-hand side and one implicit solve.  For globally stiffly accurate pairs the
    output is exactly the last stage value.
    """
    if not h > 0.0:
        raise ValueError("step size must be positive")
    grid = state.grid
    y0 = state.values
    at, bt = pair.explicit.a, pair.explicit.b
    a, b = pair.implicit.a, pair.implicit.b
    s = pair.explicit.s
    mu = split.mu(grid)

    # consumption masks from the tableau weights
    later_f = [any(at[j, i] != 0.0 for j in range(i + 1, s)) for i in range(s)]
    later_g = [any(a[j, i] != 0.0 for j in range(i + 1, s)) for i in range(s)]
    need_f = [bt[i] != 0.0 or later_f[i] for i in range(s)]
    need_g = [b[i] != 0.0 or later_g[i] for i in range(s)]

    # Solved stages keep their exact increment dy = Y - E = h a_ii g(Y); an
    # implicit term h a_ij g_j is accumulated as (a_ij/a_jj) dy_j, so no
    # stiff magnitude is divided out and multiplied back in.  For stiffly
    # accurate pairs the output accumulation is then the E_s accumulation
    # plus dy_s, term by term, and reproduces the last stage exactly.
    ws = StageWorkspace(h=h, y=[None] * s, f=[None] * s, g=[None] * s)
    dy = [None] * s

    def add_implicit(acc, coef, j):
        if dy[j] is not None:
            acc += (coef / a[j, j]) * dy[j]
        else:
            acc += (h * coef) * ws.g[j]

    for i in range(s):
        e = y0.copy()
        for j in range(i):
            if at[i, j] != 0.0:
                e += (h * at[i, j]) * ws.f[j]
            if a[i, j] != 0.0:
                add_implicit(e, a[i, j], j)
        aii = a[i, i]
        if aii < 0.0:
            raise ValueError("implicit tableau has a negative diagonal entry")
        if aii == 0.0:
            y = e
            if need_g[i]:
                ws.g[i] = split.implicit_apply(y, grid, mu)
        else:
            # Coefficient-freeze state for the solve: the most recent stage
            # value.  It lags the stage by O(h) but is a post-solve, damped
            # state; an explicit full-RHS predictor is useless here because
            # at hyperbolic step sizes it leaves the physical regime (e.g.
            # negative densities) near steep gradients.
            frozen = ws.y[i - 1] if i > 0 else y0
            y = split.implicit_solve(
                e, h * aii, frozen, grid, mu,
                newton_tol=newton_tol, newton_max_iter=newton_max_iter,
            )
            dy[i] = y - e
        ws.y[i] = y
        if need_f[i]:
            ws.f[i] = split.explicit_rhs(y, grid, mu)

    if is_globally_stiffly_accurate(pair):
        # b is the last row of A on both sides, so the output sums are
        # term-for-term the E_s accumulation plus its solve increment.
        # Returning the solved stage keeps that identity exact: re-summing
        # would round the small solved value against the huge stiff
        # increments it sits between (e + (y - e) loses the bottom of y
        # once e dwarfs it).
        return Field(grid, ws.y[s - 1].copy())

    out = y0.copy()
    for j in range(s):
        if bt[j] != 0.0:
            out += (h * bt[j]) * ws.f[j]
        if b[j] != 0.0:
            add_implicit(out, b[j], j)
    return Field(grid, out)


# ---------------------------------------------------------------------------
# step-size selection and integration
# ---------------------------------------------------------------------------

def stable_dt(split, values: np.ndarray, grid: Grid1D, policy: DtPolicy) -> DtEstimate:
    """Step size under the policy, with a feasibility verdict.

    Parabolic steps of explicit diffusion-limit stepping obey
    dt <= dx^2 / ((alpha+1) max|u_x|^alpha); the bound binds for alpha > 0
    and is applied there.  For alpha < 0 the bound collapses near extrema
    where u_x = 0 and no step size satisfies it — the returned dt is then
    the plain C dx^2 and ``feasible`` is False whenever the collapsed bound
    falls under 1e-3 of it (the run may still be attempted; penalized
    splittings with a hyperbolic policy are the cure).
    """
    if policy.kind == "fixed":
        return DtEstimate(policy.value, True)
    if policy.kind == "hyperbolic":
        return DtEstimate(policy.value * grid.dx, True)
    base = policy.value * grid.dx**2
    if split.parabolic_cap is None:
        return DtEstimate(base, True)
    cap = float(split.parabolic_cap(np.asarray(values, dtype=float), grid))
    alpha = split.params.alpha
    if alpha > 0.0:
        return DtEstimate(min(base, cap), True)
    return DtEstimate(base, cap >= 1e-3 * base)


def integrate(
    state0: Field, split, config: SolverConfig,
    snapshot_times: Sequence[float] | None = None,
) -> list:
    """March to ``config.t_final``, landing exactly on every snapshot time.

    Returns [(t, Field), ...] starting with (0, initial state); the step size
    is re-estimated from the current state every step (the nonlinear
    parabolic bound moves with the solution).  Any non-finite value aborts
    with the offending step index.  The feasibility flag of stable_dt is
    advisory and not enforced here.
    """
    grid = state0.grid
    split.check_state(state0.values)
    t_final = float(config.t_final)
    trajectory = [(0.0, state0.copy())]
    if t_final == 0.0:
        return trajectory

    targets = sorted({float(tt) for tt in (snapshot_times or ())} | {t_final})
    for tt in targets:
        if not 0.0 < tt <= t_final:
            raise ValueError(f"snapshot time {tt} outside (0, {t_final}]")

    state = state0.copy()
    t = 0.0
    step_index = 0
    for target in targets:
        while t < target:
            est = stable_dt(split, state.values, grid, config.dt_policy)
            clipped = est.dt >= target - t
            dt = target - t if clipped else est.dt
            state = imex_step(
                state, dt, split, config.pair,
                newton_tol=config.newton_tol,
                newton_max_iter=config.newton_max_iter,
            )
            step_index += 1
            try:
                state.check_finite()
            except FloatingPointError as exc:
                raise FloatingPointError(
                    f"integration blew up at step {step_index}, "
                    f"t = {t + dt:.8g}: {exc}"
                ) from None
            t = target if clipped else t + dt
        trajectory.append((target, state.copy()))
    return trajectory
