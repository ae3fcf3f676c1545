"""Semi-implicit Runge-Kutta stepping for the degenerate parabolic limits.

The limit right-hand sides come in the two-argument form F(u*, u) of a
:class:`~relaxflow.models.LimitProblem`: the first argument carries all the
nonlinearity (frozen diffusion weights, upwinded transport), the second
enters linearly.  A step computes stage slopes

    K_i = F(U*_i, Ubar_i + h a_ii K_i),
    U*_i = u + h sum_{j<i} ~a_ij K_j,   Ubar_i = u + h sum_{j<i} a_ij K_j,

each one a single frozen-coefficient linear solve, and updates with the
shared weights b = ~b (the matching-weights constraint is what makes the
slope formulation unambiguous).  These runs serve as reference solutions
for the stiff relaxation solver as eps -> 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imex import DtPolicy
from .models import LimitProblem
from .spatial import Field
from .tableau import ImexPair

__all__ = [
    "SemiImplicitScheme",
    "semi_implicit_step",
    "midpoint_step",
    "solve_limit",
]


@dataclass(frozen=True)
class SemiImplicitScheme:
    pair: ImexPair

    def __post_init__(self):
        gap = float(np.max(np.abs(self.pair.implicit.b - self.pair.explicit.b)))
        if gap > 1e-14:
            raise ValueError(
                "semi-implicit stepping requires matching output weights "
                f"(max |b - b~| = {gap:.3e})"
            )

    @property
    def s(self) -> int:
        return self.pair.explicit.s


def semi_implicit_step(
    state: Field, h: float, problem: LimitProblem, scheme: SemiImplicitScheme
) -> Field:
    """One step of the general slope-form scheme; returns a new Field."""
    if not h > 0.0:
        raise ValueError("step size must be positive")
    grid = state.grid
    u = state.values
    at = scheme.pair.explicit.a
    a = scheme.pair.implicit.a
    b = scheme.pair.implicit.b
    s = scheme.s

    slopes = [None] * s
    for i in range(s):
        u_star = u.copy()
        u_bar = u.copy()
        for j in range(i):
            if at[i, j] != 0.0:
                u_star += (h * at[i, j]) * slopes[j]
            if a[i, j] != 0.0:
                u_bar += (h * a[i, j]) * slopes[j]
        sigma = h * a[i, i]
        if sigma == 0.0:
            slopes[i] = problem.rhs(u_star, u_bar, grid)
        else:
            z = problem.solve_stage(u_star, u_bar, sigma, grid)
            slopes[i] = (z - u_bar) / sigma

    out = u.copy()
    for i in range(s):
        if b[i] != 0.0:
            out += (h * b[i]) * slopes[i]
    return Field(grid, out)


def midpoint_step(state: Field, h: float, problem: LimitProblem) -> Field:
    """Second-order two-stage specialization: freeze at the half step, solve
    the half-step state implicitly, reflect.  Agrees with
    ``semi_implicit_step`` under the midpoint pair to roundoff."""
    if not h > 0.0:
        raise ValueError("step size must be positive")
    grid = state.grid
    u = state.values
    u_star = u + (h * 0.5) * problem.rhs(u, u, grid)
    u_half = problem.solve_stage(u_star, u, h * 0.5, grid)
    return Field(grid, 2.0 * u_half - u)


def solve_limit(
    problem: LimitProblem,
    state0: Field,
    t_final: float,
    dt_policy: DtPolicy,
    scheme: SemiImplicitScheme | None = None,
) -> Field:
    """Reference solution of the limit equation at ``t_final``.

    Defaults to the midpoint specialization; pass a scheme to use another
    matching-weights pair.  The step size is the policy value (no state
    caps: every stage is an unconditionally solvable linear system), with
    the last step clipped to land on the final time exactly.
    """
    if state0.k != problem.components:
        raise ValueError(
            f"state has {state0.k} components, limit problem wants "
            f"{problem.components}"
        )
    if t_final < 0.0:
        raise ValueError("t_final must be nonnegative")
    grid = state0.grid
    if dt_policy.kind == "parabolic":
        base = dt_policy.value * grid.dx**2
    elif dt_policy.kind == "hyperbolic":
        base = dt_policy.value * grid.dx
    else:
        base = dt_policy.value

    state = state0.copy()
    t = 0.0
    step_index = 0
    while t < t_final:
        clipped = base >= t_final - t
        dt = t_final - t if clipped else base
        if scheme is None:
            state = midpoint_step(state, dt, problem)
        else:
            state = semi_implicit_step(state, dt, problem, scheme)
        step_index += 1
        try:
            state.check_finite()
        except FloatingPointError as exc:
            raise FloatingPointError(
                f"limit solve blew up at step {step_index}: {exc}"
            ) from None
        t = t_final if clipped else t + dt
    return state
