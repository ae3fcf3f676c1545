import numpy as np
import pytest

from relaxflow.models import (
    EulerParams,
    MuRule,
    RelaxParams,
    SplittingKind,
    _signed_power,
    eddington_chi,
    equilibrium_closure,
    euler_friction_split,
    euler_m1_split,
    kl_split,
    limit_problem,
    linear_relaxation_split,
    mu_exp,
    mu_step,
    mu_value,
)
from relaxflow.spatial import d2_central, d_central, nonlinear_flux_divergence


def smooth_pair(grid, rng=None):
    x = grid.cells()
    u = 0.6 + 0.3 * np.cos(x)
    v = 0.2 * np.sin(2.0 * x)
    return np.stack([u, v], axis=1)


def euler_state(grid):
    x = grid.cells()
    rho = 1.2 + 0.3 * np.sin(2.0 * np.pi * x / (grid.x_max - grid.x_min))
    mq = 0.1 * np.cos(2.0 * np.pi * x / (grid.x_max - grid.x_min))
    return np.stack([rho, mq], axis=1)


def m1_state(grid, eps):
    x = grid.cells()
    w = 2.0 * np.pi * (x - grid.x_min) / (grid.x_max - grid.x_min)
    rho = 1.0 + 0.2 * np.sin(w)
    e = 1.2 + 0.3 * np.cos(w)
    mq = 0.05 * np.sin(2.0 * w)
    f = 0.1 * np.cos(w) / eps  # keeps |eps f / e| well inside the closure domain
    return np.stack([rho, mq, e, f], axis=1)


# ---------------------------------------------------------------------------
# penalization weights and small helpers
# ---------------------------------------------------------------------------

def test_exponential_weight_decays_with_stiffness():
    dx = 0.1
    assert mu_exp(0.0, dx) == 1.0
    assert mu_exp(0.05, dx) == pytest.approx(np.exp(-0.025))
    assert mu_exp(1.0, dx) < mu_exp(0.1, dx) < 1.0


def test_step_weight_switches_at_the_cell_width():
    assert mu_step(0.05, 0.1) == 1.0
    assert mu_step(0.1, 0.1) == 0.0
    assert mu_step(0.2, 0.1) == 0.0


def test_mu_value_dispatch():
    assert mu_value(MuRule.ZERO, 1e-3, 0.1) == 0.0
    assert mu_value(MuRule.EXP, 1e-3, 0.1) == mu_exp(1e-3, 0.1)
    assert mu_value(MuRule.STEP, 1e-3, 0.1) == 1.0


def test_signed_power_is_odd_and_total():
    v = np.array([-8.0, -1.0, 0.0, 1.0, 8.0])
    out = _signed_power(v, 0.5)
    np.testing.assert_allclose(out, [-np.sqrt(8), -1.0, 0.0, 1.0, np.sqrt(8)])
    assert np.all(np.isfinite(_signed_power(np.zeros(4), 0.3)))
    np.testing.assert_array_equal(_signed_power(v, 1.0), v)
    np.testing.assert_allclose(_signed_power(v, 2.0), np.abs(v) * v)


def test_relax_params_validation_and_exponent():
    with pytest.raises(ValueError):
        RelaxParams(eps=-1.0)
    with pytest.raises(ValueError):
        RelaxParams(eps=0.1, m=0.0)
    assert RelaxParams(eps=0.1, m=1.0).alpha == 0.0
    assert RelaxParams(eps=0.1, m=0.5).alpha == 1.0
    assert RelaxParams(eps=0.1, m=2.0).alpha == -0.5


def test_euler_params_validation_and_pressure():
    with pytest.raises(ValueError):
        EulerParams(eps=0.1, eta=1.0)
    p = EulerParams(eps=0.1, eta=2.0, c_p=3.0)
    rho = np.array([1.0, 2.0])
    np.testing.assert_allclose(p.pressure(rho), [3.0, 12.0])
    np.testing.assert_allclose(p.pressure_prime(rho), [6.0, 12.0])


def test_eddington_factor_endpoints_and_domain():
    assert eddington_chi(0.0) == pytest.approx(1.0 / 3.0)
    assert eddington_chi(1.0) == pytest.approx(1.0)
    assert eddington_chi(-1.0) == pytest.approx(1.0)
    assert eddington_chi(0.5) == pytest.approx(4.0 / (5.0 + np.sqrt(13.0)))
    xs = np.linspace(0.0, 1.0, 50)
    assert np.all(np.diff(eddington_chi(xs)) > 0.0)
    with pytest.raises(ValueError, match="closure"):
        eddington_chi(1.1)


# ---------------------------------------------------------------------------
# splitting constructors
# ---------------------------------------------------------------------------

def test_gradient_power_model_rejects_partitioned():
    with pytest.raises(ValueError, match="additive and penalized"):
        kl_split(RelaxParams(eps=1e-2, m=2.0), kind=SplittingKind.PARTITIONED_I)


def test_linear_unpenalized_rejects_a_penalization_rule():
    with pytest.raises(ValueError, match="mu_rule"):
        linear_relaxation_split(
            RelaxParams(eps=1e-2), kind=SplittingKind.ADDITIVE_E, mu_rule=MuRule.EXP
        )


def test_additive_gradient_power_coerces_mu_to_zero(pgrid):
    split = kl_split(
        RelaxParams(eps=1e-2, m=2.0), kind=SplittingKind.ADDITIVE_E, mu_rule=MuRule.EXP
    )
    assert split.mu(pgrid(16)) == 0.0


def test_euler_state_validation(wgrid):
    split = euler_friction_split(EulerParams(eps=1e-3))
    bad = euler_state(wgrid(16))
    bad[3, 0] = -0.1
    with pytest.raises(ValueError, match="positive"):
        split.check_state(bad)
    split.check_state(euler_state(wgrid(16)))


def test_m1_state_validation(wgrid):
    eps = 1e-3
    split = euler_m1_split(EulerParams(eps=eps, c_p=1e-3, kappa=2.0))
    y = m1_state(wgrid(16), eps)
    split.check_state(y)
    y[4, 3] = 2.0 * y[4, 2] / eps
    with pytest.raises(ValueError, match="closure"):
        split.check_state(y)


# ---------------------------------------------------------------------------
# the splitting identity: explicit + implicit is the same full right-hand
# side for every splitting kind and every penalization weight
# ---------------------------------------------------------------------------

def total_rhs(split, y, grid, mu):
    return split.explicit_rhs(y, grid, mu) + split.implicit_apply(y, grid, mu)


@pytest.mark.parametrize("kind", [
    SplittingKind.PARTITIONED_I,
    SplittingKind.ADDITIVE_E,
    SplittingKind.PENALIZED_BPR,
    SplittingKind.PENALIZED_BR,
])
def test_linear_splittings_share_one_total(kind, pgrid):
    params = RelaxParams(eps=0.1, b=lambda u: 2.0 * u, q=np.tanh)
    grid = pgrid(48)
    y = smooth_pair(grid)
    baseline = total_rhs(
        linear_relaxation_split(params, kind=SplittingKind.ADDITIVE_E), y, grid, 0.0
    )
    penal = kind in (SplittingKind.PENALIZED_BPR, SplittingKind.PENALIZED_BR)
    split = linear_relaxation_split(
        params, kind=kind, mu_rule=MuRule.EXP if penal else MuRule.ZERO
    )
    for mu in (0.0, 0.7) if penal else (0.0,):
        got = total_rhs(split, y, grid, mu)
        np.testing.assert_allclose(got, baseline, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("kind", [
    SplittingKind.ADDITIVE_E,
    SplittingKind.PENALIZED_BPR,
    SplittingKind.PENALIZED_BR,
])
def test_gradient_power_splittings_share_one_total(kind, pgrid):
    params = RelaxParams(eps=0.1, m=2.0)
    grid = pgrid(48)
    y = smooth_pair(grid)
    baseline = total_rhs(
        kl_split(params, kind=SplittingKind.ADDITIVE_E), y, grid, 0.0
    )
    split = kl_split(params, kind=kind, mu_rule=MuRule.EXP)
    for mu in (0.0, 0.5, 1.0):
        got = total_rhs(split, y, grid, mu)
        np.testing.assert_allclose(got, baseline, rtol=1e-12, atol=1e-12)
        if kind is SplittingKind.ADDITIVE_E:
            break  # no penalization weight to vary


def test_euler_penalization_cancels_exactly(wgrid):
    split = euler_friction_split(EulerParams(eps=1e-3))
    grid = wgrid(32)
    y = euler_state(grid)
    base = total_rhs(split, y, grid, 0.0)
    np.testing.assert_allclose(total_rhs(split, y, grid, 1.0), base,
                               rtol=1e-12, atol=1e-9)


def test_m1_penalization_cancels_exactly(wgrid):
    eps = 1e-3
    split = euler_m1_split(EulerParams(eps=eps, c_p=1e-3, kappa=2.0, sigma=1.0))
    grid = wgrid(32, 0.0, 1.0)
    y = m1_state(grid, eps)
    base = total_rhs(split, y, grid, 0.0)
    np.testing.assert_allclose(total_rhs(split, y, grid, 1.0), base,
                               rtol=1e-12, atol=1e-6)


def test_mass_is_conserved_by_both_halves(pgrid):
    grid = pgrid(48)
    y = smooth_pair(grid)
    for kind in (SplittingKind.ADDITIVE_E, SplittingKind.PENALIZED_BPR):
        split = kl_split(RelaxParams(eps=0.1, m=2.0), kind=kind, mu_rule=MuRule.EXP)
        mu = split.mu(grid)
        for part in (split.explicit_rhs, split.implicit_apply):
            assert abs(np.sum(part(y, grid, mu)[:, 0]) * grid.dx) <= 1e-12


# ---------------------------------------------------------------------------
# stage solves
# ---------------------------------------------------------------------------

def test_linear_additive_stage_solve_closed_form(pgrid, rng):
    params = RelaxParams(eps=0.05, q=np.tanh)
    split = linear_relaxation_split(params)
    grid = pgrid(32)
    rhs = np.stack([rng.normal(size=32), rng.normal(size=32)], axis=1)
    sigma = 0.3
    out = split.implicit_solve(rhs, sigma, rhs, grid, 0.0)
    eps2 = params.eps**2
    np.testing.assert_array_equal(out[:, 0], rhs[:, 0])
    np.testing.assert_allclose(
        out[:, 1],
        (eps2 * rhs[:, 1] + sigma * np.tanh(rhs[:, 0])) / (eps2 + sigma),
        rtol=1e-14,
    )


def test_stage_solve_satisfies_its_own_equation(pgrid, rng):
    # with m = 1 the diffusion weights are state independent, so the solved
    # stage must satisfy Y = rhs + sigma * implicit(Y) verbatim
    params = RelaxParams(eps=0.1, m=1.0)
    split = kl_split(params, kind=SplittingKind.PENALIZED_BPR, mu_rule=MuRule.EXP)
    grid = pgrid(32)
    rhs = np.stack([rng.normal(size=32), rng.normal(size=32)], axis=1)
    sigma, mu = 0.2, 0.6
    y = split.implicit_solve(rhs, sigma, rhs, grid, mu)
    recon = rhs + sigma * split.implicit_apply(y, grid, mu)
    np.testing.assert_allclose(y, recon, rtol=1e-10, atol=1e-12)


def test_gradient_power_stage_solve_hits_the_cell_roots(pgrid, rng):
    params = RelaxParams(eps=0.05, m=2.0)
    split = kl_split(params, kind=SplittingKind.ADDITIVE_E)
    grid = pgrid(24)
    rhs = np.stack([rng.normal(size=24), 3.0 * rng.normal(size=24)], axis=1)
    sigma = 0.15
    out = split.implicit_solve(rhs, sigma, rhs, grid, 0.0)
    v = out[:, 1]
    eps2 = params.eps**2
    residual = eps2 * v + sigma * np.abs(v) * v - eps2 * rhs[:, 1]
    assert np.max(np.abs(residual)) <= 1e-11


def test_euler_stage_solve_divides_the_friction(wgrid, rng):
    params = EulerParams(eps=1e-3, kappa=2.0)
    split = euler_friction_split(params)
    grid = wgrid(16)
    rhs = euler_state(grid)
    sigma = 0.01
    out = split.implicit_solve(rhs, sigma, rhs, grid, 0.0)
    eps2 = params.eps**2
    np.testing.assert_allclose(
        out[:, 1], eps2 * rhs[:, 1] / (eps2 + params.kappa * sigma), rtol=1e-14
    )


def test_stage_solve_tolerates_inadmissible_frozen_states(wgrid):
    # coefficient-freeze states are predictors and may undershoot; the
    # pressure weights must project instead of failing
    split = euler_friction_split(EulerParams(eps=1e-3))
    grid = wgrid(16)
    rhs = euler_state(grid)
    frozen = rhs.copy()
    frozen[5:8, 0] = -2.0
    out = split.implicit_solve(rhs, 0.01, frozen, grid, 1.0)
    assert np.all(np.isfinite(out))


# ---------------------------------------------------------------------------
# equilibrium closures
# ---------------------------------------------------------------------------

def test_linear_closure_is_the_discrete_gradient(pgrid):
    grid = pgrid(64)
    split = linear_relaxation_split(RelaxParams(eps=0.1))
    y = smooth_pair(grid)
    eq = equilibrium_closure(split, y, grid)
    np.testing.assert_array_equal(eq[:, 0], y[:, 0])
    np.testing.assert_allclose(eq[:, 1], -d_central(y[:, 0], grid), atol=1e-14)


def test_gradient_power_closure_takes_the_m_th_root(pgrid):
    grid = pgrid(64)
    split = kl_split(RelaxParams(eps=0.1, m=2.0), kind=SplittingKind.ADDITIVE_E)
    y = smooth_pair(grid)
    eq = equilibrium_closure(split, y, grid)
    g = -d_central(y[:, 0], grid)
    np.testing.assert_allclose(eq[:, 1], np.sign(g) * np.sqrt(np.abs(g)), atol=1e-14)


def test_euler_closure_balances_the_pressure_gradient(wgrid):
    params = EulerParams(eps=1e-3, kappa=2.0)
    split = euler_friction_split(params)
    grid = wgrid(32)
    y = euler_state(grid)
    eq = equilibrium_closure(split, y, grid)
    np.testing.assert_allclose(
        eq[:, 1], -d_central(params.pressure(y[:, 0]), grid) / params.kappa,
        atol=1e-14,
    )


def test_m1_closure_is_the_diffusion_flux(wgrid):
    eps = 1e-3
    params = EulerParams(eps=eps, c_p=1e-3, kappa=2.0, sigma=1.5)
    split = euler_m1_split(params)
    grid = wgrid(32, 0.0, 1.0)
    y = m1_state(grid, eps)
    eq = equilibrium_closure(split, y, grid)
    f_eq = -d_central(y[:, 2], grid) / (3.0 * params.sigma)
    np.testing.assert_allclose(eq[:, 3], f_eq, atol=1e-14)
    np.testing.assert_allclose(
        eq[:, 1],
        (-d_central(params.pressure(y[:, 0]), grid) + params.sigma * f_eq)
        / params.kappa,
        atol=1e-14,
    )


def test_closure_annihilates_the_stiff_source(pgrid):
    # at the discrete closure the relaxation source vanishes identically,
    # not just to truncation order
    grid = pgrid(48)
    split = kl_split(RelaxParams(eps=1e-2, m=2.0), kind=SplittingKind.ADDITIVE_E)
    y = equilibrium_closure(split, smooth_pair(grid), grid)
    dv = total_rhs(split, y, grid, 0.0)[:, 1]
    assert np.max(np.abs(dv)) <= 1e-9


def test_euler_closure_kills_the_stiff_momentum_flux(wgrid):
    params = EulerParams(eps=1e-3)
    split = euler_friction_split(params)
    grid = wgrid(64)
    y = equilibrium_closure(split, euler_state(grid), grid)
    mu = 0.0
    stiff = split.explicit_rhs(y, grid, mu)[:, 1]
    leftover = total_rhs(split, y, grid, mu)[:, 1]
    # the O(1/eps^2) pressure gradient cancels against the friction; what is
    # left is the O(1) convective flux
    assert np.max(np.abs(leftover)) <= 1e-4 * np.max(np.abs(stiff))


# ---------------------------------------------------------------------------
# limit problems
# ---------------------------------------------------------------------------

def test_limit_problem_rejects_unknown_model():
    with pytest.raises(ValueError, match="unknown"):
        limit_problem("burgers", RelaxParams(eps=0.0))


def test_heat_limit_is_frozen_state_independent(pgrid, rng):
    prob = limit_problem("kl", RelaxParams(eps=0.0, m=1.0))
    grid = pgrid(32)
    u = rng.normal(size=(32, 1))
    a = prob.rhs(rng.normal(size=(32, 1)), u, grid)
    b = prob.rhs(u, u, grid)
    np.testing.assert_allclose(a, b, atol=1e-13)
    np.testing.assert_allclose(a[:, 0], d2_central(u[:, 0], grid), atol=1e-11)


def test_gradient_power_limit_matches_the_regularized_flux(pgrid):
    params = RelaxParams(eps=0.0, m=2.0)
    prob = limit_problem("kl", params)
    grid = pgrid(48)
    u = (0.5 + 0.4 * np.cos(grid.cells()))[:, None]
    got = prob.rhs(u, u, grid)[:, 0]
    want = nonlinear_flux_divergence(u[:, 0], grid, params.alpha, params.reg_tol)
    np.testing.assert_allclose(got, want, atol=1e-13)


def test_euler_limit_is_the_porous_medium_form(wgrid):
    params = EulerParams(eps=0.0, eta=2.0, kappa=2.0)
    prob = limit_problem("euler", params)
    grid = wgrid(48)
    rho = (1.0 + 0.3 * np.sin(grid.cells()))[:, None]
    got = prob.rhs(rho, rho, grid)[:, 0]
    # divided-difference pressure weights telescope to the laplacian of p
    want = d2_central(params.pressure(rho[:, 0]), grid) / params.kappa
    np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-10)


def test_m1_limit_couples_one_way(wgrid, rng):
    params = EulerParams(eps=0.0, c_p=1e-3, kappa=2.0, sigma=1.5)
    prob = limit_problem("m1", params)
    grid = wgrid(32, 0.0, 1.0)
    state = np.stack(
        [1.0 + 0.2 * np.sin(grid.cells()), 1.5 + 0.3 * np.cos(grid.cells())], axis=1
    )
    got = prob.rhs(state, state, grid)
    np.testing.assert_allclose(
        got[:, 1], d2_central(state[:, 1], grid) / (3.0 * params.sigma), atol=1e-11
    )
    np.testing.assert_allclose(
        got[:, 0],
        d2_central(params.pressure(state[:, 0]), grid) / params.kappa
        + d2_central(state[:, 1], grid) / (3.0 * params.kappa),
        rtol=1e-10, atol=1e-10,
    )


@pytest.mark.parametrize("model,params", [
    ("kl", RelaxParams(eps=0.0, m=2.0)),
    ("linear", RelaxParams(eps=0.0)),
    ("euler", EulerParams(eps=0.0)),
])
def test_limit_stage_solve_inverts_the_rhs(model, params, pgrid):
    prob = limit_problem(model, params)
    grid = pgrid(32)
    base = 1.0 + 0.3 * np.cos(grid.cells())
    state = np.tile(base[:, None], (1, prob.components))
    sigma = 0.05
    z = prob.solve_stage(state, state, sigma, grid)
    recon = state + sigma * prob.rhs(state, z, grid)
    np.testing.assert_allclose(z, recon, rtol=1e-10, atol=1e-11)


def test_constant_states_are_limit_steady_states(pgrid):
    grid = pgrid(16)
    for model, params in (
        ("kl", RelaxParams(eps=0.0, m=2.0)),
        ("euler", EulerParams(eps=0.0)),
    ):
        prob = limit_problem(model, params)
        state = np.full((16, prob.components), 1.3)
        np.testing.assert_allclose(prob.rhs(state, state, grid), 0.0, atol=1e-13)
