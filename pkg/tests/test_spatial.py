import numpy as np
import pytest

from relaxflow.spatial import (
    Boundary,
    Field,
    FrozenDiffusionSystem,
    Grid1D,
    assemble_frozen_diffusion_system,
    d2_central,
    d_central,
    d_upwind,
    flux_divergence,
    half_point_weights,
    interface_deltas,
    nonlinear_flux_divergence,
    restrict,
    solve_cyclic_tridiagonal,
    solve_tridiagonal,
    weighted_divergence,
)


# ---------------------------------------------------------------------------
# grids and fields
# ---------------------------------------------------------------------------

def test_periodic_cells_start_at_the_left_edge(pgrid):
    g = pgrid(8)
    x = g.cells()
    assert x[0] == g.x_min
    np.testing.assert_allclose(np.diff(x), g.dx)
    # the right edge is the wrap image of the first node, not a cell
    assert x[-1] == pytest.approx(g.x_max - g.dx)


def test_wall_cells_are_midpoints(wgrid):
    g = wgrid(6, 0.0, 3.0)
    x = g.cells()
    assert x[0] == pytest.approx(0.25)
    assert x[-1] == pytest.approx(2.75)


def test_grid_validation():
    with pytest.raises(ValueError, match="n >= 3"):
        Grid1D(n=2, x_min=0.0, x_max=1.0)
    with pytest.raises(ValueError, match="x_max"):
        Grid1D(n=8, x_min=1.0, x_max=1.0)


def test_field_promotes_vectors_and_checks_shape(pgrid):
    g = pgrid(8)
    f = Field(g, np.zeros(8))
    assert f.values.shape == (8, 1)
    assert f.k == 1
    with pytest.raises(ValueError, match="shape"):
        Field(g, np.zeros((7, 2)))


def test_field_check_finite_names_the_cell(pgrid):
    g = pgrid(8)
    v = np.zeros((8, 2))
    v[5, 1] = np.inf
    with pytest.raises(FloatingPointError, match="cell 5, component 1"):
        Field(g, v).check_finite()


# ---------------------------------------------------------------------------
# restriction
# ---------------------------------------------------------------------------

def test_periodic_restriction_subsamples_exactly(pgrid):
    fine, coarse = pgrid(64), pgrid(16)
    u = np.cos(fine.cells())
    np.testing.assert_array_equal(restrict(u, fine, coarse), np.cos(coarse.cells()))


def test_cell_centered_restriction_is_exact_on_linear_data(wgrid):
    fine, coarse = wgrid(32), wgrid(8)
    u = 3.0 * fine.cells() - 1.0
    np.testing.assert_allclose(
        restrict(u, fine, coarse), 3.0 * coarse.cells() - 1.0, atol=1e-14
    )


def test_cell_centered_restriction_odd_ratio_picks_aligned_center(wgrid):
    fine, coarse = wgrid(24), wgrid(8)
    u = fine.cells() ** 2
    np.testing.assert_array_equal(restrict(u, fine, coarse), coarse.cells() ** 2)


def test_restriction_rejects_mismatched_grids(pgrid, wgrid):
    with pytest.raises(ValueError, match="boundary"):
        restrict(np.zeros(16), pgrid(16), wgrid(8))
    with pytest.raises(ValueError, match="multiple"):
        restrict(np.zeros(10), pgrid(10), pgrid(4))


# ---------------------------------------------------------------------------
# difference stencils
# ---------------------------------------------------------------------------

def test_central_derivative_second_order(pgrid):
    errs = []
    for n in (32, 64):
        g = pgrid(n)
        x = g.cells()
        errs.append(np.max(np.abs(d_central(np.sin(x), g) - np.cos(x))))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_second_difference_second_order(pgrid):
    errs = []
    for n in (32, 64):
        g = pgrid(n)
        x = g.cells()
        errs.append(np.max(np.abs(d2_central(np.cos(x), g) + np.cos(x))))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_upwind_derivative_matches_one_sided_stencil(pgrid):
    g = pgrid(16)
    u = np.sin(3.0 * g.cells())
    np.testing.assert_allclose(
        d_upwind(u, g, sign=1.0), (u - np.roll(u, 1)) / g.dx, atol=1e-13
    )
    np.testing.assert_allclose(
        d_upwind(u, g, sign=-1.0), (np.roll(u, -1) - u) / g.dx, atol=1e-13
    )


def test_ghost_copy_makes_wall_slopes_vanish(wgrid):
    g = wgrid(8)
    du = interface_deltas(g.cells() ** 2, g)
    assert du.shape == (9,)
    assert du[0] == 0.0
    assert du[-1] == 0.0


def test_periodic_interface_deltas_wrap(pgrid):
    g = pgrid(8)
    u = np.arange(8.0)
    du = interface_deltas(u, g)
    assert du[0] == pytest.approx((u[0] - u[-1]) / g.dx)
    assert du[0] == du[-1]


def test_unit_weighted_divergence_is_the_second_difference(pgrid):
    g = pgrid(32)
    u = np.sin(2.0 * g.cells())
    np.testing.assert_allclose(
        weighted_divergence(np.ones(g.n + 1), u, g), d2_central(u, g), atol=1e-12
    )


@pytest.mark.parametrize("boundary", ["periodic", "wall"])
def test_weighted_divergence_telescopes(boundary, pgrid, wgrid, rng):
    g = pgrid(32) if boundary == "periodic" else wgrid(32)
    u = rng.normal(size=g.n)
    w = rng.uniform(0.1, 2.0, size=g.n + 1)
    w[-1] = w[0]  # entries 0 and n are the same physical interface on a ring
    total = np.sum(weighted_divergence(w, u, g)) * g.dx
    assert abs(total) <= 1e-12 * np.max(np.abs(u)) / g.dx


def test_weighted_divergence_checks_weight_count(pgrid):
    g = pgrid(8)
    with pytest.raises(ValueError, match="9 interface weights"):
        weighted_divergence(np.ones(8), np.zeros(8), g)


def test_half_point_weights_values(pgrid):
    g = pgrid(16)
    u = 2.0 * g.cells()  # constant slope 2
    w = half_point_weights(u, g, alpha=1.0, tol=0.0)
    # periodic wrap sees the jump back across the seam, interior slopes are 2
    np.testing.assert_allclose(w[1:-1], 2.0, atol=1e-12)


def test_half_point_weights_guard_rails(pgrid):
    g = pgrid(8)
    with pytest.raises(ValueError, match="alpha"):
        half_point_weights(np.zeros(8), g, alpha=-1.5)
    with pytest.raises(ValueError, match="regularization"):
        half_point_weights(np.zeros(8), g, alpha=-0.5, tol=0.0)


def test_zero_exponent_reduces_to_plain_diffusion(pgrid, rng):
    g = pgrid(32)
    u = rng.normal(size=g.n)
    np.testing.assert_allclose(
        nonlinear_flux_divergence(u, g, alpha=0.0), d2_central(u, g), atol=1e-12
    )


def test_flux_divergence_interior_is_central(wgrid):
    g = wgrid(16)
    q = np.sin(g.cells())
    div = flux_divergence(q, g, wall="zero")
    inner = (q[2:] - q[:-2]) / (2.0 * g.dx)
    np.testing.assert_allclose(div[1:-1], inner, atol=1e-13)


def test_flux_divergence_insulated_wall_conserves(wgrid, rng):
    g = wgrid(16)
    q = rng.normal(size=g.n)
    assert abs(np.sum(flux_divergence(q, g, wall="zero")) * g.dx) <= 1e-13


def test_flux_divergence_periodic_conserves(pgrid, rng):
    g = pgrid(16)
    q = rng.normal(size=g.n)
    assert abs(np.sum(flux_divergence(q, g)) * g.dx) <= 1e-13


def test_flux_divergence_copy_wall_leaks_the_boundary_flux(wgrid):
    g = wgrid(8)
    q = np.ones(g.n)
    div = flux_divergence(q, g, wall="copy")
    np.testing.assert_allclose(div, 0.0, atol=1e-14)  # constant flux, no interior jump
    with pytest.raises(ValueError, match="wall"):
        flux_divergence(q, g, wall="reflect")


# ---------------------------------------------------------------------------
# tridiagonal solves
# ---------------------------------------------------------------------------

def dense_tridiagonal(lower, diag, upper, tr=0.0, bl=0.0):
    n = diag.size
    mat = np.diag(diag)
    mat += np.diag(upper[:-1], k=1)
    mat += np.diag(lower[1:], k=-1)
    mat[0, -1] += tr
    mat[-1, 0] += bl
    return mat


def test_tridiagonal_solve_matches_dense(rng):
    n = 40
    lower = rng.normal(size=n)
    upper = rng.normal(size=n)
    diag = 4.0 + rng.uniform(size=n)
    rhs = rng.normal(size=n)
    x = solve_tridiagonal(lower, diag, upper, rhs)
    ref = np.linalg.solve(dense_tridiagonal(lower, diag, upper), rhs)
    np.testing.assert_allclose(x, ref, atol=1e-12)


def test_cyclic_solve_matches_dense(rng):
    n = 37
    lower = rng.normal(size=n)
    upper = rng.normal(size=n)
    diag = 5.0 + rng.uniform(size=n)
    rhs = rng.normal(size=n)
    tr, bl = -0.7, 0.4
    x = solve_cyclic_tridiagonal(lower, diag, upper, rhs, tr, bl)
    ref = np.linalg.solve(dense_tridiagonal(lower, diag, upper, tr, bl), rhs)
    np.testing.assert_allclose(x, ref, atol=1e-11)


def test_cyclic_solve_needs_three_rows():
    one = np.ones(2)
    with pytest.raises(ValueError, match="n >= 3"):
        solve_cyclic_tridiagonal(one, 3 * one, one, one, 1.0, 1.0)


# ---------------------------------------------------------------------------
# frozen diffusion solves
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("boundary", ["periodic", "wall"])
def test_solve_inverts_apply(boundary, pgrid, wgrid, rng):
    g = pgrid(32) if boundary == "periodic" else wgrid(32)
    w = rng.uniform(0.0, 3.0, size=g.n + 1)
    sys = FrozenDiffusionSystem(w, sigma=0.37, grid=g)
    u = rng.normal(size=g.n)
    np.testing.assert_allclose(sys.solve(sys.apply(u)), u, atol=1e-11)
    np.testing.assert_allclose(sys.apply(sys.solve(u)), u, atol=1e-11)


def test_zero_sigma_solve_is_a_copy(pgrid, rng):
    g = pgrid(8)
    sys = FrozenDiffusionSystem(np.ones(g.n + 1), sigma=0.0, grid=g)
    rhs = rng.normal(size=g.n)
    out = sys.solve(rhs)
    np.testing.assert_array_equal(out, rhs)
    assert out is not rhs


def test_frozen_system_guard_rails(pgrid):
    g = pgrid(8)
    with pytest.raises(ValueError, match="nonnegative"):
        FrozenDiffusionSystem(-np.ones(g.n + 1), sigma=1.0, grid=g)
    with pytest.raises(ValueError, match="sigma"):
        FrozenDiffusionSystem(np.ones(g.n + 1), sigma=-1.0, grid=g)
    with pytest.raises(ValueError, match="interface weights"):
        FrozenDiffusionSystem(np.ones(g.n), sigma=1.0, grid=g)


def test_unit_weight_solve_damps_each_mode_by_its_symbol(pgrid):
    # (I - sigma*D) cos(kx) = (1 + sigma*k_h^2) cos(kx) with the discrete
    # symbol k_h^2 = (2 - 2 cos(k dx))/dx^2, so the solve divides by it
    g = pgrid(64)
    sigma = 0.21
    sys = FrozenDiffusionSystem(np.ones(g.n + 1), sigma=sigma, grid=g)
    for k in (1, 3, 7):
        rhs = np.cos(k * g.cells())
        kh2 = (2.0 - 2.0 * np.cos(k * g.dx)) / g.dx**2
        np.testing.assert_allclose(
            sys.solve(rhs), rhs / (1.0 + sigma * kh2), atol=1e-12
        )


def test_assemble_freezes_gradient_power_weights(pgrid, rng):
    g = pgrid(32)
    u_star = rng.normal(size=g.n)
    sys = assemble_frozen_diffusion_system(u_star, g, alpha=-0.5, tol=1e-12, sigma=0.5)
    np.testing.assert_array_equal(
        sys.weights, half_point_weights(u_star, g, -0.5, 1e-12)
    )
    u = rng.normal(size=g.n)
    np.testing.assert_allclose(sys.solve(sys.apply(u)), u, atol=1e-11)


def test_wall_solve_conserves_mass(wgrid, rng):
    g = wgrid(24)
    w = rng.uniform(0.5, 1.5, size=g.n + 1)
    sys = FrozenDiffusionSystem(w, sigma=0.8, grid=g)
    rhs = rng.normal(size=g.n)
    u = sys.solve(rhs)
    # u - sigma*div = rhs and the insulated divergence telescopes to zero
    assert np.sum(u) * g.dx == pytest.approx(np.sum(rhs) * g.dx, abs=1e-12)
