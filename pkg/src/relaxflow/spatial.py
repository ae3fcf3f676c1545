"""Uniform 1D grids, ghost-cell handling, difference operators, and the
frozen-coefficient diffusion systems used by the implicit stage solves.

Periodic grids store point values x_j = x_min + j*dx (so a grid with n cells
subsamples exactly onto any refinement by an integer factor); zero-gradient
grids store cell centers x_j = x_min + (j + 1/2)*dx with ghost copies at the
walls, which makes every flux-form update conservative.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import solve_banded

__all__ = [
    "Boundary",
    "Grid1D",
    "Field",
    "restrict",
    "d_central",
    "d_upwind",
    "d_blend",
    "d2_central",
    "interface_deltas",
    "half_point_weights",
    "weighted_divergence",
    "nonlinear_flux_divergence",
    "flux_divergence",
    "solve_tridiagonal",
    "solve_cyclic_tridiagonal",
    "FrozenDiffusionSystem",
    "assemble_frozen_diffusion_system",
]

REG_TOL = 1e-12


class Boundary(Enum):
    PERIODIC = "periodic"
    ZERO_GRADIENT = "zero_gradient"


@dataclass(frozen=True)
class Grid1D:
    n: int
    x_min: float
    x_max: float
    boundary: Boundary = Boundary.PERIODIC

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"grid needs n >= 3 cells, got {self.n}")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n

    def cells(self) -> np.ndarray:
        j = np.arange(self.n)
        if self.boundary is Boundary.PERIODIC:
            return self.x_min + j * self.dx
        return self.x_min + (j + 0.5) * self.dx


@dataclass
class Field:
    """State on a grid: an (n, k) array of k components per cell."""

    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] != self.grid.n:
            raise ValueError(
                f"values must have shape (n, k) with n = {self.grid.n}, got {v.shape}"
            )
        self.values = v

    @property
    def k(self) -> int:
        return self.values.shape[1]

    def component(self, j: int) -> np.ndarray:
        return self.values[:, j]

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())

    def check_finite(self):
        if not np.all(np.isfinite(self.values)):
            bad = np.argwhere(~np.isfinite(self.values))
            raise FloatingPointError(
                f"non-finite value at cell {bad[0][0]}, component {bad[0][1]}"
            )


def restrict(values: np.ndarray, fine: Grid1D, coarse: Grid1D) -> np.ndarray:
    """Restrict per-cell data from a fine grid onto a coarser one.

    Periodic (point-value) grids subsample exactly: every r-th node.  On
    cell-centered grids with an even ratio the coarse center is the midpoint
    of two adjacent fine centers, so their average restricts exactly to
    second order; odd ratios pick the aligned center directly.
    """
    if fine.boundary is not coarse.boundary:
        raise ValueError("grids must share a boundary rule")
    if fine.n % coarse.n:
        raise ValueError(f"fine n = {fine.n} not a multiple of coarse n = {coarse.n}")
    r = fine.n // coarse.n
    v = np.asarray(values)
    if fine.boundary is Boundary.PERIODIC:
        return v[::r].copy()
    j = np.arange(coarse.n)
    if r % 2 == 1:
        return v[r * j + (r - 1) // 2].copy()
    k = r * j + r // 2
    return 0.5 * (v[k - 1] + v[k])


def _pad(f: np.ndarray, grid: Grid1D) -> np.ndarray:
    """One ghost value each side: periodic wrap, or copy for zero gradient."""
    g = np.empty(f.shape[0] + 2, dtype=float)
    g[1:-1] = f
    if grid.boundary is Boundary.PERIODIC:
        g[0] = f[-1]
        g[-1] = f[0]
    else:
        g[0] = f[0]
        g[-1] = f[-1]
    return g


def d_central(f: np.ndarray, grid: Grid1D) -> np.ndarray:
    g = _pad(f, grid)
    return (g[2:] - g[:-2]) / (2.0 * grid.dx)


def d_upwind(f: np.ndarray, grid: Grid1D, sign: float = 1.0) -> np.ndarray:
    """First-order one-sided difference, biased against the transport sign."""
    g = _pad(f, grid)
    if sign >= 0:
        return (g[1:-1] - g[:-2]) / grid.dx
    return (g[2:] - g[1:-1]) / grid.dx


def d_blend(f: np.ndarray, grid: Grid1D, mu: float, sign: float = 1.0) -> np.ndarray:
    """(1 - mu) * upwind + mu * central, for mu in [0, 1]."""
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"blend weight must lie in [0, 1], got {mu}")
    return (1.0 - mu) * d_upwind(f, grid, sign) + mu * d_central(f, grid)


def d2_central(f: np.ndarray, grid: Grid1D) -> np.ndarray:
    g = _pad(f, grid)
    return (g[2:] - 2.0 * g[1:-1] + g[:-2]) / grid.dx**2


def interface_deltas(u: np.ndarray, grid: Grid1D) -> np.ndarray:
    """(u_{j} - u_{j-1})/dx at the n+1 interfaces, ghost-aware.

    Entry i is the slope across interface i - 1/2.  On zero-gradient grids the
    wall entries are exactly zero (ghost copy), which makes every weighted
    divergence built from these slopes conservative.
    """
    g = _pad(u, grid)
    return (g[1:] - g[:-1]) / grid.dx


def half_point_weights(
    u: np.ndarray, grid: Grid1D, alpha: float, tol: float = REG_TOL
) -> np.ndarray:
    """(|du| + tol)^alpha at interfaces, du the interface slope of u."""
    if alpha < -1.0:
        raise ValueError(f"alpha must be >= -1, got {alpha}")
    if alpha < 0.0 and not tol > 0.0:
        raise ValueError("a positive regularization tol is required for alpha < 0")
    return (np.abs(interface_deltas(u, grid)) + tol) ** alpha


def weighted_divergence(w: np.ndarray, u: np.ndarray, grid: Grid1D) -> np.ndarray:
    """(1/dx) * [w_{j+1/2} du_{j+1/2} - w_{j-1/2} du_{j-1/2}] with du = slope.

    ``w`` holds the n+1 interface weights (entry i at interface i - 1/2).
    With w = 1 this is the compact second difference; on periodic grids the
    cell sum telescopes to zero, on zero-gradient grids the wall slopes
    vanish so the sum telescopes as well.
    """
    if w.shape[0] != grid.n + 1:
        raise ValueError(f"expected {grid.n + 1} interface weights, got {w.shape[0]}")
    flux = w * interface_deltas(u, grid)
    return (flux[1:] - flux[:-1]) / grid.dx


def nonlinear_flux_divergence(
    u: np.ndarray, grid: Grid1D, alpha: float, tol: float = REG_TOL
) -> np.ndarray:
    """Divergence of the gradient-power flux (|u_x|^alpha u_x), regularized."""
    return weighted_divergence(half_point_weights(u, grid, alpha, tol), u, grid)


def flux_divergence(point_flux: np.ndarray, grid: Grid1D, wall: str = "zero") -> np.ndarray:
    """Divergence of a point flux via interface averages.

    In the interior this reduces to the central difference over 2*dx.  On
    zero-gradient grids the wall interface flux is forced to zero for
    ``wall="zero"`` (insulated wall, exactly conservative) or copied from the
    adjacent cell for ``wall="copy"`` (for components with wall sources, e.g.
    momentum against a pressure gradient).
    """
    n = grid.n
    fh = np.empty(n + 1, dtype=float)
    fh[1:-1] = 0.5 * (point_flux[:-1] + point_flux[1:])
    if grid.boundary is Boundary.PERIODIC:
        fh[0] = fh[-1] = 0.5 * (point_flux[-1] + point_flux[0])
    elif wall == "zero":
        fh[0] = fh[-1] = 0.0
    elif wall == "copy":
        fh[0] = point_flux[0]
        fh[-1] = point_flux[-1]
    else:
        raise ValueError(f"unknown wall rule {wall!r}")
    return (fh[1:] - fh[:-1]) / grid.dx


# ---------------------------------------------------------------------------
# tridiagonal solves
# ---------------------------------------------------------------------------

def solve_tridiagonal(
    lower: np.ndarray, diag: np.ndarray, upper: np.ndarray, rhs: np.ndarray
) -> np.ndarray:
    """Solve the tridiagonal system; lower[i] = A[i,i-1], upper[i] = A[i,i+1].

    lower[0] and upper[-1] are ignored.  Backed by the banded LAPACK solver.
    """
    n = diag.shape[0]
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1, :] = diag
    ab[2, :-1] = lower[1:]
    return solve_banded((1, 1), ab, rhs, check_finite=False)


def solve_cyclic_tridiagonal(
    lower: np.ndarray,
    diag: np.ndarray,
    upper: np.ndarray,
    rhs: np.ndarray,
    corner_top_right: float,
    corner_bottom_left: float,
) -> np.ndarray:
    """Solve a cyclic tridiagonal system by a rank-one (Sherman-Morrison)
    correction of the plain tridiagonal sweep.

    ``corner_top_right`` is A[0, n-1] and ``corner_bottom_left`` A[n-1, 0].
    """
    n = diag.shape[0]
    if n < 3:
        raise ValueError("cyclic solve needs n >= 3")
    gamma = -diag[0]
    d = diag.copy()
    d[0] -= gamma
    d[-1] -= corner_top_right * corner_bottom_left / gamma
    y = solve_tridiagonal(lower, d, upper, rhs)
    u = np.zeros(n)
    u[0] = gamma
    u[-1] = corner_bottom_left
    z = solve_tridiagonal(lower, d, upper, u)
    vy = y[0] + (corner_top_right / gamma) * y[-1]
    vz = z[0] + (corner_top_right / gamma) * z[-1]
    return y - z * (vy / (1.0 + vz))


class FrozenDiffusionSystem:
    """The linear map u -> u - sigma * div(w * grad u) with frozen weights.

    ``weights`` holds the n+1 interface values; ``sigma`` >= 0 is the full
    prefactor (time step x diagonal coefficient x any model constant).  The
    matrix is strictly diagonally dominant for sigma >= 0 and w >= 0, so the
    sweep cannot encounter a vanishing pivot (asserted at assembly).
    """

    def __init__(self, weights: np.ndarray, sigma: float, grid: Grid1D):
        weights = np.asarray(weights, dtype=float)
        if weights.shape[0] != grid.n + 1:
            raise ValueError(
                f"expected {grid.n + 1} interface weights, got {weights.shape[0]}"
            )
        if sigma < 0.0:
            raise ValueError(f"sigma must be nonnegative, got {sigma}")
        if np.any(weights < 0.0):
            raise ValueError("diffusion weights must be nonnegative")
        self.grid = grid
        self.weights = weights
        self.sigma = float(sigma)

        n = grid.n
        r = sigma / grid.dx**2
        w = weights.copy()
        self._periodic = grid.boundary is Boundary.PERIODIC
        if not self._periodic:
            # ghost copy means zero wall flux; drop the wall couplings
            w[0] = 0.0
            w[-1] = 0.0
        self.lower = -r * w[:-1]
        self.upper = -r * w[1:]
        self.diag = 1.0 + r * (w[:-1] + w[1:])
        if self._periodic:
            # wrap couplings live in the corners, not in the band
            # (solve_tridiagonal ignores lower[0] and upper[-1])
            self._corner_tr = -r * w[0]
            self._corner_bl = -r * w[-1]

    def apply(self, u: np.ndarray) -> np.ndarray:
        """Forward action (I - sigma * D_w) u, same stencil as the solve."""
        return u - self.sigma * weighted_divergence(self.weights, u, self.grid)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.sigma == 0.0:
            return np.array(rhs, dtype=float, copy=True)
        if self._periodic:
            return solve_cyclic_tridiagonal(
                self.lower, self.diag, self.upper, rhs,
                self._corner_tr, self._corner_bl,
            )
        return solve_tridiagonal(self.lower, self.diag, self.upper, rhs)


def assemble_frozen_diffusion_system(
    u_star: np.ndarray, grid: Grid1D, alpha: float, tol: float, sigma: float
) -> FrozenDiffusionSystem:
    """Freeze the gradient-power weights at ``u_star`` and assemble the solve."""
    return FrozenDiffusionSystem(half_point_weights(u_star, grid, alpha, tol), sigma, grid)
