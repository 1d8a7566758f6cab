"""Independent brute-force solvers that certify the series kernel.

Three routes to the same radial profile, none of which shares code with the
series evaluation:

* picard_solve: successive approximation of the integral form
  u(r) = alpha + int_0^r t^(1-N) int_0^t s^(N+1) u(s)/sigma^4 ds dt,
  discretized with composite trapezoid sums.  The iterates increase
  pointwise and their sup-differences obey the factorial envelope
  (alpha/(k+1)!) (R^4/(4 sigma^4 (N+2)))^(k+1), which doubles as a
  convergence certificate.

* ode_solve: direct high-order integration of the second-order radial ODE,
  usable wherever u itself stays inside double range.

* verify_exact_4d: two closed-form four-dimensional solutions
  exp(+-r^2/(2 sigma^2)) / r^2 whose ODE residual is algebraically zero,
  evaluated with analytic derivatives so the fixture carries no
  discretization error at all.

check_bounds sweeps the growth/slope/rate inequalities the kernel must
satisfy and reports a signed relative margin per grid point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .fileio import write_csv
from .params import ModelParams
from .rate import envelope
from .series import SeriesKernel, _log_u_prime, eval_log_u

MARGIN_FLOOR = -1e-12

_QUAD_SELF_CONSISTENCY = 1e-10
_MAX_REFINE_DOUBLINGS = 14
_OVERFLOW_LOG_LIMIT = 645.0  # ln of the largest double, with headroom


@dataclass(frozen=True, eq=False)
class RadialGridFn:
    """A radial profile tabulated on a strictly increasing grid from 0."""

    r: np.ndarray
    values: np.ndarray
    meta: str  # origin tag: picard | ode | exact4d
    sup_diffs: tuple[float, ...] | None = None  # picard successive sup-differences

    def __post_init__(self) -> None:
        r = np.asarray(self.r, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if r.ndim != 1 or r.shape != v.shape:
            raise ValueError("grid and values must be matching 1-D arrays")
        if r[0] != 0.0 or np.any(np.diff(r) <= 0.0):
            raise ValueError("grid must be strictly increasing and start at 0")
        if not np.all(np.isfinite(v)):
            raise ValueError("profile values must be finite")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "values", v)


def _cumtrapz(f: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.empty_like(f)
    out[0] = 0.0
    np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(t), out=out[1:])
    return out


def _refine(grid: np.ndarray, per_interval: int) -> np.ndarray:
    """Subdivide every grid interval into per_interval equal pieces.

    The original nodes sit at indices i * per_interval of the result, so
    restriction back to the caller's grid is exact.
    """
    steps = np.arange(per_interval) / per_interval
    fine = grid[:-1, None] + np.diff(grid)[:, None] * steps[None, :]
    return np.append(fine.ravel(), grid[-1])


def _monomial_weights(t: np.ndarray, power: int):
    """Per-interval trapezoid weights with the monomial factor s**power
    integrated exactly.

    Approximating the iterate piecewise-linearly (the trapezoid-class
    assumption) but integrating s**power * (linear) in closed form keeps
    the quadrature error constant independent of power; plain trapezoid on
    the product would need O(power^2) finer grids.  Returns (w_lo, w_hi)
    with int_{s0}^{s1} s^power v(s) ds ~= w_lo v(s0) + w_hi v(s1); both
    weights are nonnegative, which preserves the pointwise monotonicity of
    the iterates.
    """
    s0, s1 = t[:-1], t[1:]
    h = s1 - s0
    p2, p3 = power + 1, power + 2  # exponents of the antiderivatives

    def segment_integral(p: int) -> np.ndarray:
        # int s^(p-1) over [s0, s1] = (s1^p - s0^p)/p, with an expm1 form
        # where the direct difference would cancel (h << s0).
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            direct = s1**p - s0**p
            near = h < 0.5 * s0
            safe_s0 = np.where(s0 > 0.0, s0, 1.0)
            grown = s0**p * np.expm1(p * np.log1p(h / safe_s0))
            return np.where(near, grown, direct) / p

    i0 = segment_integral(p2)
    i1 = segment_integral(p3)
    w_hi = (i1 - s0 * i0) / h
    w_lo = i0 - w_hi
    return np.maximum(w_lo, 0.0), np.maximum(w_hi, 0.0)


def _picard_once(params: ModelParams, t: np.ndarray, k_max: int, tol: float):
    """Run the iteration on a fixed grid; returns (final iterate, sup-diffs)."""
    n = params.n_goods
    inv_sigma4 = 1.0 / params.sigma**4
    w_lo, w_hi = _monomial_weights(t, n + 1)
    positive = t > 0.0
    log_t = np.zeros_like(t)
    log_t[positive] = np.log(t[positive])

    u = np.full(t.shape, params.alpha)
    inner = np.empty_like(t)
    diffs: list[float] = []
    for _ in range(k_max):
        inner[0] = 0.0
        np.cumsum(w_lo * u[:-1] + w_hi * u[1:], out=inner[1:])
        g = np.zeros_like(t)
        mask = positive & (inner > 0.0)
        if n == 1:
            g[mask] = inner[mask] * inv_sigma4
        else:
            with np.errstate(divide="ignore"):
                g[mask] = inv_sigma4 * np.exp(
                    np.log(inner[mask]) - (n - 1) * log_t[mask]
                )
        u_next = params.alpha + _cumtrapz(g, t)
        sup = float(np.max(u_next - u))
        diffs.append(sup)
        u = u_next
        if sup < tol:
            return u, diffs
    raise RuntimeError(
        f"Picard not converged after {k_max} iterations "
        f"(achieved sup-difference {diffs[-1]:.3e}, tol {tol:.3e})"
    )


def picard_solve(
    params: ModelParams,
    grid,
    k_max: int = 200,
    tol: float = 1e-10,
    quad_tol: float = _QUAD_SELF_CONSISTENCY,
) -> RadialGridFn:
    """Limit of the integral-form iterates on the caller's grid.

    Iteration stops when the sup-difference of successive iterates falls
    below tol (or raises "Picard not converged" at k_max).  Quadrature is
    composite trapezoid on power-of-two refinements of the grid, doubled
    until the restricted solution is self-consistent to quad_tol relative.
    The returned sup_diffs are the successive differences measured on the
    final refinement.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be 1-D, strictly increasing, starting at 0")
    if grid[-1] > params.radius:
        raise ValueError(f"grid must stay within [0, radius={params.radius}]")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")

    prev = None
    for level in range(2, _MAX_REFINE_DOUBLINGS + 1):
        per = 1 << level
        fine = _refine(grid, per)
        u_fine, diffs = _picard_once(params, fine, k_max, tol)
        restricted = u_fine[::per]
        if prev is not None:
            rel = float(np.max(np.abs(restricted - prev) / np.abs(restricted)))
            if rel < quad_tol:
                return RadialGridFn(grid, restricted, "picard", tuple(diffs))
        prev = restricted
    raise RuntimeError(
        "Picard quadrature refinement did not reach self-consistency "
        f"{quad_tol:.1e} within {_MAX_REFINE_DOUBLINGS} doublings"
    )


def picard_step_bound(params: ModelParams, r: float, k: int) -> float:
    """Analytic envelope for the k-th successive difference at radius r."""
    q = r**4 / (4.0 * params.sigma**4 * (params.n_goods + 2))
    return params.alpha / math.factorial(k + 1) * q ** (k + 1)


def ode_solve(
    params: ModelParams,
    r_max: float,
    step_tol: float = 1e-12,
    grid=None,
) -> RadialGridFn:
    """Direct integration of u'' + (N-1)/r u' = r^2 u / sigma^4.

    Starts from a two-term series expansion at a tiny positive radius (the
    origin is a removable coordinate singularity) and integrates with an
    adaptive 8th-order Runge-Kutta method at local tolerance step_tol.

    Raises:
        RuntimeError: "direct integration range exceeded" when the growth
            bound says u(r_max) would overflow double precision (use the
            logarithmic-derivative route instead).
    """
    r_max = float(r_max)
    n = params.n_goods
    sigma4 = params.sigma**4
    x_max = r_max**4 / (4.0 * sigma4)
    if x_max / (n + 2) > _OVERFLOW_LOG_LIMIT:
        raise RuntimeError(
            "direct integration range exceeded (u would overflow; "
            "use the logarithmic-derivative path)"
        )
    if grid is None:
        grid = np.linspace(0.0, r_max, 200)
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid[0] != 0.0 or np.any(np.diff(grid) <= 0) or grid[-1] > r_max:
        raise ValueError("grid must be strictly increasing from 0 within [0, r_max]")

    positive = grid[grid > 0.0]
    r_eps = min(1e-6 * max(1.0, r_max), 0.5 * positive[0]) if positive.size else 1e-6

    def two_term(r: np.ndarray):
        x = r**4 / (4.0 * sigma4)
        u = params.alpha * (1.0 + x / (n + 2))
        up = params.alpha * r**3 / (sigma4 * (n + 2))
        return u, up

    def rhs(r, y):
        u, up = y
        return [up, r * r * u / sigma4 - (n - 1) * up / r]

    u0, up0 = two_term(np.asarray(r_eps))
    t_eval = grid[grid >= r_eps]
    sol = solve_ivp(
        rhs,
        (r_eps, r_max),
        [float(u0), float(up0)],
        method="DOP853",
        rtol=step_tol,
        atol=1e-30,
        t_eval=t_eval if t_eval.size else None,
        dense_output=False,
    )
    if not sol.success:
        raise RuntimeError(f"radial ODE integration failed: {sol.message}")

    values = np.empty(grid.shape)
    head = grid < r_eps
    values[head], _ = two_term(grid[head])
    values[~head] = sol.y[0]
    return RadialGridFn(grid, values, "ode")


def verify_exact_4d(sigma: float, which: str, grid) -> float:
    """Max normalized radial-ODE residual of a closed-form 4-D solution.

    which selects exp(+r^2/(2 sigma^2))/r^2 ("growing") or
    exp(-r^2/(2 sigma^2))/r^2 ("decaying"); both blow up at the origin, so
    the grid must be strictly positive.  Derivatives are analytic, hence
    the residual measures pure floating-point cancellation and must come
    out at rounding level (<= 1e-9 normalized by max(1, |u|)).
    """
    if which == "growing":
        sign = 1.0
    elif which == "decaying":
        sign = -1.0
    else:
        raise ValueError(f"which must be 'growing' or 'decaying', got {which!r}")
    r = np.asarray(grid, dtype=float)
    if np.any(r <= 0.0):
        raise ValueError("grid must exclude the origin (solutions blow up there)")
    sigma = float(sigma)
    sigma2 = sigma * sigma

    s = sign * r**2 / (2.0 * sigma2)
    ds = sign * r / sigma2
    dds = sign / sigma2
    es = np.exp(s)
    u = es / r**2
    up = es * (ds / r**2 - 2.0 / r**3)
    upp = es * (ds * ds / r**2 + dds / r**2 - 4.0 * ds / r**3 + 6.0 / r**4)
    residual = upp + 3.0 / r * up - r**2 / (sigma2 * sigma2) * u
    return float(np.max(np.abs(residual) / np.maximum(1.0, np.abs(u))))


@dataclass(frozen=True, eq=False)
class BoundReport:
    """Signed relative margins (bound - value)/bound per grid point."""

    rows: tuple  # (r, bound_name, margin) triples, grid-major
    min_margin: float
    worst_bound: str
    worst_r: float

    @property
    def ok(self) -> bool:
        return self.min_margin >= MARGIN_FLOOR

    def write_csv(self, path) -> None:
        write_csv(path, ["r", "bound_name", "margin"], self.rows)

    def summary(self) -> str:
        state = "all bounds hold" if self.ok else "BOUND VIOLATION"
        return (
            f"{state}: min margin {self.min_margin:.3e} "
            f"({self.worst_bound} at r={self.worst_r:.6g}, floor {MARGIN_FLOOR:.0e})"
        )


class BoundViolation(RuntimeError):
    """Raised by check_bounds when a margin crosses the floor."""

    def __init__(self, message: str, report: BoundReport):
        super().__init__(message)
        self.report = report


def check_bounds(kernel: SeriesKernel, grid) -> BoundReport:
    """Margins of the kernel growth, slope, and rate inequalities.

    Per grid point: u against alpha e^(x/(N+2)); u' against
    alpha r^3/(sigma^4 (N+2)) e^(x/(N+2)); the rate sigma^2 u'/(r u)
    against 1; and the rate against its algebraic envelope.  Margins are
    1 - value/bound, computed in log space so huge kernels cannot
    overflow, and must stay above -1e-12.

    Raises:
        BoundViolation: naming the failing bound and grid point (the full
            report rides on the exception).
    """
    r = np.asarray(grid, dtype=float)
    if r.ndim != 1 or np.any(np.diff(r) <= 0) or np.any(r < 0):
        raise ValueError("grid must be 1-D, strictly increasing, nonnegative")
    params = kernel.params
    n = params.n_goods
    sigma2 = params.sigma**2
    log_alpha = math.log(params.alpha)

    rows = []
    pos = r > 0.0
    rp = r[pos]
    x = rp**4 / (4.0 * sigma2 * sigma2)
    log_u = np.atleast_1d(eval_log_u(kernel, rp))
    log_up = _log_u_prime(kernel, rp)
    log_u_bound = log_alpha + x / (n + 2)
    log_up_bound = (
        log_alpha + 3.0 * np.log(rp) - math.log(sigma2 * sigma2 * (n + 2)) + x / (n + 2)
    )
    rho = sigma2 * np.exp(log_up - log_u - np.log(rp))
    env = np.atleast_1d(envelope(params, rp))

    margins = {
        "kernel_growth": -np.expm1(log_u - log_u_bound),
        "kernel_slope_growth": -np.expm1(log_up - log_up_bound),
        "rate_sigma_bound": 1.0 - rho,
        "rate_envelope": 1.0 - rho / env,
    }
    # Origin: u = alpha meets its bound with equality, u' and the rate are
    # exactly 0 against bounds 0, 1, 0.
    origin = {
        "kernel_growth": 0.0,
        "kernel_slope_growth": 0.0,
        "rate_sigma_bound": 1.0,
        "rate_envelope": 0.0,
    }

    names = ("kernel_growth", "kernel_slope_growth", "rate_sigma_bound", "rate_envelope")
    pos_index = 0
    for i, radius in enumerate(r):
        if radius == 0.0:
            for name in names:
                rows.append((float(radius), name, origin[name]))
        else:
            for name in names:
                rows.append((float(radius), name, float(margins[name][pos_index])))
            pos_index += 1

    worst = min(rows, key=lambda row: row[2])
    report = BoundReport(
        rows=tuple(rows),
        min_margin=worst[2],
        worst_bound=worst[1],
        worst_r=worst[0],
    )
    if not report.ok:
        raise BoundViolation(
            f"bound violation: {worst[1]} at r={worst[0]:.6g} "
            f"(margin {worst[2]:.3e})",
            report,
        )
    return report


def max_rel_diff(a, b) -> float:
    """max |a-b| / max(|a|, |b|, 1) over matching grids."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    den = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1.0)
    return float(np.max(np.abs(a - b) / den))
