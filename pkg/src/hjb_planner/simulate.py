"""First-exit Monte Carlo for the optimally controlled inventory.

The controlled inventory follows dy_i = p_i dt + sigma dW_i with the
radial feedback p = rho(|y|) y, run until |y| first reaches the stopping
radius R.  Discretization is plain Euler-Maruyama,

    y <- y + rho(|y|) y dt + sigma sqrt(dt) Z,

with exit tested at grid times only and the running cost
(|p|^2 + |y|^2) dt accumulated at left endpoints, which is the
Ito-consistent choice.  Noise comes from the counter-based generator, so a
path is a pure function of (seed, path_index) no matter how paths are
batched or scheduled; means are reduced in path-index order so Monte Carlo
results are reproducible bit for bit.
"""

from __future__ import annotations

import math
import operator
from dataclasses import dataclass

import numpy as np

from .fileio import write_csv
from .rate import RateSeries, rate_coeff
from .rng import normals

_CHUNK = 65536


@dataclass(frozen=True)
class SimConfig:
    """Time step, horizon, path count, seed, and common start state.

    dt * max_steps bounds the simulated horizon.  Paths whose start already
    satisfies |y0| >= R exit immediately with tau = 0 and zero cost.
    """

    dt: float
    max_steps: int
    n_paths: int
    seed: int
    y0: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "max_steps", operator.index(self.max_steps))
        object.__setattr__(self, "n_paths", operator.index(self.n_paths))
        object.__setattr__(self, "seed", operator.index(self.seed))
        object.__setattr__(self, "y0", np.array(self.y0, dtype=float, copy=True))
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be a positive finite real, got {self.dt}")
        if not 1 <= self.max_steps < 2**32:
            raise ValueError("max_steps must be in [1, 2^32)")
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if self.y0.ndim != 1 or self.y0.size < 1 or not np.all(np.isfinite(self.y0)):
            raise ValueError("y0 must be a finite non-empty vector")


@dataclass(frozen=True, eq=False)
class PathResult:
    """One simulated path: exit time, accumulated cost, final state.

    tau is dt times the number of completed steps; exited is False when the
    horizon ran out first (that is not an error, just truncation).
    path_trace, when recorded, is an array with rows (t, y_1..y_N, cost).
    """

    tau: float
    cost: float
    exited: bool
    y_final: np.ndarray
    path_trace: np.ndarray | None = None


def _run_paths(
    rate: RateSeries,
    cfg: SimConfig,
    path_indices: np.ndarray,
    trace_paths: frozenset = frozenset(),
    trace_stride: int = 1,
):
    """Vectorized Euler-Maruyama over a batch of paths.

    Returns (tau, cost, exited, y_final, traces) with arrays aligned to
    path_indices; traces maps path index -> list of (t, y..., cost) rows.
    Per-path arithmetic is elementwise, so results do not depend on how the
    batch is chunked.
    """
    params = rate.params
    n = params.n_goods
    if cfg.y0.shape[0] != n:
        raise ValueError(
            f"y0 has {cfg.y0.shape[0]} components but the rate was built for {n} goods"
        )
    radius = params.radius
    dt = cfg.dt
    noise_scale = params.sigma * math.sqrt(dt)

    paths = np.asarray(path_indices, dtype=np.uint64)
    m = paths.size
    tau = np.full(m, cfg.max_steps * dt)
    cost_total = np.zeros(m)
    exited = np.zeros(m, dtype=bool)
    y_final = np.zeros((m, n))

    y = np.tile(cfg.y0, (m, 1))
    cost = np.zeros(m)
    pos = np.arange(m)  # result slots of still-running paths
    if trace_paths:
        is_traced = np.array([int(p) in trace_paths for p in paths], dtype=bool)
        traces: dict[int, list] = {int(p): [] for p in paths if int(p) in trace_paths}
    else:
        is_traced = np.zeros(m, dtype=bool)
        traces = {}

    def record(slot_mask, step):
        for row, slot in zip(np.flatnonzero(slot_mask), pos[slot_mask]):
            traces[int(paths[slot])].append(
                (step * dt, *y[row].tolist(), float(cost[row]))
            )

    for step in range(cfg.max_steps):
        r = np.sqrt(np.einsum("ij,ij->i", y, y))
        hit = r >= radius
        traced_alive = is_traced[pos]
        if np.any(traced_alive):
            sample_now = traced_alive & (hit | (step % trace_stride == 0))
            if np.any(sample_now):
                record(sample_now, step)
        if np.any(hit):
            slots = pos[hit]
            exited[slots] = True
            tau[slots] = step * dt
            cost_total[slots] = cost[hit]
            y_final[slots] = y[hit]
            keep = ~hit
            pos, y, cost, r = pos[keep], y[keep], cost[keep], r[keep]
            if pos.size == 0:
                break
        rho = rate_coeff(rate, r)
        cost += (rho * rho + 1.0) * r * r * dt
        z = normals(cfg.seed, paths[pos], step, n)
        y += rho[:, None] * y * dt + noise_scale * z
        if not np.all(np.isfinite(y)):
            raise RuntimeError("simulation diverged (non-finite inventory state)")
    else:
        if pos.size:
            cost_total[pos] = cost
            y_final[pos] = y
            if np.any(is_traced[pos]):
                record(is_traced[pos], cfg.max_steps)

    return tau, cost_total, exited, y_final, traces


def euler_path(
    rate: RateSeries,
    cfg: SimConfig,
    path_index: int,
    record_trace: bool = False,
    trace_stride: int = 1,
) -> PathResult:
    """Simulate one path; fully determined by (cfg.seed, path_index)."""
    if path_index < 0 or path_index >= 2**64:
        raise ValueError("path_index must be a nonnegative 64-bit integer")
    trace_set = frozenset([int(path_index)]) if record_trace else frozenset()
    tau, cost, exited, y_final, traces = _run_paths(
        rate,
        cfg,
        np.asarray([path_index], dtype=np.uint64),
        trace_paths=trace_set,
        trace_stride=max(1, int(trace_stride)),
    )
    trace_arr = None
    if record_trace:
        trace_arr = np.asarray(traces[int(path_index)], dtype=float)
    return PathResult(
        tau=float(tau[0]),
        cost=float(cost[0]),
        exited=bool(exited[0]),
        y_final=y_final[0],
        path_trace=trace_arr,
    )


def collect_costs(rate: RateSeries, cfg: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    """Accumulated cost and exit flag for paths 0..n_paths-1, in index order."""
    costs = np.empty(cfg.n_paths)
    exited = np.empty(cfg.n_paths, dtype=bool)
    for start in range(0, cfg.n_paths, _CHUNK):
        stop = min(start + _CHUNK, cfg.n_paths)
        idx = np.arange(start, stop, dtype=np.uint64)
        _, chunk_cost, chunk_exited, _, _ = _run_paths(rate, cfg, idx)
        costs[start:stop] = chunk_cost
        exited[start:stop] = chunk_exited
    return costs, exited


def cost_statistics(costs: np.ndarray, exited: np.ndarray) -> tuple[float, float, int]:
    """(mean, stderr, n_exited) over the exited paths; nan when undefined."""
    n_exited = int(np.count_nonzero(exited))
    if n_exited == 0:
        return math.nan, math.nan, 0
    kept = costs[exited]
    mean = float(np.mean(kept))
    stderr = (
        float(np.std(kept, ddof=1) / math.sqrt(n_exited)) if n_exited >= 2 else math.nan
    )
    return mean, stderr, n_exited


def monte_carlo_cost(rate: RateSeries, cfg: SimConfig) -> tuple[float, float, int]:
    """Mean and standard error of the accumulated cost over exited paths.

    Paths are path_index 0..n_paths-1; the reduction runs in index order,
    so the result is a pure function of (cfg, rate).  n_exited lets callers
    detect horizon-truncation bias.

    Raises:
        RuntimeError: "no exits within horizon" when every path truncated.
    """
    if cfg.n_paths < 2:
        raise ValueError("n_paths must be >= 2 for a standard error")
    mean, stderr, n_exited = cost_statistics(*collect_costs(rate, cfg))
    if n_exited == 0:
        raise RuntimeError("no exits within horizon")
    return mean, stderr, n_exited


def write_mc_summary(path, mean: float, stderr: float, n_exited: int, cfg: SimConfig):
    """Monte Carlo summary CSV: mean,stderr,n_exited,n_paths,dt,seed."""
    write_csv(
        path,
        ["mean", "stderr", "n_exited", "n_paths", "dt", "seed"],
        [(mean, stderr, n_exited, cfg.n_paths, cfg.dt, cfg.seed)],
    )


def write_trace(path, trace: np.ndarray, n_goods: int):
    """Path-trace CSV: t,y_1,...,y_N,cost."""
    header = ["t"] + [f"y_{i + 1}" for i in range(n_goods)] + ["cost"]
    write_csv(path, header, [tuple(row) for row in trace])
