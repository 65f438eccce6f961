"""Discrete memory controls on the triangle {(t, s) : s <= t}.

A control is a family of probability measures nu_t supported on past grid
nodes.  The family is stored as one lower-triangular row-stochastic matrix
(the plan), which is the discrete counterpart of the product measure
nu_t (x) dt on the triangle.  This module provides the plan type, delay
functions (Dirac rows), the reverse disintegration by memory-source time,
and the Wasserstein penalty rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GridMismatchError

ROW_SUM_ATOL = 1e-12


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid 0 = t_0 < ... < t_N = 1 with step 1/N."""

    n_steps: int
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")
        nodes = np.linspace(0.0, 1.0, self.n_steps + 1)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def step(self) -> float:
        return 1.0 / self.n_steps

    def refined(self, factor: int) -> "TimeGrid":
        if factor < 1:
            raise ValueError("refinement factor must be >= 1")
        return TimeGrid(self.n_steps * factor)


def _check_same_grid(a, b, what: str):
    if a.grid.n_steps != b.grid.n_steps:
        raise GridMismatchError(
            f"{what}: grids differ ({a.grid.n_steps} vs {b.grid.n_steps} steps)"
        )


@dataclass(frozen=True, eq=False)
class TriangularPlan:
    """Row-stochastic lower-triangular weight matrix of shape (N, N+1).

    Row i holds the weights of nu_{t_i} on the past nodes s_0..s_i; the row
    acts on the interval [t_i, t_{i+1}).  Column N is structurally zero.
    """

    grid: TimeGrid
    weights: np.ndarray

    def __post_init__(self):
        n = self.grid.n_steps
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (n, n + 1):
            raise ValueError(f"weights must have shape ({n}, {n + 1}), got {w.shape}")
        if np.any(w < 0.0):
            i, j = np.argwhere(w < 0.0)[0]
            raise ValueError(f"negative weight {w[i, j]} at row {i}, column {j}")
        upper = ~np.tri(n, n + 1, dtype=bool)
        if np.any(w[upper] != 0.0):
            raise ValueError("nonzero weight above the diagonal (anticipative row)")
        sums = w.sum(axis=1)
        bad = np.abs(sums - 1.0) > ROW_SUM_ATOL
        if np.any(bad):
            i = int(np.argmax(bad))
            raise ValueError(f"row {i} sums to {sums[i]!r}, not 1")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def row_times(self) -> np.ndarray:
        """Left node t_i of each row's interval."""
        return self.grid.nodes[: self.grid.n_steps]

    def support_sizes(self) -> np.ndarray:
        return np.count_nonzero(self.weights, axis=1)


@dataclass(frozen=True)
class DelayFunction:
    """Piecewise-constant deviation: row i reads the state at node theta_i <= i."""

    grid: TimeGrid
    theta: np.ndarray

    def __post_init__(self):
        n = self.grid.n_steps
        th = np.asarray(self.theta, dtype=int)
        if th.shape != (n,):
            raise ValueError(f"theta must have shape ({n},), got {th.shape}")
        rows = np.arange(n)
        if np.any(th < 0) or np.any(th > rows):
            i = int(np.argmax((th < 0) | (th > rows)))
            raise ValueError(f"theta[{i}] = {th[i]} outside [0, {i}]")
        th = th.copy()
        th.setflags(write=False)
        object.__setattr__(self, "theta", th)

    def times(self) -> np.ndarray:
        """Deviation times theta(t_i) as grid values."""
        return self.grid.nodes[self.theta]


@dataclass(frozen=True)
class ReverseDisintegration:
    """Factorisation of the plan by memory-source node.

    nu[j] is the total mass the plan places on node s_j (the second
    marginal); nu_star[j] is, for each charged node, the row distribution
    over the intervals i >= j that look back at s_j.  Nodes with nu[j] = 0
    carry no nu_star entry.
    """

    grid: TimeGrid
    nu: np.ndarray
    nu_star: dict[int, np.ndarray]


def plan_from_delay(theta: DelayFunction) -> TriangularPlan:
    """Dirac plan of a delay function: row i puts all mass at column theta_i."""
    n = theta.grid.n_steps
    w = np.zeros((n, n + 1))
    w[np.arange(n), theta.theta] = 1.0
    return TriangularPlan(theta.grid, w)


def dirac_plan(grid: TimeGrid, columns) -> TriangularPlan:
    """Plan with row i Dirac at the given column index."""
    return plan_from_delay(DelayFunction(grid, np.asarray(columns, dtype=int)))


def dirac_diagonal_plan(grid: TimeGrid) -> TriangularPlan:
    """All mass at the current time: nu_t = delta_t."""
    return dirac_plan(grid, np.arange(grid.n_steps))


def dirac_zero_plan(grid: TimeGrid) -> TriangularPlan:
    """All mass at time 0: nu_t = delta_0."""
    return dirac_plan(grid, np.zeros(grid.n_steps, dtype=int))


def bang_bang_plan(grid: TimeGrid, switch_index: int) -> TriangularPlan:
    """delta_0 rows before switch_index, delta_t rows from it on."""
    cols = np.arange(grid.n_steps)
    cols[:switch_index] = 0
    return dirac_plan(grid, cols)


def half_half_plan(grid: TimeGrid) -> TriangularPlan:
    """Equal split between time 0 and the current time, (delta_0 + delta_t)/2."""
    n = grid.n_steps
    w = np.zeros((n, n + 1))
    w[:, 0] = 0.5
    w[np.arange(n), np.arange(n)] += 0.5
    return TriangularPlan(grid, w)


def uniform_rows_plan(grid: TimeGrid) -> TriangularPlan:
    """Row i uniform over its i+1 admissible nodes."""
    n = grid.n_steps
    w = np.zeros((n, n + 1))
    for i in range(n):
        w[i, : i + 1] = 1.0 / (i + 1)
    return TriangularPlan(grid, w)


def dirichlet_plan(grid: TimeGrid, rng: np.random.Generator) -> TriangularPlan:
    """Random plan with each row drawn from a flat Dirichlet on its simplex."""
    n = grid.n_steps
    w = np.zeros((n, n + 1))
    for i in range(n):
        w[i, : i + 1] = rng.dirichlet(np.ones(i + 1))
    return TriangularPlan(grid, w)


def second_marginal(plan: TriangularPlan) -> ReverseDisintegration:
    """Disintegrate the plan by memory-source node.

    Returns the node masses nu_j = h * sum_{i >= j} w[i, j] and, for every
    charged node, the conditional row distribution nu_star[j][i] with
    h * w[i, j] = nu[j] * nu_star[j][i].
    """
    h = plan.grid.step
    w = plan.weights
    nu = h * w.sum(axis=0)
    nu_star: dict[int, np.ndarray] = {}
    for j in np.nonzero(nu > 0.0)[0]:
        nu_star[int(j)] = h * w[:, j] / nu[j]
    nu.setflags(write=False)
    return ReverseDisintegration(plan.grid, nu, nu_star)


def recombine(rd: ReverseDisintegration) -> TriangularPlan:
    """Rebuild the plan from its reverse disintegration."""
    n = rd.grid.n_steps
    h = rd.grid.step
    w = np.zeros((n, n + 1))
    for j, row_dist in rd.nu_star.items():
        w[:, j] = rd.nu[j] * row_dist / h
    return TriangularPlan(rd.grid, w)


def wasserstein_penalty(plan: TriangularPlan, p: float) -> np.ndarray:
    """Per-row p-th power Wasserstein distance to the Dirac at the current time.

    Entry i is sum_j w[i, j] |t_i - s_j|^p, the transport cost of moving
    the row measure onto delta_{t_i}.
    """
    if p < 1.0:
        raise ValueError(f"Wasserstein order p must be >= 1, got {p}")
    t = plan.row_times()[:, None]
    s = plan.grid.nodes[None, :]
    return (plan.weights * np.abs(t - s) ** p).sum(axis=1)


def convex_combine(a: TriangularPlan, b: TriangularPlan, s: float) -> TriangularPlan:
    """Plan (1 - s) * a + s * b on the shared grid."""
    _check_same_grid(a, b, "convex_combine")
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"mixing parameter must lie in [0, 1], got {s}")
    return TriangularPlan(a.grid, (1.0 - s) * a.weights + s * b.weights)


def integrate_against(plan: TriangularPlan, phi) -> float:
    """Integral of phi(t, s) against the plan measure on the triangle.

    phi must broadcast over numpy arrays of (t, s) pairs.
    """
    t = plan.row_times()[:, None]
    s = plan.grid.nodes[None, :]
    return float(plan.grid.step * (plan.weights * phi(t, s)).sum())


# ---------------------------------------------------------------------------
# Serialization: dense CSV and sparse "i j weight" triplets.
# ---------------------------------------------------------------------------

def plan_to_csv(plan: TriangularPlan, path) -> None:
    """Dense CSV, N rows by N+1 columns, row-major, full float precision."""
    np.savetxt(path, plan.weights, fmt="%.17g", delimiter=",")


def plan_from_csv(path) -> TriangularPlan:
    w = np.loadtxt(path, delimiter=",", ndmin=2)
    n = w.shape[0]
    if w.shape[1] != n + 1:
        raise ValueError(f"dense plan must be N x (N+1), got {w.shape}")
    return _plan_from_raw(TimeGrid(n), w)


def plan_to_triplets(plan: TriangularPlan, path) -> None:
    """Sparse text format: header comment, then one `i j weight` line per atom."""
    lines = [f"# memctrl plan n_steps={plan.grid.n_steps}"]
    for i, j in np.argwhere(plan.weights != 0.0):
        lines.append(f"{i} {j} {plan.weights[i, j]:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def plan_from_triplets(path) -> TriangularPlan:
    text = Path(path).read_text()
    n_steps = None
    entries = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if "n_steps=" in line:
                n_steps = int(line.split("n_steps=")[1].split()[0])
            continue
        i_s, j_s, w_s = line.split()
        entries.append((int(i_s), int(j_s), float(w_s)))
    if n_steps is None:
        n_steps = 1 + max(i for i, _, _ in entries)
    w = np.zeros((n_steps, n_steps + 1))
    for i, j, v in entries:
        w[i, j] = v
    return _plan_from_raw(TimeGrid(n_steps), w)


def _plan_from_raw(grid: TimeGrid, w: np.ndarray) -> TriangularPlan:
    """Validate a matrix read from disk, renormalising rows within 1e-9."""
    sums = w.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-9):
        i = int(np.argmax(np.abs(sums - 1.0)))
        raise ValueError(f"row {i} of plan file sums to {sums[i]!r}, not 1")
    return TriangularPlan(grid, w / sums[:, None])
