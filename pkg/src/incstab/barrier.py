"""p-norm barrier function, its gradients, and the analytic ReLU safety filter.

The admissible region is the superlevel set {h >= 0} of

    h(x) = 1 - ( sum_j (x_j / w_j)^p )^(1/p),    p even,

which approximates the box |x_j| <= w_j for large p.  The safety filter adds
the minimal correction along the velocity gradient of h that restores the
barrier inequality phi0 + phi1 (v + correction) >= 0 whenever the nominal
terms violate it.

Evaluation is scaled by the largest normalized coordinate so that values and
gradients stay finite for any even p (naive powers under- or overflow long
before float64 limits are reached).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domains import Box

__all__ = [
    "PNormBarrier",
    "BarrierEval",
    "SafetyMargins",
    "SuperlevelDomain",
    "eval_barrier",
    "phi0",
    "phi1",
    "relu_correction",
    "in_safe_set",
    "d_inf_norm",
    "sup_relu_term",
    "superlevel_grid",
    "PHI1_DEGENERACY_TOL",
]

# Below this gradient norm the correction denominator phi1 phi1^T is treated
# as degenerate and the correction is zero.
PHI1_DEGENERACY_TOL = 1e-8


@dataclass(frozen=True)
class PNormBarrier:
    """h(x) = 1 - ||x / w||_p with even exponent p and per-coordinate widths w."""

    exponent: int
    half_widths: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.half_widths, dtype=float)
        if self.exponent <= 0 or self.exponent % 2:
            raise ValueError("exponent must be an even positive integer")
        if w.ndim != 1 or not np.all(w > 0):
            raise ValueError("half_widths must be a 1-D array of positive reals")
        object.__setattr__(self, "half_widths", w)

    @property
    def dim(self) -> int:
        return self.half_widths.size

    @property
    def n(self) -> int:
        return self.dim // 2

    def box(self) -> Box:
        return Box(-self.half_widths, self.half_widths)

    def value(self, x) -> float:
        return float(self.value_batch(np.atleast_2d(np.asarray(x, dtype=float)))[0])

    def value_batch(self, X: np.ndarray) -> np.ndarray:
        z = np.abs(np.asarray(X, dtype=float)) / self.half_widths
        zmax = z.max(axis=1)
        zm = np.where(zmax > 0, zmax, 1.0)
        T = np.sum((z / zm[:, None]) ** self.exponent, axis=1)
        h = 1.0 - zm * T ** (1.0 / self.exponent)
        return np.where(zmax > 0, h, 1.0)

    def grad_batch(self, X: np.ndarray) -> np.ndarray:
        """dh/dx, rows aligned with X; zero at the origin (removable singularity)."""
        X = np.asarray(X, dtype=float)
        p = self.exponent
        z = X / self.half_widths
        zmax = np.abs(z).max(axis=1)
        zm = np.where(zmax > 0, zmax, 1.0)
        r = z / zm[:, None]
        T = np.sum(r**p, axis=1)
        grad = -(r ** (p - 1)) * (T ** ((1.0 - p) / p))[:, None] / self.half_widths
        grad[zmax == 0] = 0.0
        return grad


@dataclass(frozen=True)
class BarrierEval:
    """h(x) with its gradients split into the position and velocity blocks."""

    value: float
    grad_x1: np.ndarray
    grad_x2: np.ndarray


@dataclass(frozen=True)
class SafetyMargins:
    """Disturbance margin of the relaxed safe set {h >= -chi(d_inf)}.

    d_inf = ||eta|| ||rho_bar|| * sup_x ||grad_x2 h(x)||, and chi is fixed to
    the identity, so membership reduces to h(x) >= -d_inf.
    """

    d_inf: float
    alpha_coeff: float = 1.0

    def __post_init__(self):
        if self.d_inf < 0:
            raise ValueError("d_inf must be nonnegative")
        if self.alpha_coeff <= 0:
            raise ValueError("alpha_coeff must be positive")

    @staticmethod
    def chi(r: float) -> float:
        return r


def eval_barrier(x, barrier: PNormBarrier) -> BarrierEval:
    """Barrier value and block gradients at one state."""
    x = np.asarray(x, dtype=float)
    if x.shape != (barrier.dim,):
        raise ValueError(f"state has shape {x.shape}, barrier expects ({barrier.dim},)")
    X = x[None, :]
    h = float(barrier.value_batch(X)[0])
    grad = barrier.grad_batch(X)[0]
    n = barrier.n
    return BarrierEval(value=h, grad_x1=grad[:n], grad_x2=grad[n:])


def phi0(x, be: BarrierEval, gains, alpha_coeff: float) -> float:
    """Input-independent part of the barrier inequality under the nominal law.

    Uses the stabilizing acceleration -(lambda1 + lambda2) x2 - lambda1 lambda2 x1
    that the control law actually applies.
    """
    x = np.asarray(x, dtype=float)
    n = be.grad_x1.size
    x1, x2 = x[:n], x[n:]
    nominal = -(gains.lambda1 + gains.lambda2) * x2 - gains.lambda1 * gains.lambda2 * x1
    return float(be.grad_x1 @ x2 + be.grad_x2 @ nominal + alpha_coeff * be.value)


def phi1(x, be: BarrierEval) -> np.ndarray:
    """Input-facing row of the barrier inequality: the velocity gradient of h."""
    return be.grad_x2


def relu_correction(
    phi0_val: float,
    phi1_vec: np.ndarray,
    v: np.ndarray,
    tol: float = PHI1_DEGENERACY_TOL,
) -> np.ndarray:
    """Minimal additive input restoring phi0 + phi1 (v + corr) >= 0.

    Zero when the inequality already holds or when ||phi1|| is below the
    degeneracy tolerance.
    """
    phi1_vec = np.asarray(phi1_vec, dtype=float)
    denom = float(phi1_vec @ phi1_vec)
    if denom < tol * tol:
        return np.zeros_like(phi1_vec)
    a = -phi0_val - float(phi1_vec @ np.asarray(v, dtype=float))
    if a <= 0:
        return np.zeros_like(phi1_vec)
    return (a / denom) * phi1_vec


def in_safe_set(x, barrier: PNormBarrier, margins: SafetyMargins):
    """Membership in the relaxed safe set; returns (inside, margin h + d_inf)."""
    h = barrier.value(x)
    margin = h + margins.d_inf
    return margin >= 0.0, margin


def d_inf_norm(error_bound: float, barrier: PNormBarrier, domain_grid: np.ndarray) -> float:
    """error_bound times the grid maximum of ||grad_x2 h||."""
    grid = np.atleast_2d(np.asarray(domain_grid, dtype=float))
    if grid.size == 0:
        raise ValueError("domain grid must be nonempty")
    g2 = barrier.grad_batch(grid)[:, barrier.n :]
    return float(error_bound) * float(np.linalg.norm(g2, axis=1).max())


def sup_relu_term(
    barrier: PNormBarrier,
    gains,
    alpha_coeff: float,
    state_grid: np.ndarray,
    input_grid: np.ndarray,
    tol: float = PHI1_DEGENERACY_TOL,
) -> float:
    """Grid maximum of ||relu_correction(phi0, phi1, v)||^2 over states x inputs.

    The worst input on the grid maximizes -phi1 v, so the scan is linear in the
    state count with one projection against the input grid.
    """
    states = np.atleast_2d(np.asarray(state_grid, dtype=float))
    inputs = np.atleast_2d(np.asarray(input_grid, dtype=float))
    if states.size == 0 or inputs.size == 0:
        raise ValueError("grids must be nonempty")
    n = barrier.n
    best = 0.0
    for start in range(0, len(states), 65536):
        X = states[start : start + 65536]
        h = barrier.value_batch(X)
        grad = barrier.grad_batch(X)
        g1, g2 = grad[:, :n], grad[:, n:]
        x1, x2 = X[:, :n], X[:, n:]
        nominal = -(gains.lambda1 + gains.lambda2) * x2 - gains.lambda1 * gains.lambda2 * x1
        p0 = np.sum(g1 * x2, axis=1) + np.sum(g2 * nominal, axis=1) + alpha_coeff * h
        a = np.maximum(-p0 - (g2 @ inputs.T).min(axis=1), 0.0)
        nrm = np.linalg.norm(g2, axis=1)
        active = nrm >= tol
        if np.any(active):
            best = max(best, float(((a[active] / nrm[active]) ** 2).max()))
    return best


def superlevel_grid(
    barrier: PNormBarrier,
    points_per_axis: int,
    level: float = 0.0,
    box: Box | None = None,
) -> np.ndarray:
    """Uniform grid over the barrier's box, kept where h(x) >= level."""
    box = box or barrier.box()
    grid = box.uniform_grid(points_per_axis)
    return grid[barrier.value_batch(grid) >= level]


@dataclass(frozen=True)
class SuperlevelDomain:
    """Superlevel set {x in bounding box : h(x) >= level}.

    Quacks like a Box for sampling and gridding; `sample` draws uniformly by
    rejection from the bounding box.
    """

    barrier: PNormBarrier
    level: float
    bounding: Box

    @property
    def dim(self) -> int:
        return self.bounding.dim

    def contains(self, x, tol: float = 0.0) -> bool:
        return (
            self.bounding.contains(x, tol)
            and self.barrier.value(x) >= self.level - tol
        )

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if count < 1:
            raise ValueError("count must be >= 1")
        kept = []
        have = 0
        for _ in range(1000):
            cand = self.bounding.sample(rng, max(count, 4 * (count - have)))
            cand = cand[self.barrier.value_batch(cand) >= self.level]
            kept.append(cand)
            have += len(cand)
            if have >= count:
                return np.concatenate(kept)[:count]
        raise ValueError("superlevel set appears empty: rejection sampling starved")

    def uniform_grid(self, points_per_axis: int) -> np.ndarray:
        return superlevel_grid(self.barrier, points_per_axis, self.level, self.bounding)
