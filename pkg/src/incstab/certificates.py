"""Incremental-stability certificate constants and trajectory-pair verifiers.

The certificate packages the closed-form constants of the contraction
argument: with kappa1 = lambda1 - 1/2, kappa2 = lambda2 - 2 - 1/(2 theta),

    kappa = 2 min(kappa1, kappa2)
    c_tilde = bound^2 + 2 theta * sup_relu
    c = sqrt(6 c_tilde / kappa)
    beta(r, s) = sqrt(6 max(1/2 + lambda1^2, 1)) * r * exp(-kappa s / 2)
    gamma(r) = r * sqrt(3 / kappa)

against the Lyapunov function V = (1/2)||e1||^2 + (1/2)||e2||^2 in the
transformed error coordinates e1 = x1 - y1, e2 = x2 + lambda1 x1 - y2 -
lambda1 y1.  The verifiers evaluate the distance bound, the Lyapunov decrease
inequality, and the quadratic sandwich numerically along simulated pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .controller import Gains, validate_gains
from .simulation import Trajectory

__all__ = [
    "ErrorCoords",
    "IspsCertificate",
    "BoundCheck",
    "DecreaseCheck",
    "SandwichReport",
    "PairReport",
    "error_coords",
    "lyapunov_V",
    "make_certificate",
    "beta_fn",
    "gamma_fn",
    "check_pair_bound",
    "check_lyapunov_decrease",
    "check_sandwich",
    "verify_pair",
]

BOUND_TOL = 1e-6  # absolute slack on the distance-bound violation


@dataclass(frozen=True)
class ErrorCoords:
    """Transformed error coordinates; the map from (x, y) is linear and
    invertible for any lambda1."""

    e1: np.ndarray
    e2: np.ndarray


def error_coords(x: np.ndarray, y: np.ndarray, lambda1: float) -> ErrorCoords:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("states must have equal dimension")
    n = x.size // 2
    e1 = x[:n] - y[:n]
    e2 = x[n:] + lambda1 * x[:n] - y[n:] - lambda1 * y[:n]
    return ErrorCoords(e1=e1, e2=e2)


def lyapunov_V(x: np.ndarray, y: np.ndarray, lambda1: float) -> float:
    """V(x, y) = (1/2)||e1||^2 + (1/2)||e2||^2; zero iff x = y."""
    e = error_coords(x, y, lambda1)
    return 0.5 * float(e.e1 @ e.e1) + 0.5 * float(e.e2 @ e.e2)


def _lyapunov_series(tx: Trajectory, ty: Trajectory, lambda1: float) -> np.ndarray:
    n = tx.states.shape[1] // 2
    e1 = tx.states[:, :n] - ty.states[:, :n]
    e2 = (
        tx.states[:, n:]
        + lambda1 * tx.states[:, :n]
        - ty.states[:, n:]
        - lambda1 * ty.states[:, :n]
    )
    return 0.5 * np.sum(e1 * e1, axis=1) + 0.5 * np.sum(e2 * e2, axis=1)


@dataclass(frozen=True)
class IspsCertificate:
    """Closed-form certificate constants for one configuration."""

    kappa1: float
    kappa2: float
    kappa: float
    sigma_coeff: float
    c_tilde: float
    c: float
    beta_coeff: float
    gamma_coeff: float
    lambda1: float
    confidence: float

    def sigma(self, r: float) -> float:
        return self.sigma_coeff * r * r


def make_certificate(
    gains: Gains,
    error_bound: float,
    sup_relu: float,
    epsilon: float,
    output_dim: int,
) -> IspsCertificate:
    """Assemble the certificate from validated gains and the grid suprema."""
    validate_gains(gains)
    if error_bound < 0 or sup_relu < 0:
        raise ValueError("error_bound and sup_relu must be nonnegative")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    kappa1 = gains.lambda1 - 0.5
    kappa2 = gains.lambda2 - 2.0 - 1.0 / (2.0 * gains.theta)
    kappa = 2.0 * min(kappa1, kappa2)
    if kappa <= 0:
        raise AssertionError("kappa must be positive after gain validation")
    c_tilde = error_bound**2 + 2.0 * gains.theta * sup_relu
    return IspsCertificate(
        kappa1=kappa1,
        kappa2=kappa2,
        kappa=kappa,
        sigma_coeff=0.5,
        c_tilde=c_tilde,
        c=float(np.sqrt(6.0 * c_tilde / kappa)),
        beta_coeff=float(np.sqrt(6.0 * max(0.5 + gains.lambda1**2, 1.0))),
        gamma_coeff=float(np.sqrt(3.0 / kappa)),
        lambda1=gains.lambda1,
        confidence=(1.0 - epsilon) ** output_dim,
    )


def beta_fn(cert: IspsCertificate, r: float, s: float) -> float:
    """Decay envelope beta(r, s); linear in r, exponentially shrinking in s."""
    return cert.beta_coeff * r * np.exp(-0.5 * cert.kappa * s)


def gamma_fn(cert: IspsCertificate, r: float) -> float:
    """Input-difference gain gamma(r) = r sqrt(3 / kappa)."""
    return cert.gamma_coeff * r


def _require_aligned(tx: Trajectory, ty: Trajectory) -> None:
    if not tx.aligned_with(ty):
        raise ValueError(
            "trajectories are misaligned: "
            f"{len(tx)} vs {len(ty)} samples, dt {tx.dt} vs {ty.dt}"
        )


@dataclass(frozen=True)
class BoundCheck:
    """Per-step distance-vs-bound comparison."""

    times: np.ndarray
    dist: np.ndarray
    bound: np.ndarray
    dv_inf: float
    max_violation: float
    violating_step: int | None
    passed: bool


def check_pair_bound(tx: Trajectory, ty: Trajectory, cert: IspsCertificate) -> BoundCheck:
    """Check ||x(t) - y(t)|| <= beta(||x0 - y0||, t) + gamma(dv_inf) + c."""
    _require_aligned(tx, ty)
    dist = np.linalg.norm(tx.states - ty.states, axis=1)
    dv_inf = float(np.linalg.norm(tx.externals - ty.externals, axis=1).max())
    bound = (
        beta_fn(cert, dist[0], tx.times)
        + gamma_fn(cert, dv_inf)
        + cert.c
    )
    violation = dist - bound
    worst = int(np.argmax(violation))
    max_violation = float(violation[worst])
    passed = max_violation <= BOUND_TOL
    return BoundCheck(
        times=tx.times,
        dist=dist,
        bound=bound,
        dv_inf=dv_inf,
        max_violation=max_violation,
        violating_step=None if passed else worst,
        passed=passed,
    )


@dataclass(frozen=True)
class DecreaseCheck:
    """Finite-difference check of Vdot <= -kappa V + sigma(dv_inf) + c_tilde."""

    times: np.ndarray
    V: np.ndarray
    Vdot: np.ndarray
    residual: np.ndarray
    tolerance: float
    max_residual: float
    passed: bool


def check_lyapunov_decrease(
    tx: Trajectory, ty: Trajectory, cert: IspsCertificate
) -> DecreaseCheck:
    """Differentiate V along the pair and test the decrease inequality.

    Vdot uses central differences with second-order one-sided endpoint
    stencils; the pass tolerance budgets the differentiation error as dt^2
    times the peak second difference of V.
    """
    _require_aligned(tx, ty)
    if len(tx) < 3:
        raise ValueError("need at least 3 samples to differentiate V")
    dt = tx.dt
    V = _lyapunov_series(tx, ty, cert.lambda1)
    Vdot = np.gradient(V, dt, edge_order=2)
    dv_inf = float(np.linalg.norm(tx.externals - ty.externals, axis=1).max())
    residual = Vdot + cert.kappa * V - cert.sigma(dv_inf) - cert.c_tilde
    Vddot_peak = float(np.abs(np.diff(V, 2)).max()) / dt**2 if len(V) > 2 else 0.0
    tolerance = dt**2 * Vddot_peak + 1e-9 * (1.0 + float(V.max()))
    max_residual = float(residual.max())
    return DecreaseCheck(
        times=tx.times,
        V=V,
        Vdot=Vdot,
        residual=residual,
        tolerance=tolerance,
        max_residual=max_residual,
        passed=max_residual <= tolerance,
    )


@dataclass(frozen=True)
class SandwichReport:
    """Numerical audit of (1/2)||x-y||^2 <= V(x,y) <= max(1/2+lambda1^2,1)||x-y||^2.

    The upper bound is a theorem; the lower one is not (the cross term can
    defeat it), so violations are recorded with the worst counterexample
    rather than raised.
    """

    samples: int
    upper_violations: int
    lower_violations: int
    worst_lower_gap: float
    worst_lower_pair: tuple | None
    upper_passed: bool


def check_sandwich(sample_pairs, lambda1: float) -> SandwichReport:
    """Evaluate both quadratic bounds on every (x, y) sample pair."""
    upper_coeff = max(0.5 + lambda1**2, 1.0)
    upper_bad = 0
    lower_bad = 0
    worst_gap = 0.0
    worst_pair = None
    count = 0
    for x, y in sample_pairs:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        count += 1
        d2 = float(np.sum((x - y) ** 2))
        V = lyapunov_V(x, y, lambda1)
        scale = 1.0 + d2
        if V > upper_coeff * d2 + 1e-12 * scale:
            upper_bad += 1
        gap = 0.5 * d2 - V
        if gap > 1e-12 * scale:
            lower_bad += 1
            if gap > worst_gap:
                worst_gap = gap
                worst_pair = (x.copy(), y.copy())
    return SandwichReport(
        samples=count,
        upper_violations=upper_bad,
        lower_violations=lower_bad,
        worst_lower_gap=worst_gap,
        worst_lower_pair=worst_pair,
        upper_passed=upper_bad == 0,
    )


@dataclass(frozen=True)
class PairReport:
    """Combined per-pair verification record."""

    bound: BoundCheck
    decrease: DecreaseCheck
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.bound.passed and self.decrease.passed


def verify_pair(tx: Trajectory, ty: Trajectory, cert: IspsCertificate, **meta) -> PairReport:
    return PairReport(
        bound=check_pair_bound(tx, ty, cert),
        decrease=check_lyapunov_decrease(tx, ty, cert),
        meta=dict(meta),
    )
