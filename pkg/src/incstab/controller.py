"""Feedback-linearizing control law with the embedded ReLU safety filter.

    u = g(x)^-1 [ -mu(x) - (lambda1 + lambda2) x2 - lambda1 lambda2 x1 + v
                  + relu_correction(phi0(x), phi1(x), v) ]

mu is the learned drift mean (or the true drift in the oracle ablation), v the
external input, and the correction term the analytic safety filter.  Ablation
modes are first-class configuration: the oracle-drift mode isolates the exact
feedback-linearization mechanism, the filter-off mode isolates the incremental
convergence argument from the invariance one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .barrier import PNormBarrier, eval_barrier, phi0, relu_correction

__all__ = [
    "Gains",
    "GainValidationError",
    "ControllerConfig",
    "validate_gains",
    "control_law",
    "make_controller",
    "closed_loop_error_dynamics_check",
    "parse_mode",
    "MODES",
]

MODES = ("learned", "oracle-drift", "filter-off", "oracle-drift+filter-off")


class GainValidationError(ValueError):
    """A gain inequality required by the stability argument fails."""


@dataclass(frozen=True)
class Gains:
    """Controller gains; stability requires lambda1 > 1/2 and
    lambda2 > 2 + 1/(2 theta) for some theta > 0."""

    lambda1: float
    lambda2: float
    theta: float


def validate_gains(g: Gains) -> Gains:
    """Return the gains unchanged iff the strict inequalities hold."""
    if g.theta <= 0:
        raise GainValidationError(f"theta must be positive; got {g.theta}")
    if not g.lambda1 > 0.5:
        raise GainValidationError(
            f"lambda1 must strictly exceed 1/2; got {g.lambda1}"
        )
    floor = 2.0 + 1.0 / (2.0 * g.theta)
    if not g.lambda2 > floor:
        raise GainValidationError(
            f"lambda2 must strictly exceed 2 + 1/(2 theta) = {floor}; got {g.lambda2}"
        )
    return g


def parse_mode(mode: str) -> tuple[bool, bool]:
    """Map a mode name to (use_oracle_drift, filter_enabled)."""
    tokens = {tok.strip() for tok in mode.split("+") if tok.strip()}
    known = {"learned", "oracle-drift", "filter-off"}
    if not tokens or not tokens <= known:
        raise ValueError(f"unknown mode {mode!r}; expected combinations of {sorted(known)}")
    if "learned" in tokens and "oracle-drift" in tokens:
        raise ValueError("mode cannot be both learned and oracle-drift")
    return "oracle-drift" in tokens, "filter-off" not in tokens


@dataclass(frozen=True)
class ControllerConfig:
    """Everything the control law needs at one state.

    `gp` may be None only when the drift source is the oracle.  The plant
    supplies the known input gain and, in oracle mode, the true drift.
    """

    gains: Gains
    barrier: PNormBarrier
    plant: object
    gp: object = None
    alpha_coeff: float = 1.0
    mode: str = "learned"

    def __post_init__(self):
        validate_gains(self.gains)
        oracle, _ = parse_mode(self.mode)
        if not oracle and self.gp is None:
            raise ValueError("learned mode requires a fitted GP model")

    @property
    def oracle_drift(self) -> bool:
        return parse_mode(self.mode)[0]

    @property
    def filter_enabled(self) -> bool:
        return parse_mode(self.mode)[1]


def control_law(x: np.ndarray, v: np.ndarray, cfg: ControllerConfig) -> np.ndarray:
    """Evaluate the control input at state x under external input v."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    n = cfg.plant.n
    x1, x2 = x[:n], x[n:]
    g = cfg.gains

    mu = cfg.plant.drift(x) if cfg.oracle_drift else cfg.gp.mean(x)
    inner = -mu - (g.lambda1 + g.lambda2) * x2 - g.lambda1 * g.lambda2 * x1 + v
    if cfg.filter_enabled:
        be = eval_barrier(x, cfg.barrier)
        p0 = phi0(x, be, g, cfg.alpha_coeff)
        inner = inner + relu_correction(p0, be.grad_x2, v)
    try:
        ginv = cfg.plant.input_gain_inv(x)
    except ArithmeticError as exc:
        raise RuntimeError(f"input-gain inversion failed at state {x}") from exc
    return ginv @ inner


def make_controller(cfg: ControllerConfig, signal):
    """Bind the control law to an external input signal: (x, t) -> u."""

    def controller(x, t):
        return control_law(x, signal(t), cfg)

    return controller


@dataclass(frozen=True)
class ErrorDynamicsReport:
    """Spectrum of the per-axis transformed error system
    e1dot = e2 - lambda1 e1, e2dot = -lambda2 e2."""

    eigenvalues: tuple[float, float]
    is_hurwitz: bool
    spectral_abscissa: float


def closed_loop_error_dynamics_check(gains: Gains) -> ErrorDynamicsReport:
    """Spectral report for the exactly-linearized, filter-off, matched case."""
    validate_gains(gains)
    A = np.array([[-gains.lambda1, 1.0], [0.0, -gains.lambda2]])
    eig = np.sort(np.linalg.eigvals(A).real)
    return ErrorDynamicsReport(
        eigenvalues=(float(eig[0]), float(eig[1])),
        is_hurwitz=bool(np.all(eig < 0)),
        spectral_abscissa=float(eig.max()),
    )
