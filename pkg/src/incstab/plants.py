"""Strict-feedback plants: xdot1 = x2, xdot2 = f(x) + g(x) u.

States are flat float arrays [x1; x2] of length 2n.  The drift f is
"unknown" to the controller (only the simulator and the data collector may
call it); the input gain g and its inverse are known everywhere.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

__all__ = [
    "StrictFeedbackState",
    "Plant",
    "TwoLinkParams",
    "TwoLinkArm",
    "LinearDriftPlant",
    "mass_matrix",
    "coriolis_gravity",
    "manipulator_drift",
    "manipulator_gain",
]


@dataclass(frozen=True)
class StrictFeedbackState:
    """Named halves of a strict-feedback state: positions x1, velocities x2."""

    x1: np.ndarray
    x2: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.x1, dtype=float)
        b = np.asarray(self.x2, dtype=float)
        if a.shape != b.shape or a.ndim != 1:
            raise ValueError("x1 and x2 must be 1-D arrays of equal dimension")
        object.__setattr__(self, "x1", a)
        object.__setattr__(self, "x2", b)

    @classmethod
    def from_array(cls, x: np.ndarray) -> "StrictFeedbackState":
        x = np.asarray(x, dtype=float)
        if x.size % 2:
            raise ValueError("full state dimension must be even")
        n = x.size // 2
        return cls(x[:n], x[n:])

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.x1, self.x2])


class Plant(ABC):
    """Strict-feedback plant with known input gain and hidden drift."""

    n: int  # dimension of x1 and x2
    m: int  # input dimension

    @abstractmethod
    def drift(self, x: np.ndarray) -> np.ndarray:
        """True f(x); reserved for simulation and data collection."""

    @abstractmethod
    def input_gain(self, x: np.ndarray) -> np.ndarray:
        """g(x), shape (n, m)."""

    @abstractmethod
    def input_gain_inv(self, x: np.ndarray) -> np.ndarray:
        """g(x)^-1, shape (m, n); exists on the whole domain."""

    def derivative(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Full state derivative [x2; f(x) + g(x) u]."""
        n = self.n
        out = np.empty(2 * n)
        out[:n] = x[n:]
        out[n:] = self.drift(x) + self.input_gain(x) @ u
        return out


@dataclass(frozen=True)
class TwoLinkParams:
    """Planar two-link point-mass arm: masses (kg), lengths (m), gravity (m/s^2)."""

    m1: float = 1.0
    m2: float = 1.0
    l1: float = 1.0
    l2: float = 1.0
    gravity: float = 9.81

    def __post_init__(self):
        if min(self.m1, self.m2, self.l1, self.l2) <= 0 or self.gravity < 0:
            raise ValueError("masses and lengths must be positive, gravity nonnegative")


def mass_matrix(q: np.ndarray, params: TwoLinkParams) -> np.ndarray:
    """Symmetric positive-definite inertia matrix M(q), point-mass convention."""
    m1, m2, l1, l2 = params.m1, params.m2, params.l1, params.l2
    c2 = np.cos(q[1])
    m11 = (m1 + m2) * l1**2 + m2 * l2**2 + 2 * m2 * l1 * l2 * c2
    m12 = m2 * l2**2 + m2 * l1 * l2 * c2
    m22 = m2 * l2**2
    return np.array([[m11, m12], [m12, m22]])


def coriolis_gravity(q: np.ndarray, qdot: np.ndarray, params: TwoLinkParams):
    """Velocity coupling H(q, qdot) (quadratic in qdot) and gravity torque c(q)."""
    m1, m2, l1, l2, g = params.m1, params.m2, params.l1, params.l2, params.gravity
    s2 = np.sin(q[1])
    H = np.array(
        [
            -m2 * l1 * l2 * s2 * (2.0 * qdot[0] * qdot[1] + qdot[1] ** 2),
            m2 * l1 * l2 * s2 * qdot[0] ** 2,
        ]
    )
    c = np.array(
        [
            (m1 + m2) * g * l1 * np.cos(q[0]) + m2 * g * l2 * np.cos(q[0] + q[1]),
            m2 * g * l2 * np.cos(q[0] + q[1]),
        ]
    )
    return H, c


def _solve_2x2(M: np.ndarray, b: np.ndarray) -> np.ndarray:
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    if abs(det) < 1e-12:
        raise ArithmeticError("mass matrix numerically singular")
    return np.array(
        [
            (M[1, 1] * b[0] - M[0, 1] * b[1]) / det,
            (M[0, 0] * b[1] - M[1, 0] * b[0]) / det,
        ]
    )


def _inv_2x2(M: np.ndarray) -> np.ndarray:
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    if abs(det) < 1e-12:
        raise ArithmeticError("mass matrix numerically singular")
    return np.array([[M[1, 1], -M[0, 1]], [-M[1, 0], M[0, 0]]]) / det


def manipulator_drift(x: np.ndarray, params: TwoLinkParams) -> np.ndarray:
    """f(x) = M(q)^-1 (-H - c) with q = x[:2], qdot = x[2:]."""
    q, qdot = x[:2], x[2:]
    H, c = coriolis_gravity(q, qdot, params)
    return _solve_2x2(mass_matrix(q, params), -(H + c))


def manipulator_gain(x: np.ndarray, params: TwoLinkParams) -> np.ndarray:
    """g(x) = M(q)^-1; invertible since M is positive definite."""
    return _inv_2x2(mass_matrix(x[:2], params))


class TwoLinkArm(Plant):
    """Two-revolute-joint arm; torque input enters through M(q)^-1."""

    n = 2
    m = 2

    def __init__(self, params: TwoLinkParams | None = None):
        self.params = params or TwoLinkParams()

    def drift(self, x):
        return manipulator_drift(x, self.params)

    def input_gain(self, x):
        return manipulator_gain(x, self.params)

    def input_gain_inv(self, x):
        return mass_matrix(x[:2], self.params)

    def derivative(self, x, u):
        # one shared M(q) solve per call keeps the closed-loop integration cheap
        q, qdot = x[:2], x[2:]
        H, c = coriolis_gravity(q, qdot, self.params)
        acc = _solve_2x2(mass_matrix(q, self.params), u - H - c)
        return np.concatenate([qdot, acc])


class LinearDriftPlant(Plant):
    """f(x) = A x2 with identity gain; analytic reference plant for tests."""

    def __init__(self, A: np.ndarray):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        self.A = A
        self.n = self.m = A.shape[0]
        self._eye = np.eye(self.n)

    def drift(self, x):
        return self.A @ x[self.n :]

    def input_gain(self, x):
        return self._eye

    def input_gain_inv(self, x):
        return self._eye
