"""Fixed-step closed-loop simulation and training-data collection.

All rollouts use classical fourth-order Runge-Kutta.  Closed-loop integration
re-evaluates the controller at the substage states and times, so the logged
trajectory discretizes the true continuous feedback loop rather than a
zero-order-hold variant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gp import TrainingSet

__all__ = [
    "SimulationError",
    "Trajectory",
    "rk4_step",
    "simulate",
    "collect_data",
    "save_trajectory_csv",
    "load_trajectory_csv",
    "save_training_set_csv",
    "load_training_set_csv",
]


class SimulationError(RuntimeError):
    """Non-finite state, derivative, or input encountered during a rollout."""


@dataclass
class Trajectory:
    """Time-aligned log of one closed-loop rollout.

    `inputs[k]` is the applied input u(t_k) and `externals[k]` the external
    input v(t_k); both are evaluated at the logged state/time.  `diagnostic`
    is set when the rollout stopped early (domain exit) and explains why.
    """

    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    externals: np.ndarray
    diagnostic: str | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    def aligned_with(self, other: "Trajectory", tol: float = 1e-9) -> bool:
        return (
            len(self) == len(other)
            and self.states.shape == other.states.shape
            and bool(np.all(np.abs(self.times - other.times) <= tol))
        )


def rk4_step(dynamics, x: np.ndarray, u, dt: float) -> np.ndarray:
    """One classical RK4 update of xdot = dynamics(x, u) with u held constant."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    k1 = dynamics(x, u)
    k2 = dynamics(x + 0.5 * dt * k1, u)
    k3 = dynamics(x + 0.5 * dt * k2, u)
    k4 = dynamics(x + dt * k3, u)
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise SimulationError("non-finite state derivative in rk4_step")
    return out


def simulate(
    plant,
    controller,
    x0: np.ndarray,
    horizon: float,
    dt: float,
    external=None,
    barrier=None,
    exit_level: float | None = None,
) -> Trajectory:
    """Roll out the closed loop xdot = [x2; f + g u], u = controller(x, t).

    `external(t)` is logged alongside the applied input (defaults to zeros).
    When `barrier` and `exit_level` are given, the rollout stops early with a
    diagnostic once h(x) < exit_level, which separates numerical blow-up from
    certificate violations that the verifiers must catch.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    steps = round(horizon / dt)
    if steps < 1 or abs(steps * dt - horizon) > 1e-9 * max(1.0, horizon):
        raise ValueError(f"dt={dt} must divide horizon={horizon}")

    x = np.asarray(x0, dtype=float).copy()
    m = plant.m
    if external is None:
        external = lambda t: np.zeros(m)

    times = np.empty(steps + 1)
    states = np.empty((steps + 1, x.size))
    inputs = np.empty((steps + 1, m))
    externals = np.empty((steps + 1, m))
    diagnostic = None

    def stage(xs, ts):
        us = controller(xs, ts)
        if not np.all(np.isfinite(us)):
            raise SimulationError(f"controller returned non-finite input at t={ts:.6f}")
        return plant.derivative(xs, us)

    k = 0
    for k in range(steps + 1):
        t = k * dt
        u = controller(x, t)
        if not np.all(np.isfinite(u)):
            raise SimulationError(f"controller returned non-finite input at step {k}")
        times[k] = t
        states[k] = x
        inputs[k] = u
        externals[k] = external(t)
        if barrier is not None and exit_level is not None:
            h = barrier.value(x)
            if h < exit_level:
                diagnostic = (
                    f"left the verification domain at step {k} (t={t:.6f}): "
                    f"h={h:.6f} < {exit_level:.6f}"
                )
                break
        if k == steps:
            break
        k1 = stage(x, t)
        k2 = stage(x + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = stage(x + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = stage(x + dt * k3, t + dt)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise SimulationError(f"non-finite state after step {k}")

    end = k + 1
    return Trajectory(
        times=times[:end],
        states=states[:end],
        inputs=inputs[:end],
        externals=externals[:end],
        diagnostic=diagnostic,
    )


def collect_data(
    plant,
    count: int,
    sample_dt: float,
    noise_std: float,
    seed: int,
    domain,
) -> TrainingSet:
    """Drift observations by forward differences over one zero-input rollout.

    Draws `count` states uniformly from `domain` (seeded, reproducible), steps
    each by `sample_dt` with u = 0, and forms y = (x2' - x2)/sample_dt plus
    i.i.d. Gaussian noise per component.
    """
    if sample_dt <= 0:
        raise ValueError("sample_dt must be positive")
    rng = np.random.default_rng(seed)
    X = domain.sample(rng, count)
    n = plant.n
    u0 = np.zeros(plant.m)
    Y = np.empty((count, n))
    for j in range(count):
        nxt = rk4_step(plant.derivative, X[j], u0, sample_dt)
        Y[j] = (nxt[n:] - X[j, n:]) / sample_dt
    if noise_std > 0:
        Y += rng.normal(0.0, noise_std, size=Y.shape)
    return TrainingSet(inputs=X, targets=Y, noise_std=noise_std)


# ---------------------------------------------------------------------------
# CSV I/O (full double precision, 17 significant digits)

_FMT = "%.17g"


def save_trajectory_csv(traj: Trajectory, path, header_comments=()) -> None:
    n2 = traj.states.shape[1]
    n = n2 // 2
    m = traj.inputs.shape[1]
    cols = (
        ["t"]
        + [f"x1_{i+1}" for i in range(n)]
        + [f"x2_{i+1}" for i in range(n)]
        + [f"u_{i+1}" for i in range(m)]
        + [f"v_{i+1}" for i in range(m)]
    )
    rows = np.column_stack([traj.times, traj.states, traj.inputs, traj.externals])
    with open(path, "w") as fh:
        for line in header_comments:
            fh.write(f"# {line}\n")
        if traj.diagnostic:
            fh.write(f"# diagnostic: {traj.diagnostic}\n")
        fh.write(",".join(cols) + "\n")
        np.savetxt(fh, rows, fmt=_FMT, delimiter=",")


def load_trajectory_csv(path) -> Trajectory:
    comments = []
    with open(path) as fh:
        lines = fh.readlines()
    body = []
    header = None
    for line in lines:
        if line.startswith("#"):
            comments.append(line[1:].strip())
        elif header is None:
            header = line.strip().split(",")
        elif line.strip():
            body.append(line)
    if header is None or not body:
        raise ValueError(f"no trajectory data in {path}")
    data = np.loadtxt(body, delimiter=",", ndmin=2)
    n = sum(1 for c in header if c.startswith("x1_"))
    m = sum(1 for c in header if c.startswith("u_"))
    diagnostic = next(
        (c.split(":", 1)[1].strip() for c in comments if c.startswith("diagnostic:")),
        None,
    )
    return Trajectory(
        times=data[:, 0],
        states=data[:, 1 : 1 + 2 * n],
        inputs=data[:, 1 + 2 * n : 1 + 2 * n + m],
        externals=data[:, 1 + 2 * n + m : 1 + 2 * n + 2 * m],
        diagnostic=diagnostic,
        meta={"comments": comments},
    )


def save_training_set_csv(data: TrainingSet, path) -> None:
    d = data.input_dim
    n = data.output_dim
    cols = (
        [f"x_{i+1}" for i in range(d)]
        + [f"y_{i+1}" for i in range(n)]
        + ["noisy"]
    )
    flag = np.full((data.count, 1), 1.0 if data.noise_std > 0 else 0.0)
    rows = np.column_stack([data.inputs, data.targets, flag])
    with open(path, "w") as fh:
        fh.write(f"# noise_std={data.noise_std!r}\n")
        fh.write(",".join(cols) + "\n")
        np.savetxt(fh, rows, fmt=_FMT, delimiter=",")


def load_training_set_csv(path) -> TrainingSet:
    noise_std = 0.0
    body = []
    header = None
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                if "noise_std=" in line:
                    noise_std = float(line.split("noise_std=")[1])
            elif header is None:
                header = line.strip().split(",")
            elif line.strip():
                body.append(line)
    if header is None or not body:
        raise ValueError(f"no training data in {path}")
    data = np.loadtxt(body, delimiter=",", ndmin=2)
    d = sum(1 for c in header if c.startswith("x_"))
    n = sum(1 for c in header if c.startswith("y_"))
    return TrainingSet(inputs=data[:, :d], targets=data[:, d : d + n], noise_std=noise_std)
