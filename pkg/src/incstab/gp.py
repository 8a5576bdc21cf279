"""Gaussian-process regression of an unknown drift, one GP per output dimension.

Each output component is modeled with a zero-mean GP under a squared-exponential
kernel with per-coordinate lengthscales.  Posterior mean and variance at a query
point x use the standard conditioning formulas

    mean_i(x) = kvec_i(x)^T (K_i + noise^2 I)^-1 y_i
    var_i(x)  = k_i(x, x) - kvec_i(x)^T (K_i + noise^2 I)^-1 kvec_i(x)

against N retained training inputs.  The fitted posterior also carries the
parameters of the uniform model-error bound ||eta|| * ||rho_bar|| used by the
controller margins and the stability certificate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

__all__ = [
    "KernelParams",
    "TrainingSet",
    "GpPosterior",
    "ErrorBoundParams",
    "IllConditionedKernelError",
    "eval_kernel",
    "kernel_matrix",
    "fit",
    "predict_mean",
    "predict_var",
    "max_std_bound",
    "compute_eta",
    "save_model",
    "load_model",
]

# Jitter ladder: start at JITTER_INIT * signal_std^2, escalate x10 up to
# JITTER_MAX * signal_std^2, then give up.
JITTER_INIT = 1e-10
JITTER_MAX = 1e-4

# Negative posterior variances larger than this (times signal_std^2) indicate a
# bug rather than round-off and are not silently clamped.
VAR_CLAMP_TOL = 1e-9


class IllConditionedKernelError(RuntimeError):
    """Kernel matrix could not be factorized even after maximum jitter."""


@dataclass(frozen=True)
class KernelParams:
    """Squared-exponential kernel: signal_std^2 * exp(-0.5 * sum_j (dx_j / l_j)^2)."""

    signal_std: float
    lengthscales: np.ndarray

    def __post_init__(self):
        ls = np.asarray(self.lengthscales, dtype=float)
        if self.signal_std <= 0:
            raise ValueError("signal_std must be positive")
        if ls.ndim != 1 or not np.all(ls > 0):
            raise ValueError("lengthscales must be a 1-D array of positive reals")
        object.__setattr__(self, "lengthscales", ls)

    @property
    def input_dim(self) -> int:
        return self.lengthscales.size


@dataclass(frozen=True)
class TrainingSet:
    """N noisy drift observations: inputs (N, d), targets (N, n)."""

    inputs: np.ndarray
    targets: np.ndarray
    noise_std: float

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        Y = np.atleast_2d(np.asarray(self.targets, dtype=float))
        if len(X) != len(Y) or len(X) < 1:
            raise ValueError("inputs and targets must have equal count N >= 1")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "targets", Y)

    @property
    def count(self) -> int:
        return len(self.inputs)

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    @property
    def output_dim(self) -> int:
        return self.targets.shape[1]


@dataclass(frozen=True)
class ErrorBoundParams:
    """Parameters of the probabilistic uniform model-error bound.

    The bound on ||f(x) - mean(x)|| over the training domain is
    eta_norm * rho_bar_norm, holding with probability (1 - epsilon)^output_dim.
    """

    eta_norm: float
    rho_bar_norm: float
    epsilon: float
    output_dim: int

    def __post_init__(self):
        if self.eta_norm < 0 or self.rho_bar_norm < 0:
            raise ValueError("eta_norm and rho_bar_norm must be nonnegative")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")

    @property
    def bound(self) -> float:
        return self.eta_norm * self.rho_bar_norm

    @property
    def confidence(self) -> float:
        return (1.0 - self.epsilon) ** self.output_dim


@dataclass(frozen=True)
class GpPosterior:
    """Trained per-output-dimension GPs sharing one set of training inputs.

    Immutable after fit; safe for concurrent prediction.  `chol[i]` is the lower
    Cholesky factor of K_i + (noise_std^2 + jitter[i]) I and `weights[i]` solves
    that matrix against the i-th target column.
    """

    kernels: tuple[KernelParams, ...]
    inputs: np.ndarray
    chol: tuple[np.ndarray, ...]
    weights: tuple[np.ndarray, ...]
    noise_std: float
    jitter: tuple[float, ...]
    error_bound: ErrorBoundParams | None = None

    @property
    def output_dim(self) -> int:
        return len(self.kernels)

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    @property
    def count(self) -> int:
        return len(self.inputs)

    def with_error_bound(self, eb: ErrorBoundParams) -> "GpPosterior":
        return GpPosterior(
            self.kernels, self.inputs, self.chol, self.weights,
            self.noise_std, self.jitter, eb,
        )

    def mean(self, x: np.ndarray) -> np.ndarray:
        return predict_mean(self, x)

    def var(self, x: np.ndarray) -> np.ndarray:
        return predict_var(self, x)


def eval_kernel(x, x_prime, params: KernelParams) -> float:
    """Squared-exponential kernel value; symmetric, equals signal_std^2 at x = x'."""
    x = np.asarray(x, dtype=float)
    xp = np.asarray(x_prime, dtype=float)
    if x.shape != xp.shape or x.size != params.input_dim:
        raise ValueError(
            f"dimension mismatch: x {x.shape}, x' {xp.shape}, "
            f"kernel expects {params.input_dim}"
        )
    z = (x - xp) / params.lengthscales
    return params.signal_std**2 * float(np.exp(-0.5 * np.dot(z, z)))


def kernel_matrix(A: np.ndarray, B: np.ndarray, params: KernelParams) -> np.ndarray:
    """Cross-kernel matrix k(A_i, B_j), shape (len(A), len(B))."""
    As = np.asarray(A, dtype=float) / params.lengthscales
    Bs = np.asarray(B, dtype=float) / params.lengthscales
    # ||a-b||^2 = ||a||^2 - 2 a.b + ||b||^2, clamped against round-off
    d2 = (
        np.sum(As**2, axis=1)[:, None]
        - 2.0 * (As @ Bs.T)
        + np.sum(Bs**2, axis=1)[None, :]
    )
    np.maximum(d2, 0.0, out=d2)
    return params.signal_std**2 * np.exp(-0.5 * d2)


def fit(data: TrainingSet, params) -> GpPosterior:
    """Fit one GP per output dimension.

    `params` is one KernelParams shared by all output dimensions or a sequence
    with one entry per dimension.  Raises IllConditionedKernelError if the
    regularized kernel matrix cannot be factorized after jitter escalation.
    """
    if isinstance(params, KernelParams):
        params = [params] * data.output_dim
    params = list(params)
    if len(params) != data.output_dim:
        raise ValueError(
            f"need {data.output_dim} kernel parameter sets, got {len(params)}"
        )
    for kp in params:
        if kp.input_dim != data.input_dim:
            raise ValueError("kernel lengthscale count does not match input dim")

    X = data.inputs
    chols, weights, jitters = [], [], []
    for i, kp in enumerate(params):
        K = kernel_matrix(X, X, kp)
        K[np.diag_indices_from(K)] = kp.signal_std**2  # exact prior on diagonal
        base = K + data.noise_std**2 * np.eye(data.count)
        L, jit = _chol_with_jitter(base, kp.signal_std)
        chols.append(L)
        weights.append(cho_solve((L, True), data.targets[:, i]))
        jitters.append(jit)
    return GpPosterior(
        kernels=tuple(params),
        inputs=X.copy(),
        chol=tuple(chols),
        weights=tuple(weights),
        noise_std=data.noise_std,
        jitter=tuple(jitters),
    )


def _chol_with_jitter(A: np.ndarray, signal_std: float):
    try:
        return cholesky(A, lower=True), 0.0
    except np.linalg.LinAlgError:
        pass
    jit = JITTER_INIT * signal_std**2
    limit = JITTER_MAX * signal_std**2
    while jit <= limit * (1 + 1e-12):
        try:
            L = cholesky(A + jit * np.eye(len(A)), lower=True)
            return L, jit
        except np.linalg.LinAlgError:
            jit *= 10.0
    raise IllConditionedKernelError(
        f"kernel matrix not SPD even with jitter {limit:.3e} "
        f"(= {JITTER_MAX:.0e} * signal_std^2); check hyperparameters/duplicates"
    )


def _query(gp: GpPosterior, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != gp.input_dim:
        raise ValueError(f"query dim {X.shape[1]} != trained dim {gp.input_dim}")
    return X, single


def predict_mean(gp: GpPosterior, x) -> np.ndarray:
    """Posterior mean, shape (n,) for a single state or (M, n) for a batch."""
    X, single = _query(gp, x)
    out = np.empty((len(X), gp.output_dim))
    for i in range(gp.output_dim):
        Ks = kernel_matrix(gp.inputs, X, gp.kernels[i])
        out[:, i] = Ks.T @ gp.weights[i]
    return out[0] if single else out


def predict_var(gp: GpPosterior, x) -> np.ndarray:
    """Posterior variance, shape (n,) or (M, n); small negatives clamp to 0."""
    X, single = _query(gp, x)
    out = np.empty((len(X), gp.output_dim))
    for i in range(gp.output_dim):
        kp = gp.kernels[i]
        Ks = kernel_matrix(gp.inputs, X, kp)
        V = solve_triangular(gp.chol[i], Ks, lower=True)
        var = kp.signal_std**2 - np.sum(V * V, axis=0)
        floor = -VAR_CLAMP_TOL * kp.signal_std**2
        if np.any(var < floor):
            raise RuntimeError(
                f"negative posterior variance {var.min():.3e} beyond round-off "
                f"tolerance {floor:.3e} in output dim {i}"
            )
        out[:, i] = np.maximum(var, 0.0)
    return out[0] if single else out


def max_std_bound(gp: GpPosterior, domain_grid: np.ndarray, chunk: int = 8192):
    """Componentwise max posterior std over a finite grid.

    Returns (rho_bar, norm) with rho_bar_i = max_x sqrt(var_i(x)).  Deterministic
    for a fixed grid; refinement can only increase the result.
    """
    grid = np.atleast_2d(np.asarray(domain_grid, dtype=float))
    if grid.size == 0:
        raise ValueError("domain grid must be nonempty")
    rho_bar = np.zeros(gp.output_dim)
    for start in range(0, len(grid), chunk):
        var = predict_var(gp, grid[start : start + chunk])
        rho_bar = np.maximum(rho_bar, np.sqrt(var).max(axis=0))
    return rho_bar, float(np.linalg.norm(rho_bar))


def compute_eta(rkhs_norm_bounds, info_gains, epsilon: float, count: int):
    """Uniform-error multiplier eta_i = sqrt(2 B_i^2 + 300 g_i log^3((N+1)/eps)).

    Returns (eta, norm).  Requires (N+1)/epsilon > 1 so the odd log power stays
    nonnegative.
    """
    B = np.asarray(rkhs_norm_bounds, dtype=float)
    g = np.asarray(info_gains, dtype=float)
    if B.shape != g.shape:
        raise ValueError("rkhs_norm_bounds and info_gains must have equal length")
    if np.any(B < 0) or np.any(g < 0):
        raise ValueError("rkhs_norm_bounds and info_gains must be nonnegative")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if count < 0:
        raise ValueError("count must be nonnegative")
    ratio = (count + 1) / epsilon
    if ratio <= 1:
        raise ValueError(f"(N+1)/epsilon = {ratio:.6g} must exceed 1")
    eta = np.sqrt(2.0 * B**2 + 300.0 * g * np.log(ratio) ** 3)
    return eta, float(np.linalg.norm(eta))


# ---------------------------------------------------------------------------
# serialization (single self-describing .npz, bit-exact float64 round trip)

SCHEMA_VERSION = 1


def save_model(gp: GpPosterior, path) -> None:
    payload = {
        "schema_version": np.array(SCHEMA_VERSION),
        "output_dim": np.array(gp.output_dim),
        "noise_std": np.array(gp.noise_std),
        "inputs": gp.inputs,
        "jitter": np.array(gp.jitter),
        "has_error_bound": np.array(gp.error_bound is not None),
    }
    for i in range(gp.output_dim):
        payload[f"signal_std_{i}"] = np.array(gp.kernels[i].signal_std)
        payload[f"lengthscales_{i}"] = gp.kernels[i].lengthscales
        payload[f"weights_{i}"] = gp.weights[i]
        payload[f"chol_{i}"] = gp.chol[i]
    if gp.error_bound is not None:
        eb = gp.error_bound
        payload["error_bound"] = np.array(
            [eb.eta_norm, eb.rho_bar_norm, eb.epsilon, float(eb.output_dim)]
        )
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_model(path) -> GpPosterior:
    with np.load(path) as data:
        version = int(data["schema_version"])
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported model schema version {version}")
        n = int(data["output_dim"])
        kernels = tuple(
            KernelParams(float(data[f"signal_std_{i}"]), data[f"lengthscales_{i}"])
            for i in range(n)
        )
        eb = None
        if bool(data["has_error_bound"]):
            raw = data["error_bound"]
            eb = ErrorBoundParams(float(raw[0]), float(raw[1]), float(raw[2]), int(raw[3]))
        return GpPosterior(
            kernels=kernels,
            inputs=data["inputs"],
            chol=tuple(data[f"chol_{i}"] for i in range(n)),
            weights=tuple(data[f"weights_{i}"] for i in range(n)),
            noise_std=float(data["noise_std"]),
            jitter=tuple(float(j) for j in data["jitter"]),
            error_bound=eb,
        )
