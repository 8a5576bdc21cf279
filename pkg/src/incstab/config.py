"""Experiment configuration: one YAML file drives the whole pipeline.

The config is a plain-data schema (lists and floats, no arrays) so it
round-trips losslessly through YAML; `build_*` helpers turn sections into the
domain objects the library consumes.  Input signals come from a closed catalog
(zero, constant, sinusoid) so the external-input set W and its supremum norm
are auditable from the config alone.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field

import numpy as np
import yaml

from .barrier import PNormBarrier
from .controller import Gains, parse_mode, validate_gains
from .domains import Box
from .gp import KernelParams
from .plants import TwoLinkArm, TwoLinkParams

__all__ = [
    "ExperimentConfig",
    "ScenarioConfig",
    "SignalConfig",
    "load_config",
    "dump_config",
    "config_hash",
]

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SignalConfig:
    """One entry of the closed input-signal catalog."""

    kind: str = "zero"
    value: list = field(default_factory=list)      # constant
    amplitude: list = field(default_factory=list)  # sinusoid
    phase: list = field(default_factory=list)      # sinusoid

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "sinusoid"):
            raise ValueError(f"unknown input signal kind {self.kind!r}")
        if self.kind == "sinusoid" and len(self.amplitude) != len(self.phase):
            raise ValueError("sinusoid needs amplitude and phase of equal length")

    def build(self, m: int):
        """Callable t -> v(t) in R^m."""
        if self.kind == "zero":
            zero = np.zeros(m)
            return lambda t: zero
        if self.kind == "constant":
            vec = np.asarray(self.value, dtype=float)
            if vec.size != m:
                raise ValueError(f"constant signal needs {m} channels")
            return lambda t: vec
        amp = np.asarray(self.amplitude, dtype=float)
        ph = np.asarray(self.phase, dtype=float)
        if amp.size != m:
            raise ValueError(f"sinusoid signal needs {m} channels")
        return lambda t: amp * np.sin(t + ph)

    def channel_bound(self, m: int) -> np.ndarray:
        """Per-channel amplitude bound; defines the compact input set W."""
        if self.kind == "zero":
            return np.zeros(m)
        if self.kind == "constant":
            return np.abs(np.asarray(self.value, dtype=float))
        return np.abs(np.asarray(self.amplitude, dtype=float))


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    x0: list
    y0: list
    input_x: SignalConfig = field(default_factory=SignalConfig)
    input_y: SignalConfig = field(default_factory=SignalConfig)


@dataclass(frozen=True)
class ExperimentConfig:
    schema_version: int = SCHEMA_VERSION
    seed: int = 0
    output_dir: str = "out"

    # plant
    plant_kind: str = "two-link"
    plant_params: dict = field(default_factory=dict)

    # barrier / state space: the admissible set is {h >= 0} inside the
    # barrier's box hull
    barrier_exponent: int = 20
    barrier_half_widths: list = field(
        default_factory=lambda: [float(np.pi / 2), float(np.pi / 2), 0.2, 0.2]
    )
    alpha_coeff: float = 1.0

    # training-data collection; the sampling domain is the barrier box scaled
    # by `scale` and restricted to {h >= superlevel} (the relaxed safe set)
    sample_count: int = 800
    sample_dt: float = 1e-3
    sampling_scale: float = 1.95
    sampling_superlevel: float | None = -0.95
    noise_std: float = 0.01

    # per-output-dimension kernels
    kernels: list = field(
        default_factory=lambda: [
            {"signal_std": 115.0, "lengthscales": [1.54, 0.541, 136.0, 120.0]},
            {"signal_std": 186.0, "lengthscales": [1.77, 0.489, 122.0, 131.0]},
        ]
    )

    # controller
    lambda1: float = 1.5
    lambda2: float = 503.0
    theta: float = 0.001
    mode: str = "learned"

    # model-error bound: either a direct value for ||eta|| ||rho_bar|| or the
    # RKHS-norm route (rkhs_norms + info_gains)
    error_bound_direct: float | None = 0.19
    rkhs_norms: list = field(default_factory=list)
    info_gains: list = field(default_factory=list)
    epsilon: float = 0.01

    # grid resolutions
    state_grid_points: int = 25
    input_grid_points: int = 9
    rho_bar_grid_points: int = 25

    # simulation
    sim_dt: float = 1e-3
    horizon: float = 10.0
    exit_tolerance: float = 0.05
    safety_margin_tol: float = 0.01
    sandwich_samples: int = 100000

    scenarios: list = field(
        default_factory=lambda: [
            ScenarioConfig(
                name="case-study",
                x0=[-1.5, 0.5, 0.01, 0.01],
                y0=[1.5, -0.5, -0.01, -0.01],
                input_x=SignalConfig(
                    kind="sinusoid", amplitude=[1.0, 1.0], phase=[0.0, float(np.pi / 2)]
                ),
                input_y=SignalConfig(
                    kind="sinusoid", amplitude=[1.0, 1.0], phase=[float(np.pi / 2), 0.0]
                ),
            )
        ]
    )

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(f"unsupported config schema version {self.schema_version}")
        parse_mode(self.mode)
        if self.error_bound_direct is None and not self.rkhs_norms:
            raise ValueError("need error_bound_direct or rkhs_norms + info_gains")
        validate_gains(self.gains())

    # ----- builders ------------------------------------------------------

    def plant(self):
        if self.plant_kind != "two-link":
            raise ValueError(f"unknown plant kind {self.plant_kind!r}")
        return TwoLinkArm(TwoLinkParams(**self.plant_params))

    def barrier(self) -> PNormBarrier:
        return PNormBarrier(self.barrier_exponent, np.asarray(self.barrier_half_widths))

    def gains(self) -> Gains:
        return Gains(self.lambda1, self.lambda2, self.theta)

    def kernel_params(self) -> list[KernelParams]:
        return [
            KernelParams(float(k["signal_std"]), np.asarray(k["lengthscales"], float))
            for k in self.kernels
        ]

    def state_box(self) -> Box:
        return self.barrier().box()

    def sampling_box(self) -> Box:
        return self.state_box().scaled(self.sampling_scale)

    def input_box(self) -> Box | None:
        """Bounding box of W from all scenario signals; None if W = {0}."""
        m = self.plant().m
        bound = np.zeros(m)
        for sc in self.scenarios:
            bound = np.maximum(bound, sc.input_x.channel_bound(m))
            bound = np.maximum(bound, sc.input_y.channel_bound(m))
        if np.all(bound == 0):
            return None
        return Box(-bound, bound)

    def input_grid(self) -> np.ndarray:
        box = self.input_box()
        if box is None:
            return np.zeros((1, self.plant().m))
        return box.uniform_grid(self.input_grid_points)


def _to_plain(obj):
    if isinstance(obj, dict):
        return {k: _to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def dump_config(cfg: ExperimentConfig) -> str:
    data = _to_plain(asdict(cfg))
    return yaml.safe_dump(data, sort_keys=True)


def _scenario_from_dict(d: dict) -> ScenarioConfig:
    d = dict(d)
    for key in ("input_x", "input_y"):
        if key in d and isinstance(d[key], dict):
            d[key] = SignalConfig(**d[key])
    return ScenarioConfig(**d)


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    if "scenarios" in data:
        data["scenarios"] = [
            _scenario_from_dict(s) if isinstance(s, dict) else s
            for s in data["scenarios"]
        ]
    return ExperimentConfig(**data)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"config file {path} must contain a mapping")
    return config_from_dict(data)


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(dump_config(cfg).encode()).hexdigest()[:16]
