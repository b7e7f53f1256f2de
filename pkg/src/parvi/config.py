"""Experiment configuration: a flat JSON document that fully determines a
run (target, sampler, initialization, metrics, seed).

``parse(serialize(cfg)) == cfg`` holds exactly, and the config hash written
into every output file is the SHA-256 of the canonical JSON serialization.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import ParticleSet, gaussian_init, make_rng
from .datasets import load_dataset, synthetic_separable
from .optim import InnerSolverConfig
from .samplers import SamplerConfig
from .targets import (
    DoubleBanana,
    LogisticRegressionTarget,
    TargetDensity,
    ZeroPotential,
    eight_mixture,
    gaussian_target,
    star_mixture,
)


class ConfigError(ValueError):
    """Malformed experiment configuration."""


@dataclass
class ExperimentConfig:
    target: dict
    sampler: dict
    init: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    output_dir: str | None = None
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {"target", "sampler", "init", "metrics", "output_dir", "seed"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "target" not in data or "sampler" not in data:
            raise ConfigError("config must define 'target' and 'sampler'")
        return cls(
            target=dict(data["target"]),
            sampler=dict(data["sampler"]),
            init=dict(data.get("init", {})),
            metrics=dict(data.get("metrics", {})),
            output_dir=data.get("output_dir"),
            seed=int(data.get("seed", 0)),
        )

    def serialize(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def parse(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.parse(Path(path).read_text())

    def save(self, path):
        Path(path).write_text(self.serialize())

    def hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:12]


TOY_TARGETS = ("double_banana", "star_mixture", "eight_mixture", "gaussian",
               "zero_potential")


def build_target(spec: dict) -> tuple[TargetDensity, str]:
    """Instantiate the target named in the spec; returns (target, target_id)."""
    if "name" not in spec:
        raise ConfigError("target spec needs a 'name'")
    name = spec["name"]
    if name == "double_banana":
        return DoubleBanana(), "double_banana"
    if name == "star_mixture":
        return star_mixture(), "star_mixture"
    if name == "eight_mixture":
        return eight_mixture(), "eight_mixture"
    if name == "zero_potential":
        dim = int(spec.get("dim", 2))
        return ZeroPotential(dim), f"zero_potential_d{dim}"
    if name == "gaussian":
        dim = int(spec.get("dim", 2))
        mean = spec.get("mean", 0.0)
        var = float(spec.get("variance", 1.0))
        return gaussian_target(dim, mean, var), f"gaussian_d{dim}_m{mean}_v{var}"
    if name == "blr":
        ds = build_blr_dataset(spec)
        target = LogisticRegressionTarget(
            ds.features, ds.labels, prior_alpha=float(spec.get("prior_alpha", 1.0))
        )
        return target, f"blr_{spec.get('dataset', 'synthetic')}"
    raise ConfigError(f"unknown target {name!r}")


def build_blr_dataset(spec: dict):
    dataset = spec.get("dataset", "synthetic")
    standardize = bool(spec.get("standardize", True))
    bias = bool(spec.get("bias", True))
    if dataset == "synthetic":
        syn = spec.get("synthetic", {})
        return synthetic_separable(
            n=int(syn.get("n", 1000)),
            p=int(syn.get("p", 5)),
            margin=float(syn.get("margin", 1.0)),
            noise=float(syn.get("noise", 0.0)),
            seed=int(syn.get("seed", 0)),
            standardize_features=standardize,
            bias=bias,
        )
    kwargs = {"standardize_features": standardize, "bias": bias}
    if str(dataset).endswith(".csv"):
        kwargs["label_column"] = spec.get("label_column")
    try:
        return load_dataset(dataset, **kwargs)
    except OSError as exc:
        raise ConfigError(f"cannot read dataset {dataset!r}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"bad dataset {dataset!r}: {exc}") from exc


def build_sampler_config(spec: dict, seed: int) -> SamplerConfig:
    inner_spec = dict(spec.get("inner", {}))
    try:
        inner = InnerSolverConfig(
            max_iters=int(inner_spec.get("max_iters", 20)),
            grad_tol=float(inner_spec.get("grad_tol", 1e-8)),
            lr=float(inner_spec.get("lr", 0.1)),
            bb_clamp=tuple(inner_spec.get("bb_clamp", (1e-10, 1e3))),
            bb_fallback_step=inner_spec.get("bb_fallback_step"),
        )
        mb = spec.get("minibatch_size")
        tol = spec.get("steady_state_tol", 1e-5)  # explicit null disables
        return SamplerConfig(
            scheme=spec["scheme"],
            tau_or_lr=float(spec["tau_or_lr"]),
            n_outer=int(spec["n_outer"]),
            shift_c=float(spec.get("shift_c", 5.0)),
            bandwidth_h=float(spec.get("bandwidth_h", 0.1)),
            inner=inner,
            inner_solver=spec.get("inner_solver", "bb"),
            steady_state_tol=None if tol is None else float(tol),
            seed=seed,
            minibatch_size=None if mb is None else int(mb),
        )
    except KeyError as exc:
        raise ConfigError(f"sampler spec missing {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad sampler spec: {exc}") from exc


def build_init(spec: dict, dim: int, seed: int) -> ParticleSet:
    n = int(spec.get("n_particles", 500))
    mean = spec.get("mean", 0.0)
    if isinstance(mean, list):
        mean = np.asarray(mean, dtype=np.float64)
    cov_scale = float(spec.get("cov_scale", 1.0))
    try:
        return gaussian_init(n, dim, mean=mean, cov_scale=cov_scale, rng=make_rng(seed))
    except ValueError as exc:
        raise ConfigError(f"bad init spec: {exc}") from exc
