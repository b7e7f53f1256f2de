"""Sample-quality and diagnostic measures.

The squared maximum mean discrepancy uses the biased V-statistic with the
diagonal included:

    mmd2(X, Y) = mean(k(X, X)) + mean(k(Y, Y)) - 2 mean(k(X, Y)),

which can be slightly negative for the polynomial kernel; values are
reported as-is.  Reference sample sets are Langevin chains with a recorded
protocol, cached on disk keyed by a hash of (target id, protocol).
"""

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kernels import PolynomialKernel
from .samplers import RunTrace, lmc_reference
from .targets import TargetDensity

CACHE_ENV_VAR = "PARVI_CACHE_DIR"

DEFAULT_PROTOCOL = {
    "eps": 1e-3,
    "n_steps": 100_000,
    "m": 5000,
    "seed": 1234,
    "init_mean": 0.0,
    "init_scale": 1.0,
}


def mmd2(x, y, kernel: PolynomialKernel | None = None) -> float:
    """Squared MMD between sample sets x (N, d) and y (M, d)."""
    if kernel is None:
        kernel = PolynomialKernel()
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if x.shape[1] != y.shape[1]:
        raise ValueError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    return float(
        kernel.gram(x, x).mean() + kernel.gram(y, y).mean()
        - 2.0 * kernel.gram(x, y).mean()
    )


def steady_state(trace: RunTrace, tol: float) -> int | None:
    """First iteration n >= 1 with |F(n) - F(n-1)| < tol, else None."""
    f = trace.column("free_energy")
    for i in range(1, len(f)):
        if abs(f[i] - f[i - 1]) < tol:
            return int(trace.records[i]["iteration"])
    return None


def trace_summary(
    trace: RunTrace, steady_tol: float = 1e-5
) -> dict:
    """Final-state aggregation of a run trace."""
    last = trace.last
    return {
        "iterations": int(last["iteration"]),
        "final_free_energy": last["free_energy"],
        "final_mmd2": last["mmd2"],
        "steady_state_iteration": steady_state(trace, steady_tol),
        "interaction_grad_evals": int(last["interaction_grad_evals"]),
        "potential_grad_evals": int(last["potential_grad_evals"]),
        "energy_evals": int(last["energy_evals"]),
        "wall_ms": last["wall_ms"],
    }


# ---------------------------------------------------------------------------
# reference samples
# ---------------------------------------------------------------------------

@dataclass
class ReferenceSamples:
    samples: np.ndarray            # (M, d)
    provenance: dict               # target id, protocol, hash

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        if self.samples.shape[0] < 1:
            raise ValueError("reference set must contain at least one sample")
        for key in ("target", "protocol", "hash"):
            if key not in self.provenance:
                raise ValueError(f"provenance missing {key!r}")


def protocol_hash(target_id: str, protocol: dict) -> str:
    payload = json.dumps(
        {"target": target_id, "protocol": protocol}, sort_keys=True
    ).encode()
    return hashlib.sha256(payload).hexdigest()[:16]


def cache_dir(explicit: str | Path | None = None) -> Path:
    if explicit is not None:
        return Path(explicit)
    env = os.environ.get(CACHE_ENV_VAR)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "parvi"


def reference_paths(directory: Path, digest: str) -> tuple[Path, Path]:
    return directory / f"reference_{digest}.npy", directory / f"reference_{digest}.json"


def save_reference(ref: ReferenceSamples, directory: Path) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    npy_path, json_path = reference_paths(directory, ref.provenance["hash"])
    tmp = npy_path.with_name(npy_path.stem + ".tmp.npy")  # np.save enforces .npy
    np.save(tmp, ref.samples)
    os.replace(tmp, npy_path)
    tmp_json = json_path.with_suffix(".json.tmp")
    tmp_json.write_text(json.dumps(ref.provenance, indent=2, sort_keys=True) + "\n")
    os.replace(tmp_json, json_path)
    return npy_path


def load_reference(directory: Path, digest: str) -> ReferenceSamples | None:
    npy_path, json_path = reference_paths(directory, digest)
    if not (npy_path.exists() and json_path.exists()):
        return None
    provenance = json.loads(json_path.read_text())
    if provenance.get("hash") != digest:
        return None
    return ReferenceSamples(np.load(npy_path), provenance)


def get_reference(
    target: TargetDensity,
    target_id: str,
    protocol: dict | None = None,
    directory: str | Path | None = None,
) -> ReferenceSamples:
    """Load the cached reference for (target_id, protocol) or generate it."""
    proto = dict(DEFAULT_PROTOCOL)
    if protocol:
        proto.update(protocol)
    digest = protocol_hash(target_id, proto)
    directory = cache_dir(directory)
    cached = load_reference(directory, digest)
    if cached is not None:
        return cached
    samples = lmc_reference(
        target,
        m=int(proto["m"]),
        eps=float(proto["eps"]),
        n_steps=int(proto["n_steps"]),
        seed=int(proto["seed"]),
        init_mean=proto["init_mean"],
        init_scale=float(proto["init_scale"]),
    )
    ref = ReferenceSamples(
        samples, {"target": target_id, "protocol": proto, "hash": digest}
    )
    save_reference(ref, directory)
    return ref
