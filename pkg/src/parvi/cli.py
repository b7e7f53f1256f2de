"""Experiment harness: ``parvi sample | reference | blr | compare``.

Each command reads a flat JSON config (or flags), runs the requested
sampler(s), and writes delimited output plus rendered figures into the
output directory:

* ``sample``    -> trace.csv, particles_final.csv, summary.json, fig_*.png
* ``reference`` -> <out>.npy + <out>.json provenance sidecar (+ scatter)
* ``blr``       -> blr_repeats.csv, blr_summary.json, fig_blr.png
* ``compare``   -> compare_long.csv, compare_table.csv, per-run outputs,
                   overlay figures

Exit codes: 0 success, 2 malformed config/input, 3 numerical abort.
All CSVs are comma-separated with '.' decimals, LF line endings, a header
row, and a leading ``# config_hash=... seed=...`` comment line.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .config import (
    ConfigError,
    ExperimentConfig,
    build_blr_dataset,
    build_init,
    build_sampler_config,
    build_target,
)
from .core import DivergenceError, EvalCounters, gaussian_init, make_rng
from .datasets import train_test_split
from .kernels import PolynomialKernel
from .metrics import (
    DEFAULT_PROTOCOL,
    get_reference,
    mmd2,
    protocol_hash,
    trace_summary,
)
from .samplers import lmc_reference, run
from .targets import LogisticRegressionTarget

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def atomic_write_text(path: Path, text: str):
    tmp = path.with_name(path.name + f".tmp-{os.getpid()}")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_trace_csv(trace, path: Path, config_hash: str, seed: int):
    lines = [f"# config_hash={config_hash} seed={seed}"]
    lines.append(",".join(trace.FIELDS))
    for rec in trace.records:
        lines.append(",".join(_fmt(rec[k]) for k in trace.FIELDS))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_particles_csv(positions, path: Path, config_hash: str, seed: int):
    positions = np.asarray(positions)
    d = positions.shape[1]
    lines = [f"# config_hash={config_hash} seed={seed}"]
    lines.append(",".join(f"x{i}" for i in range(d)))
    for row in positions:
        lines.append(",".join(repr(float(v)) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_json(data: dict, path: Path):
    atomic_write_text(path, json.dumps(data, indent=2, sort_keys=True) + "\n")


def _load_reference_samples(cfg: ExperimentConfig, target, target_id):
    """Reference samples per config.metrics: explicit path, or LMC protocol."""
    mspec = cfg.metrics or {}
    path = mspec.get("reference")
    if path:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"reference file not found: {path}")
        if p.suffix == ".npy":
            return np.load(p)
        return np.loadtxt(p, delimiter=",", comments="#", skiprows=1)
    protocol = mspec.get("protocol")
    if protocol is not None:
        ref = get_reference(target, target_id, protocol, mspec.get("cache_dir"))
        return ref.samples
    return None


def execute_run(cfg: ExperimentConfig, out_dir: Path | None, make_figures=True):
    """Shared body of sample/compare: build, run, persist; returns artifacts."""
    target, target_id = build_target(cfg.target)
    sampler_cfg = build_sampler_config(cfg.sampler, cfg.seed)
    init = build_init(cfg.init, target.dim, cfg.seed)
    reference = _load_reference_samples(cfg, target, target_id)
    cadence = int((cfg.metrics or {}).get("cadence", 10))

    mmd_fn = None
    if reference is not None:
        if reference.shape[1] != target.dim:
            raise ConfigError(
                f"reference dimension {reference.shape[1]} != target {target.dim}"
            )
        kernel = PolynomialKernel()
        mmd_fn = lambda x: mmd2(x, reference, kernel)  # noqa: E731

    counters = EvalCounters()
    trace, final = run(
        sampler_cfg, target, init,
        counters=counters, mmd_fn=mmd_fn, mmd_cadence=cadence,
    )
    summary = trace_summary(
        trace,
        steady_tol=sampler_cfg.steady_state_tol or 1e-5,
    )
    summary.update(
        {
            "config_hash": cfg.hash(),
            "seed": cfg.seed,
            "scheme": sampler_cfg.scheme,
            "target": target_id,
            "n_particles": init.n_particles,
        }
    )

    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        write_trace_csv(trace, out_dir / "trace.csv", cfg.hash(), cfg.seed)
        write_particles_csv(
            final.positions, out_dir / "particles_final.csv", cfg.hash(), cfg.seed
        )
        write_json(summary, out_dir / "summary.json")
        (out_dir / "config.json").write_text(cfg.serialize())
        if make_figures:
            from . import plots

            plots.save_trace_figure(
                trace, out_dir / "fig_trace.png",
                title=f"{sampler_cfg.scheme} on {target_id}",
            )
            plots.save_particles_figure(
                final.positions, out_dir / "fig_particles.png", target=target,
                title=f"{sampler_cfg.scheme}: final particles",
            )
    return trace, final, summary, target


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_sample(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.cadence is not None:
        cfg.metrics["cadence"] = args.cadence
    out_dir = Path(args.out or cfg.output_dir or "runs/sample")
    _, _, summary, _ = execute_run(cfg, out_dir, make_figures=not args.no_figures)
    print(f"wrote {out_dir}/trace.csv  (final free energy "
          f"{summary['final_free_energy']:.6g}, "
          f"mmd2 {summary['final_mmd2']})")
    return EXIT_OK


def cmd_reference(args) -> int:
    if args.m < 1:
        print("error: --m must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    target, target_id = build_target({"name": args.target, "dim": args.dim})
    protocol = dict(DEFAULT_PROTOCOL)
    protocol.update(
        {
            "eps": args.eps,
            "n_steps": args.steps,
            "m": args.m,
            "seed": args.seed if args.seed is not None else DEFAULT_PROTOCOL["seed"],
        }
    )
    digest = protocol_hash(target_id, protocol)
    out = Path(args.out)
    sidecar = out.with_suffix(".json")
    if out.exists() and sidecar.exists():
        prov = json.loads(sidecar.read_text())
        if prov.get("hash") == digest:
            print(f"cache hit: {out} already holds protocol {digest}")
            return EXIT_OK
    out.parent.mkdir(parents=True, exist_ok=True)
    samples = lmc_reference(
        target, m=protocol["m"], eps=protocol["eps"],
        n_steps=protocol["n_steps"], seed=protocol["seed"],
        init_mean=protocol["init_mean"], init_scale=protocol["init_scale"],
    )
    provenance = {"target": target_id, "protocol": protocol, "hash": digest}
    tmp = out.with_name(out.stem + ".tmp.npy")
    np.save(tmp, samples)
    os.replace(tmp, out)
    write_json(provenance, sidecar)
    if not args.no_figures and samples.shape[1] == 2:
        from . import plots

        plots.save_particles_figure(
            samples, out.with_suffix(".png"), target=target,
            title=f"reference samples: {target_id}",
        )
    print(f"wrote {out} ({samples.shape[0]} samples, hash {digest})")
    return EXIT_OK


def _blr_metrics(target: LogisticRegressionTarget, omegas, features, labels):
    proba = target.predict_proba(omegas, features)
    proba = np.clip(proba, 1e-12, 1.0 - 1e-12)
    ll = float(np.mean(np.where(labels > 0, np.log(proba), np.log1p(-proba))))
    pred = np.where(proba > 0.5, 1.0, -1.0)
    acc = float(np.mean(pred == labels))
    return ll, acc


def cmd_blr(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.dataset is not None:
        cfg.target["dataset"] = args.dataset
    if cfg.target.get("name") != "blr":
        raise ConfigError("blr command requires a config with target.name == 'blr'")
    repeats = args.repeats if args.repeats is not None else int(
        cfg.target.get("repeats", 20)
    )
    split = args.split if args.split is not None else float(
        cfg.target.get("train_fraction", 0.8)
    )
    out_dir = Path(args.out or cfg.output_dir or "runs/blr")
    out_dir.mkdir(parents=True, exist_ok=True)

    dataset = build_blr_dataset(cfg.target)
    prior_alpha = float(cfg.target.get("prior_alpha", 1.0))
    n_particles = int(cfg.init.get("n_particles", 100))

    per_repeat = []
    for rep in range(repeats):
        rep_seed = cfg.seed + rep
        rng = make_rng(rep_seed)
        train, test = train_test_split(dataset, split, rng)
        target = LogisticRegressionTarget(
            train.features, train.labels, prior_alpha=prior_alpha
        )
        sampler_cfg = build_sampler_config(cfg.sampler, rep_seed)
        init = gaussian_init(
            n_particles, target.dim, mean=0.0, cov_scale=prior_alpha,
            rng=make_rng(rep_seed + 10_000),
        )
        counters = EvalCounters()
        trace, final = run(sampler_cfg, target, init, counters=counters)
        train_ll, train_acc = _blr_metrics(
            target, final.positions, train.features, train.labels
        )
        test_ll, test_acc = _blr_metrics(
            target, final.positions, test.features, test.labels
        )
        per_repeat.append(
            {
                "repeat": rep,
                "seed": rep_seed,
                "n_train": train.n,
                "n_test": test.n,
                "train_log_likelihood": train_ll,
                "train_accuracy": train_acc,
                "test_log_likelihood": test_ll,
                "test_accuracy": test_acc,
                "final_free_energy": trace.last["free_energy"],
                "interaction_grad_evals": counters.interaction_grad_evals,
                "wall_ms": trace.last["wall_ms"],
            }
        )
        print(
            f"repeat {rep}: test acc {test_acc:.4f}, train ll {train_ll:.4f}"
        )

    fields = list(per_repeat[0].keys())
    lines = [f"# config_hash={cfg.hash()} seed={cfg.seed}"]
    lines.append(",".join(fields))
    for rec in per_repeat:
        lines.append(",".join(_fmt(rec[k]) for k in fields))
    atomic_write_text(out_dir / "blr_repeats.csv", "\n".join(lines) + "\n")

    def mean_stderr(key):
        vals = np.array([r[key] for r in per_repeat], dtype=np.float64)
        stderr = float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
        return {"mean": float(vals.mean()), "stderr": stderr}

    aggregate = {
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "repeats": repeats,
        "train_fraction": split,
        "scheme": cfg.sampler.get("scheme"),
        "n_particles": n_particles,
        "test_accuracy": mean_stderr("test_accuracy"),
        "train_log_likelihood": mean_stderr("train_log_likelihood"),
        "test_log_likelihood": mean_stderr("test_log_likelihood"),
    }
    write_json(aggregate, out_dir / "blr_summary.json")
    if not args.no_figures:
        from . import plots

        plots.save_blr_figure(per_repeat, out_dir / "fig_blr.png")
    print(
        f"test accuracy {aggregate['test_accuracy']['mean']:.4f} "
        f"+/- {aggregate['test_accuracy']['stderr']:.4f} over {repeats} repeats"
    )
    return EXIT_OK


def cmd_compare(args) -> int:
    out_dir = Path(args.out or "runs/compare")
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    long_rows = []
    overlays = []
    failures = []
    for path in args.configs:
        label = Path(path).stem
        try:
            cfg = ExperimentConfig.load(path)
            if args.seed is not None:
                cfg.seed = args.seed
            trace, final, summary, _ = execute_run(
                cfg, out_dir / label, make_figures=not args.no_figures
            )
        except (ConfigError, OSError) as exc:
            print(f"error in {label}: {exc}", file=sys.stderr)
            failures.append(label)
            continue
        except (DivergenceError, FloatingPointError) as exc:
            print(f"numerical abort in {label}: {exc}", file=sys.stderr)
            failures.append(label)
            continue
        overlays.append((label, trace))
        rows.append(
            {
                "method": label,
                "config_hash": summary["config_hash"],
                "scheme": summary["scheme"],
                "n_particles": summary["n_particles"],
                "iterations": summary["iterations"],
                "steady_state_iteration": summary["steady_state_iteration"],
                "wall_s": (summary["wall_ms"] or 0.0) / 1e3,
                "final_free_energy": summary["final_free_energy"],
                "final_mmd2": summary["final_mmd2"],
                "interaction_grad_evals": summary["interaction_grad_evals"],
            }
        )
        for rec in trace.records:
            long_rows.append(
                (
                    label,
                    rec["iteration"],
                    rec["wall_ms"],
                    rec["free_energy"],
                    rec["mmd2"],
                    rec["interaction_grad_evals"],
                )
            )

    if long_rows:
        lines = ["method,iteration,wall_ms,free_energy,mmd2,interaction_grad_evals"]
        for row in long_rows:
            lines.append(row[0] + "," + ",".join(_fmt(v) for v in row[1:]))
        atomic_write_text(out_dir / "compare_long.csv", "\n".join(lines) + "\n")
    if rows:
        fields = list(rows[0].keys())
        lines = [",".join(fields)]
        for rec in rows:
            lines.append(",".join(_fmt(rec[k]) for k in fields))
        atomic_write_text(out_dir / "compare_table.csv", "\n".join(lines) + "\n")
        write_json({"rows": rows, "failures": failures}, out_dir / "compare_table.json")
    if overlays and not args.no_figures:
        from . import plots

        plots.save_compare_figures(overlays, out_dir)
    if failures:
        print(f"{len(failures)} run(s) failed: {failures}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="parvi",
        description="Particle-based variational inference experiment harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="run one sampler config")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--cadence", type=int, default=None, help="MMD^2 cadence")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("reference", help="generate LMC reference samples")
    p.add_argument("--target", required=True,
                   help="double_banana | star_mixture | eight_mixture | gaussian")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--m", type=int, default=5000)
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--steps", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="output .npy path")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_reference)

    p = sub.add_parser("blr", help="Bayesian logistic regression experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--dataset", default=None, help="override dataset path")
    p.add_argument("--split", type=float, default=None, help="train fraction")
    p.add_argument("--repeats", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_blr)

    p = sub.add_parser("compare", help="run several configs and tabulate")
    p.add_argument("--configs", nargs="+", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, FloatingPointError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
