"""Command-line experiment runner: train | ensemble | verify-bound | uq."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .equations import KDV_PARAMETRIC
from .metrics import (UQ_BOX, EvalGrid, evaluate_model, generalization_error, uq_statistics, verify_bound,
                      write_report)
from .network import load_checkpoint, save_checkpoint
from .optimize import write_history
from .train import ExperimentConfig, ensemble_train, expand_grid, train_single

log = logging.getLogger("dispinn")

OUT_ENV = "DISPINN_OUT"


class CliError(Exception):
    pass


@dataclass
class RunManifest:
    experiment: str
    config: dict
    seeds: list[int]
    timings: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    version: str = __version__
    command: str = "train"

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_json())
        return path


def bundled_configs() -> list[str]:
    root = resources.files("dispinn") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def resolve_config(spec: str) -> tuple[ExperimentConfig, dict]:
    """Config from a JSON file, a run manifest, or the name of a bundled config."""
    path = Path(spec)
    if not path.is_file():
        if spec in bundled_configs():
            path = Path(str(resources.files("dispinn") / "configs" / f"{spec}.json"))
        else:
            raise CliError(f"config file not found: {spec}")
    try:
        data = json.loads(path.read_text())
        if "config" in data and "experiment" in data:
            return ExperimentConfig.from_dict(data["config"]), {}
        grid = data.get("grid", {}) or {}
        return ExperimentConfig.from_dict(data), grid
    except (ValueError, KeyError, TypeError) as exc:
        raise CliError(f"invalid config {path}: {exc}") from exc


def _out_dir(args) -> Path:
    out = Path(args.out_dir or os.environ.get(OUT_ENV, "runs"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _apply_overrides(config: ExperimentConfig, args) -> ExperimentConfig:
    if getattr(args, "max_iters", None) is not None:
        config = replace(config, max_iters=args.max_iters)
    return config


def write_solution_samples(params, config: ExperimentConfig, path, nx: int = 201, nt: int = 51) -> Path:
    """(x, t, u_pinn, u_exact) on a tensor grid; parametric problems use the parameter-box midpoint."""
    d = config.domain
    param = None
    if d.n_params:
        param = 0.5 * (np.asarray(d.param_low) + np.asarray(d.param_high))
    grid = EvalGrid(np.linspace(d.x_left, d.x_right, nx), np.linspace(0.0, d.T, nt))
    pts = grid.points(param)
    u = evaluate_model(params, pts)
    exact = config.equation.exact()
    ue = evaluate_model(exact, pts) if exact is not None else np.full(len(pts), np.nan)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "t", "u_pinn", "u_exact"])
        for (t, x), a, b in zip(pts[:, :2], u, ue):
            w.writerow([repr(float(x)), repr(float(t)), repr(float(a)), repr(float(b))])
    return path


def _result_timings(result) -> dict:
    per_iter = result.wall_time / result.iterations if result.iterations else 0.0
    return {"wall_clock_s": result.wall_time, "per_iteration_s": per_iter}


def cmd_train(args) -> int:
    config, _ = resolve_config(args.config)
    config = _apply_overrides(config, args)
    seed = config.seed_base if args.seed is None else args.seed
    out = _out_dir(args)
    stem = f"{config.name}_seed{seed}"
    start = time.perf_counter()
    result = train_single(config, seed)
    outputs = {
        "checkpoint": str(save_checkpoint(result.params, out / f"{stem}.ckpt")),
        "history": str(write_history(result.history, out / f"{stem}_history.csv")),
        "samples": str(write_solution_samples(result.params, config, out / f"{stem}_samples.csv")),
    }
    timings = _result_timings(result)
    timings["total_s"] = time.perf_counter() - start
    manifest = RunManifest(config.name, config.to_dict(), [seed], timings, outputs, command="train")
    outputs["manifest"] = str(out / f"{stem}_manifest.json")
    manifest.write(outputs["manifest"])
    print(f"{config.name} seed {seed}: {result.iterations} iterations ({result.reason}), "
          f"E_T = {result.breakdown.training_error:.4e}, E_G_rel = {result.e_g_rel}")
    return 0


def cmd_ensemble(args) -> int:
    base, grid = resolve_config(args.config)
    base = _apply_overrides(base, args)
    configs = expand_grid(base, grid)
    out = _out_dir(args)
    start = time.perf_counter()
    ens = ensemble_train(configs, jobs=args.jobs)
    best = ens.best
    stem = f"{base.name}_ensemble"
    outputs = {
        "table": str(ens.write_csv(out / f"{stem}.csv")),
        "checkpoint": str(save_checkpoint(best.params, out / f"{stem}_best.ckpt")),
        "history": str(write_history(best.history, out / f"{stem}_best_history.csv")),
        "samples": str(write_solution_samples(best.params, best.config, out / f"{stem}_best_samples.csv")),
    }
    seeds = sorted({c.seed_base + r for c in configs for r in range(c.n_theta)})
    timings = {"wall_clock_s": time.perf_counter() - start, "best_run": _result_timings(best)}
    manifest = RunManifest(base.name, best.config.to_dict(), seeds, timings, outputs, command="ensemble")
    outputs["manifest"] = str(out / f"{stem}_manifest.json")
    manifest.write(outputs["manifest"])
    print(f"{base.name}: {len(ens.rows)} runs, best config {ens.best_index} seed {best.seed}, "
          f"loss = {best.breakdown.total:.4e}, E_G_rel = {best.e_g_rel}")
    return 0


def _load_checkpoint(path, config: ExperimentConfig):
    if not Path(path).is_file():
        raise CliError(f"checkpoint not found: {path}")
    params = load_checkpoint(path)
    if params.arch.n_inputs != config.domain.input_dim:
        raise CliError(f"checkpoint has {params.arch.n_inputs} inputs, config expects {config.domain.input_dim}")
    return params


def cmd_verify_bound(args) -> int:
    config, _ = resolve_config(args.config)
    params = _load_checkpoint(args.checkpoint, config)
    out = _out_dir(args)
    spec = config.equation.spec()
    if spec.kind == KDV_PARAMETRIC:
        report = {"status": "not covered", "kind": spec.kind,
                  "reason": "no error bound is available for the parametric equation"}
    else:
        report = verify_bound(params, spec, config.equation.exact(), config.domain, EvalGrid.for_config(config))
    path = write_report(report, out / f"{config.name}_bound.json")
    print(f"{config.name}: {report['status']}" +
          (f", E_G = {report['E_G']:.4e} <= {report['bound_rhs']:.4e}: {report['satisfied']}"
           if report["status"] == "ok" else "") + f" -> {path}")
    return 0


def uq_table(model, exact, box, x, t, n_samples: int):
    mean, std = uq_statistics(model, box, x, t, n_samples)
    mean_e, std_e = uq_statistics(exact, box, x, t, n_samples)
    return mean, std, mean_e, std_e


def cmd_uq(args) -> int:
    config, _ = resolve_config(args.config)
    params = _load_checkpoint(args.checkpoint, config)
    if params.arch.n_inputs != 6:
        raise CliError("UQ needs a six-input checkpoint (t, x, alpha, beta, gamma, kappa)")
    d = config.domain
    box = (d.param_low, d.param_high) if d.n_params else UQ_BOX
    x = np.linspace(d.x_left, d.x_right, args.nx)
    t = np.linspace(0.0, d.T, args.nt)
    mean, std, mean_e, std_e = uq_table(params, config.equation.exact(), box, x, t, args.samples)
    out = _out_dir(args)
    path = out / f"{config.name}_uq.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "t", "mean_pinn", "std_pinn", "mean_exact", "std_exact"])
        for k, tk in enumerate(t):
            for i, xi in enumerate(x):
                w.writerow([repr(float(xi)), repr(float(tk)), repr(float(mean[k, i])), repr(float(std[k, i])),
                            repr(float(mean_e[k, i])), repr(float(std_e[k, i]))])
    e_g, e_g_rel = generalization_error(params, config.equation.exact(), EvalGrid.for_config(config))
    print(f"{config.name}: E_G_rel = {e_g_rel:.4e} -> {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dispinn", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="JSON config, run manifest, or bundled config name")
        sp.add_argument("--out-dir", default=None, help=f"output directory (default ${OUT_ENV} or ./runs)")

    sp = sub.add_parser("train", help="train one network")
    common(sp)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--max-iters", type=int, default=None)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("ensemble", help="ensemble training over the config grid")
    common(sp)
    sp.add_argument("--max-iters", type=int, default=None)
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_ensemble)

    sp = sub.add_parser("verify-bound", help="evaluate the error bound for a checkpoint")
    common(sp)
    sp.add_argument("--checkpoint", required=True)
    sp.set_defaults(func=cmd_verify_bound)

    sp = sub.add_parser("uq", help="mean/std fields of a parametric checkpoint")
    common(sp)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--samples", type=int, default=256)
    sp.add_argument("--nx", type=int, default=201)
    sp.add_argument("--nt", type=int, default=11)
    sp.set_defaults(func=cmd_uq)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "max_iters", None) is not None and args.max_iters < 0:
        print("dispinn: error: --max-iters must be non-negative", file=sys.stderr)
        return 2
    if getattr(args, "jobs", 1) < 1:
        print("dispinn: error: --jobs must be at least 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (CliError, FileNotFoundError, ValueError) as exc:
        print(f"dispinn: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
