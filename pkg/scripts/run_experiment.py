"""Train a bundled (or user) config for a few seeds and verify the error bound on the best model.

    python scripts/run_experiment.py kdv_single --seeds 5 --out runs/kdv_single
"""
import argparse
from dataclasses import replace
from pathlib import Path

from dispinn.cli import resolve_config, write_solution_samples
from dispinn.equations import KDV_PARAMETRIC
from dispinn.metrics import EvalGrid, verify_bound, write_report
from dispinn.network import save_checkpoint
from dispinn.optimize import write_history
from dispinn.train import ensemble_train


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--max-iters", type=int, default=None)
    ap.add_argument("--out", default="runs")
    args = ap.parse_args()

    cfg, _ = resolve_config(args.config)
    cfg = replace(cfg, n_theta=args.seeds)
    if args.max_iters is not None:
        cfg = replace(cfg, max_iters=args.max_iters)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    ens = ensemble_train([cfg])
    ens.write_csv(out / f"{cfg.name}_seeds.csv")
    best = ens.best
    save_checkpoint(best.params, out / f"{cfg.name}_best.ckpt")
    write_history(best.history, out / f"{cfg.name}_best_history.csv")
    write_solution_samples(best.params, cfg, out / f"{cfg.name}_best_samples.csv")
    for row in ens.rows:
        print(f"seed {row['seed']}: {row['iters']} iters, {row['wall_time_s']} s, "
              f"E_T {float(row['E_T']):.3e}, E_G_rel {float(row['E_G_rel']):.3e}")
    print(f"best seed {best.seed}: E_G_rel = {best.e_g_rel:.3e}")

    spec = cfg.equation.spec()
    if spec.kind != KDV_PARAMETRIC:
        report = verify_bound(best.params, spec, cfg.equation.exact(), cfg.domain,
                              EvalGrid.for_config(cfg, refine=2))
        write_report(report, out / f"{cfg.name}_bound.json")
        print(f"bound: E_G = {report['E_G']:.3e} <= {report['bound_rhs']:.3e}: {report['satisfied']}")


if __name__ == "__main__":
    main()
