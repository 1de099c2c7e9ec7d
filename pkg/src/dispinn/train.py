"""Experiment configuration, loss assembly, single training runs and ensembles."""
from __future__ import annotations

import csv
import itertools
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from functools import partial
from multiprocessing import get_context
from pathlib import Path
from typing import Any, Callable, Sequence

import jax
import jax.numpy as jnp
import numpy as np

from . import exact
from .equations import (BENJAMIN_ONO, KDV_PARAMETRIC, EquationSpec, NetworkField, ResidualBundle,
                        ResidualProgram)
from .network import Architecture, MlpParams, init_params, weight_mask
from .optimize import LbfgsState, NonFiniteLoss, minimize
from .sampling import Domain, TrainingSet, build_grid_training_set, build_training_set

log = logging.getLogger(__name__)


def _kdv_param(x, t, alpha, beta, gamma, kappa):
    return exact.kdv_param_exact(x, t, alpha, beta, gamma, kappa)


# exact solutions by name: (factory(**params) -> u(x, t, *p))
SOLUTIONS: dict[str, Callable[..., Callable]] = {
    "kdv_single": lambda: exact.kdv_single,
    "kdv_double": lambda a=0.5, b=1.0: partial(exact.kdv_double, a=a, b=b),
    "kdv_param": lambda: _kdv_param,
    "kawahara_single": lambda x0=0.0: partial(exact.kawahara_single, x0=x0),
    "ch_single": lambda k=0.6, p=1.0, x0=0.0: exact.CHSingle(k, p, x0),
    "ch_double": lambda **kw: exact.CHDouble(**kw),
    "bo_periodic_single": lambda L=15.0, c=0.25, x0=0.0: partial(exact.bo_periodic_single, L=L, c=c, x0=x0),
    "bo_line_double": lambda c1=2.0, c2=1.0: partial(exact.bo_line_double, c1=c1, c2=c2),
}


@dataclass(frozen=True)
class EquationConfig:
    kind: str
    alpha: float = 1.0
    beta: float = 0.0
    drift: bool = False
    kappa: float = 0.0
    hilbert: str = "periodic"
    solution: str | None = None
    solution_params: dict = field(default_factory=dict)

    def exact(self) -> Callable | None:
        if self.solution is None:
            return None
        if self.solution not in SOLUTIONS:
            raise ValueError(f"unknown exact solution {self.solution!r}")
        return SOLUTIONS[self.solution](**self.solution_params)

    def spec(self) -> EquationSpec:
        return EquationSpec(self.kind, self.alpha, self.beta, self.drift, self.kappa, self.hilbert,
                            self.exact())


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one training run (one grid point of an ensemble).

    ``grid_half`` and ``grid_ratio`` describe the Cartesian interior used
    for Benjamin-Ono (2N+1 space nodes, dt = ratio * dx); ``n_int`` is then
    ignored.  ``eval_nx`` x ``eval_nt`` is the trapezoid grid for E_G, and
    ``eval_params`` the number of Sobol parameter samples for the
    parametric problem.
    """

    name: str
    equation: EquationConfig
    domain: Domain
    n_int: int
    n_sb: int
    n_tb: int
    hidden_layers: int
    width: int
    lam: float
    lam_reg: float = 0.0
    q: int = 2
    n_theta: int = 1
    seed_base: int = 0
    max_iters: int = 1000
    grid_half: int | None = None
    grid_ratio: float | None = None
    eval_nx: int = 401
    eval_nt: int = 101
    eval_params: int = 64

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.lam_reg < 0:
            raise ValueError("lambda_reg must be non-negative")
        if self.q not in (1, 2):
            raise ValueError("q must be 1 or 2")
        if self.n_theta < 1:
            raise ValueError("n_theta must be at least 1")
        if self.hidden_layers < 1 or self.width < 1:
            raise ValueError("need at least one hidden layer of positive width")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")
        if self.equation.kind == BENJAMIN_ONO and (self.grid_half is None or self.grid_ratio is None):
            raise ValueError("Benjamin-Ono needs grid_half and grid_ratio")

    @property
    def architecture(self) -> Architecture:
        d = self.domain
        shift = [0.5 * d.T, 0.5 * (d.x_left + d.x_right)]
        scale = [0.5 * d.T, 0.5 * d.length]
        for lo, hi in zip(d.param_low, d.param_high):
            shift.append(0.5 * (lo + hi))
            scale.append(0.5 * (hi - lo) if hi > lo else 1.0)
        widths = (d.input_dim,) + (self.width,) * self.hidden_layers + (1,)
        return Architecture(widths, tuple(shift), tuple(scale))

    def training_set(self) -> TrainingSet:
        if self.equation.kind == BENJAMIN_ONO:
            return build_grid_training_set(self.domain, self.grid_half, self.grid_ratio, self.n_sb, self.n_tb)
        return build_training_set(self.domain, self.n_int, self.n_sb, self.n_tb)

    # --- serialisation ---------------------------------------------------

    def to_dict(self) -> dict:
        out = asdict(self)
        out["domain"] = {"x_left": self.domain.x_left, "x_right": self.domain.x_right, "T": self.domain.T,
                         "param_low": list(self.domain.param_low), "param_high": list(self.domain.param_high)}
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known - {"grid"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        data.pop("grid", None)
        eq = data["equation"]
        unknown = set(eq) - {f.name for f in fields(EquationConfig)}
        if unknown:
            raise ValueError(f"unknown equation keys: {sorted(unknown)}")
        data["equation"] = EquationConfig(**eq)
        dom = dict(data["domain"])
        dom["param_low"] = tuple(dom.get("param_low", ()))
        dom["param_high"] = tuple(dom.get("param_high", ()))
        data["domain"] = Domain(**dom)
        return cls(**data)


def load_config(path) -> tuple[ExperimentConfig, dict]:
    """Read a JSON config; returns the base config and its (possibly empty) ensemble grid."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    data = json.loads(path.read_text())
    grid = data.get("grid", {}) or {}
    return ExperimentConfig.from_dict(data), grid


def expand_grid(base: ExperimentConfig, grid: dict[str, Sequence]) -> list[ExperimentConfig]:
    """Cartesian product of the grid values (keys in sorted order, values in given order)."""
    if not grid:
        return [base]
    keys = sorted(grid)
    known = {f.name for f in fields(ExperimentConfig)}
    bad = set(keys) - known
    if bad:
        raise ValueError(f"unknown grid keys: {sorted(bad)}")
    return [replace(base, **dict(zip(keys, values))) for values in itertools.product(*(grid[k] for k in keys))]


# ---------------------------------------------------------------------------
# loss


@dataclass(frozen=True)
class LossBreakdown:
    e_tb2: float
    e_sb2: float
    e_int2: float
    lam: float
    j_reg: float = 0.0
    lam_reg: float = 0.0

    @property
    def total(self) -> float:
        return self.e_tb2 + self.e_sb2 + self.lam * self.e_int2 + self.lam_reg * self.j_reg

    @property
    def training_error(self) -> float:
        """E_T: root of the weighted residual sums with lambda inside, regulariser excluded."""
        return float(np.sqrt(self.e_tb2 + self.e_sb2 + self.lam * self.e_int2))


def squared_sums(r_int, r_sb, r_tb, tset: TrainingSet):
    """Quadrature-weighted squared residual sums (e_tb^2, e_sb^2, e_int^2)."""
    e_tb = jnp.sum(tset.temporal_weights * jnp.sum(r_tb ** 2, axis=1))
    e_sb = jnp.sum(tset.spatial_weights * jnp.sum(r_sb ** 2, axis=1))
    e_int = jnp.sum(tset.interior_weights * r_int ** 2)
    return e_tb, e_sb, e_int


def bundle_sums(bundle: ResidualBundle, tset: TrainingSet) -> tuple[float, float, float]:
    return tuple(float(v) for v in squared_sums(bundle.interior, bundle.spatial, bundle.temporal_components, tset))


class LossProgram:
    """Jitted loss and gradient for one (config, training set)."""

    def __init__(self, config: ExperimentConfig, tset: TrainingSet | None = None):
        self.config = config
        self.set = tset if tset is not None else config.training_set()
        self.arch = config.architecture
        self.program = ResidualProgram(config.equation.spec(), self.set)
        self.mask = jnp.asarray(weight_mask(self.arch.widths))

        def parts(theta):
            r = self.program.components(NetworkField(theta, self.arch))
            e_tb, e_sb, e_int = squared_sums(*r, self.set)
            w = theta[self.mask]
            j_reg = jnp.sum(jnp.abs(w) ** config.q)
            total = e_tb + e_sb + config.lam * e_int + config.lam_reg * j_reg
            return total, (e_tb, e_sb, e_int, j_reg)

        self._value_and_grad = jax.jit(jax.value_and_grad(parts, has_aux=True))
        self._parts = jax.jit(parts)
        self.evaluations = 0

    def __call__(self, theta) -> tuple[float, np.ndarray]:
        (total, _), g = self._value_and_grad(jnp.asarray(theta))
        self.evaluations += 1
        return float(total), np.asarray(g)

    def breakdown(self, theta) -> LossBreakdown:
        _, (e_tb, e_sb, e_int, j_reg) = self._parts(jnp.asarray(theta))
        return LossBreakdown(float(e_tb), float(e_sb), float(e_int), self.config.lam, float(j_reg),
                             self.config.lam_reg)

    def residual_bundle(self, theta) -> ResidualBundle:
        return self.program.bundle(MlpParams(self.arch, np.asarray(theta)))


def assemble_loss(params: MlpParams, config: ExperimentConfig,
                  tset: TrainingSet | None = None) -> tuple[LossBreakdown, np.ndarray]:
    prog = LossProgram(config, tset)
    if params.arch.widths != prog.arch.widths:
        raise ValueError("parameters do not match the configured architecture")
    _, g = prog(params.theta)
    return prog.breakdown(params.theta), g


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainResult:
    config: ExperimentConfig
    seed: int
    params: MlpParams
    breakdown: LossBreakdown
    history: list[float]
    iterations: int
    wall_time: float
    reason: str
    e_g: float | None = None
    e_g_rel: float | None = None


def train_single(config: ExperimentConfig, seed: int, program: LossProgram | None = None,
                 evaluate: bool = True, callback: Callable | None = None) -> TrainResult:
    """Initialise with ``seed``, run L-BFGS for ``config.max_iters`` iterations, report the breakdown."""
    prog = program or LossProgram(config)
    params = init_params(prog.arch, seed)
    start = time.perf_counter()
    try:
        res = minimize(prog, params.theta, config.max_iters, LbfgsState(), callback)
        theta, history, iters, reason = res.theta, res.history, res.iterations, res.reason
    except NonFiniteLoss as exc:
        log.warning("seed %d: %s", seed, exc)
        theta, history, iters, reason = params.theta, [], 0, "non_finite"
    wall = time.perf_counter() - start
    trained = params.with_theta(theta)
    result = TrainResult(config, seed, trained, prog.breakdown(theta), history, iters, wall, reason)
    if evaluate and config.equation.solution is not None:
        from .metrics import EvalGrid, generalization_error
        result.e_g, result.e_g_rel = generalization_error(trained, config.equation.exact(),
                                                          EvalGrid.for_config(config))
    return result


RESULT_COLUMNS = ["config_id", "seed", "iters", "wall_time_s", "E_T", "E_G", "E_G_rel", "loss", "lam",
                  "hidden_layers", "width", "status"]


@dataclass
class EnsembleResult:
    best: TrainResult
    best_index: int
    rows: list[dict]

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS)
            w.writeheader()
            for row in self.rows:
                w.writerow(row)
        return path


def _run_one(args):
    index, config, seed = args
    try:
        return index, train_single(config, seed), None
    except Exception as exc:  # recorded and skipped
        log.exception("run %d seed %d failed", index, seed)
        return index, None, repr(exc)


def _row(index, config, seed, result, error) -> dict:
    if result is None:
        return {"config_id": index, "seed": seed, "iters": 0, "wall_time_s": "", "E_T": "", "E_G": "",
                "E_G_rel": "", "loss": "", "lam": config.lam, "hidden_layers": config.hidden_layers,
                "width": config.width, "status": f"failed: {error}"}
    nan = float("nan")
    return {"config_id": index, "seed": seed, "iters": result.iterations,
            "wall_time_s": f"{result.wall_time:.3f}", "E_T": repr(result.breakdown.training_error),
            "E_G": repr(result.e_g if result.e_g is not None else nan),
            "E_G_rel": repr(result.e_g_rel if result.e_g_rel is not None else nan),
            "loss": repr(result.breakdown.total), "lam": config.lam, "hidden_layers": config.hidden_layers,
            "width": config.width, "status": result.reason}


def ensemble_train(configs: Sequence[ExperimentConfig], jobs: int = 1) -> EnsembleResult:
    """Train every config ``n_theta`` times; select the smallest training loss.

    Ties are broken by (grid index, seed).  Failed runs are recorded and
    skipped; if every run fails a RuntimeError is raised.
    """
    if not configs:
        raise ValueError("empty configuration grid")
    tasks = [(i, c, c.seed_base + r) for i, c in enumerate(configs) for r in range(c.n_theta)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs, mp_context=get_context("spawn")) as pool:
            outcomes = list(pool.map(_run_one, tasks))
    else:
        outcomes = [_run_one(t) for t in tasks]
    rows, best, best_key, best_index = [], None, None, None
    for (index, config, seed), (_, result, error) in zip(tasks, outcomes):
        rows.append(_row(index, config, seed, result, error))
        if result is None:
            continue
        key = (result.breakdown.total, index, seed)
        if best_key is None or key < best_key:
            best, best_key, best_index = result, key, index
    if best is None:
        raise RuntimeError("every ensemble run failed")
    return EnsembleResult(best, best_index, rows)
