"""Generalization errors, mixed sup norms, error-bound evaluation and UQ statistics."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import jax
import jax.numpy as jnp
import numpy as np

from .equations import (BENJAMIN_ONO, CAMASSA_HOLM, KDV_KAWAHARA, EquationSpec, FDField, ResidualProgram,
                        as_field)
from .network import MlpParams, mlp_apply, mlp_jet
from .sampling import Domain, TrainingSet, sobol_points, spatial_grid, trapezoid_weights

CHUNK = 16384


# ---------------------------------------------------------------------------
# evaluation grids and E_G


@dataclass(frozen=True)
class EvalGrid:
    """Tensor grid x * t (trapezoid weights) times optional parameter samples (equal weights)."""

    x: np.ndarray
    t: np.ndarray
    params: np.ndarray | None = None

    @classmethod
    def for_config(cls, config, refine: int = 1) -> "EvalGrid":
        d = config.domain
        x = np.linspace(d.x_left, d.x_right, refine * (config.eval_nx - 1) + 1)
        t = np.linspace(0.0, d.T, refine * (config.eval_nt - 1) + 1)
        params = None
        if d.n_params:
            params = d.params_from_unit(sobol_points(config.eval_params, d.n_params))
        return cls(x, t, params)

    @property
    def weights(self) -> np.ndarray:
        """(n_t, n_x) trapezoid weights."""
        return np.outer(trapezoid_weights(self.t), trapezoid_weights(self.x))

    def points(self, param=None) -> np.ndarray:
        tt, xx = np.meshgrid(self.t, self.x, indexing="ij")
        pts = np.column_stack([tt.ravel(), xx.ravel()])
        if param is not None:
            pts = np.column_stack([pts, np.broadcast_to(param, (len(pts), len(param)))])
        return pts

    def param_list(self):
        return [None] if self.params is None else list(self.params)


def evaluate_model(model, points: np.ndarray) -> np.ndarray:
    """Pointwise values of a network (chunked) or of a callable u(x, t, *params)."""
    points = np.asarray(points, dtype=float)
    if isinstance(model, MlpParams):
        f = jax.jit(lambda th, p: mlp_apply(th, model.arch, p))
        theta = jnp.asarray(model.theta)
        return np.concatenate([np.asarray(f(theta, points[i:i + CHUNK]))
                               for i in range(0, len(points), CHUNK)]) if len(points) else np.zeros(0)
    return np.asarray(model(points[:, 1], points[:, 0], *points[:, 2:].T), dtype=float)


def generalization_error(params, exact: Callable, grid: EvalGrid) -> tuple[float, float]:
    """(E_G, E_G / ||u||) by trapezoid rule in (x, t), averaged over parameter samples."""
    w = grid.weights.ravel()
    err2 = norm2 = 0.0
    plist = grid.param_list()
    for p in plist:
        pts = grid.points(p)
        u = evaluate_model(exact, pts)
        v = evaluate_model(params, pts)
        err2 += float(np.sum(w * (u - v) ** 2))
        norm2 += float(np.sum(w * u ** 2))
    err2 /= len(plist)
    norm2 /= len(plist)
    e_g = math.sqrt(err2)
    return e_g, (e_g / math.sqrt(norm2) if norm2 > 0 else float("inf"))


# ---------------------------------------------------------------------------
# mixed sup norms


def derivative_sups(fn, domain: Domain, m: int, n: int, resolution: int = 512,
                    hx: float = 1e-2, ht: float = 1e-3) -> np.ndarray:
    """``sups[i, j] = max |d_t^i d_x^j fn|`` over a resolution x resolution grid."""
    x = np.linspace(domain.x_left, domain.x_right, resolution)
    t = np.linspace(0.0, domain.T, resolution)
    tt, xx = np.meshgrid(t, x, indexing="ij")
    pts = np.column_stack([tt.ravel(), xx.ravel()])
    needs = tuple((i, j) for i in range(m + 1) for j in range(n + 1))
    sups = np.zeros((m + 1, n + 1))
    if isinstance(fn, MlpParams):
        theta = jnp.asarray(fn.theta)
        jet_fn = jax.jit(lambda th, p: [mlp_jet(th, fn.arch, p, (m, n)).derivative(i, j) for i, j in needs])
        for k in range(0, len(pts), CHUNK):
            vals = jet_fn(theta, pts[k:k + CHUNK])
            for (i, j), v in zip(needs, vals):
                sups[i, j] = max(sups[i, j], float(jnp.max(jnp.abs(jnp.asarray(v)))))
        return sups
    fld = fn if hasattr(fn, "partials") else FDField(fn, hx, ht)
    d = fld.partials(pts, needs)
    for (i, j) in needs:
        sups[i, j] = float(np.max(np.abs(np.asarray(d[(i, j)]))))
    return sups


def sup_norms(fn, domain: Domain, m: int, n: int, resolution: int = 512) -> float:
    """``||fn||_{C_t^m C_x^n}``: the sum over i <= m, j <= n of sup |d_t^i d_x^j fn|."""
    return float(np.sum(derivative_sups(fn, domain, m, n, resolution)))


def mixed_norm(sups: np.ndarray, m: int, n: int) -> float:
    return float(np.sum(sups[:m + 1, :n + 1]))


# ---------------------------------------------------------------------------
# bounds


@dataclass
class BoundInputs:
    """Inputs to the error bounds.

    ``norms_exact`` / ``norms_model`` map ``(m, n)`` to ``||.||_{C_t^m C_x^n}``.
    The proof-level form uses the residual integrals ``r_tb2 = int R_tb^2``,
    ``r_sb2 = (int R_sb1^2 dt, ...)`` and ``r_int2 = int int R_int^2``; the
    theorem form uses the training errors and, when given, the quadrature
    tails ``c_quad[k] * N_k^-alpha_k``.
    """

    T: float
    norms_exact: dict
    norms_model: dict
    r_tb2: float = 0.0
    r_sb2: Sequence[float] = ()
    r_int2: float = 0.0
    e_tb: float = 0.0
    e_sb: float = 0.0
    e_int: float = 0.0
    kappa: float = 0.0
    drift: bool = False
    counts: dict = field(default_factory=dict)     # {"tb": N_tb, "sb": N_sb, "int": N_int}
    rates: dict = field(default_factory=dict)      # {"tb": alpha_tb, ...}
    c_quad: dict = field(default_factory=dict)     # {"tb": C_quad^tb, ...}

    def __post_init__(self):
        values = [self.T, self.r_tb2, self.r_int2, self.e_tb, self.e_sb, self.e_int, *self.r_sb2,
                  *self.norms_exact.values(), *self.norms_model.values()]
        if any(not np.isfinite(v) or v < 0 for v in values):
            raise ValueError("bound inputs must be finite and non-negative")


BOUND_NORMS = {
    KDV_KAWAHARA: ((0, 0), (0, 1), (0, 4)),
    CAMASSA_HOLM: ((0, 1), (0, 2), (0, 3), (1, 1)),
    BENJAMIN_ONO: ((0, 0), (0, 1), (0, 2)),
}


def _gronwall(C: float, T: float, integrated: bool = True) -> float:
    return (T + 2 * C * T ** 2 * math.exp(2 * C * T)) if integrated else (1 + 2 * C * T * math.exp(2 * C * T))


def proof_constants(theorem: str, b: BoundInputs) -> dict:
    u, us = b.norms_exact, b.norms_model
    if theorem == KDV_KAWAHARA:
        c2 = 0.5 * u[(0, 0)] + 0.5
        if b.drift:
            # the transport term u_x adds (u^2 / 2) at both ends
            c2 += 0.5
        return {"C1": u[(0, 4)] + us[(0, 4)], "C2": c2, "C3": us[(0, 1)] + 0.5 * u[(0, 1)] + 0.5}
    if theorem == CAMASSA_HOLM:
        return {"C1": us[(1, 1)] + u[(1, 1)] + u[(0, 1)] * (us[(0, 1)] + u[(0, 1)]),
                "C2": abs(b.kappa) + us[(0, 2)] + u[(0, 2)],
                "C3": 0.5 + 3 * us[(0, 1)] + 1.5 * u[(0, 3)]}
    if theorem == BENJAMIN_ONO:
        return {"C1": us[(0, 2)] + u[(0, 2)] + u[(0, 0)] * (u[(0, 0)] + us[(0, 0)]),
                "C2": 0.5 + us[(0, 1)] + 0.5 * u[(0, 1)]}
    raise ValueError(f"no bound for {theorem!r}")


def theorem_constants(theorem: str, b: BoundInputs) -> dict:
    u, us, T = b.norms_exact, b.norms_model, b.T
    if theorem == KDV_KAWAHARA:
        c4 = us[(0, 1)] + 0.5 * u[(0, 1)] + 0.5
        return {"C1": math.sqrt(_gronwall(c4, T)), "C2": math.sqrt(u[(0, 0)] + 1),
                "C3": math.sqrt(10 * (us[(0, 4)] + u[(0, 4)]) * math.sqrt(T)), "C4": c4}
    if theorem == CAMASSA_HOLM:
        c4 = 0.5 + 3 * us[(0, 1)] + 1.5 * u[(0, 3)]
        inner = 2 * us[(1, 1)] + 2 * u[(1, 1)] + 2 * u[(0, 1)] * (us[(0, 1)] + u[(0, 1)])
        return {"C1": math.sqrt(_gronwall(c4, T)),
                "C2": math.sqrt(2 * (abs(b.kappa) + us[(0, 2)] + u[(0, 2)])),
                "C3": 2 * T ** 0.25 * math.sqrt(inner), "C4": c4}
    if theorem == BENJAMIN_ONO:
        c3 = 0.5 + us[(0, 1)] + 0.5 * u[(0, 1)]
        inner = 2 * (us[(0, 2)] + u[(0, 2)]) + 2 * u[(0, 0)] * (u[(0, 0)] + us[(0, 0)])
        return {"C1": math.sqrt(_gronwall(c3, T)), "C2": T ** 0.25 * math.sqrt(inner), "C3": c3}
    raise ValueError(f"no bound for {theorem!r}")


def _tail(b: BoundInputs, key: str, power: float) -> float:
    if key not in b.c_quad or key not in b.rates or key not in b.counts:
        return 0.0
    return b.c_quad[key] ** power * b.counts[key] ** (-b.rates[key] * power)


def bound_rhs(theorem: str, inputs: BoundInputs, form: str = "theorem") -> float:
    """Right-hand side of the error bound on E_G.

    ``form="theorem"`` is the printed statement
    ``C1 (E_tb + E_int + C2 E_sb + C3 E_sb^1/2 + tails)`` (Benjamin-Ono:
    ``C1 (E_tb + E_int + C2 E_sb^1/2 + tails)``) with quadrature tails only
    where constants and rates are given.  ``form="proof"`` is the square root
    of the proof-level inequality
    ``E_G^2 <= G(T) (int R_tb^2 + a C1 T^1/2 sum_i (int R_sbi^2)^1/2 + 2 C2 sum_i int R_sbi^2 + int int R_int^2)``
    with a = 10 (KdV-Kawahara), 8 (Camassa-Holm) and 2 (Benjamin-Ono, no C2
    term), evaluated on the residual integrals.
    """
    b = inputs
    if form == "proof":
        C = proof_constants(theorem, b)
        sb_roots = sum(math.sqrt(v) for v in b.r_sb2)
        sb_sum = sum(b.r_sb2)
        rt = math.sqrt(b.T)
        if theorem == KDV_KAWAHARA:
            inner = b.r_tb2 + 10 * C["C1"] * rt * sb_roots + 2 * C["C2"] * sb_sum + b.r_int2
            g = _gronwall(C["C3"], b.T)
        elif theorem == CAMASSA_HOLM:
            inner = b.r_tb2 + 8 * C["C1"] * rt * sb_roots + 2 * C["C2"] * sb_sum + b.r_int2
            g = _gronwall(C["C3"], b.T)
        else:
            inner = b.r_tb2 + 2 * C["C1"] * rt * sb_roots + b.r_int2
            g = _gronwall(C["C2"], b.T)
        return math.sqrt(g * inner)
    if form != "theorem":
        raise ValueError("form must be 'proof' or 'theorem'")
    C = theorem_constants(theorem, b)
    tails = _tail(b, "tb", 0.5) + _tail(b, "int", 0.5)
    if theorem == BENJAMIN_ONO:
        body = b.e_tb + b.e_int + C["C2"] * math.sqrt(b.e_sb)
        tails += C["C2"] * _tail(b, "sb", 0.25)
    else:
        body = b.e_tb + b.e_int + C["C2"] * b.e_sb + C["C3"] * math.sqrt(b.e_sb)
        tails += C["C2"] * _tail(b, "sb", 0.5) + C["C3"] * _tail(b, "sb", 0.25)
    return C["C1"] * (body + tails)


# ---------------------------------------------------------------------------
# residual integrals on an independent grid


def integration_set(spec: EquationSpec, domain: Domain, nx: int = 257, nt: int = 129, nb: int = 513,
                    n_half: int = 256) -> TrainingSet:
    """Tensor-product trapezoid 'training set' for residual integrals.

    Benjamin-Ono uses 2N+1 equispaced space nodes (the discrete transform
    needs the full period); the others use ``nx`` nodes.
    """
    x = spatial_grid(domain.x_left, domain.x_right, n_half) if spec.kind == BENJAMIN_ONO else \
        np.linspace(domain.x_left, domain.x_right, nx)
    t = np.linspace(0.0, domain.T, nt)
    tt, xx = np.meshgrid(t, x, indexing="ij")
    interior = np.column_stack([tt.ravel(), xx.ravel()])
    w_int = np.outer(trapezoid_weights(t), trapezoid_weights(x)).ravel()
    tb_ = np.linspace(0.0, domain.T, nb)
    left = np.column_stack([tb_, np.full(nb, domain.x_left)])
    right = np.column_stack([tb_, np.full(nb, domain.x_right)])
    x0 = np.linspace(domain.x_left, domain.x_right, 4 * (nb - 1) + 1)
    temporal = np.column_stack([np.zeros_like(x0), x0])
    return TrainingSet(domain, interior, w_int, left, right, trapezoid_weights(tb_), temporal,
                       trapezoid_weights(x0), grid_shape=(nt, len(x)))


def residual_integrals(params, spec: EquationSpec, domain: Domain, **grid) -> dict:
    """int R_tb^2 dx, int R_sbi^2 dt per component, and int int R_int^2 on an independent grid."""
    s = integration_set(spec, domain, **grid)
    b = ResidualProgram(spec, s).bundle(params)
    return {"r_tb2": float(np.sum(s.temporal_weights * np.sum(b.temporal_components ** 2, axis=1))),
            "r_sb2": [float(np.sum(s.spatial_weights * b.spatial[:, k] ** 2)) for k in range(b.spatial.shape[1])],
            "r_int2": float(np.sum(s.interior_weights * b.interior ** 2))}


def verify_bound(params: MlpParams, spec: EquationSpec, exact: Callable, domain: Domain,
                 eval_grid: EvalGrid, training: dict | None = None, resolution: int = 256,
                 grid: dict | None = None) -> dict:
    """Bound-verification report: E_G, residual integrals, constants, RHS and the verdict."""
    if spec.kind not in BOUND_NORMS:
        return {"status": "not covered", "kind": spec.kind}
    needed = BOUND_NORMS[spec.kind]
    m = max(i for i, _ in needed)
    n = max(j for _, j in needed)
    sups_u = derivative_sups(exact, domain, m, n, resolution)
    sups_m = derivative_sups(params, domain, m, n, resolution)
    norms_u = {k: mixed_norm(sups_u, *k) for k in needed}
    norms_m = {k: mixed_norm(sups_m, *k) for k in needed}
    integrals = residual_integrals(params, spec, domain, **(grid or {}))
    training = dict(training or {})
    if not training:
        # without training errors the statement is evaluated on the integrals themselves
        training = {"e_tb": math.sqrt(integrals["r_tb2"]), "e_sb": math.sqrt(sum(integrals["r_sb2"])),
                    "e_int": math.sqrt(integrals["r_int2"])}
    inputs = BoundInputs(domain.T, norms_u, norms_m, integrals["r_tb2"], integrals["r_sb2"], integrals["r_int2"],
                         kappa=spec.kappa, drift=spec.drift, **training)
    e_g, e_g_rel = generalization_error(params, exact, eval_grid)
    rhs = bound_rhs(spec.kind, inputs, "proof")
    report = {"status": "ok", "kind": spec.kind, "E_G": e_g, "E_G_rel": e_g_rel,
              "residual_integrals": integrals,
              "norms_exact": {f"C{k[0]}_t C{k[1]}_x": v for k, v in norms_u.items()},
              "norms_model": {f"C{k[0]}_t C{k[1]}_x": v for k, v in norms_m.items()},
              "constants": proof_constants(spec.kind, inputs),
              "bound_rhs": rhs, "satisfied": bool(e_g <= rhs),
              "bound_rhs_theorem": bound_rhs(spec.kind, inputs, "theorem"),
              "theorem_constants": theorem_constants(spec.kind, inputs)}
    return report


def write_report(report: dict, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report, indent=2, sort_keys=True))
    return path


# ---------------------------------------------------------------------------
# UQ


UQ_BOX = ((8.7, -0.4, 0.9, 0.9), (9.3, 0.4, 1.1, 1.1))


def parameter_samples(low, high, n_samples: int) -> np.ndarray:
    low, high = np.asarray(low, dtype=float), np.asarray(high, dtype=float)
    return low + sobol_points(n_samples, len(low)) * (high - low)


def uq_statistics(model, box, x, t, n_samples: int):
    """Pointwise mean and standard deviation over Sobol parameter samples.

    ``model`` is a six-input network or a callable ``u(x, t, a, b, g, k)``.
    Returns ``(mean, std)`` with shape ``(len(t), len(x))``.
    """
    if isinstance(model, MlpParams) and model.arch.n_inputs != 6:
        raise ValueError("UQ statistics need a six-input network (t, x, alpha, beta, gamma, kappa)")
    low, high = box
    samples = parameter_samples(low, high, n_samples)
    x, t = np.asarray(x, dtype=float), np.asarray(t, dtype=float)
    grid = EvalGrid(x, t)
    shift = None
    acc = np.zeros((len(t), len(x)))
    acc2 = np.zeros_like(acc)
    for p in samples:
        v = evaluate_model(model, grid.points(p)).reshape(len(t), len(x))
        # shifted sums: identical samples give exactly zero variance
        shift = v if shift is None else shift
        acc += v - shift
        acc2 += (v - shift) ** 2
    d = acc / n_samples
    var = np.maximum(acc2 / n_samples - d ** 2, 0.0)
    return shift + d, np.sqrt(var)
