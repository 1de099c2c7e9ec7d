"""Interior, spatial-boundary and temporal-boundary residuals.

A residual is written once in terms of the partial derivatives of a *field*
at a set of points.  Two kinds of field exist: a network (derivatives from
Taylor jets, differentiable in theta) and :class:`FDField`, which wraps any
pointwise function and differentiates it with central finite differences.
The second one is how exact solutions are pushed through the same residual
code.

Rows of every point array are ``(t, x, params...)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial
from typing import Callable, Mapping

import jax
import jax.numpy as jnp
import numpy as np

from .network import Architecture, MlpParams, mlp_jet
from .sampling import TrainingSet
from .spectral import hilbert_line, hilbert_periodic

KDV_KAWAHARA = "kdv_kawahara"
CAMASSA_HOLM = "camassa_holm"
BENJAMIN_ONO = "benjamin_ono"
KDV_PARAMETRIC = "kdv_parametric"
KINDS = (KDV_KAWAHARA, CAMASSA_HOLM, BENJAMIN_ONO, KDV_PARAMETRIC)

# data handle names per kind, in residual-component order
SPATIAL_DATA = {
    KDV_KAWAHARA: ("h1", "h2", "h3", "h4", "h5"),
    CAMASSA_HOLM: ("h1", "h2", "h3", "h4"),
    BENJAMIN_ONO: (),
    KDV_PARAMETRIC: (),
}
# (face, x-derivative order) of each data handle
_TRACE = {
    KDV_KAWAHARA: (("left", 0), ("right", 0), ("left", 1), ("right", 1), ("right", 2)),
    CAMASSA_HOLM: (("left", 0), ("right", 0), ("left", 2), ("right", 2)),
}


@dataclass(frozen=True)
class EquationSpec:
    """PDE, coefficients and data.

    ``solution(x, t, *params)`` is an exact solution used as the default
    source of boundary and initial data.  ``data`` overrides individual
    handles: ``h1``..``h5`` are called as ``h(t, *params)`` on the boundary
    times, ``u0`` and ``u0_x`` as ``u0(x, *params)`` on the initial points.
    With neither, data are zero.

    ``hilbert`` selects the Benjamin-Ono transform, ``"periodic"`` (period
    = domain length, periodicity residual) or ``"line"`` (zero extension,
    Dirichlet traces on both faces).
    """

    kind: str
    alpha: float = 1.0
    beta: float = 0.0
    drift: bool = False
    kappa: float = 0.0
    hilbert: str = "periodic"
    solution: Callable | None = None
    data: Mapping[str, Callable] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown equation kind {self.kind!r}")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if self.hilbert not in ("periodic", "line"):
            raise ValueError("hilbert must be 'periodic' or 'line'")
        allowed = set(SPATIAL_DATA[self.kind]) | {"u0", "u0_x", "left", "right"}
        unknown = set(self.data) - allowed
        if unknown:
            raise ValueError(f"unknown data handles {sorted(unknown)} for {self.kind}")

    @property
    def line(self) -> bool:
        return self.kind == BENJAMIN_ONO and self.hilbert == "line"

    def needs(self) -> dict[str, tuple[tuple[int, int], ...]]:
        """Partial derivatives (i, j) = d_t^i d_x^j used by each residual."""
        if self.kind in (KDV_KAWAHARA, KDV_PARAMETRIC):
            interior = [(0, 0), (1, 0), (0, 1), (0, 3)]
            if self.kind == KDV_KAWAHARA and self.beta:
                interior.append((0, 5))
            return {"interior": tuple(interior), "spatial": ((0, 0), (0, 1), (0, 2)),
                    "temporal": ((0, 0),)}
        if self.kind == CAMASSA_HOLM:
            return {"interior": ((0, 0), (1, 0), (1, 2), (0, 1), (0, 2), (0, 3)),
                    "spatial": ((0, 0), (0, 2)), "temporal": ((0, 0), (0, 1))}
        return {"interior": ((0, 0), (1, 0), (0, 1), (0, 2), (0, 3)), "spatial": ((0, 0),),
                "temporal": ((0, 0),)}

    def jet_degrees(self) -> tuple[tuple[int, int], tuple[int, ...]]:
        return degrees_for(self.needs()["interior"])


def degrees_for(needs) -> tuple[tuple[int, int], tuple[int, ...]]:
    """Smallest jet degrees and row profile covering the requested partials."""
    I = max(i for i, _ in needs)
    J = max(j for _, j in needs)
    rows = [max([j for i, j in needs if i >= r], default=0) for r in range(I + 1)]
    return (I, J), tuple(rows)


# ---------------------------------------------------------------------------
# fields


class NetworkField:
    """Partials of ``u_theta`` from Taylor jets; traceable in ``theta``."""

    def __init__(self, theta, arch: Architecture):
        self.theta = theta
        self.arch = arch

    def partials(self, points, needs) -> dict:
        degrees, rows = degrees_for(needs)
        jet = mlp_jet(self.theta, self.arch, points, degrees, rows)
        n = len(points)
        # structural zeros come back as 0 or as scalars
        return {(i, j): jnp.broadcast_to(jnp.asarray(jet.derivative(i, j), dtype=float), (n,))
                for i, j in needs}


@lru_cache(maxsize=None)
def fd_weights(order: int, half_width: int) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference weights on offsets -h..h, exact for polynomials of degree 2h."""
    offsets = np.arange(-half_width, half_width + 1, dtype=float)
    V = np.vander(offsets, offsets.size, increasing=True).T
    rhs = np.zeros(offsets.size)
    rhs[order] = factorial(order)
    return offsets, np.linalg.solve(V, rhs)


def fd_derivative(fn: Callable, z, order: int, h: float):
    if order == 0:
        return fn(z)
    offsets, w = fd_weights(order, order // 2 + 4)
    # the weights sum to zero; differencing against the centre keeps constants exact
    f0 = fn(z)
    return sum(wk * (fn(z + ok * h) - f0) for ok, wk in zip(offsets, w) if wk != 0.0 and ok != 0) / h ** order


class FDField:
    """A pointwise function ``fn(x, t, *params)`` differentiated by finite differences."""

    def __init__(self, fn: Callable, hx: float = 1e-2, ht: float = 1e-3):
        self.fn = fn
        self.hx = hx
        self.ht = ht

    def partials(self, points, needs) -> dict:
        pts = np.asarray(points, dtype=float)
        t, x, params = pts[:, 0], pts[:, 1], tuple(pts[:, 2:].T)
        out = {}
        for i, j in needs:
            in_x = lambda tt: fd_derivative(lambda xx: self.fn(xx, tt, *params), x, j, self.hx)
            out[(i, j)] = jnp.asarray(fd_derivative(in_x, t, i, self.ht))
        return out


def as_field(params):
    if isinstance(params, MlpParams):
        return NetworkField(jnp.asarray(params.theta), params.arch)
    if hasattr(params, "partials"):
        return params
    if callable(params):
        return FDField(params)
    raise TypeError("expected network parameters, a field, or a callable u(x, t, ...)")


# ---------------------------------------------------------------------------
# data


@dataclass(frozen=True)
class ProblemData:
    """Boundary and initial data evaluated on one training set."""

    spatial: np.ndarray   # (N_sb, number of data components)
    temporal: np.ndarray  # (N_tb, 1) or (N_tb, 2) for u0 and u0_x


def _trace(spec: EquationSpec, pts: np.ndarray, order: int) -> np.ndarray:
    t, x, params = pts[:, 0], pts[:, 1], tuple(pts[:, 2:].T)
    return np.asarray(fd_derivative(lambda xx: spec.solution(xx, t, *params), x, order, 1e-2), dtype=float)


def prepare_data(spec: EquationSpec, tset: TrainingSet) -> ProblemData:
    n_sb, n_tb = len(tset.spatial_left), len(tset.temporal)
    faces = {"left": tset.spatial_left, "right": tset.spatial_right}

    def handle(name, pts, fallback):
        if name in spec.data:
            cols = pts[:, 2:].T
            arg = pts[:, 0] if name.startswith("h") or name in faces else pts[:, 1]
            return np.broadcast_to(np.asarray(spec.data[name](arg, *cols), dtype=float), (len(pts),))
        if spec.solution is not None:
            return fallback()
        return np.zeros(len(pts))

    if spec.kind in _TRACE:
        cols = [handle(name, faces[face], lambda f=face, o=order: _trace(spec, faces[f], o))
                for name, (face, order) in zip(SPATIAL_DATA[spec.kind], _TRACE[spec.kind])]
        spatial = np.column_stack(cols)
    elif spec.line:
        spatial = np.column_stack([handle(f, faces[f], lambda f=f: _trace(spec, faces[f], 0))
                                   for f in ("left", "right")])
    else:
        spatial = np.zeros((n_sb, 0))
    temporal = [handle("u0", tset.temporal, lambda: _trace(spec, tset.temporal, 0))]
    if spec.kind == CAMASSA_HOLM:
        temporal.append(handle("u0_x", tset.temporal, lambda: _trace(spec, tset.temporal, 1)))
    return ProblemData(spatial, np.column_stack(temporal))


# ---------------------------------------------------------------------------
# residual formulas


def interior_residual(spec: EquationSpec, d: dict, points, grid_shape=None, half_length=None):
    """Interior residual from the partials ``d[(i, j)]`` at ``points``."""
    u, u_t, u_x = d[(0, 0)], d[(1, 0)], d[(0, 1)]
    if spec.kind == KDV_KAWAHARA:
        r = u_t + u * u_x + spec.alpha * d[(0, 3)]
        if spec.beta:
            r = r - spec.beta * d[(0, 5)]
        if spec.drift:
            r = r + u_x
        return r
    if spec.kind == KDV_PARAMETRIC:
        gamma, kappa = points[:, 4], points[:, 5]
        return u_t + gamma * u * u_x + kappa * d[(0, 3)]
    if spec.kind == CAMASSA_HOLM:
        u_xx = d[(0, 2)]
        return (u_t - d[(1, 2)] + 3 * u * u_x + 2 * spec.kappa * u_x - 2 * u_x * u_xx
                - u * d[(0, 3)])
    # Benjamin-Ono: the transform couples every node of a time slice
    if grid_shape is None:
        raise ValueError("Benjamin-Ono residuals need a time-sliced Cartesian interior")
    n_t, n_x = grid_shape
    transform = hilbert_line if spec.line else hilbert_periodic
    H = transform(jnp.reshape(d[(0, 2)], (n_t, n_x)), half_length, jnp.reshape(d[(0, 3)], (n_t, n_x)))
    return u_t + u * u_x - jnp.reshape(H, (-1,))


def spatial_residual(spec: EquationSpec, left: dict, right: dict, data: np.ndarray):
    """Spatial-boundary components, shape (N_sb, k)."""
    if spec.kind == KDV_KAWAHARA:
        cols = [left[(0, 0)], right[(0, 0)], left[(0, 1)], right[(0, 1)], right[(0, 2)]]
    elif spec.kind == CAMASSA_HOLM:
        cols = [left[(0, 0)], right[(0, 0)], left[(0, 2)], right[(0, 2)]]
    elif spec.kind == KDV_PARAMETRIC:
        return jnp.stack([left[k] - right[k] for k in ((0, 0), (0, 1), (0, 2))], axis=1)
    elif spec.line:
        cols = [left[(0, 0)], right[(0, 0)]]
    else:
        return (left[(0, 0)] - right[(0, 0)])[:, None]
    return jnp.stack(cols, axis=1) - data


def temporal_residual(spec: EquationSpec, d: dict, data: np.ndarray):
    """Temporal components, shape (N_tb, m); Camassa-Holm also matches u_x."""
    cols = [d[(0, 0)]]
    if spec.kind == CAMASSA_HOLM:
        cols.append(d[(0, 1)])
    return jnp.stack(cols, axis=1) - data


# ---------------------------------------------------------------------------
# bundles


@dataclass(frozen=True)
class ResidualBundle:
    interior: np.ndarray             # (N_int,)
    spatial: np.ndarray              # (N_sb, k)
    temporal_components: np.ndarray  # (N_tb, m)

    @property
    def temporal(self) -> np.ndarray:
        """One value per temporal point; for m = 2 the root of the summed squares."""
        tc = self.temporal_components
        return tc[:, 0] if tc.shape[1] == 1 else np.sqrt(np.sum(tc ** 2, axis=1))


class ResidualProgram:
    """Residuals of one equation on one training set, with the data evaluated once."""

    def __init__(self, spec: EquationSpec, tset: TrainingSet):
        if spec.kind == BENJAMIN_ONO and tset.grid_shape is None:
            raise ValueError("Benjamin-Ono residuals need a time-sliced Cartesian interior")
        if (spec.kind == KDV_PARAMETRIC) != (tset.domain.n_params == 4):
            raise ValueError("the parametric equation needs exactly four parameter inputs")
        self.spec = spec
        self.set = tset
        self.data = prepare_data(spec, tset)
        self.needs = spec.needs()

    def components(self, fld):
        """(interior, spatial, temporal components) as jax arrays."""
        s = self.set
        d = fld.partials(s.interior, self.needs["interior"])
        r_int = interior_residual(self.spec, d, s.interior, s.grid_shape, 0.5 * s.domain.length)
        left = fld.partials(s.spatial_left, self.needs["spatial"])
        right = fld.partials(s.spatial_right, self.needs["spatial"])
        r_sb = spatial_residual(self.spec, left, right, self.data.spatial)
        r_tb = temporal_residual(self.spec, fld.partials(s.temporal, self.needs["temporal"]),
                                 self.data.temporal)
        return r_int, r_sb, r_tb

    def bundle(self, params) -> ResidualBundle:
        r_int, r_sb, r_tb = self.components(as_field(params))
        return ResidualBundle(*(np.asarray(jax.device_get(v)) for v in (r_int, r_sb, r_tb)))


def _check_kind(spec: EquationSpec, kind: str):
    if spec.kind != kind:
        raise ValueError(f"expected a {kind} equation, got {spec.kind}")


def residuals(params, spec: EquationSpec, tset: TrainingSet) -> ResidualBundle:
    return ResidualProgram(spec, tset).bundle(params)


def residuals_kdv_kawahara(params, spec: EquationSpec, tset: TrainingSet) -> ResidualBundle:
    _check_kind(spec, KDV_KAWAHARA)
    return residuals(params, spec, tset)


def residuals_camassa_holm(params, spec: EquationSpec, tset: TrainingSet) -> ResidualBundle:
    _check_kind(spec, CAMASSA_HOLM)
    return residuals(params, spec, tset)


def residuals_benjamin_ono(params, spec: EquationSpec, tset: TrainingSet) -> ResidualBundle:
    _check_kind(spec, BENJAMIN_ONO)
    return residuals(params, spec, tset)


def residuals_kdv_parametric(params, spec: EquationSpec, tset: TrainingSet) -> ResidualBundle:
    _check_kind(spec, KDV_PARAMETRIC)
    return residuals(params, spec, tset)


def residual_kdv_parametric(params, point6) -> float:
    """Interior residual ``u_t + gamma u u_x + kappa u_xxx`` at one (x, t, alpha, beta, gamma, kappa)."""
    x, t, *rest = (float(v) for v in point6)
    if len(rest) != 4:
        raise ValueError("expected (x, t, alpha, beta, gamma, kappa)")
    pts = np.array([[t, x, *rest]])
    spec = EquationSpec(KDV_PARAMETRIC)
    d = as_field(params).partials(pts, spec.needs()["interior"])
    return float(interior_residual(spec, d, pts)[0])
