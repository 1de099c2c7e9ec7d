"""Training sets: Sobol collocation points, Cartesian interiors and quadrature weights.

Points are stored as rows ``(t, x, extra...)``; the column order is the input
order of the network.  Every set carries its quadrature weights so the loss
is a plain weighted sum.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

# Joe-Kuo direction numbers (new-joe-kuo-6.21201) for dimensions 2..6:
# (degree s, coefficient a, initial m_1..m_s).  Dimension 1 is van der Corput.
_JOE_KUO = [
    (1, 0, (1,)),
    (2, 1, (1, 3)),
    (3, 1, (1, 3, 1)),
    (3, 2, (1, 1, 1)),
    (4, 1, (1, 1, 3, 3)),
]
MAX_SOBOL_DIM = len(_JOE_KUO) + 1
_BITS = 52


def _direction_numbers(dim: int) -> np.ndarray:
    """Integer direction numbers ``v[d, k] = m_k * 2**(BITS - k)``, k = 1..BITS."""
    v = np.zeros((dim, _BITS), dtype=np.uint64)
    v[0] = [1 << (_BITS - k) for k in range(1, _BITS + 1)]
    for d in range(1, dim):
        s, a, m_init = _JOE_KUO[d - 1]
        m = list(m_init)
        for k in range(s, _BITS):
            new = m[k - s] ^ (m[k - s] << s)
            for r in range(1, s):
                if (a >> (s - 1 - r)) & 1:
                    new ^= m[k - r] << r
            m.append(new)
        v[d] = [m[k] << (_BITS - 1 - k) for k in range(_BITS)]
    return v


def sobol_points(n: int, dim: int) -> np.ndarray:
    """First ``n`` Sobol points in [0, 1)^dim, skipping the initial all-zero point.

    Gray-code construction: point k is the XOR of the direction numbers of
    the bits set in ``k ^ (k >> 1)``.
    """
    if not 1 <= dim <= MAX_SOBOL_DIM:
        raise ValueError(f"Sobol dimension must be in 1..{MAX_SOBOL_DIM}, got {dim}")
    if n < 0:
        raise ValueError("n must be non-negative")
    if n >= 1 << _BITS:
        raise ValueError("too many points")
    v = _direction_numbers(dim)
    out = np.empty((n, dim))
    x = np.zeros(dim, dtype=np.uint64)
    scale = float(1 << _BITS)
    for k in range(1, n + 1):
        # Gray codes of k-1 and k differ in the lowest set bit of k
        c = (k & -k).bit_length() - 1
        x ^= v[:, c]
        out[k - 1] = x.astype(float) / scale
    return out


@dataclass(frozen=True)
class Domain:
    """Space-time box ``(x_left, x_right) x (0, T)`` plus an optional parameter box.

    Parameters are uniformly distributed random inputs, so the parameter box
    carries the uniform probability measure (total mass 1) in every weight.
    """

    x_left: float
    x_right: float
    T: float
    param_low: tuple[float, ...] = ()
    param_high: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.x_right > self.x_left:
            raise ValueError("need x_right > x_left")
        if not self.T > 0:
            raise ValueError("need T > 0")
        if len(self.param_low) != len(self.param_high):
            raise ValueError("parameter box bounds differ in length")
        if any(h < lo for lo, h in zip(self.param_low, self.param_high)):
            raise ValueError("parameter box has negative width")
        object.__setattr__(self, "param_low", tuple(float(v) for v in self.param_low))
        object.__setattr__(self, "param_high", tuple(float(v) for v in self.param_high))

    @property
    def length(self) -> float:
        return self.x_right - self.x_left

    @property
    def n_params(self) -> int:
        return len(self.param_low)

    @property
    def input_dim(self) -> int:
        return 2 + self.n_params

    def params_from_unit(self, u: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.param_low)
        return lo + u * (np.asarray(self.param_high) - lo)


@dataclass
class TrainingSet:
    """Collocation points with equal-weight quadrature.

    ``spatial_left[n]`` and ``spatial_right[n]`` share the same time (and
    parameters) ``t_n``; both faces carry weight ``w^sb_n``, so the stored
    weights sum to twice the boundary-time measure, one ``T`` per face.
    ``grid_shape`` is ``(n_t, n_x)`` when the interior is a tensor grid stored
    time-slice by time-slice.
    """

    domain: Domain
    interior: np.ndarray
    interior_weights: np.ndarray
    spatial_left: np.ndarray
    spatial_right: np.ndarray
    spatial_weights: np.ndarray
    temporal: np.ndarray
    temporal_weights: np.ndarray
    grid_shape: tuple[int, int] | None = None
    extras: dict = field(default_factory=dict)

    @property
    def counts(self) -> tuple[int, int, int]:
        return len(self.interior), len(self.spatial_left), len(self.temporal)

    @property
    def spatial_boundary(self) -> np.ndarray:
        return np.concatenate([self.spatial_left, self.spatial_right])

    @property
    def spatial_boundary_weights(self) -> np.ndarray:
        return np.concatenate([self.spatial_weights, self.spatial_weights])

    def to_csv(self, path) -> Path:
        """Columns: kind, x, t, p1..pk, weight."""
        path = Path(path)
        k = self.domain.n_params
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kind", "x", "t"] + [f"p{i + 1}" for i in range(k)] + ["weight"])
            for kind, pts, wts in (("int", self.interior, self.interior_weights),
                                   ("sb", self.spatial_boundary, self.spatial_boundary_weights),
                                   ("tb", self.temporal, self.temporal_weights)):
                for p, wt in zip(pts, wts):
                    w.writerow([kind, repr(float(p[1])), repr(float(p[0]))]
                               + [repr(float(v)) for v in p[2:]] + [repr(float(wt))])
        return path


def _stack(t, x, params):
    cols = [np.asarray(t, dtype=float), np.asarray(x, dtype=float)]
    pts = np.column_stack(cols)
    if params is not None and params.shape[1]:
        pts = np.column_stack([pts, params])
    return pts


def sobol_boundary_sets(domain: Domain, n_sb: int, n_tb: int):
    """Spatial-boundary and temporal-boundary Sobol sets (shared t_n on both faces)."""
    k = domain.n_params
    if n_sb <= 0 or n_tb <= 0:
        raise ValueError("point counts must be positive")
    u = sobol_points(n_sb, 1 + k)
    t = domain.T * u[:, 0]
    params = domain.params_from_unit(u[:, 1:]) if k else None
    left = _stack(t, np.full(n_sb, domain.x_left), params)
    right = _stack(t, np.full(n_sb, domain.x_right), params)
    w_sb = np.full(n_sb, domain.T / n_sb)

    u = sobol_points(n_tb, 1 + k)
    x = domain.x_left + domain.length * u[:, 0]
    params = domain.params_from_unit(u[:, 1:]) if k else None
    temporal = _stack(np.zeros(n_tb), x, params)
    w_tb = np.full(n_tb, domain.length / n_tb)
    return left, right, w_sb, temporal, w_tb


def build_training_set(domain: Domain, n_int: int, n_sb: int, n_tb: int) -> TrainingSet:
    """Sobol interior, spatial-boundary and temporal-boundary points with equal weights."""
    if n_int <= 0:
        raise ValueError("point counts must be positive")
    k = domain.n_params
    u = sobol_points(n_int, 2 + k)
    t = domain.T * u[:, 0]
    x = domain.x_left + domain.length * u[:, 1]
    params = domain.params_from_unit(u[:, 2:]) if k else None
    interior = _stack(t, x, params)
    w_int = np.full(n_int, domain.length * domain.T / n_int)
    left, right, w_sb, temporal, w_tb = sobol_boundary_sets(domain, n_sb, n_tb)
    return TrainingSet(domain, interior, w_int, left, right, w_sb, temporal, w_tb)


def spatial_grid(x_left: float, x_right: float, n_half: int) -> np.ndarray:
    """Nodes ``x_i``, i = -N..N, uniform on the interval (x_0 is the midpoint)."""
    if n_half < 1:
        raise ValueError("need N >= 1")
    mid = 0.5 * (x_left + x_right)
    half = 0.5 * (x_right - x_left)
    return mid + half * np.arange(-n_half, n_half + 1) / n_half


def cartesian_interior(domain: Domain, n_half: int, ratio: float):
    """Tensor grid with 2N+1 space nodes and time step ``ratio * dx`` on (0, T].

    The number of time slices is ``round(T / dt)`` and the step is adjusted
    to divide T exactly.  Weights are trapezoid in space times rectangle in
    time.  Returns ``(points, weights, (n_t, n_x))`` with points ordered
    slice by slice.
    """
    if ratio <= 0:
        raise ValueError("grid ratio must be positive")
    if domain.n_params:
        raise ValueError("Cartesian interiors are only used for (t, x) problems")
    x = spatial_grid(domain.x_left, domain.x_right, n_half)
    dx = x[1] - x[0]
    dt = ratio * dx
    if dt > domain.T:
        raise ValueError(f"time step {dt} exceeds the horizon T={domain.T}")
    n_t = max(1, int(round(domain.T / dt)))
    t = domain.T * np.arange(1, n_t + 1) / n_t
    wx = np.full(x.size, dx)
    wx[0] = wx[-1] = 0.5 * dx
    tt, xx = np.meshgrid(t, x, indexing="ij")
    points = np.column_stack([tt.ravel(), xx.ravel()])
    weights = np.outer(np.full(n_t, domain.T / n_t), wx).ravel()
    return points, weights, (n_t, x.size)


def build_grid_training_set(domain: Domain, n_half: int, ratio: float, n_sb: int,
                            n_tb: int) -> TrainingSet:
    """Cartesian interior (for non-local residuals) with Sobol boundary sets."""
    interior, w_int, shape = cartesian_interior(domain, n_half, ratio)
    left, right, w_sb, temporal, w_tb = sobol_boundary_sets(domain, n_sb, n_tb)
    return TrainingSet(domain, interior, w_int, left, right, w_sb, temporal, w_tb, grid_shape=shape)


def trapezoid_weights(nodes: Sequence[float]) -> np.ndarray:
    nodes = np.asarray(nodes, dtype=float)
    w = np.zeros_like(nodes)
    d = np.diff(nodes)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w
