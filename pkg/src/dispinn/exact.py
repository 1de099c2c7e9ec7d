"""Closed-form and semianalytic reference solutions.

All functions broadcast over numpy arrays.  Camassa-Holm solitons are given
in a stretched coordinate (theta or y) and need a monotone inversion to be
evaluated at a physical point; :func:`invert_monotone` does that.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# ---------------------------------------------------------------------------
# KdV, u_t + u u_x + u_xxx = 0


def sech(z):
    # 1/cosh overflows quietly to 0, which is the right limit
    with np.errstate(over="ignore"):
        return 1.0 / np.cosh(z)


def kdv_single(x, t):
    x, t = np.asarray(x, dtype=float), np.asarray(t, dtype=float)
    return 9.0 * sech(np.sqrt(0.75) * (x - 3.0 * t)) ** 2


def kdv_double(x, t, a: float = 0.5, b: float = 1.0):
    """Two-soliton of amplitudes 6a and 6b (speeds 2a, 2b), merged at t = 0.

    With ``xi_a = sqrt(a/2)(x - 2at)`` and ``xi_b = sqrt(b/2)(x - 2bt)``

        u = 6(b - a) (b csch^2 xi_b + a sech^2 xi_a) / (sqrt(a) tanh xi_a - sqrt(b) coth xi_b)^2.

    Multiplying through by ``tanh^2 xi_b`` removes the removable singularity
    at ``xi_b = 0`` and leaves only bounded factors; the denominator cannot
    vanish because ``|tanh xi_a tanh xi_b| < 1 <= sqrt(b/a)``.
    """
    if not 0 < a < b:
        raise ValueError("need 0 < a < b")
    x, t = np.asarray(x, dtype=float), np.asarray(t, dtype=float)
    xa = np.sqrt(a / 2) * (x - 2 * a * t)
    xb = np.sqrt(b / 2) * (x - 2 * b * t)
    ta, tb = np.tanh(xa), np.tanh(xb)
    num = b * sech(xb) ** 2 + a * sech(xa) ** 2 * tb ** 2
    den = (np.sqrt(a) * ta * tb - np.sqrt(b)) ** 2
    return 6.0 * (b - a) * num / den


def kdv_param_exact(x, t, alpha, beta, gamma, kappa):
    """Soliton of ``u_t + gamma u u_x + kappa u_xxx = 0``; (9, 0, 1, 1) gives :func:`kdv_single`."""
    alpha, beta, gamma, kappa = (np.asarray(v, dtype=float) for v in (alpha, beta, gamma, kappa))
    if np.any(alpha <= beta) or np.any(gamma == 0) or np.any(kappa <= 0):
        raise ValueError("need alpha > beta, gamma != 0, kappa > 0")
    x, t = np.asarray(x, dtype=float), np.asarray(t, dtype=float)
    speed = beta + (alpha - beta) / 3.0
    arg = np.sqrt((alpha - beta) / (12.0 * kappa)) * (x - speed * t)
    return beta / gamma + (alpha - beta) / gamma * sech(arg) ** 2


def kdv_param_initial(x, alpha, beta, gamma, kappa):
    return kdv_param_exact(x, 0.0, alpha, beta, gamma, kappa)


# ---------------------------------------------------------------------------
# Kawahara-type, u_t + u_x + u u_x + u_xxx - u_xxxxx = 0

KAWAHARA_AMPLITUDE = 105.0 / 169.0
KAWAHARA_SPEED = 205.0 / 169.0


def kawahara_single(x, t, x0: float = 0.0):
    x, t = np.asarray(x, dtype=float), np.asarray(t, dtype=float)
    z = (x - KAWAHARA_SPEED * t - x0) / (2.0 * np.sqrt(13.0))
    return KAWAHARA_AMPLITUDE * sech(z) ** 4


# ---------------------------------------------------------------------------
# Camassa-Holm, u_t - u_txx + 3 u u_x + 2 kappa u_x = 2 u_x u_xx + u u_xxx


class InversionError(RuntimeError):
    pass


def invert_monotone(fn, dfn, target, lo, hi, tol: float = 1e-12, max_iter: int = 200):
    """Solve ``fn(z) = target`` for increasing ``fn`` on brackets ``[lo, hi]``.

    Newton steps that leave the current bracket are replaced by bisection,
    and the bracket shrinks after every evaluation, so convergence is
    guaranteed; the iteration cap only guards against a broken bracket.
    """
    target = np.asarray(target, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), target.shape).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), target.shape).copy()
    if np.any(fn(lo) > target) or np.any(fn(hi) < target):
        raise InversionError("target outside the bracket")
    z = 0.5 * (lo + hi)
    for _ in range(max_iter):
        g = fn(z) - target
        lo = np.where(g < 0, z, lo)
        hi = np.where(g > 0, z, hi)
        d = dfn(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = z - g / d
        ok = np.isfinite(newton) & (newton > lo) & (newton < hi)
        z_new = np.where(ok, newton, 0.5 * (lo + hi))
        z_new = np.where(g == 0, z, z_new)
        step = np.abs(z_new - z)
        z = z_new
        if np.all((step <= tol * np.maximum(1.0, np.abs(z))) | (hi - lo <= tol)):
            return z
    raise InversionError(f"no convergence after {max_iter} iterations")


@dataclass(frozen=True)
class CHSingle:
    """Single soliton with kappa = k^2, parametrised by theta."""

    k: float = 0.6
    p: float = 1.0
    x0: float = 0.0

    def __post_init__(self):
        if not 0 < self.k * self.p < 1:
            raise ValueError("need 0 < k p < 1")

    @property
    def kappa(self) -> float:
        return self.k ** 2

    @property
    def speed(self) -> float:
        """Travelling speed c~ = 2k^2 / (1 - k^2 p^2)."""
        return 2 * self.k ** 2 / (1 - (self.k * self.p) ** 2)

    @property
    def c(self) -> float:
        return self.k * self.speed

    @property
    def peak(self) -> float:
        return self.k * self.c * self.p ** 2

    def Theta(self, theta):
        k, p = self.k, self.p
        theta = np.asarray(theta, dtype=float)
        # log((1+kp) + (1-kp)e^th) - log((1-kp) + (1+kp)e^th), written overflow-free
        return theta / k + p * (_log_affine_exp(1 + k * p, 1 - k * p, theta)
                                - _log_affine_exp(1 - k * p, 1 + k * p, theta))

    def dTheta(self, theta):
        k, p = self.k, self.p
        theta = np.asarray(theta, dtype=float)
        return 1.0 / k + p * (_sigmoid_affine(1 + k * p, 1 - k * p, theta)
                              - _sigmoid_affine(1 - k * p, 1 + k * p, theta))

    def theta_of(self, x, t):
        s = self.p * (np.asarray(x, dtype=float) - self.speed * np.asarray(t, dtype=float) + self.x0)
        # |Theta - theta/k| <= p log((1+kp)/(1-kp)), which brackets the root
        spread = self.k * self.p * np.log((1 + self.k * self.p) / (1 - self.k * self.p)) + 1.0
        return invert_monotone(self.Theta, self.dTheta, s, self.k * s - spread, self.k * s + spread)

    def profile(self, theta):
        k, p, c = self.k, self.p, self.c
        kp2 = (k * p) ** 2
        return 2 * k * c * p ** 2 / ((1 + kp2) + (1 - kp2) * np.cosh(np.asarray(theta, dtype=float)))

    def __call__(self, x, t):
        return self.profile(self.theta_of(x, t))


def _log_affine_exp(a, b, z):
    """log(a + b e^z) for a, b > 0 without overflow."""
    return np.where(z > 0, z + np.log(b + a * np.exp(-np.abs(z))), np.log(a + b * np.exp(np.minimum(z, 0))))


def _sigmoid_affine(a, b, z):
    """d/dz log(a + b e^z) = b e^z / (a + b e^z)."""
    e = np.exp(-np.abs(z))
    return np.where(z > 0, b / (a * e + b), b * e / (a + b * e))


def ch_single(x, t, k: float = 0.6, p: float = 1.0, x0: float = 0.0):
    return CHSingle(k, p, x0)(x, t)


@dataclass(frozen=True)
class CHDouble:
    """Two-soliton in the parametric coordinate y, with x(y, t) inverted numerically.

    Corrections to the printed constants: the second factor of ``v12`` is
    ``1 - k^2 p_2^2`` and the coefficient of ``e^{theta_2}`` in the
    denominator of ``x(y, t)`` is ``a_2 b_1``, the mirror image of the
    numerator term ``b_2 a_1``.

    The formula tends to ``k^2`` at both ends and solves the equation with
    ``kappa = 0``; ``u(x + k^2 t, t) - k^2`` is the corresponding solution for
    ``kappa = k^2`` on a zero background.  The default phases put the slow
    bump ahead of the fast one at t = 0 so the two interact around t = 5.
    """

    k: float = 0.6
    p1: float = 1.5
    p2: float = 1.0
    alpha1: float = 4.0
    alpha2: float = -2.0
    alpha: float = 0.0

    def __post_init__(self):
        for p in (self.p1, self.p2):
            if not 0 < self.k * p < 1:
                raise ValueError("need 0 < k p_i < 1")
        if self.p1 == self.p2:
            raise ValueError("need p1 != p2")

    @property
    def kappa(self) -> float:
        return 0.0

    def _constants(self):
        k, p1, p2 = self.k, self.p1, self.p2
        c1 = 2 * k ** 3 / (1 - k ** 2 * p1 ** 2)
        c2 = 2 * k ** 3 / (1 - k ** 2 * p2 ** 2)
        w1, w2 = -p1 * c1, -p2 * c2
        A12 = (p1 - p2) ** 2 / (p1 + p2) ** 2
        a1, a2 = 1 + k * p1, 1 + k * p2
        b1, b2 = 1 - k * p1, 1 - k * p2
        v12 = 4 * k ** 3 * (p1 - p2) ** 2 / ((1 - k ** 2 * p1 ** 2) * (1 - k ** 2 * p2 ** 2))
        b12 = (8 * k ** 6 * (p1 - p2) ** 2 * (1 - k ** 4 * p1 ** 2 * p2 ** 2)
               / ((1 - k ** 2 * p1 ** 2) ** 2 * (1 - k ** 2 * p2 ** 2) ** 2))
        return c1, c2, w1, w2, A12, a1, a2, b1, b2, v12, b12

    def thetas(self, y, t):
        c1, c2 = self._constants()[:2]
        y, t = np.asarray(y, dtype=float), np.asarray(t, dtype=float)
        return self.p1 * (y - c1 * t + self.alpha1), self.p2 * (y - c2 * t + self.alpha2)

    def _log_ratio_terms(self, y, t):
        c1, c2, w1, w2, A12, a1, a2, b1, b2 = self._constants()[:9]
        th1, th2 = self.thetas(y, t)
        num = _logsumexp4(np.log(a1 * a2), np.log(b1 * a2) + th1, np.log(b2 * a1) + th2,
                          np.log(b1 * b2 * A12) + th1 + th2)
        den = _logsumexp4(np.log(b1 * b2), np.log(a1 * b2) + th1, np.log(a2 * b1) + th2,
                          np.log(a1 * a2 * A12) + th1 + th2)
        return num, den

    def x_of(self, y, t):
        num, den = self._log_ratio_terms(y, t)
        return np.asarray(y, dtype=float) / self.k + num - den + self.k ** 2 * np.asarray(t, dtype=float) + self.alpha

    def dx_dy(self, y, t, h: float = 1e-6):
        # the log-ratio is smooth and bounded; a central difference suffices for Newton
        return (self.x_of(y + h, t) - self.x_of(y - h, t)) / (2 * h)

    def y_of(self, x, t):
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
        _, _, _, _, A12, a1, a2, b1, b2 = self._constants()[:9]
        bound = abs(np.log(a1 * a2 / (b1 * b2))) + 1.0
        base = self.k * (x - self.k ** 2 * t - self.alpha)
        return invert_monotone(lambda y: self.x_of(y, t), lambda y: self.dx_dy(y, t), x,
                               base - self.k * bound, base + self.k * bound)

    def u_of_y(self, y, t):
        c1, c2, w1, w2, A12, a1, a2, b1, b2, v12, b12 = self._constants()
        k, p1, p2 = self.k, self.p1, self.p2
        th1, th2 = self.thetas(y, t)
        # f is scaled by e^{-m}, with m its largest exponent; every numerator
        # exponent is at most 2m, so those terms are scaled by e^{-2m}
        m = np.maximum.reduce([np.zeros_like(th1), th1, th2, th1 + th2])
        f = np.exp(-m) + np.exp(th1 - m) + np.exp(th2 - m) + A12 * np.exp(th1 + th2 - m)
        E = lambda z: np.exp(z - 2 * m)
        num = (w1 ** 2 * E(th1) + w2 ** 2 * E(th2) + b12 * E(th1 + th2)
               + A12 * (w1 ** 2 * E(th1 + 2 * th2) + w2 ** 2 * E(2 * th1 + th2)))
        g = (c1 * p1 ** 2 * E(th1) + c2 * p2 ** 2 * E(th2) + v12 * E(th1 + th2)
             + A12 * (c1 * p1 ** 2 * E(th1 + 2 * th2) + c2 * p2 ** 2 * E(2 * th1 + th2)))
        r = k + 2 * g / f ** 2
        return k ** 2 + (2 / k) * num / (r * f ** 2)

    def __call__(self, x, t):
        y = self.y_of(x, t)
        return self.u_of_y(y, t)


def _logsumexp4(*terms):
    terms = np.broadcast_arrays(*terms)
    m = np.maximum.reduce(terms)
    return m + np.log(sum(np.exp(z - m) for z in terms))


def ch_double(x, t, k: float = 0.6, p1: float = 1.5, p2: float = 1.0, alpha1: float = 4.0,
              alpha2: float = -2.0, alpha: float = 0.0):
    return CHDouble(k, p1, p2, alpha1, alpha2, alpha)(x, t)


# ---------------------------------------------------------------------------
# Benjamin-Ono, u_t + u u_x - H u_xx = 0 with H the transform of symbol -i sign(k)
# (H sin = -cos).  Both solitons below satisfy this sign; with the opposite
# sign they would travel to the left.


def bo_periodic_single(x, t, L: float = 15.0, c: float = 0.25, x0: float = 0.0):
    delta = np.pi / (c * L)
    if delta >= 1:
        raise ValueError("need c L > pi")
    x, t = np.asarray(x, dtype=float), np.asarray(t, dtype=float)
    return 2 * c * delta ** 2 / (1 - np.sqrt(1 - delta ** 2) * np.cos(c * delta * (x - c * t - x0)))


def bo_line_double(x, t, c1: float = 2.0, c2: float = 1.0):
    if c1 == c2 or c1 <= 0 or c2 <= 0:
        raise ValueError("need distinct positive speeds")
    x, t = np.asarray(x, dtype=float), np.asarray(t, dtype=float)
    l1, l2 = x - c1 * t, x - c2 * t
    s = (c1 + c2) ** 2 / (c1 - c2) ** 2
    num = 4 * c1 * c2 * (c1 * l1 ** 2 + c2 * l2 ** 2 + (c1 + c2) ** 3 / (c1 * c2 * (c1 - c2) ** 2))
    den = (c1 * c2 * l1 * l2 - s) ** 2 + (c1 * l1 + c2 * l2) ** 2
    return num / den


def bo_line_single(x, t, c: float):
    lam = np.asarray(x, dtype=float) - c * np.asarray(t, dtype=float)
    return 4 * c / (1 + c ** 2 * lam ** 2)


# ---------------------------------------------------------------------------


def export_grid_csv(path, x, t, u_exact, u_pinn=None) -> Path:
    """Write (x, t, u_exact, u_pinn) rows for plotting."""
    path = Path(path)
    x, t, u_exact = (np.ravel(np.asarray(v, dtype=float)) for v in np.broadcast_arrays(x, t, u_exact))
    u_pinn = np.full_like(u_exact, np.nan) if u_pinn is None else np.ravel(np.asarray(u_pinn, dtype=float))
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "t", "u_exact", "u_pinn"])
        for row in zip(x, t, u_exact, u_pinn):
            w.writerow([repr(float(v)) for v in row])
    return path
