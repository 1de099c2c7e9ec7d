"""FFT convolution and discrete Hilbert transforms on the grid x_i = i*dx, i = -N..N.

Convention: H has Fourier symbol ``-i sign(k)``, so ``H sin = -cos``.

Both transforms are a Riemann sum of the singular kernel with the j = 0 term
left out.  Leaving the singular cell out is not neutral: it drops
``p.v. int_{-dx/2}^{dx/2} f(x - y) / (pi y) dy = -(dx / pi) f'(x) + O(dx^3)``, which
turns into an O(1/N) error (for ``sin(pi x / L)`` the plain sum returns
``-(1 - 1/N) cos``).  Passing ``derivative=f'`` adds that cell back; with it the
periodic sum is exact for every Fourier mode below N.
"""
from __future__ import annotations

import numpy as np
import jax
import jax.numpy as jnp


def _is_jax(a) -> bool:
    return isinstance(a, jax.Array) or isinstance(a, jax.core.Tracer)


def _next_pow2(n: int) -> int:
    return 1 << max(0, (n - 1).bit_length())


def fft_convolve(a, b):
    """Circular convolution ``c[i] = sum_j a[j] b[(i - j) mod n]`` along the last axis.

    Inputs are zero-padded to a power of two >= 2n - 1, linearly convolved by
    FFT, and the tail is wrapped back.  Leading axes broadcast, so one kernel
    convolves a stack of time slices.  Jax inputs give a differentiable jax
    result.
    """
    xp = jnp if (_is_jax(a) or _is_jax(b)) else np
    a = xp.asarray(a, dtype=float)
    b = xp.asarray(b, dtype=float)
    n = a.shape[-1]
    if b.shape[-1] != n:
        raise ValueError("fft_convolve needs equal lengths")
    size = _next_pow2(2 * n - 1)
    lin = xp.fft.irfft(xp.fft.rfft(a, size) * xp.fft.rfft(b, size), size)
    head = lin[..., :n]
    tail = lin[..., n:2 * n - 1]
    pad = [(0, 0)] * (tail.ndim - 1) + [(0, 1)]
    return head + xp.pad(tail, pad)


def periodic_kernel(n_half: int, L: float) -> np.ndarray:
    """``cot(pi x_j / 2L) / 2N`` for j = -N..N-1 (zero at j = 0 and at j = -N)."""
    j = np.arange(-n_half, n_half)
    k = np.zeros(2 * n_half)
    nz = j != 0
    k[nz] = 1.0 / np.tan(np.pi * j[nz] / (2 * n_half)) / (2 * n_half)
    k[0] = 0.0  # cot(-pi/2)
    return k


def line_kernel(n_half: int, L: float, extension: int = 5) -> np.ndarray:
    """``dx / (pi x_j)`` for j = -eN..eN-1 on the extended interval [-eL, eL].

    With ``x_j = j dx`` the grid spacing cancels, leaving ``1 / (pi j)``.
    """
    j = np.arange(-extension * n_half, extension * n_half)
    k = np.zeros(j.size)
    nz = j != 0
    k[nz] = 1.0 / (np.pi * j[nz])
    return k


def _centered_convolve(kernel, values):
    """Circular convolution where both arrays are indexed -M..M-1 (length 2M)."""
    xp = jnp if _is_jax(values) else np
    m = kernel.shape[-1] // 2
    # move index 0 to the front, convolve, move back
    out = fft_convolve(xp.roll(xp.asarray(kernel), -m), xp.roll(values, -m, axis=-1))
    return xp.roll(out, m, axis=-1)


def hilbert_periodic(values, L: float, derivative=None):
    """Periodic Hilbert transform of a grid function on x_i = i L/N, i = -N..N.

    ``values`` has shape ``(..., 2N+1)``.  Nodes -N and N are the same point
    of the period; the core uses their average and the result repeats at
    both ends.
    """
    xp = jnp if (_is_jax(values) or _is_jax(derivative)) else np
    values = xp.asarray(values, dtype=float)
    n_nodes = values.shape[-1]
    if n_nodes < 3 or n_nodes % 2 == 0:
        raise ValueError("grid functions have 2N+1 values")
    n_half = (n_nodes - 1) // 2
    core = xp.concatenate([0.5 * (values[..., :1] + values[..., -1:]), values[..., 1:-1]], axis=-1)
    out = _centered_convolve(periodic_kernel(n_half, L), core)
    out = xp.concatenate([out, out[..., :1]], axis=-1)
    if derivative is not None:
        out = out - (L / n_half) / np.pi * xp.asarray(derivative, dtype=float)
    return out


def hilbert_line(values, L: float, derivative=None, extension: int = 5):
    """Hilbert transform on the line of a grid function on [-L, L] extended by zero.

    The values are placed on the grid of [-eL, eL] (zero outside [-L, L]),
    convolved periodically with ``dx / (pi x_j)``, and restricted back.
    """
    xp = jnp if (_is_jax(values) or _is_jax(derivative)) else np
    values = xp.asarray(values, dtype=float)
    n_nodes = values.shape[-1]
    if n_nodes < 3 or n_nodes % 2 == 0:
        raise ValueError("grid functions have 2N+1 values")
    n_half = (n_nodes - 1) // 2
    if extension < 2:
        raise ValueError("the extension must cover twice the interval")
    total = extension * n_half
    # extended index -eN..eN-1; the physical nodes -N..N sit at offset (e-1)N
    pad = [(0, 0)] * (values.ndim - 1) + [(total - n_half, total - n_half - 1)]
    extended = xp.pad(values, pad)
    out = _centered_convolve(line_kernel(n_half, L, extension), extended)
    out = out[..., total - n_half: total + n_half + 1]
    if derivative is not None:
        out = out - (L / n_half) / np.pi * xp.asarray(derivative, dtype=float)
    return out


def periodic_matrix(n_half: int, L: float) -> np.ndarray:
    """Dense 2N x 2N matrix of the periodic sum on the distinct nodes -N..N-1."""
    k = periodic_kernel(n_half, L)
    n = 2 * n_half
    idx = np.arange(n)
    # entry (i, l) multiplies v_l, with j = i - l taken modulo 2N into -N..N-1
    j = (idx[:, None] - idx[None, :] + n_half) % n
    return k[j]
