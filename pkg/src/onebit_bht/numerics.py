"""Scalar kernels and small linear-algebra helpers.

``log_std_normal_cdf`` and ``inverse_mills`` are the two Gaussian kernels the
probit likelihood needs. Both accept scalars or arrays and stay finite deep in
the left tail, where ``log(ndtr(u))`` underflows to ``-inf``.
"""
import numpy as np
from scipy.linalg import lstsq
from scipy.special import erfc, erfcx

__all__ = [
    "log_std_normal_cdf",
    "inverse_mills",
    "least_squares_init",
    "finite_difference_gradient",
]

_SQRT2 = np.sqrt(2.0)
_SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)
_LOG_HALF = np.log(0.5)

# Below this point erfc(-u/sqrt2) starts losing digits to underflow.
_LEFT_TAIL = -8.0


def _check_finite(u):
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError("input must be finite")
    return u


def _scalar_or_array(out, like):
    return float(out) if np.ndim(like) == 0 else out


def log_std_normal_cdf(u):
    """Natural log of the standard normal CDF, log Phi(u).

    Three branches: scaled erfc for u < -8, plain erfc on [-8, 0] and
    ``log1p`` of the upper tail for u > 0 so that values near zero keep full
    relative precision.
    """
    u_arr = _check_finite(u)
    out = np.empty_like(u_arr)
    left = u_arr < _LEFT_TAIL
    mid = (~left) & (u_arr <= 0.0)
    right = u_arr > 0.0

    t = -u_arr[left] / _SQRT2
    out[left] = _LOG_HALF + np.log(erfcx(t)) - t * t
    out[mid] = np.log(0.5 * erfc(-u_arr[mid] / _SQRT2))
    out[right] = np.log1p(-0.5 * erfc(u_arr[right] / _SQRT2))
    return _scalar_or_array(out, u)


def inverse_mills(u):
    """phi(u) / Phi(u), the derivative of ``-log Phi`` up to sign.

    Written as ``sqrt(2/pi) / erfcx(-u/sqrt2)``, which is exact algebra and
    never forms the tiny ratio explicitly. Behaves like ``-u`` as u -> -inf
    and decays to 0 as u -> +inf.
    """
    u_arr = _check_finite(u)
    with np.errstate(over="ignore"):
        out = _SQRT_2_OVER_PI / erfcx(-u_arr / _SQRT2)
    return _scalar_or_array(out, u)


def least_squares_init(a_mat, y):
    """Minimum-norm least-squares solution of ``a_mat.T @ s ~= y``.

    ``a_mat`` is m x N (one column per measurement), so the system solved is
    the N x m one. Uses LAPACK ``gelsy`` (QR with column pivoting), so rank
    deficiency yields the minimum-norm solution instead of an error.
    """
    a_mat = np.asarray(a_mat, dtype=float)
    y = np.asarray(y, dtype=float)
    if a_mat.ndim != 2 or y.shape != (a_mat.shape[1],):
        raise ValueError(
            f"a_mat of shape {a_mat.shape} is inconsistent with y of shape {y.shape}"
        )
    s0, *_ = lstsq(a_mat.T, y, lapack_driver="gelsy", check_finite=False)
    return s0


def finite_difference_gradient(f, x, h=1e-5):
    """Central-difference gradient of the scalar function ``f`` at ``x``."""
    if h <= 0:
        raise ValueError("step h must be positive")
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for j in range(x.size):
        step = np.zeros_like(x)
        step.flat[j] = h
        grad.flat[j] = (f(x + step) - f(x - step)) / (2.0 * h)
    return grad
