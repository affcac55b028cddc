"""Generative model: Bernoulli-Gaussian sparse signal observed through a
perturbed Gaussian sensing matrix and quantized to one bit per measurement.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "ModelParams",
    "SparseSignal",
    "MeasurementSet",
    "sample_sparse_signal",
    "generate_measurements",
    "equivalent_noise_std",
    "sign_quantize",
]


@dataclass(frozen=True)
class ModelParams:
    """Dimensions and statistics of the generative model.

    ``m`` is the signal length and ``n_meas`` the number of sign measurements.
    """

    m: int = 200
    n_meas: int = 400
    p: float = 0.1
    sigma_e: float = 0.1
    sigma_n: float = 0.1
    sigma_r: float = 1.0

    def __post_init__(self):
        if self.m < 1 or self.n_meas < 1:
            raise ValueError(f"m and n_meas must be >= 1, got {self.m}, {self.n_meas}")
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"p must lie in (0, 1], got {self.p}")
        if self.sigma_e < 0:
            raise ValueError(f"sigma_e must be >= 0, got {self.sigma_e}")
        if self.sigma_n <= 0 or self.sigma_r <= 0:
            raise ValueError("sigma_n and sigma_r must be positive")


@dataclass(frozen=True)
class SparseSignal:
    q: np.ndarray
    r: np.ndarray
    s: np.ndarray

    @property
    def support(self):
        return np.flatnonzero(self.q)


@dataclass(frozen=True)
class MeasurementSet:
    """Ground-truth record of one measurement draw.

    ``e_mat`` and ``noise`` are kept for diagnostics only; recovery code is
    handed ``a_mat`` and ``y``.
    """

    a_mat: np.ndarray
    e_mat: np.ndarray
    noise: np.ndarray
    x: np.ndarray
    y: np.ndarray


def sign_quantize(x):
    """Elementwise sign with sign(0) = +1; output entries are in {-1, +1}."""
    x_arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x_arr)):
        raise ValueError("sign_quantize requires finite input")
    out = np.where(x_arr >= 0.0, 1.0, -1.0)
    return float(out) if out.ndim == 0 else out


def equivalent_noise_std(s_norm_sq, sigma_e_sq, sigma_n_sq):
    """Std of z = E^T s + n: sqrt(||s||^2 sigma_e^2 + sigma_n^2)."""
    if s_norm_sq < 0 or sigma_e_sq < 0 or sigma_n_sq <= 0:
        raise ValueError("need ||s||^2 >= 0, sigma_e^2 >= 0 and sigma_n^2 > 0")
    return math.sqrt(s_norm_sq * sigma_e_sq + sigma_n_sq)


def sample_sparse_signal(params, rng):
    """Draw a unit-norm Bernoulli-Gaussian vector.

    An all-inactive draw cannot be normalized and is redrawn.
    """
    while True:
        q = (rng.random(params.m) < params.p).astype(np.int8)
        r = rng.normal(0.0, params.sigma_r, size=params.m)
        if q.any():
            break
        logger.info("all-zero activity draw (m=%d, p=%g); resampling", params.m, params.p)
    s = q * r
    s = s / np.linalg.norm(s)
    return SparseSignal(q=q, r=r, s=s)


def generate_measurements(signal, params, rng):
    s = np.asarray(signal.s, dtype=float)
    if s.shape != (params.m,):
        raise ValueError(f"signal length {s.shape} does not match m={params.m}")
    shape = (params.m, params.n_meas)
    a_mat = rng.standard_normal(shape)
    e_mat = rng.normal(0.0, params.sigma_e, size=shape) if params.sigma_e > 0 else np.zeros(shape)
    noise = rng.normal(0.0, params.sigma_n, size=params.n_meas)
    x = (a_mat + e_mat).T @ s + noise
    return MeasurementSet(a_mat=a_mat, e_mat=e_mat, noise=noise, x=x, y=sign_quantize(x))
