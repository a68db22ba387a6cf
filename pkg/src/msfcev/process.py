"""Mixed sub-fractional driver: covariance structure and exact simulation.

The driver is ``M_t = beta * B_t + gamma * xi_t`` where ``B`` is a standard
Brownian motion and ``xi`` an independent sub-fractional Brownian motion
with Hurst index H.  The sub-fractional covariance is

    cov(xi_s, xi_t) = s^2H + t^2H - ((s+t)^2H + |t-s|^2H) / 2

which reduces to min(s, t) at H = 1/2.  Sampling is exact: the joint
Gaussian law over a time grid is factorized and multiplied into seeded
normal draws.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError

__all__ = [
    "MixedDriverParams",
    "TimeGrid",
    "PathBatch",
    "sfbm_covariance",
    "msfbm_covariance",
    "increment_covariance",
    "increment_variance",
    "covariance_matrix",
    "sample_msfbm",
    "block_rng",
]

_BLOCK = 4096  # paths per RNG substream; fixed so output never depends on scheduling


@dataclass(frozen=True)
class MixedDriverParams:
    """Weights and Hurst index of the mixed driver.

    ``beta`` scales the Brownian component, ``gamma`` the sub-fractional
    one.  Statistics accept any H in (0, 1); the pricing layer enforces
    its stricter H >= 1/2 gate separately.
    """

    hurst: float
    beta: float = 1.0
    gamma: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.hurst < 1.0:
            raise DomainError(f"hurst must lie in (0, 1), got {self.hurst!r}")
        if self.beta < 0.0 or self.gamma < 0.0:
            raise DomainError("beta and gamma must be >= 0")
        if self.beta == 0.0 and self.gamma == 0.0:
            raise DomainError("beta + gamma must be positive")


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing times starting at 0, in years."""

    times: tuple

    def __init__(self, times) -> None:
        t = tuple(float(v) for v in times)
        if len(t) < 2:
            raise DomainError("time grid needs at least two points")
        if t[0] != 0.0:
            raise DomainError("time grid must start at 0")
        for a, b in zip(t, t[1:]):
            if b - a <= 1e-12 * max(1.0, abs(b)):
                raise DomainError(
                    f"times must be strictly increasing; {a} -> {b} is too close")
        object.__setattr__(self, "times", t)

    def __len__(self) -> int:
        return len(self.times)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.times, dtype=np.float64)


@dataclass(frozen=True)
class PathBatch:
    """Sampled driver paths, one row per path, columns follow the grid."""

    grid: TimeGrid
    paths: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        if self.paths.ndim != 2 or self.paths.shape[1] != len(self.grid):
            raise DomainError("paths shape inconsistent with grid")

    def to_csv(self, target) -> None:
        """Write ``t_0,t_1,...`` header plus one row per path."""
        header = ",".join(f"t_{i}" for i in range(len(self.grid)))
        if isinstance(target, (str, bytes, os.PathLike)):
            with open(target, "w", encoding="utf-8") as fh:
                self.to_csv(fh)
            return
        np.savetxt(target, self.paths, delimiter=",", header=header,
                   comments="", fmt="%.17g")

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


def sfbm_covariance(s: float, t: float, hurst: float) -> float:
    """Covariance of the sub-fractional component at times s, t >= 0."""
    if not 0.0 < hurst < 1.0:
        raise DomainError(f"hurst must lie in (0, 1), got {hurst!r}")
    if s < 0.0 or t < 0.0:
        raise DomainError("times must be >= 0")
    h2 = 2.0 * hurst
    return s ** h2 + t ** h2 - 0.5 * ((s + t) ** h2 + abs(t - s) ** h2)


def msfbm_covariance(s: float, t: float, params: MixedDriverParams) -> float:
    """Covariance of the mixed driver: beta^2 min(s,t) + gamma^2 * sub-fractional part."""
    if s < 0.0 or t < 0.0:
        raise DomainError("times must be >= 0")
    out = params.beta ** 2 * min(s, t)
    if params.gamma != 0.0:
        out += params.gamma ** 2 * sfbm_covariance(s, t, params.hurst)
    return out


def increment_covariance(u: float, v: float, s: float, t: float,
                         params: MixedDriverParams) -> float:
    """cov(M_v - M_u, M_t - M_s) for non-overlapping windows t > s >= v > u >= 0.

    Positive for H > 1/2, negative for H < 1/2, zero at H = 1/2.
    """
    if not (t > s >= v > u >= 0.0):
        raise DomainError(
            f"need t > s >= v > u >= 0, got u={u}, v={v}, s={s}, t={t}")
    h2 = 2.0 * params.hurst
    g2 = params.gamma ** 2
    return 0.5 * g2 * ((t + u) ** h2 + (t - u) ** h2
                       + (s + v) ** h2 + (s - v) ** h2
                       - (t + v) ** h2 - (t - v) ** h2
                       - (s + u) ** h2 - (s - u) ** h2)


def increment_variance(s: float, t: float, params: MixedDriverParams) -> float:
    """Var(M_t - M_s) for 0 <= s < t; not a function of t - s alone.

    Equals cov(t,t) + cov(s,s) - 2 cov(s,t) expanded; note the +|t-s|^2H
    sign (setting s = 0 must recover the marginal variance, and H = 1/2
    must recover t - s).
    """
    if not 0.0 <= s < t:
        raise DomainError(f"need 0 <= s < t, got s={s}, t={t}")
    h2 = 2.0 * params.hurst
    out = params.beta ** 2 * (t - s)
    if params.gamma != 0.0:
        out += params.gamma ** 2 * (-(2.0 ** (h2 - 1.0)) * (s ** h2 + t ** h2)
                                    + (s + t) ** h2 + (t - s) ** h2)
    return out


def covariance_matrix(grid: TimeGrid, params: MixedDriverParams) -> np.ndarray:
    """Driver covariance over the positive grid times (t = 0 excluded)."""
    ts = grid.as_array()[1:]
    h2 = 2.0 * params.hurst
    s_m, t_m = np.meshgrid(ts, ts, indexing="ij")
    cov = params.beta ** 2 * np.minimum(s_m, t_m)
    if params.gamma != 0.0:
        cov = cov + params.gamma ** 2 * (
            s_m ** h2 + t_m ** h2
            - 0.5 * ((s_m + t_m) ** h2 + np.abs(t_m - s_m) ** h2))
    return cov


def _factor(cov: np.ndarray) -> np.ndarray:
    """Lower-triangular-ish factor L with L @ L.T = cov.

    Cholesky first; if the matrix is only semi-definite up to rounding,
    fall back to a symmetric eigendecomposition with small negative
    eigenvalues clipped to zero.
    """
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(cov)
        vmax = float(vals.max(initial=0.0))
        if vmax <= 0.0 or float(vals.min()) < -1e-10 * vmax:
            raise NumericalError(
                "driver covariance is not positive semi-definite within "
                f"tolerance: eigenvalue range [{vals.min():.3e}, {vmax:.3e}]")
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


def sample_msfbm(grid: TimeGrid, params: MixedDriverParams,
                 n_paths: int, seed: int) -> PathBatch:
    """Draw exact joint samples of the driver over the grid.

    Deterministic for a given seed: paths are generated in fixed blocks of
    4096, each from its own counter-based substream, so the result is
    independent of how the blocks might be scheduled.
    """
    if n_paths < 1:
        raise DomainError("n_paths must be >= 1")
    factor = _factor(covariance_matrix(grid, params))
    m = len(grid) - 1
    out = np.zeros((n_paths, m + 1))
    n_blocks = (n_paths + _BLOCK - 1) // _BLOCK
    for b in range(n_blocks):
        lo = b * _BLOCK
        hi = min(lo + _BLOCK, n_paths)
        z = block_rng(seed, b).standard_normal((hi - lo, m))
        out[lo:hi, 1:] = z @ factor.T
    return PathBatch(grid=grid, paths=out, seed=seed)


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Counter-based generator for one path block.

    The 128-bit Philox key combines the user seed (low word) with the
    block index (high word), giving independent streams per block without
    any sequential jumping.
    """
    if not 0 <= seed < 2 ** 64:
        raise DomainError("seed must be an unsigned 64-bit integer")
    return np.random.Generator(np.random.Philox(key=(seed & 0xFFFFFFFFFFFFFFFF)
                                                + (block << 64)))
