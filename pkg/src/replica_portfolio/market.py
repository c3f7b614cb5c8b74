"""Quenched randomness of one trial: scaled return matrix X and J = X X^T."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg.blas import dsyrk

from .errors import ParameterError
from .hyperparams import HyperParams, SeedLike, as_generator

NOISE_KINDS = ("gaussian", "uniform", "rademacher")


@dataclass(frozen=True)
class NoiseSpec:
    """Shape of the standardised (mean 0, variance 1) return fluctuations."""

    kind: str = "gaussian"

    def __post_init__(self) -> None:
        if self.kind not in NOISE_KINDS:
            raise ParameterError(f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}")

    def standard(self, rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.standard_normal(shape)
        if self.kind == "uniform":
            a = math.sqrt(3.0)
            return rng.uniform(-a, a, shape)
        return 2.0 * rng.integers(0, 2, shape).astype(float) - 1.0


@dataclass(frozen=True)
class MarketSample:
    """``x[i, mu] = (xbar[i, mu] - r_i) / sqrt(N)`` and ``j = x @ x.T``."""

    x: np.ndarray
    j: np.ndarray

    @property
    def n_assets(self) -> int:
        return self.x.shape[0]

    @property
    def n_periods(self) -> int:
        return self.x.shape[1]

    @property
    def alpha(self) -> float:
        return self.n_periods / self.n_assets

    @classmethod
    def from_x(cls, x: np.ndarray) -> "MarketSample":
        x = np.ascontiguousarray(x, dtype=float)
        return cls(x, gram(x))


def gram(x: np.ndarray) -> np.ndarray:
    """X X^T built by a single symmetric rank-k update, mirrored to full storage."""
    # dsyrk(a=x.T, trans=1) computes x x^T with the Fortran view of a C array.
    c = dsyrk(1.0, np.asarray(x, dtype=float).T, trans=1, lower=0)
    iu = np.triu_indices_from(c, k=1)
    c[(iu[1], iu[0])] = c[iu]
    return np.ascontiguousarray(c)


def generate_market(
    params: HyperParams,
    n_periods: int,
    noise: NoiseSpec | str = "gaussian",
    rng_seed: SeedLike = None,
) -> MarketSample:
    """Draw p periods of returns with E = r_i and V = v_i and centre them.

    The raw returns ``xbar = r_i + sqrt(v_i) z`` are generated and ``r_i`` is
    subtracted exactly, so only the noise ``z`` enters X.
    """
    n = params.n_assets
    if n_periods <= n:
        raise ParameterError(f"need n_periods > n_assets (alpha > 1), got p={n_periods}, N={n}")
    if isinstance(noise, str):
        noise = NoiseSpec(noise)
    rng = as_generator(rng_seed)
    z = noise.standard(rng, (n, n_periods))
    x = z * (np.sqrt(params.variances) / math.sqrt(n))[:, None]
    return MarketSample.from_x(x)


_HEADER = struct.Struct("<QQ")


def dump_market(sample: MarketSample, path: str | Path) -> None:
    """Write X as a 16-byte header (N, p as little-endian u64) plus row-major float64."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(sample.n_assets, sample.n_periods))
        fh.write(np.ascontiguousarray(sample.x, dtype="<f8").tobytes())


def load_market(path: str | Path) -> MarketSample:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ParameterError(f"{path}: truncated header")
        n, p = _HEADER.unpack(head)
        payload = fh.read()
    if len(payload) != 8 * n * p:
        raise ParameterError(f"{path}: expected {8 * n * p} payload bytes, found {len(payload)}")
    data = np.frombuffer(payload, dtype="<f8")
    return MarketSample.from_x(data.reshape(n, p).astype(float))
