"""Asset hyperparameter distributions, sampling and weighted moments.

Each asset i carries a mean return ``r_i`` and a return variance ``v_i``.
In the correlated model used for the experiments the variance is tied to the
mean through ``v_i = h_i * r_i**2`` with ``r`` and ``h`` drawn independently
from bounded Pareto laws.  Every closed-form prediction depends on the
hyperparameters only through six weighted averages collected in a
:class:`MomentSet`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy import integrate

from .errors import DomainError, ParameterError

# Absolute and relative tolerance for every population-moment quadrature.
QUAD_TOL = 1e-10

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator, None]


def as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# One-dimensional distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundedPareto:
    """Power-law density ``f(x) ∝ x**(-power)`` restricted to ``[lower, upper]``.

    ``power == 1`` is handled by the logarithmic branch of the inverse CDF,
    ``x = lower * (upper/lower)**u``.
    """

    lower: float
    upper: float
    power: float

    def __post_init__(self) -> None:
        lo, hi, c = float(self.lower), float(self.upper), float(self.power)
        if not all(math.isfinite(t) for t in (lo, hi, c)):
            raise ParameterError(f"non-finite bounded Pareto parameters {self}")
        if not 0.0 < lo < hi:
            raise ParameterError(f"need 0 < lower < upper, got lower={lo}, upper={hi}")
        if c <= 0.0:
            raise ParameterError(f"power must be positive, got {c}")

    @property
    def _log_branch(self) -> bool:
        return self.power == 1.0

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if self._log_branch:
            norm = 1.0 / math.log(self.upper / self.lower)
        else:
            a = 1.0 - self.power
            norm = a / (self.upper**a - self.lower**a)
        inside = (x >= self.lower) & (x <= self.upper)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = norm * np.power(np.where(inside, x, 1.0), -self.power)
        return np.where(inside, val, 0.0)

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), self.lower, self.upper)
        if self._log_branch:
            return np.log(x / self.lower) / math.log(self.upper / self.lower)
        a = 1.0 - self.power
        return (x**a - self.lower**a) / (self.upper**a - self.lower**a)

    def ppf(self, u):
        """Inverse CDF; maps a uniform draw in [0, 1] into [lower, upper]."""
        u = np.asarray(u, dtype=float)
        if np.any((u < 0.0) | (u > 1.0)):
            raise ParameterError("uniform draw must lie in [0, 1]")
        if self._log_branch:
            x = self.lower * (self.upper / self.lower) ** u
        else:
            a = 1.0 - self.power
            x = (u * self.upper**a + (1.0 - u) * self.lower**a) ** (1.0 / a)
        # Rounding in the power can push the endpoints by one ulp.
        return np.clip(x, self.lower, self.upper)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.ppf(rng.random(n))

    def expect(self, f: Callable[[float], float]) -> float:
        val, _ = integrate.quad(
            lambda x: f(x) * float(self.pdf(x)),
            self.lower,
            self.upper,
            epsabs=QUAD_TOL,
            epsrel=QUAD_TOL,
            limit=200,
        )
        return val

    def to_dict(self) -> dict:
        return {"kind": "bounded_pareto", "lower": self.lower, "upper": self.upper, "power": self.power}


@dataclass(frozen=True)
class PointMass:
    """Degenerate distribution concentrated on ``value``."""

    value: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise ParameterError("point mass value must be finite")

    def ppf(self, u):
        return np.full(np.shape(u), float(self.value))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        # Consume the stream anyway so that swapping a distribution does not
        # shift the draws of the other hyperparameter.
        return self.ppf(rng.random(n))

    def expect(self, f: Callable[[float], float]) -> float:
        return float(f(self.value))

    def to_dict(self) -> dict:
        return {"kind": "point_mass", "value": self.value}


@dataclass(frozen=True)
class Discrete:
    """Finite distribution over ``values`` with probabilities ``weights``."""

    values: tuple[float, ...]
    weights: tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        values = tuple(float(v) for v in self.values)
        weights = tuple(float(w) for w in self.weights) or tuple(1.0 / len(values) for _ in values)
        if not values or len(values) != len(weights):
            raise ParameterError("discrete distribution needs matching, non-empty values and weights")
        if any(w < 0 for w in weights) or not math.isclose(sum(weights), 1.0, rel_tol=1e-12):
            raise ParameterError("discrete weights must be non-negative and sum to 1")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)

    def ppf(self, u):
        cum = np.cumsum(self.weights)
        cum[-1] = 1.0
        idx = np.searchsorted(cum, np.asarray(u, dtype=float), side="left")
        return np.asarray(self.values)[np.minimum(idx, len(self.values) - 1)]

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.ppf(rng.random(n))

    def expect(self, f: Callable[[float], float]) -> float:
        return math.fsum(w * f(v) for v, w in zip(self.values, self.weights))

    def to_dict(self) -> dict:
        return {"kind": "discrete", "values": list(self.values), "weights": list(self.weights)}


Distribution = Union[BoundedPareto, PointMass, Discrete]


def distribution_from_dict(spec: dict) -> Distribution:
    kind = spec.get("kind")
    try:
        if kind == "bounded_pareto":
            return BoundedPareto(float(spec["lower"]), float(spec["upper"]), float(spec["power"]))
        if kind == "point_mass":
            return PointMass(float(spec["value"]))
        if kind == "discrete":
            return Discrete(tuple(spec["values"]), tuple(spec.get("weights", ())))
    except KeyError as exc:
        raise ParameterError(f"distribution {kind!r} is missing field {exc}") from None
    raise ParameterError(f"unknown distribution kind {kind!r}")


def sample_bounded_pareto(dist: BoundedPareto, uniform_draw: float) -> float:
    """Map one uniform draw through the bounded Pareto inverse CDF."""
    return float(dist.ppf(uniform_draw))


# ---------------------------------------------------------------------------
# Hyperparameter models
# ---------------------------------------------------------------------------

COUPLINGS = ("product", "independent")


@dataclass(frozen=True)
class HyperModel:
    """Generating law for ``(r_i, v_i)``.

    With ``coupling="product"`` the second distribution is that of the ratio
    ``h`` and ``v = h * r**2``.  With ``coupling="independent"`` it is the law
    of ``v`` itself, drawn independently of ``r``.
    """

    mean_dist: Distribution
    ratio_dist: Distribution
    coupling: str = "product"

    def __post_init__(self) -> None:
        if self.coupling not in COUPLINGS:
            raise ParameterError(f"coupling must be one of {COUPLINGS}, got {self.coupling!r}")
        if self.coupling == "independent" and _min_support(self.ratio_dist) <= 0:
            raise ParameterError("variance distribution must have strictly positive support")
        if self.coupling == "product":
            if _min_support(self.ratio_dist) <= 0:
                raise ParameterError("ratio distribution must have strictly positive support")
            if _min_abs_support(self.mean_dist) <= 0:
                raise ParameterError("v = h r^2 needs a mean distribution bounded away from 0")

    def to_dict(self) -> dict:
        return {"mean": self.mean_dist.to_dict(), "ratio": self.ratio_dist.to_dict(), "coupling": self.coupling}


def _support(dist: Distribution) -> tuple[float, ...]:
    if isinstance(dist, BoundedPareto):
        return (dist.lower, dist.upper)
    if isinstance(dist, PointMass):
        return (dist.value,)
    return tuple(v for v, w in zip(dist.values, dist.weights) if w > 0)


def _min_support(dist: Distribution) -> float:
    return min(_support(dist))


def _min_abs_support(dist: Distribution) -> float:
    if isinstance(dist, BoundedPareto):
        return dist.lower
    return min(abs(v) for v in _support(dist))


@dataclass(frozen=True)
class HyperParams:
    """Realised per-asset means and variances."""

    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self) -> None:
        r = np.asarray(self.means, dtype=float).reshape(-1)
        v = np.asarray(self.variances, dtype=float).reshape(-1)
        if r.shape != v.shape:
            raise ParameterError(f"means and variances differ in length ({r.size} vs {v.size})")
        if r.size == 0:
            raise ParameterError("need at least one asset")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(v))):
            raise ParameterError("hyperparameters must be finite")
        if np.any(v <= 0):
            raise DomainError("all variances must be strictly positive")
        object.__setattr__(self, "means", r)
        object.__setattr__(self, "variances", v)

    @property
    def n_assets(self) -> int:
        return self.means.size


def sample_hyperparams(model: HyperModel, n_assets: int, rng_seed: SeedLike) -> HyperParams:
    """Draw ``n_assets`` independent ``(r_i, v_i)`` pairs.

    The means are drawn first and the ratio (or variance) second from the same
    generator, so a fixed seed fixes both vectors.
    """
    if n_assets < 1:
        raise ParameterError("n_assets must be >= 1")
    rng = as_generator(rng_seed)
    r = model.mean_dist.sample(rng, n_assets)
    second = model.ratio_dist.sample(rng, n_assets)
    v = second * r**2 if model.coupling == "product" else second
    return HyperParams(r, v)


# ---------------------------------------------------------------------------
# Weighted moments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentSet:
    """The six weighted averages and their derived location/spread parameters.

    ``R1, V1`` are the mean and variance of ``r`` under the ``1/v`` weighted
    asset measure, ``R2, V2`` the same under ``1/v**2``.
    """

    m_v1: float
    m_v1r: float
    m_v1r2: float
    m_v2: float
    m_v2r: float
    m_v2r2: float
    R1: float
    R2: float
    V1: float
    V2: float

    @classmethod
    def from_raw(cls, m_v1, m_v1r, m_v1r2, m_v2, m_v2r, m_v2r2) -> "MomentSet":
        raw = [float(t) for t in (m_v1, m_v1r, m_v1r2, m_v2, m_v2r, m_v2r2)]
        if not all(math.isfinite(t) for t in raw):
            raise ParameterError("moments must be finite")
        m_v1, m_v1r, m_v1r2, m_v2, m_v2r, m_v2r2 = raw
        if m_v1 <= 0 or m_v2 <= 0:
            raise DomainError("<v^-1> and <v^-2> must be positive")
        R1 = m_v1r / m_v1
        R2 = m_v2r / m_v2
        V1 = _weighted_variance(m_v1r2 / m_v1, R1)
        V2 = _weighted_variance(m_v2r2 / m_v2, R2)
        return cls(m_v1, m_v1r, m_v1r2, m_v2, m_v2r, m_v2r2, R1, R2, V1, V2)

    def scaled_variances(self, c: float) -> "MomentSet":
        """Moments after ``v -> c v``."""
        return MomentSet.from_raw(
            self.m_v1 / c, self.m_v1r / c, self.m_v1r2 / c,
            self.m_v2 / c**2, self.m_v2r / c**2, self.m_v2r2 / c**2,
        )

    def shifted_means(self, delta: float) -> "MomentSet":
        """Moments after ``r -> r + delta``."""
        d = delta
        return MomentSet.from_raw(
            self.m_v1, self.m_v1r + d * self.m_v1, self.m_v1r2 + 2 * d * self.m_v1r + d * d * self.m_v1,
            self.m_v2, self.m_v2r + d * self.m_v2, self.m_v2r2 + 2 * d * self.m_v2r + d * d * self.m_v2,
        )

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _weighted_variance(second: float, mean: float) -> float:
    var = second - mean * mean
    if var < 0:
        # Cancellation noise for (near) point masses.
        if -var <= 1e-14 * (mean * mean + 1.0):
            return 0.0
        raise DomainError(f"negative weighted variance {var}")
    return var


def population_moments(model: HyperModel) -> MomentSet:
    """Population moments by adaptive quadrature of independent 1-D factors."""
    r_dist, s_dist = model.mean_dist, model.ratio_dist
    es = {a: s_dist.expect(lambda x, a=a: x ** (-a)) for a in (1, 2)}
    # v^-a r^k = h^-a r^(k - 2a) under the product coupling
    shift = 2 if model.coupling == "product" else 0
    raw = []
    for a, k in ((1, 0), (1, 1), (1, 2), (2, 0), (2, 1), (2, 2)):
        power = k - shift * a
        raw.append(es[a] * (1.0 if power == 0 else r_dist.expect(lambda x, p=power: x**p)))
    return MomentSet.from_raw(*raw)


def empirical_moments(params: HyperParams) -> MomentSet:
    """Finite-N plug-in moments: plain averages over the assets."""
    r, v = params.means, params.variances
    if np.any(v <= 0):
        raise DomainError("all variances must be strictly positive")
    n = r.size
    iv = 1.0 / v
    iv2 = iv * iv

    def avg(a: np.ndarray) -> float:
        return math.fsum(a) / n

    return MomentSet.from_raw(avg(iv), avg(iv * r), avg(iv * r * r), avg(iv2), avg(iv2 * r), avg(iv2 * r * r))
