"""
The Hard Concrete distribution: a Binary Concrete variable stretched to ``(l, r)`` and rectified
into ``[0, 1]``, so that exact zeros (and ones) have positive probability while samples remain
differentiable in the location ``γ`` through the reparameterization::

    u ~ U(0, 1)
    s = σ((log u - log(1 - u) + γ) / τ)
    s̄ = s · (r - l) + l
    z = min(1, max(0, s̄))

Larger ``γ`` gives larger samples. With ``half_open`` set, the upper point mass is moved to
``1 - 2⁻²⁰`` so that only ``z = 0`` switches a unit off completely and no sample ever equals 1.

Every function taking :class:`HardConcreteParams` also works when ``location`` is a traced node.
"""

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Any, Union

import numpy as np

from unitfinder_cli.constants import HALF_OPEN_EPSILON
from unitfinder_cli.core import autodiff as ad
from unitfinder_cli.core.autodiff import Node, RealArray
from unitfinder_cli.errors import ConfigError

__all__ = [
    "HardConcreteParams",
    "MaskSample",
    "deterministic_mask",
    "discretize",
    "draw_noise",
    "expected_c0",
    "expected_value",
    "initial_logit",
    "interior_mass",
    "prob_nonzero",
    "prob_one",
    "relaxed_mask",
    "sample",
]

DEFAULT_TEMPERATURE = 0.5
DEFAULT_LOWER = -0.1
DEFAULT_UPPER = 1.1
DISCRETIZE_SAMPLES = 10_000


@dataclass(frozen=True)
class HardConcreteParams:
    """Per-unit location logits ``γ`` and the shared temperature and stretch bounds."""

    location: Union[RealArray, Node]
    temperature: float = DEFAULT_TEMPERATURE
    lower: float = DEFAULT_LOWER
    upper: float = DEFAULT_UPPER
    half_open: bool = True

    def __post_init__(self) -> None:
        if not self.temperature > 0:
            raise ConfigError(f"temperature must be positive, got {self.temperature}")
        if not self.lower <= 0 < 1 <= self.upper:
            raise ConfigError(
                f"stretch bounds must satisfy l <= 0 < 1 <= r, got ({self.lower}, {self.upper})"
            )
        if len(self.location.shape) != 1:
            raise ConfigError("location must be a vector")

    @classmethod
    def initial(
        cls,
        units: int,
        probability: float = 0.5,
        temperature: float = DEFAULT_TEMPERATURE,
        lower: float = DEFAULT_LOWER,
        upper: float = DEFAULT_UPPER,
        half_open: bool = True,
    ) -> "HardConcreteParams":
        """Constant locations such that every unit is nonzero with ``probability``"""
        value = initial_logit(probability, temperature, lower, upper)
        return cls(np.full(units, value), temperature, lower, upper, half_open)

    @property
    def units(self) -> int:
        return int(self.location.shape[0])

    @property
    def ceiling(self) -> float:
        """The largest value a sample can take"""
        return 1.0 - HALF_OPEN_EPSILON if self.half_open else 1.0

    def with_location(self, location: Union[RealArray, Node]) -> "HardConcreteParams":
        return replace(self, location=location)


@dataclass(frozen=True)
class MaskSample:
    """The noise, the pre-rectification stretch input ``s`` and the rectified mask ``z``."""

    u: RealArray
    s: RealArray
    z: RealArray


def initial_logit(
    probability: float = 0.5,
    temperature: float = DEFAULT_TEMPERATURE,
    lower: float = DEFAULT_LOWER,
    upper: float = DEFAULT_UPPER,
) -> float:
    """The location ``γ`` at which ``P(z ≠ 0) = probability``"""
    if not 0 < probability < 1:
        raise ConfigError("initial probability must lie in (0, 1)")
    if lower == 0:
        raise ConfigError("with l = 0 every sample is nonzero")
    return float(np.log(probability / (1 - probability)) + temperature * np.log(-lower / upper))


def draw_noise(rng: np.random.Generator, shape: Any) -> RealArray:
    """Uniform noise strictly inside ``(0, 1)``, on the grid of multiples of ``2⁻⁵³``"""
    return rng.integers(1, 2**53, size=shape).astype(np.float64) / 2.0**53


def relaxed_mask(params: HardConcreteParams, u: Any) -> Any:
    """
    The rectified sample for given noise ``u``; broadcasts over leading axes of ``u``.

    Differentiable in the location wherever the stretched value lies strictly inside
    ``(0, ceiling)``.
    """
    noise = np.log(u) - np.log1p(-np.asarray(u))
    s = ad.sigmoid((params.location + noise) / params.temperature)
    stretched = s * (params.upper - params.lower) + params.lower
    return ad.clamp(stretched, 0.0, params.ceiling)


def sample(params: HardConcreteParams, rng: np.random.Generator) -> MaskSample:
    """
    Draw one mask.

    :raises ConfigError: If ``τ <= 0`` (checked when the parameters are built).
    """
    location = np.asarray(params.location.value if isinstance(params.location, Node) else params.location)
    u = draw_noise(rng, location.shape)
    s = ad.sigmoid((location + np.log(u) - np.log1p(-u)) / params.temperature)
    z = ad.clamp(s * (params.upper - params.lower) + params.lower, 0.0, params.ceiling)
    return MaskSample(u, s, z)


def prob_nonzero(params: HardConcreteParams) -> Any:
    """
    ``P(z_j ≠ 0)`` per unit, in closed form: the probability that the stretched value exceeds
    0, i.e. ``σ(γ - τ log(-l / r))``.
    """
    if params.lower == 0:
        return ad.add(ad.mul(params.location, 0.0), 1.0)
    return ad.sigmoid(params.location - params.temperature * float(np.log(-params.lower / params.upper)))


def prob_one(params: HardConcreteParams) -> Any:
    """
    ``P(s̄ ≥ 1)`` per unit: the mass at the upper rectification point,
    ``σ(γ - τ log((1 - l) / (r - 1)))``.
    """
    if params.upper == 1:
        return ad.mul(params.location, 0.0)
    shift = params.temperature * float(np.log((1 - params.lower) / (params.upper - 1)))
    return ad.sigmoid(params.location - shift)


def expected_c0(params: HardConcreteParams) -> Any:
    """Expected number of nonzero mask entries"""
    return ad.sum_(prob_nonzero(params))


def interior_mass(params: HardConcreteParams) -> Any:
    """Expected number of mask entries strictly between 0 and 1"""
    return ad.sum_(prob_nonzero(params) - prob_one(params))


def deterministic_mask(params: HardConcreteParams) -> Any:
    """The noise-free estimate ``clamp(σ(γ)(r - l) + l, 0, 1)`` used at test time by L0 layers"""
    stretched = ad.sigmoid(params.location) * (params.upper - params.lower) + params.lower
    return ad.clamp(stretched, 0.0, params.ceiling)


@lru_cache(maxsize=64)
def _expected_value(
    location: bytes,
    temperature: float,
    lower: float,
    upper: float,
    half_open: bool,
    samples: int,
    seed: int,
) -> RealArray:
    params = HardConcreteParams(np.frombuffer(location, dtype=np.float64), temperature, lower, upper, half_open)
    rng = np.random.default_rng(seed)
    total = np.zeros(params.units)
    remaining = samples
    while remaining:
        chunk = min(remaining, 1000)
        total += np.sum(relaxed_mask(params, draw_noise(rng, (chunk, params.units))), axis=0)
        remaining -= chunk
    result = total / samples
    result.setflags(write=False)
    return result


def expected_value(params: HardConcreteParams, samples: int = DISCRETIZE_SAMPLES, seed: int = 0) -> RealArray:
    """
    Monte Carlo estimate of ``E[z_j]`` with a fixed seed.

    Results are cached per (locations, distribution, samples, seed).
    """
    location = np.ascontiguousarray(
        params.location.value if isinstance(params.location, Node) else params.location, dtype=np.float64
    )
    return _expected_value(
        location.tobytes(),
        float(params.temperature),
        float(params.lower),
        float(params.upper),
        bool(params.half_open),
        int(samples),
        int(seed),
    )


def discretize(params: HardConcreteParams, samples: int = DISCRETIZE_SAMPLES, seed: int = 0) -> RealArray:
    """
    The binary mask: ``m_j = 1`` iff ``E[z_j] > 0.5`` (a unit exactly at 0.5 is dropped).

    :param samples: Monte Carlo sample count; at least 10⁴.
    """
    if samples < DISCRETIZE_SAMPLES:
        raise ConfigError(f"discretization needs at least {DISCRETIZE_SAMPLES} samples")
    return (expected_value(params, samples, seed) > 0.5).astype(np.float64)
