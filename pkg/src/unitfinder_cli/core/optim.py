from collections.abc import Mapping
from dataclasses import dataclass, field, replace

import numpy as np

from unitfinder_cli.core.autodiff import RealArray
from unitfinder_cli.errors import ConfigError

Params = dict[str, RealArray]


def global_norm(grads: Mapping[str, RealArray]) -> float:
    """Euclidean norm of all gradients taken together"""
    return float(np.sqrt(sum(float(np.sum(grads[name] * grads[name])) for name in grads)))


def clip_by_global_norm(
    grads: Mapping[str, RealArray], max_norm: float
) -> tuple[dict[str, RealArray], float]:
    """
    Rescale gradients so that their global norm does not exceed ``max_norm``.

    :return: The (possibly) rescaled gradients and the norm before clipping.
    """
    norm = global_norm(grads)
    scale = max_norm / norm if norm > max_norm > 0 else 1.0
    return {name: grads[name] * scale for name in grads}, norm


@dataclass
class SGD:
    """Plain stochastic gradient descent with optional global-norm clipping."""

    learning_rate: float
    clip_norm: float = 0.0

    def __post_init__(self) -> None:
        if self.learning_rate < 0:
            raise ConfigError("learning rate must be non-negative")

    def step(self, params: Mapping[str, RealArray], grads: Mapping[str, RealArray]) -> Params:
        if self.clip_norm > 0:
            grads, _ = clip_by_global_norm(grads, self.clip_norm)
        return {
            name: value - self.learning_rate * grads[name] if name in grads else value
            for name, value in params.items()
        }


@dataclass(frozen=True)
class Adam:
    """
    Adaptive per-coordinate steps (Adam) over named arrays.

    The first and second moments are kept per parameter name; ``step_count`` is shared. A step never
    touches the optimizer it is called on: the advanced moments come back in a new instance.
    """

    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    first_moment: Mapping[str, RealArray] = field(default_factory=dict)
    second_moment: Mapping[str, RealArray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.learning_rate < 0:
            raise ConfigError("learning rate must be non-negative")

    def step(
        self, params: Mapping[str, RealArray], grads: Mapping[str, RealArray]
    ) -> tuple[Params, "Adam"]:
        """
        :return: The updated parameters and the optimizer holding the advanced moments. With a zero
            learning rate both come back unchanged.
        """
        if self.learning_rate == 0:
            return dict(params), self
        count = self.step_count + 1
        first, second = dict(self.first_moment), dict(self.second_moment)
        updated: Params = {}
        for name, value in params.items():
            if name not in grads:
                updated[name] = value
                continue
            g = grads[name]
            m = self.beta1 * first.get(name, np.zeros_like(g)) + (1 - self.beta1) * g
            v = self.beta2 * second.get(name, np.zeros_like(g)) + (1 - self.beta2) * g * g
            first[name], second[name] = m, v
            m_hat = m / (1 - self.beta1**count)
            v_hat = v / (1 - self.beta2**count)
            updated[name] = value - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)
        return updated, replace(self, step_count=count, first_moment=first, second_moment=second)
