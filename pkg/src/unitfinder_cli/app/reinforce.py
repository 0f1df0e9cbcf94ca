"""
Score-function (REINFORCE) estimation of the mask gradient, for comparison with the
reparameterized Hard Concrete search.

Masks are drawn from independent Bernoulli variables ``m_j ~ B(σ(γ_j))``. The gradient of the
expected loss in ``γ`` is estimated as ``mean((L - L̄) (m - σ(γ)))`` over the batch, with a moving
average ``L̄`` of past batch losses as variance-reducing baseline. The expected number of units
``Σ σ(γ)`` is differentiated exactly, and the baseline values still receive pathwise gradients.
"""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from unitfinder_cli.app.objective import batch_kl, batch_ratios
from unitfinder_cli.app.search import (
    SearchConfig,
    SearchState,
    StepDiagnostics,
    ascend_multipliers,
    constraint_violations,
)
from unitfinder_cli.core import autodiff as ad
from unitfinder_cli.core.autodiff import RealArray
from unitfinder_cli.core.intervention import InterventionBatch, intervened_logits
from unitfinder_cli.core.lstm_lm import LanguageModel
from unitfinder_cli.errors import NumericalError

__all__ = [
    "MovingAverage",
    "bernoulli_masks",
    "discretize_bernoulli",
    "reinforce_step",
    "score_function_gradient",
]


@dataclass(frozen=True)
class MovingAverage:
    """Exponential moving average, initialised with the first value it sees."""

    decay: float = 0.9
    value: Optional[float] = None

    def update(self, observation: float) -> "MovingAverage":
        if self.value is None:
            return replace(self, value=float(observation))
        return replace(self, value=self.decay * self.value + (1 - self.decay) * float(observation))


def bernoulli_masks(rng: np.random.Generator, location: RealArray, rows: int) -> RealArray:
    """``(rows, k)`` binary masks, unit ``j`` on with probability ``σ(γ_j)``"""
    probabilities = ad.sigmoid(np.asarray(location, dtype=np.float64))
    return (rng.random((rows, len(probabilities))) < probabilities).astype(np.float64)


def discretize_bernoulli(location: RealArray) -> RealArray:
    """Keep the units that are on with probability above one half"""
    return (ad.sigmoid(np.asarray(location, dtype=np.float64)) > 0.5).astype(np.float64)


def score_function_gradient(
    losses: RealArray, masks: RealArray, probabilities: RealArray, baseline: float
) -> RealArray:
    """
    ``mean_rows((L - baseline) (m - p))``: the score-function estimate of ``∂E[L]/∂γ``.

    ``m - p`` is the derivative of ``log P(m)`` in the logits.
    """
    advantages = np.asarray(losses, dtype=np.float64) - baseline
    return np.mean(advantages[:, None] * (masks - probabilities[None, :]), axis=0)


def reinforce_step(
    state: SearchState,
    batch: InterventionBatch,
    model: LanguageModel,
    config: SearchConfig,
    rng: np.random.Generator,
) -> tuple[SearchState, StepDiagnostics]:
    """
    One update with one Bernoulli mask per row.

    :raises NumericalError: If a loss term is not finite.
    """
    units = len(state.location)
    probabilities = ad.sigmoid(state.location)
    masks = bernoulli_masks(rng, state.location, len(batch))

    tracer = ad.Tracer()
    raw = tracer.input("baseline_logits", state.baseline_logits)
    logits = intervened_logits(model, batch, masks, ad.tanh(raw))
    ratios = tracer.output("ratios", batch_ratios(batch, logits))
    per_row = ratios
    if config.kl_weight > 0:
        kl = tracer.output("kl", batch_kl(batch, logits, reduce=False))
        per_row = per_row + config.kl_weight * kl
    tracer.output("loss", ad.mean(tracer.output("per_row", per_row)))
    evaluation = tracer.evaluation()

    losses = np.asarray(evaluation["per_row"])
    c0 = float(np.sum(probabilities))
    values = {
        "loss": float(evaluation["loss"]),
        "ratio": float(np.mean(evaluation["ratios"])),
        "kl": float(np.mean(evaluation["kl"])) if config.kl_weight > 0 else 0.0,
    }
    if not all(np.isfinite(v) for v in values.values()):
        raise NumericalError(
            "score-function loss is not finite",
            {"step": state.step, **values, "lambdas": state.lambdas.tolist()},
        )

    average = MovingAverage(config.moving_average_decay, state.moving_average)
    reference = average.value if average.value is not None else values["loss"]
    location_grad = score_function_gradient(losses, masks, probabilities, reference)
    location_grad = location_grad + state.lambdas[0] * probabilities * (1 - probabilities)
    grads = {
        "location": location_grad,
        "baseline_logits": ad.backpropagate(evaluation, "loss", ["baseline_logits"])["baseline_logits"],
    }
    updated, optimizer = state.optimizer.step(
        {"location": state.location, "baseline_logits": state.baseline_logits}, grads
    )
    # Bernoulli masks have no interior mass
    lambdas = ascend_multipliers(
        state.lambdas, constraint_violations(c0, 0.0, units, config), config.lambda_learning_rate
    )
    new_state = replace(
        state,
        location=updated["location"],
        baseline_logits=updated["baseline_logits"],
        lambdas=lambdas,
        optimizer=optimizer,
        step=state.step + 1,
        moving_average=average.update(values["loss"]).value,
    )
    objective = values["loss"] + float(state.lambdas[0]) * (c0 - config.alpha * units)
    diagnostics = StepDiagnostics(
        objective=objective - float(state.lambdas[1]) * config.beta,
        ratio=values["ratio"],
        c0=c0,
        interior=0.0,
        kl=values["kl"],
        flips=int(np.sum(evaluation["ratios"] < 1.0)),
        rows=len(batch),
        lambdas=(float(lambdas[0]), float(lambdas[1])),
    )
    return new_state, diagnostics
