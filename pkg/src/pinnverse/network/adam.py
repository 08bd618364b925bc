"""Adam with bias-corrected first and second moments."""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from pinnverse.error_handling import DimensionMismatchError
from pinnverse.network.autodiff import Gradients
from pinnverse.network.mlp import NetState


@dataclass
class AdamState:
    """Step count and per-array moment estimates."""

    step: int
    m: List[np.ndarray]
    v: List[np.ndarray]

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls(
            step=0,
            m=[np.zeros_like(p, dtype=float) for p in params],
            v=[np.zeros_like(p, dtype=float) for p in params],
        )

    @classmethod
    def for_state(cls, state: NetState) -> "AdamState":
        return cls.zeros_like(state.parameters())


def adam_update(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    opt_state: AdamState,
    lr: Union[float, Sequence[float]],
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> Tuple[List[np.ndarray], AdamState]:
    """One update of a list of arrays; inputs are not modified.

    ``lr`` is one rate for every array or a sequence with one rate per array.
    """
    if len(params) != len(grads) or len(params) != len(opt_state.m):
        raise DimensionMismatchError(
            f"{len(params)} parameters, {len(grads)} gradients and "
            f"{len(opt_state.m)} moment slots"
        )
    if isinstance(lr, (int, float)):
        rates = [float(lr)] * len(params)
    else:
        rates = [float(r) for r in lr]
    if len(rates) != len(params):
        raise DimensionMismatchError(
            f"{len(rates)} learning rates for {len(params)} parameters"
        )
    step = opt_state.step + 1
    bc1 = 1.0 - beta1**step
    bc2 = 1.0 - beta2**step

    new_params: List[np.ndarray] = []
    new_m: List[np.ndarray] = []
    new_v: List[np.ndarray] = []
    for p, g, m, v, rate in zip(params, grads, opt_state.m, opt_state.v, rates):
        if p.shape != g.shape or p.shape != m.shape:
            raise DimensionMismatchError(
                f"Parameter {p.shape}, gradient {g.shape}, moment {m.shape} disagree"
            )
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * (g * g)
        new_params.append(p - rate * (m / bc1) / (np.sqrt(v / bc2) + eps))
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(step=step, m=new_m, v=new_v)


def clip_by_global_norm(grads: Gradients, max_norm: Optional[float]) -> Gradients:
    """Rescale ``grads`` so their global norm is at most ``max_norm``."""
    if max_norm is None:
        return grads
    norm = grads.global_norm()
    if norm <= max_norm:
        return grads
    factor = max_norm / norm
    return Gradients(
        weights=[w * factor for w in grads.weights],
        biases=[b * factor for b in grads.biases],
        raw_phys=grads.raw_phys * factor,
    )


def adam_step(
    state: NetState,
    grads: Gradients,
    opt_state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    phys_lr: Optional[float] = None,
) -> Tuple[NetState, AdamState]:
    """Update every weight, bias and raw physical parameter of ``state``.

    ``phys_lr`` sets a separate rate for ``raw_phys`` (``lr`` if unset).
    """
    params = state.parameters()
    rates = [lr] * (len(params) - 1) + [lr if phys_lr is None else phys_lr]
    params, opt_state = adam_update(
        params, grads.parameters(), opt_state, rates, beta1, beta2, eps
    )
    return state.with_parameters(params), opt_state
