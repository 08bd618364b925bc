"""Fully connected trajectory network with an exact time derivative.

The network maps normalized time tau in [0, 1] to the observable vector.
``forward_with_dt`` pushes the pair (value, d/dtau) through every layer
in one pass; the cached intermediates feed :func:`dual_backward`, which
returns weight gradients for any upstream gradient on (value, d/dtau).

Layers act on row batches: z = a @ W.T + b with W of shape (out, in).
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np

from pinnverse.error_handling import DimensionMismatchError

logger = logging.getLogger(__name__)

ActivationName = Literal["tanh", "sin"]

# (sigma, sigma', sigma'') evaluated from the pre-activation z
Activation = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray, np.ndarray]]


def _tanh(z: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    s = np.tanh(z)
    d1 = 1.0 - s * s
    return s, d1, -2.0 * s * d1


def _sin(z: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    s = np.sin(z)
    return s, np.cos(z), -s


ACTIVATIONS: Dict[str, Activation] = {"tanh": _tanh, "sin": _sin}


@dataclass(frozen=True)
class NetConfig:
    """Architecture of the trajectory network."""

    output_dim: int
    hidden_layers: Tuple[int, ...] = (64, 64, 64, 64)
    activation: ActivationName = "tanh"
    seed: int = 0
    input_dim: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_layers", tuple(self.hidden_layers))
        if self.input_dim != 1:
            raise ValueError("The trajectory network takes exactly one input (time)")
        if self.output_dim < 1:
            raise ValueError(
                f"Output dimension must be positive, got {self.output_dim}"
            )
        if any(width < 1 for width in self.hidden_layers):
            raise ValueError(
                f"Hidden widths must be positive, got {self.hidden_layers}"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(
                f"Invalid activation: {self.activation}. "
                f"Must be one of: {', '.join(ACTIVATIONS)}"
            )

    @property
    def layer_sizes(self) -> List[int]:
        return [self.input_dim, *self.hidden_layers, self.output_dim]


@dataclass
class NetState:
    """Weights, biases and the raw physical parameters trained with them.

    ``raw_phys`` is unconstrained; how it maps to J and decay rates is
    owned by the trainer (decay rates are squares of their raw entries).
    """

    config: NetConfig
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    raw_phys: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self) -> None:
        sizes = self.config.layer_sizes
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise DimensionMismatchError(
                f"Expected {len(sizes) - 1} layers, got {len(self.weights)} weights "
                f"and {len(self.biases)} biases"
            )
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[k + 1], sizes[k]) or b.shape != (sizes[k + 1],):
                raise DimensionMismatchError(
                    f"Layer {k} has shapes {w.shape}/{b.shape}, expected "
                    f"{(sizes[k + 1], sizes[k])}/{(sizes[k + 1],)}"
                )
        self.raw_phys = np.asarray(self.raw_phys, dtype=float).reshape(-1)

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def parameters(self) -> List[np.ndarray]:
        """Flat list [W0, b0, W1, b1, ..., raw_phys] shared with Adam."""
        params: List[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            params.extend((w, b))
        params.append(self.raw_phys)
        return params

    def with_parameters(self, params: Sequence[np.ndarray]) -> "NetState":
        if len(params) != 2 * self.n_layers + 1:
            raise DimensionMismatchError(
                f"Expected {2 * self.n_layers + 1} parameter arrays, got {len(params)}"
            )
        return NetState(
            config=self.config,
            weights=[np.asarray(p) for p in params[0:-1:2]],
            biases=[np.asarray(p) for p in params[1:-1:2]],
            raw_phys=np.asarray(params[-1]),
        )

    def copy(self) -> "NetState":
        return self.with_parameters([p.copy() for p in self.parameters()])


def init(config: NetConfig, raw_phys: Optional[np.ndarray] = None) -> NetState:
    """Uniform weights on +-sqrt(6 / (fan_in + fan_out)), zero biases."""
    rng = np.random.Generator(np.random.PCG64(config.seed))
    sizes = config.layer_sizes
    weights: List[np.ndarray] = []
    biases: List[np.ndarray] = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, (fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    raw = np.zeros(0) if raw_phys is None else np.array(raw_phys, dtype=float)
    logger.debug(f"Initialized network {sizes} with seed {config.seed}")
    return NetState(config=config, weights=weights, biases=biases, raw_phys=raw)


@dataclass
class DualOutput:
    """Network value and its derivative with respect to normalized time.

    Both arrays have shape (n_times, output_dim).
    """

    value: np.ndarray
    dt: np.ndarray
    cache: Dict[str, list] = field(default_factory=dict, repr=False)


def _as_column(tau: np.ndarray) -> np.ndarray:
    tau = np.asarray(tau, dtype=float)
    return tau.reshape(-1, 1)


def forward(state: NetState, tau: np.ndarray) -> np.ndarray:
    """Value only, shape (n_times, output_dim)."""
    activation = ACTIVATIONS[state.config.activation]
    a = _as_column(tau)
    for w, b in zip(state.weights[:-1], state.biases[:-1]):
        a = activation(a @ w.T + b)[0]
    return a @ state.weights[-1].T + state.biases[-1]


def forward_with_dt(state: NetState, tau: np.ndarray) -> DualOutput:
    """Single pass carrying (value, d/dtau) through every layer."""
    activation = ACTIVATIONS[state.config.activation]
    a = _as_column(tau)
    da = np.ones_like(a)
    acts, dacts, d1s, d2s, dzs = [a], [da], [], [], []
    for w, b in zip(state.weights[:-1], state.biases[:-1]):
        z = a @ w.T + b
        dz = da @ w.T
        s, d1, d2 = activation(z)
        a, da = s, d1 * dz
        acts.append(a)
        dacts.append(da)
        d1s.append(d1)
        d2s.append(d2)
        dzs.append(dz)
    value = a @ state.weights[-1].T + state.biases[-1]
    dt = da @ state.weights[-1].T
    cache = {"acts": acts, "dacts": dacts, "d1": d1s, "d2": d2s, "dz": dzs}
    return DualOutput(value=value, dt=dt, cache=cache)


def dual_backward(
    state: NetState,
    output: DualOutput,
    g_value: Optional[np.ndarray],
    g_dt: Optional[np.ndarray],
) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Weight and bias gradients given upstream gradients on value and dt."""
    shape = output.value.shape
    g_a = np.zeros(shape) if g_value is None else g_value
    g_da = np.zeros(shape) if g_dt is None else g_dt
    cache = output.cache
    acts, dacts = cache["acts"], cache["dacts"]
    n = state.n_layers
    g_w: List[np.ndarray] = [np.empty(0)] * n
    g_b: List[np.ndarray] = [np.empty(0)] * n

    # output layer is affine in both channels
    g_w[n - 1] = g_a.T @ acts[-1] + g_da.T @ dacts[-1]
    g_b[n - 1] = g_a.sum(axis=0)
    g_a, g_da = g_a @ state.weights[n - 1], g_da @ state.weights[n - 1]

    for k in range(n - 2, -1, -1):
        d1, d2, dz = cache["d1"][k], cache["d2"][k], cache["dz"][k]
        g_z = g_a * d1 + g_da * d2 * dz
        g_dz = g_da * d1
        g_w[k] = g_z.T @ acts[k] + g_dz.T @ dacts[k]
        g_b[k] = g_z.sum(axis=0)
        g_a, g_da = g_z @ state.weights[k], g_dz @ state.weights[k]

    return g_w, g_b
