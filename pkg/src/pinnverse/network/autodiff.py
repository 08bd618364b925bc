"""Tape-based reverse mode over the PINNverse loss family.

A :class:`Tape` records nodes in evaluation order. Each node names a
primitive; :func:`backward` walks the tape in reverse and applies the rule
registered for that primitive. Supported primitives:

- ``network``: trajectory network value and d/dtau (weight leaf)
- ``raw_phys``: the raw physical-parameter vector (leaf)
- ``trial_value`` / ``trial_dt``: s = s0 + tau NN and ds/dt = (NN + tau NN') / T
- ``embed_masked``: scatter a slice of a vector into a zero vector
- ``square``: elementwise square (decay-rate reparametrization)
- ``affine_generator``: s A(J, gamma)^T + b(J, gamma)
- ``subtract``: a - b, with ``b`` a node or a constant
- ``sum_squares``: sum of squared entries
- ``scale_add``: weighted sum of scalars
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from pinnverse.dynamics.liouvillian import GeneratorGradients
from pinnverse.error_handling import UnsupportedPrimitiveError
from pinnverse.network.mlp import DualOutput, NetState, dual_backward, forward_with_dt

logger = logging.getLogger(__name__)


@dataclass
class Node:
    """One recorded primitive application."""

    index: int
    op: str
    parents: Tuple["Node", ...]
    value: Any
    context: Dict[str, Any] = field(default_factory=dict, repr=False)


@dataclass
class Gradients:
    """Reverse-mode gradients, laid out like :meth:`NetState.parameters`."""

    weights: List[np.ndarray]
    biases: List[np.ndarray]
    raw_phys: np.ndarray

    @classmethod
    def zeros_like(cls, state: NetState) -> "Gradients":
        return cls(
            weights=[np.zeros_like(w) for w in state.weights],
            biases=[np.zeros_like(b) for b in state.biases],
            raw_phys=np.zeros_like(state.raw_phys),
        )

    def parameters(self) -> List[np.ndarray]:
        params: List[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            params.extend((w, b))
        params.append(self.raw_phys)
        return params

    def global_norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(g * g)) for g in self.parameters())))


class Tape:
    """Records the forward evaluation of one loss."""

    def __init__(self) -> None:
        self.nodes: List[Node] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def record(
        self, op: str, parents: Sequence[Node], value: Any, **context: Any
    ) -> Node:
        node = Node(len(self.nodes), op, tuple(parents), value, context)
        self.nodes.append(node)
        return node

    # leaves

    def network(self, state: NetState, tau: np.ndarray) -> Node:
        """Network value and d/dtau at normalized times ``tau``."""
        output = forward_with_dt(state, tau)
        return self.record("network", (), output, tau=np.asarray(tau, dtype=float))

    def raw_phys(self, state: NetState) -> Node:
        return self.record("raw_phys", (), state.raw_phys)

    # trial form with the initial condition built in

    def trial_value(self, net: Node, s0: np.ndarray, tau: np.ndarray) -> Node:
        tau_col = np.asarray(tau, dtype=float).reshape(-1, 1)
        output: DualOutput = net.value
        value = s0 + tau_col * output.value
        return self.record("trial_value", (net,), value, tau=tau_col)

    def trial_dt(self, net: Node, tau: np.ndarray, final_time: float) -> Node:
        """ds/dt of the trial form in physical time units."""
        tau_col = np.asarray(tau, dtype=float).reshape(-1, 1)
        output: DualOutput = net.value
        value = (output.value + tau_col * output.dt) / final_time
        return self.record(
            "trial_dt", (net,), value, tau=tau_col, final_time=final_time
        )

    # physical parameters

    def embed_masked(
        self, x: Node, source: np.ndarray, target: np.ndarray, size: int
    ) -> Node:
        """out = zeros(size); out[target] = x[source]."""
        out = np.zeros(size)
        out[target] = x.value[source]
        return self.record("embed_masked", (x,), out, source=source, target=target)

    def square(self, x: Node) -> Node:
        return self.record("square", (x,), x.value * x.value)

    def affine_generator(
        self, s: Node, j: Node, gamma: Node, gradients: GeneratorGradients
    ) -> Node:
        """Rows of A s + b for a batch of states, A and b rebuilt from (J, gamma)."""
        A = np.tensordot(j.value, gradients.dA_dJ, axes=1) + np.tensordot(
            gamma.value, gradients.dA_dgamma, axes=1
        )
        b = np.tensordot(j.value, gradients.db_dJ, axes=1) + np.tensordot(
            gamma.value, gradients.db_dgamma, axes=1
        )
        value = s.value @ A.T + b
        return self.record(
            "affine_generator", (s, j, gamma), value, A=A, gradients=gradients
        )

    # reductions

    def subtract(self, a: Node, b: Union[Node, np.ndarray]) -> Node:
        if isinstance(b, Node):
            return self.record("subtract", (a, b), a.value - b.value)
        return self.record("subtract", (a,), a.value - np.asarray(b))

    def sum_squares(self, x: Node) -> Node:
        return self.record("sum_squares", (x,), float(np.sum(x.value * x.value)))

    def scale_add(self, terms: Sequence[Tuple[float, Node]]) -> Node:
        weights = tuple(float(w) for w, _ in terms)
        nodes = tuple(node for _, node in terms)
        value = float(sum(w * node.value for w, node in zip(weights, nodes)))
        return self.record("scale_add", nodes, value, weights=weights)


# Each rule maps (node, upstream gradient) to one gradient per parent.
BackwardRule = Callable[[Node, Any], List[Any]]


def _trial_value_rule(node: Node, g: np.ndarray) -> List[Any]:
    return [(node.context["tau"] * g, None)]


def _trial_dt_rule(node: Node, g: np.ndarray) -> List[Any]:
    tau, final_time = node.context["tau"], node.context["final_time"]
    return [(g / final_time, tau * g / final_time)]


def _embed_masked_rule(node: Node, g: np.ndarray) -> List[Any]:
    (x,) = node.parents
    g_x = np.zeros_like(x.value)
    np.add.at(g_x, node.context["source"], g[node.context["target"]])
    return [g_x]


def _square_rule(node: Node, g: np.ndarray) -> List[Any]:
    return [2.0 * node.parents[0].value * g]


def _affine_generator_rule(node: Node, g: np.ndarray) -> List[Any]:
    s = node.parents[0].value
    A, gradients = node.context["A"], node.context["gradients"]
    g_s = g @ A
    g_total = g.sum(axis=0)
    g_j = np.einsum("nk,ckl,nl->c", g, gradients.dA_dJ, s)
    g_j += gradients.db_dJ @ g_total
    g_gamma = np.einsum("nk,ckl,nl->c", g, gradients.dA_dgamma, s)
    g_gamma += gradients.db_dgamma @ g_total
    return [g_s, g_j, g_gamma]


def _subtract_rule(node: Node, g: np.ndarray) -> List[Any]:
    if len(node.parents) == 2:
        return [g, -g]
    return [g]


def _sum_squares_rule(node: Node, g: float) -> List[Any]:
    return [2.0 * node.parents[0].value * g]


def _scale_add_rule(node: Node, g: float) -> List[Any]:
    return [w * g for w in node.context["weights"]]


BACKWARD_RULES: Dict[str, BackwardRule] = {
    "trial_value": _trial_value_rule,
    "trial_dt": _trial_dt_rule,
    "embed_masked": _embed_masked_rule,
    "square": _square_rule,
    "affine_generator": _affine_generator_rule,
    "subtract": _subtract_rule,
    "sum_squares": _sum_squares_rule,
    "scale_add": _scale_add_rule,
}

LEAVES = ("network", "raw_phys")


def _accumulate(current: Any, incoming: Any) -> Any:
    if incoming is None:
        return current
    if current is None:
        return incoming
    if isinstance(current, tuple):
        return tuple(_accumulate(c, i) for c, i in zip(current, incoming))
    return current + incoming


def backward(state: NetState, tape: Tape, output: Optional[Node] = None) -> Gradients:
    """Exact gradients of a scalar tape output with respect to ``state``.

    Args:
        state: The network state the tape was recorded with
        tape: Recorded loss graph
        output: Scalar node to differentiate; defaults to the last node

    Raises:
        UnsupportedPrimitiveError: a node on the tape has no reverse rule
    """
    if not tape.nodes:
        raise ValueError("Cannot differentiate an empty tape")
    if output is None:
        output = tape.nodes[-1]
    for node in tape.nodes[: output.index + 1]:
        if node.op not in BACKWARD_RULES and node.op not in LEAVES:
            raise UnsupportedPrimitiveError(
                f"No reverse rule for primitive {node.op!r}"
            )

    grads = Gradients.zeros_like(state)
    pending: Dict[int, Any] = {output.index: 1.0}
    for node in reversed(tape.nodes[: output.index + 1]):
        g = pending.pop(node.index, None)
        if g is None:
            continue
        if node.op == "network":
            g_w, g_b = dual_backward(state, node.value, g[0], g[1])
            for k in range(state.n_layers):
                grads.weights[k] += g_w[k]
                grads.biases[k] += g_b[k]
            continue
        if node.op == "raw_phys":
            grads.raw_phys += g
            continue
        for parent, g_parent in zip(node.parents, BACKWARD_RULES[node.op](node, g)):
            pending[parent.index] = _accumulate(pending.get(parent.index), g_parent)
    return grads
