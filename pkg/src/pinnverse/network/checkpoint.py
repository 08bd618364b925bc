"""JSON checkpoints of a network state.

Layout: format tag, architecture, then per layer its shape with the
row-major weights and the bias, then ``raw_phys``.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np

from pinnverse.data.trajectory_io import read_json, write_json
from pinnverse.error_handling import DimensionMismatchError, IngestionError
from pinnverse.network.mlp import NetConfig, NetState

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "pinnverse-netstate/1"


def state_to_dict(state: NetState) -> Dict[str, Any]:
    config = state.config
    return {
        "format": CHECKPOINT_FORMAT,
        "config": {
            "output_dim": config.output_dim,
            "hidden_layers": list(config.hidden_layers),
            "activation": config.activation,
            "seed": config.seed,
        },
        "layers": [
            {"shape": list(w.shape), "weights": w.ravel().tolist(), "bias": b.tolist()}
            for w, b in zip(state.weights, state.biases)
        ],
        "raw_phys": state.raw_phys.tolist(),
    }


def state_from_dict(data: Dict[str, Any]) -> NetState:
    if data.get("format") != CHECKPOINT_FORMAT:
        raise IngestionError(
            f"Unsupported checkpoint format: {data.get('format')!r}. "
            f"Expected {CHECKPOINT_FORMAT}"
        )
    try:
        config = NetConfig(**data["config"])
        weights, biases = [], []
        for layer in data["layers"]:
            shape = tuple(layer["shape"])
            weights.append(np.asarray(layer["weights"], dtype=float).reshape(shape))
            biases.append(np.asarray(layer["bias"], dtype=float))
        return NetState(config, weights, biases, np.asarray(data["raw_phys"]))
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, DimensionMismatchError):
            raise
        raise IngestionError(f"Malformed checkpoint: {e}") from e


def save_checkpoint(state: NetState, path: Union[str, Path]) -> Path:
    path = write_json(state_to_dict(state), path)
    logger.info(f"Saved checkpoint to {path}")
    return path


def load_checkpoint(path: Union[str, Path]) -> NetState:
    state = state_from_dict(read_json(path))
    logger.debug(f"Loaded checkpoint from {path}")
    return state
