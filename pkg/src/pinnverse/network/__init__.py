"""Trajectory network with time derivatives, reverse-mode tape and Adam."""

from pinnverse.network.adam import AdamState, adam_step, adam_update
from pinnverse.network.autodiff import Gradients, Node, Tape, backward
from pinnverse.network.checkpoint import load_checkpoint, save_checkpoint
from pinnverse.network.mlp import (
    DualOutput,
    NetConfig,
    NetState,
    forward,
    forward_with_dt,
    init,
)

__all__ = [
    "AdamState",
    "DualOutput",
    "Gradients",
    "NetConfig",
    "NetState",
    "Node",
    "Tape",
    "adam_step",
    "adam_update",
    "backward",
    "forward",
    "forward_with_dt",
    "init",
    "load_checkpoint",
    "save_checkpoint",
]
