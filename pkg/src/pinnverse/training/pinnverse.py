"""Joint training of the trajectory network and the physical parameters.

The total loss is lambda_m * L_m + lambda_d * L_d where

- L_m is built from the residual ds/dt - (A(theta) s + b(theta)) at the
  physics collocation times over every observable, and
- L_d from the mismatch between the network and the data at the data
  collocation times.

With ``loss_scale="sum"`` both terms are plain sums of squares. The default
``"normalized"`` takes means instead and measures the residual in units of
w0 = 2 pi / T, which puts both terms on the scale of a squared expectation
value.

The network enters through the trial form s(t) = s0 + (t/T) NN(t/T), so
s(0) = s0 holds exactly. Trainable couplings are raw entries of
``NetState.raw_phys``; decay rates are the squares of theirs.
"""

import logging
import time
from dataclasses import dataclass
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from pinnverse.core.metrics import group_mape, parameter_errors
from pinnverse.core.models import (
    ChannelSet,
    FitReport,
    LossRecord,
    ParameterSet,
    RunSummary,
    TrainableMask,
    Trajectory,
    channel_preset,
)
from pinnverse.dynamics.lindblad import plus_plus_state
from pinnverse.dynamics.liouvillian import (
    GeneratorFactory,
    evolve_pauli,
    generator_factory,
)
from pinnverse.dynamics.sampling import omega0
from pinnverse.error_handling import (
    AllRestartsFailedError,
    ConfigurationError,
    DimensionMismatchError,
    DivergenceError,
    report_error,
)
from pinnverse.network.adam import AdamState, adam_step, clip_by_global_norm
from pinnverse.network.autodiff import Gradients, Node, Tape, backward
from pinnverse.network.mlp import NetConfig, NetState, init

logger = logging.getLogger(__name__)


class FitConfig(BaseModel):
    """Hyperparameters of one PINNverse fit."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    n_t: int = Field(default=200, description="Physics collocation points")
    n_c: int = Field(default=50, description="Data collocation points")
    final_time: Optional[float] = Field(
        default=None, description="Evolution window T (last data time if unset)"
    )
    max_steps: int = Field(default=40000, ge=1)
    learning_rate: float = Field(default=2e-3)
    lr_decay: float = Field(default=0.5, gt=0, le=1)
    lr_decay_every: int = Field(default=8000, ge=1)
    warmup_steps: int = Field(default=500, ge=0, description="Linear warmup length")
    phys_lr_scale: float = Field(
        default=5.0, gt=0, description="Rate of raw_phys relative to the network's"
    )
    clip_norm: Optional[float] = Field(
        default=1.0, gt=0, description="Global gradient norm cap (None: no clipping)"
    )
    loss_scale: Literal["normalized", "sum"] = "normalized"
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = Field(default=1e-8, gt=0)
    lambda_m: float = 1.0
    lambda_d: float = 1.0
    mask: Optional[TrainableMask] = None
    restarts: int = 4
    seed: int = 0
    plateau_window: int = Field(default=2000, ge=1)
    plateau_tol: float = Field(default=1e-10, ge=0)
    hidden_layers: Tuple[int, ...] = (64, 64, 64, 64)
    activation: Literal["tanh", "sin"] = "tanh"
    initial_state: Literal["plus", "data"] = "plus"
    init_rate_scale: float = Field(
        default=0.1, ge=0, description="Initial decay rates as a fraction of w0"
    )
    log_every: int = Field(default=500, ge=1)
    record_timing: bool = True

    @field_validator("n_t")
    @classmethod
    def validate_n_t(cls, v: int) -> int:
        if v < 2:
            raise ValueError(f"n_t must be at least 2, got {v}")
        return v

    @field_validator("n_c")
    @classmethod
    def validate_n_c(cls, v: int) -> int:
        if v < 1:
            raise ValueError(f"n_c must be at least 1, got {v}")
        return v

    @field_validator("final_time")
    @classmethod
    def validate_final_time(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and v <= 0:
            raise ValueError(f"final_time must be positive, got {v}")
        return v

    @field_validator("learning_rate")
    @classmethod
    def validate_learning_rate(cls, v: float) -> float:
        if v <= 0:
            raise ValueError(f"learning_rate must be positive, got {v}")
        return v

    @field_validator("beta1", "beta2")
    @classmethod
    def validate_beta(cls, v: float) -> float:
        if not 0 <= v < 1:
            raise ValueError(f"Adam betas must lie in [0, 1), got {v}")
        return v

    @field_validator("restarts")
    @classmethod
    def validate_restarts(cls, v: int) -> int:
        if v < 1:
            raise ValueError(f"restarts must be at least 1, got {v}")
        return v

    @model_validator(mode="after")
    def validate_loss_weights(self) -> "FitConfig":
        if self.lambda_m < 0 or self.lambda_d < 0:
            raise ValueError("Loss weights must be nonnegative")
        if self.lambda_m == 0 and self.lambda_d == 0:
            raise ValueError("At least one loss weight must be positive")
        return self

    def learning_rate_at(self, step: int) -> float:
        """Network rate at ``step``: linear warmup, then step decay."""
        rate = self.learning_rate * self.lr_decay ** (step // self.lr_decay_every)
        if step < self.warmup_steps:
            rate *= (step + 1) / self.warmup_steps
        return rate

    @property
    def seeds(self) -> List[int]:
        return [self.seed + i for i in range(self.restarts)]


class PhysLayout:
    """Placement of the raw trainable entries inside (J, gamma).

    ``raw_phys`` holds the trainable non-identity J entries first (basis
    order), then the raw decay parameters r_k of trainable channels.
    """

    def __init__(self, mask: TrainableMask, n_channels: int) -> None:
        if mask.gamma.size != n_channels:
            raise DimensionMismatchError(
                f"Mask covers {mask.gamma.size} channels, channel set has {n_channels}"
            )
        self.mask = mask
        self.n_qubits = mask.n_qubits
        self.n_channels = n_channels
        self.j_size = 4**self.n_qubits - 1
        self.j_target = mask.trainable_j - 1
        self.gamma_target = mask.trainable_gamma
        self.n_j = int(self.j_target.size)
        self.j_source = np.arange(self.n_j)
        self.gamma_source = self.n_j + np.arange(self.gamma_target.size)

    @property
    def size(self) -> int:
        return self.n_j + int(self.gamma_target.size)

    @property
    def labels(self) -> List[str]:
        """Labels of the raw entries (J labels, then decay-rate labels)."""
        params = ParameterSet.zeros(self.n_qubits, self.n_channels)
        j_labels = [params.j_labels[i] for i in self.j_target]
        return j_labels + [params.gamma_labels[k] for k in self.gamma_target]

    def initial_raw(self, w0: float, rate_scale: float) -> np.ndarray:
        """J entries at 0 and r_k = sqrt(rate_scale * w0)."""
        raw = np.zeros(self.size)
        raw[self.gamma_source] = np.sqrt(rate_scale * w0)
        return raw

    def to_parameters(self, raw_phys: np.ndarray) -> ParameterSet:
        j = np.zeros(self.j_size)
        j[self.j_target] = raw_phys[self.j_source]
        gamma = np.zeros(self.n_channels)
        gamma[self.gamma_target] = raw_phys[self.gamma_source] ** 2
        return ParameterSet.from_nonidentity(self.n_qubits, j, gamma)


@dataclass
class LossTerms:
    total: Node
    physics: Node
    data: Node

    def values(self) -> Tuple[float, float, float]:
        return (
            float(self.total.value),
            float(self.physics.value),
            float(self.data.value),
        )


class PinnverseLoss:
    """Composite loss bound to one data set, channel set and time window."""

    def __init__(
        self,
        factory: GeneratorFactory,
        layout: PhysLayout,
        s0: np.ndarray,
        final_time: float,
        physics_times: np.ndarray,
        data: Trajectory,
        lambda_m: float = 1.0,
        lambda_d: float = 1.0,
        loss_scale: Literal["normalized", "sum"] = "sum",
    ) -> None:
        size = factory.basis.size
        if data.values.shape[0] != size:
            raise DimensionMismatchError(
                f"Data has {data.values.shape[0]} observables, basis has {size}"
            )
        if np.asarray(s0).shape != (size,):
            raise DimensionMismatchError(f"Initial vector needs {size} entries")
        if data.times[-1] > final_time * (1 + 1e-12) or data.times[0] < 0:
            raise ConfigurationError(
                f"Data times must lie in [0, {final_time}], "
                f"got [{data.times[0]}, {data.times[-1]}]"
            )
        self.factory = factory
        self.layout = layout
        self.s0 = np.asarray(s0, dtype=float)
        self.final_time = float(final_time)
        self.physics_tau = np.asarray(physics_times, dtype=float) / self.final_time
        self.data_tau = data.times / self.final_time
        self.data_values = data.values.T.copy()
        self.lambda_m = lambda_m
        self.lambda_d = lambda_d
        self.loss_scale = loss_scale

    def _term_weight(self, n_times: int, unit: float = 1.0) -> float:
        if self.loss_scale == "sum":
            return 1.0
        return 1.0 / (n_times * self.s0.size * unit * unit)

    def record_physics(
        self, tape: Tape, state: NetState, tau: Optional[np.ndarray] = None
    ) -> Node:
        tau = self.physics_tau if tau is None else tau
        net = tape.network(state, tau)
        s = tape.trial_value(net, self.s0, tau)
        s_dot = tape.trial_dt(net, tau, self.final_time)
        raw = tape.raw_phys(state)
        layout = self.layout
        j = tape.embed_masked(raw, layout.j_source, layout.j_target, layout.j_size)
        r = tape.embed_masked(
            raw, layout.gamma_source, layout.gamma_target, layout.n_channels
        )
        flow = tape.affine_generator(s, j, tape.square(r), self.factory.gradients)
        residual = tape.sum_squares(tape.subtract(s_dot, flow))
        weight = self._term_weight(tau.size, omega0(self.final_time))
        return tape.scale_add([(weight, residual)])

    def record_data(
        self,
        tape: Tape,
        state: NetState,
        tau: Optional[np.ndarray] = None,
        values: Optional[np.ndarray] = None,
    ) -> Node:
        tau = self.data_tau if tau is None else tau
        values = self.data_values if values is None else values
        net = tape.network(state, tau)
        s = tape.trial_value(net, self.s0, tau)
        mismatch = tape.sum_squares(tape.subtract(s, values))
        return tape.scale_add([(self._term_weight(tau.size), mismatch)])

    def record(self, tape: Tape, state: NetState) -> LossTerms:
        physics = self.record_physics(tape, state)
        data = self.record_data(tape, state)
        total = tape.scale_add([(self.lambda_m, physics), (self.lambda_d, data)])
        return LossTerms(total=total, physics=physics, data=data)

    def value(self, state: NetState) -> Tuple[float, float, float]:
        """(total, physics, data) without differentiating."""
        return self.record(Tape(), state).values()

    def value_and_grad(
        self, state: NetState
    ) -> Tuple[Tuple[float, float, float], Gradients]:
        tape = Tape()
        terms = self.record(tape, state)
        return terms.values(), backward(state, tape, terms.total)

    def parameters(self, state: NetState) -> ParameterSet:
        return self.layout.to_parameters(state.raw_phys)


def physics_loss(
    state: NetState,
    objective: PinnverseLoss,
    t_points: Optional[Sequence[float]] = None,
) -> float:
    """L_m at ``t_points`` (physical time; the objective's grid by default)."""
    tau = None
    if t_points is not None:
        tau = np.asarray(t_points, dtype=float) / objective.final_time
    return float(objective.record_physics(Tape(), state, tau).value)


def data_loss(
    state: NetState, objective: PinnverseLoss, data: Optional[Trajectory] = None
) -> float:
    """L_d against ``data`` (the objective's data by default)."""
    if data is None:
        return float(objective.record_data(Tape(), state).value)
    if data.values.shape[0] != objective.s0.size:
        raise DimensionMismatchError(
            f"Data has {data.values.shape[0]} observables, "
            f"basis has {objective.s0.size}"
        )
    tau = data.times / objective.final_time
    return float(objective.record_data(Tape(), state, tau, data.values.T).value)


def collocation_times(n_points: int, final_time: float) -> np.ndarray:
    """Equally spaced times on [0, T], both endpoints included."""
    return np.linspace(0.0, final_time, n_points)


def initial_vector(
    data: Trajectory, source: Literal["plus", "data"] = "plus"
) -> np.ndarray:
    if source == "data":
        return data.initial_values
    basis = data.basis
    return plus_plus_state(data.n_qubits).expectations(basis)


def build_objective(
    data: Trajectory, channels: ChannelSet, config: FitConfig
) -> PinnverseLoss:
    """Loss for ``data`` under ``config`` (data subset to N_c points).

    Raises:
        ConfigurationError: no positive window follows from the data and config
    """
    if channels.n_qubits != data.n_qubits:
        raise DimensionMismatchError("Channel set and data act on different qubits")
    final_time = config.final_time or float(data.times[-1])
    if final_time <= 0:
        raise ConfigurationError(
            f"Cannot infer the evolution window from {data.n_times} sample(s) "
            f"ending at t={data.times[-1]:g}; set final_time"
        )
    mask = config.mask or TrainableMask.all(data.n_qubits, len(channels))
    layout = PhysLayout(mask, len(channels))
    s0 = initial_vector(data, config.initial_state)
    return PinnverseLoss(
        factory=generator_factory(channels),
        layout=layout,
        s0=s0,
        final_time=final_time,
        physics_times=collocation_times(config.n_t, final_time),
        data=data.equally_spaced_subset(config.n_c),
        lambda_m=config.lambda_m,
        lambda_d=config.lambda_d,
        loss_scale=config.loss_scale,
    )


@dataclass
class RestartResult:
    summary: RunSummary
    state: Optional[NetState]
    history: List[LossRecord]


def _net_config(objective: PinnverseLoss, config: FitConfig, seed: int) -> NetConfig:
    return NetConfig(
        output_dim=objective.s0.size,
        hidden_layers=config.hidden_layers,
        activation=config.activation,
        seed=seed,
    )


def train_once(objective: PinnverseLoss, config: FitConfig, seed: int) -> RestartResult:
    """One restart: Adam until max_steps or a loss plateau.

    The run stops on a plateau when the lowest loss of the last
    ``plateau_window`` steps beats the lowest loss before them by less than
    ``plateau_tol`` relative. The state with the lowest total loss seen is
    the one returned.

    Raises:
        DivergenceError: the loss became non-finite
    """
    started = time.perf_counter()
    w0 = omega0(objective.final_time)
    raw = objective.layout.initial_raw(w0, config.init_rate_scale)
    state = init(_net_config(objective, config, seed), raw_phys=raw)
    opt = AdamState.for_state(state)
    # running minimum of the total loss, one entry per step
    best_by_step: List[float] = []
    history: List[LossRecord] = []
    best_total, best_step, best_state = np.inf, 0, state

    step = 0
    for step in range(config.max_steps):
        (total, physics, data), grads = objective.value_and_grad(state)
        if not np.isfinite(total) or not np.isfinite(grads.global_norm()):
            raise DivergenceError(seed, step)
        if total < best_total:
            best_total, best_step, best_state = total, step, state
        best_by_step.append(best_total)
        if step % config.log_every == 0:
            history.append(LossRecord(step, total, physics, data))
            logger.debug(
                f"seed={seed} step={step} loss={total:.6e} L_m={physics:.3e} "
                f"L_d={data:.3e} lr={config.learning_rate_at(step):.2e}"
            )
        if step >= config.plateau_window:
            before = best_by_step[step - config.plateau_window]
            if before - best_total <= config.plateau_tol * before:
                logger.debug(f"seed={seed} reached a loss plateau at step {step}")
                if step % config.log_every:
                    history.append(LossRecord(step, total, physics, data))
                break
        lr = config.learning_rate_at(step)
        state, opt = adam_step(
            state,
            clip_by_global_norm(grads, config.clip_norm),
            opt,
            lr,
            config.beta1,
            config.beta2,
            config.epsilon,
            phys_lr=lr * config.phys_lr_scale,
        )
    else:
        step = config.max_steps
        total, physics, data = objective.value(state)
        if not np.isfinite(total):
            raise DivergenceError(seed, step)
        history.append(LossRecord(step, total, physics, data))
        if total < best_total:
            best_total, best_step, best_state = total, step, state

    recovered = objective.parameters(best_state)
    wall_time = time.perf_counter() - started
    logger.info(
        f"Restart seed={seed} finished after {step} steps, "
        f"best loss={best_total:.4e} at step {best_step}"
    )
    summary = RunSummary(
        seed=seed,
        status="ok",
        steps=step,
        final_loss=best_total,
        recovered=recovered,
        wall_time=wall_time if config.record_timing else None,
    )
    return RestartResult(summary=summary, state=best_state, history=history)


def fit(
    data: Trajectory,
    channels: ChannelSet,
    config: FitConfig,
    truth: Optional[ParameterSet] = None,
) -> FitReport:
    """Run every restart and report the one with the lowest final loss.

    Raises:
        AllRestartsFailedError: every restart diverged
    """
    started = time.perf_counter()
    objective = build_objective(data, channels, config)
    mask = objective.layout.mask
    logger.info(
        f"Fitting {data.n_qubits}-qubit data: {data.n_times} samples, "
        f"N_c={config.n_c}, N_t={config.n_t}, T={objective.final_time:g}, "
        f"{objective.layout.size} trainable parameters, {config.restarts} restart(s)"
    )

    results: List[RestartResult] = []
    for seed in config.seeds:
        try:
            results.append(train_once(objective, config, seed))
        except DivergenceError as e:
            report_error(
                exception=e,
                component="trainer",
                context_name="restart",
                additional_context={"seed": seed},
                level=logging.WARNING,
            )
            failed = RunSummary(
                seed=seed, status="failed", steps=e.step, message=str(e)
            )
            results.append(RestartResult(summary=failed, state=None, history=[]))

    ok = [r for r in results if r.summary.ok]
    if not ok:
        raise AllRestartsFailedError(f"All {len(results)} restarts diverged")
    best = min(ok, key=lambda r: r.summary.final_loss)
    recovered = best.summary.recovered

    report = FitReport(
        n_qubits=data.n_qubits,
        channels=channels.name,
        recovered=recovered,
        trainable=mask,
        initial_state=objective.s0.copy(),
        final_time=objective.final_time,
        seeds=config.seeds,
        best_seed=best.summary.seed,
        loss_history=best.history,
        runs=[r.summary for r in results],
        truth=truth,
        state=best.state,
    )
    report.reconstruction = reconstruct(report, data.times, channels)
    if truth is not None:
        report.errors = parameter_errors(truth, recovered, mask)
        report.mape = group_mape(truth, recovered, mask)
    if config.record_timing:
        report.wall_time = time.perf_counter() - started
    logger.info(
        f"Best restart seed={report.best_seed} loss={report.final_loss:.4e} "
        f"({len(ok)}/{len(results)} restarts ok)"
    )
    return report


def reconstruct(
    report: FitReport,
    times: Sequence[float],
    channels: Optional[ChannelSet] = None,
) -> Trajectory:
    """Trajectory under the recovered parameters from the fit's initial vector.

    The integration always starts at t=0; a grid starting later is
    integrated from 0 and sampled at the requested times only.
    """
    channels = channels or channel_preset(report.channels)
    gen = generator_factory(channels).build(report.recovered)
    times = np.asarray(times, dtype=float)
    if times[0] > 0:
        grid = np.concatenate([[0.0], times])
        full = evolve_pauli(gen, report.initial_state, grid)
        return full.subset(np.arange(1, full.n_times))
    return evolve_pauli(gen, report.initial_state, times)
