"""Sweep runner: independent (grid point, realization) jobs on a worker pool."""

import logging
from concurrent.futures import Future, ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from pinnverse.error_handling import report_error

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SweepJob:
    """One fit of a sweep; the seeds fully determine its output."""

    grid: str
    grid_index: int
    value: float
    realization: int
    truth_seed: int
    noise_seed: int
    fit_seed: int

    @property
    def key(self) -> Tuple[int, int]:
        return (self.grid_index, self.realization)

    @property
    def name(self) -> str:
        return f"{self.grid}{self.grid_index:02d}_r{self.realization:02d}"


@dataclass
class JobResult:
    """What a worker hands back to the collector."""

    job: SweepJob
    status: str  # "ok" or "failed"
    mape: Dict[str, float] = field(default_factory=dict)
    report: Optional[Dict[str, Any]] = None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"


JobFunction = Callable[[SweepJob, Any], JobResult]


def job_seeds(
    base_seed: int, grid_index: int, realization: int
) -> Tuple[int, int, int]:
    """(truth, noise, fit) seeds derived from the job coordinates only."""
    sequence = np.random.SeedSequence([base_seed, grid_index, realization])
    truth, noise, fit = sequence.generate_state(3, dtype=np.uint32)
    return int(truth), int(noise), int(fit)


def make_jobs(
    grid: str, values: Sequence[float], realizations: int, base_seed: int
) -> List[SweepJob]:
    jobs = []
    for grid_index, value in enumerate(values):
        for realization in range(realizations):
            truth, noise, fit = job_seeds(base_seed, grid_index, realization)
            jobs.append(
                SweepJob(
                    grid=grid,
                    grid_index=grid_index,
                    value=value,
                    realization=realization,
                    truth_seed=truth,
                    noise_seed=noise,
                    fit_seed=fit,
                )
            )
    return jobs


def _failed(job: SweepJob, exception: BaseException) -> JobResult:
    report_error(
        exception=exception,
        component="sweep_runner",
        context_name=job.name,
        additional_context={"grid": job.grid, "value": job.value},
    )
    return JobResult(job=job, status="failed", message=str(exception))


class SweepRunner:
    """Runs jobs inline (one worker) or on a process pool.

    Workers must be module-level functions so they pickle. Results are
    appended as they arrive and returned sorted by (grid index,
    realization), so the output does not depend on scheduling.
    """

    def __init__(self, jobs: int = 1) -> None:
        self.jobs: int = max(1, jobs)
        self._progress_callbacks: List[Callable[[JobResult, int, int], None]] = []

    def register_progress_callback(
        self, callback: Callable[[JobResult, int, int], None]
    ) -> None:
        """Register callback for finished jobs.

        Args:
            callback: Function(result, n_done, n_total)
        """
        if callback not in self._progress_callbacks:
            self._progress_callbacks.append(callback)
            logger.debug("Registered progress callback")

    def run(
        self, worker: JobFunction, jobs: Sequence[SweepJob], payload: Any
    ) -> List[JobResult]:
        logger.info(f"Running {len(jobs)} sweep jobs with {self.jobs} worker(s)")
        collected: List[JobResult] = []
        if self.jobs == 1 or len(jobs) <= 1:
            for job in jobs:
                try:
                    result = worker(job, payload)
                except Exception as e:
                    result = _failed(job, e)
                self._collect(collected, result, len(jobs))
        else:
            with ProcessPoolExecutor(max_workers=self.jobs) as pool:
                futures: Dict[Future, SweepJob] = {
                    pool.submit(worker, job, payload): job for job in jobs
                }
                for future in as_completed(futures):
                    job = futures[future]
                    try:
                        result = future.result()
                    except Exception as e:
                        result = _failed(job, e)
                    self._collect(collected, result, len(jobs))

        collected.sort(key=lambda r: r.job.key)
        n_failed = sum(1 for r in collected if not r.ok)
        if n_failed:
            logger.warning(f"{n_failed}/{len(collected)} sweep jobs failed")
        return collected

    def _collect(
        self, collected: List[JobResult], result: JobResult, total: int
    ) -> None:
        collected.append(result)
        logger.info(
            f"Job {result.job.name} ({result.job.grid}={result.job.value:g}) "
            f"{result.status} [{len(collected)}/{total}]"
        )
        for callback in self._progress_callbacks:
            try:
                callback(result, len(collected), total)
            except Exception as e:
                logger.error(f"Callback error: {e}", exc_info=True)
                report_error(
                    exception=e, component="sweep_runner", context_name="callback_error"
                )
