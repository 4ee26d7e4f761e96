"""
QNMBatch — run many independent evaluations (scenarios, experiments, any
callable) concurrently and collect the results in insertion order.

Numerical work happens in numpy, which releases the GIL inside BLAS/LAPACK,
so a thread pool gives real overlap without pickling schemes or channels.

Usage:
    from QNMBatch import QNMBatch

    result = (
        QNMBatch(parallel=4)
        .scenario("coin", AttackScenario(scheme, coin))
        .scenario("cnot", AttackScenario(scheme, cnot, state))
        .job("deficiency", design_deficiency, ensemble, "t-design", 2)
        .run_sync()
    )

    print(result.coin.nm_gain)
    print(result["deficiency"].upper)

Ordering is the order jobs were added, never completion order, so reports
assembled from a batch are deterministic.
"""

from __future__ import annotations

import asyncio
import logging
from typing import Any, Callable

from qnm_config import PARALLEL

log = logging.getLogger("qnmlab.batch")


# ── Result wrapper ─────────────────────────────────────────────────────────────

class QNMBatchResult:
    """
    Results of one batch run.

    Provides both attribute access (result.coin) and dict access
    (result["coin"]). A job that raised keeps its exception in .errors and
    has no value; raise_first() re-raises the earliest one in job order.
    """

    def __init__(self, values: dict[str, Any], errors: dict[str, BaseException]):
        self._values = values
        self.errors  = errors

    def values(self) -> list[Any]:
        return list(self._values.values())

    def items(self):
        return self._values.items()

    def keys(self) -> list[str]:
        return list(self._values)

    def has(self, name: str) -> bool:
        return name in self._values

    def raise_first(self) -> None:
        if self.errors:
            raise next(iter(self.errors.values()))

    def __getattr__(self, name: str) -> Any:
        if name.startswith("_"):
            raise AttributeError(name)
        try:
            return self._values[name]
        except KeyError:
            raise AttributeError(name) from None

    def __getitem__(self, key: str) -> Any:
        return self._values[key]

    def __contains__(self, key: str) -> bool:
        return key in self._values

    def __len__(self) -> int:
        return len(self._values)

    def __repr__(self) -> str:
        return f"QNMBatchResult(jobs={list(self._values)}, errors={list(self.errors)})"


# ── Batch builder ──────────────────────────────────────────────────────────────

class QNMBatch:
    """
    Builder for a set of named jobs.

    Chain calls to describe the work, then call run() (or run_sync()) once.
    Job names must be unique within one batch.
    """

    def __init__(self, parallel: int | None = None):
        self._parallel = max(1, parallel or PARALLEL)
        self._jobs: dict[str, tuple[Callable, tuple, dict]] = {}

    def _reset(self) -> None:
        self._jobs = {}

    def _add(self, name: str, fn: Callable, args: tuple, kwargs: dict) -> "QNMBatch":
        if name in self._jobs:
            raise ValueError(f"duplicate batch job {name!r}")
        self._jobs[name] = (fn, args, kwargs)
        return self

    # ── Job builders ───────────────────────────────────────────────────────────

    def job(self, name: str, fn: Callable, *args, **kwargs) -> "QNMBatch":
        """Any callable; fn(*args, **kwargs) runs in a worker thread."""
        return self._add(name, fn, args, kwargs)

    def scenario(self, name: str, scenario) -> "QNMBatch":
        """QNMSecurity.evaluate on one AttackScenario."""
        from QNMSecurity import evaluate
        return self._add(name, evaluate, (scenario,), {})

    def experiment(self, name: str, config) -> "QNMBatch":
        """QNMExperiments.run_experiment on one resolved ExperimentConfig."""
        from QNMExperiments import run_experiment
        return self._add(name, run_experiment, (config,), {})

    # ── Run ────────────────────────────────────────────────────────────────────

    async def run(self) -> QNMBatchResult:
        """
        Execute every job with at most `parallel` running at once.
        Resets the builder afterwards so it can be reused.
        """
        jobs = dict(self._jobs)
        self._reset()
        if not jobs:
            return QNMBatchResult({}, {})

        sem = asyncio.Semaphore(self._parallel)

        async def one(name: str, fn: Callable, args: tuple, kwargs: dict):
            async with sem:
                log.debug(f"batch job {name} started")
                return await asyncio.to_thread(fn, *args, **kwargs)

        outcomes = await asyncio.gather(
            *(one(name, fn, args, kwargs) for name, (fn, args, kwargs) in jobs.items()),
            return_exceptions=True,
        )
        values, errors = {}, {}
        for name, outcome in zip(jobs, outcomes):
            if isinstance(outcome, BaseException):
                log.warning(f"batch job {name} failed: {outcome!r}")
                errors[name] = outcome
            else:
                values[name] = outcome
        log.info(f"batch finished: {len(values)} ok, {len(errors)} failed, parallel={self._parallel}")
        return QNMBatchResult(values, errors)

    def run_sync(self) -> QNMBatchResult:
        """Synchronous version of run() for non-async contexts."""
        return asyncio.run(self.run())

    def __len__(self) -> int:
        return len(self._jobs)
