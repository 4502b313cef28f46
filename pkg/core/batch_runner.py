import logging
import queue
from dataclasses import dataclass, field
from multiprocessing import Process, Queue

import config
from core.exceptions import ParameterError, SteeringSimError
from core.simulation import run

logger = logging.getLogger(__name__)

RESULT_TIMEOUT = 600


@dataclass
class RunFailure:
    index: int
    scenario: str
    seed: int
    message: str


@dataclass
class BatchResult:
    """Traces joined by scenario order; failed runs leave None in their slot."""
    scenarios: list
    traces: list
    failures: list = field(default_factory=list)

    @property
    def succeeded(self):
        return [(sc, tr) for sc, tr in zip(self.scenarios, self.traces) if tr is not None]


def repeat_seeds(scenario, n_seeds: int = config.BATCH_SEEDS, first_seed: int | None = None) -> list:
    """Copies of a scenario with consecutive seeds starting at its own seed."""
    if n_seeds < 1:
        raise ParameterError("a batch needs at least one seed")
    start = scenario.seed if first_seed is None else first_seed
    return [scenario.with_overrides(seed=start + i) for i in range(n_seeds)]


def _run_one(index: int, scenario):
    try:
        return index, run(scenario), None
    except SteeringSimError as e:
        return index, None, str(e)
    except Exception as e:
        logger.exception(f"[Batch Runner] 🔴 ERROR: unexpected failure in run {index}")
        return index, None, f"{type(e).__name__}: {e}"


def run_worker(task_queue: Queue, result_queue: Queue):
    """
    Worker process body: runs scenarios from the task queue until a None sentinel.
    """
    while True:
        task = task_queue.get()
        if task is None:
            break
        index, scenario = task
        result_queue.put(_run_one(index, scenario))


def _run_parallel(scenarios, workers: int) -> list:
    task_queue = Queue()
    result_queue = Queue()
    for item in enumerate(scenarios):
        task_queue.put(item)
    processes = [Process(target=run_worker, args=(task_queue, result_queue), name=f"BatchWorker-{i}")
                 for i in range(workers)]
    for p in processes:
        task_queue.put(None)
    for p in processes:
        p.start()
        logger.info(f"   [Batch Runner] Started worker {p.name}")

    results = []
    try:
        while len(results) < len(scenarios):
            try:
                results.append(result_queue.get(timeout=RESULT_TIMEOUT))
            except queue.Empty:
                logger.warning("[Batch Runner] 🔴 WARNING: no result within timeout, checking workers")
                if not any(p.is_alive() for p in processes):
                    break
    finally:
        for p in processes:
            if p.is_alive():
                p.terminate()
            p.join()
        logger.info("[Batch Runner] ✅ Workers shut down")
    return results


def batch(scenarios, workers: int = config.BATCH_WORKERS) -> BatchResult:
    """
    Runs every scenario independently.

    workers <= 1 runs sequentially in this process; otherwise a pool of worker
    processes shares a task queue. Results are joined by scenario order either way
    and failed runs are recorded without stopping the batch.
    """
    scenarios = list(scenarios)
    if not scenarios:
        raise ParameterError("a batch needs at least one scenario")
    logger.info(f"[Batch Runner] 🟢 Running {len(scenarios)} scenarios with {max(workers, 1)} worker(s)")
    if workers <= 1:
        results = [_run_one(i, sc) for i, sc in enumerate(scenarios)]
    else:
        results = _run_parallel(scenarios, min(workers, len(scenarios)))

    traces = [None] * len(scenarios)
    failures = []
    seen = set()
    for index, trace, message in results:
        seen.add(index)
        traces[index] = trace
        if message is not None:
            sc = scenarios[index]
            failures.append(RunFailure(index, sc.name, sc.seed, message))
    for index in range(len(scenarios)):
        if index not in seen:
            sc = scenarios[index]
            failures.append(RunFailure(index, sc.name, sc.seed, "worker exited without a result"))
    failures.sort(key=lambda f: f.index)
    for f in failures:
        logger.warning(f"[Batch Runner] 🔴 WARNING: run {f.index} ('{f.scenario}', seed {f.seed}) failed: {f.message}")
    logger.info(f"[Batch Runner] ✅ {len(scenarios) - len(failures)}/{len(scenarios)} runs completed")
    return BatchResult(scenarios, traces, failures)
