import os
import concurrent.futures

import numpy as np

from src.core import log_handling as lh

SWEEP_TASKS_LOG = lh.log_path("sweep_tasks.log")
LOGGER = lh.LogHandling(SWEEP_TASKS_LOG, "UTC")

DEFAULT_CHUNK_SIZE = 512


def default_workers():
    return min(8, os.cpu_count() or 1)


def split_grid(grid, chunk_size=DEFAULT_CHUNK_SIZE):
    """Contiguous chunks of a 1-D grid, in order"""
    grid = np.asarray(grid, dtype=float)
    if chunk_size < 1:
        raise ValueError(f"chunk_size must be >= 1, got {chunk_size}")
    return [grid[i:i + chunk_size] for i in range(0, grid.size, chunk_size)]


def run_sweep(task, grid, workers=None, chunk_size=DEFAULT_CHUNK_SIZE, timeout=600):
    """
    Run task(chunk) -> array over contiguous chunks of grid on a thread pool

    numpy releases the GIL inside the batched solves, so threads are enough.
    Results are concatenated in grid order whatever order the chunks finish in.

    Args:
        task: Callable taking a 1-D chunk of the grid, returning an array whose
              first axis matches the chunk
        grid: 1-D array of detunings
        workers: Thread count (default: min(8, cpu count)); 1 runs inline
        chunk_size: Points per task
        timeout: Seconds to wait for each chunk

    Returns:
        numpy array, the per-chunk results concatenated along axis 0
    """
    chunks = split_grid(grid, chunk_size)
    if not chunks:
        raise ValueError("cannot sweep an empty grid")

    workers = default_workers() if workers is None else int(workers)
    if workers <= 1 or len(chunks) == 1:
        return np.concatenate([task(chunk) for chunk in chunks], axis=0)

    LOGGER.writeDebugLog(f"Sweeping {len(grid)} points in {len(chunks)} chunks on {workers} threads")
    results = [None] * len(chunks)
    try:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
            futures = {executor.submit(task, chunk): index for index, chunk in enumerate(chunks)}
            for future in concurrent.futures.as_completed(futures, timeout=timeout * len(chunks)):
                results[futures[future]] = future.result()
    except Exception as e:
        LOGGER.writeLog(f"Error in threaded sweep over {len(grid)} points: {e}")
        raise
    return np.concatenate(results, axis=0)
