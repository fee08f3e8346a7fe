import contextvars
import datetime
import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence

import numpy as np

from qrex.errors import ArgumentError
from qrex.modules.cq_state import derive_seed, random_cq
from qrex.modules.extractor import verify_theorem1_grid
from qrex.modules.hashing import all_functions_family, linear_gf2_family, toeplitz_gf2_family
from qrex.modules.state_files import format_csv, write_text

logger = logging.getLogger(__name__)

CORPUS_COLUMNS = ("seed", "X", "dB", "family", "m", "eps", "delta_R", "rhs", "margin")
CORPUS_FAMILIES = ("all_functions", "linear_gf2", "toeplitz_gf2")
_FAMILY_ALIASES = {"all": "all_functions", "linear": "linear_gf2", "toeplitz": "toeplitz_gf2"}

# Global dictionary to track background corpus runs
_corpus_jobs: Dict[str, Dict] = {}


def parse_seed_range(text: str) -> List[int]:
    """Seeds from "a..b" (inclusive), "a,b,c" or a single integer."""
    text = str(text).strip()
    try:
        if ".." in text:
            first, last = (int(part) for part in text.split("..", 1))
            seeds = list(range(first, last + 1))
        else:
            seeds = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ArgumentError(f"Cannot parse seeds {text!r}; use 'a..b' or 'a,b,c'") from exc
    if not seeds:
        raise ArgumentError(f"Empty seed range {text!r}")
    return seeds


def normalize_families(families: Sequence[str]) -> List[str]:
    result = []
    for family in families:
        kind = _FAMILY_ALIASES.get(family, family)
        if kind not in CORPUS_FAMILIES:
            raise ArgumentError(f"Unknown family '{family}', expected one of {CORPUS_FAMILIES}")
        result.append(kind)
    return result


def corpus_family(kind: str, num_symbols: int, rng: np.random.Generator):
    """A family for |X| = num_symbols: GF(2) families draw m in 1..n, all_functions draws |S| with |S|^|X| <= 2^20."""
    if kind == "all_functions":
        largest = min(num_symbols, int(math.floor(2 ** (20 / num_symbols) + 1e-9)))
        return all_functions_family(num_symbols, int(rng.integers(2, largest + 1)))
    n = num_symbols.bit_length() - 1
    m = int(rng.integers(1, n + 1))
    return linear_gf2_family(n, m) if kind == "linear_gf2" else toeplitz_gf2_family(n, m)


def run_corpus_seed(seed: int, eps_values: Sequence[float], families: Sequence[str]) -> List[Dict]:
    """All rows of one seed.

    Sub-seed 0 draws |X| in {2, 4, 8} and d_B in 1..4, sub-seed 1 the state,
    and sub-seed 2 + i the family of the i-th requested kind.
    """
    shape_rng = np.random.default_rng(derive_seed(seed, 0))
    num_symbols = int(shape_rng.choice([2, 4, 8]))
    d_b = int(shape_rng.integers(1, 5))
    cq = random_cq(derive_seed(seed, 1), num_symbols, d_b)
    rows = []
    for index, kind in enumerate(families):
        fam = corpus_family(kind, num_symbols, np.random.default_rng(derive_seed(seed, 2 + index)))
        for report in verify_theorem1_grid(cq, fam, eps_values):
            rows.append(
                {
                    "seed": seed,
                    "X": num_symbols,
                    "dB": d_b,
                    "family": kind,
                    "m": math.log2(fam.range_size),
                    "eps": report.epsilon,
                    "delta_R": report.delta_R,
                    "rhs": report.theorem1_rhs,
                    "margin": report.margin,
                }
            )
    return rows


def run_corpus(
    seeds: Sequence[int],
    eps_values: Sequence[float],
    families: Sequence[str] = ("linear_gf2",),
    workers: Optional[int] = None,
    stop_event: Optional[threading.Event] = None,
    progress: Optional[Dict] = None,
) -> List[Dict]:
    """Theorem-1 rows for every seed, sorted by seed whatever order the workers finish in."""
    families = normalize_families(families)
    seeds = list(seeds)
    lock = threading.Lock()

    def task(seed: int) -> List[Dict]:
        if stop_event is not None and stop_event.is_set():
            return []
        rows = run_corpus_seed(seed, eps_values, families)
        if progress is not None:
            with lock:
                progress["seeds_done"] = progress.get("seeds_done", 0) + 1
        return rows

    # Workers inherit the caller's setting overrides.
    contexts = [contextvars.copy_context() for _ in seeds]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        batches = list(executor.map(lambda context, seed: context.run(task, seed), contexts, seeds))
    rows = [row for batch in batches for row in batch]
    order = {kind: i for i, kind in enumerate(families)}
    rows.sort(key=lambda row: (row["seed"], order[row["family"]], row["eps"]))
    logger.info("Corpus finished: %d seeds, %d rows, min margin %s", len(seeds), len(rows), min((r["margin"] for r in rows), default=None))
    return rows


def corpus_csv(rows: Sequence[Dict]) -> str:
    return format_csv(rows, CORPUS_COLUMNS)


# MCP tools

def run_corpus_to_csv(seeds: str, eps: List[float], families: List[str], out_path: str) -> Dict:
    """Run the Theorem-1 corpus and write it as CSV.
    Args:
        seeds: Seed range "a..b" or list "a,b,c"
        eps: Failure masses, e.g. [0, 0.01, 0.1]
        families: Family kinds, e.g. ["linear_gf2", "all_functions"]
        out_path: Where to write the CSV
    """
    rows = run_corpus(parse_seed_range(seeds), eps, families)
    write_text(corpus_csv(rows), out_path)
    return {"out_path": out_path, "rows": len(rows), "min_margin": min((r["margin"] for r in rows), default=None)}


def corpus_background(seeds: str, eps: List[float], families: List[str], out_path: str, job_id: Optional[str] = None) -> Dict:
    """Runs the Theorem-1 corpus in the background and returns job information.
    Args:
        seeds: Seed range "a..b" or list "a,b,c"
        eps: Failure masses, e.g. [0, 0.01, 0.1]
        families: Family kinds, e.g. ["linear_gf2"]
        out_path: Where to write the CSV when the run completes
        job_id: Optional custom job ID. If not provided, will be auto-generated
    Returns:
        Dictionary containing job_id, status, and other job information
    """
    global _corpus_jobs

    if job_id is None:
        job_id = f"corpus_{int(time.time())}"
    if job_id in _corpus_jobs:
        raise ArgumentError(f"Job ID '{job_id}' already exists. Please use a different job ID.")

    seed_list = parse_seed_range(seeds)
    families = normalize_families(families)

    job_info = {
        "job_id": job_id,
        "out_path": out_path,
        "seeds_total": len(seed_list),
        "seeds_done": 0,
        "status": "starting",
        "start_time": time.time(),
        "end_time": None,
        "rows": None,
        "min_margin": None,
        "error": None,
        "stop_event": threading.Event(),
    }

    def run_job():
        """Background function to run the corpus"""
        try:
            job_info["status"] = "running"
            rows = run_corpus(seed_list, eps, families, stop_event=job_info["stop_event"], progress=job_info)
            job_info["end_time"] = time.time()
            if job_info["stop_event"].is_set():
                job_info["status"] = "stopped"
                return
            write_text(corpus_csv(rows), out_path)
            job_info["rows"] = len(rows)
            job_info["min_margin"] = min((r["margin"] for r in rows), default=None)
            job_info["status"] = "completed"
        except Exception as e:
            logger.exception("Corpus job %s failed", job_id)
            job_info["status"] = "failed"
            job_info["error"] = str(e)
            job_info["end_time"] = time.time()

    thread = threading.Thread(target=run_job)
    thread.daemon = True
    _corpus_jobs[job_id] = job_info
    thread.start()

    return {
        "job_id": job_id,
        "status": "started",
        "message": f"Corpus job '{job_id}' started in background",
    }


def _readable_runtime(runtime_seconds: float) -> str:
    if runtime_seconds < 60:
        return f"{runtime_seconds:.1f} seconds"
    if runtime_seconds < 3600:
        return f"{runtime_seconds / 60:.1f} minutes"
    return f"{runtime_seconds / 3600:.1f} hours"


def get_corpus_status(job_id: str) -> Dict:
    """Get the status of a background corpus job.
    Args:
        job_id: The job ID to check
    Returns:
        Dictionary containing job status and information
    """
    if job_id not in _corpus_jobs:
        return {"job_id": job_id, "status": "not_found", "error": f"Job ID '{job_id}' not found"}

    job_info = _corpus_jobs[job_id]
    # The stop event is not serializable
    serializable_info = {key: value for key, value in job_info.items() if key != "stop_event"}

    if serializable_info["start_time"]:
        start_dt = datetime.datetime.fromtimestamp(serializable_info["start_time"])
        serializable_info["start_time_readable"] = start_dt.strftime("%I:%M:%S %p on %B %d, %Y")
    if serializable_info["end_time"]:
        end_dt = datetime.datetime.fromtimestamp(serializable_info["end_time"])
        serializable_info["end_time_readable"] = end_dt.strftime("%I:%M:%S %p on %B %d, %Y")
    if serializable_info["end_time"] and serializable_info["start_time"]:
        runtime_seconds = serializable_info["end_time"] - serializable_info["start_time"]
        serializable_info["runtime_seconds"] = runtime_seconds
        serializable_info["runtime_readable"] = _readable_runtime(runtime_seconds)
    return serializable_info


def list_corpus_jobs() -> Dict:
    """List all background corpus jobs and their statuses."""
    jobs = {job_id: get_corpus_status(job_id) for job_id in list(_corpus_jobs)}
    return {"total_jobs": len(jobs), "jobs": jobs}


def stop_corpus_job(job_id: str) -> Dict:
    """Stop a running corpus job; seeds already in progress finish first.
    Args:
        job_id: The job ID to stop
    """
    if job_id not in _corpus_jobs:
        return {"job_id": job_id, "status": "not_found", "error": f"Job ID '{job_id}' not found"}

    job_info = _corpus_jobs[job_id]
    if job_info["status"] in ["completed", "failed", "stopped"]:
        return {
            "job_id": job_id,
            "status": "already_finished",
            "message": f"Job '{job_id}' has already finished with status: {job_info['status']}",
        }
    job_info["stop_event"].set()
    return {"job_id": job_id, "status": "stopping", "message": f"Job '{job_id}' will stop after the seeds in progress"}


def cleanup_corpus_jobs(completed_only: bool = True) -> Dict:
    """Clean up finished corpus jobs from memory.
    Args:
        completed_only: If True, only remove completed/failed/stopped jobs. If False, remove all jobs.
    """
    jobs_to_remove = [
        job_id
        for job_id, job_info in _corpus_jobs.items()
        if not completed_only or job_info["status"] in ["completed", "failed", "stopped"]
    ]
    for job_id in jobs_to_remove:
        del _corpus_jobs[job_id]
    return {
        "removed_jobs": len(jobs_to_remove),
        "remaining_jobs": len(_corpus_jobs),
        "removed_job_ids": jobs_to_remove,
    }
