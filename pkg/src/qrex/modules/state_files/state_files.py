import csv
import glob
import io
import json
import logging
import os
from typing import Dict, Iterable, Optional, Sequence

from qrex.errors import ArgumentError, StateFormatError
from qrex.modules.cq_state import (
    CQState,
    State,
    as_bipartite,
    generate_random_state,
    state_from_dict,
    state_to_dict,
)

logger = logging.getLogger(__name__)


def find_state_files(filename: str = None, search_dir: str = None) -> list:
    """Search for state JSON files by name or pattern. Returns a list of found files with full paths."""
    if search_dir is None:
        search_dirs = [
            os.getcwd(),
            os.path.join(os.getcwd(), "states"),
            os.path.expanduser("~/Documents"),
        ]
    else:
        search_dirs = [search_dir]
    found_files = []
    for directory in search_dirs:
        if not os.path.exists(directory):
            continue
        if filename:
            patterns = [
                os.path.join(directory, filename),
                os.path.join(directory, f"*{filename}*.json"),
            ]
        else:
            patterns = [os.path.join(directory, "*.json")]
        for pattern in patterns:
            found_files.extend(path for path in glob.glob(pattern) if os.path.isfile(path))
    found_files = sorted(list(set(found_files)))
    return found_files


def resolve_state_path(state_path: str, search_if_not_found: bool = True) -> str:
    if os.path.exists(state_path) or not search_if_not_found:
        return state_path
    found_files = find_state_files(state_path)
    if not found_files:
        raise ArgumentError(f"Could not find state file: {state_path}")
    if len(found_files) > 1:
        logger.warning("Several state files match '%s', using %s", state_path, found_files[0])
    return found_files[0]


def parse_state(text: str, source: str = "<string>") -> State:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StateFormatError(f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        return state_from_dict(data)
    except StateFormatError as exc:
        raise StateFormatError(f"{source}: {exc}") from exc


def load_state(state_path: str, search_if_not_found: bool = True) -> State:
    """Load a cq or bipartite state file.
    Args:
        state_path: Full path to the JSON file or just a name to search for
        search_if_not_found: If True, search for the file if the path doesn't exist
    """
    path = resolve_state_path(state_path, search_if_not_found)
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ArgumentError(f"Could not read state file {path}: {exc}") from exc
    return parse_state(text, path)


def dumps_json(data) -> str:
    # Insertion key order, floats in repr form.
    return json.dumps(data, indent=2, allow_nan=True) + "\n"


def write_text(text: str, out_path: Optional[str]) -> Optional[str]:
    if out_path is None:
        return None
    directory = os.path.dirname(os.path.abspath(out_path))
    try:
        os.makedirs(directory, exist_ok=True)
        with open(out_path, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
    except OSError as exc:
        raise ArgumentError(f"Could not write output file {out_path}: {exc}") from exc
    return out_path


def save_state(state: State, out_path: str) -> str:
    return write_text(dumps_json(state_to_dict(state)), out_path)


def format_csv(rows: Iterable[Dict], columns: Sequence[str]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow({key: _csv_value(row.get(key)) for key in columns})
    return buffer.getvalue()


def _csv_value(value):
    if isinstance(value, float):
        return repr(value)
    return value


# MCP tools

def generate_state_file(seed: int, out_path: str, kind: str = "cq", num_symbols: int = 4, d_A: int = 2, d_B: int = 2, rank_cap: Optional[int] = None) -> Dict:
    """Generate a seeded random state and write it as JSON.
    Args:
        seed: Generator seed; identical seeds give byte-identical files
        out_path: Where to write the JSON file
        kind: "cq", "diagonal_cq" or "bipartite"
        num_symbols: Alphabet size |X| for cq states
        d_A: Dimension of A for bipartite states
        d_B: Dimension of B
        rank_cap: Rank of each generated operator (defaults to full rank)
    """
    data = generate_random_state(seed, kind, num_symbols, d_A, d_B, rank_cap)
    write_text(dumps_json(data), out_path)
    logger.info("Wrote %s state (seed %d) to %s", kind, seed, out_path)
    return {"state_path": out_path, "kind": data["kind"], "seed": seed}


def describe_state_file(state_path: str, search_if_not_found: bool = True) -> Dict:
    """Summarize a state file: kind, dimensions and alphabet size.
    Args:
        state_path: Full path to the JSON file or just a name to search for
        search_if_not_found: If True, search for the file if the path doesn't exist
    """
    state = load_state(state_path, search_if_not_found)
    bipartite = as_bipartite(state)
    summary = {
        "state_path": resolve_state_path(state_path, search_if_not_found),
        "kind": "cq" if isinstance(state, CQState) else "bipartite",
        "dims": list(bipartite.dims),
    }
    if isinstance(state, CQState):
        summary["num_symbols"] = state.num_symbols
        summary["probs"] = [float(p) for p in state.probs]
    return summary
