"""Command-line driver.

Every subcommand builds a validated RunConfig and hands it to ``run``, which
returns the process exit status: 0 success, 1 a bound that must hold failed,
2 usage or input error, 3 resource or eigensolver error.
"""

import logging
import math
import sys
from dataclasses import asdict
from pathlib import Path
from typing import List, Literal, Optional

import typer
from pydantic import BaseModel, ValidationError, field_validator, model_validator

from qrex.errors import ArgumentError, QrexError, ResourceError
from qrex.modules.asymptotics import SCAN_COLUMNS, corollary4_scan
from qrex.modules.corpus import corpus_csv, parse_seed_range, run_corpus
from qrex.modules.cq_state import CQState, generate_random_state
from qrex.modules.extension_bound import verify_theorem2
from qrex.modules.extractor import extractable_length, verify_theorem1
from qrex.modules.hashing import make_family
from qrex.modules.spectral_entropy import collision_entropy_R
from qrex.modules.state_files import dumps_json, format_csv, load_state, write_text
from qrex.settings import get_settings, override_settings

logger = logging.getLogger(__name__)

Command = Literal["gen", "entropy", "extract", "bound", "extension", "asymptotics", "corpus"]

_NEEDS_INPUT = {"entropy", "extract", "bound", "extension", "asymptotics"}


class RunConfig(BaseModel):
    command: Command
    input: Optional[Path] = None
    output: Optional[Path] = None
    format: Literal["json", "csv"] = "json"
    seed: int = 0
    seeds: Optional[str] = None
    kind: Literal["cq", "diagonal_cq", "bipartite"] = "cq"
    num_symbols: int = 4
    d_A: int = 2
    d_B: int = 2
    rank_cap: Optional[int] = None
    eps: float = 0.0
    eps_values: List[float] = [0.0]
    eps_under: Optional[float] = None
    eps_hat: Optional[float] = None
    tol: Optional[float] = None
    n: int = 20
    schedule: Literal["default", "proof"] = "default"
    family: str = "linear_gf2"
    families: List[str] = ["linear_gf2"]
    range_size: Optional[int] = None
    mode: Literal["exact", "sampled"] = "exact"
    samples: Optional[int] = None
    target: float = 0.1
    workers: Optional[int] = None
    dim_cap: Optional[int] = None
    atom_cap: Optional[int] = None
    enumeration_cap: Optional[int] = None

    @field_validator("eps")
    @classmethod
    def _eps_in_range(cls, value: float) -> float:
        if not 0 <= value < 1:
            raise ValueError("eps must lie in [0, 1)")
        return value

    @field_validator("eps_values")
    @classmethod
    def _eps_values_in_range(cls, values: List[float]) -> List[float]:
        if not values or any(not 0 <= v < 1 for v in values):
            raise ValueError("every eps must lie in [0, 1)")
        return values

    @field_validator("eps_under", "eps_hat")
    @classmethod
    def _open_unit_interval(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and not 0 < value < 1:
            raise ValueError("must lie in (0, 1)")
        return value

    @field_validator("tol", "target")
    @classmethod
    def _positive_or_none(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and (value < 0 or not math.isfinite(value)):
            raise ValueError("must be a finite nonnegative number")
        return value

    @field_validator("num_symbols", "d_A", "d_B", "n")
    @classmethod
    def _at_least_one(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be at least 1")
        return value

    @field_validator("rank_cap", "range_size", "samples", "workers", "dim_cap", "atom_cap", "enumeration_cap")
    @classmethod
    def _positive_count(cls, value: Optional[int]) -> Optional[int]:
        if value is not None and value < 1:
            raise ValueError("must be at least 1")
        return value

    @model_validator(mode="after")
    def _required_for_command(self) -> "RunConfig":
        if self.command in _NEEDS_INPUT and self.input is None:
            raise ValueError(f"'{self.command}' needs --in")
        if self.command == "extension" and (self.eps_under is None or self.eps_hat is None):
            raise ValueError("'extension' needs --eps-under and --eps-hat")
        if self.command == "corpus":
            if self.seeds is None:
                raise ValueError("'corpus' needs --seeds")
            parse_seed_range(self.seeds)
        if self.tol is not None and self.tol == 0:
            raise ValueError("tol must be positive")
        return self


def _emit(text: str, output: Optional[Path]):
    if output is None:
        sys.stdout.write(text)
    else:
        write_text(text, str(output))
        logger.info("Wrote %s", output)


def _load_cq(path: Path) -> CQState:
    state = load_state(str(path), search_if_not_found=False)
    if not isinstance(state, CQState):
        raise QrexError(f"{path}: this command needs a cq state")
    return state


def _execute(config: RunConfig):
    if config.command == "gen":
        data = generate_random_state(config.seed, config.kind, config.num_symbols, config.d_A, config.d_B, config.rank_cap)
        _emit(dumps_json(data), config.output)
    elif config.command == "entropy":
        state = load_state(str(config.input), search_if_not_found=False)
        _emit(dumps_json(collision_entropy_R(state, config.eps, config.tol).to_dict()), config.output)
    elif config.command == "extract":
        cq = _load_cq(config.input)
        range_size = config.range_size or 2
        fam = make_family(config.family, cq.num_symbols, range_size)
        report = verify_theorem1(cq, fam, config.eps, config.mode, config.samples, config.seed, config.tol)
        _emit(dumps_json(report.to_dict()), config.output)
    elif config.command == "bound":
        cq = _load_cq(config.input)
        report = extractable_length(cq, config.eps, config.family, config.target, config.tol)
        _emit(dumps_json(asdict(report)), config.output)
    elif config.command == "extension":
        state = load_state(str(config.input), search_if_not_found=False)
        _emit(dumps_json(verify_theorem2(state, config.eps_under, config.eps_hat, config.tol).to_dict()), config.output)
    elif config.command == "asymptotics":
        state = load_state(str(config.input), search_if_not_found=False)
        rows = corollary4_scan(state, config.n, config.schedule)
        if config.format == "csv":
            _emit(format_csv([row.to_dict() for row in rows], SCAN_COLUMNS), config.output)
        else:
            _emit(dumps_json([row.to_dict() for row in rows]), config.output)
    elif config.command == "corpus":
        rows = run_corpus(parse_seed_range(config.seeds), config.eps_values, config.families, config.workers)
        if config.format == "json":
            _emit(dumps_json(rows), config.output)
        else:
            _emit(corpus_csv(rows), config.output)


def run(config: RunConfig) -> int:
    """Execute one command; returns the exit status instead of raising."""
    try:
        with override_settings(dim_cap=config.dim_cap, atom_cap=config.atom_cap, enumeration_cap=config.enumeration_cap):
            _execute(config)
    except QrexError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code
    except MemoryError as exc:
        logger.error("MemoryError: %s", exc)
        return ResourceError.exit_code
    except Exception as exc:
        # Exit code 1 is reserved for bound violations.
        logger.error("%s: %s", type(exc).__name__, exc)
        return ArgumentError.exit_code
    return 0


def _run_command(**fields):
    try:
        config = RunConfig(**fields)
    except (ValidationError, QrexError) as exc:
        typer.echo(f"Invalid arguments: {exc}", err=True)
        raise typer.Exit(code=2)
    code = run(config)
    if code:
        raise typer.Exit(code=code)


def _float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        typer.echo(f"Invalid number list: {text!r}", err=True)
        raise typer.Exit(code=2)


app = typer.Typer(
    help="Information-spectrum collision entropies and privacy amplification bounds.",
    no_args_is_help=True,
    add_completion=False,
)

InPath = typer.Option(None, "--in", help="State JSON file")
OutPath = typer.Option(None, "--out", help="Output file (default: stdout)")
DimCap = typer.Option(None, "--dim-cap", help="Dimension cap (default: QREX_DIM_CAP or 8192)")


@app.callback()
def configure(log_level: Optional[str] = typer.Option(None, "--log-level", help="Logging level (default from QREX_LOG_LEVEL)")):
    level = (log_level or get_settings().log_level).upper()
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s", force=True)


@app.command()
def gen(
    seed: int = typer.Option(..., "--seed"),
    num_symbols: int = typer.Option(4, "--X", help="Alphabet size |X| (cq kinds)"),
    d_B: int = typer.Option(2, "--dB"),
    d_A: int = typer.Option(2, "--dA", help="Dimension of A (bipartite kind)"),
    kind: str = typer.Option("cq", "--kind", help="cq, diagonal_cq or bipartite"),
    rank_cap: Optional[int] = typer.Option(None, "--rank-cap"),
    out: Optional[Path] = OutPath,
):
    """Generate a seeded random state.

    cq conditionals and bipartite states are normalized G G^dagger with a
    complex standard-normal G of width rank_cap (full rank by default);
    probabilities are normalized exponentials.
    """
    _run_command(command="gen", seed=seed, num_symbols=num_symbols, d_B=d_B, d_A=d_A, kind=kind, rank_cap=rank_cap, output=out)


@app.command()
def entropy(
    input: Optional[Path] = InPath,
    eps: float = typer.Option(0.0, "--eps"),
    tol: Optional[float] = typer.Option(None, "--tol", help="Bisection tolerance in bits"),
    out: Optional[Path] = OutPath,
    dim_cap: Optional[int] = DimCap,
):
    """Collision entropy R_eps(A|B) with its certificate."""
    _run_command(command="entropy", input=input, eps=eps, tol=tol, output=out, dim_cap=dim_cap)


@app.command()
def extract(
    input: Optional[Path] = InPath,
    family: str = typer.Option("linear_gf2", "--family", help="all_functions, linear_gf2 or toeplitz_gf2"),
    range_size: int = typer.Option(2, "--S", help="Output size |S|"),
    eps: float = typer.Option(0.0, "--eps"),
    mode: str = typer.Option("exact", "--mode", help="exact or sampled"),
    samples: Optional[int] = typer.Option(None, "--samples"),
    seed: int = typer.Option(0, "--seed", help="Sampling seed"),
    out: Optional[Path] = OutPath,
    enumeration_cap: Optional[int] = typer.Option(None, "--enumeration-cap"),
):
    """Hash a cq state and check Delta_R against the key-length bound."""
    _run_command(
        command="extract", input=input, family=family, range_size=range_size, eps=eps, mode=mode,
        samples=samples, seed=seed, output=out, enumeration_cap=enumeration_cap,
    )


@app.command()
def bound(
    input: Optional[Path] = InPath,
    eps: float = typer.Option(0.0, "--eps"),
    target: float = typer.Option(0.1, "--target", help="Largest acceptable distance bound"),
    family: str = typer.Option("linear_gf2", "--family"),
    out: Optional[Path] = OutPath,
):
    """Longest extractable key for a target distance."""
    _run_command(command="bound", input=input, eps=eps, target=target, family=family, output=out)


@app.command()
def extension(
    input: Optional[Path] = InPath,
    eps_under: Optional[float] = typer.Option(None, "--eps-under"),
    eps_hat: Optional[float] = typer.Option(None, "--eps-hat"),
    tol: Optional[float] = typer.Option(None, "--tol"),
    out: Optional[Path] = OutPath,
    dim_cap: Optional[int] = DimCap,
):
    """Flagged extension and its collision-entropy lower bound."""
    _run_command(command="extension", input=input, eps_under=eps_under, eps_hat=eps_hat, tol=tol, output=out, dim_cap=dim_cap)


@app.command()
def asymptotics(
    input: Optional[Path] = InPath,
    n: int = typer.Option(20, "--n", help="Largest number of copies"),
    schedule: str = typer.Option("default", "--schedule", help="default or proof"),
    format: str = typer.Option("csv", "--format", help="csv or json"),
    out: Optional[Path] = OutPath,
    atom_cap: Optional[int] = typer.Option(None, "--atom-cap"),
):
    """Per-copy extension bound of tensor powers against S(A|B)."""
    _run_command(command="asymptotics", input=input, n=n, schedule=schedule, format=format, output=out, atom_cap=atom_cap)


@app.command()
def corpus(
    seeds: str = typer.Option(..., "--seeds", help="Seed range a..b or list a,b,c"),
    eps: str = typer.Option("0,0.01,0.1", "--eps", help="Comma-separated failure masses"),
    family: str = typer.Option("linear", "--family", help="Comma-separated kinds: all, linear, toeplitz"),
    workers: Optional[int] = typer.Option(None, "--workers"),
    format: str = typer.Option("csv", "--format", help="csv or json"),
    out: Optional[Path] = OutPath,
):
    """Theorem-1 corpus: one row per seed, family and eps."""
    _run_command(
        command="corpus", seeds=seeds, eps_values=_float_list(eps),
        families=[part.strip() for part in family.split(",") if part.strip()],
        workers=workers, format=format, output=out,
    )


@app.command()
def serve():
    """Run the MCP server on stdio."""
    from qrex.main import main as serve_mcp

    serve_mcp()


def main():
    app()


if __name__ == "__main__":
    main()
