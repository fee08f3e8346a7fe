"""Classical-quantum states rho_XB, bipartite states rho_AB and seeded generators.

Bipartite operators are ordered A (x) B. Tensor powers are reordered so that
all A factors precede all B factors, giving dims (d_A^n, d_B^n).
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import unitary_group

from qrex.errors import ArgumentError, ResourceError, StateFormatError
from qrex.modules.operator_core import (
    DensityOperator,
    HermitianOperator,
    OperatorLike,
    as_matrix,
    decode_matrix,
    encode_matrix,
    partial_trace,
    von_neumann,
)
from qrex.settings import resolve_cap

logger = logging.getLogger(__name__)

PROBABILITY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class CQState:
    """rho_XB = sum_x p_x |x><x| (x) rho_x over an ordered finite alphabet."""

    alphabet: Tuple
    probs: np.ndarray
    conditionals: Tuple[DensityOperator, ...]

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        conditionals = tuple(
            c if isinstance(c, DensityOperator) else DensityOperator.from_matrix(as_matrix(c)) for c in self.conditionals
        )
        alphabet = tuple(self.alphabet)
        if probs.ndim != 1 or probs.size == 0:
            raise ArgumentError("probs must be a non-empty vector")
        if len(alphabet) != probs.size or len(conditionals) != probs.size:
            raise ArgumentError(
                f"alphabet ({len(alphabet)}), probs ({probs.size}) and conditionals ({len(conditionals)}) differ in length"
            )
        if len(set(alphabet)) != len(alphabet):
            raise ArgumentError("alphabet symbols must be distinct")
        if np.any(probs < 0):
            raise ArgumentError("probabilities must be nonnegative")
        if abs(probs.sum() - 1) > PROBABILITY_TOL:
            raise ArgumentError(f"probabilities sum to {probs.sum():.12f}, expected 1")
        dims = {c.dim for c in conditionals}
        if len(dims) != 1:
            raise ArgumentError(f"conditionals have differing dimensions {sorted(dims)}")
        probs = probs.copy()
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "conditionals", conditionals)
        object.__setattr__(self, "alphabet", alphabet)

    @property
    def num_symbols(self) -> int:
        return len(self.alphabet)

    @property
    def d_B(self) -> int:
        return self.conditionals[0].dim

    def weighted_conditionals(self) -> np.ndarray:
        """Stack of p_x rho_x with shape (|X|, d_B, d_B)."""
        return np.stack([p * c.matrix for p, c in zip(self.probs, self.conditionals)])

    @classmethod
    def from_arrays(cls, probs: Sequence[float], conditionals: Sequence[OperatorLike], alphabet: Optional[Sequence] = None) -> "CQState":
        if alphabet is None:
            alphabet = tuple(range(len(probs)))
        return cls(alphabet=tuple(alphabet), probs=np.asarray(probs, dtype=float), conditionals=tuple(conditionals))


@dataclass(frozen=True, eq=False)
class BipartiteState:
    """A density operator on H_A (x) H_B with its factor dimensions."""

    state: DensityOperator
    dims: Tuple[int, int]

    def __post_init__(self):
        if not isinstance(self.state, DensityOperator):
            object.__setattr__(self, "state", DensityOperator.from_matrix(as_matrix(self.state)))
        d_a, d_b = (int(d) for d in self.dims)
        if d_a < 1 or d_b < 1 or d_a * d_b != self.state.dim:
            raise ArgumentError(f"dims {self.dims} do not factor dimension {self.state.dim}")
        object.__setattr__(self, "dims", (d_a, d_b))

    @property
    def d_A(self) -> int:
        return self.dims[0]

    @property
    def d_B(self) -> int:
        return self.dims[1]

    @property
    def matrix(self) -> np.ndarray:
        return self.state.matrix

    def marginal_A(self) -> DensityOperator:
        return DensityOperator(partial_trace(self.state, self.dims, keep="A"))

    def marginal_B(self) -> DensityOperator:
        return DensityOperator(partial_trace(self.state, self.dims, keep="B"))

    @classmethod
    def from_matrix(cls, matrix: OperatorLike, dims: Tuple[int, int]) -> "BipartiteState":
        return cls(DensityOperator.from_matrix(as_matrix(matrix)), tuple(dims))


def embed(cq: CQState) -> BipartiteState:
    """Block-diagonal rho_XB with block x equal to p_x rho_x (d_A = |X|)."""
    d_b = cq.d_B
    matrix = np.zeros((cq.num_symbols * d_b, cq.num_symbols * d_b), dtype=complex)
    for x, block in enumerate(cq.weighted_conditionals()):
        matrix[x * d_b:(x + 1) * d_b, x * d_b:(x + 1) * d_b] = block
    return BipartiteState(DensityOperator(HermitianOperator(matrix)), (cq.num_symbols, d_b))


def marginal_B(cq: CQState) -> DensityOperator:
    """rho_B = sum_x p_x rho_x."""
    return DensityOperator(HermitianOperator(cq.weighted_conditionals().sum(axis=0)))


def marginal_X(cq: CQState) -> np.ndarray:
    return np.array(cq.probs)


def _check_dims(*dims: int):
    for dim in dims:
        if int(dim) != dim or dim < 1:
            raise ArgumentError(f"Dimensions must be positive integers, got {dims}")


def derive_seed(seed: int, counter: int) -> int:
    """Sub-seed number ``counter`` of a run seed: first word of SeedSequence([seed, counter])."""
    return int(np.random.SeedSequence([int(seed), int(counter)]).generate_state(1)[0])


def _random_density(rng: np.random.Generator, dim: int, rank_cap: int) -> np.ndarray:
    # Normalized Wishart-type ensemble: G G^dagger / Tr with complex standard-normal G of width rank_cap.
    g = rng.standard_normal((dim, rank_cap)) + 1j * rng.standard_normal((dim, rank_cap))
    rho = g @ g.conj().T
    return rho / np.real(np.trace(rho))


def random_cq(seed: int, num_symbols: int, d_B: int, rank_cap: Optional[int] = None) -> CQState:
    """Seeded random cq state: exponential-then-normalized probabilities and Wishart-type conditionals."""
    _check_dims(num_symbols, d_B)
    rank_cap = d_B if rank_cap is None else rank_cap
    if not 1 <= rank_cap <= d_B:
        raise ArgumentError(f"rank_cap must lie in [1, {d_B}], got {rank_cap}")
    rng = np.random.default_rng(seed)
    weights = rng.exponential(size=num_symbols)
    probs = weights / weights.sum()
    conditionals = [_random_density(rng, d_B, rank_cap) for _ in range(num_symbols)]
    return CQState.from_arrays(probs, conditionals)


def random_diagonal_cq(seed: int, num_symbols: int, d_B: int) -> CQState:
    """Seeded cq state whose conditionals are diagonal in the computational basis."""
    _check_dims(num_symbols, d_B)
    rng = np.random.default_rng(seed)
    weights = rng.exponential(size=num_symbols)
    probs = weights / weights.sum()
    conditionals = []
    for _ in range(num_symbols):
        diagonal = rng.exponential(size=d_B)
        conditionals.append(np.diag(diagonal / diagonal.sum()))
    return CQState.from_arrays(probs, conditionals)


def random_bipartite(seed: int, d_A: int, d_B: int, rank_cap: Optional[int] = None) -> BipartiteState:
    _check_dims(d_A, d_B)
    dim = d_A * d_B
    rank_cap = dim if rank_cap is None else rank_cap
    if not 1 <= rank_cap <= dim:
        raise ArgumentError(f"rank_cap must lie in [1, {dim}], got {rank_cap}")
    rng = np.random.default_rng(seed)
    return BipartiteState.from_matrix(_random_density(rng, dim, rank_cap), (d_A, d_B))


def cq_from_joint(joint: np.ndarray) -> CQState:
    """Diagonal cq state of a joint pmf P[x, y]: rho_x = diag(P(y|x)) on the Y register."""
    joint = np.asarray(joint, dtype=float)
    if joint.ndim != 2:
        raise ArgumentError("joint pmf must be a 2-d array indexed [x, y]")
    p_x = joint.sum(axis=1)
    keep = p_x > 0
    conditionals = [np.diag(row / total) for row, total in zip(joint[keep], p_x[keep])]
    alphabet = tuple(int(x) for x in np.flatnonzero(keep))
    return CQState.from_arrays(p_x[keep], conditionals, alphabet)


def maximally_mixed(d_A: int, d_B: int) -> BipartiteState:
    return BipartiteState(DensityOperator.maximally_mixed(d_A * d_B), (d_A, d_B))


def maximally_entangled(d: int) -> BipartiteState:
    psi = np.eye(d, dtype=complex).reshape(d * d) / np.sqrt(d)
    return BipartiteState.from_matrix(np.outer(psi, psi.conj()), (d, d))


def product_state(rho_A: OperatorLike, rho_B: OperatorLike) -> BipartiteState:
    a, b = as_matrix(rho_A), as_matrix(rho_B)
    return BipartiteState.from_matrix(np.kron(a, b), (a.shape[0], b.shape[0]))


def random_isometry(seed: int, d_in: int, d_out: int) -> np.ndarray:
    """d_out x d_in isometry: the first d_in columns of a seeded Haar unitary."""
    if d_out < d_in:
        raise ArgumentError(f"An isometry needs d_out >= d_in, got {d_out} < {d_in}")
    if d_out == 1:
        return np.ones((1, 1), dtype=complex)
    return unitary_group.rvs(d_out, random_state=seed)[:, :d_in]


def apply_isometry_B(rho: BipartiteState, isometry: np.ndarray) -> BipartiteState:
    """(I_A (x) V) rho_AB (I_A (x) V)^dagger."""
    isometry = np.asarray(isometry, dtype=complex)
    if isometry.shape[1] != rho.d_B:
        raise ArgumentError(f"Isometry maps from dimension {isometry.shape[1]}, state has d_B = {rho.d_B}")
    if np.max(np.abs(isometry.conj().T @ isometry - np.eye(rho.d_B))) > 1e-9:
        raise ArgumentError("V^dagger V is not the identity")
    lift = np.kron(np.eye(rho.d_A), isometry)
    return BipartiteState.from_matrix(lift @ rho.matrix @ lift.conj().T, (rho.d_A, isometry.shape[0]))


def tensor_power(rho: BipartiteState, n: int, dim_cap: Optional[int] = None) -> BipartiteState:
    """rho^(x)n with all A factors moved before all B factors."""
    if int(n) != n or n < 1:
        raise ArgumentError(f"n must be a positive integer, got {n}")
    cap = resolve_cap(dim_cap, "dim_cap")
    d_a, d_b = rho.dims
    dim = (d_a * d_b) ** n
    if dim > cap:
        raise ResourceError(
            f"rho^(x){n} has dimension {dim} > cap {cap}; use the spectrum-convolution path in asymptotics"
        )
    if n == 1:
        return rho
    matrix = rho.matrix
    power = matrix
    for _ in range(n - 1):
        power = np.kron(power, matrix)
    # Row index factors as (a1, b1, a2, b2, ...); regroup to (a1..an, b1..bn).
    shape = [d_a, d_b] * n
    order = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
    axes = order + [2 * n + k for k in order]
    reordered = power.reshape(shape + shape).transpose(axes).reshape(dim, dim)
    logger.debug("tensor_power: n=%d, dim=%d", n, dim)
    return BipartiteState.from_matrix(reordered, (d_a ** n, d_b ** n))


State = Union[CQState, BipartiteState]


def state_to_dict(state: State) -> Dict:
    """JSON form: {"kind":"cq","p","dB","conditionals"} or {"kind":"bipartite","dA","dB","rho"}."""
    if isinstance(state, CQState):
        return {
            "kind": "cq",
            "p": [float(p) for p in state.probs],
            "dB": state.d_B,
            "conditionals": [encode_matrix(c) for c in state.conditionals],
        }
    if isinstance(state, BipartiteState):
        return {"kind": "bipartite", "dA": state.d_A, "dB": state.d_B, "rho": encode_matrix(state.state)}
    raise ArgumentError(f"Cannot encode {type(state).__name__}")


def _require(data: Dict, field: str, kind: type):
    if field not in data:
        raise StateFormatError(f"Missing field '{field}'")
    value = data[field]
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise StateFormatError(f"Field '{field}': expected an integer")
    if kind is list and not isinstance(value, list):
        raise StateFormatError(f"Field '{field}': expected an array")
    return value


def state_from_dict(data: Dict) -> State:
    if not isinstance(data, dict):
        raise StateFormatError("State JSON must be an object")
    kind = data.get("kind")
    try:
        if kind == "cq":
            probs = _require(data, "p", list)
            d_b = _require(data, "dB", int)
            raw = _require(data, "conditionals", list)
            conditionals = [decode_matrix(c, f"conditionals[{i}]") for i, c in enumerate(raw)]
            for i, c in enumerate(conditionals):
                if c.shape[0] != d_b:
                    raise StateFormatError(f"Field 'conditionals[{i}]': dimension {c.shape[0]} differs from dB = {d_b}")
            return CQState.from_arrays(probs, conditionals)
        if kind == "bipartite":
            d_a = _require(data, "dA", int)
            d_b = _require(data, "dB", int)
            rho = decode_matrix(_require(data, "rho", list), "rho")
            return BipartiteState.from_matrix(rho, (d_a, d_b))
    except StateFormatError:
        raise
    except ArgumentError as exc:
        raise StateFormatError(f"Invalid {kind} state: {exc}") from exc
    raise StateFormatError(f"Field 'kind': expected 'cq' or 'bipartite', got {kind!r}")


def as_bipartite(state: State) -> BipartiteState:
    return embed(state) if isinstance(state, CQState) else state


# MCP tools

def generate_random_state(seed: int, kind: str = "cq", num_symbols: int = 4, d_A: int = 2, d_B: int = 2, rank_cap: Optional[int] = None) -> Dict:
    """Generate a seeded random cq or bipartite state and return its JSON form.
    Args:
        seed: Generator seed; the same seed always gives the same state
        kind: "cq", "diagonal_cq" or "bipartite"
        num_symbols: Alphabet size |X| for cq states
        d_A: Dimension of A for bipartite states
        d_B: Dimension of B
        rank_cap: Width of the Wishart factor (rank of each generated operator)
    """
    if kind == "cq":
        return state_to_dict(random_cq(seed, num_symbols, d_B, rank_cap))
    if kind == "diagonal_cq":
        return state_to_dict(random_diagonal_cq(seed, num_symbols, d_B))
    if kind == "bipartite":
        return state_to_dict(random_bipartite(seed, d_A, d_B, rank_cap))
    raise ArgumentError(f"Unknown state kind '{kind}'")


def state_marginals(state: dict) -> Dict:
    """Marginals and entropies of a state given in JSON form.
    Args:
        state: A cq or bipartite state JSON object
    """
    parsed = as_bipartite(state_from_dict(state))
    rho_b = parsed.marginal_B()
    return {
        "dims": list(parsed.dims),
        "marginal_A": encode_matrix(parsed.marginal_A()),
        "marginal_B": encode_matrix(rho_b),
        "entropy_AB": von_neumann(parsed.state),
        "entropy_B": von_neumann(rho_b),
    }
