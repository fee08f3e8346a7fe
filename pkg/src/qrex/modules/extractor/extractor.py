"""Exact simulation of S = G(X) against quantum side information B.

For each family member g the output blocks rho_sg = sum_{x in g^-1(s)} p_x rho_x are
formed for all members of a chunk at once (one-hot einsum against the stack of
p_x rho_x), and their spectra feed the closed forms

  Delta_R = (1/|G|) sum_{g,s} Tr[rho_sg log2 rho_sg] - Tr[rho_B log2 rho_B] + log2|S|
  Delta_d = (1/|G|) sum_{g,s} 1/2 || rho_sg - rho_B/|S| ||_1

so the |S||G|d_B-dimensional state is never materialized.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from qrex.errors import ArgumentError, BoundViolationError, ResourceError
from qrex.modules.cq_state import CQState, marginal_B
from qrex.modules.hashing import HashFamily, chernoff_samples, family_from_dict
from qrex.modules.operator_core import as_matrix, rank, von_neumann
from qrex.modules.spectral_entropy import check_epsilon, collision_entropy_R
from qrex.modules.state_files import load_state

logger = logging.getLogger(__name__)

THEOREM1_SLACK = 1e-9
PINSKER_SLACK = 1e-9
_MEMBER_CHUNK = 4096


@dataclass(frozen=True, eq=False)
class HashedEnsemble:
    """The family average over g of {(s, p_{s|g}, rho_{s|g})}.

    ``members`` lists every family member in exact mode, or the seeded draws in
    sampled mode; blocks are produced lazily, chunk by chunk, in member order.
    """

    cq: CQState
    family: HashFamily
    members: Sequence[int]
    mode: str = "exact"

    @property
    def num_members(self) -> int:
        return len(self.members)

    def block_chunks(self, chunk: int = _MEMBER_CHUNK) -> Iterator[np.ndarray]:
        """Arrays of rho_sg with shape (members in chunk, |S|, d_B, d_B)."""
        weighted = self.cq.weighted_conditionals()
        outputs = np.arange(self.family.range_size)
        for start in range(0, self.num_members, chunk):
            table = self.family.outputs(self.members[start:start + chunk])
            one_hot = (table[:, :, None] == outputs[None, None, :]).astype(float)
            yield np.einsum("gxs,xij->gsij", one_hot, weighted)

    def conditionals(self, member: int) -> List[Tuple[int, float, np.ndarray]]:
        """(s, p_{s|g}, rho_{s|g}) for one member g; outputs with an empty preimage are omitted."""
        table = self.family.outputs([member])[0]
        weighted = self.cq.weighted_conditionals()
        result = []
        for s in range(self.family.range_size):
            block = weighted[table == s].sum(axis=0)
            mass = float(np.sum(self.cq.probs[table == s]))
            if mass > 0:
                result.append((s, mass, block / mass))
        return result


def apply_hash(
    cq: CQState,
    fam: HashFamily,
    mode: str = "exact",
    samples: Optional[int] = None,
    seed: int = 0,
    cap: Optional[int] = None,
) -> HashedEnsemble:
    """Pair a cq state with a hash family; exact mode ranges over the whole family."""
    if fam.domain_size != cq.num_symbols:
        raise ArgumentError(f"Family domain |X| = {fam.domain_size} does not match the state's |X| = {cq.num_symbols}")
    if mode == "exact":
        members = fam.all_members(cap)
    elif mode == "sampled":
        members = fam.sample(seed, chernoff_samples() if samples is None else int(samples))
    else:
        raise ArgumentError(f"mode must be 'exact' or 'sampled', got {mode!r}")
    return HashedEnsemble(cq, fam, members, mode)


def _entropy_terms(blocks: np.ndarray) -> np.ndarray:
    """sum_s Tr[rho_sg log2 rho_sg] per member."""
    values = np.clip(np.linalg.eigvalsh(blocks), 0.0, None)
    logs = np.log2(values, out=np.zeros_like(values), where=values > 0)
    return np.sum(values * logs, axis=(-2, -1))


def _distance_terms(blocks: np.ndarray, target: np.ndarray) -> np.ndarray:
    """sum_s 1/2 || rho_sg - target ||_1 per member."""
    values = np.linalg.eigvalsh(blocks - target)
    return 0.5 * np.sum(np.abs(values), axis=(-2, -1))


def _ensemble_sums(ensemble: HashedEnsemble) -> Tuple[float, float, float]:
    rho_b = as_matrix(marginal_B(ensemble.cq))
    target = rho_b / ensemble.family.range_size
    entropy_sum = distance_sum = trace_sum = 0.0
    for blocks in ensemble.block_chunks():
        entropy_sum += float(np.sum(_entropy_terms(blocks)))
        distance_sum += float(np.sum(_distance_terms(blocks, target)))
        trace_sum += float(np.real(np.einsum("gsii->", blocks)))
    count = ensemble.num_members
    return entropy_sum / count, distance_sum / count, trace_sum / count


def delta_R(ensemble: HashedEnsemble) -> float:
    """Relative-entropy distance of rho_SGB from (I_S/|S|) (x) (I_G/|G|) (x) rho_B."""
    entropy_mean, _, _ = _ensemble_sums(ensemble)
    value = entropy_mean + von_neumann(marginal_B(ensemble.cq)) + math.log2(ensemble.family.range_size)
    return max(value, 0.0)


def delta_d(ensemble: HashedEnsemble) -> float:
    """Trace distance of rho_SGB from the same ideal state."""
    _, distance_mean, _ = _ensemble_sums(ensemble)
    return distance_mean


def distance_from_uniform(cq: CQState) -> Dict:
    """Delta_d(X|B) and Delta_R(X|B) of the unhashed state against I_X/|X| (x) rho_B."""
    blocks = cq.weighted_conditionals()[None, ...]
    target = as_matrix(marginal_B(cq)) / cq.num_symbols
    entropy = float(_entropy_terms(blocks)[0])
    return {
        "delta_d": float(_distance_terms(blocks, target)[0]),
        "delta_R": max(entropy + von_neumann(marginal_B(cq)) + math.log2(cq.num_symbols), 0.0),
    }


def eta0(eps: float) -> float:
    """-eps log2 eps on [0, 1/2], 1/2 above."""
    eps = float(eps)
    if eps < 0 or math.isnan(eps):
        raise ArgumentError(f"eta0 is defined for eps >= 0, got {eps}")
    if eps == 0:
        return 0.0
    if eps <= 0.5:
        return -eps * math.log2(eps)
    return 0.5


def collision_delta(range_size: int, entropy: float) -> float:
    """delta = |S| 2^-R."""
    if entropy == math.inf:
        return 0.0
    return range_size * 2.0 ** (-entropy)


def theorem1_rhs(eps: float, range_size: int, d: int, entropy: float) -> float:
    """eps log2(d|S|) + eta0(eps) + (delta + eps + sqrt(eps))/ln 2 with delta = |S| 2^-R."""
    eps = check_epsilon(eps)
    if range_size < 1 or d < 1:
        raise ArgumentError("|S| and d must be at least 1")
    delta = collision_delta(range_size, entropy)
    return eps * math.log2(d * range_size) + eta0(eps) + (delta + eps + math.sqrt(eps)) / math.log(2)


def classical_rhs(eps: float, range_size: int, delta: float, g_dependent: bool = False) -> float:
    """Classical-side-information bound: eps log2|S| + delta/ln 2, plus eps/ln 2 when Y may depend on G."""
    value = eps * math.log2(range_size) + delta / math.log(2)
    if g_dependent:
        value += eps / math.log(2)
    return value


@dataclass(frozen=True)
class ExtractionReport:
    delta_R: float
    delta_d: float
    theorem1_rhs: float
    margin: float
    entropy: float
    epsilon: float
    delta: float
    d: int
    range_size: int
    family: Dict = field(default_factory=dict)
    mode: str = "exact"
    sample_count: int = 0
    certifying: bool = True
    block_trace: float = 1.0

    def to_dict(self) -> Dict:
        return asdict(self)


def verify_theorem1_grid(
    cq: CQState,
    fam: HashFamily,
    eps_values: Sequence[float],
    mode: str = "exact",
    samples: Optional[int] = None,
    seed: int = 0,
    tol: Optional[float] = None,
    cap: Optional[int] = None,
) -> List[ExtractionReport]:
    """One report per eps; the hashed ensemble is simulated once and shared.

    Exact mode raises BoundViolationError when a margin drops below -1e-9 or
    when Delta_d^2 > Delta_R. Sampled mode only estimates and never certifies.
    """
    eps_values = [check_epsilon(eps) for eps in eps_values]
    if mode == "exact" and not fam.enumerable(cap):
        raise ResourceError(
            f"{fam.kind} family with {fam.family_size} members is too large for exact mode; "
            "rerun in sampled mode (estimates are not certifying)"
        )
    ensemble = apply_hash(cq, fam, mode, samples, seed, cap)
    entropy_mean, distance_mean, trace_mean = _ensemble_sums(ensemble)
    rho_b = marginal_B(cq)
    relative = max(entropy_mean + von_neumann(rho_b) + math.log2(fam.range_size), 0.0)
    d = rank(rho_b)
    certifying = mode == "exact"
    if certifying and distance_mean ** 2 > relative + PINSKER_SLACK:
        raise BoundViolationError(f"Pinsker fails: Delta_d^2 = {distance_mean ** 2:.12f} > Delta_R = {relative:.12f}")
    if not certifying:
        logger.warning("Sampled run over %d members is an estimate, not a certificate", ensemble.num_members)

    reports = []
    for eps in eps_values:
        entropy = collision_entropy_R(cq, eps, tol).value
        rhs = theorem1_rhs(eps, fam.range_size, d, entropy)
        report = ExtractionReport(
            delta_R=relative,
            delta_d=distance_mean,
            theorem1_rhs=rhs,
            margin=rhs - relative,
            entropy=entropy,
            epsilon=eps,
            delta=collision_delta(fam.range_size, entropy),
            d=d,
            range_size=fam.range_size,
            family=fam.to_dict(),
            mode=mode,
            sample_count=ensemble.num_members,
            certifying=certifying,
            block_trace=trace_mean,
        )
        if certifying and report.margin < -THEOREM1_SLACK:
            raise BoundViolationError(
                f"Delta_R = {relative:.12f} exceeds the bound {rhs:.12f} (eps={eps}, |S|={fam.range_size}, d={d})"
            )
        reports.append(report)
    return reports


def verify_theorem1(
    cq: CQState,
    fam: HashFamily,
    eps: float,
    mode: str = "exact",
    samples: Optional[int] = None,
    seed: int = 0,
    tol: Optional[float] = None,
    cap: Optional[int] = None,
) -> ExtractionReport:
    """Compute Delta_R and Delta_d and compare Delta_R with the key-length bound at one eps."""
    return verify_theorem1_grid(cq, fam, [eps], mode, samples, seed, tol, cap)[0]


@dataclass(frozen=True)
class LengthReport:
    m: float
    range_size: int
    eps_prime: float
    feasible: bool
    entropy: float
    delta: float
    lower_bound: float


def length_epsilon(eps: float, d: int, domain_size: int, delta: float) -> float:
    """eps log2(d|X|) + eta0(eps) + (delta + eps + sqrt(eps))/ln 2."""
    eps = check_epsilon(eps)
    return eps * math.log2(d * domain_size) + eta0(eps) + (delta + eps + math.sqrt(eps)) / math.log(2)


def _candidate_sizes(family_kind: str, domain_size: int) -> List[int]:
    if family_kind in ("all_functions", "all"):
        return list(range(domain_size, 0, -1))
    bits = domain_size.bit_length() - 1
    if 2 ** bits != domain_size:
        raise ArgumentError(f"{family_kind} families need |X| to be a power of two, got {domain_size}")
    return [2 ** m for m in range(bits, -1, -1)]


def extractable_length(
    cq: CQState,
    eps: float,
    family_kind: str = "linear_gf2",
    target: float = 0.1,
    tol: Optional[float] = None,
) -> LengthReport:
    """Longest output log2|S| whose relative-entropy distance bound is at most ``target``.

    Sizes are tried from |X| downward; when none qualifies the report carries
    m = 0 with its distance bound and ``feasible`` False.
    """
    eps = check_epsilon(eps)
    if target < 0:
        raise ArgumentError("target must be nonnegative")
    entropy = collision_entropy_R(cq, eps, tol).value
    d = rank(marginal_B(cq))
    sizes = _candidate_sizes(family_kind, cq.num_symbols)
    for size in sizes:
        delta = collision_delta(size, entropy)
        bound = length_epsilon(eps, d, cq.num_symbols, delta)
        if bound <= target:
            return LengthReport(math.log2(size), size, bound, True, entropy, delta, entropy + math.log2(delta) if delta > 0 else math.inf)
    delta = collision_delta(1, entropy)
    bound = length_epsilon(eps, d, cq.num_symbols, delta)
    return LengthReport(0.0, 1, bound, False, entropy, delta, entropy + math.log2(delta) if delta > 0 else math.inf)


# MCP tools

def run_extraction(state_path: str, family: dict, eps: float, mode: str = "exact", samples: Optional[int] = None, seed: int = 0) -> Dict:
    """Hash a cq state with a two-universal family and compare Delta_R with the key-length bound.
    Args:
        state_path: Full path to a cq state JSON file or just a name to search for
        family: Family descriptor, e.g. {"kind": "linear_gf2", "n": 2, "m": 1}
        eps: Failure mass in [0, 1)
        mode: "exact" (whole family) or "sampled" (seeded draws, non-certifying)
        samples: Number of sampled members (default: Hoeffding-sized)
        seed: Sampling seed
    """
    cq = load_state(state_path)
    if not isinstance(cq, CQState):
        raise ArgumentError("Extraction needs a cq state")
    return verify_theorem1(cq, family_from_dict(family), eps, mode, samples, seed).to_dict()


def estimate_key_length(state_path: str, eps: float, target: float, family_kind: str = "linear_gf2") -> Dict:
    """Largest extractable key length log2|S| for a target relative-entropy distance.
    Args:
        state_path: Full path to a cq state JSON file or just a name to search for
        eps: Failure mass in [0, 1)
        target: Largest acceptable distance bound
        family_kind: "all_functions", "linear_gf2" or "toeplitz_gf2"
    """
    cq = load_state(state_path)
    if not isinstance(cq, CQState):
        raise ArgumentError("Key-length estimation needs a cq state")
    return asdict(extractable_length(cq, eps, family_kind, target))
