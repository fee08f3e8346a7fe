"""Explicit side-information extension and the lower bound

    R_eps(A|BC) >= H_inf_{eps_under}(AB) - H_sup_{eps_hat}(B) + log2(1 - sqrt(eps_under)),
    eps = sqrt(eps_under) + eps_under + eps_hat.

The extension adds a qubit flag C: the clipped part rho_bar = rho {rho <= mu} of
rho_AB goes to flag 1 and the remainder to flag 0. C is folded into the
conditioning system, giving dims (d_A, 2 d_B).
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, Optional

import numpy as np

from qrex.errors import BoundViolationError
from qrex.modules.cq_state import BipartiteState, as_bipartite, derive_seed, state_to_dict
from qrex.modules.operator_core import HermitianOperator, as_matrix, check_dim, spectral_decompose
from qrex.modules.spectral_entropy import check_epsilon, collision_entropy_R, h_inf, h_sup
from qrex.modules.state_files import load_state

logger = logging.getLogger(__name__)

THEOREM2_TOL = 1e-6
SPOILING_GAIN = 0.01

FLAG_ZERO = np.diag([1.0, 0.0]).astype(complex)
FLAG_ONE = np.diag([0.0, 1.0]).astype(complex)


def _clip(rho: BipartiteState, eps_under: float):
    eps_under = check_epsilon(eps_under, "eps_under", allow_zero=False)
    mu = 2.0 ** (-h_inf(rho.state, eps_under))
    spectrum = spectral_decompose(rho.state)
    # Ties at mu are kept, matching the non-strict {rho <= mu}.
    keep = spectrum.eigenvalues <= mu + spectrum.cutoff()
    clipped = (spectrum.eigenvectors[:, keep] * spectrum.eigenvalues[keep]) @ spectrum.eigenvectors[:, keep].conj().T
    return HermitianOperator(clipped), mu


def clipped_state(rho: BipartiteState, eps_under: float) -> HermitianOperator:
    """rho_bar = rho {rho <= mu} with mu = 2^-H_inf(rho, eps_under)."""
    clipped, _ = _clip(as_bipartite(rho), eps_under)
    return clipped


@dataclass(frozen=True, eq=False)
class ExtensionWitness:
    rho_ABC: BipartiteState
    clipped: HermitianOperator
    mu: float
    c_check: float
    eps_under: float
    flag_one_mass: float
    lam: Optional[float] = None
    eps_hat: Optional[float] = None
    eps_total: Optional[float] = None

    @property
    def flag_zero_block(self) -> np.ndarray:
        return self.block(0)

    def block(self, flag: int) -> np.ndarray:
        """The A(x)B operator sitting next to |flag><flag|."""
        d_a, d_bc = self.rho_ABC.dims
        blocks = self.rho_ABC.matrix.reshape(d_a, d_bc // 2, 2, d_a, d_bc // 2, 2)
        dim = d_a * d_bc // 2
        return blocks[:, :, flag, :, :, flag].reshape(dim, dim)


def flag_extension(flag_zero: np.ndarray, flag_one: np.ndarray, dims) -> BipartiteState:
    """flag_zero (x) |0><0| + flag_one (x) |1><1| with the flag appended to the conditioning system."""
    matrix = np.kron(as_matrix(flag_zero), FLAG_ZERO) + np.kron(as_matrix(flag_one), FLAG_ONE)
    return BipartiteState.from_matrix(matrix, (dims[0], 2 * dims[1]))


def build_extension(rho: BipartiteState, eps_under: float, eps_hat: Optional[float] = None) -> ExtensionWitness:
    """The flagged extension; lam and eps_total are filled in when eps_hat is given."""
    rho = as_bipartite(rho)
    check_dim(2 * rho.state.dim, what="Flagged extension")
    clipped, mu = _clip(rho, eps_under)
    extension = flag_extension(rho.matrix - clipped.matrix, clipped, rho.dims)
    lam = eps_total = None
    if eps_hat is not None:
        eps_hat = check_epsilon(eps_hat, "eps_hat", allow_zero=False)
        lam = 2.0 ** (-h_sup(rho.marginal_B(), eps_hat))
        eps_total = math.sqrt(eps_under) + eps_under + eps_hat
    return ExtensionWitness(
        rho_ABC=extension,
        clipped=clipped,
        mu=mu,
        c_check=1 - math.sqrt(eps_under),
        eps_under=float(eps_under),
        flag_one_mass=clipped.trace(),
        lam=lam,
        eps_hat=eps_hat,
        eps_total=eps_total,
    )


@dataclass(frozen=True)
class Theorem2Bound:
    bound: float
    eps: float
    vacuous: bool


def theorem2_lower_bound(rho: BipartiteState, eps_under: float, eps_hat: float) -> Theorem2Bound:
    """H_inf(AB) - H_sup(B) + log2(1 - sqrt(eps_under)) and its total failure mass.

    ``vacuous`` is set when the total mass reaches 1, where R_eps is undefined.
    """
    rho = as_bipartite(rho)
    eps_under = check_epsilon(eps_under, "eps_under", allow_zero=False)
    eps_hat = check_epsilon(eps_hat, "eps_hat", allow_zero=False)
    bound = h_inf(rho.state, eps_under) - h_sup(rho.marginal_B(), eps_hat) + math.log2(1 - math.sqrt(eps_under))
    eps = math.sqrt(eps_under) + eps_under + eps_hat
    vacuous = eps >= 1
    if vacuous:
        logger.warning("Total failure mass %.6f >= 1: the bound is vacuous", eps)
    return Theorem2Bound(bound=bound, eps=eps, vacuous=vacuous)


@dataclass(frozen=True)
class Theorem2Report:
    eps_under: float
    eps_hat: float
    mu: float
    lam: float
    c_check: float
    bound: float
    eps: float
    vacuous: bool
    R_A_BC: Optional[float] = None
    R_A_B: Optional[float] = None
    margin: Optional[float] = None
    extension_helps: Optional[bool] = None
    clipping_trivial: bool = False

    def to_dict(self) -> Dict:
        return asdict(self)


def verify_theorem2(rho: BipartiteState, eps_under: float, eps_hat: float, tol: Optional[float] = None) -> Theorem2Report:
    """Evaluate R_eps(A|BC) on the explicit extension and check it against the lower bound.

    Raises BoundViolationError when a non-vacuous run falls more than 1e-6 bits
    short of the bound, or when the extension lowers R_eps although the clipping
    left rho unchanged.
    """
    rho = as_bipartite(rho)
    lower = theorem2_lower_bound(rho, eps_under, eps_hat)
    witness = build_extension(rho, eps_under, eps_hat)
    trivial = bool(np.max(np.abs(witness.flag_zero_block)) <= rho.state.dim * 1e-12)
    fields = dict(
        eps_under=float(eps_under),
        eps_hat=float(eps_hat),
        mu=witness.mu,
        lam=witness.lam,
        c_check=witness.c_check,
        bound=lower.bound,
        eps=lower.eps,
        vacuous=lower.vacuous,
        clipping_trivial=trivial,
    )
    if lower.vacuous:
        return Theorem2Report(**fields)

    result = collision_entropy_R(witness.rho_ABC, lower.eps, tol, hints=[lower.bound])
    with_flag = result.value
    without_flag = collision_entropy_R(rho, lower.eps, tol).value
    # Both values sit up to one bisection width below the true ones.
    slack = THEOREM2_TOL + result.certificate.tol
    report = Theorem2Report(
        **fields,
        R_A_BC=with_flag,
        R_A_B=without_flag,
        margin=with_flag - lower.bound,
        extension_helps=with_flag > without_flag + THEOREM2_TOL,
    )
    if report.margin < -THEOREM2_TOL:
        raise BoundViolationError(
            f"R(A|BC) = {with_flag:.9f} is below the extension bound {lower.bound:.9f} "
            f"(eps_under={eps_under}, eps_hat={eps_hat})"
        )
    if trivial and with_flag < without_flag - slack:
        raise BoundViolationError(f"Trivial extension lowered R from {without_flag:.9f} to {with_flag:.9f}")
    return report


@dataclass(frozen=True, eq=False)
class SpoilingWitness:
    state: BipartiteState
    extension: BipartiteState
    eps: float
    R_A_B: float
    R_A_BC: float
    attempt: int

    @property
    def gain(self) -> float:
        return self.R_A_BC - self.R_A_B

    def to_dict(self) -> Dict:
        return {
            "eps": self.eps,
            "attempt": self.attempt,
            "R_A_B": self.R_A_B,
            "R_A_BC": self.R_A_BC,
            "state": state_to_dict(self.state),
            "extension": state_to_dict(self.extension),
        }


def search_spoiling_witness(seed: int, attempts: int = 200, eps: Optional[float] = None) -> Optional[SpoilingWitness]:
    """Seeded search for classical side information C that raises R_eps(A|B).

    Each attempt draws a pmf on A (trivial B), splits every symbol's mass
    between two flag values, and picks eps uniformly in [0.05, 0.95) unless it
    is given. Returns the first witness whose gain exceeds 0.01 bits, or None.
    """
    for attempt in range(attempts):
        rng = np.random.default_rng(derive_seed(seed, attempt))
        d_a = int(rng.integers(2, 5))
        weights = rng.exponential(size=d_a)
        probs = weights / weights.sum()
        split = rng.uniform(size=d_a)
        trial_eps = float(rng.uniform(0.05, 0.95)) if eps is None else float(eps)
        state = BipartiteState.from_matrix(np.diag(probs), (d_a, 1))
        extension = flag_extension(np.diag(probs * (1 - split)), np.diag(probs * split), (d_a, 1))
        without_flag = collision_entropy_R(state, trial_eps).value
        with_flag = collision_entropy_R(extension, trial_eps).value
        if with_flag > without_flag + SPOILING_GAIN:
            logger.info("Spoiling witness at attempt %d: gain %.4f bits", attempt, with_flag - without_flag)
            return SpoilingWitness(state, extension, trial_eps, without_flag, with_flag, attempt)
    return None


# MCP tools

def check_extension_bound(state_path: str, eps_under: float, eps_hat: float) -> Dict:
    """Build the flagged extension of a bipartite state and check the extension lower bound.
    Args:
        state_path: Full path to the JSON state file or just a name to search for
        eps_under: Clipping failure mass in (0, 1)
        eps_hat: Sup-entropy failure mass in (0, 1)
    """
    return verify_theorem2(load_state(state_path), eps_under, eps_hat).to_dict()


def find_spoiling_witness(seed: int, attempts: int = 200, eps: Optional[float] = None) -> Dict:
    """Search for side information that increases the collision entropy.
    Args:
        seed: Search seed
        attempts: Number of random trials
        eps: Fixed failure mass (random per trial when omitted)
    """
    witness = search_spoiling_witness(seed, attempts, eps)
    if witness is None:
        return {"found": False, "attempts": attempts}
    return {"found": True, **witness.to_dict()}
