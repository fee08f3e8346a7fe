"""Information-spectrum collision entropy R_eps(A|B), its classical counterpart,
the sup/inf spectrum entropies and the conditional von Neumann reference.

R_eps(A|B) is the largest lambda with Tr[{rho~_B - 2^-lambda rho_B^2 <= 0} rho_B] >= 1 - eps,
where rho~_B = Tr_A[rho_AB^2]. The mass is not known to be monotone in lambda, so the
search examines every pencil breakpoint and midpoint, then bisects the bracket
above the largest feasible candidate.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, Iterable, Optional, Sequence

import numpy as np

from qrex.errors import ArgumentError, EigensolverError
from qrex.modules.cq_state import BipartiteState, State, as_bipartite
from qrex.modules.operator_core import (
    ZERO_CUTOFF_FACTOR,
    HermitianOperator,
    OperatorLike,
    as_matrix,
    check_dim,
    partial_trace,
    spectral_decompose,
    von_neumann,
)
from qrex.modules.state_files import load_state
from qrex.settings import get_settings

logger = logging.getLogger(__name__)

MASS_SLACK = 1e-12
TIE_TOL = 1e-12
_MAX_UPWARD_STEPS = 64


def check_epsilon(eps: float, name: str = "eps", allow_zero: bool = True) -> float:
    eps = float(eps)
    if not math.isfinite(eps) or eps >= 1 or eps < 0 or (eps == 0 and not allow_zero):
        bounds = "[0, 1)" if allow_zero else "(0, 1)"
        raise ArgumentError(f"{name} must lie in {bounds}, got {eps}")
    return eps


def _resolve_tol(tol: Optional[float]) -> float:
    tol = get_settings().default_tol if tol is None else float(tol)
    if not tol > 0:
        raise ArgumentError(f"tol must be positive, got {tol}")
    return tol


@dataclass(frozen=True)
class EntropyCertificate:
    """Audit trail of an R_eps computation.

    ``envelope_tight`` is True when the mass at lambda_star + tol is already
    below 1 - eps; ``bracket_upper`` is the closest examined infeasible point
    above lambda_star (None for the classical quantile).
    """

    lambda_star: float
    achieved_mass: float
    tol: float
    breakpoints_examined: int
    bracket_upper: Optional[float] = None
    envelope_tight: bool = True


@dataclass(frozen=True)
class EntropyResult:
    value: float
    epsilon: float
    certificate: EntropyCertificate

    def to_dict(self) -> Dict:
        return {"value": self.value, "epsilon": self.epsilon, "certificate": asdict(self.certificate)}


def rho_tilde(rho: BipartiteState) -> HermitianOperator:
    """rho~_B = Tr_A[rho_AB^2]."""
    matrix = rho.matrix
    return partial_trace(matrix @ matrix, rho.dims, keep="B")


class _Pencil:
    """rho~_B - t rho_B^2 restricted to supp rho_B, in the eigenbasis of rho_B."""

    def __init__(self, rho: BipartiteState):
        check_dim(rho.state.dim, what="State")
        spectrum = spectral_decompose(rho.marginal_B())
        support = spectrum.eigenvalues > spectrum.cutoff()
        if not np.any(support):
            raise ArgumentError("rho_B is the zero operator")
        self.basis = spectrum.eigenvectors[:, support]
        self.weights = spectrum.eigenvalues[support]
        tilde = self.basis.conj().T @ as_matrix(rho_tilde(rho)) @ self.basis
        self.tilde = (tilde + tilde.conj().T) / 2
        self.tilde_norm = float(np.max(np.abs(np.linalg.eigvalsh(self.tilde))))

    @property
    def dim(self) -> int:
        return len(self.weights)

    def mass(self, lam: float) -> float:
        if lam == -math.inf:
            return float(np.sum(self.weights))
        if lam == math.inf:
            return 0.0
        t = 2.0 ** (-lam) if lam > -1000 else math.inf
        if math.isinf(t):
            return float(np.sum(self.weights))
        pencil = self.tilde - t * np.diag(self.weights ** 2)
        values, vectors = np.linalg.eigh(pencil)
        scale = max(self.tilde_norm, t * float(np.max(self.weights)) ** 2)
        cutoff = self.dim * ZERO_CUTOFF_FACTOR * scale
        selected = vectors[:, values <= cutoff]
        return float(np.sum((np.abs(selected) ** 2) * self.weights[:, None]))

    def breakpoints(self) -> np.ndarray:
        """-log2 of the generalized eigenvalues of (rho~_B, rho_B^2) and of rho_B^-1/2 rho~_B rho_B^-1/2."""
        inverse = 1.0 / self.weights
        exact = self.tilde * np.outer(inverse, inverse)
        half = self.tilde * np.outer(np.sqrt(inverse), np.sqrt(inverse))
        values = np.concatenate([np.linalg.eigvalsh((m + m.conj().T) / 2) for m in (exact, half)])
        values = values[values > 0]
        return -np.log2(values)


def feasible_mass(lam: float, rho: BipartiteState) -> float:
    """Tr[{rho~_B - 2^-lambda rho_B^2 <= 0} rho_B]."""
    return _Pencil(as_bipartite(rho)).mass(float(lam))


def _candidate_grid(breakpoints: np.ndarray, hints: Iterable[float]) -> np.ndarray:
    points = [float(b) for b in breakpoints if math.isfinite(b)]
    points.extend(float(h) for h in hints if math.isfinite(float(h)))
    if not points:
        points = [0.0]
    points = np.unique(np.array(points))
    midpoints = (points[:-1] + points[1:]) / 2
    edges = np.array([points[0] - 1.0, points[-1] + 1.0])
    return np.unique(np.concatenate([points, midpoints, edges]))


def collision_entropy_R(
    rho: State,
    eps: float,
    tol: Optional[float] = None,
    hints: Sequence[float] = (),
) -> EntropyResult:
    """R_eps(A|B) of a bipartite (or embedded cq) state.
    Args:
        rho: The state; cq states are embedded with A = X
        eps: Failure mass in [0, 1)
        tol: Bisection width in bits (defaults to the configured tolerance)
        hints: Extra lambda values examined alongside the pencil breakpoints
    """
    eps = check_epsilon(eps)
    tol = _resolve_tol(tol)
    pencil = _Pencil(as_bipartite(rho))
    threshold = 1 - eps - MASS_SLACK

    grid = _candidate_grid(pencil.breakpoints(), hints)
    masses = np.array([pencil.mass(lam) for lam in grid])
    feasible = masses >= threshold
    if not feasible[0]:
        raise EigensolverError(f"Lower edge lambda = {grid[0]:.6g} is infeasible (mass {masses[0]:.3e})")

    index = int(np.flatnonzero(feasible)[-1])
    lo, lo_mass = float(grid[index]), float(masses[index])
    if index + 1 < len(grid):
        hi = float(grid[index + 1])
    else:
        step, hi = 1.0, lo + 1.0
        for _ in range(_MAX_UPWARD_STEPS):
            mass = pencil.mass(hi)
            if mass < threshold:
                break
            lo, lo_mass = hi, mass
            step *= 2
            hi = lo + step
        else:
            raise EigensolverError("No infeasible lambda found above the candidate set")
    logger.debug("collision_entropy_R: %d candidates, bracket [%.9g, %.9g]", len(grid), lo, hi)

    while hi - lo > tol:
        mid = (lo + hi) / 2
        mass = pencil.mass(mid)
        if mass >= threshold:
            lo, lo_mass = mid, mass
        else:
            hi = mid

    tight = pencil.mass(lo + tol) < threshold
    certificate = EntropyCertificate(
        lambda_star=lo,
        achieved_mass=lo_mass,
        tol=tol,
        breakpoints_examined=len(grid),
        bracket_upper=hi,
        envelope_tight=bool(tight),
    )
    return EntropyResult(value=lo, epsilon=eps, certificate=certificate)


def _merge_ties(log_values: np.ndarray, masses: np.ndarray):
    order = np.argsort(log_values, kind="stable")
    merged_values, merged_masses = [], []
    for value, mass in zip(log_values[order], masses[order]):
        if merged_values and abs(value - merged_values[-1]) <= TIE_TOL:
            merged_masses[-1] += mass
        else:
            merged_values.append(float(value))
            merged_masses.append(float(mass))
    return np.array(merged_values), np.array(merged_masses)


def classical_collision_R(joint, eps: float) -> EntropyResult:
    """Largest per-y value r = -log2 sum_x P(x|y)^2 with Pr[R(X|Y=y) >= r] >= 1 - eps.
    Args:
        joint: Joint pmf indexed [x, y]
        eps: Failure mass in [0, 1)
    """
    eps = check_epsilon(eps)
    joint = np.asarray(joint, dtype=float)
    if joint.ndim != 2 or np.any(joint < 0) or abs(joint.sum() - 1) > 1e-10:
        raise ArgumentError("joint must be a normalized nonnegative 2-d pmf indexed [x, y]")
    p_y = joint.sum(axis=0)
    present = p_y > 0
    conditional = joint[:, present] / p_y[present]
    values = -np.log2(np.sum(conditional ** 2, axis=0))
    values, masses = _merge_ties(values, p_y[present])
    # Descending r; Pr[R >= r] is the running mass from the top.
    tail = np.cumsum(masses[::-1])[::-1]
    feasible = np.flatnonzero(tail >= 1 - eps - MASS_SLACK)
    index = int(feasible[-1])
    value = float(values[index])
    certificate = EntropyCertificate(
        lambda_star=value,
        achieved_mass=float(tail[index]),
        tol=0.0,
        breakpoints_examined=len(values),
    )
    return EntropyResult(value=value, epsilon=eps, certificate=certificate)


def spectrum_threshold(log_values: np.ndarray, masses: np.ndarray, eps: float, descending: bool) -> float:
    """Accumulate atom masses in log-value order until 1 - eps is reached; return -log2 of that atom.

    ``descending`` walks from the largest eigenvalue (sup-entropy), otherwise
    from the smallest (inf-entropy).
    """
    eps = check_epsilon(eps)
    log_values = np.asarray(log_values, dtype=float)
    masses = np.asarray(masses, dtype=float)
    order = np.argsort(log_values, kind="stable")
    if descending:
        order = order[::-1]
    running = np.cumsum(masses[order])
    reached = np.flatnonzero(running >= 1 - eps - MASS_SLACK)
    if reached.size == 0:
        raise ArgumentError(f"Total spectral mass {running[-1]:.12f} is below 1 - eps")
    return float(-log_values[order][reached[0]])


def _log_spectrum(rho: OperatorLike):
    values = np.linalg.eigvalsh(as_matrix(rho))
    cutoff = len(values) * ZERO_CUTOFF_FACTOR * float(np.max(np.abs(values)))
    values = values[values > cutoff]
    return np.log2(values), values


def h_sup(rho: OperatorLike, eps: float) -> float:
    """Information-spectrum sup-entropy of a density operator."""
    log_values, masses = _log_spectrum(rho)
    return spectrum_threshold(log_values, masses, eps, descending=True)


def h_inf(rho: OperatorLike, eps: float) -> float:
    """Information-spectrum inf-entropy of a density operator."""
    log_values, masses = _log_spectrum(rho)
    return spectrum_threshold(log_values, masses, eps, descending=False)


def cond_vn(rho: State) -> float:
    """S(A|B) = S(rho_AB) - S(rho_B)."""
    rho = as_bipartite(rho)
    return von_neumann(rho.state) - von_neumann(rho.marginal_B())


# MCP tools

def compute_collision_entropy(state_path: str, eps: float, tol: Optional[float] = None) -> Dict:
    """Compute R_eps(A|B) of a state file, with its certificate.
    Args:
        state_path: Full path to the JSON state file or just a name to search for
        eps: Failure mass in [0, 1)
        tol: Bisection tolerance in bits (default from settings)
    """

    return collision_entropy_R(load_state(state_path), eps, tol).to_dict()


def compute_spectrum_entropies(state_path: str, eps: float) -> Dict:
    """Sup/inf spectrum entropies of rho_AB and rho_B, and S(A|B), for a state file.
    Args:
        state_path: Full path to the JSON state file or just a name to search for
        eps: Failure mass in [0, 1)
    """

    rho = as_bipartite(load_state(state_path))
    rho_b = rho.marginal_B()
    return {
        "h_sup_AB": h_sup(rho.state, eps),
        "h_inf_AB": h_inf(rho.state, eps),
        "h_sup_B": h_sup(rho_b, eps),
        "h_inf_B": h_inf(rho_b, eps),
        "cond_vn": cond_vn(rho),
    }
