"""Tensor-power behaviour through log-spectrum convolution.

The eigenvalues of rho^(x)n are n-fold products of eigenvalues of rho, so the
sup/inf spectrum entropies of rho^(x)n follow from the n-fold convolution of
the atoms (log2 eigenvalue, mass) without forming any matrix. Sanov exponents
are solved over the tilted family p_i ∝ r_i^(1+beta).
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from qrex.errors import ArgumentError, ResourceError
from qrex.modules.cq_state import BipartiteState, as_bipartite
from qrex.modules.operator_core import OperatorLike, as_matrix, zero_cutoff
from qrex.modules.spectral_entropy import check_epsilon, cond_vn, spectrum_threshold
from qrex.modules.state_files import load_state
from qrex.settings import resolve_cap

logger = logging.getLogger(__name__)

MERGE_TOL = 1e-12
TAIL_TOL = 1e-9
SCAN_COLUMNS = ("n", "eps_n", "bound_per_n", "cond_vn", "gap")


def _merge(log_values: np.ndarray, masses: np.ndarray):
    order = np.argsort(log_values, kind="stable")
    log_values, masses = log_values[order], masses[order]
    if log_values.size == 0:
        return log_values, masses
    starts = np.concatenate([[0], np.flatnonzero(np.diff(log_values) > MERGE_TOL) + 1])
    return log_values[starts], np.add.reduceat(masses, starts)


@dataclass(frozen=True, eq=False)
class LogSpectrum:
    """Atoms (log2 eigenvalue, mass) sorted by log value; mass is multiplicity times eigenvalue."""

    log_values: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        log_values = np.asarray(self.log_values, dtype=float)
        masses = np.asarray(self.masses, dtype=float)
        if log_values.shape != masses.shape or log_values.ndim != 1:
            raise ArgumentError("log_values and masses must be vectors of equal length")
        if np.any(masses < 0):
            raise ArgumentError("atom masses must be nonnegative")
        if masses.sum() > 1 + 1e-10:
            raise ArgumentError(f"total atom mass {masses.sum():.12f} exceeds 1")
        log_values, masses = _merge(log_values, masses)
        object.__setattr__(self, "log_values", log_values)
        object.__setattr__(self, "masses", masses)

    @property
    def size(self) -> int:
        return self.log_values.size

    def total_mass(self) -> float:
        return float(self.masses.sum())

    def h_sup(self, eps: float) -> float:
        return spectrum_threshold(self.log_values, self.masses, eps, descending=True)

    def h_inf(self, eps: float) -> float:
        return spectrum_threshold(self.log_values, self.masses, eps, descending=False)

    @classmethod
    def from_eigenvalues(cls, eigenvalues: Sequence[float]) -> "LogSpectrum":
        values = np.asarray(eigenvalues, dtype=float)
        values = values[values > zero_cutoff(values)]
        return cls(np.log2(values), values)

    @classmethod
    def from_operator(cls, rho: OperatorLike) -> "LogSpectrum":
        return cls.from_eigenvalues(np.linalg.eigvalsh(as_matrix(rho)))


def _bin(log_values: np.ndarray, bin_width: float, rounding: str) -> np.ndarray:
    snap = np.ceil if rounding == "ceil" else np.floor
    return snap(log_values / bin_width) * bin_width


def convolve_power(
    spec: LogSpectrum,
    n: int,
    atom_cap: Optional[int] = None,
    bin_width: Optional[float] = None,
    rounding: str = "ceil",
) -> LogSpectrum:
    """n-fold convolution of the atoms.

    With ``bin_width`` the log values are snapped to a grid after every step,
    upward ("ceil", lowers inf-entropies) or downward ("floor", raises
    sup-entropies).
    """
    if int(n) != n or n < 1:
        raise ArgumentError(f"n must be a positive integer, got {n}")
    if rounding not in ("ceil", "floor"):
        raise ArgumentError("rounding must be 'ceil' or 'floor'")
    if bin_width is not None and not bin_width > 0:
        raise ArgumentError("bin_width must be positive")
    cap = resolve_cap(atom_cap, "atom_cap")
    log_values, masses = spec.log_values, spec.masses
    for step in range(1, int(n)):
        if log_values.size * spec.size > cap:
            raise ResourceError(
                f"Convolution step {step + 1} needs {log_values.size * spec.size} atoms, above the cap {cap}; "
                "pass a bin_width to coarsen"
            )
        log_values = (log_values[:, None] + spec.log_values[None, :]).ravel()
        masses = (masses[:, None] * spec.masses[None, :]).ravel()
        if bin_width is not None:
            log_values = _bin(log_values, bin_width, rounding)
        log_values, masses = _merge(log_values, masses)
        if log_values.size > cap:
            raise ResourceError(f"{log_values.size} atoms after merging exceed the cap {cap}; pass a bin_width")
    logger.debug("convolve_power: n=%d, %d atoms", n, log_values.size)
    return LogSpectrum(log_values, masses)


def h_sup_power(rho: OperatorLike, n: int, eps: float, atom_cap: Optional[int] = None, bin_width: Optional[float] = None) -> float:
    """Sup-entropy of rho^(x)n."""
    eps = check_epsilon(eps)
    spec = convolve_power(LogSpectrum.from_operator(rho), n, atom_cap, bin_width, rounding="floor")
    return spec.h_sup(eps)


def h_inf_power(rho: OperatorLike, n: int, eps: float, atom_cap: Optional[int] = None, bin_width: Optional[float] = None) -> float:
    """Inf-entropy of rho^(x)n."""
    eps = check_epsilon(eps)
    spec = convolve_power(LogSpectrum.from_operator(rho), n, atom_cap, bin_width, rounding="ceil")
    return spec.h_inf(eps)


@dataclass(frozen=True)
class SanovExponents:
    d_bar: float
    d_under: float
    gamma: float


def _support_spectrum(rho: OperatorLike) -> np.ndarray:
    values = np.linalg.eigvalsh(as_matrix(rho))
    values = values[values > zero_cutoff(values)]
    return values / values.sum()


def _tilted(log_r: np.ndarray, beta: float) -> np.ndarray:
    weights = (1 + beta) * log_r
    return np.exp(weights - logsumexp(weights))


def _kl_bits(p: np.ndarray, r: np.ndarray) -> float:
    mask = p > 0
    return float(np.sum(p[mask] * np.log2(p[mask] / r[mask])))


def _cross_entropy(p: np.ndarray, r: np.ndarray) -> float:
    return float(-np.sum(p * np.log2(r)))


def tilted_exponent(r: Sequence[float], target: float, upper: bool) -> float:
    """min D(p||r) over -sum p log2 r >= target (``upper``) or <= target, on the tilted family.

    ``target`` must lie on the far side of the entropy of r. Returns +inf when
    the constraint set is empty.
    """
    r = np.asarray(r, dtype=float)
    log_r = np.log(r)
    extreme = -math.log2(r.min()) if upper else -math.log2(r.max())
    edge = np.isclose(r, r.min() if upper else r.max(), rtol=0, atol=MERGE_TOL)
    if (upper and target > extreme + MERGE_TOL) or (not upper and target < extreme - MERGE_TOL):
        return math.inf
    if abs(target - extreme) <= MERGE_TOL:
        return -math.log2(float(r[edge].sum()))

    def excess(beta: float) -> float:
        return _cross_entropy(_tilted(log_r, beta), r) - target

    # Cross entropy falls as beta grows; upper targets need beta < 0.
    direction = -1.0 if upper else 1.0
    bound = direction
    for _ in range(200):
        if (upper and excess(bound) > 0) or (not upper and excess(bound) < 0):
            break
        bound *= 2
    else:
        raise ArgumentError("Could not bracket the tilting parameter")
    beta = brentq(excess, min(bound, 0.0), max(bound, 0.0), xtol=1e-14, rtol=1e-14)
    return _kl_bits(_tilted(log_r, beta), r)


def sanov_exponents(rho: OperatorLike, gamma: float) -> SanovExponents:
    """Exponents of the upper and lower spectrum tails of rho^(x)n, optimized diagonally in one eigenbasis of rho."""
    if not gamma > 0:
        raise ArgumentError(f"gamma must be positive, got {gamma}")
    r = _support_spectrum(rho)
    entropy = _cross_entropy(r, r)
    return SanovExponents(
        d_bar=tilted_exponent(r, entropy + gamma, upper=True),
        d_under=tilted_exponent(r, entropy - gamma, upper=False),
        gamma=float(gamma),
    )


def grid_search_exponent(r: Sequence[float], target: float, upper: bool, points: int = 200001) -> float:
    """Brute-force counterpart of tilted_exponent for at most three outcomes.

    The minimum sits on the face -sum p log2 r = target of the simplex; that
    face is a point (two outcomes) or a segment (three), scanned on a dense grid.
    """
    r = np.asarray(r, dtype=float)
    if r.size > 3:
        raise ArgumentError("grid search is limited to at most 3 outcomes")
    costs = -np.log2(r)
    if (upper and target > costs.max() + MERGE_TOL) or (not upper and target < costs.min() - MERGE_TOL):
        return math.inf
    corners = []
    for i in range(r.size):
        for j in range(i, r.size):
            if i == j:
                if abs(costs[i] - target) <= MERGE_TOL:
                    corners.append(np.eye(r.size)[i])
                continue
            if costs[i] == costs[j]:
                continue
            s = (target - costs[j]) / (costs[i] - costs[j])
            if -MERGE_TOL <= s <= 1 + MERGE_TOL:
                corners.append(np.clip(s, 0, 1) * np.eye(r.size)[i] + (1 - np.clip(s, 0, 1)) * np.eye(r.size)[j])
    if not corners:
        return math.inf
    start = corners[0]
    end = max(corners, key=lambda c: float(np.abs(c - start).sum()))
    t = np.linspace(0.0, 1.0, points)[:, None]
    candidates = np.clip((1 - t) * start + t * end, 0.0, None)
    safe = np.where(candidates > 0, candidates, 1.0)
    values = np.sum(np.where(candidates > 0, candidates * np.log2(safe / r), 0.0), axis=1)
    return float(values.min())


def prop3_bound(exponent: float, dim: int, n: int) -> float:
    """(1 + n)^dim 2^(-n exponent), 0 for an infinite exponent."""
    if exponent == math.inf:
        return 0.0
    log_bound = dim * math.log2(1 + n) - n * exponent
    return math.inf if log_bound > 1000 else 2.0 ** log_bound


def prop3_epsilons(rho: OperatorLike, gamma: float, n: int, dim_d: Optional[int] = None):
    """(eps_bar, eps_under) for the tail bounds of rho^(x)n."""
    exponents = sanov_exponents(rho, gamma)
    dim = as_matrix(rho).shape[0] if dim_d is None else int(dim_d)
    return prop3_bound(exponents.d_bar, dim, n), prop3_bound(exponents.d_under, dim, n)


@dataclass(frozen=True)
class TailMasses:
    upper: float
    lower: float


def tail_masses(rho: OperatorLike, n: int, gamma: float, atom_cap: Optional[int] = None) -> TailMasses:
    """Exact spectral mass of rho^(x)n below 2^(-n(S+gamma)) (upper) and above 2^(-n(S-gamma)) (lower)."""
    spec = LogSpectrum.from_operator(rho)
    r = _support_spectrum(rho)
    entropy = _cross_entropy(r, r)
    power = convolve_power(spec, n, atom_cap)
    upper = power.masses[power.log_values < -n * (entropy + gamma) - TAIL_TOL].sum()
    lower = power.masses[power.log_values > -n * (entropy - gamma) + TAIL_TOL].sum()
    return TailMasses(upper=float(upper), lower=float(lower))


@dataclass(frozen=True)
class ScanRow:
    """One n of the per-copy scan.

    ``gamma`` = n^-k_gamma is reported for reference only: it is the spectrum
    deviation that ``prop3_epsilons`` would turn into tail masses, but neither
    schedule feeds it into ``bound_per_n``. The "default" schedule also drops
    the (1 + n)^dim prefactors that "proof" keeps.
    """

    n: int
    eps_under: float
    eps_hat: float
    gamma: float
    eps_n: float
    bound_per_n: Optional[float]
    cond_vn: float
    gap: Optional[float]
    vacuous: bool

    def to_dict(self) -> Dict:
        return asdict(self)


def schedule_epsilons(n: int, dims, schedule: str = "default", eps0: float = 0.1, k_eps: float = 0.25):
    """(eps_under, eps_hat) at n.

    "default" uses eps0 2^(-n^k_eps) for both; "proof" multiplies by the
    polynomial factors (1+n)^(d_A d_B) and (1+n)^(d_B).
    """
    decay = eps0 * 2.0 ** (-(n ** k_eps))
    if schedule == "default":
        return decay, decay
    if schedule == "proof":
        return (1 + n) ** (dims[0] * dims[1]) * decay, (1 + n) ** dims[1] * decay
    raise ArgumentError(f"schedule must be 'default' or 'proof', got {schedule!r}")


def corollary4_scan(
    rho: BipartiteState,
    n_max: int,
    schedule: str = "default",
    eps0: float = 0.1,
    k_eps: float = 0.25,
    k_gamma: float = 0.25,
    n_values: Optional[Sequence[int]] = None,
    atom_cap: Optional[int] = None,
) -> List[ScanRow]:
    """Per-copy extension bound of rho^(x)n for n = 1..n_max, against S(A|B)."""
    rho = as_bipartite(rho)
    if n_max < 1:
        raise ArgumentError("n_max must be at least 1")
    if not 0 < eps0 < 1:
        raise ArgumentError("eps0 must lie in (0, 1)")
    if 2 * k_gamma + k_eps >= 1:
        logger.warning("k_gamma = %s and k_eps = %s violate 2 k_gamma + k_eps < 1", k_gamma, k_eps)
    reference = cond_vn(rho)
    spec_ab = LogSpectrum.from_operator(rho.state)
    spec_b = LogSpectrum.from_operator(rho.marginal_B())
    rows = []
    for n in (range(1, n_max + 1) if n_values is None else sorted(n_values)):
        eps_under, eps_hat = schedule_epsilons(n, rho.dims, schedule, eps0, k_eps)
        eps_n = math.sqrt(eps_under) + eps_under + eps_hat if eps_under < 1 else math.inf
        bound = gap = None
        if eps_under < 1 and eps_hat < 1:
            power_ab = convolve_power(spec_ab, n, atom_cap)
            power_b = convolve_power(spec_b, n, atom_cap)
            total = power_ab.h_inf(eps_under) - power_b.h_sup(eps_hat) + math.log2(1 - math.sqrt(eps_under))
            bound = total / n
            gap = reference - bound
        rows.append(
            ScanRow(
                n=n,
                eps_under=eps_under,
                eps_hat=eps_hat,
                gamma=n ** (-k_gamma),
                eps_n=eps_n,
                bound_per_n=bound,
                cond_vn=reference,
                gap=gap,
                vacuous=bound is None or eps_n >= 1,
            )
        )
    logger.info("corollary4_scan: %d rows, %d vacuous", len(rows), sum(row.vacuous for row in rows))
    return rows


# MCP tools

def scan_asymptotics(state_path: str, n_max: int = 20, schedule: str = "default") -> Dict:
    """Per-copy extension bound of a state's tensor powers against S(A|B).
    Args:
        state_path: Full path to the JSON state file or just a name to search for
        n_max: Largest number of copies
        schedule: "default" (eps0 2^-n^(1/4)) or "proof" (with polynomial prefactors)
    """
    rows = corollary4_scan(load_state(state_path), n_max, schedule)
    return {"columns": list(SCAN_COLUMNS), "rows": [row.to_dict() for row in rows]}


def compute_sanov_exponents(state_path: str, gamma: float, n: int = 8, system: str = "AB") -> Dict:
    """Sanov exponents of a state's spectrum, the resulting tail bounds and the exact tails at n copies.
    Args:
        state_path: Full path to the JSON state file or just a name to search for
        gamma: Deviation from the von Neumann entropy (bits per copy)
        n: Number of copies for the tail bounds
        system: "AB" for the joint state or "B" for the marginal
    """
    rho = as_bipartite(load_state(state_path))
    operator = rho.state if system == "AB" else rho.marginal_B()
    exponents = sanov_exponents(operator, gamma)
    eps_bar, eps_under = prop3_epsilons(operator, gamma, n)
    tails = tail_masses(operator, n, gamma)
    return {**asdict(exponents), "n": n, "eps_bar": eps_bar, "eps_under": eps_under, **{f"tail_{k}": v for k, v in asdict(tails).items()}}
