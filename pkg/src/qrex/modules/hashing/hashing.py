"""Two-universal hash families X -> S with canonical member indexing.

Member layouts:
  all_functions   member index written in base |S|; digit x is g(x).
  linear_gf2      bit k of the index is entry (k // n, k % n) of the m x n matrix;
                  g(x) has bit i equal to the GF(2) product of row i with x.
  toeplitz_gf2    an (n + m - 1)-bit seed t with T[i][j] = bit (i - j + n - 1) of t.
Inputs and outputs of the GF(2) families are integers whose bit j is coordinate j.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from qrex.errors import ArgumentError, ResourceError
from qrex.settings import resolve_cap

logger = logging.getLogger(__name__)

FAMILY_KINDS = ("all_functions", "linear_gf2", "toeplitz_gf2")
_ALIASES = {"all": "all_functions", "linear": "linear_gf2", "toeplitz": "toeplitz_gf2"}
_INT64_SAFE = 2 ** 62
_CHUNK = 2 ** 14

Members = Union[np.ndarray, Sequence[int]]


def _parity(values: np.ndarray) -> np.ndarray:
    values = values.copy()
    for shift in (32, 16, 8, 4, 2, 1):
        values ^= values >> shift
    return values & 1


@dataclass(frozen=True)
class HashFamily:
    kind: str
    domain_size: int
    range_size: int
    n: Optional[int] = None
    m: Optional[int] = None

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise ArgumentError(f"Unknown family kind '{self.kind}', expected one of {FAMILY_KINDS}")
        if self.domain_size < 1 or self.range_size < 1:
            raise ArgumentError("Domain and range sizes must be positive")

    @property
    def family_size(self) -> int:
        if self.kind == "all_functions":
            return self.range_size ** self.domain_size
        return 2 ** self.description_bits

    @property
    def description_bits(self) -> int:
        if self.kind == "linear_gf2":
            return self.n * self.m
        if self.kind == "toeplitz_gf2":
            return self.n + self.m - 1
        return math.ceil(self.domain_size * math.log2(self.range_size)) if self.range_size > 1 else 0

    def enumerable(self, cap: Optional[int] = None) -> bool:
        return self.family_size <= resolve_cap(cap, "enumeration_cap")

    def all_members(self, cap: Optional[int] = None) -> np.ndarray:
        if not self.enumerable(cap):
            raise ResourceError(
                f"{self.kind} family has {self.family_size} members, above the enumeration cap "
                f"{resolve_cap(cap, 'enumeration_cap')}; use sampled mode"
            )
        return np.arange(self.family_size, dtype=np.int64)

    def _check_member(self, member: int):
        if not 0 <= int(member) < self.family_size:
            raise ArgumentError(f"Member index {member} outside [0, {self.family_size})")

    def _check_input(self, x: int):
        if not 0 <= int(x) < self.domain_size:
            raise ArgumentError(f"Input {x} outside [0, {self.domain_size})")

    def _row_mask(self, member: int, row: int) -> int:
        n = self.n
        if self.kind == "linear_gf2":
            return (member >> (row * n)) & ((1 << n) - 1)
        mask = 0
        for column in range(n):
            mask |= ((member >> (row - column + n - 1)) & 1) << column
        return mask

    def evaluate(self, member: int, x: int) -> int:
        """g_member(x)."""
        member, x = int(member), int(x)
        self._check_member(member)
        self._check_input(x)
        if self.kind == "all_functions":
            return (member // self.range_size ** x) % self.range_size
        output = 0
        for row in range(self.m):
            output |= (bin(self._row_mask(member, row) & x).count("1") & 1) << row
        return output

    def outputs(self, members: Members, xs: Optional[Sequence[int]] = None) -> np.ndarray:
        """Table of g(x) with shape (len(members), len(xs)); xs defaults to the whole domain."""
        xs = np.arange(self.domain_size, dtype=np.int64) if xs is None else np.asarray(xs, dtype=np.int64)
        if self.family_size > _INT64_SAFE:
            return np.array([[self.evaluate(g, x) for x in xs] for g in members], dtype=np.int64).reshape(-1, len(xs))
        members = np.asarray(members, dtype=np.int64)
        if members.size and (members.min() < 0 or members.max() >= self.family_size):
            raise ArgumentError("Member index outside the family")
        if self.kind == "all_functions":
            powers = np.array([self.range_size ** int(x) for x in xs], dtype=np.int64)
            return (members[:, None] // powers[None, :]) % self.range_size
        table = np.zeros((members.size, xs.size), dtype=np.int64)
        for row in range(self.m):
            if self.kind == "linear_gf2":
                masks = (members >> (row * self.n)) & ((1 << self.n) - 1)
            else:
                masks = np.zeros_like(members)
                for column in range(self.n):
                    masks |= ((members >> (row - column + self.n - 1)) & 1) << column
            table |= _parity(masks[:, None] & xs[None, :]) << row
        return table

    def sample(self, seed: int, count: int) -> List[int]:
        """``count`` uniform member indices drawn from ``np.random.default_rng(seed)``."""
        if count < 0:
            raise ArgumentError("count must be nonnegative")
        rng = np.random.default_rng(seed)
        if self.family_size <= _INT64_SAFE:
            return [int(g) for g in rng.integers(0, self.family_size, size=count)]
        if self.kind == "all_functions":
            digits = rng.integers(0, self.range_size, size=(count, self.domain_size))
            return [sum(int(d) * self.range_size ** x for x, d in enumerate(row)) for row in digits]
        bits = self.description_bits
        words = math.ceil(bits / 32)
        draws = rng.integers(0, 2 ** 32, size=(count, words), dtype=np.uint64)
        members = []
        for row in draws:
            value = 0
            for word in row:
                value = (value << 32) | int(word)
            members.append(value & ((1 << bits) - 1))
        return members

    def to_dict(self) -> Dict:
        if self.kind == "all_functions":
            return {"kind": self.kind, "X": self.domain_size, "S": self.range_size}
        return {"kind": self.kind, "n": self.n, "m": self.m}


def all_functions_family(domain_size: int, range_size: int) -> HashFamily:
    return HashFamily("all_functions", int(domain_size), int(range_size))


def linear_gf2_family(n: int, m: int) -> HashFamily:
    """All m x n binary matrices acting on {0,1}^n."""
    if n < 1 or m < 1:
        raise ArgumentError(f"n and m must be at least 1, got n={n}, m={m}")
    return HashFamily("linear_gf2", 2 ** n, 2 ** m, n=int(n), m=int(m))


def toeplitz_gf2_family(n: int, m: int) -> HashFamily:
    """m x n Toeplitz matrices over GF(2), described by n + m - 1 bits."""
    if n < 1 or m < 1:
        raise ArgumentError(f"n and m must be at least 1, got n={n}, m={m}")
    return HashFamily("toeplitz_gf2", 2 ** n, 2 ** m, n=int(n), m=int(m))


def family_from_dict(data: Dict) -> HashFamily:
    """Parse {"kind", "n", "m"} or {"kind": "all_functions", "X", "S"}; short kinds are accepted."""
    if not isinstance(data, dict) or "kind" not in data:
        raise ArgumentError("Family descriptor must be an object with a 'kind' field")
    kind = _ALIASES.get(data["kind"], data["kind"])
    try:
        if kind == "all_functions":
            return all_functions_family(int(data["X"]), int(data["S"]))
        if kind == "linear_gf2":
            return linear_gf2_family(int(data["n"]), int(data["m"]))
        if kind == "toeplitz_gf2":
            return toeplitz_gf2_family(int(data["n"]), int(data["m"]))
    except KeyError as exc:
        raise ArgumentError(f"Family descriptor for {kind} is missing field {exc}") from exc
    raise ArgumentError(f"Unknown family kind '{data['kind']}'")


def make_family(kind: str, domain_size: int, range_size: int) -> HashFamily:
    """Family of the given kind mapping |X| = domain_size symbols to |S| = range_size outputs."""
    kind = _ALIASES.get(kind, kind)
    if kind == "all_functions":
        return all_functions_family(domain_size, range_size)
    n, m = int(domain_size).bit_length() - 1, int(range_size).bit_length() - 1
    if 2 ** n != domain_size or 2 ** m != range_size:
        raise ArgumentError(f"{kind} needs power-of-two sizes, got |X|={domain_size}, |S|={range_size}")
    if kind == "linear_gf2":
        return linear_gf2_family(n, m)
    if kind == "toeplitz_gf2":
        return toeplitz_gf2_family(n, m)
    raise ArgumentError(f"Unknown family kind '{kind}'")


def chernoff_samples(accuracy: float = 0.01, confidence: float = 1e-6) -> int:
    """Sample count N with Pr[|estimate - p| > accuracy] <= confidence (Hoeffding)."""
    return math.ceil(math.log(2 / confidence) / (2 * accuracy ** 2))


@dataclass(frozen=True)
class CollisionEstimate:
    value: float
    exact: bool
    sample_count: int


def collision_prob(
    fam: HashFamily,
    x0: int,
    x1: int,
    samples: Optional[int] = None,
    seed: int = 0,
    cap: Optional[int] = None,
) -> CollisionEstimate:
    """Pr over a uniform member g of g(x0) = g(x1); exact when the family is enumerable."""
    if x0 == x1:
        raise ArgumentError("collision probability concerns distinct inputs")
    fam._check_input(x0)
    fam._check_input(x1)
    if fam.enumerable(cap):
        members = fam.all_members(cap)
        hits = 0
        for start in range(0, members.size, _CHUNK):
            table = fam.outputs(members[start:start + _CHUNK], [x0, x1])
            hits += int(np.sum(table[:, 0] == table[:, 1]))
        return CollisionEstimate(hits / members.size, exact=True, sample_count=int(members.size))
    samples = chernoff_samples() if samples is None else int(samples)
    table = fam.outputs(fam.sample(seed, samples), [x0, x1])
    return CollisionEstimate(float(np.mean(table[:, 0] == table[:, 1])), exact=False, sample_count=samples)


@dataclass(frozen=True)
class UniversalityReport:
    passed: bool
    max_collision: float
    bound: float
    exact: bool
    sample_count: int
    pairs_checked: int
    worst_pair: Optional[Tuple[int, int]] = None


def verify_two_universality(
    fam: HashFamily,
    samples: Optional[int] = None,
    seed: int = 0,
    max_pairs: int = 4096,
    cap: Optional[int] = None,
) -> UniversalityReport:
    """Check Pr[g(x0) = g(x1)] <= 1/|S| over distinct pairs.

    Exhaustive over members and pairs when the family is enumerable. Otherwise
    members are sampled and the bound is relaxed by the Hoeffding accuracy; at
    most ``max_pairs`` pairs are drawn in that case.
    """
    bound = 1.0 / fam.range_size
    exact = fam.enumerable(cap)
    if exact:
        pairs = [(x0, x1) for x0 in range(fam.domain_size) for x1 in range(x0 + 1, fam.domain_size)]
        members = fam.all_members(cap)
        slack = 1e-12
    else:
        samples = chernoff_samples() if samples is None else int(samples)
        rng = np.random.default_rng(seed)
        pairs = []
        while len(pairs) < min(max_pairs, fam.domain_size * (fam.domain_size - 1) // 2):
            x0, x1 = (int(v) for v in rng.integers(0, fam.domain_size, size=2))
            if x0 != x1:
                pairs.append((min(x0, x1), max(x0, x1)))
        members = fam.sample(seed, samples)
        slack = math.sqrt(math.log(2 / 1e-6) / (2 * samples))
    if not pairs:
        return UniversalityReport(True, 0.0, bound, exact, len(members), 0)

    hits = np.zeros(len(pairs), dtype=np.int64)
    left = np.array([p[0] for p in pairs])
    right = np.array([p[1] for p in pairs])
    for start in range(0, len(members), _CHUNK):
        table = fam.outputs(members[start:start + _CHUNK])
        hits += np.sum(table[:, left] == table[:, right], axis=0)
    probabilities = hits / len(members)
    worst = int(np.argmax(probabilities))
    max_collision = float(probabilities[worst])
    passed = max_collision <= bound + slack
    if not passed:
        logger.warning("%s family violates two-universality at pair %s", fam.kind, pairs[worst])
    return UniversalityReport(passed, max_collision, bound, exact, len(members), len(pairs), pairs[worst])


# MCP tools

def check_two_universality(kind: str, n: int = 2, m: int = 1, X: int = 2, S: int = 2, seed: int = 0) -> Dict:
    """Verify that a hash family is two-universal (exhaustively when small enough).
    Args:
        kind: "all_functions", "linear_gf2" or "toeplitz_gf2"
        n: Input bits for the GF(2) families
        m: Output bits for the GF(2) families
        X: Domain size for all_functions
        S: Range size for all_functions
        seed: Sampling seed when the family is too large to enumerate
    """
    fam = family_from_dict({"kind": kind, "n": n, "m": m, "X": X, "S": S})
    report = verify_two_universality(fam, seed=seed)
    return {
        "family": fam.to_dict(),
        "family_size": str(fam.family_size),
        "passed": report.passed,
        "max_collision": report.max_collision,
        "bound": report.bound,
        "exact": report.exact,
        "sample_count": report.sample_count,
        "pairs_checked": report.pairs_checked,
    }
