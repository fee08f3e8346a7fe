"""Dense complex-Hermitian operator algebra.

Spectra, spectral projections, tensor / partial-trace plumbing and the
distance and entropy functionals (trace distance, relative entropy, von
Neumann entropy, operator Jensen gap). Every value is immutable and every
function is pure.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as la

from qrex.errors import ArgumentError, EigensolverError, ResourceError, StateFormatError
from qrex.settings import resolve_cap

logger = logging.getLogger(__name__)

ZERO_CUTOFF_FACTOR = 1e-12
DEFAULT_HERMITIAN_TOL = 1e-8
DEFAULT_TRACE_TOL = 1e-9


def _freeze(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=complex, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """A dim x dim complex Hermitian matrix.

    Construction symmetrizes the entries through (M + M^dagger)/2 after checking
    that the asymmetry max|M - M^dagger| stays within ``hermitian_tol``
    (relative to max(1, max|M|)).
    """

    entries: np.ndarray
    hermitian_tol: float = DEFAULT_HERMITIAN_TOL

    def __post_init__(self):
        matrix = np.asarray(self.entries, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] == 0:
            raise ArgumentError(f"Expected a non-empty square matrix, got shape {matrix.shape}")
        if self.hermitian_tol < 0:
            raise ArgumentError("hermitian_tol must be nonnegative")
        if not np.all(np.isfinite(matrix)):
            raise ArgumentError("Operator entries must be finite")
        asymmetry = float(np.max(np.abs(matrix - matrix.conj().T)))
        scale = max(1.0, float(np.max(np.abs(matrix))))
        if asymmetry > self.hermitian_tol * scale:
            raise ArgumentError(
                f"Matrix is not Hermitian: max|M - M^dagger| = {asymmetry:.3e} exceeds {self.hermitian_tol:.1e}"
            )
        object.__setattr__(self, "entries", _freeze((matrix + matrix.conj().T) / 2))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return self.entries

    def trace(self) -> float:
        return float(np.real(np.trace(self.entries)))

    def norm(self) -> float:
        """Operator norm (largest absolute eigenvalue)."""
        return float(np.max(np.abs(np.linalg.eigvalsh(self.entries))))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def __add__(self, other: "HermitianOperator") -> "HermitianOperator":
        return HermitianOperator(self.entries + as_matrix(other))

    def __sub__(self, other: "HermitianOperator") -> "HermitianOperator":
        return HermitianOperator(self.entries - as_matrix(other))

    def __mul__(self, scalar: float) -> "HermitianOperator":
        return HermitianOperator(self.entries * float(scalar))

    __rmul__ = __mul__

    @classmethod
    def identity(cls, dim: int) -> "HermitianOperator":
        return cls(np.eye(dim, dtype=complex))

    @classmethod
    def zeros(cls, dim: int) -> "HermitianOperator":
        return cls(np.zeros((dim, dim), dtype=complex))

    @classmethod
    def diagonal(cls, values: Sequence[float]) -> "HermitianOperator":
        return cls(np.diag(np.asarray(values, dtype=complex)))


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigenvalues in ascending order with the matching orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def cutoff(self) -> float:
        return zero_cutoff(self.eigenvalues)

    def reconstruct(self) -> np.ndarray:
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.conj().T

    def projector(self, mask: np.ndarray) -> np.ndarray:
        columns = self.eigenvectors[:, mask]
        return columns @ columns.conj().T


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """A positive semidefinite operator of unit trace (or trace <= 1 when ``subnormalized``)."""

    operator: HermitianOperator
    trace_tol: float = DEFAULT_TRACE_TOL
    subnormalized: bool = False

    def __post_init__(self):
        if not isinstance(self.operator, HermitianOperator):
            object.__setattr__(self, "operator", HermitianOperator(as_matrix(self.operator)))
        eigenvalues = self.operator.eigenvalues()
        if eigenvalues[0] < -self.trace_tol:
            raise ArgumentError(f"Density operator is not positive semidefinite (min eigenvalue {eigenvalues[0]:.3e})")
        trace = self.operator.trace()
        if self.subnormalized:
            if trace > 1 + self.trace_tol:
                raise ArgumentError(f"Subnormalized density operator has trace {trace:.12f} > 1")
        elif abs(trace - 1) > self.trace_tol:
            raise ArgumentError(f"Density operator has trace {trace:.12f}, expected 1")

    @property
    def dim(self) -> int:
        return self.operator.dim

    @property
    def matrix(self) -> np.ndarray:
        return self.operator.entries

    def trace(self) -> float:
        return self.operator.trace()

    def eigenvalues(self) -> np.ndarray:
        return self.operator.eigenvalues()

    @classmethod
    def from_matrix(cls, matrix, trace_tol: float = DEFAULT_TRACE_TOL, subnormalized: bool = False) -> "DensityOperator":
        return cls(HermitianOperator(matrix), trace_tol=trace_tol, subnormalized=subnormalized)

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityOperator":
        return cls(HermitianOperator(np.eye(dim, dtype=complex) / dim))


OperatorLike = Union[HermitianOperator, DensityOperator, np.ndarray]


def as_matrix(operator: OperatorLike) -> np.ndarray:
    if isinstance(operator, DensityOperator):
        return operator.operator.entries
    if isinstance(operator, HermitianOperator):
        return operator.entries
    return np.asarray(operator, dtype=complex)


def as_hermitian(operator: OperatorLike) -> HermitianOperator:
    if isinstance(operator, DensityOperator):
        return operator.operator
    if isinstance(operator, HermitianOperator):
        return operator
    return HermitianOperator(operator)


def zero_cutoff(eigenvalues: np.ndarray) -> float:
    """Eigenvalues with absolute value at most this are treated as zero."""
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    if eigenvalues.size == 0:
        return 0.0
    return eigenvalues.size * ZERO_CUTOFF_FACTOR * float(np.max(np.abs(eigenvalues)))


def spectral_decompose(operator: OperatorLike) -> Spectrum:
    """Eigendecomposition with ascending eigenvalues and a checked reconstruction residual."""
    matrix = as_hermitian(operator).entries
    try:
        eigenvalues, eigenvectors = la.eigh(matrix)
    except la.LinAlgError as exc:
        raise EigensolverError(f"Eigensolver did not converge for a {matrix.shape[0]}-dimensional operator: {exc}") from exc
    spectrum = Spectrum(eigenvalues=np.asarray(eigenvalues, dtype=float), eigenvectors=eigenvectors)
    dim = matrix.shape[0]
    residual = float(np.max(np.abs(matrix - spectrum.reconstruct())))
    allowed = dim * ZERO_CUTOFF_FACTOR * max(1.0, float(np.max(np.abs(matrix))))
    if residual > allowed:
        raise EigensolverError(f"Reconstruction residual {residual:.3e} exceeds {allowed:.3e}")
    return spectrum


_RELATIONS = {
    "<=": lambda values, tol: values <= tol,
    "<": lambda values, tol: values < -tol,
    ">=": lambda values, tol: values >= -tol,
    ">": lambda values, tol: values > tol,
}


def spectral_projection(operator: OperatorLike, relation: str = "<=") -> HermitianOperator:
    """Projection {X rel 0} onto the eigenvectors whose eigenvalue satisfies ``relation``.

    Eigenvalues within the zero cutoff count as zero.
    """
    if relation not in _RELATIONS:
        raise ArgumentError(f"Unknown relation '{relation}', expected one of {sorted(_RELATIONS)}")
    spectrum = spectral_decompose(operator)
    mask = _RELATIONS[relation](spectrum.eigenvalues, spectrum.cutoff())
    return HermitianOperator(spectrum.projector(mask))


def proj_nonpos(operator: OperatorLike) -> HermitianOperator:
    return spectral_projection(operator, "<=")


def rank(operator: OperatorLike) -> int:
    eigenvalues = np.linalg.eigvalsh(as_matrix(operator))
    return int(np.sum(np.abs(eigenvalues) > zero_cutoff(eigenvalues)))


def support_projection(operator: OperatorLike) -> HermitianOperator:
    """Projection onto the eigenvectors with nonzero eigenvalue (the orthocomplement of the kernel)."""
    spectrum = spectral_decompose(operator)
    return HermitianOperator(spectrum.projector(np.abs(spectrum.eigenvalues) > spectrum.cutoff()))


def matrix_function(operator: OperatorLike, func: Callable[[np.ndarray], np.ndarray], on_support: bool = False) -> HermitianOperator:
    """Apply ``func`` to the spectrum; with ``on_support`` the kernel is mapped to 0."""
    spectrum = spectral_decompose(operator)
    values = spectrum.eigenvalues
    if on_support:
        mask = np.abs(values) > spectrum.cutoff()
        mapped = np.zeros_like(values)
        mapped[mask] = func(values[mask])
    else:
        mapped = func(values)
    return HermitianOperator((spectrum.eigenvectors * mapped) @ spectrum.eigenvectors.conj().T)


def matrix_log2(operator: OperatorLike) -> HermitianOperator:
    """log2 on the support, 0 on the kernel (the 0 log 0 = 0 convention)."""
    return matrix_function(operator, np.log2, on_support=True)


def matrix_power(operator: OperatorLike, exponent: float) -> HermitianOperator:
    """Power on the support; negative exponents give the pseudo-inverse power."""
    return matrix_function(operator, lambda values: np.power(values, exponent), on_support=True)


def tensor(a: OperatorLike, b: OperatorLike, dim_cap: Optional[int] = None) -> HermitianOperator:
    left, right = as_matrix(a), as_matrix(b)
    check_dim(left.shape[0] * right.shape[0], dim_cap, "Tensor product")
    return HermitianOperator(np.kron(left, right))


def check_dim(dim: int, dim_cap: Optional[int] = None, what: str = "Operator") -> int:
    cap = resolve_cap(dim_cap, "dim_cap")
    if dim > cap:
        raise ResourceError(f"{what} dimension {dim} exceeds the dimension cap {cap}")
    return dim


def partial_trace(operator: OperatorLike, dims: Tuple[int, int], keep: str = "B") -> HermitianOperator:
    """Trace out one factor of a bipartite operator on A (x) B; ``keep`` is "A" or "B"."""
    matrix = as_matrix(operator)
    d_a, d_b = int(dims[0]), int(dims[1])
    if d_a < 1 or d_b < 1 or d_a * d_b != matrix.shape[0]:
        raise ArgumentError(f"dims {dims} do not factor an operator of dimension {matrix.shape[0]}")
    blocks = matrix.reshape(d_a, d_b, d_a, d_b)
    if keep == "B":
        return HermitianOperator(np.einsum("ijik->jk", blocks))
    if keep == "A":
        return HermitianOperator(np.einsum("ijkj->ik", blocks))
    raise ArgumentError(f"keep must be 'A' or 'B', got {keep!r}")


def _check_same_dim(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise ArgumentError(f"Dimension mismatch: {a.shape[0]} vs {b.shape[0]}")


def trace_distance(a: OperatorLike, b: OperatorLike) -> float:
    """d1(A, B) = 1/2 sum |eigenvalues of A - B|."""
    left, right = as_matrix(a), as_matrix(b)
    _check_same_dim(left, right)
    difference = left - right
    eigenvalues = np.linalg.eigvalsh((difference + difference.conj().T) / 2)
    return 0.5 * float(np.sum(np.abs(eigenvalues)))


def _psd_spectrum(operator: OperatorLike, name: str) -> Spectrum:
    spectrum = spectral_decompose(operator)
    tolerance = max(spectrum.cutoff(), DEFAULT_TRACE_TOL)
    if spectrum.eigenvalues[0] < -tolerance:
        raise ArgumentError(f"{name} is not positive semidefinite (min eigenvalue {spectrum.eigenvalues[0]:.3e})")
    return spectrum


def von_neumann(operator: OperatorLike) -> float:
    """S(A) = -Tr A log2 A with 0 log 0 = 0."""
    spectrum = _psd_spectrum(operator, "A")
    values = spectrum.eigenvalues[spectrum.eigenvalues > spectrum.cutoff()]
    entropy = -float(np.sum(values * np.log2(values)))
    return 0.0 if entropy == 0.0 else entropy


def rel_entropy(a: OperatorLike, b: OperatorLike) -> float:
    """D(A||B) = Tr[A (log2 A - log2 B)]; +inf when supp A is not inside supp B."""
    left, right = as_matrix(a), as_matrix(b)
    _check_same_dim(left, right)
    spectrum_a = _psd_spectrum(left, "A")
    spectrum_b = _psd_spectrum(right, "B")
    support_b = spectrum_b.eigenvalues > spectrum_b.cutoff()
    kernel_b = spectrum_b.eigenvectors[:, ~support_b]
    if kernel_b.shape[1]:
        leaked = float(np.real(np.trace(kernel_b.conj().T @ left @ kernel_b)))
        if leaked > max(spectrum_a.cutoff(), spectrum_b.cutoff()):
            return float("inf")
    values_a = spectrum_a.eigenvalues[spectrum_a.eigenvalues > spectrum_a.cutoff()]
    first = float(np.sum(values_a * np.log2(values_a)))
    vectors_b = spectrum_b.eigenvectors[:, support_b]
    weights = np.real(np.einsum("ij,ik,kj->j", vectors_b.conj(), left, vectors_b))
    second = float(np.sum(weights * np.log2(spectrum_b.eigenvalues[support_b])))
    return first - second


def neg_log2(values: np.ndarray) -> np.ndarray:
    return -np.log2(values)


def jensen_gap(
    xs: Sequence[OperatorLike],
    cs: Sequence[np.ndarray],
    func: Callable[[np.ndarray], np.ndarray] = neg_log2,
    completeness_tol: float = 1e-9,
) -> float:
    """Minimum eigenvalue of sum C^dagger f(X) C - f(sum C^dagger X C).

    Nonnegative (up to rounding) for operator convex ``func``; the default is -log2.
    """
    if len(xs) != len(cs) or not xs:
        raise ArgumentError("xs and cs must be non-empty and of equal length")
    matrices = [as_matrix(x) for x in xs]
    contractions = [np.asarray(c, dtype=complex) for c in cs]
    dim = matrices[0].shape[0]
    completeness = sum(c.conj().T @ c for c in contractions)
    if np.max(np.abs(completeness - np.eye(dim))) > completeness_tol:
        raise ArgumentError("Contractions violate sum C^dagger C = I")
    for matrix in matrices:
        if np.linalg.eigvalsh(matrix)[0] <= 0:
            raise ArgumentError("Every X must be strictly positive")
    averaged = sum(c.conj().T @ x @ c for c, x in zip(contractions, matrices))
    mapped = sum(c.conj().T @ as_matrix(matrix_function(x, func)) @ c for c, x in zip(contractions, matrices))
    gap = mapped - as_matrix(matrix_function(HermitianOperator(averaged), func))
    return float(np.linalg.eigvalsh((gap + gap.conj().T) / 2)[0])


def encode_matrix(operator: OperatorLike) -> List[List[List[float]]]:
    """Row-major JSON form; each complex entry becomes [re, im]."""
    matrix = as_matrix(operator)
    return [[[float(value.real), float(value.imag)] for value in row] for row in matrix]


def decode_matrix(data, field: str = "matrix") -> np.ndarray:
    if not isinstance(data, list) or not data:
        raise StateFormatError(f"Field '{field}': expected a non-empty array of rows")
    dim = len(data)
    matrix = np.zeros((dim, dim), dtype=complex)
    for i, row in enumerate(data):
        if not isinstance(row, list) or len(row) != dim:
            raise StateFormatError(f"Field '{field}[{i}]': expected a row of {dim} entries")
        for j, entry in enumerate(row):
            if isinstance(entry, (int, float)) and not isinstance(entry, bool):
                matrix[i, j] = float(entry)
            elif isinstance(entry, list) and len(entry) == 2 and all(isinstance(part, (int, float)) and not isinstance(part, bool) for part in entry):
                matrix[i, j] = complex(entry[0], entry[1])
            else:
                raise StateFormatError(f"Field '{field}[{i}][{j}]': expected [re, im]")
    return matrix


# MCP tools

def operator_spectrum(matrix: list) -> Dict:
    """Eigenvalues, rank, trace and von Neumann entropy of a Hermitian matrix.
    Args:
        matrix: Row-major matrix, complex entries as [re, im]
    """
    operator = HermitianOperator(decode_matrix(matrix))
    spectrum = spectral_decompose(operator)
    result = {
        "dim": operator.dim,
        "eigenvalues": [float(value) for value in spectrum.eigenvalues],
        "rank": rank(operator),
        "trace": operator.trace(),
        "zero_cutoff": spectrum.cutoff(),
        "von_neumann": None,
    }
    if spectrum.eigenvalues[0] >= -max(spectrum.cutoff(), DEFAULT_TRACE_TOL):
        result["von_neumann"] = von_neumann(operator)
    return result


def operator_distances(first: list, second: list) -> Dict:
    """Trace distance and both relative entropies between two positive matrices.
    Args:
        first: Row-major matrix A, complex entries as [re, im]
        second: Row-major matrix B of the same dimension
    """
    a = HermitianOperator(decode_matrix(first, "first"))
    b = HermitianOperator(decode_matrix(second, "second"))
    return {
        "trace_distance": trace_distance(a, b),
        "rel_entropy_ab": rel_entropy(a, b),
        "rel_entropy_ba": rel_entropy(b, a),
    }
