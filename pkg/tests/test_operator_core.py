import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import unitary_group

from conftest import random_density, random_psd
from qrex.errors import ArgumentError, ResourceError, StateFormatError
from qrex.modules.operator_core import (
    DensityOperator,
    HermitianOperator,
    as_matrix,
    check_dim,
    decode_matrix,
    encode_matrix,
    jensen_gap,
    matrix_log2,
    matrix_power,
    operator_distances,
    operator_spectrum,
    partial_trace,
    proj_nonpos,
    rank,
    rel_entropy,
    spectral_decompose,
    spectral_projection,
    support_projection,
    tensor,
    trace_distance,
    von_neumann,
    zero_cutoff,
)
from qrex.settings import override_settings

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def test_hermitian_symmetrizes_small_asymmetry():
    matrix = np.array([[1.0, 0.5 + 1e-10], [0.5, 2.0]])
    operator = HermitianOperator(matrix)
    assert np.allclose(operator.matrix, operator.matrix.conj().T)
    assert operator.matrix[0, 1] == pytest.approx(0.5 + 5e-11)


def test_hermitian_rejects_asymmetric_and_non_square():
    with pytest.raises(ArgumentError, match="not Hermitian"):
        HermitianOperator(np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(ArgumentError, match="square"):
        HermitianOperator(np.ones((2, 3)))
    with pytest.raises(ArgumentError, match="finite"):
        HermitianOperator(np.array([[np.nan]]))


def test_density_operator_validation():
    with pytest.raises(ArgumentError, match="trace"):
        DensityOperator.from_matrix(np.eye(2))
    with pytest.raises(ArgumentError, match="positive semidefinite"):
        DensityOperator.from_matrix(np.diag([1.5, -0.5]))
    half = DensityOperator.from_matrix(np.eye(2) / 4, subnormalized=True)
    assert half.trace() == pytest.approx(0.5)
    assert DensityOperator.maximally_mixed(3).eigenvalues() == pytest.approx([1 / 3] * 3)


def test_zero_cutoff_scales_with_dimension_and_norm():
    assert zero_cutoff(np.array([0.0, 2.0, -4.0])) == pytest.approx(3 * 1e-12 * 4)
    assert zero_cutoff(np.array([])) == 0.0


@given(seeds)
def test_spectral_decompose_reconstructs(seed):
    rng = np.random.default_rng(seed)
    h = random_psd(rng, 4) - 2 * np.eye(4)
    spectrum = spectral_decompose(h)
    assert np.all(np.diff(spectrum.eigenvalues) >= 0)
    assert np.allclose(spectrum.reconstruct(), (h + h.conj().T) / 2, atol=1e-10)


@given(seeds)
def test_nonpositive_projection_compresses_to_nonpositive(seed):
    rng = np.random.default_rng(seed)
    h = random_psd(rng, 5) - 3 * random_psd(rng, 5, rank=2)
    p = as_matrix(proj_nonpos(h))
    compressed = p @ h @ p
    assert np.linalg.eigvalsh((compressed + compressed.conj().T) / 2)[-1] <= 1e-9
    assert np.allclose(p @ p, p, atol=1e-10)


def test_projections_of_diagonal_operator():
    h = np.diag([-1.0, 0.0, 2.0])
    assert np.allclose(as_matrix(spectral_projection(h, "<=")), np.diag([1, 1, 0]))
    assert np.allclose(as_matrix(spectral_projection(h, "<")), np.diag([1, 0, 0]))
    assert np.allclose(as_matrix(spectral_projection(h, ">=")), np.diag([0, 1, 1]))
    assert np.allclose(as_matrix(support_projection(h)), np.diag([1, 0, 1]))
    with pytest.raises(ArgumentError):
        spectral_projection(h, "==")


def test_rank_uses_cutoff():
    assert rank(np.diag([1.0, 1e-15, 0.0])) == 1
    assert rank(np.diag([1.0, 1e-6, 0.0])) == 2


def test_matrix_functions_on_support():
    rho = np.diag([0.5, 0.25, 0.0])
    assert np.allclose(as_matrix(matrix_log2(rho)), np.diag([-1.0, -2.0, 0.0]))
    assert np.allclose(as_matrix(matrix_power(rho, -0.5)), np.diag([math.sqrt(2), 2.0, 0.0]))


def test_partial_trace_of_product():
    rng = np.random.default_rng(11)
    a, b = random_density(rng, 2), random_density(rng, 3)
    product = np.kron(a, b)
    assert np.allclose(as_matrix(partial_trace(product, (2, 3), keep="B")), b)
    assert np.allclose(as_matrix(partial_trace(product, (2, 3), keep="A")), a)
    with pytest.raises(ArgumentError):
        partial_trace(product, (2, 2))
    with pytest.raises(ArgumentError):
        partial_trace(product, (2, 3), keep="C")


def test_tensor_and_dimension_cap():
    assert tensor(np.eye(2), np.eye(3)).dim == 6
    with pytest.raises(ResourceError, match="dimension cap"):
        tensor(np.eye(4), np.eye(4), dim_cap=8)
    with override_settings(dim_cap=5):
        with pytest.raises(ResourceError):
            check_dim(6)
    assert check_dim(6) == 6


@given(seeds)
def test_trace_distance_metric_properties(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_density(rng, 3) for _ in range(3))
    assert trace_distance(a, c) <= trace_distance(a, b) + trace_distance(b, c) + 1e-12
    u = unitary_group.rvs(3, random_state=seed % 2**31)
    rotated = trace_distance(u @ a @ u.conj().T, u @ b @ u.conj().T)
    assert rotated == pytest.approx(trace_distance(a, b), abs=1e-10)
    assert 0 <= trace_distance(a, b) <= 1 + 1e-12


@given(seeds, st.integers(min_value=1, max_value=5))
def test_entropy_bounded_by_log_rank(seed, width):
    rng = np.random.default_rng(seed)
    a = random_psd(rng, 5, rank=width) * rng.uniform(0.1, 3.0)
    trace = float(np.real(np.trace(a)))
    assert von_neumann(a) <= trace * (math.log2(rank(a)) - math.log2(trace)) + 1e-9


@given(seeds)
def test_relative_entropy_bounded_by_traces(seed):
    rng = np.random.default_rng(seed)
    a = random_psd(rng, 4) * rng.uniform(0.1, 2.0)
    b = random_psd(rng, 4) * rng.uniform(0.1, 2.0)
    trace_a, trace_b = (float(np.real(np.trace(m))) for m in (a, b))
    assert rel_entropy(a, b) >= trace_a * (math.log2(trace_a) - math.log2(trace_b)) - 1e-9


def test_relative_entropy_closed_forms():
    rho = np.diag([0.5, 0.5])
    assert rel_entropy(rho, rho) == pytest.approx(0.0, abs=1e-12)
    assert rel_entropy(np.diag([1.0, 0.0]), rho) == pytest.approx(1.0)
    assert rel_entropy(rho, np.diag([1.0, 0.0])) == math.inf


def test_von_neumann_closed_forms():
    assert von_neumann(np.eye(4) / 4) == pytest.approx(2.0)
    assert von_neumann(np.diag([1.0, 0.0])) == 0.0


def test_jensen_gap_is_zero_for_identity_contraction():
    rng = np.random.default_rng(3)
    x = random_psd(rng, 3) + 0.1 * np.eye(3)
    assert jensen_gap([x], [np.eye(3)]) == pytest.approx(0.0, abs=1e-9)


def test_jensen_gap_commuting_case_is_scalar_jensen():
    c0, c1 = np.sqrt(0.3) * np.eye(2), np.sqrt(0.7) * np.eye(2)
    x0, x1 = np.diag([1.0, 2.0]), np.diag([4.0, 0.5])
    expected = min(
        0.3 * -math.log2(a) + 0.7 * -math.log2(b) + math.log2(0.3 * a + 0.7 * b) for a, b in ((1.0, 4.0), (2.0, 0.5))
    )
    assert jensen_gap([x0, x1], [c0, c1]) == pytest.approx(expected, abs=1e-12)


@given(seeds, st.integers(min_value=2, max_value=6), st.integers(min_value=2, max_value=4))
def test_operator_jensen_inequality(seed, dim, terms):
    rng = np.random.default_rng(seed)
    isometry = unitary_group.rvs(dim * terms, random_state=seed % 2**31)[:, :dim]
    contractions = [isometry[k * dim:(k + 1) * dim, :] for k in range(terms)]
    xs = [random_psd(rng, dim) + 0.1 * np.eye(dim) for _ in range(terms)]
    assert jensen_gap(xs, contractions) >= -1e-9


def test_jensen_gap_rejects_incomplete_contractions():
    with pytest.raises(ArgumentError, match="sum C"):
        jensen_gap([np.eye(2)], [0.5 * np.eye(2)])
    with pytest.raises(ArgumentError, match="strictly positive"):
        jensen_gap([np.diag([1.0, 0.0])], [np.eye(2)])


def test_matrix_json_encoding():
    matrix = np.array([[1.0, 1j], [-1j, 2.0]])
    encoded = encode_matrix(matrix)
    assert encoded[0][1] == [0.0, 1.0]
    assert np.allclose(decode_matrix(encoded), matrix)
    assert np.allclose(decode_matrix([[1, 0], [0, 1]]), np.eye(2))
    with pytest.raises(StateFormatError, match=r"rho\[1\]\[0\]"):
        decode_matrix([[[1, 0], [0, 0]], ["x", [1, 0]]], "rho")
    with pytest.raises(StateFormatError, match="row of 2"):
        decode_matrix([[1, 0], [0]])
    with pytest.raises(StateFormatError, match=r"m\[0\]\[1\]"):
        decode_matrix([[1, [True, False]], [0, 1]], "m")
    with pytest.raises(StateFormatError, match=r"m\[0\]\[0\]"):
        decode_matrix([[True, 0], [0, 1]], "m")


def test_operator_tools():
    spectrum = operator_spectrum(encode_matrix(np.eye(2) / 2))
    assert spectrum["rank"] == 2
    assert spectrum["von_neumann"] == pytest.approx(1.0)
    assert operator_spectrum([[1, 0], [0, -1]])["von_neumann"] is None
    distances = operator_distances([[1, 0], [0, 0]], [[0.5, 0], [0, 0.5]])
    assert distances["trace_distance"] == pytest.approx(0.5)
    assert distances["rel_entropy_ab"] == pytest.approx(1.0)
    assert distances["rel_entropy_ba"] == math.inf
