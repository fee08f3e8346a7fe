import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qrex.errors import ArgumentError, ResourceError, StateFormatError
from qrex.modules.cq_state import (
    BipartiteState,
    CQState,
    apply_isometry_B,
    as_bipartite,
    cq_from_joint,
    derive_seed,
    embed,
    generate_random_state,
    marginal_B,
    marginal_X,
    maximally_entangled,
    maximally_mixed,
    product_state,
    random_bipartite,
    random_cq,
    random_diagonal_cq,
    random_isometry,
    state_from_dict,
    state_marginals,
    state_to_dict,
    tensor_power,
)
from qrex.modules.operator_core import as_matrix, partial_trace, von_neumann
from qrex.settings import override_settings

seeds = st.integers(min_value=0, max_value=2**32 - 1)


@given(seeds, st.integers(min_value=1, max_value=6), st.integers(min_value=1, max_value=4))
def test_embedding_keeps_marginals(seed, num_symbols, d_b):
    cq = random_cq(seed, num_symbols, d_b)
    rho = embed(cq)
    assert rho.dims == (num_symbols, d_b)
    assert np.allclose(as_matrix(rho.marginal_B()), as_matrix(marginal_B(cq)), atol=1e-10)
    assert np.allclose(np.real(np.diag(as_matrix(rho.marginal_A()))), marginal_X(cq), atol=1e-10)


def test_random_generators_are_deterministic():
    first, second = random_cq(7, 4, 2), random_cq(7, 4, 2)
    assert np.array_equal(first.probs, second.probs)
    assert all(np.array_equal(a.matrix, b.matrix) for a, b in zip(first.conditionals, second.conditionals))
    assert not np.array_equal(first.probs, random_cq(8, 4, 2).probs)
    assert generate_random_state(3, "bipartite", d_A=2, d_B=3) == generate_random_state(3, "bipartite", d_A=2, d_B=3)


def test_rank_cap_limits_conditional_rank():
    cq = random_cq(1, 3, 4, rank_cap=1)
    for conditional in cq.conditionals:
        assert np.sum(conditional.eigenvalues() > 1e-10) == 1
    with pytest.raises(ArgumentError, match="rank_cap"):
        random_cq(1, 3, 2, rank_cap=3)


def test_diagonal_cq_has_diagonal_conditionals():
    cq = random_diagonal_cq(5, 3, 3)
    for conditional in cq.conditionals:
        assert np.allclose(conditional.matrix, np.diag(np.diag(conditional.matrix)))


def test_cq_state_validation():
    with pytest.raises(ArgumentError, match="sum to"):
        CQState.from_arrays([0.5, 0.6], [np.eye(2) / 2, np.eye(2) / 2])
    with pytest.raises(ArgumentError, match="differ in length"):
        CQState.from_arrays([1.0], [np.eye(2) / 2, np.eye(2) / 2])
    with pytest.raises(ArgumentError, match="differing dimensions"):
        CQState.from_arrays([0.5, 0.5], [np.eye(2) / 2, np.eye(3) / 3])
    with pytest.raises(ArgumentError, match="distinct"):
        CQState.from_arrays([0.5, 0.5], [np.eye(2) / 2] * 2, alphabet=["a", "a"])


def test_bipartite_dims_must_factor():
    with pytest.raises(ArgumentError, match="do not factor"):
        BipartiteState.from_matrix(np.eye(6) / 6, (2, 2))


def test_cq_from_joint_drops_empty_rows():
    joint = np.array([[0.25, 0.25], [0.0, 0.0], [0.5, 0.0]])
    cq = cq_from_joint(joint)
    assert cq.alphabet == (0, 2)
    assert cq.probs == pytest.approx([0.5, 0.5])
    assert np.allclose(cq.conditionals[1].matrix, np.diag([1.0, 0.0]))


def test_tensor_power_identity_and_product():
    rho = random_bipartite(2, 2, 2)
    assert tensor_power(rho, 1) is rho
    pure = product_state(np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))
    squared = tensor_power(pure, 2)
    assert squared.dims == (4, 4)
    assert np.allclose(as_matrix(squared.marginal_A()), np.diag([1.0, 0, 0, 0]))
    assert np.allclose(as_matrix(squared.marginal_B()), np.diag([0, 0, 0, 1.0]))
    assert von_neumann(squared.state) == pytest.approx(0.0, abs=1e-12)


@given(seeds)
def test_tensor_power_spectrum_and_marginals(seed):
    rho = random_bipartite(seed, 2, 2)
    squared = tensor_power(rho, 2)
    values = np.linalg.eigvalsh(rho.matrix)
    expected = np.sort(np.outer(values, values).ravel())
    assert np.allclose(np.linalg.eigvalsh(squared.matrix), expected, atol=1e-12)
    rho_b = as_matrix(rho.marginal_B())
    assert np.allclose(as_matrix(squared.marginal_B()), np.kron(rho_b, rho_b), atol=1e-12)
    rho_a = as_matrix(rho.marginal_A())
    assert np.allclose(as_matrix(squared.marginal_A()), np.kron(rho_a, rho_a), atol=1e-12)


def test_tensor_power_respects_dimension_cap():
    rho = maximally_mixed(2, 2)
    with pytest.raises(ResourceError, match="spectrum-convolution"):
        tensor_power(rho, 3, dim_cap=32)
    with override_settings(dim_cap=16):
        with pytest.raises(ResourceError):
            tensor_power(rho, 3)


def test_isometry_on_b():
    v = random_isometry(4, 2, 3)
    assert np.allclose(v.conj().T @ v, np.eye(2), atol=1e-12)
    rho = random_bipartite(4, 2, 2)
    lifted = apply_isometry_B(rho, v)
    assert lifted.dims == (2, 3)
    assert np.allclose(as_matrix(lifted.marginal_A()), as_matrix(rho.marginal_A()), atol=1e-12)
    assert von_neumann(lifted.state) == pytest.approx(von_neumann(rho.state), abs=1e-9)
    with pytest.raises(ArgumentError, match="d_out >= d_in"):
        random_isometry(0, 3, 2)


def test_maximally_entangled_has_mixed_marginal():
    rho = maximally_entangled(3)
    assert von_neumann(rho.state) == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(as_matrix(rho.marginal_B()), np.eye(3) / 3)


def test_state_json_round_trip_and_errors():
    cq = random_cq(9, 3, 2)
    restored = state_from_dict(state_to_dict(cq))
    assert isinstance(restored, CQState)
    assert np.allclose(restored.probs, cq.probs)
    assert np.allclose(embed(restored).matrix, embed(cq).matrix)
    with pytest.raises(StateFormatError, match="Missing field 'dB'"):
        state_from_dict({"kind": "cq", "p": [1.0], "conditionals": [[[1, 0]]]})
    with pytest.raises(StateFormatError, match="'kind'"):
        state_from_dict({"kind": "quantum"})
    with pytest.raises(StateFormatError, match=r"conditionals\[0\]"):
        state_from_dict({"kind": "cq", "p": [1.0], "dB": 2, "conditionals": [[[[1, 0]]]]})
    with pytest.raises(StateFormatError, match="Invalid bipartite state"):
        state_from_dict({"kind": "bipartite", "dA": 1, "dB": 2, "rho": [[1, 0], [0, 1]]})


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(5, 0) == derive_seed(5, 0)
    assert len({derive_seed(5, k) for k in range(10)}) == 10
    assert derive_seed(5, 1) != derive_seed(6, 1)


def test_state_marginals_tool():
    result = state_marginals(state_to_dict(maximally_mixed(2, 3)))
    assert result["dims"] == [2, 3]
    assert result["entropy_AB"] == pytest.approx(np.log2(6))
    assert result["entropy_B"] == pytest.approx(np.log2(3))
    assert as_bipartite(state_from_dict(state_to_dict(maximally_mixed(1, 2)))).dims == (1, 2)
    assert np.allclose(as_matrix(partial_trace(maximally_mixed(2, 2).matrix, (2, 2))), np.eye(2) / 2)
