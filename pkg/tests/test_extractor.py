import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qrex.errors import ArgumentError, BoundViolationError, ResourceError
from qrex.modules.cq_state import CQState, random_cq, random_diagonal_cq
from qrex.modules.extractor import (
    apply_hash,
    classical_rhs,
    collision_delta,
    delta_d,
    delta_R,
    distance_from_uniform,
    eta0,
    extractable_length,
    length_epsilon,
    theorem1_rhs,
    verify_theorem1,
    verify_theorem1_grid,
)
from qrex.modules.hashing import all_functions_family, linear_gf2_family, make_family, toeplitz_gf2_family
from qrex.modules.spectral_entropy import collision_entropy_R

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def uniform_bits(n: int) -> CQState:
    size = 2**n
    return CQState.from_arrays(np.full(size, 1 / size), [np.ones((1, 1))] * size)


def test_worked_exact_case():
    cq = uniform_bits(2)
    fam = linear_gf2_family(2, 1)
    report = verify_theorem1(cq, fam, 0.0)
    assert report.delta_R == pytest.approx(0.25, abs=1e-9)
    assert report.delta_d == pytest.approx(0.125, abs=1e-9)
    assert report.theorem1_rhs == pytest.approx(0.5 / math.log(2), abs=1e-9)
    assert report.entropy == pytest.approx(2.0, abs=1e-9)
    assert report.d == 1
    assert report.sample_count == 4
    assert report.certifying
    assert report.margin > 0


def test_ensemble_functions_match_report():
    ensemble = apply_hash(uniform_bits(2), linear_gf2_family(2, 1))
    assert delta_R(ensemble) == pytest.approx(0.25, abs=1e-12)
    assert delta_d(ensemble) == pytest.approx(0.125, abs=1e-12)
    # Member 0 is the zero matrix: every input lands on output 0.
    outputs = ensemble.conditionals(0)
    assert [(s, mass) for s, mass, _ in outputs] == [(0, 1.0)]


@pytest.mark.parametrize("family", [linear_gf2_family(2, 1), all_functions_family(4, 3), toeplitz_gf2_family(2, 2)])
@pytest.mark.parametrize("seed", range(12))
def test_key_length_bound_holds_on_random_states(family, seed):
    cq = random_cq(seed, 4, 1 + seed % 3)
    for report in verify_theorem1_grid(cq, family, [0.0, 0.01, 0.1]):
        assert report.margin >= -1e-9
        assert report.delta_d**2 <= report.delta_R + 1e-9
        assert report.block_trace == pytest.approx(1.0, abs=1e-10)


@given(seeds, st.sampled_from([0.0, 0.01, 0.1]))
def test_pinsker_and_bound_on_larger_alphabet(seed, eps):
    cq = random_cq(seed, 8, 2)
    report = verify_theorem1(cq, linear_gf2_family(3, 1), eps)
    assert report.delta_d**2 <= report.delta_R + 1e-9
    assert report.margin >= -1e-9


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("eps", [0.0, 0.1])
def test_classical_bound_on_diagonal_states(seed, eps):
    cq = random_diagonal_cq(seed, 4, 3)
    report = verify_theorem1(cq, linear_gf2_family(2, 1), eps)
    assert report.delta_R <= classical_rhs(eps, report.range_size, report.delta) + 1e-9
    assert report.theorem1_rhs >= classical_rhs(eps, report.range_size, report.delta)


def test_quantum_bound_approaches_classical_bound():
    delta, range_size, d = 0.3, 4, 2
    entropy = math.log2(range_size / delta)
    gaps = [theorem1_rhs(eps, range_size, d, entropy) - classical_rhs(eps, range_size, delta) for eps in (0.1, 0.01, 1e-4, 1e-8)]
    assert all(gap >= 0 for gap in gaps)
    assert gaps == sorted(gaps, reverse=True)
    assert gaps[-1] < 1e-3
    assert theorem1_rhs(0.0, range_size, d, entropy) == pytest.approx(classical_rhs(0.0, range_size, delta))
    assert classical_rhs(0.1, 2, 0.0, g_dependent=True) == pytest.approx(0.1 + 0.1 / math.log(2))


def test_eta0_and_delta():
    assert eta0(0.0) == 0.0
    assert eta0(0.25) == pytest.approx(0.5)
    assert eta0(0.5) == pytest.approx(0.5)
    assert eta0(0.75) == 0.5
    with pytest.raises(ArgumentError):
        eta0(-0.1)
    assert collision_delta(4, 3.0) == pytest.approx(0.5)
    assert collision_delta(4, math.inf) == 0.0
    with pytest.raises(ArgumentError):
        theorem1_rhs(0.1, 0, 1, 1.0)
    with pytest.raises(ArgumentError, match="eps must lie"):
        theorem1_rhs(1.0, 2, 1, 2.0)
    with pytest.raises(ArgumentError, match="eps must lie"):
        theorem1_rhs(-0.1, 2, 1, 2.0)


def test_distance_from_uniform():
    distances = distance_from_uniform(uniform_bits(2))
    assert distances["delta_d"] == pytest.approx(0.0, abs=1e-12)
    assert distances["delta_R"] == pytest.approx(0.0, abs=1e-12)
    skewed = CQState.from_arrays([1.0, 0.0], [np.ones((1, 1))] * 2)
    assert distance_from_uniform(skewed)["delta_R"] == pytest.approx(1.0)
    assert distance_from_uniform(skewed)["delta_d"] == pytest.approx(0.5)


def test_sampled_mode_does_not_certify():
    cq = random_cq(1, 8, 2)
    report = verify_theorem1(cq, linear_gf2_family(3, 2), 0.01, mode="sampled", samples=300, seed=9)
    assert not report.certifying
    assert report.sample_count == 300
    again = verify_theorem1(cq, linear_gf2_family(3, 2), 0.01, mode="sampled", samples=300, seed=9)
    assert again.delta_R == report.delta_R


def test_exact_mode_refuses_large_families():
    with pytest.raises(ResourceError, match="sampled mode"):
        verify_theorem1(random_cq(2, 8, 1), linear_gf2_family(3, 2), 0.0, cap=16)


def test_argument_checks():
    cq = random_cq(2, 4, 1)
    with pytest.raises(ArgumentError, match="does not match"):
        apply_hash(cq, linear_gf2_family(3, 1))
    with pytest.raises(ArgumentError, match="mode"):
        apply_hash(cq, linear_gf2_family(2, 1), mode="approximate")


def test_bound_violation_is_raised(monkeypatch):
    import qrex.modules.extractor.extractor as extractor

    monkeypatch.setattr(extractor, "theorem1_rhs", lambda *args: -1.0)
    with pytest.raises(BoundViolationError, match="exceeds the bound"):
        verify_theorem1(uniform_bits(2), linear_gf2_family(2, 1), 0.0)


def test_extractable_length_worked_example():
    report = extractable_length(uniform_bits(3), 0.0, "linear_gf2", target=0.75)
    assert report.m == 2
    assert report.feasible
    assert report.delta == pytest.approx(0.5, abs=1e-9)
    assert report.eps_prime == pytest.approx(0.5 / math.log(2), abs=1e-9)
    assert length_epsilon(0.0, 1, 8, 1.0) == pytest.approx(1 / math.log(2))


def test_zero_target_gives_empty_key():
    report = extractable_length(uniform_bits(3), 0.0, "linear_gf2", target=0.0)
    assert report.m == 0
    assert not report.feasible


def test_looser_target_never_shortens_key():
    cq = random_cq(4, 8, 2)
    lengths = [extractable_length(cq, 0.01, "all_functions", target).m for target in np.linspace(0.0, 3.0, 13)]
    assert lengths == sorted(lengths)


def test_extractable_length_rejects_bad_sizes():
    with pytest.raises(ArgumentError, match="power of two"):
        extractable_length(random_cq(1, 6, 1), 0.0, "toeplitz_gf2")
    with pytest.raises(ArgumentError):
        extractable_length(random_cq(1, 4, 1), 0.0, target=-1.0)


def test_report_matches_entropy_module():
    cq = random_cq(6, 4, 2)
    report = verify_theorem1(cq, make_family("linear", 4, 2), 0.1)
    assert report.entropy == collision_entropy_R(cq, 0.1).value
    assert report.family == {"kind": "linear_gf2", "n": 2, "m": 1}
    assert set(report.to_dict()) >= {"delta_R", "delta_d", "theorem1_rhs", "margin", "epsilon", "d", "range_size"}
