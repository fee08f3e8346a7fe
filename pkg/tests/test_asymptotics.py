import math
from functools import reduce

import numpy as np
import pytest

from conftest import random_density
from qrex.errors import ArgumentError, ResourceError
from qrex.modules.asymptotics import (
    LogSpectrum,
    compute_sanov_exponents,
    convolve_power,
    corollary4_scan,
    grid_search_exponent,
    h_inf_power,
    h_sup_power,
    prop3_bound,
    prop3_epsilons,
    sanov_exponents,
    scan_asymptotics,
    schedule_epsilons,
    tail_masses,
    tilted_exponent,
)
from qrex.modules.cq_state import BipartiteState, maximally_mixed, random_bipartite
from qrex.modules.spectral_entropy import h_inf, h_sup
from qrex.modules.state_files import save_state


def kron_power(matrix: np.ndarray, n: int) -> np.ndarray:
    return reduce(np.kron, [matrix] * n)


def test_log_spectrum_merges_equal_eigenvalues():
    spec = LogSpectrum.from_eigenvalues([0.5, 0.25, 0.25, 0.0])
    assert spec.size == 2
    assert list(spec.log_values) == [-2.0, -1.0]
    assert spec.masses == pytest.approx([0.5, 0.5])
    assert spec.total_mass() == pytest.approx(1.0)
    with pytest.raises(ArgumentError, match="exceeds 1"):
        LogSpectrum([-1.0, -1.0], [0.8, 0.8])


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("eps", [0.07, 0.23])
def test_power_entropies_match_dense_tensor_power(seed, n, eps):
    rho = random_density(np.random.default_rng(seed), 3)
    dense = kron_power(rho, n)
    assert h_sup_power(rho, n, eps) == pytest.approx(h_sup(dense, eps), abs=1e-9)
    assert h_inf_power(rho, n, eps) == pytest.approx(h_inf(dense, eps), abs=1e-9)


def test_power_of_flat_spectrum():
    spec = convolve_power(LogSpectrum.from_eigenvalues([0.5, 0.5]), 10)
    assert spec.size == 1
    assert spec.log_values[0] == pytest.approx(-10.0)
    assert spec.total_mass() == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(4))
def test_binning_moves_entropies_the_safe_way(seed):
    rho = random_density(np.random.default_rng(seed), 4)
    for eps in (0.05, 0.2):
        assert h_inf_power(rho, 6, eps, bin_width=0.05) <= h_inf_power(rho, 6, eps) + 1e-9
        assert h_sup_power(rho, 6, eps, bin_width=0.05) >= h_sup_power(rho, 6, eps) - 1e-9
    coarse = convolve_power(LogSpectrum.from_operator(rho), 6, bin_width=1.0)
    assert coarse.size < convolve_power(LogSpectrum.from_operator(rho), 6).size
    assert coarse.total_mass() == pytest.approx(1.0)


def test_convolution_checks():
    spec = LogSpectrum.from_eigenvalues([0.4, 0.3, 0.2, 0.1])
    with pytest.raises(ResourceError, match="cap"):
        convolve_power(spec, 3, atom_cap=10)
    with pytest.raises(ArgumentError):
        convolve_power(spec, 0)
    with pytest.raises(ArgumentError, match="rounding"):
        convolve_power(spec, 2, rounding="nearest")
    with pytest.raises(ArgumentError, match="bin_width"):
        convolve_power(spec, 2, bin_width=0.0)


@pytest.mark.parametrize("r", [[0.5, 0.3, 0.2], [0.7, 0.2, 0.1], [0.6, 0.4], [0.45, 0.45, 0.1]])
@pytest.mark.parametrize("gamma", [0.1, 0.3])
@pytest.mark.parametrize("upper", [True, False])
def test_tilted_exponent_matches_grid_search(r, gamma, upper):
    r = np.array(r)
    entropy = float(-np.sum(r * np.log2(r)))
    target = entropy + gamma if upper else entropy - gamma
    expected = grid_search_exponent(r, target, upper)
    actual = tilted_exponent(r, target, upper)
    if math.isinf(expected):
        assert math.isinf(actual)
    else:
        assert actual == pytest.approx(expected, abs=1e-4)


def test_exponent_at_the_edge():
    r = np.array([0.5, 0.25, 0.25])
    assert tilted_exponent(r, 2.0, upper=True) == pytest.approx(1.0)
    assert tilted_exponent(r, 2.5, upper=True) == math.inf
    assert tilted_exponent(r, 1.0, upper=False) == pytest.approx(1.0)


def test_sanov_exponents():
    flat = sanov_exponents(np.eye(4) / 4, 0.1)
    assert flat.d_bar == math.inf
    assert flat.d_under == math.inf
    skewed = sanov_exponents(np.diag([0.5, 0.3, 0.2]), 0.2)
    assert 0 < skewed.d_bar < math.inf
    assert 0 < skewed.d_under < math.inf
    with pytest.raises(ArgumentError, match="gamma"):
        sanov_exponents(np.eye(2) / 2, 0.0)


def test_prop3_bound():
    assert prop3_bound(math.inf, 3, 10) == 0.0
    assert prop3_bound(1.0, 2, 3) == pytest.approx(16 / 8)
    assert prop3_bound(0.0, 60, 10**6) == math.inf


@pytest.mark.parametrize("n", [4, 8, 16])
@pytest.mark.parametrize("gamma", [0.1, 0.25])
@pytest.mark.parametrize("dim,seed", [(2, 0), (2, 1), (3, 2), (3, 3)])
def test_exact_tails_respect_sanov_bounds(n, gamma, dim, seed):
    rho = random_density(np.random.default_rng(seed), dim)
    eps_bar, eps_under = prop3_epsilons(rho, gamma, n)
    tails = tail_masses(rho, n, gamma)
    assert tails.upper <= eps_bar + 1e-12
    assert tails.lower <= eps_under + 1e-12
    assert 0 <= tails.upper <= 1
    assert 0 <= tails.lower <= 1


def test_tails_vanish_for_flat_spectrum():
    tails = tail_masses(np.eye(3) / 3, 5, 0.1)
    assert tails.upper == 0.0
    assert tails.lower == 0.0


def test_schedules():
    eps_under, eps_hat = schedule_epsilons(16, (2, 2))
    assert eps_under == eps_hat == pytest.approx(0.1 * 2.0**-2)
    proof_under, proof_hat = schedule_epsilons(1, (2, 2), schedule="proof")
    assert proof_under == pytest.approx(16 * 0.05)
    assert proof_hat == pytest.approx(4 * 0.05)
    with pytest.raises(ArgumentError, match="schedule"):
        schedule_epsilons(1, (2, 2), schedule="fast")


def test_scan_gap_shrinks_for_fixed_state():
    rho = BipartiteState.from_matrix(np.diag([0.4, 0.3, 0.2, 0.1]), (2, 2))
    rows = corollary4_scan(rho, 20, n_values=[2, 20])
    assert [row.n for row in rows] == [2, 20]
    assert rows[0].cond_vn == pytest.approx(0.8755, abs=1e-3)
    assert rows[0].gap == pytest.approx(0.875 + 0.169, abs=5e-3)
    assert rows[1].gap < rows[0].gap
    assert all(row.bound_per_n <= row.cond_vn + 1e-9 for row in rows)


def test_gamma_is_reported_but_leaves_the_bound_alone():
    rho = random_bipartite(9, 2, 2)
    slow = corollary4_scan(rho, 4, k_gamma=0.1)
    fast = corollary4_scan(rho, 4, k_gamma=0.3)
    for a, b in zip(slow, fast):
        assert a.bound_per_n == b.bound_per_n
        assert a.gamma == pytest.approx(a.n**-0.1)
        assert b.gamma == pytest.approx(b.n**-0.3)


def test_scan_gap_shrinks_for_seeded_qubit_pair():
    rho = random_bipartite(9, 2, 2)
    assert np.all(np.linalg.eigvalsh(rho.matrix) > 1e-9)
    rows = corollary4_scan(rho, 20, n_values=[2, 20])
    assert rows[0].bound_per_n is not None and rows[1].bound_per_n is not None
    assert rows[1].gap < rows[0].gap


def test_scan_of_maximally_mixed_state():
    rows = corollary4_scan(maximally_mixed(2, 2), 6)
    assert [row.n for row in rows] == list(range(1, 7))
    for row in rows:
        assert row.cond_vn == pytest.approx(1.0)
        assert row.bound_per_n == pytest.approx(1 + math.log2(1 - math.sqrt(row.eps_under)) / row.n, abs=1e-9)
        assert row.gamma == pytest.approx(row.n**-0.25)
        assert not row.vacuous
    gaps = [row.gap for row in rows]
    assert gaps == sorted(gaps, reverse=True)


def test_scan_of_pure_product_state():
    rows = corollary4_scan(BipartiteState.from_matrix(np.diag([1.0, 0, 0, 0]), (2, 2)), 4)
    for row in rows:
        assert row.cond_vn == pytest.approx(0.0, abs=1e-9)
        assert row.bound_per_n <= 0


def test_proof_schedule_is_vacuous_for_small_n():
    rows = corollary4_scan(maximally_mixed(2, 2), 2, schedule="proof")
    assert rows[0].vacuous
    assert rows[0].bound_per_n is not None
    assert rows[1].vacuous
    assert rows[1].bound_per_n is None
    assert rows[1].gap is None
    assert rows[1].eps_n == math.inf


def test_scan_argument_checks():
    with pytest.raises(ArgumentError):
        corollary4_scan(maximally_mixed(2, 2), 0)
    with pytest.raises(ArgumentError, match="eps0"):
        corollary4_scan(maximally_mixed(2, 2), 3, eps0=1.0)


def test_asymptotics_tools(tmp_path):
    path = tmp_path / "rho.json"
    save_state(BipartiteState.from_matrix(np.diag([0.4, 0.3, 0.2, 0.1]), (2, 2)), str(path))
    scan = scan_asymptotics(str(path), n_max=3)
    assert scan["columns"] == ["n", "eps_n", "bound_per_n", "cond_vn", "gap"]
    assert len(scan["rows"]) == 3
    sanov = compute_sanov_exponents(str(path), 0.2, n=6, system="B")
    assert sanov["tail_upper"] <= sanov["eps_bar"] + 1e-12
    assert sanov["gamma"] == 0.2
