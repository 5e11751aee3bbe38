import json
import math

import numpy as np
import pytest

from qtda.chains import dirac_pair, laplacian
from qtda.homology import betti, betti_details
from qtda.qsim import (MixedEnsemble, SimulationError, SpectralHistogram, StateVector,
                       bin_index, derive_seed, dirac_spectrum, estimate_betti,
                       estimate_kernel_fraction, grover_prepare, grover_success_closed_form,
                       laplacian_spectrum_report, mixed_full_ensemble, mixed_simplex_ensemble,
                       optimal_iterations, populated_orders, prepare_filtration_state,
                       prepare_full_simplex_state, prepare_simplex_state_direct,
                       spectral_distribution, spectral_sample)

from conftest import SQRT2, context_for, random_corpus

TRIANGLE_PLUS_FAR = [[0, 0], [1, 0], [0.5, math.sqrt(3) / 2], [5, 5]]


def cycle_spectrum(n):
    """Closed-form eigenvalues of the n-cycle graph Laplacian."""
    return sorted(2 - 2 * math.cos(2 * math.pi * j / n) for j in range(n))


# -- state preparation ---------------------------------------------------------

def test_direct_state_square(square):
    psi = prepare_simplex_state_direct(square, 1, 1.0)
    amps = psi.amplitudes
    assert psi.n_qubits == 4
    assert set(np.flatnonzero(amps).tolist()) == set(square.enumerate_simplices(1, 1.0))
    np.testing.assert_allclose(amps[list(square.enumerate_simplices(1, 1.0))], 0.5)


def test_direct_state_vertices(square):
    psi = prepare_simplex_state_direct(square, 0, 0.3)
    np.testing.assert_allclose(psi.amplitudes[[1, 2, 4, 8]], 1 / math.sqrt(4))


def test_direct_state_empty(square):
    with pytest.raises(SimulationError):
        prepare_simplex_state_direct(square, 2, 1.0)


def test_grover_quarter_is_exact():
    ctx = context_for(TRIANGLE_PLUS_FAR)
    run = grover_prepare(ctx, 2, 1.0 + 1e-12)
    assert run.zeta == 0.25
    assert run.theta == pytest.approx(math.pi / 6)
    assert run.iterations == 1
    assert run.success_probability >= 1 - 1e-9


def test_grover_everything_marked(square):
    run = grover_prepare(square, 1, SQRT2)
    assert run.zeta == 1 and run.iterations == 0
    assert run.success_probability == pytest.approx(1, abs=1e-12)


def test_grover_square_edges(square):
    run = grover_prepare(square, 1, 1.0)
    theta = math.asin(math.sqrt(2 / 3))
    # best r within the first amplification period, r <= pi / (4 theta)
    scan = [math.sin((2 * r + 1) * theta) ** 2 for r in range(int(math.pi / (4 * theta)) + 1)]
    assert run.iterations == int(np.argmax(scan)) == 0
    assert run.success_probability == pytest.approx(2 / 3, abs=1e-12)
    direct = prepare_simplex_state_direct(square, 1, 1.0)
    np.testing.assert_allclose(run.prepared.amplitudes, direct.amplitudes, atol=1e-9)
    assert run.oracle_calls == 1


def test_grover_closed_form_sweep():
    for _, ctx, scales in random_corpus(count=10, n_range=(3, 7)):
        for eps in scales:
            for k in range(ctx.n):
                for r in range(0, 11, 3):
                    run = grover_prepare(ctx, k, eps, mode="fixed", iterations=r)
                    assert abs(run.success_probability - run.closed_form_probability) <= 1e-9
                    assert abs(run.final_state.norm() - 1) < 1e-10
                    if run.prepared is not None:
                        direct = prepare_simplex_state_direct(ctx, k, eps)
                        np.testing.assert_allclose(run.prepared.amplitudes, direct.amplitudes, atol=1e-9)


def test_grover_empty_is_null(square):
    run = grover_prepare(square, 2, 1.0)
    assert run.is_null and run.success_probability == 0


def test_grover_budget_null_below_half():
    ctx = context_for(TRIANGLE_PLUS_FAR)
    # zeta = 1/4, budget ceil(0.25 ** -0.5) = 2 iterations: sin^2(5 pi / 6) = 1/4 < 1/2
    run = grover_prepare(ctx, 2, 1.0 + 1e-12, mode="budget", zeta_threshold=0.25)
    assert run.iterations == 2
    assert run.success_probability == pytest.approx(0.25, abs=1e-9)
    assert run.is_null
    ok = grover_prepare(ctx, 2, 1.0 + 1e-12, mode="budget", zeta_threshold=1.0)
    assert ok.iterations == 1 and not ok.is_null


def test_optimal_iterations_values():
    assert optimal_iterations(0.25) == 1
    assert optimal_iterations(1.0) == 0
    assert optimal_iterations(0.0) == 0
    assert grover_success_closed_form(0.25, 1) == pytest.approx(1.0)


def test_full_state_complete(square):
    psi = prepare_full_simplex_state(square, SQRT2, 0.0)
    assert psi.n_qubits == 2 + 4
    assert populated_orders(square, SQRT2) == [0, 1, 2, 3]
    amps = psi.amplitudes
    for k in range(4):
        branch = amps[k << 4:(k + 1) << 4] * math.sqrt(4)
        np.testing.assert_allclose(branch, prepare_simplex_state_direct(square, k, SQRT2).amplitudes)


def test_full_state_threshold_sentinels(square):
    psi = prepare_full_simplex_state(square, 0.5, 0.5)
    amps = psi.amplitudes
    assert populated_orders(square, 0.5, 0.5) == [0]
    for k in (1, 2, 3):
        assert amps[k << 4] == pytest.approx(0.5)
        assert np.count_nonzero(amps[k << 4:(k + 1) << 4]) == 1


def test_full_state_norm(square):
    psi = prepare_full_simplex_state(square, 1.0, 0.5)
    assert abs(psi.norm() - 1) < 1e-10
    # k = 1 has zeta 2/3 and is kept; k = 2, 3 are empty
    assert populated_orders(square, 1.0, 0.5) == [0, 1]


def test_filtration_state(square):
    phi = prepare_filtration_state(square, [1.0, SQRT2], 0.0)
    assert abs(phi.norm() - 1) < 1e-10
    inner = 2 + 4
    for i, eps in enumerate([1.0, SQRT2]):
        branch = phi.amplitudes[i << inner:(i + 1) << inner] * math.sqrt(2)
        np.testing.assert_allclose(branch, prepare_full_simplex_state(square, eps).amplitudes)
    single = prepare_filtration_state(square, [1.0])
    np.testing.assert_allclose(single.amplitudes, prepare_full_simplex_state(square, 1.0).amplitudes)


def test_filtration_identical_complexes(square):
    phi = prepare_filtration_state(square, [1.0, 1.2])
    half = phi.amplitudes.size // 2
    np.testing.assert_array_equal(phi.amplitudes[:half], phi.amplitudes[half:])


def test_filtration_cap(square):
    with pytest.raises(SimulationError):
        prepare_filtration_state(square, [1.0, 1.1, 1.2], qubit_cap=7)


def test_state_norm_checked():
    with pytest.raises(SimulationError):
        StateVector(1, np.array([1.0, 1.0]))


# -- ensembles -----------------------------------------------------------------

def test_mixed_ensemble(square):
    ens = mixed_simplex_ensemble(square, 1, 1.0)
    assert len(ens) == 4 and np.all(ens.weights == 0.25)
    single = mixed_simplex_ensemble(context_for(TRIANGLE_PLUS_FAR), 2, 1.0 + 1e-12)
    assert single.weights.tolist() == [1.0]
    with pytest.raises(SimulationError):
        mixed_simplex_ensemble(square, 2, 1.0)


def test_ensemble_weights_sum():
    for _, ctx, scales in random_corpus(count=100, n_range=(3, 8), n_scales=2):
        for eps in scales:
            for k in range(ctx.n):
                if ctx.count(k, eps):
                    assert abs(mixed_simplex_ensemble(ctx, k, eps).weights.sum() - 1) <= 1e-12


def test_full_ensemble(square):
    ens = mixed_full_ensemble(square, 1.0)
    assert abs(ens.weights.sum() - 1) < 1e-12
    assert {m[0] for m in ens.members} == {0, 1}


# -- spectral sampling ---------------------------------------------------------

def test_cycle_distribution_exact(square):
    lap = laplacian(square, 0, 1.0)
    np.testing.assert_allclose(np.linalg.eigvalsh(lap.dense().astype(float)), cycle_spectrum(4), atol=1e-12)
    dist = spectral_distribution(lap, mixed_simplex_ensemble(square, 0, 1.0), 0.5)
    assert list(dist) == [0, 4, 8]
    np.testing.assert_allclose(list(dist.values()), [0.25, 0.5, 0.25], atol=1e-12)


def test_cycle_sampling_frequencies(square):
    lap = laplacian(square, 0, 1.0)
    ens = mixed_simplex_ensemble(square, 0, 1.0)
    n = 10_000
    hist = spectral_sample(lap, ens, 0.5, n, seed=42)
    assert sum(hist.bins.values()) == hist.total == n
    for value, p in [(0.0, 0.25), (2.0, 0.5), (4.0, 0.25)]:
        assert abs(hist.count_at(value) / n - p) <= 4 * math.sqrt(p * (1 - p) / n)


def test_zero_operator_all_zero_bin(square):
    lap = laplacian(square, 0, 0.5)
    hist = spectral_sample(lap, mixed_simplex_ensemble(square, 0, 0.5), 0.1, 500, seed=1)
    assert hist.bins == {0: 500}


def test_sampling_deterministic(square):
    op = dirac_pair(square, 1, 1.0)
    ens = mixed_simplex_ensemble(square, 1, 1.0)
    a = spectral_sample(op, ens, 0.1, 2000, seed=9)
    b = spectral_sample(op, ens, 0.1, 2000, seed=9)
    assert a == b
    assert a != spectral_sample(op, ens, 0.1, 2000, seed=10)


def test_sampling_pure_state(square):
    op = laplacian(square, 0, 1.0)
    psi = prepare_simplex_state_direct(square, 0, 1.0)
    # uniform superposition over vertices is exactly the constant kernel vector
    assert spectral_sample(op, psi, 0.5, 300, seed=3).bins == {0: 300}


def test_sampling_errors(square):
    op = laplacian(square, 0, 1.0)
    edges = mixed_simplex_ensemble(square, 1, 1.0)
    with pytest.raises(SimulationError, match="not in"):
        spectral_sample(op, edges, 0.5, 10, seed=0)
    verts = mixed_simplex_ensemble(square, 0, 1.0)
    with pytest.raises(SimulationError):
        spectral_sample(op, verts, 0.0, 10, seed=0)
    with pytest.raises(SimulationError):
        spectral_sample(op, verts, 0.5, 0, seed=0)


def test_bin_index_zero_bin():
    assert bin_index(0.0, 0.1) == 0
    assert bin_index(0.0499, 0.1) == 0
    assert bin_index(0.05, 0.1) == 1
    assert bin_index(-1e-15, 0.1) == 0
    assert bin_index(-0.2, 0.1) == -2


def test_histogram_json(square):
    hist = spectral_sample(laplacian(square, 0, 1.0), mixed_simplex_ensemble(square, 0, 1.0), 0.5, 100, seed=5)
    doc = json.loads(json.dumps(hist.to_dict()))
    assert set(doc) == {"operator", "k", "epsilon", "delta", "seed", "total", "bins"}
    assert doc["operator"] == "laplacian" and doc["k"] == 0 and doc["epsilon"] == 1.0
    assert sum(b["count"] for b in doc["bins"]) == doc["total"] == 100
    assert [b["center"] for b in doc["bins"]] == sorted(b["center"] for b in doc["bins"])


def test_dirac_spectrum_runs(square):
    hist = dirac_spectrum(square, 1.0, 0.1, 1000, seed=2)
    assert hist.total == 1000 and hist.operator == "dirac_full"


# -- estimators ----------------------------------------------------------------

def test_kernel_fraction_square(square):
    est = estimate_kernel_fraction(square, 1, 1.0, 0.1, 10_000, seed=4)
    assert est.operator == "dirac_pair"
    assert abs(est.eta - 0.25) <= 3 * est.std_error
    eta, se = est
    assert se == pytest.approx(math.sqrt(eta * (1 - eta) / 10_000))


def test_kernel_fraction_order_zero_complete(square):
    est = estimate_kernel_fraction(square, 0, SQRT2, 0.1, 10_000, seed=4)
    assert est.operator == "laplacian"
    assert abs(est.eta - 1 / 4) <= 4 * est.std_error


def test_kernel_fraction_single_sample(square):
    est = estimate_kernel_fraction(square, 1, 1.0, 0.1, 1, seed=4)
    assert est.eta in (0.0, 1.0) and est.std_error == 0 and est.degenerate


def test_kernel_fraction_gap_warning(square):
    # nonzero singular values of the square's edge boundary are sqrt(2) and 2
    assert estimate_kernel_fraction(square, 1, 1.0, 0.1, 100, seed=1).warnings == ()
    assert estimate_kernel_fraction(square, 1, 1.0, 1.0, 100, seed=1).warnings


@pytest.mark.parametrize("estimator", ["boundary", "hodge"])
def test_estimate_betti_square(square, estimator):
    est = estimate_betti(square, 1, 1.0, 0.1, 10_000, seed=7, estimator=estimator)
    assert est.covers(1)
    assert est.nearest_integer == 1
    zero = estimate_betti(square, 1, SQRT2, 0.1, 10_000, seed=7, estimator=estimator)
    assert zero.covers(0)


def test_estimate_betti_isolated_hodge_exact(square):
    est = estimate_betti(square, 0, 0.5, 0.1, 1000, seed=1, estimator="hodge")
    assert est.value == 4 and est.ci95 == (4.0, 4.0)


def test_estimate_betti_errors(square):
    with pytest.raises(SimulationError):
        estimate_betti(square, 2, 1.0, 0.1, 100, seed=1)
    with pytest.raises(SimulationError):
        estimate_betti(square, 1, 1.0, 0.1, 100, seed=1, estimator="magic")


def test_laplacian_spectrum_report_square(square):
    report = laplacian_spectrum_report(square, 1.0, 0.5, 10_000, seed=3)
    assert [r.k for r in report] == [0, 1]  # order 2 is empty and omitted
    k0 = report[0]
    dims = {e.center: e.dimension for e in k0.estimates}
    assert set(dims) == {0.0, 2.0, 4.0}
    for center, truth in [(0.0, 1), (2.0, 2), (4.0, 1)]:
        se = next(e.std_error for e in k0.estimates if e.center == center)
        assert abs(dims[center] - truth) <= 4 * se
    for entry in report:
        assert sum(e.dimension for e in entry.estimates) == pytest.approx(entry.n_simplices, abs=1e-9)


def test_hodge_zero_bin_limit():
    """Exact zero-bin mass of the Laplacian on the uniform ensemble is betti / |S|."""
    for _, ctx, scales in random_corpus(count=25, n_range=(3, 7)):
        for eps in scales:
            for k in range(ctx.n):
                size = ctx.count(k, eps)
                if not size:
                    continue
                lap = laplacian(ctx, k, eps)
                dist = spectral_distribution(lap, mixed_simplex_ensemble(ctx, k, eps), 1e-3)
                assert dist.get(0, 0.0) == pytest.approx(betti(ctx, k, eps) / size, abs=1e-9)
                if k >= 1:
                    pair = dirac_pair(ctx, k, eps)
                    dist = spectral_distribution(pair, mixed_simplex_ensemble(ctx, k, eps), 1e-3)
                    kern = betti_details(ctx, eps, k)[0][k].kernel_dim
                    assert dist.get(0, 0.0) == pytest.approx(kern / size, abs=1e-9)


def test_derive_seed_stable():
    assert derive_seed(7, 1, "hodge") == derive_seed(7, 1, "hodge")
    assert derive_seed(7, 1, "hodge") != derive_seed(7, 1, "boundary")
