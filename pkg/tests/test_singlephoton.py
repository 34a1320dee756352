import math

import numpy as np
import pytest

from proxyifm.circuit import compile_circuit
from proxyifm.errors import ZeroPulsesError
from proxyifm.singlephoton import (
    coherent_train_expansion,
    detection_probability_formula,
    propagate_photon,
    propagate_wavefunction,
    sample_outcomes,
    single_bin_state,
    tensor_sum_state,
)

from conftest import fig2_spec


def test_tensor_sum_state_single_bin():
    psi = tensor_sum_state(1)
    assert psi.amplitudes["source"][0] == 1.0


def test_tensor_sum_state_four_bins():
    psi = tensor_sum_state(4)
    assert np.allclose(psi.amplitudes["source"], 0.5)


def test_tensor_sum_state_normalised():
    psi = tensor_sum_state(10)
    assert abs(psi.norm_squared() - 1.0) < 1e-15


def test_tensor_sum_rejects_zero():
    with pytest.raises(ZeroPulsesError):
        tensor_sum_state(0)


@pytest.mark.parametrize("n", [2, 10, 50])
def test_open_interferometer_edge_leakage(n):
    cc = compile_circuit(fig2_spec(n_pulses=n))
    dist = propagate_photon(cc, tensor_sum_state(n))
    assert dist.p["D1"] == pytest.approx(1 - 1 / (2 * n), abs=1e-12)
    assert dist.p["D2"] == pytest.approx(1 / (2 * n), abs=1e-12)
    assert dist.p.get("obstacle_l", 0.0) == 0.0
    assert dist.exclusive


def test_leakage_decreases_monotonically():
    values = []
    for n in (2, 5, 10, 20, 50):
        cc = compile_circuit(fig2_spec(n_pulses=n))
        values.append(propagate_photon(cc, tensor_sum_state(n)).p["D2"])
    assert all(a > b for a, b in zip(values, values[1:]))
    assert values[-1] == pytest.approx(0.01, abs=1e-12)


def test_interior_dark_bins_and_edge_probability():
    n = 10
    cc = compile_circuit(fig2_spec(n_pulses=n))
    out = propagate_wavefunction(cc, tensor_sum_state(n))
    d2 = out.amplitudes["D2"]
    for b in cc.interior_bins():
        assert abs(d2[b]) < 1e-14
    edge_prob = abs(d2[0]) ** 2 + abs(d2[n]) ** 2
    assert edge_prob == pytest.approx(1 / (2 * n), abs=1e-12)


@pytest.mark.parametrize("n", [2, 4, 10])
def test_blocked_interferometer_exact_outcomes(n):
    cc = compile_circuit(fig2_spec(n_pulses=n, inserted=True))
    dist = propagate_photon(cc, tensor_sum_state(n))
    assert dist.p["obstacle_l"] == pytest.approx(0.5, abs=1e-12)
    assert dist.p["D1"] == pytest.approx(0.25, abs=1e-12)
    assert dist.p["D2"] == pytest.approx(0.25, abs=1e-12)


def test_single_bin_photon_splits_evenly():
    cc = compile_circuit(fig2_spec(n_pulses=1))
    dist = propagate_photon(cc, single_bin_state(0))
    assert dist.p["D1"] == pytest.approx(0.5, abs=1e-12)
    assert dist.p["D2"] == pytest.approx(0.5, abs=1e-12)


def test_outcome_probabilities_sum_to_one():
    for n, inserted in ((3, False), (7, True)):
        cc = compile_circuit(fig2_spec(n_pulses=n, inserted=inserted))
        dist = propagate_photon(cc, tensor_sum_state(n))
        assert dist.total() == pytest.approx(1.0, abs=1e-12)


def test_norm_preserved_including_absorbed():
    cc = compile_circuit(fig2_spec(n_pulses=6, inserted=True))
    out = propagate_wavefunction(cc, tensor_sum_state(6))
    assert out.norm_squared() == pytest.approx(1.0, abs=1e-12)


def test_detection_probability_formula():
    assert detection_probability_formula(0.0) == pytest.approx(1.0)
    assert detection_probability_formula(math.pi) == pytest.approx(0.0, abs=1e-15)
    assert detection_probability_formula(2 * math.pi / 3) == pytest.approx(0.25)


def test_delay_phase_sweep_reproduces_formula():
    # interior-bin probability under a swept delay phase follows the
    # analytic fringe for the one-photon state too
    n = 10
    for phi in np.linspace(0, 2 * math.pi, 9):
        cc = compile_circuit(fig2_spec(n_pulses=n, mismatch=float(phi)))
        out = propagate_wavefunction(cc, tensor_sum_state(n))
        mid = 5
        p_d1 = abs(out.amplitudes["D1"][mid]) ** 2 * n
        assert abs(p_d1 - detection_probability_formula(phi)) < 1e-9


def test_sampler_draws_exactly_one_outcome_per_shot():
    cc = compile_circuit(fig2_spec(n_pulses=5, inserted=True))
    dist = propagate_photon(cc, tensor_sum_state(5))
    cells, draws = sample_outcomes(dist, shots=20_000, seed=11)
    assert len(draws) == 20_000
    assert np.all((draws >= 0) & (draws < len(cells)))
    # frequencies agree with the exact outcome probabilities within 3 sigma
    terminal_p = {"D1": 0.25, "D2": 0.25, "obstacle_l": 0.5}
    for term, p in terminal_p.items():
        got = sum(1 for i in draws if cells[i][0] == term) / len(draws)
        sigma = math.sqrt(p * (1 - p) / len(draws))
        assert abs(got - p) <= 3 * sigma


def test_sampler_is_seed_deterministic():
    cc = compile_circuit(fig2_spec(n_pulses=4, inserted=True))
    dist = propagate_photon(cc, tensor_sum_state(4))
    _, a = sample_outcomes(dist, shots=1000, seed=5)
    _, b = sample_outcomes(dist, shots=1000, seed=5)
    assert np.array_equal(a, b)


def test_expansion_vacuum_coefficient():
    n, alpha = 3, math.sqrt(0.1)
    coeffs = coherent_train_expansion(alpha, n, 4)
    assert coeffs[0] == pytest.approx(math.exp(-n * alpha**2 / 2), abs=1e-15)


def test_expansion_of_vacuum_train():
    coeffs = coherent_train_expansion(0.0, 5, 3)
    assert coeffs[0] == 1.0
    assert np.all(coeffs[1:] == 0.0)


def test_expansion_coefficients_closed_form():
    n, alpha = 2, math.sqrt(0.1)
    coeffs = coherent_train_expansion(alpha, n, 4)
    for j in range(5):
        expected = (math.exp(-n * alpha**2 / 2)
                    * (math.sqrt(n) * alpha) ** j / math.factorial(j))
        assert coeffs[j] == pytest.approx(expected, abs=1e-15)
