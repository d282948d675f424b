import math

import numpy as np
import pytest

from wgfeedback.network import build_single_delay_matrices, uniform_network
from wgfeedback.one_excitation import (
    bound_state_amplitudes,
    characteristic_matrix,
    detect_kinks,
    final_value,
    final_value_consensus_check,
    inverse_laplace_amplitudes,
    plateau_population,
    real_form_system,
    segment_one_analytic,
    simulate_one_excitation,
    colocated_network,
    transfer_entry,
    laplace_amplitudes,
)
from wgfeedback.dde import integrate_dde

W = 50.0


def test_colocated_network_shape():
    net = colocated_network(4, 0.3)
    A0, B0, tau = build_single_delay_matrices(net)
    assert net.gamma_right[0] == pytest.approx(0.9)
    assert np.allclose(A0, -B0)
    assert np.linalg.matrix_rank(B0) == 1
    assert (W * tau / (2 * math.pi)) == pytest.approx(round(W * tau / (2 * math.pi)))


def test_segment_one_closed_form():
    net = colocated_network(4, 0.3)
    tau = net.round_trip()
    run = simulate_one_excitation(net, [1, 0, 0, 0], tau, tau / 400)
    m = run.times < tau
    c1, cj = segment_one_analytic(4, 0.3, run.times[m])
    assert np.max(np.abs(run.amplitudes[m, 0] - c1)) < 1e-9
    for j in (1, 2, 3):
        assert np.max(np.abs(run.amplitudes[m, j] - cj)) < 1e-9


def test_segment_one_limits():
    c1, cj = segment_one_analytic(3, 0.5, [0.0, 1e6])
    assert c1[0] == 1.0 and cj[0] == 0.0
    assert c1[1] == pytest.approx(1 / 3) and cj[1] == pytest.approx(-1 / 3)
    with pytest.raises(ValueError):
        segment_one_analytic(1, 0.5, [0.0])


def test_norm_and_photon_probability(four_atoms):
    run = simulate_one_excitation(four_atoms, [1, 0, 0, 0], 20.0, 0.02)
    total = run.populations.sum(axis=1)
    assert np.all(total <= 1 + 1e-9)
    assert np.allclose(total + run.photon_probability, 1.0)


def test_init_validation(four_atoms):
    with pytest.raises(ValueError):
        simulate_one_excitation(four_atoms, [1, 1, 0, 0], 1.0, 0.01)
    with pytest.raises(ValueError):
        simulate_one_excitation(four_atoms, [1, 0], 1.0, 0.01)


def test_single_atom_trapping_plateau(single_atom):
    tau = single_atom.round_trip()
    run = simulate_one_excitation(single_atom, [1.0], 15 * tau, tau / 200)
    expected = 1.0 / (1 + 0.25 * tau) ** 2
    assert plateau_population(run)[0] == pytest.approx(expected, rel=1e-3)
    A0, B0, tau = build_single_delay_matrices(single_atom)
    b = bound_state_amplitudes(A0, B0, tau, W, [1.0])
    assert abs(b[0]) ** 2 == pytest.approx(expected, rel=1e-10)
    assert final_value(A0, B0, tau, W, [1.0])[0] == pytest.approx(b[0], abs=1e-6)


def test_no_bound_state_off_resonance():
    net = uniform_network(1, 40.5 * math.pi / W, [0.5], W)
    A0, B0, tau = build_single_delay_matrices(net)
    assert np.allclose(bound_state_amplitudes(A0, B0, tau, W, [1.0]), 0)


def test_characteristic_matrix_at_zero(four_atoms):
    A0, B0, tau = build_single_delay_matrices(four_atoms)
    M = characteristic_matrix(0.0, A0, B0, tau, W)
    assert np.allclose(M, -(A0 + B0))


def test_transfer_entry_matches_solve(four_atoms):
    A0, B0, tau = build_single_delay_matrices(four_atoms)
    s = 0.3 + 0.7j
    x = laplace_amplitudes(s, A0, B0, tau, W, [1, 0, 0, 0])
    for j in range(4):
        assert transfer_entry(s, A0, B0, tau, W, j) == pytest.approx(x[j])


def test_euler_inversion_reconstructs_dde(four_atoms):
    A0, B0, tau = build_single_delay_matrices(four_atoms)
    run = simulate_one_excitation(four_atoms, [1, 0, 0, 0], 12.0, tau / 400)
    t = np.array([1.0, 6.0, 11.0])
    lap = inverse_laplace_amplitudes(t, A0, B0, tau, W, [1, 0, 0, 0])
    ref = np.array([run.trajectory.at(x) for x in t])
    assert np.max(np.abs(lap - ref)) < 1e-4


def test_consensus_check_colocated():
    A0, B0, _ = build_single_delay_matrices(colocated_network(4, 0.3))
    chk = final_value_consensus_check(A0, B0, [1, 0, 0, 0])
    assert chk.residual < 1e-8
    assert (chk.rank_a0, chk.rank_b0) == (1, 1)


def test_real_form_agrees(four_atoms):
    A0, B0, tau = build_single_delay_matrices(four_atoms)
    x0 = np.array([1, 0, 0, 0], complex)
    cplx = simulate_one_excitation(four_atoms, x0, 12.0, tau / 200).amplitudes
    real = integrate_dde(real_form_system(A0, B0, tau, W), np.stack([x0.real, x0.imag], axis=1).ravel(), 12.0, tau / 200).states
    assert np.allclose(real[:, 0::2] + 1j * real[:, 1::2], cplx, atol=1e-12)


def test_kinks_at_round_trips():
    net = uniform_network(4, 40 * math.pi / W, [0.6, 0.2, 0.2, 0.2], W)
    tau = net.round_trip()
    run = simulate_one_excitation(net, [1, 0, 0, 0], 30.0, tau / 200)
    kinks = detect_kinks(run.times, run.populations[:, 0])
    for l in range(1, 6):
        assert np.min(np.abs(kinks - l * tau)) <= tau / 200


def test_kinks_smooth_curve_has_none():
    t = np.linspace(0, 10, 2001)
    assert detect_kinks(t, np.exp(-t) * np.cos(3 * t)).size == 0


def test_kinks_needs_uniform_grid():
    t = np.sort(np.random.default_rng(0).uniform(0, 1, 200))
    with pytest.raises(ValueError):
        detect_kinks(t, t)


def test_csv_output(tmp_path, single_atom):
    run = simulate_one_excitation(single_atom, [1.0], 1.0, 0.1)
    p = tmp_path / "a.csv"
    run.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "t,re_c1,im_c1,pop_c1,photon_probability"
    assert len(lines) == len(run.times) + 1
