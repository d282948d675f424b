import math

import numpy as np
import pytest

from wgfeedback.network import (
    AtomSpec,
    NetworkError,
    NetworkSpec,
    build_one_excitation_system,
    build_single_delay_matrices,
    build_two_excitation_pair_system,
    coupling_array,
    coupling_coefficient,
    effective_rates,
    pair_index,
    uniform_network,
)

W = 50.0


def test_atom_rejects_bad_values():
    with pytest.raises(NetworkError):
        AtomSpec(-1.0, 0.3, 0.3, W)
    with pytest.raises(NetworkError):
        AtomSpec(1.0, -0.1, 0.3, W)
    with pytest.raises(NetworkError):
        AtomSpec(1.0, 0.3, 0.3, float("nan"))


def test_positions_must_be_sorted():
    a, b = AtomSpec(1.0, 0.3, 0.3, W), AtomSpec(2.0, 0.3, 0.3, W)
    NetworkSpec((a, b))
    NetworkSpec((a, a))  # co-located is fine
    with pytest.raises(NetworkError, match="sorted"):
        NetworkSpec((b, a))


def test_emission_rate():
    assert AtomSpec(1.0, 0.6, 0.2, W).emission_rate == pytest.approx(0.2)


def test_nonchiral_coupling_is_a_sine():
    atom = AtomSpec(0.7, 0.4, 0.4, W)
    for k in (49.0, 50.0, 51.3):
        g = coupling_coefficient(atom, k, 0.0)
        assert g == pytest.approx(2 * 0.4 * math.sin(k * 0.7), abs=1e-14)


def test_coupling_rejects_negative_k():
    with pytest.raises(ValueError):
        coupling_coefficient(AtomSpec(0.7, 0.4, 0.4, W), -1.0, 0.0)


def test_coupling_array_matches_scalar(chiral_pair):
    k = np.array([48.0, 50.5, 52.0])
    arr = coupling_array(chiral_pair, k, 1.3)
    for j, atom in enumerate(chiral_pair.atoms):
        for i, kk in enumerate(k):
            assert arr[j, i] == pytest.approx(coupling_coefficient(atom, kk, 1.3))


def test_single_atom_kernel(single_atom):
    sys = build_one_excitation_system(single_atom)
    assert sys.instantaneous[0, 0] == pytest.approx(-0.25)
    (d, m), = sys.delayed_terms
    assert d == pytest.approx(2 * single_atom.positions[0])
    # omega_a tau is a multiple of 2 pi, so the mirror term is +gR gL
    assert m[0, 0] == pytest.approx(0.25)


def test_single_delay_matrices(four_atoms):
    A0, B0, tau = build_single_delay_matrices(four_atoms)
    assert tau == pytest.approx(80 * math.pi / W)
    assert np.allclose(np.diag(A0), -0.09)
    assert np.allclose(B0, 0.09)
    # right movers feed atoms further out: lower triangle
    assert A0[2, 0] == pytest.approx(-0.09) and A0[0, 2] == pytest.approx(-0.09)


def test_single_delay_needs_colocated(chiral_pair):
    with pytest.raises(NetworkError):
        build_single_delay_matrices(chiral_pair)


def test_colocated_system_matches_matrices(four_atoms):
    A0, B0, tau = build_single_delay_matrices(four_atoms)
    sys = build_one_excitation_system(four_atoms)
    assert np.allclose(sys.instantaneous, A0)
    (d, m), = sys.delayed_terms
    assert d == pytest.approx(tau)
    assert np.allclose(m, np.exp(1j * W * tau) * B0)


def test_pair_index():
    assert pair_index(3) == [(0, 1), (0, 2), (1, 2)]
    assert len(pair_index(5)) == 10


def test_pair_system_decay_is_sum_of_rates():
    net = uniform_network(3, 1.0, [0.2, 0.5, 1.0], W)
    sys = build_two_excitation_pair_system(net)
    rates = [a.emission_rate for a in net.atoms]
    assert sys.instantaneous[0, 0].real == pytest.approx(-(rates[0] + rates[1]))
    assert sys.labels == ("c12", "c13", "c23")


def test_pair_system_needs_two_atoms(single_atom):
    with pytest.raises(NetworkError):
        build_two_excitation_pair_system(single_atom)


def test_effective_rates_at_node():
    atom = AtomSpec(math.pi / W, 0.6, 0.4, W)
    r = effective_rates(atom, 0.01)
    assert r.y_gamma == pytest.approx(0.02)
    assert r.gamma_eff == pytest.approx(0.03)
    assert abs(r.Y) < 1e-12


def test_effective_rates_chiral_limit():
    r = effective_rates(AtomSpec(0.3, 1.0, 0.0, W))
    assert r.y_gamma == pytest.approx(0.5) and r.Y == 0.0
