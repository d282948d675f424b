import math

import numpy as np
import pytest

from wgfeedback.network import uniform_network
from wgfeedback.oracle import KGrid, compare_oracle_dde, refinement_study, relative_linf, schrodinger_one_excitation
from wgfeedback.two_excitation import AliasingError


def test_kgrid_validation():
    with pytest.raises(ValueError):
        KGrid(np.linspace(40, 60, 100))
    k = np.linspace(40, 60, 300)
    k[5] += 1e-3
    with pytest.raises(ValueError):
        KGrid(k)
    g = KGrid.band(50.0, 10.0, 512)
    assert g.count == 512 and g.dk == pytest.approx(20 / 512)
    assert g.k.mean() == pytest.approx(50.0)


def test_band_coverage(single_atom):
    KGrid.band(50.0, 10.0, 512).check_covers(single_atom)
    with pytest.raises(ValueError):
        KGrid.band(50.0, 1.0, 512).check_covers(single_atom)


def test_relative_linf():
    assert relative_linf(np.array([1.0, 2.0]), np.array([1.1, 2.0])) == pytest.approx(0.05)
    assert relative_linf(np.zeros(2), np.zeros(2)) == 0.0


def test_guards(single_atom):
    grid = KGrid.band(50.0, 25.0, 1024)
    with pytest.raises(ValueError):
        schrodinger_one_excitation(single_atom, grid, [1.0], 1.0, 0.01)
    with pytest.raises(AliasingError):
        schrodinger_one_excitation(single_atom, grid, [1.0], 200.0, 0.004)


def test_norm_conserved(single_atom):
    grid = KGrid.band(50.0, 12.5, 512)
    run = schrodinger_one_excitation(single_atom, grid, [1.0], 5.0, 0.008)
    assert np.max(np.abs(run.norm - 1)) < 1e-6


def test_markov_decay_before_echo(single_atom):
    # before the first round trip the atom decays at its full emission rate
    grid = KGrid.band(50.0, 25.0, 2048)
    run = schrodinger_one_excitation(single_atom, grid, [1.0], 4.0, 0.004, record_every=25)
    rate = 2 * single_atom.atoms[0].emission_rate
    assert np.max(np.abs(run.populations[:, 0] - np.exp(-rate * run.times))) < 2e-2


def test_refinement_decreases(chiral_pair):
    st = refinement_study(chiral_pair, [1.0, 0.0], 3 * chiral_pair.round_trip(0), ladder=(512, 1024, 2048))
    assert st.decreasing
    assert st.errors[-1] < 2e-2


def test_compare_helper(single_atom):
    grid = KGrid.band(50.0, 25.0, 2048)
    err = compare_oracle_dde(single_atom, grid, [1.0], 6.0, 0.004)
    assert err < 5e-2
