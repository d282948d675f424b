"""Randomized invariants (hypothesis)."""

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from wgfeedback.graph import GraphSnapshot, consensus_metric
from wgfeedback.network import (
    AtomSpec,
    NetworkSpec,
    build_one_excitation_system,
    build_single_delay_matrices,
    coupling_array,
    effective_rates,
    one_excitation_kernel,
    uniform_network,
)
from wgfeedback.one_excitation import simulate_one_excitation
from wgfeedback.open_system import (
    BlochVector,
    DriveParams,
    FeedbackParams,
    bloch_drift,
    bloch_to_density,
    bloch_trajectory,
    check_density,
    lindblad_step,
    steady_sigma_z_feedback,
)
from wgfeedback.sme import NoiseStream, run_ensemble
from wgfeedback.two_excitation import MODE_NORM, PairState, simulate_pair_amplitudes

W = 50.0
rate = st.floats(0.0, 1.0)
pos_rate = st.floats(0.05, 1.0)
SETTINGS = settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@st.composite
def networks(draw, max_atoms=4):
    n = draw(st.integers(1, max_atoms))
    gaps = draw(st.lists(st.floats(0.1, 1.0), min_size=n, max_size=n))
    z = np.cumsum(gaps).tolist()
    atoms = tuple(AtomSpec(zj, draw(rate), draw(rate), W) for zj in z)
    return NetworkSpec(atoms)


@st.composite
def unit_vectors(draw, n):
    re = draw(st.lists(st.floats(-1, 1), min_size=n, max_size=n))
    im = draw(st.lists(st.floats(-1, 1), min_size=n, max_size=n))
    v = np.array(re) + 1j * np.array(im)
    nrm = np.linalg.norm(v)
    return v / nrm if nrm > 1e-3 else np.eye(n)[0].astype(complex)


@SETTINGS
@given(networks(), st.data())
def test_population_bound(net, data):
    x0 = data.draw(unit_vectors(net.n_atoms))
    dt = min(0.02, min(build_one_excitation_system(net).delays, default=0.08) / 4)
    run = simulate_one_excitation(net, x0, 8.0, dt)
    assert np.all(run.populations.sum(axis=1) <= 1 + 1e-9)


@SETTINGS
@given(st.integers(2, 4).flatmap(lambda n: st.lists(pos_rate, min_size=n, max_size=n)))
def test_pair_norm_bound(gammas):
    net = uniform_network(len(gammas), 40 * math.pi / W, gammas, W)
    traj = simulate_pair_amplitudes(net, PairState.excited(len(gammas), 0, 1), 8.0, 0.02)
    assert np.all(np.sum(np.abs(traj.states) ** 2, axis=1) <= 1 + 1e-9)


@SETTINGS
@given(st.floats(0.01, 5.0), rate, rate, st.floats(0.0, 1.0))
def test_decay_rate_nonnegative(z, gr, gl, loss):
    r = effective_rates(AtomSpec(z, gr, gl, W), loss)
    assert r.y_gamma >= 0 and r.gamma_eff >= loss


@SETTINGS
@given(st.integers(1, 4).flatmap(lambda n: st.lists(st.tuples(pos_rate, pos_rate), min_size=n, max_size=n)),
       st.floats(0.5, 3.0))
def test_single_delay_form_matches_general(gammas, z):
    net = uniform_network(len(gammas), z, gammas, W)
    A0, B0, tau = build_single_delay_matrices(net)
    sys = build_one_excitation_system(net)
    assert np.allclose(sys.instantaneous, A0, atol=1e-15)
    (d, m), = sys.delayed_terms
    assert d == pytest.approx(tau)
    assert np.allclose(m, np.exp(1j * W * tau) * B0, atol=1e-15)
    assert np.linalg.matrix_rank(B0) == 1


@settings(max_examples=8, deadline=None)
@given(st.tuples(pos_rate, pos_rate, pos_rate, pos_rate), st.floats(0.5, 1.0), st.floats(1.2, 2.0))
def test_kernel_matches_k_integral(g, z1, z2):
    """Delta-kernel coefficients equal the k-space overlap smeared by a narrow Gaussian."""
    net = NetworkSpec((AtomSpec(z1, g[0], g[1], W), AtomSpec(z2, g[2], g[3], W)))
    k = np.linspace(W - 150, W + 150, 40001)
    h = coupling_array(net, k, 0.0) * MODE_NORM
    sigma = 0.04
    terms = one_excitation_kernel(net)
    delays = sorted({round(d, 12) for *_, d, _ in terms if d > 0})
    if min(np.diff(delays), default=1.0) < 10 * sigma:
        return
    for j in range(2):
        for p in range(2):
            overlap = np.conj(h[j]) * h[p]
            for d in delays:
                expect = sum(c for (jj, pp, dd, c) in terms if jj == j and pp == p and abs(dd - d) < 1e-9)
                # transform of a unit-height Gaussian bump centred on u = d
                smear = sigma * math.sqrt(2 * math.pi) * np.exp(-1j * (k - W) * d - 0.5 * (sigma * (k - W)) ** 2)
                got = -np.trapezoid(overlap * smear, k)
                assert got == pytest.approx(expect, abs=1e-6)


@SETTINGS
@given(st.floats(0, 2), st.floats(-1, 1), st.floats(0, 1), st.data())
def test_lindblad_trace_hermiticity_positivity(W_, Y, G, data):
    v = np.array(data.draw(st.lists(st.floats(-1, 1), min_size=3, max_size=3)))
    r = np.linalg.norm(v)
    if r > 1:
        v /= r
    rho = bloch_to_density(BlochVector((v[0] + 1j * v[1]) / 2, (v[0] - 1j * v[1]) / 2, v[2]))
    p = DriveParams(W_, Y, G)
    for _ in range(50):
        new = lindblad_step(rho, p, 0.05)
        assert abs(np.trace(new) - np.trace(rho)) < 1e-12
        assert np.max(np.abs(new - new.conj().T)) < 1e-12
        assert np.min(np.linalg.eigvalsh(new)) > -1e-9
        rho = new


@SETTINGS
@given(st.floats(0, 2), st.floats(-1, 1), st.floats(0.01, 1), st.floats(-0.3, 0.3), st.floats(-0.3, 0.3))
def test_conjugate_symmetry_kept(W_, Y, G, a, b):
    A, B = bloch_drift(DriveParams(W_, Y, G))
    x = bloch_trajectory(A, B, [a + 1j * b, a - 1j * b, -0.5], np.linspace(0, 5, 6))
    assert np.allclose(x[:, 1], np.conj(x[:, 0]), atol=1e-12)


@SETTINGS
@given(st.floats(0, 2), st.floats(-1, 1), st.floats(0.01, 1), st.floats(0, 2), st.floats(0, 1))
def test_feedback_steady_state_negative(W_, Y, G, g, gr):
    assert steady_sigma_z_feedback(DriveParams(W_, Y, G), FeedbackParams(g, gr)) < 0


@SETTINGS
@given(st.floats(0.01, 1), st.floats(0, 1), st.floats(0.01, 2), st.floats(0.01, 2))
def test_feedback_monotone_in_gain(G, gr, g_a, g_b):
    lo, hi = sorted((g_a, g_b))
    if hi - lo < 1e-3:
        return
    a = steady_sigma_z_feedback(DriveParams(0, 0, G), FeedbackParams(lo, gr))
    b = steady_sigma_z_feedback(DriveParams(0, 0, G), FeedbackParams(hi, gr))
    assert a < b < 0


@SETTINGS
@given(st.lists(st.floats(0, 1), min_size=1, max_size=6), st.randoms())
def test_consensus_metric_permutation_and_bound(vals, rnd):
    perm = list(vals)
    rnd.shuffle(perm)
    assert consensus_metric(vals) == consensus_metric(perm)
    assert consensus_metric(vals) <= 2 * max(abs(v) for v in vals) + 1e-15


@SETTINGS
@given(st.integers(1, 4).flatmap(lambda n: unit_vectors(n)), st.floats(0, 2 * math.pi))
def test_snapshot_global_phase(c, phi):
    a = GraphSnapshot.build(0.0, np.abs(c) ** 2)
    b = GraphSnapshot.build(0.0, np.abs(c * np.exp(1j * phi)) ** 2)
    assert np.allclose(a.vertex_probs, b.vertex_probs, atol=1e-15)
    assert a.complement >= 0


@SETTINGS
@given(st.integers(0, 2**63), st.floats(0.001, 0.05))
def test_noise_scales_with_dt(seed, dt):
    a = NoiseStream(seed, dt).draw(50)
    b = NoiseStream(seed, 2 * dt).draw(50)
    assert np.allclose(b, math.sqrt(2) * a, rtol=1e-14)


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2**32), st.integers(2, 20))
def test_ensemble_deterministic_and_schedule_free(seed, n_traj):
    drive, fb = DriveParams(0.0, 0.0, 0.51), FeedbackParams(math.sqrt(5.1), 1.0)
    kw = dict(n_traj=n_traj, master_seed=seed, chunk_size=4, max_violation_rate=None)
    a = run_ensemble(drive, fb, BlochVector.ground(), 2.0, 0.05, **kw)
    b = run_ensemble(drive, fb, BlochVector.ground(), 2.0, 0.05, **kw)
    c = run_ensemble(drive, fb, BlochVector.ground(), 2.0, 0.05, workers=2, **kw)
    assert np.array_equal(a.mean_sz, b.mean_sz) and np.array_equal(a.var_sz, b.var_sz)
    assert np.array_equal(a.mean_sz, c.mean_sz) and np.array_equal(a.var_sz, c.var_sz)
