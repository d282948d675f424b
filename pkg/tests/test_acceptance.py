"""Acceptance suite: one test per criterion, each built from the presets.

Every test records a single PASS/FAIL line (shown in the terminal summary and
printed with -s). Thresholds are the fixed ones from the requirements; failing
criteria are left failing.
"""
import pytest

from conftest import ACCEPTANCE_LINES
from wgfeedback.presets import Context, run_preset


@pytest.fixture(scope="module")
def ctx():
    # shared so the fig4a ensemble is simulated once for criteria 8 and 9
    return Context()


def _criterion(n, title, results):
    checks = [c for r in results for c in r.checks]
    ok = all(c.passed for c in checks)
    parts = "; ".join(c.line() for c in checks)
    line = f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title} | {parts}"
    ACCEPTANCE_LINES[n] = line
    print(line)
    failed = [c.line() for c in checks if not c.passed]
    assert ok, "\n".join(failed)


def test_criterion_01_segment_one_closed_form(ctx):
    _criterion(1, "segment-1 closed form", [run_preset("thm1", ctx)])


def test_criterion_02_consensus(ctx):
    _criterion(2, "amplitude and population consensus", [run_preset("fig2a", ctx), run_preset("fig2b", ctx)])


def test_criterion_03_delay_kinks(ctx):
    _criterion(3, "derivative kinks at round trips", [run_preset("fig2c", ctx)])


def test_criterion_04_oracle(ctx):
    _criterion(4, "k-grid oracle equivalence", [run_preset("oracle", ctx)])


def test_criterion_05_trapping(ctx):
    _criterion(5, "two-excitation trapping and lossless Lindblad", [run_preset("thm2", ctx)])


def test_criterion_06_two_excitation_symmetry(ctx):
    _criterion(6, "two-excitation edge symmetry", [run_preset("fig3b", ctx)])


def test_criterion_07_steady_state(ctx):
    _criterion(7, "steady-state sweep and compensation", [run_preset("eq23-sweep", ctx), run_preset("remark5", ctx)])


@pytest.mark.slow
def test_criterion_08_feedback_steady_state(ctx):
    _criterion(8, "feedback-only SME steady state", [run_preset("remark6", ctx)])


@pytest.mark.slow
def test_criterion_09_noise_ordering(ctx):
    _criterion(9, "stationary noise ordering and regression", [run_preset("thm7", ctx)])


def test_criterion_10_convergence_ordering(ctx):
    _criterion(10, "convergence-time ordering", [run_preset("thm8", ctx)])


def test_criterion_11_properties(ctx):
    _criterion(11, "property battery", [run_preset("properties", ctx)])
