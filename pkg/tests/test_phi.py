"""Comparison-function checks: normality, orbit falsification, envelopes."""

from __future__ import annotations

import numpy as np
import pytest

from fixlab import defaults
from fixlab.expr import EvaluationError
from fixlab.phi import (
    PhiError,
    check_asymptotic_normal,
    check_nearly_right_admissible,
    check_normal,
    comparison_function,
    estimate_L_plus,
    resolve_seed,
)
from fixlab.verdicts import to_jsonable

T_HALF = "t / 2"
STEP = "if(t < 1, 0, 0.9)"
HYBRID = "t - (t - 1)^2"
SATURATING = "t / (1 + t)"


# ---------------------------------------------------------------------------
# Loading


def test_load_records_declaration():
    phi = comparison_function(T_HALF, q=[2.0, 1.0, 2.0], monotone=True)
    assert phi.q_points == (1.0, 2.0)  # sorted, deduplicated
    assert phi.declared_monotone
    assert phi.source == T_HALF
    assert phi(0.3) == 0.15
    assert np.array_equal(phi.values(np.array([0.0, 1.0])), [0.0, 0.5])


def test_load_rejects_bad_exceptional_points():
    for q in ([0.0], [-1.0], [np.nan]):
        with pytest.raises(PhiError):
            comparison_function(T_HALF, q=q)


def test_load_rejects_non_finite_at_zero():
    with pytest.raises(PhiError):
        comparison_function("1 / t")


# ---------------------------------------------------------------------------
# Normality scan


def test_normal_frozen_verdicts():
    assert check_normal(comparison_function(T_HALF)).holds
    assert check_normal(comparison_function(STEP)).holds
    assert check_normal(comparison_function(SATURATING)).holds
    assert check_normal(comparison_function(HYBRID)).holds


def test_identity_fails_everywhere():
    verdict = check_normal(comparison_function("t"))
    assert not verdict.holds
    grid = defaults.phi_scan_grid()
    assert verdict.witness == grid[0] == 1e-6
    assert verdict.details["bad_count"] == grid.size
    assert len(verdict.details["bad_points"]) == 16


def test_positive_at_zero_fails_at_origin():
    verdict = check_normal(comparison_function("0.5 + t / 2"))
    assert not verdict.holds
    assert verdict.witness == 0.0
    assert verdict.details["phi_at_zero"] == 0.5


def test_normal_honors_custom_samples():
    phi = comparison_function("2 * t")
    assert not check_normal(phi).holds
    # a sample set that misses the violation region does not exist for 2t,
    # so pick the one-point scan to pin the witness instead
    verdict = check_normal(phi, samples=np.array([3.0]))
    assert verdict.witness == 3.0


def test_hybrid_depends_on_grid_gap():
    # the default scan has no point within 1e-3 of the fixed point of HYBRID
    grid = defaults.phi_scan_grid()
    assert np.min(np.abs(grid - 1.0)) > 1e-3


def test_normal_raises_on_non_finite_phi():
    phi = comparison_function("1 / (t - 1)")
    with pytest.raises(EvaluationError):
        check_normal(phi, samples=np.array([1.0]))  # division by zero


# ---------------------------------------------------------------------------
# Orbit falsification


def test_halving_orbit_step_count():
    # independent recursion: r <- r/2 from 1.0 needs 30 steps to cross 1e-9
    r, steps = 1.0, 0
    while r > 1e-9:
        r, steps = r / 2.0, steps + 1
    assert steps == 30

    verdict = check_asymptotic_normal(comparison_function(T_HALF), seeds=(1.0,), seed=0)
    assert verdict.holds
    equality = verdict.details["orbits"][0]
    assert equality["kind"] == "equality"
    assert equality["reached"]
    assert equality["steps"] == steps
    assert len(verdict.details["orbits"]) == 1 + defaults.SUBORBITS


def test_saturating_orbit_is_too_slow_at_tight_tol():
    phi = comparison_function(SATURATING)
    # bit-exact replica of the kernel recursion
    r = 1.0
    for _ in range(defaults.MAX_ITERS):
        if r <= 1e-9:
            break
        r = r / (1.0 + r)
    assert abs(r - 1.0 / (1.0 + defaults.MAX_ITERS)) <= 1e-12

    verdict = check_asymptotic_normal(phi, seeds=(1.0,), seed=0)
    assert not verdict.holds
    equality = verdict.details["orbits"][0]
    assert not equality["reached"]
    assert equality["steps"] == defaults.MAX_ITERS
    assert equality["final_r"] == r
    assert verdict.witness == equality  # first failing orbit is the witness


def test_saturating_orbit_passes_at_loose_tol():
    phi = comparison_function(SATURATING)
    verdict = check_asymptotic_normal(phi, seeds=(1.0,), seed=0, tol=1e-4)
    assert verdict.holds
    # r_n = 1/(1+n) dips under 1e-4 precisely at n = 9999
    assert verdict.details["orbits"][0]["steps"] == 9999


def test_orbit_verdict_deterministic():
    phi = comparison_function(T_HALF)
    a = check_asymptotic_normal(phi, seeds=(1.0, 0.25), seed=7)
    b = check_asymptotic_normal(phi, seeds=(1.0, 0.25), seed=7)
    assert to_jsonable(a) == to_jsonable(b)


def test_monotone_declaration_recorded_when_verified():
    phi = comparison_function(T_HALF, monotone=True)
    verdict = check_asymptotic_normal(phi, seeds=(1.0,), seed=0)
    assert verdict.details.get("equality_orbit_dominates") is True
    undeclared = check_asymptotic_normal(comparison_function(T_HALF), seeds=(1.0,), seed=0)
    assert "equality_orbit_dominates" not in undeclared.details


def test_orbit_rejects_bad_seed_values():
    phi = comparison_function(T_HALF)
    with pytest.raises(PhiError):
        check_asymptotic_normal(phi, seeds=(-1.0,), seed=0)


def test_orbit_raises_on_divergence():
    with pytest.raises(EvaluationError):
        check_asymptotic_normal(comparison_function("2 * t"), seeds=(1.0,), seed=0)


def test_seed_resolution(monkeypatch):
    monkeypatch.delenv(defaults.SEED_ENV, raising=False)
    assert resolve_seed(None) == 0
    assert resolve_seed(5) == 5
    monkeypatch.setenv(defaults.SEED_ENV, "123")
    assert resolve_seed(None) == 123
    assert resolve_seed(5) == 5  # explicit beats the environment
    phi = comparison_function(T_HALF)
    verdict = check_asymptotic_normal(phi, seeds=(1.0,))
    assert verdict.details["seed"] == 123


# ---------------------------------------------------------------------------
# One-sided envelope estimates


def test_step_envelope_frozen_values():
    phi = comparison_function(STEP)
    at_one = estimate_L_plus(phi, 1.0)
    assert at_one.value == 0.9
    assert at_one.converged
    assert all(rung == 0.9 for _, rung in at_one.ladder)

    assert estimate_L_plus(phi, 0.5).value == 0.0
    # 0.95 still sees the jump at the coarsest window only; the nested
    # suffix-max keeps the refined rungs, so the estimate collapses to 0
    near = estimate_L_plus(phi, 0.95)
    assert near.value == 0.0
    assert near.ladder[0] == (0.1, 0.9)
    assert near.ladder[-1][1] == 0.0


def test_halving_envelope_exact_arithmetic():
    phi = comparison_function(T_HALF)
    est = estimate_L_plus(phi, 1.0)
    # sup over [1, 1+eps) is attained at the last sample of the finest rung
    expected = (1.0 + 1e-6 * (127.0 / 128.0)) / 2.0
    assert est.value == expected
    assert not est.converged
    rungs = [rung for _, rung in est.ladder]
    assert rungs == sorted(rungs, reverse=True)
    assert len(est.ladder) == len(defaults.LADDER)


def test_envelope_ladder_monotone_across_catalog():
    for source in (T_HALF, STEP, HYBRID, SATURATING):
        phi = comparison_function(source)
        for s in (0.0, 0.3, 1.0, 2.5):
            est = estimate_L_plus(phi, s)
            rungs = [rung for _, rung in est.ladder]
            for a, b in zip(rungs, rungs[1:]):
                assert a >= b
            assert est.value >= phi(s)
            assert est.value == max(rungs[-1], phi(s))


def test_envelope_rejects_bad_base_point():
    phi = comparison_function(T_HALF)
    with pytest.raises(PhiError):
        estimate_L_plus(phi, -1.0)
    with pytest.raises(PhiError):
        estimate_L_plus(phi, float("nan"))


# ---------------------------------------------------------------------------
# Near-admissibility


def test_admissible_monotone_shortcut():
    verdict = check_nearly_right_admissible(comparison_function(T_HALF, monotone=True))
    assert verdict.holds
    assert verdict.details["method"] == "monotone-shortcut"


def test_admissible_envelope_scan_when_undeclared():
    verdict = check_nearly_right_admissible(comparison_function(T_HALF))
    assert verdict.holds
    assert verdict.details["method"] == "envelope-scan"
    assert verdict.details["bad_count"] == 0


def test_false_monotone_declaration_falls_back_to_scan():
    phi = comparison_function("if(t < 1, 1 - t, t / 2)", monotone=True)
    verdict = check_nearly_right_admissible(phi)
    assert verdict.details["method"] == "envelope-scan"
    assert not verdict.holds
    # near zero the envelope sits at about 1, far above the identity
    assert verdict.witness == defaults.phi_scan_grid()[0]


def test_hybrid_needs_its_exceptional_point():
    scan = np.array([0.5, 1.0, 1.0 + 5e-10, 2.0])
    bare = comparison_function(HYBRID)
    verdict = check_nearly_right_admissible(bare, scan=scan)
    assert not verdict.holds
    assert verdict.witness == 1.0
    assert verdict.details["bad_count"] == 2

    declared = comparison_function(HYBRID, q=[1.0])
    verdict = check_nearly_right_admissible(declared, scan=scan)
    assert verdict.holds
    assert verdict.details["skipped_near_q"] == 2
    assert verdict.details["scan_points"] == 4


def test_admissible_on_default_grid_with_exception():
    declared = comparison_function(HYBRID, q=[1.0])
    verdict = check_nearly_right_admissible(declared)
    assert verdict.holds
    assert verdict.details["skipped_near_q"] == 0  # no grid point that close


def test_admissible_everything_skipped():
    phi = comparison_function(T_HALF, q=[1.0])
    verdict = check_nearly_right_admissible(phi, scan=np.array([1.0]))
    assert verdict.holds
    assert verdict.details["skipped_near_q"] == 1
    assert verdict.details["bad_count"] == 0
