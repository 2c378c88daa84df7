"""Comparison functions and their qualification checks.

A comparison function phi is a one-variable expression over t >= 0 with
an optional declared exceptional set Q (positive reals where the
right-limsup test is skipped) and an optional monotonicity hint.

Checks, in the order the harness runs them:

* ``check_normal``: phi(0) <= slack and phi(t) < t, strictly, at every
  sample.
* ``check_asymptotic_normal``: orbit falsification of r <- u * phi(r);
  the equality orbit (u = 1) plus a batch of randomized sub-orbits with
  u drawn uniformly from [0, 1] under a recorded seed.  Holds iff every
  orbit drops below tol within the step budget.
* ``estimate_L_plus``: one-sided limsup envelope at s, computed by
  sampling sup phi([s, s + eps)) down a ladder of shrinking eps.  Sample
  pools are nested (each rung also counts every finer rung's samples),
  so the returned ladder is non-increasing exactly, not just in the
  limit.  The estimate is max(last rung, phi(s)).
* ``check_nearly_right_admissible``: the envelope stays strictly below
  the identity at every scan point not declared in Q.  A verified
  monotone phi short-circuits: for non-decreasing phi the envelope
  equals the right limit, which normality keeps below the diagonal.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import defaults, kernels
from .expr import EvaluationError, Expression, Program, compile_program, parse, to_source
from .verdicts import Verdict


class PhiError(ValueError):
    """Raised when a comparison function is rejected at load."""


@dataclass(frozen=True, eq=False)
class ComparisonFunction:
    expr: Expression
    program: Program
    q_points: tuple[float, ...]
    declared_monotone: bool
    source: str

    def __call__(self, t: float) -> float:
        return kernels.eval_scalar(self.program, float(t))

    def values(self, ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=np.float64)
        return kernels.eval_rows(self.program, ts.reshape(-1, 1))


def comparison_function(
    source: str | Expression,
    q: tuple[float, ...] | list[float] = (),
    monotone: bool = False,
) -> ComparisonFunction:
    """Load a comparison function; phi(0) must evaluate finite."""
    expr = parse(source, {"t"}) if isinstance(source, str) else source
    program = compile_program(expr, ("t",))
    for value in q:
        if not (np.isfinite(value) and value > 0.0):
            raise PhiError(f"exceptional point must be a positive real, got {value!r}")
    at_zero = kernels.eval_scalar(program, 0.0)
    if not np.isfinite(at_zero):
        raise PhiError(f"phi(0) is not finite: {at_zero!r}")
    return ComparisonFunction(
        expr=expr,
        program=program,
        q_points=tuple(sorted(set(float(v) for v in q))),
        declared_monotone=bool(monotone),
        source=source if isinstance(source, str) else to_source(expr),
    )


@dataclass(frozen=True)
class LimsupEstimate:
    s: float
    value: float
    ladder: tuple[tuple[float, float], ...]  # (eps, sup over [s, s+eps))
    converged: bool


def _finite_or_raise(values: np.ndarray, what: str) -> np.ndarray:
    if not np.isfinite(values).all():
        raise EvaluationError(f"{what} produced a non-finite value")
    return values


def check_normal(
    phi: ComparisonFunction,
    samples: np.ndarray | None = None,
    delta: float = defaults.SLACK,
) -> Verdict:
    """phi(0) <= delta and phi(t) < t with no slack at every positive sample."""
    if samples is None:
        samples = defaults.phi_scan_grid()
    samples = np.asarray(samples, dtype=np.float64)
    at_zero = kernels.eval_scalar(phi.program, 0.0)
    values = _finite_or_raise(phi.values(samples), "phi")
    bad = samples[~(values < samples)]
    bad.sort()
    zero_ok = at_zero <= delta
    holds = bool(zero_ok and bad.size == 0)
    witness = None
    if not zero_ok:
        witness = 0.0
    elif bad.size:
        witness = float(bad[0])
    return Verdict(
        check="normal",
        holds=holds,
        witness=witness,
        details={
            "phi_at_zero": float(at_zero),
            "samples": int(samples.size),
            "bad_points": [float(v) for v in bad[:16]],
            "bad_count": int(bad.size),
        },
    )


def resolve_seed(seed: int | None) -> int:
    """Explicit seed, else the FIXLAB_SEED environment variable, else 0."""
    if seed is not None:
        return int(seed)
    env = os.environ.get(defaults.SEED_ENV, "").strip()
    return int(env) if env else 0


def _run_phi_orbit(
    phi: ComparisonFunction,
    r0: float,
    max_iters: int,
    tol: float,
    rng: np.random.Generator | None,
) -> tuple[bool, float, int]:
    """Drive r <- u * phi(r); rng None means the equality orbit (u = 1)."""
    chunk = min(4096, max_iters)
    steps = 0
    r = float(r0)
    while steps < max_iters:
        size = min(chunk, max_iters - steps)
        u = np.ones(size) if rng is None else rng.random(size)
        used, r, status = kernels.phi_orbit_chunk(phi.program, r, u, tol)
        steps += used
        if status == 2:
            raise EvaluationError(f"phi orbit left the finite range at step {steps}")
        if r <= tol:
            return True, r, steps
    return False, r, steps


def check_asymptotic_normal(
    phi: ComparisonFunction,
    seeds: tuple[float, ...] | list[float],
    max_iters: int = defaults.MAX_ITERS,
    tol: float = defaults.TOL,
    seed: int | None = None,
    suborbits: int = defaults.SUBORBITS,
) -> Verdict:
    """Falsification by orbit: every r <- u * phi(r) run must reach tol.

    For each starting value this runs the equality orbit and ``suborbits``
    randomized ones (u uniform on [0, 1], generator seeded per orbit from
    the recorded base seed).  Monotone phi makes the equality orbit an
    upper envelope for every randomized one; the verdict notes when that
    stronger reading applies.
    """
    base_seed = resolve_seed(seed)
    orbits = []
    holds = True
    witness = None
    for si, r0 in enumerate(seeds):
        if not (np.isfinite(r0) and r0 >= 0.0):
            raise PhiError(f"orbit seed must be a non-negative real, got {r0!r}")
        for oi in range(suborbits + 1):
            rng = None if oi == 0 else np.random.default_rng([base_seed, si, oi])
            reached, final_r, steps = _run_phi_orbit(phi, float(r0), max_iters, tol, rng)
            kind = "equality" if oi == 0 else "randomized"
            orbits.append(
                {
                    "start": float(r0),
                    "kind": kind,
                    "orbit_index": oi,
                    "reached": bool(reached),
                    "final_r": float(final_r),
                    "steps": int(steps),
                }
            )
            if not reached and witness is None:
                witness = orbits[-1]
            holds = holds and reached
    details = {
        "seed": base_seed,
        "tol": float(tol),
        "max_iters": int(max_iters),
        "orbits": orbits,
    }
    if phi.declared_monotone and _monotone_on(phi, defaults.phi_scan_grid()):
        details["equality_orbit_dominates"] = True
        details["note"] = (
            "phi verified non-decreasing on the scan grid, so the equality "
            "orbit bounds every randomized sub-orbit from above"
        )
    return Verdict(check="asymptotic_normal", holds=holds, witness=witness, details=details)


def _monotone_on(phi: ComparisonFunction, samples: np.ndarray) -> bool:
    ordered = np.sort(np.asarray(samples, dtype=np.float64))
    values = _finite_or_raise(phi.values(ordered), "phi")
    return bool((np.diff(values) >= -defaults.SLACK).all())


def _ladder_values(
    phi: ComparisonFunction,
    s_points: np.ndarray,
    ladder: tuple[float, ...],
    samples: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized envelope over many base points at once.

    Returns (values, rungs, phi_at_s): rungs has shape (npts, len(ladder))
    and is the exact suffix-max over nested sample pools, value is
    max(last rung, phi(s)).
    """
    s_points = np.asarray(s_points, dtype=np.float64)
    eps = np.asarray(ladder)
    offsets = np.arange(samples) / samples  # [0, 1), left endpoint included
    # Sample grid: s + eps * frac for every (point, rung, offset).
    grid = s_points[:, None, None] + eps[None, :, None] * offsets[None, None, :]
    flat = grid.reshape(-1, 1)
    vals = _finite_or_raise(kernels.eval_rows(phi.program, flat), "phi")
    raw = vals.reshape(s_points.size, eps.size, samples).max(axis=2)
    # Nested pools: each rung also counts every finer rung's samples.
    rungs = np.maximum.accumulate(raw[:, ::-1], axis=1)[:, ::-1]
    phi_at_s = _finite_or_raise(
        kernels.eval_rows(phi.program, s_points.reshape(-1, 1)), "phi"
    )
    value = np.maximum(rungs[:, -1], phi_at_s)
    return value, rungs, phi_at_s


def estimate_L_plus(
    phi: ComparisonFunction,
    s: float,
    ladder: tuple[float, ...] = defaults.LADDER,
    samples: int = defaults.LADDER_SAMPLES,
) -> LimsupEstimate:
    """Sampled one-sided limsup envelope of phi at s (s itself included)."""
    if not (np.isfinite(s) and s >= 0.0):
        raise PhiError(f"estimate point must be a non-negative real, got {s!r}")
    value, rungs, _ = _ladder_values(phi, np.array([s]), tuple(ladder), samples)
    row = rungs[0]
    converged = bool(abs(row[-1] - row[-2]) <= defaults.LADDER_CONVERGED) if row.size >= 2 else True
    return LimsupEstimate(
        s=float(s),
        value=float(value[0]),
        ladder=tuple((float(e), float(v)) for e, v in zip(ladder, row)),
        converged=converged,
    )


def check_nearly_right_admissible(
    phi: ComparisonFunction,
    scan: np.ndarray | None = None,
) -> Verdict:
    """Envelope strictly below the identity off the declared set Q.

    Scan points within ``defaults.Q_SKIP`` of a Q member are skipped.
    A declared-and-verified monotone phi holds without estimation.
    """
    if scan is None:
        scan = defaults.phi_scan_grid()
    scan = np.asarray(scan, dtype=np.float64)
    keep = np.ones(scan.size, dtype=bool)
    for qv in phi.q_points:
        keep &= np.abs(scan - qv) > defaults.Q_SKIP
    kept = scan[keep]
    skipped = int(scan.size - kept.size)

    if phi.declared_monotone and _monotone_on(phi, scan):
        return Verdict(
            check="nearly_right_admissible",
            holds=True,
            witness=None,
            details={
                "method": "monotone-shortcut",
                "scan_points": int(scan.size),
                "skipped_near_q": skipped,
            },
        )

    if kept.size:
        values, _, _ = _ladder_values(phi, kept, defaults.LADDER, defaults.LADDER_SAMPLES)
        bad_mask = ~(values < kept)
        bad = kept[bad_mask]
        bad_values = values[bad_mask]
    else:
        bad = np.array([])
        bad_values = np.array([])
    holds = bad.size == 0
    order = np.argsort(bad)
    return Verdict(
        check="nearly_right_admissible",
        holds=bool(holds),
        witness=None if holds else float(bad[order][0]),
        details={
            "method": "envelope-scan",
            "scan_points": int(scan.size),
            "skipped_near_q": skipped,
            "bad_points": [float(v) for v in bad[order][:16]],
            "bad_values": [float(v) for v in bad_values[order][:16]],
            "bad_count": int(bad.size),
        },
    )
