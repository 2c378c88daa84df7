"""Picard iteration, orbit diagnostics, and the theorem harness.

``iterate`` drives x <- T(x) and records the orbit together with the
step lengths rho_n = d(x_n, x_{n+1}).  The diagnostics deliberately use
the distance as given: a constant orbit at a point u with d(u, u) > 0 is
*not* 0d-convergent, because d(x_n, u) never drops.

``run_theorem_harness`` classifies the space, qualifies phi, verifies
the contraction, picks the strongest applicable conclusion, and then
confirms (or refutes) that conclusion on actual orbits.  Dispatch:

    T3  reflexive triangular + sufficient, any gauge
    T5  triangular + sufficient, gauge M1/M2
    T2  reflexive triangular
    T4  triangular, gauge M1/M2
    T1  triangular, gauge M3 (the map's vanishing orbit steps become an
        extra hypothesis, checked on the sampled starts unless assumed)

preferring T3 > T5 > T2 > T4 > T1.  Hypothesis statuses are
"verified-on-samples", "assumed", "failed", or "derived" (when a
cheaper hypothesis implies it: vanishing orbit steps follow from the
contraction with an asymptotically normal phi whenever the gauge is M1,
M2 on a triangular space, or M2/M3 on a reflexive triangular space).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import defaults, kernels
from .expr import EvaluationError
from .gauge import GAUGES, ContractionReport, MapError, SelfMapSpec, verify_contraction
from .phi import (
    ComparisonFunction,
    check_asymptotic_normal,
    check_nearly_right_admissible,
    check_normal,
    resolve_seed,
)
from .space import AxiomId, DistanceStructure, StructureClass, classify_structure
from .verdicts import Verdict, to_jsonable


@dataclass
class PicardTrace:
    """One orbit of x <- T(x) with its distance diagnostics."""

    start: float | int
    orbit: np.ndarray
    rho: np.ndarray
    hit_cap: bool
    tol: float
    window: int
    space: DistanceStructure = field(repr=False, default=None)
    tmap: SelfMapSpec = field(repr=False, default=None)
    d_asymptotic: bool = False
    cauchy_0d: bool = False
    converged_0d: bool = False
    limit: float | int | None = None
    limit_tail: np.ndarray | None = None

    @property
    def steps(self) -> int:
        return int(self.orbit.size - 1)

    def summary(self) -> dict:
        tail = None
        if self.limit_tail is not None:
            tail = [float(v) for v in self.limit_tail]
        return {
            "start": _as_point(self.space, self.start),
            "steps": self.steps,
            "hit_cap": self.hit_cap,
            "final_rho": float(self.rho[-1]) if self.rho.size else 0.0,
            "d_asymptotic": self.d_asymptotic,
            "cauchy_0d": self.cauchy_0d,
            "converged_0d": self.converged_0d,
            "limit": _as_point(self.space, self.limit),
            "limit_tail": tail,
        }


def _as_point(space: DistanceStructure, value):
    if value is None:
        return None
    return int(value) if space is not None and space.kind == "tabulated" else float(value)


def _tail_distances(trace: PicardTrace, z, count: int) -> np.ndarray:
    pts = trace.orbit[-count:]
    if trace.space.kind == "tabulated":
        return trace.space.matrix[pts, int(z)]
    return trace.space.distance_pairs(pts, np.full(pts.size, float(z)))


def iterate(
    space: DistanceStructure,
    tmap: SelfMapSpec,
    x0,
    max_iters: int = defaults.MAX_ITERS,
    tol: float = defaults.TOL,
    window: int = defaults.WINDOW,
) -> PicardTrace:
    """Run the orbit from x0 until the tail settles or the cap is hit.

    The loop stops early once the newest step is <= tol and the last
    ``window`` orbit points are pairwise within tol; hitting the cap is
    reported through flags, never an exception.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if space.kind == "tabulated":
        i0 = int(x0)
        if not 0 <= i0 < space.n:
            raise ValueError(f"start index {i0} outside [0, {space.n})")
        orbit, rho, status = kernels.orbit_table(
            tmap.indices, space.matrix, i0, max_iters, tol, window
        )
    else:
        f0 = float(x0)
        if not (space.lo - defaults.SLACK <= f0 <= space.hi + defaults.SLACK):
            raise ValueError(f"start {f0} outside [{space.lo}, {space.hi}]")
        orbit, rho, status = kernels.orbit_analytic(
            tmap.program, space.program, f0, max_iters, tol, window
        )
    if status == 2:
        raise EvaluationError(
            f"orbit from {x0!r} produced a non-finite value at step {orbit.size}"
        )
    trace = PicardTrace(
        start=x0,
        orbit=orbit,
        rho=rho,
        hit_cap=(status == 1),
        tol=float(tol),
        window=int(window),
        space=space,
        tmap=tmap,
    )
    trace.d_asymptotic = check_d_asymptotic(trace)
    trace.cauchy_0d = detect_0d_cauchy(trace)
    limit, tail = _limit_search(trace, tol)
    trace.limit = limit
    trace.limit_tail = tail
    trace.converged_0d = limit is not None
    return trace


def check_d_asymptotic(trace: PicardTrace, tol: float | None = None) -> bool:
    """True iff the last W step lengths rho_n all sit at or below tol."""
    t = trace.tol if tol is None else tol
    if trace.rho.size == 0:
        return False
    tail = trace.rho[-min(trace.window, trace.rho.size):]
    return bool((tail <= t).all())


def detect_0d_cauchy(
    trace: PicardTrace, tol: float | None = None, window: int | None = None
) -> bool:
    """True iff the last W orbit points are pairwise within tol.

    Pairs are taken over distinct orbit ranks, so a constant orbit at u
    still fails when d(u, u) > tol.
    """
    t = trace.tol if tol is None else tol
    w = min(trace.window if window is None else window, trace.orbit.size)
    if w < 2:
        return True
    tail = trace.orbit[-w:]
    a, b = np.triu_indices(w, k=1)
    if trace.space.kind == "tabulated":
        dists = trace.space.matrix[tail[a], tail[b]]
    else:
        dists = trace.space.distance_pairs(tail[a], tail[b])
    return bool((dists <= t).all())


def _fixed_displacement(trace: PicardTrace, z) -> float:
    """d(z, Tz), with a failed evaluation counting as 'not fixed'."""
    space, tmap = trace.space, trace.tmap
    if space.kind == "tabulated":
        return float(space.matrix[int(z), tmap.apply_index(int(z))])
    try:
        tz = tmap.apply_point(float(z))
        if not np.isfinite(tz):
            return np.inf
        return float(space.distance(float(z), tz))
    except EvaluationError:
        return np.inf


def _limit_search(
    trace: PicardTrace, tol: float
) -> tuple[float | int | None, np.ndarray | None]:
    """Pick the 0d-limit candidate, if any survives the tail test.

    Analytic spaces try the last orbit point and its image under T (a
    refinement toward an actual fixed point); tabulated spaces rank every
    point.  Candidates must keep the trailing window within tol; the
    winner prefers d(z, Tz) <= tol, then the smallest trailing average,
    then the smallest coordinate.
    """
    w = min(trace.window, trace.orbit.size)
    if trace.space.kind == "tabulated":
        candidates = list(range(trace.space.n))
    else:
        last = float(trace.orbit[-1])
        candidates = [last]
        try:
            img = trace.tmap.apply_point(last)
            if np.isfinite(img) and img != last:
                candidates.append(float(img))
        except EvaluationError:
            pass
    best_key = None
    best: tuple[float | int, np.ndarray] | None = None
    for z in candidates:
        tail = _tail_distances(trace, z, w)
        if not np.isfinite(tail).all() or tail.max() > tol:
            continue
        key = (0 if _fixed_displacement(trace, z) <= tol else 1, tail.mean(), z)
        if best_key is None or key < best_key:
            best_key = key
            best = (z, tail)
    if best is None:
        return None, None
    return best[0], best[1]


def find_0d_limit(trace: PicardTrace, tol: float | None = None):
    """The trace's 0d-limit point, or None when the tail never settles."""
    limit, _ = _limit_search(trace, trace.tol if tol is None else tol)
    return limit


@dataclass(frozen=True)
class FixedPointSets:
    d_fixed: tuple[int, ...]  # d(z, Tz) <= delta
    exact: tuple[int, ...]    # T(z) == z


def brute_force_fixed_points(
    space: DistanceStructure, tmap: SelfMapSpec, delta: float = defaults.SLACK
) -> FixedPointSets:
    """Exhaustive fixed-point scan; tabulated spaces only."""
    if space.kind != "tabulated" or tmap.kind != "tabulated":
        raise MapError("brute-force scan needs a tabulated space and map")
    idx = np.arange(space.n)
    images = tmap.indices
    disp = space.matrix[idx, images]
    return FixedPointSets(
        d_fixed=tuple(int(i) for i in idx[disp <= delta]),
        exact=tuple(int(i) for i in idx[images == idx]),
    )


def default_starts(space: DistanceStructure, count: int = defaults.STARTS) -> np.ndarray:
    """Evenly spaced analytic starts, or every point of a small table."""
    if space.kind == "tabulated":
        if space.n <= defaults.TABULATED_START_CAP:
            return np.arange(space.n)
        picks = np.linspace(0, space.n - 1, defaults.TABULATED_START_CAP)
        return np.unique(picks.round().astype(np.int64))
    return np.linspace(space.lo, space.hi, count)


def descent_profile(trace: PicardTrace, phi: ComparisonFunction) -> dict:
    """Worst-case slack of rho_{n+1} <= phi(rho_n) and of monotone decay."""
    rho = trace.rho
    if rho.size < 2:
        return {"max_violation": -np.inf, "max_increase": -np.inf, "steps": int(rho.size)}
    phi_rho = phi.values(rho[:-1])
    if not np.isfinite(phi_rho).all():
        raise EvaluationError("phi produced a non-finite value on an orbit step")
    return {
        "max_violation": float((rho[1:] - phi_rho).max()),
        "max_increase": float(np.diff(rho).max()),
        "steps": int(rho.size),
    }


# ---------------------------------------------------------------------------
# Theorem harness


THEOREM_ORDER = ("T3", "T5", "T2", "T4", "T1")

THEOREM_TITLES = {
    "T1": "triangular space, gauge M3: orbits of a d-asymptotic contraction "
          "0d-converge to a d-fixed point; the d-fixed set is d-singleton",
    "T2": "reflexive triangular space: orbits 0d-converge to a d-fixed point; "
          "the d-fixed set is d-singleton",
    "T3": "reflexive triangular sufficient space: unique fixed point z with "
          "d(z,z) = 0; all orbits 0d-converge to it",
    "T4": "triangular space, gauge M1/M2: orbits 0d-converge to a d-fixed "
          "point; the d-fixed set is d-singleton",
    "T5": "triangular sufficient space, gauge M1/M2: unique fixed point; all "
          "orbits 0d-converge to it",
}

# Clause tags quoted in reports, one per hypothesis kind.
CLAUSE = {
    "symmetric": "(a01) symmetric",
    "triangular": "(a02) triangular",
    "reflexive_triangular": "(a03) reflexive triangular",
    "sufficient": "(a04) sufficient",
    "normal": "(b05) normal",
    "asymptotic_normal": "(b06) asymptotically normal",
    "nearly_right_admissible": "(b07) nearly right admissible",
    "d_asymptotic": "(c02) d-asymptotic",
    "contraction": "(c03) contraction",
}

# 0-completeness is a standing assumption; the backing clause differs by
# theorem family.
COMPLETENESS_CLAUSE = {"T1": "(c01)", "T2": "(d01)", "T3": "(d01)", "T4": "(e02)", "T5": "(e02)"}

VERIFIED = "verified-on-samples"
ASSUMED = "assumed"
FAILED = "failed"
DERIVED = "derived"


@dataclass
class HypothesisCheck:
    name: str
    clause: str
    status: str
    note: str = ""
    witness: object = None


@dataclass
class TheoremVerdict:
    theorem_id: str | None
    title: str | None
    applicable: tuple[str, ...]
    conclusion_status: str  # confirmed | refuted | not-applicable
    hypotheses: list[HypothesisCheck]
    conclusion_checks: list[dict]
    structure: StructureClass
    contraction: ContractionReport
    phi_checks: dict[str, Verdict]
    traces: list[dict]
    fixed_point_report: dict
    options: dict

    def to_jsonable(self) -> dict:
        return to_jsonable(self)


def _applicable_theorems(structure: StructureClass, gauge: str) -> tuple[str, ...]:
    ok = {name: rep.holds for name, rep in structure.reports.items()}
    refl = ok[AxiomId.REFLEXIVE_TRIANGULAR.value]
    tri = ok[AxiomId.TRIANGULAR.value]
    suf = ok[AxiomId.SUFFICIENT.value]
    out = []
    if refl and suf:
        out.append("T3")
    if tri and suf and gauge in ("M1", "M2"):
        out.append("T5")
    if refl:
        out.append("T2")
    if tri and gauge in ("M1", "M2"):
        out.append("T4")
    if tri and gauge == "M3":
        out.append("T1")
    return tuple(out)


def _axiom_hypothesis(structure: StructureClass, name: str) -> HypothesisCheck:
    rep = structure.reports[name]
    return HypothesisCheck(
        name=name,
        clause=CLAUSE[name],
        status=VERIFIED if rep.holds else FAILED,
        note=f"checked {rep.checked_count} tuples",
        witness=None if rep.holds else {"pair": rep.witness, "distances": rep.distances},
    )


def _phi_hypothesis(name: str, verdict: Verdict) -> HypothesisCheck:
    return HypothesisCheck(
        name=name,
        clause=CLAUSE[name],
        status=VERIFIED if verdict.holds else FAILED,
        witness=None if verdict.holds else verdict.witness,
    )


def _derive_phi_seeds(
    space: DistanceStructure, tmap: SelfMapSpec, starts, tol: float
) -> tuple[float, ...]:
    """Initial step lengths d(x0, Tx0) of the planned starts, largest first."""
    seeds = []
    for x0 in starts:
        if space.kind == "tabulated":
            rho0 = float(space.matrix[int(x0), tmap.apply_index(int(x0))])
        else:
            tx = tmap.apply_point(float(x0))
            if not np.isfinite(tx):
                continue
            rho0 = float(space.distance(float(x0), tx))
        if np.isfinite(rho0) and rho0 > tol:
            seeds.append(rho0)
    ordered = tuple(sorted(set(seeds), reverse=True)[:8])
    return ordered if ordered else (1.0,)


def run_theorem_harness(
    space: DistanceStructure,
    tmap: SelfMapSpec,
    phi: ComparisonFunction,
    gauge: str = "M1",
    starts=None,
    assume_d_asymptotic: bool = False,
    tol: float = defaults.TOL,
    max_iters: int = defaults.MAX_ITERS,
    window: int = defaults.WINDOW,
    seed: int | None = None,
    phi_seeds=None,
    delta: float = defaults.SLACK,
) -> TheoremVerdict:
    """Full pipeline: classify, qualify phi, verify contraction, iterate.

    A failed hypothesis never raises; it yields conclusion_status
    "not-applicable" with the failure recorded.  "confirmed" additionally
    requires every sampled orbit to reach a d-fixed limit and all limits
    to agree under d (plus vanishing self-distance and brute-force
    agreement on the theorems with sufficiency).
    """
    if gauge not in GAUGES:
        raise MapError(f"unknown gauge {gauge!r}, expected one of {GAUGES}")
    base_seed = resolve_seed(seed)
    structure = classify_structure(space, delta)
    reports = structure.reports
    refl = reports[AxiomId.REFLEXIVE_TRIANGULAR.value].holds
    tri = reports[AxiomId.TRIANGULAR.value].holds

    if starts is None:
        starts = default_starts(space)
    starts = list(starts)
    if phi_seeds is None:
        phi_seeds = _derive_phi_seeds(space, tmap, starts, tol)

    phi_checks = {"normal": check_normal(phi)}
    phi_checks["asymptotic_normal"] = check_asymptotic_normal(
        phi, phi_seeds, max_iters=max_iters, tol=tol, seed=base_seed
    )
    phi_checks["nearly_right_admissible"] = check_nearly_right_admissible(phi)
    contraction = verify_contraction(space, tmap, phi, gauge, delta)

    applicable = _applicable_theorems(structure, gauge)
    theorem = applicable[0] if applicable else None

    traces = [
        iterate(space, tmap, x0, max_iters=max_iters, tol=tol, window=window)
        for x0 in starts
    ]
    traces.sort(key=lambda tr: tr.start)

    hypotheses = [
        HypothesisCheck(
            name="symmetric",
            clause=CLAUSE["symmetric"],
            status=VERIFIED,
            note="validated when the structure was loaded",
        )
    ]
    if theorem in ("T3", "T2"):
        hypotheses.append(_axiom_hypothesis(structure, "reflexive_triangular"))
    if theorem in ("T5", "T4", "T1"):
        hypotheses.append(_axiom_hypothesis(structure, "triangular"))
    if theorem in ("T3", "T5"):
        hypotheses.append(_axiom_hypothesis(structure, "sufficient"))
    if theorem is None:
        # No structural candidate: surface the axioms that gate dispatch.
        hypotheses.append(_axiom_hypothesis(structure, "reflexive_triangular"))
        hypotheses.append(_axiom_hypothesis(structure, "triangular"))
    hypotheses.append(
        HypothesisCheck(
            name="0_complete",
            clause=f"{COMPLETENESS_CLAUSE.get(theorem, '(c01)')} 0-complete",
            status=ASSUMED,
            note="not verifiable from finite data",
        )
    )
    for key in ("normal", "asymptotic_normal", "nearly_right_admissible"):
        hypotheses.append(_phi_hypothesis(key, phi_checks[key]))
    hypotheses.append(
        HypothesisCheck(
            name="contraction",
            clause=CLAUSE["contraction"],
            status=VERIFIED if contraction.holds else FAILED,
            note=f"gauge {gauge}, {contraction.checked_count} pairs, "
                 f"max slack {contraction.max_slack:.3e}",
            witness=None
            if contraction.holds
            else {"pair": contraction.witness, "values": contraction.values},
        )
    )

    # Vanishing orbit steps: derived from the descent lemmas when the
    # gauge cooperates, otherwise sampled (or taken on faith on request).
    lemma_gauge_ok = gauge == "M1" or (refl and gauge in ("M2", "M3")) or (tri and gauge == "M2")
    if contraction.holds and phi_checks["asymptotic_normal"].holds and lemma_gauge_ok:
        d_asym = HypothesisCheck(
            name="d_asymptotic",
            clause=CLAUSE["d_asymptotic"],
            status=DERIVED,
            note="follows from the contraction with an asymptotically normal "
                 "phi at this gauge",
        )
    elif assume_d_asymptotic:
        d_asym = HypothesisCheck(
            name="d_asymptotic", clause=CLAUSE["d_asymptotic"], status=ASSUMED,
            note="assumed by the caller",
        )
    else:
        bad = [tr for tr in traces if not tr.d_asymptotic]
        d_asym = HypothesisCheck(
            name="d_asymptotic",
            clause=CLAUSE["d_asymptotic"],
            status=FAILED if bad else VERIFIED,
            note=f"step lengths checked on {len(traces)} starts",
            witness=None if not bad else {"start": _as_point(space, bad[0].start)},
        )
    hypotheses.append(d_asym)

    failed = [h for h in hypotheses if h.status == FAILED]
    limits = [tr.limit for tr in traces]
    fixed_point_report = _fixed_point_report(space, tmap, traces, tol, theorem)

    conclusion_checks: list[dict] = []
    if theorem is None or failed:
        status = "not-applicable"
    else:
        conclusion_checks = _conclusion_checks(
            space, tmap, traces, tol, theorem, fixed_point_report
        )
        status = "confirmed" if all(c["ok"] for c in conclusion_checks) else "refuted"

    return TheoremVerdict(
        theorem_id=theorem,
        title=THEOREM_TITLES.get(theorem),
        applicable=applicable,
        conclusion_status=status,
        hypotheses=hypotheses,
        conclusion_checks=conclusion_checks,
        structure=structure,
        contraction=contraction,
        phi_checks=phi_checks,
        traces=[tr.summary() for tr in traces],
        fixed_point_report=fixed_point_report,
        options={
            "gauge": gauge,
            "tol": float(tol),
            "max_iters": int(max_iters),
            "window": int(window),
            "seed": base_seed,
            "starts": [_as_point(space, s) for s in starts],
            "phi_seeds": [float(s) for s in phi_seeds],
            "assume_d_asymptotic": bool(assume_d_asymptotic),
            "grid": space.grid,
        },
    )


def _pair_distance(space: DistanceStructure, a, b) -> float:
    if space.kind == "tabulated":
        return float(space.matrix[int(a), int(b)])
    return float(space.distance(float(a), float(b)))


def _fixed_point_report(space, tmap, traces, tol, theorem) -> dict:
    limits = [tr.limit for tr in traces if tr.limit is not None]
    report: dict = {
        "limits": [_as_point(space, z) for z in limits],
        "converged_starts": sum(tr.converged_0d for tr in traces),
        "total_starts": len(traces),
    }
    if limits:
        pair_max = 0.0
        for i in range(len(limits)):
            for j in range(i + 1, len(limits)):
                pair_max = max(pair_max, _pair_distance(space, limits[i], limits[j]))
        report["pairwise_d_max"] = pair_max
        report["self_distance_max"] = max(
            _pair_distance(space, z, z) for z in limits
        )
        disp = []
        for tr in traces:
            if tr.limit is not None:
                disp.append(_fixed_displacement(tr, tr.limit))
        report["fixed_displacement_max"] = float(max(disp))
    if space.kind == "tabulated" and tmap.kind == "tabulated":
        sets = brute_force_fixed_points(space, tmap, delta=tol)
        report["brute_d_fixed"] = list(sets.d_fixed)
        report["brute_exact_fixed"] = list(sets.exact)
    return report


def _conclusion_checks(space, tmap, traces, tol, theorem, fp_report) -> list[dict]:
    checks = []
    all_converged = all(tr.converged_0d for tr in traces)
    checks.append(
        {
            "name": "every start 0d-converges",
            "ok": bool(all_converged),
            "value": f"{fp_report['converged_starts']}/{fp_report['total_starts']}",
        }
    )
    if not all_converged:
        return checks
    checks.append(
        {
            "name": "limits d-fixed: d(z, Tz) <= tol",
            "ok": bool(fp_report["fixed_displacement_max"] <= tol),
            "value": fp_report["fixed_displacement_max"],
        }
    )
    checks.append(
        {
            "name": "limits pairwise within tol under d",
            "ok": bool(fp_report["pairwise_d_max"] <= tol),
            "value": fp_report["pairwise_d_max"],
        }
    )
    if theorem in ("T3", "T5"):
        checks.append(
            {
                "name": "limit self-distance d(z, z) <= tol",
                "ok": bool(fp_report["self_distance_max"] <= tol),
                "value": fp_report["self_distance_max"],
            }
        )
        limits = [tr.limit for tr in traces if tr.limit is not None]
        if space.kind == "tabulated":
            distinct = sorted(set(int(z) for z in limits))
            same = len(distinct) == 1
            checks.append(
                {
                    "name": "limits coincide as points",
                    "ok": bool(same),
                    "value": distinct,
                }
            )
            if same:
                z = distinct[0]
                agree = (
                    fp_report["brute_d_fixed"] == [z]
                    and fp_report["brute_exact_fixed"] == [z]
                )
                checks.append(
                    {
                        "name": "brute-force scan finds exactly the limit",
                        "ok": bool(agree),
                        "value": {
                            "d_fixed": fp_report["brute_d_fixed"],
                            "exact": fp_report["brute_exact_fixed"],
                            "limit": z,
                        },
                    }
                )
        else:
            spread = max(limits) - min(limits) if limits else 0.0
            checks.append(
                {
                    "name": "limits coincide as points",
                    "ok": bool(spread <= tol),
                    "value": float(spread),
                }
            )
    return checks
