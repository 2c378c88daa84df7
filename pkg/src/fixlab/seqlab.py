"""Distance-sequence diagnostics on finite prefixes.

Works on a prefix x_0..x_N of an abstract sequence, given either as
point values with a two-variable distance expression (default |x - y|)
or as a raw (N+1) x (N+1) distance table.  Everything reported is an
exact inequality attained on the prefix; nothing is extrapolated.

The witness construction mirrors the classic double-minimum rule: with
A(j) = {(m, n) : j <= m < n <= N, d(x_m, x_n) >= eps}, each row takes
m(j) as the least first coordinate appearing in A(j) and n(j) as the
least partner of m(j).  Rows stop at the first empty A(j) (partial
report).  j_eps is the least rank from which every consecutive distance
stays strictly below eps, so rows with j >= j_eps automatically satisfy
n(j) - m(j) >= 2 and d(x_m, x_{n-1}) < eps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import defaults, kernels
from .expr import EvaluationError, Expression, Program, compile_program, parse
from .phi import ComparisonFunction, estimate_L_plus
from .space import DistanceStructure
from .verdicts import Verdict


class SequenceError(ValueError):
    """Raised when a sequence prefix is rejected at load."""


@dataclass(frozen=True, eq=False)
class SequencePrefix:
    kind: str  # "points" | "table"
    points: np.ndarray | None
    program: Program | None
    table: np.ndarray | None
    source: str

    @property
    def n_points(self) -> int:
        return self.points.size if self.kind == "points" else self.table.shape[0]

    @property
    def last(self) -> int:
        return self.n_points - 1

    def d(self, m: int, n: int) -> float:
        if self.kind == "table":
            return float(self.table[m, n])
        value = kernels.eval_scalar(
            self.program, float(self.points[m]), float(self.points[n])
        )
        if not np.isfinite(value):
            raise EvaluationError(f"d(x_{m}, x_{n}) evaluated to {value!r}")
        return value

    def gaps(self) -> np.ndarray:
        """Consecutive distances d(x_k, x_{k+1}), k = 0..N-1."""
        if self.kind == "table":
            return np.asarray(
                [self.table[k, k + 1] for k in range(self.last)], dtype=np.float64
            )
        vals = kernels.eval_pairs(self.program, self.points[:-1], self.points[1:])
        if not np.isfinite(vals).all():
            raise EvaluationError("a consecutive distance evaluated non-finite")
        return vals


def _check_points(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64).ravel()
    if pts.size < 4:
        raise SequenceError(f"prefix needs at least 4 points, got {pts.size}")
    if not np.isfinite(pts).all():
        raise SequenceError("sequence points must all be finite")
    return pts


def sequence_from_points(
    points,
    metric: str | Expression | DistanceStructure = "abs(x - y)",
) -> SequencePrefix:
    """Point-valued prefix under a distance expression or structure.

    Passing a tabulated DistanceStructure reads the points as indices
    and materializes the pair table; an analytic structure contributes
    its distance expression (points must lie in its domain).
    """
    if isinstance(metric, DistanceStructure):
        if metric.kind == "tabulated":
            idx = np.asarray(points)
            if idx.ndim != 1 or idx.size < 4:
                raise SequenceError("prefix needs at least 4 point indices")
            if not np.issubdtype(idx.dtype, np.integer):
                if not np.all(idx == np.floor(idx)):
                    raise SequenceError("tabulated sequence points must be indices")
                idx = idx.astype(np.int64)
            if idx.min() < 0 or idx.max() >= metric.n:
                raise SequenceError(f"point index outside [0, {metric.n})")
            table = metric.matrix[np.ix_(idx, idx)]
            return SequencePrefix(
                kind="table", points=None, program=None, table=table,
                source=f"indices into {metric.source or 'table'}",
            )
        pts = _check_points(points)
        lo, hi = metric.lo - defaults.SLACK, metric.hi + defaults.SLACK
        if pts.min() < lo or pts.max() > hi:
            raise SequenceError(
                f"sequence points leave the domain [{metric.lo}, {metric.hi}]"
            )
        return SequencePrefix(
            kind="points", points=pts, program=metric.program, table=None,
            source=metric.source,
        )
    expr = parse(metric, {"x", "y"}) if isinstance(metric, str) else metric
    program = compile_program(expr, ("x", "y"))
    pts = _check_points(points)
    return SequencePrefix(
        kind="points", points=pts, program=program, table=None,
        source=metric if isinstance(metric, str) else "expression",
    )


def sequence_from_table(table) -> SequencePrefix:
    """Raw pair-distance table for an abstract prefix."""
    T = np.asarray(table, dtype=np.float64)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise SequenceError("distance table must be square")
    if T.shape[0] < 4:
        raise SequenceError(f"prefix needs at least 4 points, got {T.shape[0]}")
    if not np.isfinite(T).all():
        raise SequenceError("distance table must be finite")
    if T.min() < 0:
        raise SequenceError("distances must be non-negative")
    if np.abs(T - T.T).max() > defaults.SLACK:
        raise SequenceError("distance table must be symmetric")
    return SequencePrefix(kind="table", points=None, program=None, table=T,
                          source="table")


def load_sequence_file(path, metric: str = "abs(x - y)") -> SequencePrefix:
    """One point per line, or one distance row per line (plain decimals)."""
    with open(path, encoding="utf-8") as fh:
        rows = [line.split() for line in fh if line.strip()]
    if not rows:
        raise SequenceError(f"{path}: empty sequence file")
    widths = {len(r) for r in rows}
    try:
        values = [[float(tok) for tok in row] for row in rows]
    except ValueError as exc:
        raise SequenceError(f"{path}: non-numeric entry ({exc})") from None
    if widths == {1}:
        return sequence_from_points([r[0] for r in values], metric)
    if widths == {len(rows)}:
        return sequence_from_table(values)
    raise SequenceError(
        f"{path}: expected one value per line or an NxN table, got row widths {sorted(widths)}"
    )


# ---------------------------------------------------------------------------
# Semi-Cauchy profiling


@dataclass(frozen=True)
class SemiCauchyProfile:
    n_points: int
    tol: float
    eps: float
    semi_cauchy: bool
    onset: int | None
    final_gap: float
    max_tail_gap: float
    late_pair_max: float | None
    late_pair: tuple[int, int] | None
    cauchy_violation: bool | None


def _late_pair_max(prefix: SequencePrefix, start: int) -> tuple[float, int, int]:
    if prefix.kind == "points":
        return kernels.late_pair_max_points(prefix.program, prefix.points, start)
    sub = prefix.table[start:, start:]
    iu = np.triu_indices(sub.shape[0], k=1)
    vals = sub[iu]
    k = int(np.argmax(vals))
    return float(vals[k]), start + int(iu[0][k]), start + int(iu[1][k])


def semi_cauchy_profile(
    prefix: SequencePrefix, tol: float = defaults.TOL, eps: float | None = None
) -> SemiCauchyProfile:
    """Consecutive-gap profile plus a scan for surviving large pairs.

    semi-Cauchy means the trailing window of consecutive distances sits
    at or below tol.  When it does, every pair past the onset (the first
    rank after the last oversized gap) is scanned; a maximum of at least
    eps (default 2 * tol) counts as a Cauchy violation.
    """
    gaps = prefix.gaps()
    window = min(defaults.WINDOW, gaps.size)
    tail = gaps[-window:]
    semi = bool((tail <= tol).all())
    eps_used = float(eps) if eps is not None else 2.0 * tol
    onset = None
    late_max = None
    late_pair = None
    violation = None
    if semi:
        oversized = np.nonzero(gaps > tol)[0]
        onset = int(oversized[-1] + 1) if oversized.size else 0
        late_max, bi, bj = _late_pair_max(prefix, onset)
        late_pair = (bi, bj)
        violation = bool(late_max >= eps_used)
    return SemiCauchyProfile(
        n_points=prefix.n_points,
        tol=float(tol),
        eps=eps_used,
        semi_cauchy=semi,
        onset=onset,
        final_gap=float(gaps[-1]),
        max_tail_gap=float(tail.max()),
        late_pair_max=None if late_max is None else float(late_max),
        late_pair=late_pair,
        cauchy_violation=violation,
    )


# ---------------------------------------------------------------------------
# Witness rows


@dataclass(frozen=True)
class WitnessRow:
    j: int
    m: int
    n: int
    d_mn: float          # d(x_m, x_n) >= eps
    d_m_nm1: float       # d(x_m, x_{n-1}), < eps once j >= j_eps
    d_nm1_n: float       # d(x_{n-1}, x_n), the sandwich increment
    diagnostics: dict[str, float | None]  # d(x_{m+p}, x_{n+q}), p,q in {0,1}


@dataclass(frozen=True)
class WitnessReport:
    eps: float
    eps_auto: bool
    j_eps: int
    j_max: int
    rows: tuple[WitnessRow, ...]
    complete: bool  # every j <= j_max produced a row
    n_points: int


def _auto_eps(prefix: SequencePrefix) -> float:
    """Half the largest pair distance over the second half of the prefix."""
    start = prefix.last // 2
    best, _, _ = _late_pair_max(prefix, start)
    if not best > 0.0:
        raise SequenceError("auto eps failed: the late pairs are all at distance 0")
    return 0.5 * best


def _scan_table(table: np.ndarray, eps: float, j_hi: int):
    last = table.shape[0] - 1
    m_arr = np.full(j_hi + 1, -1, dtype=np.int64)
    n_arr = np.full(j_hi + 1, -1, dtype=np.int64)
    rows = 0
    m_floor = 0
    for j in range(j_hi + 1):
        m = max(j, m_floor)
        hit = -1
        while m < last:
            cand = np.nonzero(table[m, m + 1:] >= eps)[0]
            if cand.size:
                hit = m + 1 + int(cand[0])
                break
            m += 1
        if hit < 0:
            break
        m_arr[j] = m
        n_arr[j] = hit
        m_floor = m
        rows = j + 1
    return m_arr, n_arr, rows


def lemma1_witness(
    prefix: SequencePrefix,
    eps: float | None = None,
    j_max: int = 100,
) -> WitnessReport:
    """Minimal oversized-pair rows (j, m(j), n(j)) for j = 0..j_max.

    eps=None picks half the largest pair distance over the second half
    of the prefix.  An empty A(j) before j_max truncates the report
    (complete=False); an A(0) with no pair at all is an error, since the
    construction needs at least one oversized pair to start from.
    """
    eps_auto = eps is None
    eps_val = _auto_eps(prefix) if eps_auto else float(eps)
    if not (np.isfinite(eps_val) and eps_val > 0.0):
        raise SequenceError(f"eps must be a positive real, got {eps_val!r}")
    j_hi = min(int(j_max), prefix.last - 1)
    if j_hi < 0:
        raise SequenceError("prefix too short for any witness row")

    if prefix.kind == "points":
        m_arr, n_arr, rows = kernels.lemma1_scan_points(
            prefix.program, prefix.points, eps_val, j_hi
        )
    else:
        m_arr, n_arr, rows = _scan_table(prefix.table, eps_val, j_hi)
    if rows == 0:
        raise SequenceError(
            f"no pair in the prefix reaches eps = {eps_val!r}; nothing to witness"
        )

    gaps = prefix.gaps()
    oversized = np.nonzero(gaps >= eps_val)[0]
    j_eps = int(oversized[-1] + 1) if oversized.size else 0

    out = []
    last = prefix.last
    for j in range(rows):
        m, n = int(m_arr[j]), int(n_arr[j])
        diag: dict[str, float | None] = {}
        for p in (0, 1):
            for q in (0, 1):
                key = f"p{p}q{q}"
                if m + p <= last and n + q <= last:
                    diag[key] = prefix.d(m + p, n + q)
                else:
                    diag[key] = None
        out.append(
            WitnessRow(
                j=j,
                m=m,
                n=n,
                d_mn=prefix.d(m, n),
                d_m_nm1=prefix.d(m, n - 1),
                d_nm1_n=prefix.d(n - 1, n),
                diagnostics=diag,
            )
        )
    return WitnessReport(
        eps=float(eps_val),
        eps_auto=eps_auto,
        j_eps=j_eps,
        j_max=j_hi,
        rows=tuple(out),
        complete=(rows == j_hi + 1),
        n_points=prefix.n_points,
    )


# ---------------------------------------------------------------------------
# Tail comparison of phi along a descent


def lemma2_check(
    phi: ComparisonFunction,
    s: float,
    descent,
    window: int = defaults.WINDOW,
    gap_tol: float = defaults.TOL,
    slack: float = defaults.LEMMA2_SLACK,
) -> Verdict:
    """Tail sup of phi(t_n) along t_n -> s+ stays under the envelope at s.

    The descent must satisfy t_n >= s exactly and close to within
    gap_tol of s by its end; holds iff max phi over the trailing window
    is <= estimate_L_plus(phi, s).value + slack.
    """
    ts = np.asarray(descent, dtype=np.float64).ravel()
    if ts.size == 0:
        raise ValueError("descent sequence is empty")
    if not np.isfinite(ts).all():
        raise ValueError("descent sequence must be finite")
    if ts.min() < s:
        k = int(np.argmin(ts))
        raise ValueError(f"descent undershoots s: t_{k} = {ts[k]!r} < {s!r}")
    final_gap = float(ts[-1] - s)
    if final_gap > gap_tol:
        raise ValueError(
            f"descent has not closed on s: final gap {final_gap!r} > {gap_tol!r}"
        )
    estimate = estimate_L_plus(phi, s)
    tail = ts[-min(window, ts.size):]
    vals = phi.values(tail)
    if not np.isfinite(vals).all():
        raise EvaluationError("phi evaluated non-finite along the descent tail")
    tail_max = float(vals.max())
    bound = estimate.value + slack
    holds = tail_max <= bound
    return Verdict(
        check="lemma2_tail_bound",
        holds=bool(holds),
        witness=None if holds else float(tail[int(np.argmax(vals))]),
        details={
            "s": float(s),
            "estimate": float(estimate.value),
            "estimate_converged": estimate.converged,
            "tail_max": tail_max,
            "slack": float(slack),
            "window": int(min(window, ts.size)),
            "final_gap": final_gap,
        },
    )
