"""Symmetric distance structures and their axiom checks.

A structure is either a tabulated n-by-n matrix over points 0..n-1 or an
analytic two-variable expression d(x, y) sampled on a uniform grid over
[lo, hi].  Symmetry is enforced at load; the remaining axioms are checked
on demand over all sampled pairs or triples:

    triangular             d(x,z) <= d(x,y) + d(y,z)
    reflexive_triangular   d(x,z) + d(y,y) <= d(x,y) + d(y,z)
    sufficient             d(x,y) = 0  implies  x = y
    strongly_sufficient    d(x,x) = d(y,y) = d(x,y)  implies  x = y
    matthews               max(d(x,x), d(y,y)) <= d(x,y)

Every inequality carries the additive slack ``defaults.SLACK``.  A failed
check reports the sampled tuple with the largest violation (ties broken
lexicographically), which is deterministic however the scan is split.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import defaults, kernels
from .expr import Expression, Program, compile_program, parse, to_source


class SpaceError(ValueError):
    """Raised when a distance structure is rejected at load."""


class AxiomId(str, Enum):
    TRIANGULAR = "triangular"
    REFLEXIVE_TRIANGULAR = "reflexive_triangular"
    SUFFICIENT = "sufficient"
    STRONGLY_SUFFICIENT = "strongly_sufficient"
    MATTHEWS = "matthews"


# Taxonomy labels, most specific first.
LABEL_STANDARD = "standard_metric"
LABEL_PARTIAL = "partial_metric"
LABEL_ALMOST_PARTIAL = "almost_partial_metric"
LABEL_WEAK_ALMOST_PARTIAL = "weak_almost_partial_metric"
LABEL_TRIANGULAR = "triangular_symmetric"
LABEL_SYMMETRIC = "symmetric_only"

SELF_DISTANCE_CHECK = "zero_self_distance"


@dataclass(frozen=True)
class AxiomReport:
    axiom: str
    holds: bool
    witness: tuple[float, ...] | None
    distances: dict[str, float]
    checked_count: int
    grid: int


@dataclass(frozen=True)
class StructureClass:
    label: str
    labels: tuple[str, ...]
    reports: dict[str, AxiomReport]


@dataclass(frozen=True, eq=False)
class DistanceStructure:
    """A symmetric distance with a sampling plan for the axiom scans."""

    kind: str  # "tabulated" | "analytic"
    matrix: np.ndarray  # distances over the sample points
    points: np.ndarray  # point indices (tabulated) or grid coordinates
    expr: Expression | None = None
    program: Program | None = None
    lo: float = 0.0
    hi: float = 0.0
    grid: int = 0
    source: str = ""

    @property
    def n(self) -> int:
        return self.points.size

    def distance(self, a: float, b: float) -> float:
        """d(a, b) for two points (indices when tabulated)."""
        if self.kind == "tabulated":
            return float(self.matrix[int(a), int(b)])
        return kernels.eval_scalar(self.program, float(a), float(b))

    def distance_pairs(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Vectorized d over aligned point arrays."""
        if self.kind == "tabulated":
            ai = np.asarray(a, dtype=np.int64)
            bi = np.asarray(b, dtype=np.int64)
            return self.matrix[ai, bi].astype(np.float64)
        return kernels.eval_pairs(self.program, a, b)

    def describe(self) -> str:
        if self.kind == "tabulated":
            return f"tabulated distance on {self.n} points"
        return f"d(x, y) = {self.source} on [{self.lo}, {self.hi}], grid {self.grid}"


def _validate_matrix(D: np.ndarray, delta: float, what: str) -> np.ndarray:
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise SpaceError(f"{what}: distance matrix must be square, got shape {D.shape}")
    if D.shape[0] < 1:
        raise SpaceError(f"{what}: need at least one point")
    if not np.isfinite(D).all():
        raise SpaceError(f"{what}: non-finite distance entries")
    if (D < 0.0).any():
        i, j = np.unravel_index(int(np.argmin(D)), D.shape)
        raise SpaceError(f"{what}: negative distance d({i},{j}) = {D[i, j]!r}")
    gap = np.abs(D - D.T)
    worst = float(gap.max()) if D.size else 0.0
    if worst > delta:
        i, j = np.unravel_index(int(np.argmax(gap)), gap.shape)
        raise SpaceError(
            f"{what}: not symmetric within {delta}: "
            f"d({i},{j}) = {D[i, j]!r} but d({j},{i}) = {D[j, i]!r}"
        )
    return D


def tabulated_space(matrix: np.ndarray, delta: float = defaults.SLACK) -> DistanceStructure:
    """Load a tabulated structure; rejects asymmetry and negative entries."""
    D = _validate_matrix(matrix, delta, "tabulated structure")
    n = D.shape[0]
    return DistanceStructure(
        kind="tabulated",
        matrix=D,
        points=np.arange(n, dtype=np.int64),
        grid=n,
    )


def analytic_space(
    source: str | Expression,
    lo: float,
    hi: float,
    grid: int = defaults.GRID,
    delta: float = defaults.SLACK,
) -> DistanceStructure:
    """Load an analytic structure d(x, y) sampled on ``grid`` uniform points.

    The grid includes both endpoints.  Distances over the full grid are
    evaluated once at load; non-finite values, negatives, and asymmetry
    beyond ``delta`` are load errors.
    """
    if grid < 2:
        raise SpaceError(f"grid must be at least 2, got {grid}")
    if not (np.isfinite(lo) and np.isfinite(hi)) or not lo < hi:
        raise SpaceError(f"domain must satisfy lo < hi, got [{lo}, {hi}]")
    expr = parse(source, {"x", "y"}) if isinstance(source, str) else source
    program = compile_program(expr, ("x", "y"))
    pts = np.linspace(lo, hi, grid)
    xx, yy = np.meshgrid(pts, pts, indexing="ij")
    D = kernels.eval_pairs(program, xx.ravel(), yy.ravel()).reshape(grid, grid)
    D = _validate_matrix(D, delta, "analytic structure")
    return DistanceStructure(
        kind="analytic",
        matrix=D,
        points=pts,
        expr=expr,
        program=program,
        lo=float(lo),
        hi=float(hi),
        grid=int(grid),
        source=source if isinstance(source, str) else to_source(expr),
    )


def _point_tuple(space: DistanceStructure, *idx: int) -> tuple[float, ...]:
    if space.kind == "tabulated":
        return tuple(int(space.points[i]) for i in idx)
    return tuple(float(space.points[i]) for i in idx)


def _best_pair(scores: np.ndarray) -> tuple[int, int, float]:
    """Largest score with lexicographically least (i, j) on ties."""
    best = float(scores.max())
    flat = int(np.argmax(scores == best))
    n = scores.shape[1]
    return flat // n, flat % n, best


def check_axiom(
    space: DistanceStructure, axiom: AxiomId | str, delta: float = defaults.SLACK
) -> AxiomReport:
    """Exhaustively check one axiom over the sampled pairs or triples."""
    axiom = AxiomId(axiom)
    D = space.matrix
    n = D.shape[0]
    diag = np.diagonal(D)

    if axiom in (AxiomId.TRIANGULAR, AxiomId.REFLEXIVE_TRIANGULAR):
        reflexive = axiom is AxiomId.REFLEXIVE_TRIANGULAR
        i, j, k, _, count = kernels.scan_triangle(D, delta, reflexive)
        holds = i < 0
        witness = None if holds else _point_tuple(space, i, j, k)
        distances: dict[str, float] = {}
        if not holds:
            distances = {
                "d(x,z)": float(D[i, k]),
                "d(x,y)": float(D[i, j]),
                "d(y,z)": float(D[j, k]),
            }
            if reflexive:
                distances["d(y,y)"] = float(D[j, j])
        return AxiomReport(axiom.value, holds, witness, distances, n**3, space.grid)

    offdiag = ~np.eye(n, dtype=bool)

    if axiom is AxiomId.SUFFICIENT:
        mask = offdiag & (D <= delta)
        if space.kind == "analytic":
            sep = np.abs(space.points[:, None] - space.points[None, :])
            mask &= sep > defaults.COORD_GUARD
        checked = n * n - n
        if not mask.any():
            return AxiomReport(axiom.value, True, None, {}, checked, space.grid)
        scores = np.where(mask, delta - D, -np.inf)
        i, j, _ = _best_pair(scores)
        return AxiomReport(
            axiom.value,
            False,
            _point_tuple(space, i, j),
            {"d(x,y)": float(D[i, j])},
            checked,
            space.grid,
        )

    if axiom is AxiomId.MATTHEWS:
        scores = np.maximum(diag[:, None], diag[None, :]) - D
        count_mask = scores > delta
        checked = n * n
        if not count_mask.any():
            return AxiomReport(axiom.value, True, None, {}, checked, space.grid)
        i, j, _ = _best_pair(np.where(count_mask, scores, -np.inf))
        return AxiomReport(
            axiom.value,
            False,
            _point_tuple(space, i, j),
            {
                "d(x,x)": float(D[i, i]),
                "d(y,y)": float(D[j, j]),
                "d(x,y)": float(D[i, j]),
            },
            checked,
            space.grid,
        )

    # strongly_sufficient
    dev = np.maximum(np.abs(diag[:, None] - D), np.abs(diag[None, :] - D))
    mask = offdiag & (dev <= delta)
    checked = n * n - n
    if not mask.any():
        return AxiomReport(axiom.value, True, None, {}, checked, space.grid)
    i, j, _ = _best_pair(np.where(mask, delta - dev, -np.inf))
    return AxiomReport(
        axiom.value,
        False,
        _point_tuple(space, i, j),
        {
            "d(x,x)": float(D[i, i]),
            "d(y,y)": float(D[j, j]),
            "d(x,y)": float(D[i, j]),
        },
        checked,
        space.grid,
    )


def _self_distance_report(space: DistanceStructure, delta: float) -> AxiomReport:
    diag = np.diagonal(space.matrix)
    bad = diag > delta
    if not bad.any():
        return AxiomReport(SELF_DISTANCE_CHECK, True, None, {}, space.n, space.grid)
    i = int(np.argmax(np.where(bad, diag, -np.inf)))
    return AxiomReport(
        SELF_DISTANCE_CHECK,
        False,
        _point_tuple(space, i),
        {"d(x,x)": float(diag[i])},
        space.n,
        space.grid,
    )


def classify_structure(
    space: DistanceStructure, delta: float = defaults.SLACK
) -> StructureClass:
    """Run every axiom check and name the structure.

    The most specific matching label wins; ``labels`` lists everything
    that applies, and ``reports`` keeps the full per-axiom evidence so a
    downstream failure can be traced to the sampled witness.
    """
    reports = {a.value: check_axiom(space, a, delta) for a in AxiomId}
    reports[SELF_DISTANCE_CHECK] = _self_distance_report(space, delta)

    ok = {name: rep.holds for name, rep in reports.items()}
    labels: list[str] = []
    if ok["triangular"] and ok["sufficient"] and ok[SELF_DISTANCE_CHECK]:
        labels.append(LABEL_STANDARD)
    if ok["reflexive_triangular"] and ok["strongly_sufficient"] and ok["matthews"]:
        labels.append(LABEL_PARTIAL)
    if ok["reflexive_triangular"] and ok["sufficient"]:
        labels.append(LABEL_ALMOST_PARTIAL)
    if ok["triangular"] and ok["sufficient"]:
        labels.append(LABEL_WEAK_ALMOST_PARTIAL)
    if ok["triangular"]:
        labels.append(LABEL_TRIANGULAR)
    labels.append(LABEL_SYMMETRIC)
    return StructureClass(labels[0], tuple(labels), reports)
