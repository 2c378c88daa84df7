"""Self-maps on a distance structure and the contraction gauges.

For a self-map T and points x, y the gauges are built from five
displacement readings:

    M1 = d(x, y)
    H  = max(d(x, Tx), d(y, Ty))
    L  = (d(x, Ty) + d(Tx, y)) / 2
    M2 = max(M1, H)
    M3 = max(M2, L)

``verify_contraction`` checks d(Tx, Ty) <= phi(G(x, y)) + slack over the
full point grid and reports the worst violation when it fails.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import defaults, kernels
from .expr import Expression, Program, compile_program, parse, to_source
from .phi import ComparisonFunction
from .space import DistanceStructure

GAUGES = ("M1", "M2", "M3")


class MapError(ValueError):
    """Raised when a self-map is rejected at load."""


@dataclass(frozen=True, eq=False)
class SelfMapSpec:
    kind: str  # "tabulated" | "analytic"
    indices: np.ndarray | None
    expr: Expression | None
    program: Program | None
    source: str

    def apply_point(self, x: float) -> float:
        if self.kind != "analytic":
            raise MapError("apply_point needs an analytic map")
        return kernels.eval_scalar(self.program, float(x))

    def apply_points(self, xs: np.ndarray) -> np.ndarray:
        if self.kind != "analytic":
            raise MapError("apply_points needs an analytic map")
        xs = np.asarray(xs, dtype=np.float64)
        return kernels.eval_rows(self.program, xs.reshape(-1, 1))

    def apply_index(self, i: int) -> int:
        if self.kind != "tabulated":
            raise MapError("apply_index needs a tabulated map")
        return int(self.indices[i])


def tabulated_map(indices, n: int) -> SelfMapSpec:
    """Load T as an index table; every image must land in [0, n)."""
    arr = np.asarray(indices)
    if arr.ndim != 1 or arr.size == 0:
        raise MapError("map table must be a non-empty 1-d sequence of indices")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.issubdtype(arr.dtype, np.floating) or not np.all(arr == np.floor(arr)):
            raise MapError("map table entries must be integers")
        arr = arr.astype(np.int64)
    arr = arr.astype(np.int64)
    if arr.size != n:
        raise MapError(f"map table has {arr.size} entries for {n} points")
    if arr.min() < 0 or arr.max() >= n:
        bad = int(arr[(arr < 0) | (arr >= n)][0])
        raise MapError(f"map image {bad} is outside [0, {n})")
    return SelfMapSpec(kind="tabulated", indices=arr, expr=None, program=None,
                       source=f"table[{n}]")


def analytic_map(source: str | Expression, space: DistanceStructure) -> SelfMapSpec:
    """Load T as an expression in x; images of the grid must stay in [lo, hi]."""
    if space.kind != "analytic":
        raise MapError("analytic map needs an analytic space")
    expr = parse(source, {"x"}) if isinstance(source, str) else source
    program = compile_program(expr, ("x",))
    spec = SelfMapSpec(
        kind="analytic",
        indices=None,
        expr=expr,
        program=program,
        source=source if isinstance(source, str) else to_source(expr),
    )
    images = spec.apply_points(space.points)
    lo = space.lo - defaults.SLACK
    hi = space.hi + defaults.SLACK
    ok = np.isfinite(images) & (images >= lo) & (images <= hi)
    if not ok.all():
        i = int(np.argmin(ok))
        raise MapError(
            f"map leaves the domain: T({space.points[i]!r}) = {images[i]!r} "
            f"not in [{space.lo}, {space.hi}]"
        )
    return spec


def map_images(space: DistanceStructure, tmap: SelfMapSpec) -> np.ndarray:
    """Images of every grid point: floats (analytic) or indices (tabulated)."""
    if tmap.kind == "analytic":
        return tmap.apply_points(space.points)
    if tmap.indices.size != space.n:
        raise MapError(f"map table covers {tmap.indices.size} points, space has {space.n}")
    return tmap.indices


@dataclass(frozen=True, eq=False)
class GaugeMatrices:
    """Pairwise displacement tables over the full grid."""

    D: np.ndarray      # d(x_i, x_j)
    DT: np.ndarray     # d(T x_i, T x_j)
    DxT: np.ndarray    # d(x_i, T x_j)
    selfdisp: np.ndarray  # d(x_i, T x_i)


def gauge_matrices(space: DistanceStructure, tmap: SelfMapSpec) -> GaugeMatrices:
    if tmap.kind == "tabulated":
        idx = map_images(space, tmap)
        D = space.matrix
        DT = D[np.ix_(idx, idx)]
        DxT = D[:, idx]
    else:
        pts = space.points
        images = map_images(space, tmap)
        D = space.matrix
        DT = space.distance_pairs(
            np.repeat(images, images.size), np.tile(images, images.size)
        ).reshape(images.size, images.size)
        DxT = space.distance_pairs(
            np.repeat(pts, images.size), np.tile(images, pts.size)
        ).reshape(pts.size, images.size)
    return GaugeMatrices(D=D, DT=DT, DxT=DxT, selfdisp=np.diagonal(DxT).copy())


def gauge_table(kind: str, mats: GaugeMatrices) -> np.ndarray:
    """The full n-by-n table of G(x_i, x_j) for one gauge."""
    if kind not in GAUGES:
        raise MapError(f"unknown gauge {kind!r}, expected one of {GAUGES}")
    m1 = mats.D
    if kind == "M1":
        return m1
    hang = np.maximum(mats.selfdisp[:, None], mats.selfdisp[None, :])
    m2 = np.maximum(m1, hang)
    if kind == "M2":
        return m2
    link = 0.5 * (mats.DxT + mats.DxT.T)
    return np.maximum(m2, link)


def gauge_value(
    space: DistanceStructure, tmap: SelfMapSpec, kind: str, x, y
) -> float:
    """G(x, y) for a single pair; x, y are points (analytic) or indices."""
    if kind not in GAUGES:
        raise MapError(f"unknown gauge {kind!r}, expected one of {GAUGES}")
    if tmap.kind == "tabulated":
        tx, ty = tmap.apply_index(int(x)), tmap.apply_index(int(y))
    else:
        tx, ty = tmap.apply_point(x), tmap.apply_point(y)
    m1 = space.distance(x, y)
    if kind == "M1":
        return m1
    hang = max(space.distance(x, tx), space.distance(y, ty))
    m2 = max(m1, hang)
    if kind == "M2":
        return m2
    link = 0.5 * (space.distance(x, ty) + space.distance(tx, y))
    return max(m2, link)


@dataclass(frozen=True)
class ContractionReport:
    gauge: str
    holds: bool
    max_slack: float
    witness: tuple | None
    values: dict | None
    checked_count: int
    grid: int


def verify_contraction(
    space: DistanceStructure,
    tmap: SelfMapSpec,
    phi: ComparisonFunction,
    kind: str = "M1",
    delta: float = defaults.SLACK,
) -> ContractionReport:
    """Check d(Tx, Ty) <= phi(G(x, y)) + delta over every grid pair.

    The witness is the pair with the largest violation, ties going to the
    lexicographically least (i, j).
    """
    mats = gauge_matrices(space, tmap)
    table = gauge_table(kind, mats)
    phi_g = kernels.eval_rows(phi.program, table.reshape(-1, 1)).reshape(table.shape)
    if not np.isfinite(phi_g).all():
        i, j = np.argwhere(~np.isfinite(phi_g))[0]
        raise MapError(
            f"phi({table[i, j]!r}) is not finite at pair ({i}, {j})"
        )
    slack = mats.DT - phi_g
    max_slack = float(slack.max())
    holds = max_slack <= delta
    witness = None
    values = None
    if not holds:
        flat = int(np.argmax(slack))  # C order picks the lex-least argmax
        i, j = divmod(flat, slack.shape[1])
        if space.kind == "tabulated":
            witness = (int(i), int(j))
        else:
            witness = (float(space.points[i]), float(space.points[j]))
        values = {
            "d(Tx,Ty)": float(mats.DT[i, j]),
            "G(x,y)": float(table[i, j]),
            "phi(G(x,y))": float(phi_g[i, j]),
        }
    return ContractionReport(
        gauge=kind,
        holds=bool(holds),
        max_slack=max_slack,
        witness=witness,
        values=values,
        checked_count=int(table.size),
        grid=space.grid,
    )
