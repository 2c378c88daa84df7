"""Dispatch layer over the numba and numpy kernel backends.

Higher modules call these wrappers only; the active backend is decided
per call via :mod:`fixlab.backend`, so a process can switch paths (the
benchmark does) and a broken numba install degrades to numpy silently
apart from a one-time warning.
"""

from __future__ import annotations

from typing import Any

import numpy as np

from . import backend
from . import _kernels_np as _np_impl
from .expr import EvaluationError, Program

ORBIT_STOPPED = _np_impl.ORBIT_STOPPED
ORBIT_HIT_CAP = _np_impl.ORBIT_HIT_CAP
ORBIT_EVAL_ERROR = _np_impl.ORBIT_EVAL_ERROR

_nb_impl: Any = None


def _nb():
    global _nb_impl
    if _nb_impl is None:
        from . import _kernels_nb

        _nb_impl = _kernels_nb
    return _nb_impl


def warmup() -> None:
    """Precompile the jitted kernels (no-op on the numpy backend)."""
    if backend.active() == "numba":
        _nb().warmup()


def eval_rows(program: Program, X: np.ndarray) -> np.ndarray:
    """Evaluate ``program`` over rows of variable bindings."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be 2-D (rows of bindings)")
    if backend.active() == "numba":
        out = np.empty(X.shape[0])
        _nb().eval_rows(program.code, program.imm, X, out)
        return out
    return _np_impl.eval_rows(program.code, program.imm, X)


def eval_pairs(program: Program, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Evaluate a two-variable program on aligned vectors ``a`` and ``b``."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    X = np.empty((a.size, 2))
    X[:, 0] = a
    X[:, 1] = b
    return eval_rows(program, X)


def eval_scalar(program: Program, v0: float, v1: float = 0.0) -> float:
    """One-off scalar evaluation with the kernel semantics (NaN poisoning)."""
    return float(_np_impl.eval_scalar(program.code, program.imm, float(v0), float(v1)))


def scan_triangle(
    D: np.ndarray, delta: float, reflexive: bool
) -> tuple[int, int, int, float, int]:
    D = np.ascontiguousarray(D, dtype=np.float64)
    if backend.active() == "numba":
        return _nb().scan_triangle(D, delta, reflexive)
    return _np_impl.scan_triangle(D, delta, reflexive)


def orbit_analytic(
    prog_map: Program,
    prog_dist: Program,
    x0: float,
    max_iters: int,
    tol: float,
    window: int,
) -> tuple[np.ndarray, np.ndarray, int]:
    if backend.active() == "numba":
        orbit, rho, n_pts, status = _nb().orbit_analytic(
            prog_map.code,
            prog_map.imm,
            prog_dist.code,
            prog_dist.imm,
            float(x0),
            max_iters,
            tol,
            window,
        )
        return orbit[:n_pts].copy(), rho[: n_pts - 1].copy(), status
    return _np_impl.orbit_analytic(
        prog_map.code,
        prog_map.imm,
        prog_dist.code,
        prog_dist.imm,
        float(x0),
        max_iters,
        tol,
        window,
    )


def orbit_table(
    tmap: np.ndarray,
    D: np.ndarray,
    i0: int,
    max_iters: int,
    tol: float,
    window: int,
) -> tuple[np.ndarray, np.ndarray, int]:
    tmap = np.ascontiguousarray(tmap, dtype=np.int64)
    D = np.ascontiguousarray(D, dtype=np.float64)
    if backend.active() == "numba":
        orbit, rho, n_pts, status = _nb().orbit_table(
            tmap, D, int(i0), max_iters, tol, window
        )
        return orbit[:n_pts].copy(), rho[: n_pts - 1].copy(), status
    return _np_impl.orbit_table(tmap, D, int(i0), max_iters, tol, window)


def phi_orbit_chunk(
    program: Program, r0: float, u: np.ndarray, tol: float
) -> tuple[int, float, int]:
    u = np.ascontiguousarray(u, dtype=np.float64)
    if backend.active() == "numba":
        return _nb().phi_orbit_chunk(program.code, program.imm, float(r0), u, tol)
    return _np_impl.phi_orbit_chunk(program.code, program.imm, float(r0), u, tol)


def lemma1_scan_points(
    prog_dist: Program, pts: np.ndarray, eps: float, j_hi: int
) -> tuple[np.ndarray, np.ndarray, int]:
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    if backend.active() == "numba":
        m_arr, n_arr, rows, status = _nb().lemma1_scan_points(
            prog_dist.code, prog_dist.imm, pts, eps, j_hi
        )
    else:
        m_arr, n_arr, rows, status = _np_impl.lemma1_scan_points(
            prog_dist.code, prog_dist.imm, pts, eps, j_hi
        )
    if status == 2:
        raise EvaluationError("distance evaluated to a non-finite value during the witness scan")
    return m_arr, n_arr, rows


def late_pair_max_points(
    prog_dist: Program, pts: np.ndarray, start: int
) -> tuple[float, int, int]:
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    if backend.active() == "numba":
        best, bi, bj, status = _nb().late_pair_max_points(
            prog_dist.code, prog_dist.imm, pts, int(start)
        )
    else:
        best, bi, bj, status = _np_impl.late_pair_max_points(
            prog_dist.code, prog_dist.imm, pts, int(start)
        )
    if status == 2:
        raise EvaluationError("distance evaluated to a non-finite value during the pair scan")
    return float(best), int(bi), int(bj)
